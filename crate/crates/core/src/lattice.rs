//! Compositions of N into k positive parts, in lexicographic order. This is
//! the interior-state ordering of the chain and the row order of tables.

pub fn binomial(n: u64, r: u64) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc as u64
}

/// Number of compositions of `n` into `k` parts, each at least 1.
pub fn composition_count(k: usize, n: u64) -> u64 {
    if k == 0 {
        return u64::from(n == 0);
    }
    if n < k as u64 {
        return 0;
    }
    binomial(n - 1, k as u64 - 1)
}

/// Lexicographic rank of a positive composition, or `None` if `parts` is not
/// a composition of `n` into positive parts.
pub fn composition_rank(parts: &[u64], n: u64) -> Option<usize> {
    if parts.iter().any(|&p| p == 0) || parts.iter().sum::<u64>() != n {
        return None;
    }
    let mut rank = 0u64;
    let mut rest = n;
    let mut k = parts.len();
    for &p in &parts[..parts.len() - 1] {
        // compositions of `rest` into `k` parts whose first part is < p
        rank += composition_count(k, rest) - composition_count(k, rest - p + 1);
        rest -= p;
        k -= 1;
    }
    Some(rank as usize)
}

/// Iterator over positive compositions of `n` into `k` parts, lexicographic.
pub struct Compositions {
    current: Vec<u64>,
    n: u64,
    done: bool,
}

impl Compositions {
    pub fn new(k: usize, n: u64) -> Self {
        assert!(k >= 1);
        if n < k as u64 {
            return Self {
                current: Vec::new(),
                n,
                done: true,
            };
        }
        let mut current = vec![1; k];
        current[k - 1] = n - (k as u64 - 1);
        Self {
            current,
            n,
            done: false,
        }
    }
}

impl Iterator for Compositions {
    type Item = Vec<u64>;

    fn next(&mut self) -> Option<Vec<u64>> {
        if self.done {
            return None;
        }
        let out = self.current.clone();
        let k = self.current.len();
        // Advance: find the rightmost position i < k-1 that can grow while
        // leaving at least 1 for every later part.
        let mut advanced = false;
        for i in (0..k.saturating_sub(1)).rev() {
            let prefix: u64 = self.current[..=i].iter().sum();
            let later = (k - 1 - i) as u64;
            if prefix + 1 + later <= self.n {
                self.current[i] += 1;
                for j in i + 1..k - 1 {
                    self.current[j] = 1;
                }
                let used: u64 = self.current[..k - 1].iter().sum();
                self.current[k - 1] = self.n - used;
                advanced = true;
                break;
            }
        }
        if !advanced {
            self.done = true;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(composition_count(3, 6), 10);
        assert_eq!(composition_count(3, 300), 44_551);
        assert_eq!(composition_count(4, 8), 35);
        assert_eq!(composition_count(4, 20), 969);
        assert_eq!(composition_count(3, 2), 0);
    }

    #[test]
    fn lexicographic_order_for_six() {
        let labels: Vec<String> = Compositions::new(3, 6)
            .map(|c| c.iter().map(u64::to_string).collect())
            .collect();
        assert_eq!(
            labels,
            ["114", "123", "132", "141", "213", "222", "231", "312", "321", "411"]
        );
    }

    #[test]
    fn rank_matches_enumeration() {
        for (k, n) in [(2, 9), (3, 11), (4, 12)] {
            for (i, c) in Compositions::new(k, n).enumerate() {
                assert_eq!(composition_rank(&c, n), Some(i), "{c:?}");
            }
            assert_eq!(Compositions::new(k, n).count() as u64, composition_count(k, n));
        }
        assert_eq!(composition_rank(&[0, 3, 3], 6), None);
        assert_eq!(composition_rank(&[1, 3, 3], 6), None);
    }
}
