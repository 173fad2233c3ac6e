//! Domain types shared by every engine: stacks, elimination orders, order
//! distributions, ICM / Plackett-Luce and the martingale identities.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

pub const MAX_PLAYERS: usize = 4;

/// Chip stacks of the live players, in player order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CapitalVector {
    stacks: Vec<u64>,
}

impl CapitalVector {
    /// Stacks for a live query: 2 to 4 players, every stack at least 1.
    pub fn new(stacks: impl Into<Vec<u64>>) -> Result<Self> {
        let stacks = stacks.into();
        if !(2..=MAX_PLAYERS).contains(&stacks.len()) {
            return Err(Error::InvalidCapitals(format!(
                "expected 2 to {MAX_PLAYERS} stacks, got {}",
                stacks.len()
            )));
        }
        if let Some(pos) = stacks.iter().position(|&s| s == 0) {
            return Err(Error::InvalidCapitals(format!(
                "stack of player {} is zero",
                pos + 1
            )));
        }
        Ok(Self { stacks })
    }

    pub fn stacks(&self) -> &[u64] {
        &self.stacks
    }

    pub fn players(&self) -> usize {
        self.stacks.len()
    }

    pub fn total(&self) -> u64 {
        self.stacks.iter().sum()
    }

    pub fn stack(&self, player: usize) -> u64 {
        self.stacks[player]
    }

    pub(crate) fn expect_players(&self, k: usize) -> Result<()> {
        if self.players() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: self.players(),
            });
        }
        Ok(())
    }
}

impl fmt::Display for CapitalVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.stacks.iter().map(u64::to_string).collect();
        write!(f, "({})", parts.join(","))
    }
}

impl FromStr for CapitalVector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let stacks = s
            .split(',')
            .map(|p| {
                p.trim().parse::<u64>().map_err(|e| Error::Parse {
                    what: "stacks",
                    detail: format!("`{p}`: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(stacks)
    }
}

/// An elimination order: position `j` holds the `j`-th eliminated player and
/// the last entry is the winner. Players are 0-based internally and printed
/// 1-based, so `"132"` means player 1 busts first and player 2 wins.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EliminationOrder {
    len: u8,
    players: [u8; MAX_PLAYERS],
}

impl EliminationOrder {
    pub fn new(players: &[usize]) -> Result<Self> {
        let k = players.len();
        if !(2..=MAX_PLAYERS).contains(&k) {
            return Err(Error::InvalidOrder(format!("length {k}")));
        }
        let mut seen = [false; MAX_PLAYERS];
        let mut out = [0u8; MAX_PLAYERS];
        for (slot, &p) in players.iter().enumerate() {
            if p >= k || seen[p] {
                return Err(Error::InvalidOrder(format!(
                    "{players:?} is not a permutation of 0..{k}"
                )));
            }
            seen[p] = true;
            out[slot] = p as u8;
        }
        Ok(Self {
            len: k as u8,
            players: out,
        })
    }

    pub fn identity(k: usize) -> Self {
        let ids: Vec<usize> = (0..k).collect();
        Self::new(&ids).expect("identity is a permutation")
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Player eliminated in position `j` (0-based).
    pub fn at(&self, j: usize) -> usize {
        debug_assert!(j < self.len());
        self.players[j] as usize
    }

    pub fn players(&self) -> impl Iterator<Item = usize> + '_ {
        self.players[..self.len()].iter().map(|&p| p as usize)
    }

    pub fn winner(&self) -> usize {
        self.at(self.len() - 1)
    }

    pub fn first_out(&self) -> usize {
        self.at(0)
    }

    /// Position at which `player` is eliminated (`len-1` for the winner).
    pub fn position_of(&self, player: usize) -> usize {
        self.players()
            .position(|p| p == player)
            .expect("player belongs to the order")
    }

    pub fn reversed(&self) -> Self {
        let mut out = *self;
        out.players[..self.len()].reverse();
        out
    }

    /// All `k!` orders in lexicographic order (123, 132, 213, ...).
    pub fn all(k: usize) -> Vec<Self> {
        let mut out = Vec::new();
        let mut current = Vec::with_capacity(k);
        let mut used = vec![false; k];
        fn rec(
            k: usize,
            current: &mut Vec<usize>,
            used: &mut [bool],
            out: &mut Vec<EliminationOrder>,
        ) {
            if current.len() == k {
                out.push(EliminationOrder::new(current).expect("built from a permutation"));
                return;
            }
            for p in 0..k {
                if !used[p] {
                    used[p] = true;
                    current.push(p);
                    rec(k, current, used, out);
                    current.pop();
                    used[p] = false;
                }
            }
        }
        rec(k, &mut current, &mut used, &mut out);
        out
    }
}

impl fmt::Display for EliminationOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.players() {
            write!(f, "{}", p + 1)?;
        }
        Ok(())
    }
}

impl fmt::Debug for EliminationOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "σ{self}")
    }
}

impl FromStr for EliminationOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let players = s
            .trim()
            .chars()
            .map(|c| match c.to_digit(10) {
                Some(d) if d >= 1 => Ok(d as usize - 1),
                _ => Err(Error::InvalidOrder(format!("`{s}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(&players)
    }
}

/// Which engine produced a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Engine {
    Exact,
    Jacobi,
    Icm,
    Interp,
    MonteCarlo,
    Regression,
}

impl Engine {
    pub fn tag(self) -> &'static str {
        match self {
            Engine::Exact => "exact",
            Engine::Jacobi => "jacobi",
            Engine::Icm => "icm",
            Engine::Interp => "interp",
            Engine::MonteCarlo => "mc",
            Engine::Regression => "regression",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "exact" => Engine::Exact,
            "jacobi" => Engine::Jacobi,
            "icm" => Engine::Icm,
            "interp" => Engine::Interp,
            "mc" => Engine::MonteCarlo,
            "regression" => Engine::Regression,
            other => {
                return Err(Error::Parse {
                    what: "engine",
                    detail: other.to_string(),
                })
            }
        })
    }
}

/// Probability of every elimination order of the live players.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderDistribution {
    players: usize,
    entries: BTreeMap<EliminationOrder, f64>,
    engine: Engine,
}

impl OrderDistribution {
    pub const SUM_TOLERANCE: f64 = 1e-9;

    /// Builds a distribution, checking coverage of all `k!` orders,
    /// nonnegativity and unit mass (within [`Self::SUM_TOLERANCE`]).
    pub fn new(
        players: usize,
        entries: impl IntoIterator<Item = (EliminationOrder, f64)>,
        engine: Engine,
    ) -> Result<Self> {
        let dist = Self::from_parts(players, entries, engine)?;
        let total = dist.total();
        if (total - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::Inconsistent(format!(
                "{engine} distribution sums to {total}"
            )));
        }
        Ok(dist)
    }

    /// Like [`Self::new`] but without the unit-mass check (used for interpolated
    /// and regression outputs whose mass is only approximately 1).
    pub fn from_parts(
        players: usize,
        entries: impl IntoIterator<Item = (EliminationOrder, f64)>,
        engine: Engine,
    ) -> Result<Self> {
        let entries: BTreeMap<_, _> = entries.into_iter().collect();
        for (order, &p) in &entries {
            if order.len() != players {
                return Err(Error::DimensionMismatch {
                    expected: players,
                    got: order.len(),
                });
            }
            if !(p >= -1e-12) || !p.is_finite() {
                return Err(Error::Inconsistent(format!("P({order}) = {p}")));
            }
        }
        let expected = (1..=players).product::<usize>();
        if entries.len() != expected {
            return Err(Error::Inconsistent(format!(
                "{} of {expected} orders present",
                entries.len()
            )));
        }
        Ok(Self {
            players,
            entries,
            engine,
        })
    }

    /// No checks beyond coverage; for predictors whose values are not
    /// guaranteed to be nonnegative.
    pub(crate) fn unchecked(
        players: usize,
        entries: impl IntoIterator<Item = (EliminationOrder, f64)>,
        engine: Engine,
    ) -> Self {
        let entries: BTreeMap<_, _> = entries.into_iter().collect();
        debug_assert_eq!(entries.len(), (1..=players).product::<usize>());
        Self {
            players,
            entries,
            engine,
        }
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn engine(&self) -> Engine {
        self.engine
    }

    pub fn get(&self, order: &EliminationOrder) -> f64 {
        self.entries.get(order).copied().unwrap_or(0.0)
    }

    /// Lookup by printed order, e.g. `dist.p("321")`. Panics on a malformed label.
    pub fn p(&self, label: &str) -> f64 {
        let order: EliminationOrder = label.parse().expect("valid order label");
        self.get(&order)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&EliminationOrder, &f64)> {
        self.entries.iter()
    }

    pub fn total(&self) -> f64 {
        self.entries.values().sum()
    }

    /// Probability that `player` is eliminated at position `place` (0 = first out).
    pub fn position_marginal(&self, player: usize, place: usize) -> f64 {
        self.entries
            .iter()
            .filter(|(o, _)| o.at(place) == player)
            .map(|(_, &p)| p)
            .sum()
    }

    pub fn winner_marginal(&self, player: usize) -> f64 {
        self.position_marginal(player, self.players - 1)
    }
}

/// Payouts from first place to last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayoutSchedule {
    cents: Vec<u64>,
}

impl PayoutSchedule {
    pub fn from_cents(cents: impl Into<Vec<u64>>) -> Self {
        Self {
            cents: cents.into(),
        }
    }

    /// Whole-dollar payouts.
    pub fn from_dollars(dollars: &[u64]) -> Self {
        Self::from_cents(dollars.iter().map(|d| d * 100).collect::<Vec<_>>())
    }

    pub fn places(&self) -> usize {
        self.cents.len()
    }

    pub fn cents(&self) -> &[u64] {
        &self.cents
    }

    pub fn pool_cents(&self) -> u64 {
        self.cents.iter().sum()
    }
}

impl FromStr for PayoutSchedule {
    type Err = Error;

    /// Comma-separated amounts in dollars, at most two decimals.
    fn from_str(s: &str) -> Result<Self> {
        let cents = s
            .split(',')
            .map(|p| parse_cents(p.trim()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_cents(cents))
    }
}

fn parse_cents(s: &str) -> Result<u64> {
    let bad = || Error::Parse {
        what: "payout",
        detail: s.to_string(),
    };
    let (whole, frac) = match s.split_once('.') {
        Some((w, f)) => (w, f),
        None => (s, ""),
    };
    if frac.len() > 2 || (whole.is_empty() && frac.is_empty()) {
        return Err(bad());
    }
    let whole: u64 = if whole.is_empty() {
        0
    } else {
        whole.parse().map_err(|_| bad())?
    };
    let frac_cents: u64 = match frac.len() {
        0 => 0,
        1 => frac.parse::<u64>().map_err(|_| bad())? * 10,
        _ => frac.parse().map_err(|_| bad())?,
    };
    Ok(whole * 100 + frac_cents)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedTimes {
    /// Expected rounds until the first player busts.
    pub t1: f64,
    /// Expected rounds until the second player busts.
    pub t2: f64,
}

/// Relabels the players so that querying the identity order on the returned
/// stacks gives `P_capitals(sigma)`: `out[j] = capitals[sigma(j)]`.
pub fn canonicalize(
    capitals: &CapitalVector,
    sigma: &EliminationOrder,
) -> Result<(CapitalVector, EliminationOrder)> {
    capitals.expect_players(sigma.len())?;
    let stacks: Vec<u64> = sigma.players().map(|p| capitals.stack(p)).collect();
    Ok((
        CapitalVector { stacks },
        EliminationOrder::identity(sigma.len()),
    ))
}

/// Same relabeling on raw stacks (zero stacks allowed).
pub(crate) fn permute_stacks(stacks: &[u64], sigma: &EliminationOrder) -> Vec<u64> {
    sigma.players().map(|p| stacks[p]).collect()
}

/// Sequential weight-proportional draws without replacement: the probability
/// that the urn yields `pi(0)`, then `pi(1)`, ...
pub fn plackett_luce(weights: &CapitalVector, pi: &EliminationOrder) -> Result<f64> {
    weights.expect_players(pi.len())?;
    let mut remaining = weights.total() as f64;
    let mut prob = 1.0;
    for p in pi.players() {
        let w = weights.stack(p) as f64;
        prob *= w / remaining;
        remaining -= w;
    }
    Ok(prob)
}

/// Exact rational Plackett-Luce probability.
pub fn plackett_luce_exact(weights: &CapitalVector, pi: &EliminationOrder) -> Result<BigRational> {
    weights.expect_players(pi.len())?;
    let mut remaining = BigInt::from(weights.total());
    let mut prob = BigRational::one();
    for p in pi.players() {
        let w = BigInt::from(weights.stack(p));
        prob *= BigRational::new(w.clone(), remaining.clone());
        remaining -= w;
    }
    Ok(prob)
}

/// Independent chip model: the winner is drawn proportionally to stack, then
/// the runner-up among the rest, and so on. This is Plackett-Luce on the
/// reversed elimination order.
pub fn icm_probability(capitals: &CapitalVector, sigma: &EliminationOrder) -> Result<f64> {
    plackett_luce(capitals, &sigma.reversed())
}

pub fn icm_probability_exact(
    capitals: &CapitalVector,
    sigma: &EliminationOrder,
) -> Result<BigRational> {
    plackett_luce_exact(capitals, &sigma.reversed())
}

pub fn icm_distribution(capitals: &CapitalVector) -> Result<OrderDistribution> {
    let k = capitals.players();
    let entries = EliminationOrder::all(k)
        .into_iter()
        .map(|o| icm_probability(capitals, &o).map(|p| (o, p)))
        .collect::<Result<Vec<_>>>()?;
    OrderDistribution::new(k, entries, Engine::Icm)
}

/// Probability that `player` ends up with every chip: stack / N.
pub fn winner_probability(capitals: &CapitalVector, player: usize) -> Result<f64> {
    if player >= capitals.players() {
        return Err(Error::PlayerOutOfRange {
            index: player,
            players: capitals.players(),
        });
    }
    Ok(capitals.stack(player) as f64 / capitals.total() as f64)
}

/// Expected rounds to the first and second eliminations for three players.
pub fn expected_times(capitals: &CapitalVector) -> Result<ExpectedTimes> {
    capitals.expect_players(3)?;
    let [a, b, c] = [0, 1, 2].map(|i| capitals.stack(i) as f64);
    Ok(ExpectedTimes {
        t1: 3.0 * a * b * c / (a + b + c),
        t2: a * b + a * c + b * c,
    })
}

/// The three optional-stopping identities, as (first order, complement,
/// player whose capital share bounds the pair):
/// P(123)+P(213) = C/N, P(132)+P(312) = B/N, P(231)+P(321) = A/N.
pub const IDENTITY_PAIRS: [(&str, &str, usize); 3] =
    [("213", "123", 2), ("312", "132", 1), ("321", "231", 0)];

/// Completes a three-player distribution from P(213), P(312), P(321).
pub fn complete_by_identities(
    partial: [f64; 3],
    capitals: &CapitalVector,
    engine: Engine,
) -> Result<OrderDistribution> {
    capitals.expect_players(3)?;
    let n = capitals.total() as f64;
    let mut entries = Vec::with_capacity(6);
    for (&given, &(known, complement, player)) in partial.iter().zip(IDENTITY_PAIRS.iter()) {
        let share = capitals.stack(player) as f64 / n;
        let rest = share - given;
        if given < -1e-9 || rest < -1e-9 {
            return Err(Error::Inconsistent(format!(
                "P({known}) = {given} is outside [0, {share}]"
            )));
        }
        entries.push((known.parse()?, given.max(0.0)));
        entries.push((complement.parse()?, rest.max(0.0)));
    }
    OrderDistribution::new(3, entries, engine)
}

/// Left-hand minus right-hand side of each identity, in [`IDENTITY_PAIRS`] order.
pub fn identity_residuals(dist: &OrderDistribution, capitals: &CapitalVector) -> [f64; 3] {
    let n = capitals.total() as f64;
    IDENTITY_PAIRS.map(|(a, b, player)| {
        dist.p(a) + dist.p(b) - capitals.stack(player) as f64 / n
    })
}

pub(crate) fn rational_to_f64(r: &BigRational) -> f64 {
    use num_traits::ToPrimitive;
    if r.is_zero() {
        return 0.0;
    }
    // Scale so numerator and denominator both fit comfortably in f64.
    let num = r.numer();
    let den = r.denom();
    let shift = num.bits().max(den.bits()).saturating_sub(1000) as usize;
    let n = (num >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (den >> shift).to_f64().unwrap_or(f64::NAN);
    if n.is_finite() && d.is_finite() && d != 0.0 {
        n / d
    } else {
        r.to_f64().unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn caps(s: &[u64]) -> CapitalVector {
        CapitalVector::new(s.to_vec()).unwrap()
    }

    fn order(s: &str) -> EliminationOrder {
        s.parse().unwrap()
    }

    #[test]
    fn canonicalize_permutes_indices() {
        let (c, o) = canonicalize(&caps(&[1, 2, 3]), &order("321")).unwrap();
        assert_eq!(c.stacks(), &[3, 2, 1]);
        assert_eq!(o, order("123"));

        let (c, _) = canonicalize(&caps(&[4, 5, 6]), &order("123")).unwrap();
        assert_eq!(c.stacks(), &[4, 5, 6]);

        let (c, o) = canonicalize(&caps(&[97, 125, 144, 1839]), &order("2143")).unwrap();
        assert_eq!(c.stacks(), &[125, 97, 1839, 144]);
        assert_eq!(o, order("1234"));
    }

    #[test]
    fn canonicalize_rejects_mismatch() {
        assert!(matches!(
            canonicalize(&caps(&[1, 2, 3]), &order("1234")),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn icm_small_example() {
        let p = icm_probability(&caps(&[1, 2, 3]), &order("321")).unwrap();
        assert!((p - 1.0 / 15.0).abs() < 1e-15);
        let exact = icm_probability_exact(&caps(&[1, 2, 3]), &order("321")).unwrap();
        assert_eq!(exact, BigRational::new(1.into(), 15.into()));
    }

    #[test]
    fn icm_matches_three_player_table() {
        // P(123) = C/N * B/(A+B) and friends.
        let (a, b, c) = (7.0, 11.0, 19.0);
        let n = a + b + c;
        let cv = caps(&[7, 11, 19]);
        let expect = [
            ("123", c / n * b / (a + b)),
            ("132", b / n * c / (a + c)),
            ("213", c / n * a / (a + b)),
            ("231", a / n * c / (b + c)),
            ("312", b / n * a / (a + c)),
            ("321", a / n * b / (b + c)),
        ];
        for (s, want) in expect {
            let got = icm_probability(&cv, &order(s)).unwrap();
            assert!((got - want).abs() < 1e-15, "{s}: {got} vs {want}");
        }
    }

    #[test]
    fn icm_wsop_row() {
        let cv = caps(&[169, 301, 817]);
        let want = [0.406548, 0.193791, 0.228261, 0.095960, 0.040086, 0.035354];
        for (o, w) in EliminationOrder::all(3).iter().zip(want) {
            let got = icm_probability(&cv, o).unwrap();
            assert!((got - w).abs() < 5e-7, "{o}: {got}");
        }
    }

    #[test]
    fn equal_weights_are_uniform() {
        for k in 2..=4 {
            let cv = caps(&vec![5; k]);
            let uniform = 1.0 / (1..=k).product::<usize>() as f64;
            for o in EliminationOrder::all(k) {
                assert!((plackett_luce(&cv, &o).unwrap() - uniform).abs() < 1e-15);
                assert!((icm_probability(&cv, &o).unwrap() - uniform).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn plackett_luce_direct_product() {
        let p = plackett_luce(&caps(&[1, 2, 3]), &order("321")).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn icm_sums_to_one_exactly() {
        for stacks in [vec![1, 2, 3], vec![3, 9, 17], vec![1, 1, 1, 27], vec![4, 6, 7, 13]] {
            let cv = caps(&stacks);
            let total: BigRational = EliminationOrder::all(cv.players())
                .iter()
                .map(|o| icm_probability_exact(&cv, o).unwrap())
                .sum();
            assert_eq!(total, BigRational::one());
        }
    }

    #[test]
    fn winner_probabilities() {
        let n = 40;
        let p = winner_probability(&caps(&[1, 1, n - 2]), 2).unwrap();
        assert!((p - (n - 2) as f64 / n as f64).abs() < 1e-15);
        assert!((winner_probability(&caps(&[5, 5, 5]), 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!((winner_probability(&caps(&[1, 2, 3, 4]), 3).unwrap() - 0.4).abs() < 1e-15);
        assert!(matches!(
            winner_probability(&caps(&[1, 2, 3]), 3),
            Err(Error::PlayerOutOfRange { .. })
        ));
    }

    #[test]
    fn expected_times_examples() {
        let t = expected_times(&caps(&[100, 100, 100])).unwrap();
        assert!((t.t1 - 10_000.0).abs() < 1e-9 && (t.t2 - 30_000.0).abs() < 1e-9);
        let t = expected_times(&caps(&[1, 1, 298])).unwrap();
        assert!((t.t1 - 2.98).abs() < 1e-12 && (t.t2 - 597.0).abs() < 1e-12);
        let t = expected_times(&caps(&[2, 3, 5])).unwrap();
        assert!((t.t1 - 9.0).abs() < 1e-12 && (t.t2 - 31.0).abs() < 1e-12);
        assert!(expected_times(&caps(&[1, 2, 3, 4])).is_err());
    }

    #[test]
    fn identities_fill_complements() {
        let cv = caps(&[2, 3, 5]);
        let d = complete_by_identities([0.190419015064, 0.07, 0.06], &cv, Engine::Exact).unwrap();
        assert!((d.p("123") - 0.309580984936).abs() < 1e-15);
        assert!((d.total() - 1.0).abs() < 1e-15);

        let d = complete_by_identities([0.5, 0.0, 0.0], &cv, Engine::Exact).unwrap();
        assert_eq!(d.p("123"), 0.0);

        assert!(complete_by_identities([0.6, 0.0, 0.0], &cv, Engine::Exact).is_err());
    }

    #[test]
    fn order_parsing_and_display() {
        let o = order("2143");
        assert_eq!(o.to_string(), "2143");
        assert_eq!(o.first_out(), 1);
        assert_eq!(o.winner(), 2);
        assert_eq!(o.reversed().to_string(), "3412");
        assert!("122".parse::<EliminationOrder>().is_err());
        assert!("104".parse::<EliminationOrder>().is_err());
        let all: Vec<String> = EliminationOrder::all(3).iter().map(|o| o.to_string()).collect();
        assert_eq!(all, ["123", "132", "213", "231", "312", "321"]);
    }

    #[test]
    fn payout_parsing() {
        let s: PayoutSchedule = "10000000,6000000,4000000.5".parse().unwrap();
        assert_eq!(s.cents(), &[1_000_000_000, 600_000_000, 400_000_050]);
        assert!("1.234".parse::<PayoutSchedule>().is_err());
    }

    #[test]
    fn rejects_bad_capitals() {
        assert!(CapitalVector::new(vec![1, 0, 3]).is_err());
        assert!(CapitalVector::new(vec![1]).is_err());
        assert!(CapitalVector::new(vec![1, 1, 1, 1, 1]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn icm_is_reversed_plackett_luce(stacks in proptest::collection::vec(1u64..500, 3..=4), idx in 0usize..24) {
                let cv = CapitalVector::new(stacks).unwrap();
                let orders = EliminationOrder::all(cv.players());
                let o = orders[idx % orders.len()];
                let a = icm_probability(&cv, &o).unwrap();
                let b = plackett_luce(&cv, &o.reversed()).unwrap();
                prop_assert_eq!(a, b);
            }

            #[test]
            fn canonical_relabeling_round_trips(stacks in proptest::collection::vec(1u64..500, 3..=4)) {
                let cv = CapitalVector::new(stacks).unwrap();
                for o in EliminationOrder::all(cv.players()) {
                    let (c, id) = canonicalize(&cv, &o).unwrap();
                    let direct = icm_probability(&cv, &o).unwrap();
                    let relabeled = icm_probability(&c, &id).unwrap();
                    prop_assert!((direct - relabeled).abs() < 1e-15);
                }
            }

            #[test]
            fn winner_shares_sum_to_one(stacks in proptest::collection::vec(1u64..10_000, 2..=4)) {
                let cv = CapitalVector::new(stacks).unwrap();
                let total: u64 = (0..cv.players()).map(|p| cv.stack(p)).sum();
                prop_assert_eq!(total, cv.total());
                let s: f64 = (0..cv.players()).map(|p| winner_probability(&cv, p).unwrap()).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }

            #[test]
            fn icm_satisfies_identities(stacks in proptest::collection::vec(1u64..1000, 3..=3)) {
                let cv = CapitalVector::new(stacks).unwrap();
                let d = icm_distribution(&cv).unwrap();
                for r in identity_residuals(&d, &cv) {
                    prop_assert!(r.abs() < 1e-12);
                }
            }
        }
    }
}
