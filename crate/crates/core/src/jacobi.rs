//! Whole-grid solves by monotone two-sided Jacobi iteration.
//!
//! Both bounds share the exact boundary data. The lower bound starts at 0 and
//! the upper bound at 1 on the interior; since the averaging map is monotone
//! and fixes the true solution, the synchronous iterates bracket it at every
//! sweep. The certified error of a midpoint is half the local gap.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::{ExactChain, State};
use crate::lattice::{composition_rank, Compositions};
use crate::model::{CapitalVector, EliminationOrder};

/// Update rule for a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SweepMode {
    /// Synchronous double-buffered sweeps; bounds are certified.
    #[default]
    Jacobi,
    /// In-place sweeps. Usually faster, but the gap is not a certificate.
    GaussSeidel,
}

#[derive(Debug, Clone, Copy)]
pub struct JacobiOptions {
    pub max_iter: Option<u64>,
    pub tol: f64,
    pub mode: SweepMode,
}

impl JacobiOptions {
    pub fn three() -> Self {
        Self {
            max_iter: None,
            tol: 1e-15,
            mode: SweepMode::Jacobi,
        }
    }

    pub fn four() -> Self {
        Self {
            max_iter: None,
            tol: 1e-9,
            mode: SweepMode::Jacobi,
        }
    }

    fn cap(&self, n: u64) -> u64 {
        self.max_iter.unwrap_or(2 * n * n)
    }
}

/// Lower and upper bounds over the interior, lexicographic order.
#[derive(Debug, Clone)]
pub struct BoundsGrid {
    k: usize,
    n: u64,
    order: EliminationOrder,
    lower: Vec<f64>,
    upper: Vec<f64>,
    iterations: u64,
    gap: f64,
    mode: SweepMode,
}

impl BoundsGrid {
    pub fn players(&self) -> usize {
        self.k
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn order(&self) -> EliminationOrder {
        self.order
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// Largest `upper - lower` over the interior.
    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn mode(&self) -> SweepMode {
        self.mode
    }

    pub fn certified_error(&self) -> f64 {
        self.gap / 2.0
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    fn index(&self, stacks: &[u64]) -> Result<usize> {
        if stacks.len() != self.k {
            return Err(Error::DimensionMismatch {
                expected: self.k,
                got: stacks.len(),
            });
        }
        composition_rank(stacks, self.n).ok_or_else(|| Error::NotInTable(stacks.to_vec()))
    }

    pub fn bounds(&self, stacks: &[u64]) -> Result<(f64, f64)> {
        let i = self.index(stacks)?;
        Ok((self.lower[i], self.upper[i]))
    }

    /// Midpoint at an interior state.
    pub fn value(&self, stacks: &[u64]) -> Result<f64> {
        let (l, u) = self.bounds(stacks)?;
        Ok(0.5 * (l + u))
    }

    pub fn value_at(&self, capitals: &CapitalVector) -> Result<f64> {
        self.value(capitals.stacks())
    }
}

/// Boundary data for order `sigma` on the three faces, face by face.
pub fn boundary_values_3(n: u64, sigma: &EliminationOrder) -> Result<Vec<(State, f64)>> {
    if sigma.len() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: sigma.len(),
        });
    }
    let mut out = Vec::with_capacity(3 * n as usize);
    for zero in 0..3 {
        for c in Compositions::new(2, n) {
            let mut s = [0u64; 4];
            let mut it = c.iter();
            for (p, slot) in s.iter_mut().enumerate().take(3) {
                if p != zero {
                    *slot = *it.next().expect("two parts");
                }
            }
            out.push((s, face_value_3(&s, n, sigma)));
        }
    }
    Ok(out)
}

fn face_value_3(s: &State, n: u64, sigma: &EliminationOrder) -> f64 {
    if s[sigma.at(0)] == 0 && s[sigma.at(1)] > 0 && s[sigma.at(2)] > 0 {
        s[sigma.at(2)] as f64 / n as f64
    } else {
        0.0
    }
}

/// Iteration state for `k = 3` on an `(N+1)²` padded grid indexed by
/// `a * (N + 1) + b`, with the third stack implied.
pub struct Jacobi3 {
    n: usize,
    order: EliminationOrder,
    lo: Vec<f64>,
    hi: Vec<f64>,
    lo_next: Vec<f64>,
    hi_next: Vec<f64>,
    iterations: u64,
    gap: f64,
    mode: SweepMode,
}

impl Jacobi3 {
    pub fn new(n: u64, sigma: &EliminationOrder, mode: SweepMode) -> Result<Self> {
        if sigma.len() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                got: sigma.len(),
            });
        }
        if n < 3 {
            return Err(Error::TotalTooSmall { k: 3, n });
        }
        let w = n as usize + 1;
        let mut lo = vec![0.0; w * w];
        let mut hi = vec![0.0; w * w];
        for (s, v) in boundary_values_3(n, sigma)? {
            let i = s[0] as usize * w + s[1] as usize;
            lo[i] = v;
            hi[i] = v;
        }
        for a in 1..n as usize {
            for b in 1..n as usize - a {
                hi[a * w + b] = 1.0;
            }
        }
        Ok(Self {
            n: n as usize,
            order: *sigma,
            lo_next: lo.clone(),
            hi_next: hi.clone(),
            lo,
            hi,
            iterations: 0,
            gap: 1.0,
            mode,
        })
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// Lower and upper bound at an interior state.
    pub fn bounds(&self, a: u64, b: u64) -> (f64, f64) {
        let i = a as usize * (self.n + 1) + b as usize;
        (self.lo[i], self.hi[i])
    }

    pub fn step(&mut self) {
        match self.mode {
            SweepMode::Jacobi => {
                sweep3(&self.lo, &mut self.lo_next, self.n);
                sweep3(&self.hi, &mut self.hi_next, self.n);
                std::mem::swap(&mut self.lo, &mut self.lo_next);
                std::mem::swap(&mut self.hi, &mut self.hi_next);
            }
            SweepMode::GaussSeidel => {
                sweep3_in_place(&mut self.lo, self.n);
                sweep3_in_place(&mut self.hi, self.n);
            }
        }
        self.iterations += 1;
        self.gap = self
            .interior_rows()
            .map(|(start, len)| {
                self.hi[start..start + len]
                    .iter()
                    .zip(&self.lo[start..start + len])
                    .map(|(h, l)| h - l)
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
    }

    fn interior_rows(&self) -> impl Iterator<Item = (usize, usize)> {
        let (n, w) = (self.n, self.n + 1);
        (1..n.saturating_sub(1)).map(move |a| (a * w + 1, n - 1 - a))
    }

    pub fn run(&mut self, opts: &JacobiOptions) {
        let cap = opts.cap(self.n as u64);
        while self.iterations < cap && self.gap > opts.tol {
            self.step();
        }
    }

    pub fn into_grid(self) -> BoundsGrid {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for (start, len) in self.interior_rows() {
            lower.extend_from_slice(&self.lo[start..start + len]);
            upper.extend_from_slice(&self.hi[start..start + len]);
        }
        BoundsGrid {
            k: 3,
            n: self.n as u64,
            order: self.order,
            lower,
            upper,
            iterations: self.iterations,
            gap: self.gap,
            mode: self.mode,
        }
    }
}

const SIXTH: f64 = 1.0 / 6.0;
const TWELFTH: f64 = 1.0 / 12.0;
const PAR_MIN_ROWS: usize = 64;

#[inline]
fn row3(prev: &[f64], cur: &[f64], next: &[f64], out: &mut [f64]) {
    // cells b = 1..len of a row; prev/next are rows a-1 / a+1 starting at b = 0
    for (j, o) in out.iter_mut().enumerate() {
        let b = j + 1;
        *o = (prev[b] + prev[b + 1] + cur[b - 1] + cur[b + 1] + next[b - 1] + next[b]) * SIXTH;
    }
}

fn sweep3(old: &[f64], new: &mut [f64], n: usize) {
    let w = n + 1;
    let rows = n.saturating_sub(2);
    let body = |(r, chunk): (usize, &mut [f64])| {
        let a = r + 1;
        let len = n - 1 - a;
        let prev = &old[(a - 1) * w..a * w];
        let cur = &old[a * w..(a + 1) * w];
        let next = &old[(a + 1) * w..(a + 2) * w];
        row3(prev, cur, next, &mut chunk[1..1 + len]);
    };
    let interior = &mut new[w..w + rows * w];
    if rows >= PAR_MIN_ROWS && rayon::current_num_threads() > 1 {
        interior.par_chunks_mut(w).enumerate().for_each(body);
    } else {
        interior.chunks_mut(w).enumerate().for_each(body);
    }
}

fn sweep3_in_place(buf: &mut [f64], n: usize) {
    let w = n + 1;
    for a in 1..n.saturating_sub(1) {
        for b in 1..n - a {
            let i = a * w + b;
            buf[i] = (buf[i - w] + buf[i - w + 1] + buf[i - 1] + buf[i + 1] + buf[i + w - 1]
                + buf[i + w])
                * SIXTH;
        }
    }
}

/// Solves for `P(sigma)` at every interior composition of `n`.
pub fn jacobi_solve_3(n: u64, sigma: &EliminationOrder, opts: &JacobiOptions) -> Result<BoundsGrid> {
    let mut it = Jacobi3::new(n, sigma, opts.mode)?;
    it.run(opts);
    Ok(it.into_grid())
}

/// Compact `k = 4` storage: rows `(a, b)` with `a + b <= N`, each holding
/// `c = 0..=N-a-b` contiguously; the fourth stack is implied.
struct Layout4 {
    n: usize,
    row_start: Vec<usize>,
    len: usize,
}

impl Layout4 {
    fn new(n: usize) -> Self {
        let w = n + 1;
        let mut row_start = vec![usize::MAX; w * w];
        let mut len = 0;
        for a in 0..=n {
            for b in 0..=n - a {
                row_start[a * w + b] = len;
                len += n - a - b + 1;
            }
        }
        Self { n, row_start, len }
    }

    #[inline]
    fn row(&self, a: usize, b: usize) -> usize {
        self.row_start[a * (self.n + 1) + b]
    }

    #[inline]
    fn index(&self, a: usize, b: usize, c: usize) -> usize {
        self.row(a, b) + c
    }

    /// Interior rows `(a, b, start, count)`: cells `c = 1..=count`.
    fn interior_rows(&self) -> impl Iterator<Item = (usize, usize, usize, usize)> + '_ {
        let n = self.n;
        (1..n).flat_map(move |a| {
            (1..n.saturating_sub(a)).filter_map(move |b| {
                let count = n.checked_sub(a + b + 1)?;
                (count >= 1).then(|| (a, b, self.row(a, b), count))
            })
        })
    }
}

/// Iteration state for `P(1234)` with `k = 4`.
pub struct Jacobi4 {
    layout: Layout4,
    lo: Vec<f64>,
    hi: Vec<f64>,
    lo_next: Vec<f64>,
    hi_next: Vec<f64>,
    iterations: u64,
    gap: f64,
    mode: SweepMode,
}

impl Jacobi4 {
    /// `face(b, c, d)` supplies the three-player `P(123)` on the face where
    /// player 1 is broke.
    pub fn new(n: u64, mode: SweepMode, face: impl Fn(u64, u64, u64) -> f64) -> Result<Self> {
        if n < 4 {
            return Err(Error::TotalTooSmall { k: 4, n });
        }
        let layout = Layout4::new(n as usize);
        let nu = n as usize;
        let mut lo = vec![0.0; layout.len];
        for b in 1..nu {
            for c in 1..nu - b {
                let d = nu - b - c;
                lo[layout.index(0, b, c)] = face(b as u64, c as u64, d as u64);
            }
        }
        let mut hi = lo.clone();
        for (_, _, start, count) in layout.interior_rows() {
            hi[start + 1..start + 1 + count].fill(1.0);
        }
        Ok(Self {
            lo_next: lo.clone(),
            hi_next: hi.clone(),
            lo,
            hi,
            layout,
            iterations: 0,
            gap: 1.0,
            mode,
        })
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    pub fn step(&mut self) {
        match self.mode {
            SweepMode::Jacobi => {
                sweep4(&self.layout, &self.lo, &mut self.lo_next);
                sweep4(&self.layout, &self.hi, &mut self.hi_next);
                std::mem::swap(&mut self.lo, &mut self.lo_next);
                std::mem::swap(&mut self.hi, &mut self.hi_next);
            }
            SweepMode::GaussSeidel => {
                sweep4_in_place(&self.layout, &mut self.lo);
                sweep4_in_place(&self.layout, &mut self.hi);
            }
        }
        self.iterations += 1;
        let mut gap = 0.0f64;
        for (_, _, start, count) in self.layout.interior_rows() {
            let r = start + 1..start + 1 + count;
            for (h, l) in self.hi[r.clone()].iter().zip(&self.lo[r]) {
                gap = gap.max(h - l);
            }
        }
        self.gap = gap;
    }

    pub fn run(&mut self, opts: &JacobiOptions) {
        let cap = opts.cap(self.layout.n as u64);
        while self.iterations < cap && self.gap > opts.tol {
            self.step();
        }
    }

    pub fn into_grid(self) -> BoundsGrid {
        let mut lower = Vec::new();
        let mut upper = Vec::new();
        for (_, _, start, count) in self.layout.interior_rows() {
            lower.extend_from_slice(&self.lo[start + 1..start + 1 + count]);
            upper.extend_from_slice(&self.hi[start + 1..start + 1 + count]);
        }
        BoundsGrid {
            k: 4,
            n: self.layout.n as u64,
            order: EliminationOrder::identity(4),
            lower,
            upper,
            iterations: self.iterations,
            gap: self.gap,
            mode: self.mode,
        }
    }
}

#[inline]
fn row4(l: &Layout4, old: &[f64], a: usize, b: usize, count: usize, out: &mut [f64]) {
    let r = |a, b| &old[l.row(a, b)..];
    let (same, ap, am, bp, bm, apbm, ambp) = (
        r(a, b),
        r(a + 1, b),
        r(a - 1, b),
        r(a, b + 1),
        r(a, b - 1),
        r(a + 1, b - 1),
        r(a - 1, b + 1),
    );
    for (j, o) in out.iter_mut().enumerate().take(count) {
        let c = j + 1;
        *o = (same[c - 1]
            + same[c + 1]
            + ap[c]
            + ap[c - 1]
            + am[c]
            + am[c + 1]
            + bp[c]
            + bp[c - 1]
            + bm[c]
            + bm[c + 1]
            + apbm[c]
            + ambp[c])
            * TWELFTH;
    }
}

fn sweep4(l: &Layout4, old: &[f64], new: &mut [f64]) {
    for (a, b, start, count) in l.interior_rows() {
        row4(l, old, a, b, count, &mut new[start + 1..start + 1 + count]);
    }
}

fn sweep4_in_place(l: &Layout4, buf: &mut [f64]) {
    let mut row = Vec::new();
    for (a, b, start, count) in l.interior_rows() {
        row.resize(count, 0.0);
        // each cell still sees its in-row predecessor from this sweep
        for j in 0..count {
            let c = j + 1;
            let g = |a, b, c| buf[l.index(a, b, c)];
            let s = g(a, b, c - 1)
                + g(a, b, c + 1)
                + g(a + 1, b, c)
                + g(a + 1, b, c - 1)
                + g(a - 1, b, c)
                + g(a - 1, b, c + 1)
                + g(a, b + 1, c)
                + g(a, b + 1, c - 1)
                + g(a, b - 1, c)
                + g(a, b - 1, c + 1)
                + g(a + 1, b - 1, c)
                + g(a - 1, b + 1, c);
            buf[start + c] = s * TWELFTH;
            row[j] = buf[start + c];
        }
    }
}

/// Three-player canonical values used as face data for `n`: exact when the
/// exact engine accepts `n`, otherwise a nested Jacobi solve.
pub fn face_table_3(n: u64) -> Result<Vec<f64>> {
    let engine = ExactChain::shared();
    if n <= engine.config().cap_three {
        Ok(engine.table3(n)?.as_ref().clone())
    } else {
        Ok(jacobi_solve_3(n, &EliminationOrder::identity(3), &JacobiOptions::three())?.midpoints())
    }
}

/// Solves for `P(1234)` at every interior composition of `n`.
pub fn jacobi_solve_4(n: u64, opts: &JacobiOptions) -> Result<BoundsGrid> {
    let table = face_table_3(n)?;
    jacobi_solve_4_with(n, opts, |b, c, d| {
        table[composition_rank(&[b, c, d], n).expect("face composition")]
    })
}

pub fn jacobi_solve_4_with(
    n: u64,
    opts: &JacobiOptions,
    face: impl Fn(u64, u64, u64) -> f64,
) -> Result<BoundsGrid> {
    let mut it = Jacobi4::new(n, opts.mode, face)?;
    it.run(opts);
    Ok(it.into_grid())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::{exact_orders_3, exact_orders_4};
    use crate::model::identity_residuals;

    fn order(s: &str) -> EliminationOrder {
        s.parse().unwrap()
    }

    fn long(n: u64) -> JacobiOptions {
        JacobiOptions {
            max_iter: Some(10 * n * n),
            ..JacobiOptions::three()
        }
    }

    #[test]
    fn boundary_examples() {
        let v = boundary_values_3(6, &order("123")).unwrap();
        let get = |s: [u64; 3]| {
            v.iter()
                .find(|(t, _)| t[..3] == s)
                .map(|(_, x)| *x)
                .unwrap()
        };
        assert!((get([0, 2, 4]) - 4.0 / 6.0).abs() < 1e-15);
        assert_eq!(get([2, 0, 4]), 0.0);
        assert_eq!(get([3, 3, 0]), 0.0);
        let v = boundary_values_3(6, &order("321")).unwrap();
        // player 2 must bust before player 1: probability A / (A + B)
        let x = v.iter().find(|(t, _)| t[..3] == [1, 5, 0]).unwrap().1;
        assert!((x - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(v.len(), 15);
    }

    #[test]
    fn zero_iterations_has_unit_gap() {
        let it = Jacobi3::new(12, &order("123"), SweepMode::Jacobi).unwrap();
        let g = it.into_grid();
        assert_eq!(g.iterations(), 0);
        assert!(g.lower().iter().all(|&x| x == 0.0));
        assert!(g.upper().iter().all(|&x| x == 1.0));
        assert_eq!(g.len(), 55);
    }

    #[test]
    fn sandwich_is_monotone() {
        let mut it = Jacobi3::new(15, &order("213"), SweepMode::Jacobi).unwrap();
        let mut prev = it.gap();
        let mut before = it.bounds(4, 5);
        for _ in 0..200 {
            it.step();
            let now = it.bounds(4, 5);
            assert!(now.0 >= before.0 && now.1 <= before.1 && now.0 <= now.1);
            assert!(it.gap() <= prev);
            prev = it.gap();
            before = now;
        }
    }

    #[test]
    fn agrees_with_exact_small() {
        for s in ["123", "231", "312"] {
            let g = jacobi_solve_3(20, &order(s), &long(20)).unwrap();
            assert!(g.gap() < 1e-12);
            for c in Compositions::new(3, 20).step_by(5) {
                let cv = CapitalVector::new(c.clone()).unwrap();
                let e = exact_orders_3(&cv).unwrap().get(&order(s));
                let (l, u) = g.bounds(&c).unwrap();
                assert!(l - 1e-15 <= e && e <= u + 1e-15, "{c:?} {s}");
            }
        }
    }

    #[test]
    fn gauss_seidel_reaches_same_values() {
        let opts = JacobiOptions {
            mode: SweepMode::GaussSeidel,
            ..long(18)
        };
        let gs = jacobi_solve_3(18, &order("321"), &opts).unwrap();
        let j = jacobi_solve_3(18, &order("321"), &long(18)).unwrap();
        assert!(gs.iterations() < j.iterations());
        for (a, b) in gs.midpoints().iter().zip(j.midpoints()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoints_satisfy_identities() {
        let grids: Vec<BoundsGrid> = EliminationOrder::all(3)
            .iter()
            .map(|o| jacobi_solve_3(14, o, &long(14)).unwrap())
            .collect();
        for c in Compositions::new(3, 14) {
            let sum: f64 = grids.iter().map(|g| g.value(&c).unwrap()).sum();
            assert!((sum - 1.0).abs() < 1e-12);
        }
        let cv = CapitalVector::new(vec![3, 4, 7]).unwrap();
        let d = crate::model::OrderDistribution::new(
            3,
            grids.iter().map(|g| (g.order(), g.value_at(&cv).unwrap())),
            crate::model::Engine::Jacobi,
        )
        .unwrap();
        for r in identity_residuals(&d, &cv) {
            assert!(r.abs() < 1e-12);
        }
    }

    #[test]
    fn four_player_small() {
        let g = jacobi_solve_4(10, &JacobiOptions { tol: 1e-14, ..JacobiOptions::four() }).unwrap();
        assert!((g.value(&[1, 2, 3, 4]).unwrap() - 0.147755766).abs() < 1e-8);
        assert_eq!(g.len(), 84);
        for c in Compositions::new(4, 10).step_by(7) {
            let e = exact_orders_4(&CapitalVector::new(c.clone()).unwrap())
                .unwrap()
                .p("1234");
            let (l, u) = g.bounds(&c).unwrap();
            assert!(l - 1e-14 <= e && e <= u + 1e-14);
        }
        for i in 1..=3u64 {
            let want = (1.0 - 3.0 * i as f64 / 10.0) / 6.0;
            assert!((g.value(&[i, i, i, 10 - 3 * i]).unwrap() - want).abs() < 1e-12);
        }
    }

    #[test]
    fn four_player_gauss_seidel() {
        let opts = JacobiOptions {
            mode: SweepMode::GaussSeidel,
            tol: 1e-13,
            ..JacobiOptions::four()
        };
        let gs = jacobi_solve_4(9, &opts).unwrap();
        let j = jacobi_solve_4(9, &JacobiOptions { tol: 1e-13, ..JacobiOptions::four() }).unwrap();
        for (a, b) in gs.midpoints().iter().zip(j.midpoints()) {
            assert!((a - b).abs() < 1e-11);
        }
    }
}
