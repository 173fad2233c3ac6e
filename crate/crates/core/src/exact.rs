//! Exact elimination-order probabilities from the absorbing chain stopped at
//! the first elimination.
//!
//! With `m = k(k-1)` equally likely pair/direction moves per round, the
//! interior block `Q` has entries `1/m`, and `M = m(I - Q)` is an integer SPD
//! matrix (diagonal `m`, `-1` per interior neighbour). `M` is factored once per
//! `(k, N)` with an envelope LDLᵀ; every query is one or a few triangular
//! solves followed by double-double iterative refinement, so the results carry
//! close to 30 significant digits before the final rounding to `f64`.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::dd::Dd;
use crate::error::{Error, Result};
use crate::lattice::{composition_count, composition_rank, Compositions};
use crate::model::{
    permute_stacks, rational_to_f64, CapitalVector, Engine, EliminationOrder, OrderDistribution,
};
use crate::skyline::SkylineLdl;

pub type State = [u64; 4];

fn state_of(parts: &[u64]) -> State {
    let mut s = [0; 4];
    s[..parts.len()].copy_from_slice(parts);
    s
}

/// Lattice of stacks summing to `N`, split by how many players are broke.
#[derive(Debug, Clone)]
pub struct StateSpace {
    k: usize,
    n: u64,
    interior: Vec<State>,
    boundary: Vec<State>,
    corners: Vec<State>,
}

/// Builds the state space with interior states in lexicographic order and
/// boundary (exactly one broke player) states grouped by the broke player,
/// lexicographic within each face.
pub fn build_state_space(k: usize, n: u64) -> Result<StateSpace> {
    if !(3..=4).contains(&k) {
        return Err(Error::InvalidInput(format!("state space needs k in 3..=4, got {k}")));
    }
    if n < k as u64 {
        return Err(Error::TotalTooSmall { k, n });
    }
    let interior = Compositions::new(k, n).map(|c| state_of(&c)).collect();
    let mut boundary = Vec::new();
    for zero in 0..k {
        for c in Compositions::new(k - 1, n) {
            let mut s = [0; 4];
            let mut it = c.into_iter();
            for (p, slot) in s.iter_mut().enumerate().take(k) {
                if p != zero {
                    *slot = it.next().expect("k-1 parts");
                }
            }
            boundary.push(s);
        }
    }
    let corners = (0..k)
        .map(|p| {
            let mut s = [0; 4];
            s[p] = n;
            s
        })
        .collect();
    Ok(StateSpace {
        k,
        n,
        interior,
        boundary,
        corners,
    })
}

impl StateSpace {
    pub fn players(&self) -> usize {
        self.k
    }

    pub fn total(&self) -> u64 {
        self.n
    }

    pub fn interior(&self) -> &[State] {
        &self.interior
    }

    pub fn boundary(&self) -> &[State] {
        &self.boundary
    }

    pub fn corners(&self) -> &[State] {
        &self.corners
    }

    /// States with two or more (but not `k-1`) broke players; only `k = 4` has them.
    pub fn edge_count(&self) -> usize {
        if self.k == 4 {
            6 * (self.n as usize - 1)
        } else {
            0
        }
    }

    /// Size of the whole lattice `{x >= 0, sum x = N}`.
    pub fn total_states(&self) -> usize {
        self.interior.len() + self.boundary.len() + self.corners.len() + self.edge_count()
    }

    pub fn interior_index(&self, s: &[u64]) -> Option<usize> {
        composition_rank(&s[..self.k], self.n)
    }

    pub fn boundary_index(&self, s: &[u64]) -> Option<usize> {
        let s = &s[..self.k];
        let mut zeros = s.iter().enumerate().filter(|(_, &v)| v == 0);
        let (zero, _) = zeros.next()?;
        if zeros.next().is_some() {
            return None;
        }
        let rest: Vec<u64> = s
            .iter()
            .enumerate()
            .filter(|&(p, _)| p != zero)
            .map(|(_, &v)| v)
            .collect();
        let face = composition_count(self.k - 1, self.n) as usize;
        composition_rank(&rest, self.n).map(|r| zero * face + r)
    }

    fn neighbours(&self, s: &State) -> impl Iterator<Item = State> + '_ {
        let k = self.k;
        let s = *s;
        (0..k).flat_map(move |to| {
            (0..k).filter(move |&from| from != to).filter_map(move |from| {
                if s[from] == 0 {
                    return None;
                }
                let mut t = s;
                t[to] += 1;
                t[from] -= 1;
                Some(t)
            })
        })
    }
}

/// Interior-to-interior (`Q`) and interior-to-boundary (`S`) adjacency in CSR
/// form; every listed transition has probability `1 / moves`.
#[derive(Debug, Clone)]
pub struct ChainDecomposition {
    moves: usize,
    q_ptr: Vec<usize>,
    q_idx: Vec<usize>,
    s_ptr: Vec<usize>,
    s_idx: Vec<usize>,
}

impl ChainDecomposition {
    pub fn new(space: &StateSpace) -> Self {
        let k = space.players();
        let mut q_ptr = vec![0];
        let mut q_idx = Vec::new();
        let mut s_ptr = vec![0];
        let mut s_idx = Vec::new();
        for s in space.interior() {
            for t in space.neighbours(s) {
                if let Some(j) = space.interior_index(&t) {
                    q_idx.push(j);
                } else {
                    let j = space
                        .boundary_index(&t)
                        .expect("one move from the interior lands on a face");
                    s_idx.push(j);
                }
            }
            q_ptr.push(q_idx.len());
            s_ptr.push(s_idx.len());
        }
        Self {
            moves: k * (k - 1),
            q_ptr,
            q_idx,
            s_ptr,
            s_idx,
        }
    }

    pub fn moves(&self) -> usize {
        self.moves
    }

    pub fn transition_probability(&self) -> f64 {
        1.0 / self.moves as f64
    }

    pub fn interior_neighbours(&self, i: usize) -> &[usize] {
        &self.q_idx[self.q_ptr[i]..self.q_ptr[i + 1]]
    }

    pub fn boundary_neighbours(&self, i: usize) -> &[usize] {
        &self.s_idx[self.s_ptr[i]..self.s_ptr[i + 1]]
    }

    pub fn rows(&self) -> usize {
        self.q_ptr.len() - 1
    }

    /// Sum of the `[S | Q]` row for interior state `i`.
    pub fn row_sum(&self, i: usize) -> f64 {
        (self.interior_neighbours(i).len() + self.boundary_neighbours(i).len()) as f64
            * self.transition_probability()
    }

    /// Interior rows adjacent to each boundary state.
    fn boundary_adjacency(&self, boundary_len: usize) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); boundary_len];
        for i in 0..self.rows() {
            for &y in self.boundary_neighbours(i) {
                adj[y].push(i);
            }
        }
        adj
    }

    fn strict_lower<T: Clone>(&self, off: T) -> Vec<Vec<(usize, T)>> {
        (0..self.rows())
            .map(|i| {
                let mut row: Vec<(usize, T)> = self
                    .interior_neighbours(i)
                    .iter()
                    .filter(|&&j| j < i)
                    .map(|&j| (j, off.clone()))
                    .collect();
                row.sort_by_key(|e| e.0);
                row
            })
            .collect()
    }

    /// `M z` for `M = moves * (I - Q)`, in double-double.
    fn apply_scaled(&self, z: &[Dd], out: &mut [Dd]) {
        let m = self.moves as f64;
        for (i, o) in out.iter_mut().enumerate() {
            let mut acc = z[i].mul_f64(m);
            for &j in self.interior_neighbours(i) {
                acc = acc - z[j];
            }
            *o = acc;
        }
    }
}

/// A factored chain for one `(k, N)`.
pub struct ChainSolver {
    space: StateSpace,
    chain: ChainDecomposition,
    ldl: SkylineLdl<f64>,
    boundary_adj: Vec<Vec<usize>>,
}

impl ChainSolver {
    pub fn new(k: usize, n: u64) -> Result<Self> {
        let space = build_state_space(k, n)?;
        let chain = ChainDecomposition::new(&space);
        let diag = vec![chain.moves() as f64; chain.rows()];
        let ldl = SkylineLdl::factor(diag, &chain.strict_lower(-1.0))?;
        let boundary_adj = chain.boundary_adjacency(space.boundary().len());
        Ok(Self {
            space,
            chain,
            ldl,
            boundary_adj,
        })
    }

    pub fn space(&self) -> &StateSpace {
        &self.space
    }

    pub fn chain(&self) -> &ChainDecomposition {
        &self.chain
    }

    /// Solves `M z = b` to double-double accuracy by iterative refinement.
    pub fn solve_refined(&self, b: &[Dd]) -> Vec<Dd> {
        let n = b.len();
        let mut z = vec![Dd::ZERO; n];
        let mut r: Vec<Dd> = b.to_vec();
        let mut mz = vec![Dd::ZERO; n];
        for _ in 0..8 {
            let mut delta: Vec<f64> = r.iter().map(|v| v.to_f64()).collect();
            self.ldl.solve_in_place(&mut delta);
            let mut dmax = 0.0f64;
            for (zi, &d) in z.iter_mut().zip(&delta) {
                *zi = *zi + d;
                dmax = dmax.max(d.abs());
            }
            let zmax = z.iter().map(|v| v.hi.abs()).fold(0.0, f64::max);
            if dmax <= 1e-31 * zmax || dmax == 0.0 {
                break;
            }
            self.chain.apply_scaled(&z, &mut mz);
            for ((ri, bi), mi) in r.iter_mut().zip(b).zip(&mz) {
                *ri = *bi - *mi;
            }
        }
        z
    }

    /// Row `start` of `M⁻¹` (by symmetry, a column).
    fn green_row(&self, start: usize) -> Vec<Dd> {
        let mut b = vec![Dd::ZERO; self.chain.rows()];
        b[start] = Dd::new(1.0);
        self.solve_refined(&b)
    }

    /// First-boundary-hit distribution from interior state `start`, indexed
    /// like [`StateSpace::boundary`].
    pub fn kernel_from(&self, start: usize) -> Vec<Dd> {
        let z = self.green_row(start);
        // P(x, y) = sum_{x'} G(x,x') S(x',y) = sum over interior x' adjacent to y of (M⁻¹)_{x x'}
        self.boundary_adj
            .iter()
            .map(|adj| adj.iter().map(|&i| z[i]).sum())
            .collect()
    }

    /// Solves the Dirichlet problem `u = Qu + Sg` for boundary data `g`.
    pub fn harmonic_extension(&self, g: &[Dd]) -> Vec<Dd> {
        let b: Vec<Dd> = (0..self.chain.rows())
            .map(|i| self.chain.boundary_neighbours(i).iter().map(|&y| g[y]).sum())
            .collect();
        self.solve_refined(&b)
    }
}

/// Engine limits.
#[derive(Debug, Clone, Copy)]
pub struct ExactConfig {
    pub cap_three: u64,
    pub cap_four: u64,
    pub rational_cap: u64,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            cap_three: 250,
            cap_four: 60,
            rational_cap: 30,
        }
    }
}

/// Exact engine with per-`(k, N)` caches of factorizations and of the
/// three-player canonical tables used to finish four-player paths.
pub struct ExactChain {
    config: ExactConfig,
    solvers: Mutex<HashMap<(usize, u64), Arc<ChainSolver>>>,
    tables3: Mutex<HashMap<u64, Arc<Vec<f64>>>>,
}

impl ExactChain {
    pub fn new(config: ExactConfig) -> Self {
        Self {
            config,
            solvers: Mutex::new(HashMap::new()),
            tables3: Mutex::new(HashMap::new()),
        }
    }

    /// Process-wide engine with default caps.
    pub fn shared() -> &'static ExactChain {
        static ENGINE: OnceLock<ExactChain> = OnceLock::new();
        ENGINE.get_or_init(|| ExactChain::new(ExactConfig::default()))
    }

    pub fn config(&self) -> ExactConfig {
        self.config
    }

    fn check_cap(&self, k: usize, n: u64) -> Result<()> {
        let cap = if k == 3 {
            self.config.cap_three
        } else {
            self.config.cap_four
        };
        if n > cap {
            return Err(Error::CapExceeded {
                engine: "exact",
                k,
                n,
                cap,
            });
        }
        if n < k as u64 {
            return Err(Error::TotalTooSmall { k, n });
        }
        Ok(())
    }

    pub fn solver(&self, k: usize, n: u64) -> Result<Arc<ChainSolver>> {
        self.check_cap(k, n)?;
        if let Some(s) = self.solvers.lock().expect("solver cache").get(&(k, n)) {
            return Ok(s.clone());
        }
        let solver = Arc::new(ChainSolver::new(k, n)?);
        self.solvers
            .lock()
            .expect("solver cache")
            .insert((k, n), solver.clone());
        Ok(solver)
    }

    /// Poisson kernel of a three-player start, as `(boundary state, mass)`.
    pub fn poisson_kernel(&self, capitals: &CapitalVector) -> Result<Vec<(State, f64)>> {
        capitals.expect_players(3)?;
        let solver = self.solver(3, capitals.total())?;
        let start = solver
            .space()
            .interior_index(capitals.stacks())
            .expect("positive stacks are interior");
        let kernel = solver.kernel_from(start);
        Ok(solver
            .space()
            .boundary()
            .iter()
            .zip(kernel)
            .map(|(s, m)| (*s, m.to_f64()))
            .collect())
    }

    pub fn orders_3(&self, capitals: &CapitalVector) -> Result<OrderDistribution> {
        capitals.expect_players(3)?;
        let n = capitals.total();
        let solver = self.solver(3, n)?;
        let start = solver
            .space()
            .interior_index(capitals.stacks())
            .expect("positive stacks are interior");
        let kernel = solver.kernel_from(start);
        let mut acc: BTreeMap<EliminationOrder, Dd> = BTreeMap::new();
        for (y, mass) in solver.space().boundary().iter().zip(&kernel) {
            let zero = (0..3).find(|&p| y[p] == 0).expect("face state");
            let others: Vec<usize> = (0..3).filter(|&p| p != zero).collect();
            let (i, j) = (others[0], others[1]);
            // i busts next (j wins) with probability y_j / N, and vice versa
            let wins_j = Dd::ratio(y[j] as f64, n as f64);
            let wins_i = Dd::ratio(y[i] as f64, n as f64);
            *acc.entry(EliminationOrder::new(&[zero, i, j])?)
                .or_insert(Dd::ZERO) += mul_dd(*mass, wins_j);
            *acc.entry(EliminationOrder::new(&[zero, j, i])?)
                .or_insert(Dd::ZERO) += mul_dd(*mass, wins_i);
        }
        let entries = EliminationOrder::all(3)
            .into_iter()
            .map(|o| (o, acc.get(&o).map_or(0.0, |v| v.to_f64())));
        OrderDistribution::new(3, entries, Engine::Exact)
    }

    /// Canonical-order probabilities P(123...) for every positive composition
    /// of `n`, lexicographic, in double-double.
    pub fn canonical_grid(&self, k: usize, n: u64) -> Result<Vec<Dd>> {
        let solver = self.solver(k, n)?;
        let space = solver.space();
        let g: Vec<Dd> = match k {
            3 => space
                .boundary()
                .iter()
                .map(|y| {
                    if y[0] == 0 {
                        // player 1 out first; player 2 must bust before player 3
                        Dd::ratio(y[2] as f64, n as f64)
                    } else {
                        Dd::ZERO
                    }
                })
                .collect(),
            4 => {
                let table = self.table3(n)?;
                space
                    .boundary()
                    .iter()
                    .map(|y| {
                        if y[0] == 0 {
                            let idx = composition_rank(&y[1..4], n).expect("face state");
                            Dd::new(table[idx])
                        } else {
                            Dd::ZERO
                        }
                    })
                    .collect()
            }
            _ => unreachable!("solver validated k"),
        };
        Ok(solver.harmonic_extension(&g))
    }

    /// Three-player canonical table at total `n`, cached.
    pub fn table3(&self, n: u64) -> Result<Arc<Vec<f64>>> {
        if let Some(t) = self.tables3.lock().expect("table cache").get(&n) {
            return Ok(t.clone());
        }
        let grid: Vec<f64> = self.canonical_grid(3, n)?.iter().map(|v| v.to_f64()).collect();
        let grid = Arc::new(grid);
        self.tables3
            .lock()
            .expect("table cache")
            .insert(n, grid.clone());
        Ok(grid)
    }

    pub fn orders_4(&self, capitals: &CapitalVector) -> Result<OrderDistribution> {
        capitals.expect_players(4)?;
        let n = capitals.total();
        let solver = self.solver(4, n)?;
        let table = self.table3(n)?;
        let start = solver
            .space()
            .interior_index(capitals.stacks())
            .expect("positive stacks are interior");
        let kernel = solver.kernel_from(start);
        let locals = EliminationOrder::all(3);
        let mut acc: BTreeMap<EliminationOrder, Dd> = BTreeMap::new();
        for (y, mass) in solver.space().boundary().iter().zip(&kernel) {
            let zero = (0..4).find(|&p| y[p] == 0).expect("face state");
            let survivors: Vec<usize> = (0..4).filter(|&p| p != zero).collect();
            let stacks: Vec<u64> = survivors.iter().map(|&p| y[p]).collect();
            for tau in &locals {
                let canon = permute_stacks(&stacks, tau);
                let p3 = table[composition_rank(&canon, n).expect("face composition")];
                let mut global = vec![zero];
                global.extend(tau.players().map(|l| survivors[l]));
                *acc.entry(EliminationOrder::new(&global)?)
                    .or_insert(Dd::ZERO) += mass.mul_f64(p3);
            }
        }
        let entries = EliminationOrder::all(4)
            .into_iter()
            .map(|o| (o, acc.get(&o).map_or(0.0, |v| v.to_f64())));
        OrderDistribution::new(4, entries, Engine::Exact)
    }

    /// Exact rational three-player distribution (small `N` only).
    pub fn orders_3_rational(
        &self,
        capitals: &CapitalVector,
    ) -> Result<BTreeMap<EliminationOrder, BigRational>> {
        capitals.expect_players(3)?;
        let n = capitals.total();
        if n > self.config.rational_cap {
            return Err(Error::CapExceeded {
                engine: "exact-rational",
                k: 3,
                n,
                cap: self.config.rational_cap,
            });
        }
        let space = build_state_space(3, n)?;
        let chain = ChainDecomposition::new(&space);
        let int = |v: i64| BigRational::from_integer(BigInt::from(v));
        let diag = vec![int(chain.moves() as i64); chain.rows()];
        let ldl = SkylineLdl::factor(diag, &chain.strict_lower(int(-1)))?;
        let start = space
            .interior_index(capitals.stacks())
            .expect("positive stacks are interior");
        let mut z = vec![BigRational::zero(); chain.rows()];
        z[start] = BigRational::one();
        ldl.solve_in_place(&mut z);
        let adj = chain.boundary_adjacency(space.boundary().len());
        let mut acc: BTreeMap<EliminationOrder, BigRational> = EliminationOrder::all(3)
            .into_iter()
            .map(|o| (o, BigRational::zero()))
            .collect();
        let total = BigInt::from(n);
        for (y, rows) in space.boundary().iter().zip(&adj) {
            let mass: BigRational = rows.iter().map(|&i| z[i].clone()).sum();
            if mass.is_zero() {
                continue;
            }
            let zero = (0..3).find(|&p| y[p] == 0).expect("face state");
            let others: Vec<usize> = (0..3).filter(|&p| p != zero).collect();
            let (i, j) = (others[0], others[1]);
            let wins_j = BigRational::new(BigInt::from(y[j]), total.clone());
            let wins_i = BigRational::new(BigInt::from(y[i]), total.clone());
            *acc.get_mut(&EliminationOrder::new(&[zero, i, j])?)
                .expect("all orders present") += &mass * wins_j;
            *acc.get_mut(&EliminationOrder::new(&[zero, j, i])?)
                .expect("all orders present") += mass * wins_i;
        }
        Ok(acc)
    }
}

fn mul_dd(a: Dd, b: Dd) -> Dd {
    a.mul_f64(b.hi) + a.mul_f64(b.lo)
}

pub fn poisson_kernel(capitals: &CapitalVector) -> Result<Vec<(State, f64)>> {
    ExactChain::shared().poisson_kernel(capitals)
}

pub fn exact_orders_3(capitals: &CapitalVector) -> Result<OrderDistribution> {
    ExactChain::shared().orders_3(capitals)
}

pub fn exact_orders_4(capitals: &CapitalVector) -> Result<OrderDistribution> {
    ExactChain::shared().orders_4(capitals)
}

pub fn exact_orders_3_rational(
    capitals: &CapitalVector,
) -> Result<BTreeMap<EliminationOrder, BigRational>> {
    ExactChain::shared().orders_3_rational(capitals)
}

/// Dispatches on the number of players.
pub fn exact_orders(capitals: &CapitalVector) -> Result<OrderDistribution> {
    match capitals.players() {
        3 => exact_orders_3(capitals),
        4 => exact_orders_4(capitals),
        k => Err(Error::DimensionMismatch { expected: 3, got: k }),
    }
}

pub fn rational_distribution_to_f64(
    dist: &BTreeMap<EliminationOrder, BigRational>,
) -> Result<OrderDistribution> {
    let k = dist.keys().next().map_or(3, |o| o.len());
    OrderDistribution::new(
        k,
        dist.iter().map(|(o, r)| (*o, rational_to_f64(r))),
        Engine::Exact,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::identity_residuals;

    fn caps(s: &[u64]) -> CapitalVector {
        CapitalVector::new(s.to_vec()).unwrap()
    }

    #[test]
    fn state_space_counts() {
        let s = build_state_space(3, 6).unwrap();
        assert_eq!(s.total_states(), 28);
        assert_eq!(s.interior().len(), 10);
        assert_eq!(s.boundary().len(), 15);
        assert_eq!(s.corners().len(), 3);

        let s = build_state_space(3, 3).unwrap();
        assert_eq!(s.interior(), &[[1, 1, 1, 0]]);

        let s = build_state_space(4, 8).unwrap();
        assert_eq!(s.interior().len(), 35);
        assert_eq!(s.total_states() as u64, crate::lattice::binomial(8 + 3, 3));

        assert!(matches!(build_state_space(3, 2), Err(Error::TotalTooSmall { .. })));
    }

    #[test]
    fn boundary_order_for_six() {
        let s = build_state_space(3, 6).unwrap();
        let labels: Vec<String> = s
            .boundary()
            .iter()
            .map(|y| y[..3].iter().map(u64::to_string).collect())
            .collect();
        assert_eq!(
            labels,
            [
                "015", "024", "033", "042", "051", "105", "204", "303", "402", "501", "150",
                "240", "330", "420", "510"
            ]
        );
        for (i, y) in s.boundary().iter().enumerate() {
            assert_eq!(s.boundary_index(y), Some(i));
        }
    }

    #[test]
    fn chain_rows_are_stochastic() {
        for (k, n) in [(3, 9), (4, 9)] {
            let space = build_state_space(k, n).unwrap();
            let chain = ChainDecomposition::new(&space);
            for i in 0..chain.rows() {
                assert!((chain.row_sum(i) - 1.0).abs() < 1e-15);
                assert!(chain.interior_neighbours(i).len() <= k * (k - 1));
            }
        }
    }

    #[test]
    fn rational_small_example() {
        let d = exact_orders_3_rational(&caps(&[1, 2, 3])).unwrap();
        let p321 = &d[&"321".parse().unwrap()];
        assert_eq!(*p321, BigRational::new(569.into(), 9456.into()));
        let total: BigRational = d.values().cloned().sum();
        assert_eq!(total, BigRational::one());
    }

    #[test]
    fn float_matches_rational_at_six() {
        for c in Compositions::new(3, 6) {
            let cv = caps(&c);
            let f = exact_orders_3(&cv).unwrap();
            let r = exact_orders_3_rational(&cv).unwrap();
            for (o, v) in &r {
                assert!((f.get(o) - rational_to_f64(v)).abs() < 1e-16, "{cv} {o}");
            }
        }
    }

    #[test]
    fn kernel_is_symmetric_and_normalized() {
        let k = poisson_kernel(&caps(&[2, 2, 2])).unwrap();
        let total: f64 = k.iter().map(|(_, m)| m).sum();
        assert!((total - 1.0).abs() < 1e-14);
        for zero in 0..3 {
            let face: f64 = k.iter().filter(|(y, _)| y[zero] == 0).map(|(_, m)| m).sum();
            assert!((face - 1.0 / 3.0).abs() < 1e-14);
        }
        let k = poisson_kernel(&caps(&[1, 1, 4])).unwrap();
        let face = |z: usize| -> f64 { k.iter().filter(|(y, _)| y[z] == 0).map(|(_, m)| m).sum() };
        assert!(face(2) < 0.1 * face(0) && face(2) < 0.1 * face(1));
        assert!(k.iter().all(|&(_, m)| m >= 0.0));
    }

    #[test]
    fn table_four_row() {
        let d = exact_orders_3(&caps(&[1, 1, 48])).unwrap();
        assert!((d.p("321") - 3.64783779008280e-5).abs() < 1e-18);
    }

    #[test]
    fn symmetric_family_closed_form() {
        for (i, n) in [(1u64, 10u64), (2, 11), (3, 20), (5, 17)] {
            let d = exact_orders_3(&caps(&[i, i, n - 2 * i])).unwrap();
            let want = 0.5 * (1.0 - 2.0 * i as f64 / n as f64);
            assert!((d.p("123") - want).abs() < 1e-14);
            assert!((d.p("213") - want).abs() < 1e-14);
        }
    }

    #[test]
    fn identities_hold() {
        for c in Compositions::new(3, 17).step_by(7) {
            let cv = caps(&c);
            let d = exact_orders_3(&cv).unwrap();
            assert!((d.total() - 1.0).abs() < 1e-12);
            for r in identity_residuals(&d, &cv) {
                assert!(r.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn four_player_small_table() {
        let d = exact_orders_4(&caps(&[1, 2, 3, 4])).unwrap();
        assert!((d.p("1234") - 0.147755766).abs() < 1e-8);
        assert!((d.p("2143") - 0.055231830).abs() < 1e-8);
        let d = exact_orders_4(&caps(&[1, 1, 1, 7])).unwrap();
        assert!((d.p("4321") - 2.61956573e-4).abs() < 1e-11);
    }

    #[test]
    fn four_player_symmetric_family() {
        for (i, n) in [(1u64, 8u64), (2, 10), (3, 13)] {
            let d = exact_orders_4(&caps(&[i, i, i, n - 3 * i])).unwrap();
            let want = (1.0 - 3.0 * i as f64 / n as f64) / 6.0;
            assert!((d.p("1234") - want).abs() < 1e-13, "{i} {n}");
        }
    }

    #[test]
    fn four_player_winner_marginals() {
        let cv = caps(&[2, 3, 4, 6]);
        let d = exact_orders_4(&cv).unwrap();
        for p in 0..4 {
            let want = cv.stack(p) as f64 / cv.total() as f64;
            assert!((d.winner_marginal(p) - want).abs() < 1e-9);
        }
    }

    #[test]
    fn caps_are_enforced() {
        let small = ExactChain::new(ExactConfig {
            cap_three: 20,
            cap_four: 10,
            rational_cap: 8,
        });
        assert!(matches!(
            small.orders_3(&caps(&[10, 10, 10])),
            Err(Error::CapExceeded { .. })
        ));
        assert!(matches!(
            small.orders_4(&caps(&[3, 3, 3, 3])),
            Err(Error::CapExceeded { .. })
        ));
        assert!(small.orders_3_rational(&caps(&[3, 3, 3])).is_err());
    }
}
