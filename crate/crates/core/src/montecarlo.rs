//! Monte Carlo estimates of elimination-order probabilities.
//!
//! Unit-step paths run to the first elimination and are then finished
//! analytically by fractional counting (the two-player ruin formula), so each
//! path contributes a weight vector over orders rather than a single order.
//! Consolidated mode replaces `m = min stack` unit rounds by one multinomial
//! draw of pair counts and binomial win counts; no player can go broke in
//! fewer than `m` rounds, so the jump is exact in distribution.
//!
//! Paths are grouped in fixed-size batches. Batch `b` draws from ChaCha8
//! seeded with `seed` on stream `b`, so results depend only on `(seed,
//! samples)`, not on the thread count.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{CapitalVector, EliminationOrder};

const BATCH: u64 = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SimMode {
    Plain,
    #[default]
    Consolidated,
}

impl SimMode {
    pub fn tag(self) -> &'static str {
        match self {
            SimMode::Plain => "plain",
            SimMode::Consolidated => "consolidated",
        }
    }
}

impl FromStr for SimMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plain" => Ok(SimMode::Plain),
            "consolidated" => Ok(SimMode::Consolidated),
            other => Err(Error::Parse {
                what: "simulation mode",
                detail: format!("`{other}` (expected plain or consolidated)"),
            }),
        }
    }
}

/// Betting rules that replace the unit bet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Each hand is played for the smaller of the two stacks.
    AllIn,
    /// Bet uniform on `1..=min(A, B)`.
    OccasionalAllIn,
    /// One hand decides the pair: `A` takes `A + B` with probability `A / (A + B)`.
    Compulsive,
}

impl Variant {
    pub fn tag(self) -> &'static str {
        match self {
            Variant::AllIn => "all_in",
            Variant::OccasionalAllIn => "occasional_all_in",
            Variant::Compulsive => "compulsive",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "all_in" => Ok(Variant::AllIn),
            "occasional_all_in" => Ok(Variant::OccasionalAllIn),
            "compulsive" => Ok(Variant::Compulsive),
            _ => Err(Error::UnknownVariant(s.to_string())),
        }
    }
}

/// Unordered player pairs. For three players pair `c` is the one that does
/// not involve player `c`; for four players pairs are lexicographic.
fn pairs(k: usize) -> &'static [(usize, usize)] {
    match k {
        2 => &[(0, 1)],
        3 => &[(1, 2), (0, 2), (0, 1)],
        4 => &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        _ => unreachable!("2..=4 players"),
    }
}

/// One jump of `m` rounds: `n[c]` hands were played by pair `c`, of which the
/// lower-indexed player of the pair won `zeta[c]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsolidatedStep {
    pub m: u64,
    pub n: Vec<u64>,
    pub zeta: Vec<u64>,
}

impl ConsolidatedStep {
    pub fn draw<R: Rng + ?Sized>(stacks: &[u64], rng: &mut R) -> Self {
        let k = stacks.len();
        let m = *stacks.iter().min().expect("nonempty");
        let cats = pairs(k).len();
        let mut n = vec![0; cats];
        let mut left = m;
        for (c, slot) in n.iter_mut().enumerate() {
            if c + 1 == cats {
                *slot = left;
            } else if left > 0 {
                *slot = binomial(rng, left, 1.0 / (cats - c) as f64);
                left -= *slot;
            }
        }
        let zeta = n.iter().map(|&nc| binomial(rng, nc, 0.5)).collect();
        Self { m, n, zeta }
    }

    pub fn apply(&self, stacks: &mut [u64]) {
        for (c, &(i, j)) in pairs(stacks.len()).iter().enumerate() {
            let net = 2 * self.zeta[c] as i64 - self.n[c] as i64;
            stacks[i] = (stacks[i] as i64 + net) as u64;
            stacks[j] = (stacks[j] as i64 - net) as u64;
        }
    }
}

fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    if n == 0 {
        return 0;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng)
}

/// One unit round among the live players: a uniform pair, a fair coin.
fn unit_round<R: Rng + ?Sized>(stacks: &mut [u64], rng: &mut R) {
    let ps = pairs(stacks.len());
    let (i, j) = ps[rng.random_range(0..ps.len())];
    if rng.random_bool(0.5) {
        stacks[i] += 1;
        stacks[j] -= 1;
    } else {
        stacks[i] -= 1;
        stacks[j] += 1;
    }
}

/// `rounds` unit rounds, ignoring elimination (the caller keeps it impossible).
pub fn plain_rounds<R: Rng + ?Sized>(stacks: &mut [u64], rounds: u64, rng: &mut R) {
    for _ in 0..rounds {
        unit_round(stacks, rng);
    }
}

/// Runs until some stack is zero; returns the number of unit rounds played.
fn run_to_zero<R: Rng + ?Sized>(stacks: &mut [u64], rng: &mut R, mode: SimMode) -> u64 {
    let mut steps = 0;
    while stacks.iter().all(|&s| s > 0) {
        match mode {
            SimMode::Plain => {
                unit_round(stacks, rng);
                steps += 1;
            }
            SimMode::Consolidated => {
                let step = ConsolidatedStep::draw(stacks, rng);
                step.apply(stacks);
                steps += step.m;
            }
        }
    }
    steps
}

/// Simulates a three- or four-player start to its first elimination and
/// returns the boundary state and the number of unit rounds played.
pub fn simulate_to_first_elimination<R: Rng + ?Sized>(
    capitals: &CapitalVector,
    rng: &mut R,
    mode: SimMode,
) -> (Vec<u64>, u64) {
    let mut s = capitals.stacks().to_vec();
    let steps = run_to_zero(&mut s, rng, mode);
    (s, steps)
}

#[derive(Debug, Clone)]
pub struct SimulationEstimate {
    pub players: usize,
    pub estimates: BTreeMap<EliminationOrder, f64>,
    pub std_errors: BTreeMap<EliminationOrder, f64>,
    pub samples: u64,
    pub seed: u64,
    pub mode: String,
    /// Mean unit rounds to the first elimination and its standard error
    /// (unit-step models only).
    pub first_elimination_time: Option<(f64, f64)>,
}

impl SimulationEstimate {
    pub fn p(&self, label: &str) -> f64 {
        self.get(&label.parse().expect("valid order label"))
    }

    pub fn get(&self, o: &EliminationOrder) -> f64 {
        self.estimates.get(o).copied().unwrap_or(0.0)
    }

    pub fn se(&self, label: &str) -> f64 {
        let o: EliminationOrder = label.parse().expect("valid order label");
        self.std_errors.get(&o).copied().unwrap_or(0.0)
    }

    /// Estimated probability that `player` wins.
    pub fn winner(&self, player: usize) -> f64 {
        self.estimates
            .iter()
            .filter(|(o, _)| o.winner() == player)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Running sums for mean and variance per order.
#[derive(Clone)]
struct Accumulator {
    sum: Vec<f64>,
    sum_sq: Vec<f64>,
    steps: f64,
    steps_sq: f64,
    paths: u64,
}

impl Accumulator {
    fn new(cells: usize) -> Self {
        Self {
            sum: vec![0.0; cells],
            sum_sq: vec![0.0; cells],
            steps: 0.0,
            steps_sq: 0.0,
            paths: 0,
        }
    }

    fn record(&mut self, weights: &[(usize, f64)], steps: f64) {
        for &(i, w) in weights {
            self.sum[i] += w;
            self.sum_sq[i] += w * w;
        }
        self.steps += steps;
        self.steps_sq += steps * steps;
        self.paths += 1;
    }

    fn merge(mut self, o: &Accumulator) -> Self {
        for i in 0..self.sum.len() {
            self.sum[i] += o.sum[i];
            self.sum_sq[i] += o.sum_sq[i];
        }
        self.steps += o.steps;
        self.steps_sq += o.steps_sq;
        self.paths += o.paths;
        self
    }
}

fn mean_se(sum: f64, sum_sq: f64, n: u64) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    let var = if n > 1 {
        ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    (mean, (var / nf).sqrt())
}

fn run_batches(
    samples: u64,
    seed: u64,
    cells: usize,
    path: impl Fn(&mut ChaCha8Rng, &mut Accumulator) + Sync,
) -> Accumulator {
    let batches = samples.div_ceil(BATCH);
    let parts: Vec<Accumulator> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b);
            let mut acc = Accumulator::new(cells);
            let count = BATCH.min(samples - b * BATCH);
            for _ in 0..count {
                path(&mut rng, &mut acc);
            }
            acc
        })
        .collect();
    // fold in batch order so the floating-point sums are reproducible
    parts
        .iter()
        .fold(Accumulator::new(cells), |a, p| a.merge(p))
}

fn finish(
    k: usize,
    orders: &[EliminationOrder],
    acc: Accumulator,
    seed: u64,
    mode: String,
    with_time: bool,
) -> SimulationEstimate {
    let mut estimates = BTreeMap::new();
    let mut std_errors = BTreeMap::new();
    for (i, o) in orders.iter().enumerate() {
        let (m, se) = mean_se(acc.sum[i], acc.sum_sq[i], acc.paths);
        estimates.insert(*o, m);
        std_errors.insert(*o, se);
    }
    SimulationEstimate {
        players: k,
        estimates,
        std_errors,
        samples: acc.paths,
        seed,
        first_elimination_time: with_time.then(|| mean_se(acc.steps, acc.steps_sq, acc.paths)),
        mode,
    }
}

fn order_index(orders: &[EliminationOrder], players: &[usize]) -> usize {
    let o = EliminationOrder::new(players).expect("permutation");
    orders.binary_search(&o).expect("all orders listed")
}

/// Fractional counting of a three-player boundary state `y` (exactly one
/// zero), with `labels` mapping local players to global ones and `prefix`
/// holding players already out.
fn fold_three(
    y: &[u64],
    labels: &[usize],
    prefix: &[usize],
    orders: &[EliminationOrder],
    scale: f64,
    out: &mut Vec<(usize, f64)>,
) {
    let zero = (0..3).find(|&p| y[p] == 0).expect("one broke player");
    let rest: Vec<usize> = (0..3).filter(|&p| p != zero).collect();
    let (i, j) = (rest[0], rest[1]);
    let total = (y[i] + y[j]) as f64;
    for (loser, winner) in [(i, j), (j, i)] {
        let mut seq = prefix.to_vec();
        seq.extend([labels[zero], labels[loser], labels[winner]]);
        out.push((order_index(orders, &seq), scale * y[winner] as f64 / total));
    }
}

/// Estimates every order's probability for three or four players.
pub fn estimate_orders(
    capitals: &CapitalVector,
    samples: u64,
    seed: u64,
    mode: SimMode,
) -> Result<SimulationEstimate> {
    let k = capitals.players();
    if !(3..=4).contains(&k) {
        return Err(Error::DimensionMismatch { expected: 3, got: k });
    }
    if samples == 0 {
        return Err(Error::NoSamples);
    }
    let orders = EliminationOrder::all(k);
    let acc = run_batches(samples, seed, orders.len(), |rng, acc| {
        let (y, steps) = simulate_to_first_elimination(capitals, rng, mode);
        let mut w = Vec::with_capacity(2);
        if k == 3 {
            fold_three(&y, &[0, 1, 2], &[], &orders, 1.0, &mut w);
        } else {
            let out = (0..4).find(|&p| y[p] == 0).expect("one broke player");
            let labels: Vec<usize> = (0..4).filter(|&p| p != out).collect();
            let mut rest: Vec<u64> = labels.iter().map(|&p| y[p]).collect();
            run_to_zero(&mut rest, rng, mode);
            fold_three(&rest, &labels, &[out], &orders, 1.0, &mut w);
        }
        acc.record(&w, steps as f64);
    });
    Ok(finish(k, &orders, acc, seed, mode.tag().to_string(), true))
}

fn variant_round<R: Rng + ?Sized>(stacks: &mut [u64], live: &[usize], variant: Variant, rng: &mut R) {
    let a = rng.random_range(0..live.len());
    let mut b = rng.random_range(0..live.len() - 1);
    if b >= a {
        b += 1;
    }
    let (i, j) = (live[a], live[b]);
    let (si, sj) = (stacks[i], stacks[j]);
    match variant {
        Variant::Compulsive => {
            if rng.random_range(0..si + sj) < si {
                stacks[i] += sj;
                stacks[j] = 0;
            } else {
                stacks[j] += si;
                stacks[i] = 0;
            }
        }
        Variant::AllIn | Variant::OccasionalAllIn => {
            let cap = si.min(sj);
            let bet = if variant == Variant::AllIn {
                cap
            } else {
                rng.random_range(1..=cap)
            };
            if rng.random_bool(0.5) {
                stacks[i] += bet;
                stacks[j] -= bet;
            } else {
                stacks[i] -= bet;
                stacks[j] += bet;
            }
        }
    }
}

/// Plays full paths under a betting variant and counts the realized orders.
pub fn estimate_variant(
    capitals: &CapitalVector,
    variant: Variant,
    samples: u64,
    seed: u64,
) -> Result<SimulationEstimate> {
    let k = capitals.players();
    if !(3..=4).contains(&k) {
        return Err(Error::DimensionMismatch { expected: 3, got: k });
    }
    if samples == 0 {
        return Err(Error::NoSamples);
    }
    let orders = EliminationOrder::all(k);
    let acc = run_batches(samples, seed, orders.len(), |rng, acc| {
        let (seq, rounds) = play_variant(capitals.stacks(), variant, rng);
        acc.record(&[(order_index(&orders, &seq), 1.0)], rounds as f64);
    });
    Ok(finish(k, &orders, acc, seed, variant.tag().to_string(), false))
}

/// One full path: the elimination sequence (winner last) and the number of
/// hands played. Simultaneous busts cannot happen: a hand has one loser.
pub fn play_variant<R: Rng + ?Sized>(stacks: &[u64], variant: Variant, rng: &mut R) -> (Vec<usize>, u64) {
    let mut s = stacks.to_vec();
    let mut live: Vec<usize> = (0..s.len()).collect();
    let mut seq = Vec::with_capacity(s.len());
    let mut hands = 0;
    while live.len() > 1 {
        variant_round(&mut s, &live, variant, rng);
        hands += 1;
        if let Some(pos) = live.iter().position(|&p| s[p] == 0) {
            seq.push(live.remove(pos));
        }
    }
    seq.push(live[0]);
    (seq, hands)
}
