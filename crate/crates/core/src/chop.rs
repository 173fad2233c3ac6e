//! Prize-pool settlement by expected payout.
//!
//! The first player eliminated finishes last: under order `sigma` the player
//! at position `j` takes `schedule[k - 1 - j]`. Payouts are rounded to whole
//! cents by largest remainder, so they always add up to the pool.

use crate::error::{Error, Result};
use crate::model::{CapitalVector, Engine, OrderDistribution, PayoutSchedule};

/// Mass tolerance for the probabilities handed to [`chop`].
pub const CHOP_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct ChopResult {
    pub payouts_cents: Vec<u64>,
    /// Unrounded expectations, in cents.
    pub expected_cents: Vec<f64>,
    pub engine: Engine,
    pub probabilities: OrderDistribution,
}

impl ChopResult {
    pub fn dollars(&self) -> Vec<f64> {
        self.payouts_cents.iter().map(|&c| c as f64 / 100.0).collect()
    }

    pub fn pool_cents(&self) -> u64 {
        self.payouts_cents.iter().sum()
    }
}

pub fn chop(
    capitals: &CapitalVector,
    schedule: &PayoutSchedule,
    probs: &OrderDistribution,
) -> Result<ChopResult> {
    let k = capitals.players();
    for got in [schedule.places(), probs.players()] {
        if got != k {
            return Err(Error::DimensionMismatch { expected: k, got });
        }
    }
    let mass = probs.total();
    if (mass - 1.0).abs() > CHOP_SUM_TOLERANCE {
        return Err(Error::Inconsistent(format!(
            "probabilities sum to {mass}, not 1"
        )));
    }
    let cents = schedule.cents();
    let mut expected = vec![0.0; k];
    for (sigma, &p) in probs.iter() {
        for (j, player) in sigma.players().enumerate() {
            expected[player] += cents[k - 1 - j] as f64 * p;
        }
    }
    // Renormalise away the tolerated mass defect before rounding.
    for e in &mut expected {
        *e /= mass;
    }
    Ok(ChopResult {
        payouts_cents: largest_remainder(&expected, schedule.pool_cents()),
        expected_cents: expected,
        engine: probs.engine(),
        probabilities: probs.clone(),
    })
}

/// The naive split in proportion to chips. A diagnostic, not a model.
pub fn chip_proportional(capitals: &CapitalVector, schedule: &PayoutSchedule) -> Result<Vec<u64>> {
    if schedule.places() != capitals.players() {
        return Err(Error::DimensionMismatch {
            expected: capitals.players(),
            got: schedule.places(),
        });
    }
    let pool = schedule.pool_cents();
    let total = capitals.total() as f64;
    let shares: Vec<f64> = capitals
        .stacks()
        .iter()
        .map(|&s| pool as f64 * s as f64 / total)
        .collect();
    Ok(largest_remainder(&shares, pool))
}

fn largest_remainder(shares: &[f64], pool: u64) -> Vec<u64> {
    let mut out: Vec<u64> = shares.iter().map(|s| s.max(0.0).floor() as u64).collect();
    let assigned: u64 = out.iter().sum();
    let mut order: Vec<usize> = (0..shares.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = shares[a] - shares[a].floor();
        let fb = shares[b] - shares[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    if assigned <= pool {
        for &i in order.iter().cycle().take((pool - assigned) as usize) {
            out[i] += 1;
        }
    } else {
        for &i in order.iter().rev().cycle().take((assigned - pool) as usize) {
            out[i] = out[i].saturating_sub(1);
        }
    }
    out
}
