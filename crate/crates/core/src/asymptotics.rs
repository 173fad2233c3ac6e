//! Order-of-magnitude kernel estimates, the 3-player tail constant, decay
//! exponents and continuum-limit extrapolation.
//!
//! Kernel queries use the two-coordinate picture: `x1` and `x2` are the stacks
//! of the first two players, the third holds `N - x1 - x2`, and boundary
//! points `(y, 0)` sit on the face where the second player is broke.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::jacobi::{jacobi_solve_3, JacobiOptions};
use crate::model::{CapitalVector, EliminationOrder};

/// Largest total the extrapolator will hand to the Jacobi engine.
pub const BROWNIAN_MAX_TOTAL: u64 = 600;

/// Lattice distance under the six moves `(±1,0)`, `(0,±1)`, `(1,-1)`, `(-1,1)`.
///
/// Opposite-signed offsets can use the diagonal; same-signed ones cannot.
pub fn graph_distance(p: (i64, i64), q: (i64, i64)) -> u64 {
    let d1 = q.0 - p.0;
    let d2 = q.1 - p.1;
    if (d1 >= 0) == (d2 >= 0) || d1 == 0 || d2 == 0 {
        d1.unsigned_abs() + d2.unsigned_abs()
    } else {
        d1.unsigned_abs().max(d2.unsigned_abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KernelQuery {
    pub x1: u64,
    pub x2: u64,
    pub y: u64,
    pub n: u64,
    pub d: u64,
}

impl KernelQuery {
    pub fn new(x1: u64, x2: u64, y: u64, n: u64) -> Result<Self> {
        if x1 == 0 || x2 == 0 || x1 + x2 >= n {
            return Err(Error::InvalidInput(format!(
                "({x1}, {x2}) is not interior for N={n}"
            )));
        }
        if y == 0 || y >= n {
            return Err(Error::InvalidInput(format!(
                "boundary coordinate y={y} must lie in 1..{n}"
            )));
        }
        let d = graph_distance((x1 as i64, x2 as i64), (y as i64, 0));
        Ok(Self { x1, x2, y, n, d })
    }
}

/// The unnormalised estimate of the chance of leaving the triangle at `(y, 0)`.
///
/// Only the order of magnitude is meaningful; universal constants are dropped.
/// The estimate is stated for starts with `2 x1 + x2 <= N`.
pub fn dhs_kernel_estimate(q: &KernelQuery) -> f64 {
    let (x1, x2, y, n, d) = (
        q.x1 as f64,
        q.x2 as f64,
        q.y as f64,
        q.n as f64,
        q.d as f64,
    );
    let num = x1 * x2 * (x1 + x2) * (n - (x1 + x2)) * (n - x2) * y * y * (n - y) * (n - y);
    let den = n.powi(4)
        * (x1 + d).powi(2)
        * (x2 + d).powi(2)
        * (x1 + x2 + 2.0 * d).powi(2);
    num / den
}

/// Sum of the estimate over every boundary point of the face.
pub fn dhs_face_sum(x1: u64, x2: u64, n: u64) -> Result<f64> {
    (1..n)
        .map(|y| KernelQuery::new(x1, x2, y, n).map(|q| dhs_kernel_estimate(&q)))
        .sum()
}

/// Limit of `N^3 P_{1,1,N-2}(321)`.
pub fn tail_constant_three() -> f64 {
    let pi = std::f64::consts::PI;
    let ratio = libm::tgamma(1.0 / 3.0) / libm::tgamma(5.0 / 6.0);
    pi.sqrt() / (3.0 * 3f64.sqrt()) * ratio.powi(3)
}

/// Power-law fit `p ~ amplitude * N^(-kappa)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub kappa: f64,
    pub amplitude: f64,
}

/// Least-squares slope of `ln p` against `ln N`, negated.
pub fn decay_exponent(values: &[(u64, f64)]) -> Result<DecayFit> {
    if values.len() < 2 {
        return Err(Error::TooFewRows {
            need: 2,
            got: values.len(),
        });
    }
    if let Some(&(n, p)) = values.iter().find(|(n, p)| *n == 0 || !(*p > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "decay fit needs positive N and p, got ({n}, {p})"
        )));
    }
    let pts: Vec<(f64, f64)> = values
        .iter()
        .map(|&(n, p)| ((n as f64).ln(), p.ln()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput(
            "decay fit needs at least two distinct N".into(),
        ));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(DecayFit {
        kappa: -slope,
        amplitude: (my - slope * mx).exp(),
    })
}

/// One refinement level of a scaled start.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrownianLevel {
    pub multiplier: u64,
    pub total: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BrownianEstimate {
    pub levels: Vec<BrownianLevel>,
    pub limit: f64,
}

/// Removes an assumed `O(N^-power)` error using the two finest levels.
///
/// A single level is returned unchanged.
pub fn richardson(levels: &[(u64, f64)], power: i32) -> Result<f64> {
    let mut sorted = levels.to_vec();
    sorted.sort_by_key(|l| l.0);
    match sorted.as_slice() {
        [] => Err(Error::TooFewRows { need: 1, got: 0 }),
        [only] => Ok(only.1),
        [.., (m1, p1), (m2, p2)] => {
            if m1 == m2 {
                return Err(Error::InvalidInput("duplicate extrapolation level".into()));
            }
            let w1 = (*m1 as f64).powi(power);
            let w2 = (*m2 as f64).powi(power);
            Ok((w2 * p2 - w1 * p1) / (w2 - w1))
        }
    }
}

/// Extrapolates `sum_sigma P_{nA,nB,nC}(sigma)` with a caller-supplied solver.
pub fn brownian_limit_with<F>(
    capitals: &CapitalVector,
    levels: &[u64],
    eval: F,
) -> Result<BrownianEstimate>
where
    F: Fn(&CapitalVector) -> Result<f64> + Sync,
{
    if levels.is_empty() || levels.contains(&0) {
        return Err(Error::InvalidInput("levels must be positive multipliers".into()));
    }
    let mut out: Vec<BrownianLevel> = levels
        .par_iter()
        .map(|&m| {
            let scaled: Vec<u64> = capitals.stacks().iter().map(|s| s * m).collect();
            let cv = CapitalVector::new(scaled)?;
            Ok(BrownianLevel {
                multiplier: m,
                total: cv.total(),
                value: eval(&cv)?,
            })
        })
        .collect::<Result<_>>()?;
    out.sort_by_key(|l| l.total);
    let pairs: Vec<(u64, f64)> = out.iter().map(|l| (l.total, l.value)).collect();
    let limit = richardson(&pairs, 4)?;
    Ok(BrownianEstimate { levels: out, limit })
}

/// Extrapolation with 3-player Jacobi solves at each level.
pub fn brownian_limit(
    capitals: &CapitalVector,
    orders: &[EliminationOrder],
    levels: &[u64],
    opts: &JacobiOptions,
) -> Result<BrownianEstimate> {
    if capitals.players() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: capitals.players(),
        });
    }
    if let Some(o) = orders.iter().find(|o| o.len() != 3) {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: o.len(),
        });
    }
    let top = levels.iter().max().copied().unwrap_or(0) * capitals.total();
    if top > BROWNIAN_MAX_TOTAL {
        return Err(Error::CapExceeded {
            engine: "jacobi",
            k: 3,
            n: top,
            cap: BROWNIAN_MAX_TOTAL,
        });
    }
    brownian_limit_with(capitals, levels, |cv| {
        orders
            .iter()
            .map(|o| jacobi_solve_3(cv.total(), o, opts)?.value_at(cv))
            .sum()
    })
}
