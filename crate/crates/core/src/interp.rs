//! Barycentric interpolation from a fixed-total reference table.
//!
//! Capitals are scaled to the table total `N_ref`. With `f` the floors of the
//! first `k-1` scaled coordinates and `s` the sum of their fractional parts,
//! the candidate vertices are `f + e` for `e ∈ {0,1}^(k-1)` with
//! `|e| ∈ {⌊s⌋, ⌈s⌉}`, the last coordinate making up `N_ref`. Candidate
//! simplices are tried nearest first; the first one whose barycentric weights
//! are all nonnegative is used. Weights are exact rationals.

use std::cmp::Ordering;

use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::exact::ExactChain;
use crate::jacobi::face_table_3;
use crate::lattice::composition_rank;
use crate::model::{permute_stacks, CapitalVector, EliminationOrder, Engine, OrderDistribution};
use crate::table::ReferenceTable;

pub type Q = Ratio<i128>;

pub const DEFAULT_REF_THREE: u64 = 300;
pub const DEFAULT_REF_FOUR: u64 = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct BarycentricWeights {
    point: Vec<Q>,
    vertices: Vec<Vec<u64>>,
    lambdas: Vec<Q>,
}

impl BarycentricWeights {
    /// Capitals scaled to the table total.
    pub fn point(&self) -> &[Q] {
        &self.point
    }

    pub fn vertices(&self) -> &[Vec<u64>] {
        &self.vertices
    }

    pub fn lambdas(&self) -> &[Q] {
        &self.lambdas
    }

    pub fn lambdas_f64(&self) -> Vec<f64> {
        self.lambdas.iter().map(q_to_f64).collect()
    }

    /// `Σ λ_i v_i`, which equals [`point`](Self::point) exactly.
    pub fn reconstruct(&self) -> Vec<Q> {
        let k = self.point.len();
        (0..k)
            .map(|c| {
                self.vertices
                    .iter()
                    .zip(&self.lambdas)
                    .map(|(v, l)| l * Q::from_integer(v[c] as i128))
                    .fold(Q::zero(), |a, b| a + b)
            })
            .collect()
    }
}

pub fn q_to_f64(q: &Q) -> f64 {
    q.numer().to_f64().unwrap_or(f64::NAN) / q.denom().to_f64().unwrap_or(f64::NAN)
}

fn floor_q(q: &Q) -> i128 {
    q.floor().to_integer()
}

/// Candidate vertices in the order: by `|e|`, then by `e` read as a binary
/// number with the first player most significant.
fn candidates(point: &[Q], n_ref: u64) -> Vec<Vec<u64>> {
    let k = point.len();
    let free = k - 1;
    let floors: Vec<i128> = point[..free].iter().map(floor_q).collect();
    let frac: Q = point[..free]
        .iter()
        .zip(&floors)
        .map(|(x, f)| x - Q::from_integer(*f))
        .fold(Q::zero(), |a, b| a + b);
    let lo = floor_q(&frac) as u32;
    let hi = if frac.is_integer() { lo } else { lo + 1 };
    let mut es: Vec<u32> = (0..1u32 << free)
        .filter(|e| (lo..=hi).contains(&e.count_ones()))
        .collect();
    es.sort_by_key(|e| (e.count_ones(), *e));
    es.into_iter()
        .map(|e| {
            let mut v: Vec<u64> = (0..free)
                .map(|i| (floors[i] + i128::from((e >> (free - 1 - i)) & 1)) as u64)
                .collect();
            let used: u64 = v.iter().sum();
            v.push(n_ref - used);
            v
        })
        .collect()
}

fn distance(v: &[u64], point: &[f64]) -> f64 {
    v.iter()
        .zip(point)
        .map(|(&a, b)| (a as f64 - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Solves `Σ λ_j v_j = x` (first `k-1` coordinates) with `Σ λ_j = 1`.
/// Returns `None` unless the solution exists and is unique.
fn solve_weights(vertices: &[&Vec<u64>], point: &[Q]) -> Option<Vec<Q>> {
    let m = vertices.len();
    let rows = point.len();
    // augmented rows: k-1 coordinate rows and the affine row
    let mut a: Vec<Vec<Q>> = (0..rows)
        .map(|r| {
            let mut row: Vec<Q> = if r + 1 < rows {
                vertices.iter().map(|v| Q::from_integer(v[r] as i128)).collect()
            } else {
                vec![Q::one(); m]
            };
            row.push(if r + 1 < rows { point[r] } else { Q::one() });
            row
        })
        .collect();
    let mut pivot_row = 0;
    let mut pivots = Vec::new();
    for col in 0..m {
        let Some(p) = (pivot_row..rows).find(|&r| !a[r][col].is_zero()) else {
            return None;
        };
        a.swap(pivot_row, p);
        let inv = a[pivot_row][col].recip();
        for c in col..=m {
            a[pivot_row][c] *= inv;
        }
        for r in 0..rows {
            if r != pivot_row && !a[r][col].is_zero() {
                let f = a[r][col];
                for c in col..=m {
                    let t = a[pivot_row][c];
                    a[r][c] -= f * t;
                }
            }
        }
        pivots.push(pivot_row);
        pivot_row += 1;
    }
    // any leftover row must be consistent (0 = 0)
    if a[pivot_row..].iter().any(|row| !row[m].is_zero()) {
        return None;
    }
    Some(pivots.iter().map(|&r| a[r][m]).collect())
}

fn combinations(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(m);
    fn go(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    go(0, n, m, &mut cur, &mut out);
    out
}

/// Chooses the interpolation simplex for `capitals` on a grid of total `n_ref`.
pub fn select_simplex(n_ref: u64, capitals: &CapitalVector) -> Result<BarycentricWeights> {
    let k = capitals.players();
    if !(3..=4).contains(&k) {
        return Err(Error::DimensionMismatch { expected: 3, got: k });
    }
    let n = capitals.total() as i128;
    let point: Vec<Q> = capitals
        .stacks()
        .iter()
        .map(|&c| Q::new(c as i128 * n_ref as i128, n))
        .collect();
    let cands = candidates(&point, n_ref);
    let point_f: Vec<f64> = point.iter().map(q_to_f64).collect();
    let dist: Vec<f64> = cands.iter().map(|v| distance(v, &point_f)).collect();

    for m in (1..=k.min(cands.len())).rev() {
        let mut subsets = combinations(cands.len(), m);
        let total = |s: &Vec<usize>| s.iter().map(|&i| dist[i]).sum::<f64>();
        subsets.sort_by(|a, b| {
            total(a)
                .partial_cmp(&total(b))
                .unwrap_or(Ordering::Equal)
                .then_with(|| a.cmp(b))
        });
        for s in subsets {
            let verts: Vec<&Vec<u64>> = s.iter().map(|&i| &cands[i]).collect();
            let Some(lambdas) = solve_weights(&verts, &point) else {
                continue;
            };
            if lambdas.iter().any(|l| l.is_negative()) {
                continue;
            }
            // degenerate points put zero weight on some vertices; drop them
            let (vertices, lambdas): (Vec<Vec<u64>>, Vec<Q>) = verts
                .into_iter()
                .cloned()
                .zip(lambdas)
                .filter(|(_, l)| !l.is_zero())
                .unzip();
            let w = BarycentricWeights {
                point,
                vertices,
                lambdas,
            };
            debug_assert_eq!(w.reconstruct(), w.point);
            return Ok(w);
        }
    }
    Err(Error::Inconsistent(format!(
        "no admissible simplex contains the scaled point of {capitals}"
    )))
}

pub fn select_simplex_3(n_ref: u64, capitals: &CapitalVector) -> Result<BarycentricWeights> {
    capitals.expect_players(3)?;
    select_simplex(n_ref, capitals)
}

pub fn select_simplex_4(n_ref: u64, capitals: &CapitalVector) -> Result<BarycentricWeights> {
    capitals.expect_players(4)?;
    select_simplex(n_ref, capitals)
}

/// `P_v(sigma)` at a grid vertex. Vertices on a face or edge use the chain's
/// boundary behaviour: the broke players must come first in `sigma` (an
/// already-broke set is ordered uniformly), and the survivors continue as a
/// smaller game.
pub fn vertex_probability(
    table: &ReferenceTable,
    vertex: &[u64],
    sigma: &EliminationOrder,
) -> Result<f64> {
    if vertex.iter().all(|&v| v > 0) {
        return table.get(&permute_stacks(vertex, sigma));
    }
    let zeros = vertex.iter().filter(|&&v| v == 0).count();
    if (0..zeros).any(|j| vertex[sigma.at(j)] != 0) {
        return Ok(0.0);
    }
    let tie: f64 = (1..=zeros).map(|i| i as f64).product();
    let rest: Vec<u64> = (zeros..sigma.len()).map(|j| vertex[sigma.at(j)]).collect();
    let n = table.total();
    let p = match rest.len() {
        1 => 1.0,
        2 => rest[1] as f64 / n as f64,
        3 => {
            let idx = composition_rank(&rest, n).expect("positive survivors");
            let engine = ExactChain::shared();
            if n <= engine.config().cap_three {
                engine.table3(n)?[idx]
            } else {
                face_table_3(n)?[idx]
            }
        }
        _ => unreachable!("at most four players"),
    };
    Ok(p / tie)
}

/// Interpolated `P_capitals(sigma)`.
pub fn interp(table: &ReferenceTable, capitals: &CapitalVector, sigma: &EliminationOrder) -> Result<f64> {
    capitals.expect_players(table.players())?;
    capitals.expect_players(sigma.len())?;
    let w = select_simplex(table.total(), capitals)?;
    interp_with(table, &w, sigma)
}

pub fn interp_with(table: &ReferenceTable, w: &BarycentricWeights, sigma: &EliminationOrder) -> Result<f64> {
    let mut acc = 0.0;
    for (v, l) in w.vertices().iter().zip(w.lambdas()) {
        acc += q_to_f64(l) * vertex_probability(table, v, sigma)?;
    }
    Ok(acc)
}

pub fn interp_3(table: &ReferenceTable, capitals: &CapitalVector, sigma: &EliminationOrder) -> Result<f64> {
    capitals.expect_players(3)?;
    interp(table, capitals, sigma)
}

pub fn interp_4(table: &ReferenceTable, capitals: &CapitalVector, sigma: &EliminationOrder) -> Result<f64> {
    capitals.expect_players(4)?;
    interp(table, capitals, sigma)
}

/// Interpolates every order, with the weights used.
pub fn interp_distribution(
    table: &ReferenceTable,
    capitals: &CapitalVector,
) -> Result<(OrderDistribution, BarycentricWeights)> {
    let k = table.players();
    capitals.expect_players(k)?;
    let w = select_simplex(table.total(), capitals)?;
    let entries = EliminationOrder::all(k)
        .into_iter()
        .map(|o| interp_with(table, &w, &o).map(|p| (o, p)))
        .collect::<Result<Vec<_>>>()?;
    Ok((OrderDistribution::new(k, entries, Engine::Interp)?, w))
}
