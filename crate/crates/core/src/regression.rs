//! Regression-corrected ICM for three players.
//!
//! For `σ ∈ {321, 312, 213}` the ratio `R_σ = P_GR(σ) / P_ICM(σ)` is fitted
//! over the sorted region `1 <= A <= B <= C` of a reference table as a
//! bivariate polynomial in `x = A/N`, `y = B/N`. The other three orders
//! follow from the optional-stopping identities.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{
    complete_by_identities, icm_probability, IDENTITY_PAIRS, CapitalVector, EliminationOrder, Engine,
    OrderDistribution,
};
use crate::table::{lookup_full, ReferenceTable};

pub const FITTED_ORDERS: [&str; 3] = ["321", "312", "213"];
pub const SEXTIC: u32 = 6;
const MAGIC: &str = "ruinlab-model v1";

fn fitted(sigma: &EliminationOrder) -> bool {
    FITTED_ORDERS.iter().any(|s| sigma.to_string() == *s)
}

/// Exponents `(i, j)` of `x^i y^j`, by total degree then by `i` descending.
pub fn monomials(degree: u32) -> Vec<(u32, u32)> {
    (0..=degree)
        .flat_map(|t| (0..=t).rev().map(move |i| (i, t - i)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioRow {
    pub stacks: [u64; 3],
    pub x: f64,
    pub y: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct RatioDataset {
    pub order: EliminationOrder,
    pub n: u64,
    pub rows: Vec<RatioRow>,
}

/// Every sorted composition `A <= B <= C` of the table total.
pub fn build_ratio_dataset(table: &ReferenceTable, sigma: &EliminationOrder) -> Result<RatioDataset> {
    if table.players() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: table.players(),
        });
    }
    if !fitted(sigma) {
        return Err(Error::InvalidOrder(format!(
            "{sigma} is not fitted (only 321, 312, 213 are)"
        )));
    }
    let n = table.total();
    let nf = n as f64;
    let mut rows = Vec::new();
    for a in 1..=n / 3 {
        for b in a..=(n - a) / 2 {
            let c = n - a - b;
            if c < b {
                continue;
            }
            let caps = CapitalVector::new(vec![a, b, c])?;
            let gr = lookup_full(table, &caps, sigma)?;
            let icm = icm_probability(&caps, sigma)?;
            rows.push(RatioRow {
                stacks: [a, b, c],
                x: a as f64 / nf,
                y: b as f64 / nf,
                ratio: gr / icm,
            });
        }
    }
    Ok(RatioDataset {
        order: *sigma,
        n,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel {
    pub order: EliminationOrder,
    pub degree: u32,
    pub coefficients: Vec<f64>,
    pub training_n: u64,
    pub max_residual: f64,
    pub rms_residual: f64,
    /// `det(XᵀX)`, reported for comparison only; the fit never forms `XᵀX`.
    pub normal_det: f64,
}

impl RegressionModel {
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        monomials(self.degree)
            .iter()
            .zip(&self.coefficients)
            .map(|(&(i, j), b)| b * x.powi(i as i32) * y.powi(j as i32))
            .sum()
    }

    /// Coefficient of `x^i y^j`.
    pub fn beta(&self, i: u32, j: u32) -> Option<f64> {
        monomials(self.degree)
            .iter()
            .position(|&t| t == (i, j))
            .map(|p| self.coefficients[p])
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        writeln!(
            w,
            "{MAGIC} order={} N={} degree={}",
            self.order, self.training_n, self.degree
        )?;
        writeln!(
            w,
            "# max_residual={:.6e} rms_residual={:.6e} normal_det={:.6e}",
            self.max_residual, self.rms_residual, self.normal_det
        )?;
        for c in &self.coefficients {
            writeln!(w, "{c:.16e}")?;
        }
        Ok(())
    }

    pub fn read_from(r: impl BufRead) -> Result<Self> {
        let bad = |detail: String| Error::Parse {
            what: "model",
            detail,
        };
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))??;
        let rest = header
            .strip_prefix(MAGIC)
            .ok_or_else(|| bad(format!("bad header `{header}`")))?;
        let (mut order, mut n, mut degree) = (None, None, None);
        for f in rest.split_whitespace() {
            match f.split_once('=') {
                Some(("order", v)) => order = v.parse::<EliminationOrder>().ok(),
                Some(("N", v)) => n = v.parse::<u64>().ok(),
                Some(("degree", v)) => degree = v.parse::<u32>().ok(),
                _ => return Err(bad(format!("unknown header field `{f}`"))),
            }
        }
        let (Some(order), Some(training_n), Some(degree)) = (order, n, degree) else {
            return Err(bad(format!("incomplete header `{header}`")));
        };
        let mut diag = BTreeMap::new();
        let mut coefficients = Vec::new();
        for line in lines {
            let line = line?;
            let line = line.trim();
            if let Some(c) = line.strip_prefix('#') {
                for kv in c.split_whitespace() {
                    if let Some((k, v)) = kv.split_once('=') {
                        if let Ok(v) = v.parse::<f64>() {
                            diag.insert(k.to_string(), v);
                        }
                    }
                }
            } else if !line.is_empty() {
                coefficients.push(line.parse::<f64>().map_err(|e| bad(format!("{e}")))?);
            }
        }
        let want = monomials(degree).len();
        if coefficients.len() != want {
            return Err(bad(format!("expected {want} coefficients, got {}", coefficients.len())));
        }
        let d = |k: &str| diag.get(k).copied().unwrap_or(f64::NAN);
        Ok(Self {
            order,
            degree,
            coefficients,
            training_n,
            max_residual: d("max_residual"),
            rms_residual: d("rms_residual"),
            normal_det: d("normal_det"),
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        self.write_to(&mut f)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(fs::File::open(path)?))
    }
}

/// Least squares by Householder QR of the design matrix.
pub fn fit_polynomial(data: &RatioDataset, degree: u32) -> Result<RegressionModel> {
    let terms = monomials(degree);
    let p = terms.len();
    let rows = data.rows.len();
    if rows < p {
        return Err(Error::TooFewRows { need: p, got: rows });
    }
    let x = DMatrix::from_fn(rows, p, |r, c| {
        let (i, j) = terms[c];
        data.rows[r].x.powi(i as i32) * data.rows[r].y.powi(j as i32)
    });
    let y = DVector::from_iterator(rows, data.rows.iter().map(|r| r.ratio));
    let qr = x.clone().qr();
    let r = qr.r();
    let diag: Vec<f64> = (0..p).map(|i| r[(i, i)].abs()).collect();
    let dmax = diag.iter().cloned().fold(0.0, f64::max);
    let dmin = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(dmin > dmax * 1e-15) {
        return Err(Error::RankDeficient {
            condition: dmax / dmin,
        });
    }
    let qty = qr.q().transpose() * &y;
    let beta = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::Singular("triangular factor".into()))?;
    let resid = &x * &beta - &y;
    let max_residual = resid.amax();
    let rms_residual = (resid.norm_squared() / rows as f64).sqrt();
    // det(XᵀX) = det(R)², accumulated in logs to avoid underflow on the way
    let log_det: f64 = diag.iter().map(|d| 2.0 * d.ln()).sum();
    Ok(RegressionModel {
        order: data.order,
        degree,
        coefficients: beta.iter().copied().collect(),
        training_n: data.n,
        max_residual,
        rms_residual,
        normal_det: log_det.exp(),
    })
}

pub fn fit_sextic(data: &RatioDataset) -> Result<RegressionModel> {
    fit_polynomial(data, SEXTIC)
}

/// One model per fitted order.
#[derive(Debug, Clone, Default)]
pub struct RegressionModels {
    models: BTreeMap<EliminationOrder, RegressionModel>,
}

impl RegressionModels {
    pub fn new(models: impl IntoIterator<Item = RegressionModel>) -> Self {
        Self {
            models: models.into_iter().map(|m| (m.order, m)).collect(),
        }
    }

    /// Builds datasets and fits all three orders from one table.
    pub fn fit(table: &ReferenceTable, degree: u32) -> Result<Self> {
        let models = FITTED_ORDERS
            .iter()
            .map(|s| {
                let sigma: EliminationOrder = s.parse()?;
                fit_polynomial(&build_ratio_dataset(table, &sigma)?, degree)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::new(models))
    }

    pub fn get(&self, sigma: &EliminationOrder) -> Option<&RegressionModel> {
        self.models.get(sigma)
    }

    pub fn iter(&self) -> impl Iterator<Item = &RegressionModel> {
        self.models.values()
    }

    fn fitted_value(&self, sorted: &CapitalVector, tau: &EliminationOrder) -> Result<f64> {
        let m = self
            .get(tau)
            .ok_or_else(|| Error::ModelMissing(tau.to_string()))?;
        let n = sorted.total() as f64;
        let x = sorted.stack(0) as f64 / n;
        let y = sorted.stack(1) as f64 / n;
        Ok(icm_probability(sorted, tau)? * m.evaluate(x, y))
    }

    /// Regression-corrected `P_capitals(sigma)`.
    pub fn predict(&self, capitals: &CapitalVector, sigma: &EliminationOrder) -> Result<f64> {
        let (sorted, tau) = sort_relabel(capitals, sigma)?;
        if fitted(&tau) {
            return self.fitted_value(&sorted, &tau);
        }
        let d = self.predict_sorted(&sorted)?;
        Ok(d.get(&tau))
    }

    fn predict_sorted(&self, sorted: &CapitalVector) -> Result<OrderDistribution> {
        // complements are defined through the identities
        let n = sorted.total() as f64;
        let mut entries = Vec::with_capacity(6);
        for (known, complement, player) in IDENTITY_PAIRS {
            let given = self.fitted_value(sorted, &known.parse()?)?;
            entries.push((known.parse()?, given));
            entries.push((complement.parse()?, sorted.stack(player) as f64 / n - given));
        }
        Ok(OrderDistribution::unchecked(3, entries, Engine::Regression))
    }

    /// All six orders in the original labelling. Near the boundary a
    /// complement can come out slightly negative; it is returned as is.
    pub fn predict_distribution(&self, capitals: &CapitalVector) -> Result<OrderDistribution> {
        capitals.expect_players(3)?;
        let entries = EliminationOrder::all(3)
            .into_iter()
            .map(|o| self.predict(capitals, &o).map(|p| (o, p)))
            .collect::<Result<Vec<_>>>()?;
        Ok(OrderDistribution::unchecked(3, entries, Engine::Regression))
    }

    /// Variant of [`predict_distribution`](Self::predict_distribution) that
    /// rejects predictions whose complements go negative.
    pub fn predict_checked(&self, capitals: &CapitalVector) -> Result<OrderDistribution> {
        let d = self.predict_distribution(capitals)?;
        complete_by_identities([d.p("213"), d.p("312"), d.p("321")], capitals, Engine::Regression)
    }
}

/// Stable sort of the stacks; `sigma` is relabelled through the sort.
fn sort_relabel(
    capitals: &CapitalVector,
    sigma: &EliminationOrder,
) -> Result<(CapitalVector, EliminationOrder)> {
    capitals.expect_players(3)?;
    capitals.expect_players(sigma.len())?;
    let mut idx: Vec<usize> = (0..3).collect();
    idx.sort_by_key(|&p| capitals.stack(p));
    let mut rank = [0usize; 3];
    for (r, &p) in idx.iter().enumerate() {
        rank[p] = r;
    }
    let sorted = CapitalVector::new(idx.iter().map(|&p| capitals.stack(p)).collect::<Vec<_>>())?;
    let tau = EliminationOrder::new(&sigma.players().map(|p| rank[p]).collect::<Vec<_>>())?;
    Ok((sorted, tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{generate_table, TableMethod};

    #[test]
    fn monomial_order() {
        let m = monomials(6);
        assert_eq!(m.len(), 28);
        assert_eq!(&m[..6], &[(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
        assert_eq!(m[27], (0, 6));
    }

    #[test]
    fn recovers_known_sextic() {
        let terms = monomials(6);
        let truth: Vec<f64> = (0..terms.len()).map(|i| ((i as f64) * 0.7).sin()).collect();
        let n = 120u64;
        let mut rows = Vec::new();
        for a in 1..=n / 3 {
            for b in a..=(n - a) / 2 {
                let (x, y) = (a as f64 / n as f64, b as f64 / n as f64);
                let ratio = terms
                    .iter()
                    .zip(&truth)
                    .map(|(&(i, j), c)| c * x.powi(i as i32) * y.powi(j as i32))
                    .sum();
                rows.push(RatioRow {
                    stacks: [a, b, n - a - b],
                    x,
                    y,
                    ratio,
                });
            }
        }
        let data = RatioDataset {
            order: "321".parse().unwrap(),
            n,
            rows,
        };
        let m = fit_sextic(&data).unwrap();
        for (got, want) in m.coefficients.iter().zip(&truth) {
            assert!((got - want).abs() <= 1e-8 * want.abs().max(1.0), "{got} vs {want}");
        }
        assert!(m.max_residual < 1e-10);
    }

    #[test]
    fn rank_deficient_is_reported() {
        let rows = (0..40)
            .map(|i| RatioRow {
                stacks: [1, 1, 1],
                x: 0.25,
                y: 0.25,
                ratio: i as f64,
            })
            .collect();
        let data = RatioDataset {
            order: "321".parse().unwrap(),
            n: 3,
            rows,
        };
        assert!(matches!(fit_sextic(&data), Err(Error::RankDeficient { .. })));
        let few = RatioDataset {
            order: data.order,
            n: 3,
            rows: data.rows[..5].to_vec(),
        };
        assert!(matches!(fit_sextic(&few), Err(Error::TooFewRows { .. })));
    }

    #[test]
    fn dataset_shape() {
        let t = generate_table(3, 60, TableMethod::Exact).unwrap();
        let d = build_ratio_dataset(&t, &"321".parse().unwrap()).unwrap();
        assert_eq!(d.rows.len(), 300);
        assert!(d.rows.iter().all(|r| r.ratio > 0.0));
        assert!(build_ratio_dataset(&t, &"123".parse().unwrap()).is_err());
    }

    #[test]
    fn symmetric_family_ratio_is_one() {
        let t = generate_table(3, 40, TableMethod::Exact).unwrap();
        for i in 1..20u64 {
            let c = CapitalVector::new(vec![i, i, 40 - 2 * i]).unwrap();
            let sigma: EliminationOrder = "123".parse().unwrap();
            let r = lookup_full(&t, &c, &sigma).unwrap() / icm_probability(&c, &sigma).unwrap();
            assert!((r - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn predictions_obey_identities_and_relabeling() {
        let t = generate_table(3, 60, TableMethod::Exact).unwrap();
        let models = RegressionModels::fit(&t, 6).unwrap();
        for stacks in [[7u64, 20, 33], [33, 7, 20], [20, 33, 7], [10, 10, 40]] {
            let c = CapitalVector::new(stacks.to_vec()).unwrap();
            let d = models.predict_distribution(&c).unwrap();
            assert!((d.total() - 1.0).abs() < 1e-9);
            for r in crate::model::identity_residuals(&d, &c) {
                assert!(r.abs() < 1e-12);
            }
        }
        let a = models
            .predict(&CapitalVector::new(vec![7, 20, 33]).unwrap(), &"321".parse().unwrap())
            .unwrap();
        let b = models
            .predict(&CapitalVector::new(vec![33, 20, 7]).unwrap(), &"123".parse().unwrap())
            .unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn model_file_round_trip() {
        let t = generate_table(3, 36, TableMethod::Exact).unwrap();
        let m = fit_sextic(&build_ratio_dataset(&t, &"312".parse().unwrap()).unwrap()).unwrap();
        let mut buf = Vec::new();
        m.write_to(&mut buf).unwrap();
        let back = RegressionModel::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.coefficients, m.coefficients);
        assert_eq!(back.order, m.order);
        assert_eq!(back.training_n, 36);
    }
}
