use rayon::prelude::*;
use serde::Serialize;

use super::{is_majorized, MajorizationPair};
use crate::bf::{bound_cdfs, sample_canonical_t2, CanonicalParams};
use crate::error::{Error, Result};
use crate::linalg::{quad_form_inv, Matrix, SpdMatrix};
use crate::rng::{sample_bartlett_factor, sample_normal_vec, sample_std_normal, RngStream};

/// Number of evaluation points of an empirical CDF comparison.
pub const ORDER_GRID: usize = 50;
/// Excursions beyond this many standard errors count as violations.
const SE_BAND: f64 = 3.0;

fn ecdf(sorted: &[f64], t: f64) -> f64 {
    sorted.partition_point(|&x| x <= t) as f64 / sorted.len() as f64
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Evenly spaced points between the 1st and 99th percentiles.
fn percentile_grid(sorted: &[f64]) -> Vec<f64> {
    let (lo, hi) = (quantile(sorted, 0.01), quantile(sorted, 0.99));
    (0..ORDER_GRID)
        .map(|i| lo + (hi - lo) * i as f64 / (ORDER_GRID - 1) as f64)
        .collect()
}

/// A `W(I_p, df)` draw; uses a Gaussian factor when `df < p`.
fn identity_wishart(stream: &mut RngStream, p: usize, df: usize) -> Result<Matrix> {
    let factor = if df >= p {
        sample_bartlett_factor(stream, p, df)?
    } else {
        let mut g = Matrix::zeros(p, df);
        for i in 0..p {
            for j in 0..df {
                g.row_mut(i)[j] = sample_std_normal(stream);
            }
        }
        g
    };
    Ok(factor.matmul(&factor.transpose()))
}

fn weighted_sum(weights: &[f64], mats: &[Matrix], p: usize) -> Result<SpdMatrix> {
    let mut acc = Matrix::zeros(p, p);
    for (w, m) in weights.iter().zip(mats) {
        if *w != 0.0 {
            acc = acc.lin_comb(1.0, m, *w)?;
        }
    }
    SpdMatrix::new(acc)
}

/// Empirical CDFs of two statistics on a common grid.
#[derive(Clone, Debug, Serialize)]
pub struct OrderCheckReport {
    pub reps: usize,
    pub grid: Vec<f64>,
    pub ecdf_a: Vec<f64>,
    pub ecdf_b: Vec<f64>,
    /// Standard error of `ecdf_a − ecdf_b` at each grid point.
    pub mc_se: Vec<f64>,
    /// Points with `ecdf_a < ecdf_b − 3·mc_se`.
    pub violations: usize,
    /// `min(ecdf_a − ecdf_b + 3·mc_se)`.
    pub worst_margin: f64,
}

impl OrderCheckReport {
    /// Points where the expected order is resolved beyond noise:
    /// `ecdf_a > ecdf_b + 3·mc_se`.
    pub fn resolved_points(&self) -> usize {
        (0..self.grid.len())
            .filter(|&i| self.ecdf_a[i] - self.ecdf_b[i] > SE_BAND * self.mc_se[i])
            .count()
    }
}

/// Compares `Zᵀ(Σ a_i W_i)⁻¹Z` against `Zᵀ(Σ b_i W_i)⁻¹Z` with iid
/// `W_i ~ W(I_p, wishart_df)` shared between the two forms. A violation is a
/// grid point where the first CDF falls below the second beyond the band.
pub fn compare_forms(
    a: &[f64],
    b: &[f64],
    p: usize,
    wishart_df: usize,
    reps: usize,
    stream: &RngStream,
) -> Result<OrderCheckReport> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    if p == 0 || wishart_df == 0 || reps < 2 {
        return Err(Error::InvalidConfig(
            "p, wishart_df and reps must be positive".into(),
        ));
    }
    for w in [a, b] {
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Domain("weights must be finite and >= 0".into()));
        }
        let positive = w.iter().filter(|&&v| v > 0.0).count();
        if positive * wishart_df < p {
            return Err(Error::InvalidConfig(format!(
                "{positive} positive weights with {wishart_df} df cannot give a {p}-dimensional PD sum"
            )));
        }
    }
    let draws = (0..reps)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut s = stream.derive(i as u64);
            let mats = (0..a.len())
                .map(|_| identity_wishart(&mut s, p, wishart_df))
                .collect::<Result<Vec<_>>>()?;
            let z = sample_normal_vec(&mut s, p);
            Ok((
                quad_form_inv(&z, &weighted_sum(a, &mats, p)?)?,
                quad_form_inv(&z, &weighted_sum(b, &mats, p)?)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut fa, mut fb): (Vec<f64>, Vec<f64>) = draws.into_iter().unzip();
    fa.sort_by(f64::total_cmp);
    fb.sort_by(f64::total_cmp);
    let mut pooled: Vec<f64> = fa.iter().chain(&fb).cloned().collect();
    pooled.sort_by(f64::total_cmp);
    let grid = percentile_grid(&pooled);
    let n = reps as f64;
    let ecdf_a: Vec<f64> = grid.iter().map(|&t| ecdf(&fa, t)).collect();
    let ecdf_b: Vec<f64> = grid.iter().map(|&t| ecdf(&fb, t)).collect();
    let mc_se: Vec<f64> = ecdf_a
        .iter()
        .zip(&ecdf_b)
        .map(|(x, y)| ((x * (1.0 - x) + y * (1.0 - y)) / n).sqrt())
        .collect();
    let margins: Vec<f64> = (0..grid.len())
        .map(|i| ecdf_a[i] - ecdf_b[i] + SE_BAND * mc_se[i])
        .collect();
    Ok(OrderCheckReport {
        reps,
        violations: margins.iter().filter(|&&m| m < 0.0).count(),
        worst_margin: margins.iter().cloned().fold(f64::INFINITY, f64::min),
        grid,
        ecdf_a,
        ecdf_b,
        mc_se,
    })
}

/// `ψ ≺ η` implies the `ψ`-weighted form is stochastically smaller.
pub fn check_theorem1(
    psi: &[f64],
    eta: &[f64],
    p: usize,
    wishart_df: usize,
    reps: usize,
    stream: &RngStream,
) -> Result<OrderCheckReport> {
    let pair = MajorizationPair::new(psi.to_vec(), eta.to_vec())?;
    if !is_majorized(&pair) {
        return Err(Error::NotMajorized);
    }
    compare_forms(psi, eta, p, wishart_df, reps, stream)
}

/// A random probability vector `η` of length `r` and `ψ = ηD` for a
/// product of random T-transforms `D`, so that `ψ ≺ η`.
pub fn random_majorized_pair(r: usize, stream: &mut RngStream) -> (Vec<f64>, Vec<f64>) {
    let mut eta: Vec<f64> = (0..r).map(|_| -stream.uniform().ln()).collect();
    let total: f64 = eta.iter().sum();
    eta.iter_mut().for_each(|v| *v /= total);
    let mut psi = eta.clone();
    if r >= 2 {
        for _ in 0..r {
            let i = (stream.uniform() * r as f64) as usize % r;
            let j = (i + 1 + (stream.uniform() * (r - 1) as f64) as usize % (r - 1)) % r;
            let w = stream.uniform();
            let (a, b) = (psi[i], psi[j]);
            psi[i] = w * a + (1.0 - w) * b;
            psi[j] = (1.0 - w) * a + w * b;
        }
    }
    (psi, eta)
}

/// Empirical CDF of the canonical null statistic against the two F bounds.
#[derive(Clone, Debug, Serialize)]
pub struct Theorem2Report {
    pub p: usize,
    pub m: usize,
    pub n: usize,
    pub k: f64,
    pub reps: usize,
    pub grid: Vec<f64>,
    pub ecdf: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub lower_violations: usize,
    pub upper_violations: usize,
    pub violations: usize,
    /// `min(ecdf − lower)` and `min(upper − ecdf)` without the band.
    pub worst_lower_gap: f64,
    pub worst_upper_gap: f64,
    pub worst_margin: f64,
}

/// A point violates the sandwich when the ECDF leaves `[lower, upper]` by
/// more than three binomial standard errors evaluated at the bound.
pub fn check_theorem2(
    p: usize,
    m: usize,
    n: usize,
    k: f64,
    reps: usize,
    stream: &RngStream,
) -> Result<Theorem2Report> {
    let params = CanonicalParams::from_k(k, p, m, n)?;
    if reps < 2 {
        return Err(Error::InvalidConfig("reps must be at least 2".into()));
    }
    let mut draws = (0..reps)
        .into_par_iter()
        .map(|i| sample_canonical_t2(&params, &mut stream.derive(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    draws.sort_by(f64::total_cmp);
    let grid = percentile_grid(&draws);
    let nr = reps as f64;
    let se = |b: f64| (b * (1.0 - b) / nr).sqrt();
    let (mut ecdf_v, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    let (mut lv, mut uv) = (0, 0);
    let (mut wl, mut wu, mut wm) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
    for &t in &grid {
        let e = ecdf(&draws, t);
        let b = bound_cdfs(t, p, m, n)?;
        let lm = e - b.lower + SE_BAND * se(b.lower);
        let um = b.upper - e + SE_BAND * se(b.upper);
        lv += usize::from(lm < 0.0);
        uv += usize::from(um < 0.0);
        wl = wl.min(e - b.lower);
        wu = wu.min(b.upper - e);
        wm = wm.min(lm).min(um);
        ecdf_v.push(e);
        lower.push(b.lower);
        upper.push(b.upper);
    }
    Ok(Theorem2Report {
        p,
        m,
        n,
        k,
        reps,
        grid,
        ecdf: ecdf_v,
        lower,
        upper,
        lower_violations: lv,
        upper_violations: uv,
        violations: lv + uv,
        worst_lower_gap: wl,
        worst_upper_gap: wu,
        worst_margin: wm,
    })
}
