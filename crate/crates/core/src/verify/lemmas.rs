use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{trace, SpdMatrix};
use crate::rng::{sample_wishart, RngStream};
use crate::wchisq::{
    d2f12_dtheta1_sq, d2f_dtheta2, df12_dtheta1, df_dtheta, eigen_cumsum_path, h_lambda,
    LambdaPath, WeightVector,
};

/// Points of the `λ` grid on `[0, 1]`.
pub const LAMBDA_GRID: usize = 21;
/// Second differences above this count as concavity violations.
const CONCAVITY_SLACK: f64 = 1e-8;
/// Smallest admissible eigenvalue gap along a path, relative to the trace.
const GAP_REL: f64 = 1e-6;
/// Required agreement of the closed-form and finite-difference derivatives.
const ANALYTIC_TOL: f64 = 1e-6;
/// Derivative ordering is only checked for `θ_i ≤ SEPARATION · θ_j`.
const SEPARATION: f64 = 0.9;
const MAX_ATTEMPTS: usize = 100;

fn log_uniform(s: &mut RngStream, lo: f64, hi: f64) -> f64 {
    (lo.ln() + s.uniform() * (hi.ln() - lo.ln())).exp()
}

fn lambda_grid() -> Vec<f64> {
    (0..LAMBDA_GRID)
        .map(|i| i as f64 / (LAMBDA_GRID - 1) as f64)
        .collect()
}

// ---------------------------------------------------------------------------
// Weighted χ² derivatives
// ---------------------------------------------------------------------------

struct Lemma1Instance {
    positive_violations: usize,
    concave_violations: usize,
    ordering_pairs: usize,
    ordering_violations: usize,
    min_f: f64,
    max_g: f64,
    min_order_gap: f64,
    analytic_diff: f64,
    analytic_second_diff: f64,
}

fn lemma1_instance(p: usize, stream: &mut RngStream) -> Result<Lemma1Instance> {
    let theta: Vec<f64> = (0..p).map(|_| log_uniform(stream, 0.2, 5.0)).collect();
    let t = (0.2 + 2.8 * stream.uniform()) * theta.iter().map(|th| 1.0 / th).sum::<f64>();
    let w = WeightVector::new(theta.clone())?;
    let f = (0..p)
        .map(|i| df_dtheta(t, &w, i))
        .collect::<Result<Vec<_>>>()?;
    let g = (0..p)
        .map(|i| d2f_dtheta2(t, &w, i))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Lemma1Instance {
        positive_violations: f.iter().filter(|&&v| !(v > 0.0)).count(),
        concave_violations: g.iter().filter(|&&v| !(v < 0.0)).count(),
        ordering_pairs: 0,
        ordering_violations: 0,
        min_f: f.iter().cloned().fold(f64::INFINITY, f64::min),
        max_g: g.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        min_order_gap: f64::INFINITY,
        analytic_diff: 0.0,
        analytic_second_diff: 0.0,
    };
    for i in 0..p {
        for j in 0..p {
            if theta[i] <= SEPARATION * theta[j] {
                out.ordering_pairs += 1;
                let gap = f[i] - f[j];
                out.min_order_gap = out.min_order_gap.min(gap);
                if !(gap > 0.0) {
                    out.ordering_violations += 1;
                }
            }
        }
    }
    if p == 2 {
        out.analytic_diff = (df12_dtheta1(t, theta[0], theta[1])? - f[0])
            .abs()
            .max((df12_dtheta1(t, theta[1], theta[0])? - f[1]).abs());
        out.analytic_second_diff = (d2f12_dtheta1_sq(t, theta[0], theta[1])? - g[0])
            .abs()
            .max((d2f12_dtheta1_sq(t, theta[1], theta[0])? - g[1]).abs());
    }
    Ok(out)
}

/// Signs and ordering of the weight derivatives of the weighted χ² CDF.
#[derive(Clone, Debug, Serialize)]
pub struct Lemma1Report {
    pub p: usize,
    pub instances: usize,
    /// Estimated `∂F/∂θ_i ≤ 0`.
    pub positive_violations: usize,
    /// Estimated `∂²F/∂θ_i² ≥ 0`.
    pub concave_violations: usize,
    pub ordering_pairs: usize,
    /// Pairs with `θ_i ≤ 0.9 θ_j` but `f_i ≤ f_j`.
    pub ordering_violations: usize,
    /// Largest closed-form vs finite-difference discrepancy of `f_i`
    /// (`p = 2` only).
    pub analytic_max_diff: Option<f64>,
    pub analytic_violations: usize,
    /// The same for `g_i`; reported only, since the second difference
    /// amplifies quadrature noise by the inverse squared step.
    pub analytic_second_max_diff: Option<f64>,
    pub min_first_derivative: f64,
    pub max_second_derivative: f64,
    pub min_ordering_gap: f64,
    pub worst_margin: f64,
}

impl Lemma1Report {
    pub fn violations(&self) -> usize {
        self.positive_violations
            + self.concave_violations
            + self.ordering_violations
            + self.analytic_violations
    }
}

pub fn check_lemma1(p: usize, num_instances: usize, stream: &RngStream) -> Result<Lemma1Report> {
    if p < 2 {
        return Err(Error::Domain(format!("lemma checks need p >= 2, got {p}")));
    }
    let results = (0..num_instances)
        .into_par_iter()
        .map(|i| lemma1_instance(p, &mut stream.derive(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let min_f = results
        .iter()
        .map(|r| r.min_f)
        .fold(f64::INFINITY, f64::min);
    let max_g = results
        .iter()
        .map(|r| r.max_g)
        .fold(f64::NEG_INFINITY, f64::max);
    let min_gap = results
        .iter()
        .map(|r| r.min_order_gap)
        .fold(f64::INFINITY, f64::min);
    let analytic = (p == 2).then(|| results.iter().map(|r| r.analytic_diff).fold(0.0, f64::max));
    let analytic_second = (p == 2).then(|| {
        results
            .iter()
            .map(|r| r.analytic_second_diff)
            .fold(0.0, f64::max)
    });
    Ok(Lemma1Report {
        p,
        instances: num_instances,
        positive_violations: results.iter().map(|r| r.positive_violations).sum(),
        concave_violations: results.iter().map(|r| r.concave_violations).sum(),
        ordering_pairs: results.iter().map(|r| r.ordering_pairs).sum(),
        ordering_violations: results.iter().map(|r| r.ordering_violations).sum(),
        analytic_max_diff: analytic,
        analytic_violations: results
            .iter()
            .filter(|r| r.analytic_diff > ANALYTIC_TOL)
            .count(),
        analytic_second_max_diff: analytic_second,
        min_first_derivative: min_f,
        max_second_derivative: max_g,
        min_ordering_gap: min_gap,
        worst_margin: min_f.min(-max_g).min(min_gap),
    })
}

// ---------------------------------------------------------------------------
// Concavity along λ ↦ λM₁ + (1 − λ)M₂
// ---------------------------------------------------------------------------

/// Rejects paths that are constant or pass near a repeated eigenvalue on the
/// `λ` grid.
pub fn check_path_spectrum(path: &LambdaPath) -> Result<()> {
    let diff = path.m1().matrix().lin_comb(1.0, path.m2().matrix(), -1.0)?;
    let scale = trace(path.m1().matrix()).max(trace(path.m2().matrix()));
    let limit = GAP_REL * scale;
    let spread = diff.frobenius_norm();
    if spread < limit {
        return Err(Error::DegenerateSpectrum { gap: spread, limit });
    }
    for lambda in lambda_grid() {
        let (gap, tr) = path.eigen_gap(lambda)?;
        if gap < GAP_REL * tr {
            return Err(Error::DegenerateSpectrum {
                gap,
                limit: GAP_REL * tr,
            });
        }
    }
    Ok(())
}

fn random_spd(stream: &mut RngStream, p: usize) -> Result<SpdMatrix> {
    let df = p + 2;
    let w = sample_wishart(stream, &SpdMatrix::identity(p), df)?;
    let scale = log_uniform(stream, 0.25, 4.0) / df as f64;
    SpdMatrix::new(w.matrix().scaled(scale))
}

/// Draws random SPD pairs until the path passes [`check_path_spectrum`].
/// Returns the path and the number of rejected draws. The threshold is
/// `U(0.2, 3) · E[Zᵀ M(½)⁻¹ Z]`.
pub fn sample_nondegenerate_path(p: usize, stream: &RngStream) -> Result<(LambdaPath, usize)> {
    let mut last = None;
    for attempt in 0..MAX_ATTEMPTS {
        let mut s = stream.derive(attempt as u64);
        let m1 = random_spd(&mut s, p)?;
        let m2 = random_spd(&mut s, p)?;
        let probe = LambdaPath::new(m1, m2, 1.0)?;
        let mid = probe.eigenvalues(0.5)?;
        let t = (0.2 + 2.8 * s.uniform()) * mid.iter().map(|d| 1.0 / d).sum::<f64>();
        let path = LambdaPath::new(probe.m1().clone(), probe.m2().clone(), t)?;
        match check_path_spectrum(&path) {
            Ok(()) => return Ok((path, attempt)),
            Err(e @ Error::DegenerateSpectrum { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or(Error::DegenerateSpectrum {
        gap: 0.0,
        limit: 0.0,
    }))
}

/// Second differences of `values` on the uniform grid.
fn second_differences(values: &[f64]) -> impl Iterator<Item = f64> + '_ {
    values.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2])
}

/// Concavity of one or more functions of `λ` over random SPD paths.
#[derive(Clone, Debug, Serialize)]
pub struct ConcavityReport {
    pub check: String,
    pub p: usize,
    pub instances: usize,
    /// Random pairs rejected for a degenerate spectrum.
    pub skipped: usize,
    /// Second differences above the slack.
    pub violations: usize,
    pub second_differences: usize,
    pub max_second_difference: f64,
    pub worst_margin: f64,
}

fn concavity_check<F>(
    name: &str,
    p: usize,
    num_instances: usize,
    stream: &RngStream,
    curves: F,
) -> Result<ConcavityReport>
where
    F: Fn(&LambdaPath) -> Result<Vec<Vec<f64>>> + Sync,
{
    if p < 2 {
        return Err(Error::Domain(format!(
            "concavity checks need p >= 2, got {p}"
        )));
    }
    let results = (0..num_instances)
        .into_par_iter()
        .map(|i| -> Result<(usize, usize, usize, f64)> {
            let (path, skipped) = sample_nondegenerate_path(p, &stream.derive(i as u64))?;
            let (mut count, mut bad, mut worst) = (0, 0, f64::NEG_INFINITY);
            for curve in curves(&path)? {
                for d2 in second_differences(&curve) {
                    count += 1;
                    worst = worst.max(d2);
                    if !(d2 < CONCAVITY_SLACK) {
                        bad += 1;
                    }
                }
            }
            Ok((skipped, count, bad, worst))
        })
        .collect::<Result<Vec<_>>>()?;
    let worst = results
        .iter()
        .map(|r| r.3)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ConcavityReport {
        check: name.to_string(),
        p,
        instances: num_instances,
        skipped: results.iter().map(|r| r.0).sum(),
        violations: results.iter().map(|r| r.2).sum(),
        second_differences: results.iter().map(|r| r.1).sum(),
        max_second_difference: worst,
        worst_margin: CONCAVITY_SLACK - worst,
    })
}

/// `h(λ) = P(Zᵀ M(λ)⁻¹ Z ≤ t)` on the `λ` grid.
pub fn check_lemma2(p: usize, num_instances: usize, stream: &RngStream) -> Result<ConcavityReport> {
    concavity_check("lemma2", p, num_instances, stream, |path| {
        let h = lambda_grid()
            .into_iter()
            .map(|l| h_lambda(l, path))
            .collect::<Result<Vec<_>>>()?;
        Ok(vec![h])
    })
}

/// Every bottom-up cumulative eigenvalue sum `c_i(λ)` on the `λ` grid.
pub fn check_appendix_concavity(
    p: usize,
    num_instances: usize,
    stream: &RngStream,
) -> Result<ConcavityReport> {
    concavity_check("appendix", p, num_instances, stream, |path| {
        let rows = lambda_grid()
            .into_iter()
            .map(|l| eigen_cumsum_path(path, l))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..p)
            .map(|i| rows.iter().map(|r| r[i]).collect())
            .collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::wchisq::wchisq_cdf;

    #[test]
    fn equal_matrices_are_degenerate() {
        let m = SpdMatrix::new(Matrix::from_diag(&[3.0, 2.0, 1.0])).unwrap();
        let path = LambdaPath::new(m.clone(), m, 1.0).unwrap();
        assert!(matches!(
            check_path_spectrum(&path),
            Err(Error::DegenerateSpectrum { .. })
        ));
        let h: Vec<f64> = lambda_grid()
            .iter()
            .map(|&l| h_lambda(l, &path).unwrap())
            .collect();
        assert!(second_differences(&h).all(|d| d.abs() < 1e-14));
    }

    #[test]
    fn crossing_eigenvalues_are_degenerate() {
        let a = SpdMatrix::new(Matrix::from_diag(&[1.0, 4.0])).unwrap();
        let b = SpdMatrix::new(Matrix::from_diag(&[4.0, 1.0])).unwrap();
        let path = LambdaPath::new(a, b, 1.0).unwrap();
        assert!(matches!(
            check_path_spectrum(&path),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn diagonal_pair_matches_closed_form_path() {
        let (a, b) = ([5.0, 2.0, 0.5], [4.0, 1.5, 0.2]);
        let path = LambdaPath::new(
            SpdMatrix::new(Matrix::from_diag(&a)).unwrap(),
            SpdMatrix::new(Matrix::from_diag(&b)).unwrap(),
            2.0,
        )
        .unwrap();
        check_path_spectrum(&path).unwrap();
        let mut h = Vec::new();
        for l in lambda_grid() {
            let d: Vec<f64> = a
                .iter()
                .zip(&b)
                .map(|(x, y)| l * x + (1.0 - l) * y)
                .collect();
            let want = wchisq_cdf(2.0, &WeightVector::new(d.clone()).unwrap()).unwrap();
            let got = h_lambda(l, &path).unwrap();
            assert!((got - want).abs() < 1e-12);
            let c = eigen_cumsum_path(&path, l).unwrap();
            assert!((c[2] - d[2]).abs() < 1e-12 && (c[0] - d.iter().sum::<f64>()).abs() < 1e-12);
            h.push(got);
        }
        assert!(second_differences(&h).all(|d| d < 0.0));
    }

    #[test]
    fn equal_weights_give_equal_derivatives() {
        let w = WeightVector::new(vec![1.0; 3]).unwrap();
        let f: Vec<f64> = (0..3).map(|i| df_dtheta(3.0, &w, i).unwrap()).collect();
        assert!((f[0] - f[1]).abs() < 1e-8 && (f[1] - f[2]).abs() < 1e-8);
    }

    #[test]
    fn small_lemma1_run() {
        let r = check_lemma1(2, 10, &RngStream::new(4)).unwrap();
        assert_eq!(r.violations(), 0, "{r:?}");
        assert!(r.analytic_max_diff.unwrap() < 1e-6);
    }

    #[test]
    fn reports_are_thread_independent() {
        let s = RngStream::new(8);
        let a = check_lemma2(2, 6, &s).unwrap();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let b = pool.install(|| check_lemma2(2, 6, &s)).unwrap();
        assert_eq!(
            a.max_second_difference.to_bits(),
            b.max_second_difference.to_bits()
        );
        assert_eq!(a.skipped, b.skipped);
    }
}
