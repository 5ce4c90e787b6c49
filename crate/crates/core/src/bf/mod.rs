//! The two-sample multivariate Behrens–Fisher problem: data summaries, the
//! `T²` statistic, the canonical null sampler and the F-distribution bounds
//! on its null distribution under proportional covariances.

mod competitors;
mod method;

pub use competitors::{johansen_params, ky_df, nvdm_df, yao_df, JohansenParams};
pub use method::{run_all, run_test, DfInfo, Method, TestResult};

use crate::error::{Error, Result};
use crate::linalg::{quad_form_inv, Matrix, SpdMatrix};
use crate::rng::{sample_bartlett_factor, sample_normal_vec, RngStream};
use crate::special::{f_cdf, FParams};

/// Pivots of the sample covariance smaller than this fraction of the
/// corresponding variance are treated as exact collinearity.
const RANK_TOL: f64 = 1e-12;

/// Two independent samples of `p`-dimensional observations, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoSampleData {
    x: Matrix,
    y: Matrix,
}

impl TwoSampleData {
    /// Requires equal column counts, `p ≥ 1`, finite entries and
    /// `p < min(m, n)`.
    pub fn new(x: Matrix, y: Matrix) -> Result<Self> {
        let p = x.ncols();
        if p == 0 {
            return Err(Error::Domain(
                "observations must have at least one variable".into(),
            ));
        }
        if y.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: y.ncols(),
            });
        }
        let min = x.nrows().min(y.nrows());
        if p >= min {
            return Err(Error::DimensionTooLarge { p, min });
        }
        if x.as_slice()
            .iter()
            .chain(y.as_slice())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Domain("observations must be finite".into()));
        }
        Ok(TwoSampleData { x, y })
    }

    pub fn x(&self) -> &Matrix {
        &self.x
    }

    pub fn y(&self) -> &Matrix {
        &self.y
    }

    pub fn m(&self) -> usize {
        self.x.nrows()
    }

    pub fn n(&self) -> usize {
        self.y.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    /// The same data with the roles of the two samples exchanged.
    pub fn swapped(&self) -> TwoSampleData {
        TwoSampleData {
            x: self.y.clone(),
            y: self.x.clone(),
        }
    }
}

/// Sample mean and unbiased covariance (divisor `rows − 1`) of the rows.
/// Two-pass, upper triangle mirrored so the result is exactly symmetric.
pub fn sample_moments(rows: &Matrix) -> (Vec<f64>, Matrix) {
    let (n, p) = (rows.nrows(), rows.ncols());
    let mut mean = vec![0.0; p];
    for i in 0..n {
        for (m, x) in mean.iter_mut().zip(rows.row(i)) {
            *m += x;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = Matrix::zeros(p, p);
    let mut dev = vec![0.0; p];
    for i in 0..n {
        for ((d, x), m) in dev.iter_mut().zip(rows.row(i)).zip(&mean) {
            *d = x - m;
        }
        for a in 0..p {
            for b in a..p {
                cov[(a, b)] += dev[a] * dev[b];
            }
        }
    }
    let denom = (n as f64) - 1.0;
    for a in 0..p {
        for b in a..p {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    (mean, cov)
}

fn checked_covariance(rows: &Matrix, cov: Matrix, sample: usize) -> Result<SpdMatrix> {
    for j in 0..rows.ncols() {
        let col = rows.column(j);
        let first = col[0];
        if col.iter().all(|&v| v == first) {
            return Err(Error::RankDeficientSample { sample });
        }
    }
    let spd = SpdMatrix::new(cov).map_err(|_| Error::RankDeficientSample { sample })?;
    let l = spd.chol();
    for j in 0..spd.dim() {
        if l[(j, j)] * l[(j, j)] <= RANK_TOL * spd.matrix()[(j, j)] {
            return Err(Error::RankDeficientSample { sample });
        }
    }
    Ok(spd)
}

/// Sufficient statistics of a [`TwoSampleData`].
#[derive(Clone, Debug)]
pub struct Summary {
    /// `X̄ − Ȳ`.
    pub mean_diff: Vec<f64>,
    pub s1: SpdMatrix,
    pub s2: SpdMatrix,
    pub m: usize,
    pub n: usize,
}

impl Summary {
    pub fn p(&self) -> usize {
        self.mean_diff.len()
    }

    /// `S₁/m + S₂/n`.
    pub fn pooled_scatter(&self) -> Result<SpdMatrix> {
        let (m, n) = (self.m as f64, self.n as f64);
        SpdMatrix::new(
            self.s1
                .matrix()
                .lin_comb(1.0 / m, self.s2.matrix(), 1.0 / n)?,
        )
    }

    /// `(X̄ − Ȳ)ᵀ (S₁/m + S₂/n)⁻¹ (X̄ − Ȳ)`.
    pub fn t2(&self) -> Result<f64> {
        quad_form_inv(&self.mean_diff, &self.pooled_scatter()?)
    }
}

pub fn summarize(data: &TwoSampleData) -> Result<Summary> {
    let (mx, sx) = sample_moments(&data.x);
    let (my, sy) = sample_moments(&data.y);
    let s1 = checked_covariance(&data.x, sx, 1)?;
    let s2 = checked_covariance(&data.y, sy, 2)?;
    Ok(Summary {
        mean_diff: mx.iter().zip(&my).map(|(a, b)| a - b).collect(),
        s1,
        s2,
        m: data.m(),
        n: data.n(),
    })
}

pub fn t2_statistic(data: &TwoSampleData) -> Result<f64> {
    summarize(data)?.t2()
}

// ---------------------------------------------------------------------------
// Canonical form under H₀
// ---------------------------------------------------------------------------

/// `λ = m⁻¹ (m⁻¹ + k n⁻¹)⁻¹`, the weight on the first sample's Wishart in
/// the canonical representation when `Σ₂ = k Σ₁`.
pub fn lambda_from_k(k: f64, m: usize, n: usize) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::NonPositiveK(k));
    }
    let (m, n) = (m as f64, n as f64);
    Ok(1.0 / (1.0 + k * m / n))
}

/// Parameters of the canonical null representation
/// `T² ≐ Zᵀ{λ(m−1)⁻¹W₁ + (1−λ)(n−1)⁻¹W₂}⁻¹Z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CanonicalParams {
    lambda: f64,
    p: usize,
    m: usize,
    n: usize,
}

impl CanonicalParams {
    pub fn new(lambda: f64, p: usize, m: usize, n: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!(
                "lambda must lie in [0, 1], got {lambda}"
            )));
        }
        check_dims(p, m, n)?;
        Ok(CanonicalParams { lambda, p, m, n })
    }

    pub fn from_k(k: f64, p: usize, m: usize, n: usize) -> Result<Self> {
        CanonicalParams::new(lambda_from_k(k, m, n)?, p, m, n)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }
}

fn check_dims(p: usize, m: usize, n: usize) -> Result<()> {
    let min = m.min(n);
    if p == 0 || p >= min {
        return Err(Error::DimensionTooLarge { p, min });
    }
    Ok(())
}

/// One draw of `T²` under H₀ from its canonical form, with
/// `W₁ ~ W(I_p, m−1)`, `W₂ ~ W(I_p, n−1)` and `Z ~ N(0, I_p)`.
pub fn sample_canonical_t2(params: &CanonicalParams, stream: &mut RngStream) -> Result<f64> {
    let CanonicalParams { lambda, p, m, n } = *params;
    let a1 = sample_bartlett_factor(stream, p, m - 1)?;
    let a2 = sample_bartlett_factor(stream, p, n - 1)?;
    let c1 = lambda / (m - 1) as f64;
    let c2 = (1.0 - lambda) / (n - 1) as f64;
    let w1 = a1.matmul(&a1.transpose());
    let w2 = a2.matmul(&a2.transpose());
    let mix = SpdMatrix::new(w1.lin_comb(c1, &w2, c2)?)?;
    let z = sample_normal_vec(stream, p);
    quad_form_inv(&z, &mix)
}

// ---------------------------------------------------------------------------
// F bounds
// ---------------------------------------------------------------------------

/// `n Zᵀ W⁻¹ Z ≐ scale · F` with `W ~ W(I_p, n)` and `F ~ F_{p, n−p+1}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HotellingTransform {
    pub scale: f64,
    pub df: FParams,
}

pub fn hotelling_f_transform(p: usize, n: usize) -> Result<HotellingTransform> {
    if p == 0 || n < p {
        return Err(Error::DfTooSmall { df: n, p });
    }
    let d2 = (n - p + 1) as f64;
    Ok(HotellingTransform {
        scale: (n * p) as f64 / d2,
        df: FParams::new(p as f64, d2)?,
    })
}

/// Distribution functions bracketing `P(T² ≤ t)` under H₀.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct BoundCdfs {
    pub lower: f64,
    pub upper: f64,
}

/// Lower bound uses `ν = min(m, n) − 1` Wishart degrees of freedom, the
/// upper bound the pooled `m + n − 2`.
pub fn bound_cdfs(t: f64, p: usize, m: usize, n: usize) -> Result<BoundCdfs> {
    check_dims(p, m, n)?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("statistic must be >= 0, got {t}")));
    }
    let lower = hotelling_cdf(t, p, m.min(n) - 1)?;
    let upper = hotelling_cdf(t, p, m + n - 2)?;
    Ok(BoundCdfs { lower, upper })
}

/// `P(ν Zᵀ W_ν⁻¹ Z ≤ t)`.
fn hotelling_cdf(t: f64, p: usize, nu: usize) -> Result<f64> {
    let h = hotelling_f_transform(p, nu)?;
    f_cdf(t / h.scale, h.df)
}

/// Conservative p-value `1 − F_{p, min(m,n)−p}((min(m,n)−p) T² / (p (min(m,n)−1)))`.
pub fn fbound_pvalue(t2: f64, p: usize, m: usize, n: usize) -> Result<f64> {
    Ok(1.0 - bound_cdfs(t2, p, m, n)?.lower)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(x: &[&[f64]], y: &[&[f64]]) -> TwoSampleData {
        TwoSampleData::new(Matrix::from_rows(x).unwrap(), Matrix::from_rows(y).unwrap()).unwrap()
    }

    #[test]
    fn univariate_moments_by_hand() {
        let (mean, cov) = sample_moments(&Matrix::from_rows(&[[0.0], [2.0]]).unwrap());
        assert_eq!(mean, vec![1.0]);
        assert_eq!(cov[(0, 0)], 2.0);
    }

    #[test]
    fn constant_column_is_rank_deficient() {
        let d = data(
            &[&[0.1, 1.0], &[0.1, 2.0], &[0.1, 4.0]],
            &[&[1.0, 1.0], &[2.0, 0.0], &[0.5, 3.0]],
        );
        assert!(matches!(
            summarize(&d),
            Err(Error::RankDeficientSample { sample: 1 })
        ));
        let d = data(
            &[&[1.0, 1.0], &[2.0, 0.0], &[0.5, 3.0]],
            &[&[1.0, 2.0], &[2.0, 4.0], &[3.0, 6.0]],
        );
        assert!(matches!(
            summarize(&d),
            Err(Error::RankDeficientSample { sample: 2 })
        ));
    }

    #[test]
    fn data_invariants() {
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let y = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 7.0]]).unwrap();
        assert!(matches!(
            TwoSampleData::new(x, y),
            Err(Error::DimensionTooLarge { p: 2, min: 2 })
        ));
        let x = Matrix::from_rows(&[[1.0], [2.0]]).unwrap();
        let y = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 7.0]]).unwrap();
        assert!(matches!(
            TwoSampleData::new(x, y),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn t2_of_identical_samples_is_zero() {
        let rows: &[&[f64]] = &[&[1.0, 2.0], &[2.0, 1.5], &[0.0, -1.0], &[3.0, 0.5]];
        assert_eq!(t2_statistic(&data(rows, rows)).unwrap(), 0.0);
    }

    #[test]
    fn t2_univariate_reduction() {
        let x: &[&[f64]] = &[&[1.0], &[2.5], &[0.3], &[4.0]];
        let y: &[&[f64]] = &[&[2.0], &[3.1], &[5.2], &[4.4], &[3.3]];
        let t2 = t2_statistic(&data(x, y)).unwrap();
        let mean = |v: &[&[f64]]| v.iter().map(|r| r[0]).sum::<f64>() / v.len() as f64;
        let var = |v: &[&[f64]]| {
            let m = mean(v);
            v.iter().map(|r| (r[0] - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let want = (mean(x) - mean(y)).powi(2) / (var(x) / 4.0 + var(y) / 5.0);
        assert!((t2 - want).abs() < 1e-12 * want);
    }

    #[test]
    fn t2_matches_explicit_two_by_two_inverse() {
        let x: &[&[f64]] = &[&[1.0, 0.0], &[2.0, 1.0], &[0.0, 3.0], &[1.5, 1.5]];
        let y: &[&[f64]] = &[&[3.0, 1.0], &[4.0, 0.0], &[2.0, 2.5]];
        let d = data(x, y);
        let s = summarize(&d).unwrap();
        let a = s.pooled_scatter().unwrap().into_matrix();
        let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
        let (u, v) = (s.mean_diff[0], s.mean_diff[1]);
        let want = (a[(1, 1)] * u * u - 2.0 * a[(0, 1)] * u * v + a[(0, 0)] * v * v) / det;
        assert!((t2_statistic(&d).unwrap() - want).abs() < 1e-12 * want);
    }

    #[test]
    fn lambda_values() {
        assert_eq!(lambda_from_k(1.0, 10, 10).unwrap(), 0.5);
        assert!((lambda_from_k(1e-12, 10, 10).unwrap() - 1.0).abs() < 1e-9);
        assert!((lambda_from_k(10.0, 10, 20).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!(matches!(
            lambda_from_k(0.0, 5, 5),
            Err(Error::NonPositiveK(_))
        ));
        assert!(matches!(
            lambda_from_k(-1.0, 5, 5),
            Err(Error::NonPositiveK(_))
        ));
    }

    #[test]
    fn hotelling_transform_values() {
        let h = hotelling_f_transform(1, 7).unwrap();
        assert_eq!(h.scale, 1.0);
        assert_eq!(h.df, FParams::new(1.0, 7.0).unwrap());
        let h = hotelling_f_transform(5, 9).unwrap();
        assert_eq!(h.scale, 9.0);
        assert_eq!(h.df, FParams::new(5.0, 5.0).unwrap());
        assert!(matches!(
            hotelling_f_transform(5, 4),
            Err(Error::DfTooSmall { .. })
        ));
    }

    #[test]
    fn bounds_at_zero_and_dimension_checks() {
        let b = bound_cdfs(0.0, 3, 10, 12).unwrap();
        assert_eq!((b.lower, b.upper), (0.0, 0.0));
        assert_eq!(fbound_pvalue(0.0, 3, 10, 12).unwrap(), 1.0);
        assert!(matches!(
            bound_cdfs(1.0, 5, 5, 20),
            Err(Error::DimensionTooLarge { .. })
        ));
        assert!(matches!(
            fbound_pvalue(1.0, 10, 10, 50),
            Err(Error::DimensionTooLarge { .. })
        ));
    }

    #[test]
    fn lower_bound_with_equal_sizes_uses_m_minus_p() {
        let (p, m) = (3, 9);
        for &t in &[0.5, 3.0, 12.0] {
            let want = f_cdf(
                (m - p) as f64 * t / (p * (m - 1)) as f64,
                FParams::new(p as f64, (m - p) as f64).unwrap(),
            )
            .unwrap();
            assert_eq!(bound_cdfs(t, p, m, m).unwrap().lower, want);
        }
    }

    #[test]
    fn fbound_p5_reference() {
        // 1 − F_{5,5}(20·5/(5·9)) by the incomplete beta directly.
        let x = 100.0 / 45.0;
        let want = 1.0 - crate::special::beta_inc(2.5, 2.5, x / (x + 1.0)).unwrap();
        let got = fbound_pvalue(20.0, 5, 10, 20).unwrap();
        assert!((got - want).abs() < 1e-14);
    }

    #[test]
    fn canonical_params_validation() {
        assert!(CanonicalParams::new(1.5, 2, 5, 5).is_err());
        assert!(CanonicalParams::new(0.5, 5, 5, 10).is_err());
        let c = CanonicalParams::from_k(1.0, 2, 8, 8).unwrap();
        assert_eq!(c.lambda(), 0.5);
    }

    #[test]
    fn canonical_sample_is_reproducible() {
        let c = CanonicalParams::from_k(3.0, 3, 10, 20).unwrap();
        let a = sample_canonical_t2(&c, &mut RngStream::with_path(5, &[1])).unwrap();
        let b = sample_canonical_t2(&c, &mut RngStream::with_path(5, &[1])).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert!(a > 0.0);
    }
}
