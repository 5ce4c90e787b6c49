//! The weighted χ² family `T_θ = Σ Z_i² / θ_i` with `Z_i` iid standard
//! normal.
//!
//! The distribution function for general `p` is computed by Imhof's
//! inversion of the characteristic function. For `p = 2` there is a second,
//! independent route through a one-dimensional normal integral, together with
//! closed-form integrals for the first two derivatives in `θ₁`. Derivatives
//! for general `p` are taken numerically.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, trace, Matrix, SpdMatrix};
use crate::special::{chisq_cdf, normal_cdf, normal_pdf};

/// Positive weights `θ₁, …, θ_p`; each `θ_i` is the reciprocal scale of the
/// `i`-th χ²₁ component.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::Domain("weight vector must not be empty".into()));
        }
        for (index, &value) in theta.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonPositiveWeight { index, value });
            }
        }
        Ok(WeightVector(theta))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Copy with `θ_i` replaced.
    pub fn with(&self, i: usize, value: f64) -> Result<Self> {
        let mut theta = self.0.clone();
        theta[i] = value;
        WeightVector::new(theta)
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        WeightVector::new(self.0.iter().map(|x| c * x).collect())
    }
}

// ---------------------------------------------------------------------------
// Quadrature helpers
// ---------------------------------------------------------------------------

/// 10-point Gauss-Legendre nodes and weights on [-1, 1] (positive half).
const GL_NODES: [f64; 5] = [
    0.148_874_338_981_631_2,
    0.433_395_394_129_247_2,
    0.679_409_568_299_024_4,
    0.865_063_366_688_984_5,
    0.973_906_528_517_171_7,
];
const GL_WEIGHTS: [f64; 5] = [
    0.295_524_224_714_752_9,
    0.269_266_719_309_996_4,
    0.219_086_362_515_982,
    0.149_451_349_150_580_6,
    0.066_671_344_308_688_1,
];

fn gauss_legendre<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut s = 0.0;
    for (x, w) in GL_NODES.iter().zip(&GL_WEIGHTS) {
        s += w * (f(mid - half * x) + f(mid + half * x));
    }
    s * half
}

const SIMPSON_MAX_DEPTH: u32 = 50;

/// Adaptive Simpson quadrature with the usual Richardson correction.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if a == b {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, SIMPSON_MAX_DEPTH)
}

// ---------------------------------------------------------------------------
// General-p distribution function (Imhof)
// ---------------------------------------------------------------------------

/// Stop integrating once the neglected tail is below this.
const IMHOF_TAIL_TOL: f64 = 1e-15;
const IMHOF_MAX_PANELS: usize = 2_000_000;

struct Imhof<'a> {
    lambda: &'a [f64],
    x: f64,
}

impl Imhof<'_> {
    fn beta(&self, u: f64) -> f64 {
        0.5 * self.lambda.iter().map(|l| (l * u).atan()).sum::<f64>() - 0.5 * self.x * u
    }

    fn beta_prime(&self, u: f64) -> f64 {
        0.5 * self
            .lambda
            .iter()
            .map(|l| l / (1.0 + l * l * u * u))
            .sum::<f64>()
            - 0.5 * self.x
    }

    fn beta_second(&self, u: f64) -> f64 {
        -self
            .lambda
            .iter()
            .map(|l| {
                let d = 1.0 + l * l * u * u;
                l * l * l * u / (d * d)
            })
            .sum::<f64>()
    }

    /// Envelope `1 / (u ρ(u))`.
    fn envelope(&self, u: f64) -> f64 {
        let ln_rho = 0.25
            * self
                .lambda
                .iter()
                .map(|l| (l * l * u * u).ln_1p())
                .sum::<f64>();
        (-ln_rho).exp() / u
    }

    /// `d/du ln envelope`.
    fn envelope_log_slope(&self, u: f64) -> f64 {
        -1.0 / u
            - 0.5
                * self
                    .lambda
                    .iter()
                    .map(|l| l * l * u / (1.0 + l * l * u * u))
                    .sum::<f64>()
    }

    fn integrand(&self, u: f64) -> f64 {
        self.beta(u).sin() * self.envelope(u)
    }

    /// Upper bound on how fast the phase turns near `u`.
    fn phase_rate(&self, u: f64) -> f64 {
        0.5 * self
            .lambda
            .iter()
            .map(|l| l / (1.0 + l * l * u * u))
            .sum::<f64>()
            + 0.5 * self.x
    }

    /// Two rounds of integration by parts for `∫_u^∞ A sin β`, valid once
    /// the phase is monotone. Returns the correction and an estimate of
    /// the remainder.
    fn oscillatory_tail(&self, u: f64) -> (f64, f64) {
        let p = self.lambda.len() as f64;
        let a = self.envelope(u);
        let a1 = a * self.envelope_log_slope(u);
        let b1 = self.beta_prime(u);
        let b2 = self.beta_second(u);
        let c = a1 / b1 - a * b2 / (b1 * b1);
        let beta = self.beta(u);
        let tail = a / b1 * beta.cos() - c / b1 * beta.sin();
        let remainder = a * (1.0 + 0.5 * p) * (2.0 + 0.5 * p) / (u * u * b1.abs().powi(3));
        (tail, remainder)
    }

    fn cdf(&self) -> f64 {
        let p = self.lambda.len() as f64;
        let lmax = self.lambda.iter().cloned().fold(0.0, f64::max);
        let f = |u: f64| self.integrand(u);
        let mut u = 0.0;
        let mut integral = 0.0;
        let mut tail = 0.0;
        for _ in 0..IMHOF_MAX_PANELS {
            let width = (1.5 / self.phase_rate(u)).min(0.25 * u + 0.25 / lmax);
            let next = u + width;
            integral += gauss_legendre(&f, u, next);
            u = next;

            // Non-oscillatory bound: envelope decays like u^(-1-p/2).
            if self.envelope(u) * u / (0.5 * p) < IMHOF_TAIL_TOL {
                break;
            }
            if self.beta_prime(u) <= -0.25 * self.x {
                let (correction, remainder) = self.oscillatory_tail(u);
                if remainder < IMHOF_TAIL_TOL {
                    tail = correction;
                    break;
                }
            }
        }
        (0.5 - (integral + tail) / PI).clamp(0.0, 1.0)
    }
}

/// `P(T_θ ≤ t)`.
pub fn wchisq_cdf(t: f64, w: &WeightVector) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("argument must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    if t.is_infinite() {
        return Ok(1.0);
    }
    let theta = w.as_slice();
    if theta.len() == 1 {
        return chisq_cdf(theta[0] * t, 1.0);
    }
    let lambda: Vec<f64> = theta.iter().map(|th| 1.0 / th).collect();
    Ok(Imhof {
        lambda: &lambda,
        x: t,
    }
    .cdf())
}

// ---------------------------------------------------------------------------
// p = 2 closed-form integrals
// ---------------------------------------------------------------------------

const APPENDIX_TOL: f64 = 1e-10;

fn check_pair(theta1: f64, theta2: f64) -> Result<()> {
    WeightVector::new(vec![theta1, theta2]).map(|_| ())
}

/// `P(Z₁²/θ₁ + Z₂²/θ₂ ≤ t)` via
/// `4 ∫₀^√(θ₂t) Φ(√(θ₁(t − s²/θ₂))) φ(s) ds − 2Φ(√(θ₂t)) + 1`.
pub fn wchisq_cdf_p2(t: f64, theta1: f64, theta2: f64) -> Result<f64> {
    check_pair(theta1, theta2)?;
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("argument must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let upper = (theta2 * t).sqrt();
    let integrand = |s: f64| {
        let q = (t - s * s / theta2).max(0.0);
        normal_cdf((theta1 * q).sqrt()) * normal_pdf(s)
    };
    let integral = adaptive_simpson(&integrand, 0.0, upper, APPENDIX_TOL);
    Ok((4.0 * integral - 2.0 * normal_cdf(upper) + 1.0).clamp(0.0, 1.0))
}

/// `∂F₁₂/∂θ₁ = 2 ∫₀^√(θ₂t) (t − s²/θ₂)^{1/2} θ₁^{-1/2} φ(√(θ₁(t − s²/θ₂))) φ(s) ds`.
pub fn df12_dtheta1(t: f64, theta1: f64, theta2: f64) -> Result<f64> {
    check_pair(theta1, theta2)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("argument must be > 0, got {t}")));
    }
    let upper = (theta2 * t).sqrt();
    let integrand = |s: f64| {
        let q = (t - s * s / theta2).max(0.0);
        2.0 * (q / theta1).sqrt() * normal_pdf((theta1 * q).sqrt()) * normal_pdf(s)
    };
    Ok(adaptive_simpson(&integrand, 0.0, upper, APPENDIX_TOL))
}

/// `∂²F₁₂/∂θ₁²`, the negative integral of
/// `{q^{3/2} θ₁^{-1/2} + q^{1/2} θ₁^{-3/2}} φ(√(θ₁ q)) φ(s)` with
/// `q = t − s²/θ₂`.
pub fn d2f12_dtheta1_sq(t: f64, theta1: f64, theta2: f64) -> Result<f64> {
    check_pair(theta1, theta2)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("argument must be > 0, got {t}")));
    }
    let upper = (theta2 * t).sqrt();
    let integrand = |s: f64| {
        let q = (t - s * s / theta2).max(0.0);
        let bracket = q.powf(1.5) / theta1.sqrt() + q.sqrt() / theta1.powf(1.5);
        bracket * normal_pdf((theta1 * q).sqrt()) * normal_pdf(s)
    };
    Ok(-adaptive_simpson(&integrand, 0.0, upper, APPENDIX_TOL))
}

/// `∂F₁₂/∂θ₁` at `(a, b)` through the angular form
/// `√(b/a) t/π ∫₀^{π/2} cos²ρ exp(−at cos²ρ/2 − bt sin²ρ/2) dρ`.
pub fn df12_dtheta1_angular(t: f64, a: f64, b: f64) -> Result<f64> {
    check_pair(a, b)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("argument must be > 0, got {t}")));
    }
    let integrand = |rho: f64| {
        let (s, c) = rho.sin_cos();
        c * c * (-0.5 * a * t * c * c - 0.5 * b * t * s * s).exp()
    };
    let i = adaptive_simpson(&integrand, 0.0, FRAC_PI_2, APPENDIX_TOL);
    Ok((b / a).sqrt() * t / PI * i)
}

/// Positive lower bound on `∂F₁₂/∂θ₁(a, b) − ∂F₁₂/∂θ₁(b, a)` for `0 < a < b`:
/// `(b − a) t² / (8π) · e^{−(a+b)t/4} ∫₀^{π/2} sin²(2ρ) e^{(b−a) t cos(2ρ)/4} dρ`.
pub fn appendix_gap_lower_bound(t: f64, a: f64, b: f64) -> Result<f64> {
    check_pair(a, b)?;
    if !(t > 0.0) {
        return Err(Error::Domain(format!("argument must be > 0, got {t}")));
    }
    let k = (b - a) * t / 4.0;
    let integrand = |rho: f64| {
        let s = (2.0 * rho).sin();
        s * s * (k * (2.0 * rho).cos()).exp()
    };
    let i = adaptive_simpson(&integrand, 0.0, FRAC_PI_2, APPENDIX_TOL);
    Ok((b - a) * t * t / (8.0 * PI) * (-(a + b) * t / 4.0).exp() * i)
}

// ---------------------------------------------------------------------------
// Numerical derivatives in θ
// ---------------------------------------------------------------------------

const FIRST_STEP: f64 = 1e-4;
const SECOND_STEP: f64 = 1e-3;

fn step_for(x: f64, rel: f64) -> Result<f64> {
    let h = rel * x;
    let half = 0.5 * h;
    if !(half.is_normal()) || x + half == x || x - h <= 0.0 {
        return Err(Error::StepUnderflow { theta: x });
    }
    Ok(h)
}

/// Central first difference at relative step `rel`, with one Richardson
/// extrapolation from steps `h` and `h/2`.
pub fn richardson_first<F: Fn(f64) -> Result<f64>>(f: F, x: f64, rel: f64) -> Result<f64> {
    let h = step_for(x, rel)?;
    let d = |h: f64| -> Result<f64> { Ok((f(x + h)? - f(x - h)?) / (2.0 * h)) };
    let coarse = d(h)?;
    let fine = d(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// Central second difference with one Richardson extrapolation.
pub fn richardson_second<F: Fn(f64) -> Result<f64>>(f: F, x: f64, rel: f64) -> Result<f64> {
    let h = step_for(x, rel)?;
    let f0 = f(x)?;
    let s = |h: f64| -> Result<f64> { Ok((f(x + h)? - 2.0 * f0 + f(x - h)?) / (h * h)) };
    let coarse = s(h)?;
    let fine = s(0.5 * h)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

fn check_index(w: &WeightVector, i: usize) -> Result<()> {
    if i >= w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: i,
        });
    }
    Ok(())
}

/// `f_i(t; θ) = ∂F(t; θ)/∂θ_i`, numerically.
pub fn df_dtheta(t: f64, w: &WeightVector, i: usize) -> Result<f64> {
    check_index(w, i)?;
    richardson_first(
        |x| wchisq_cdf(t, &w.with(i, x)?),
        w.as_slice()[i],
        FIRST_STEP,
    )
}

/// `g_i(t; θ) = ∂²F(t; θ)/∂θ_i²`, numerically.
pub fn d2f_dtheta2(t: f64, w: &WeightVector, i: usize) -> Result<f64> {
    check_index(w, i)?;
    richardson_second(
        |x| wchisq_cdf(t, &w.with(i, x)?),
        w.as_slice()[i],
        SECOND_STEP,
    )
}

// ---------------------------------------------------------------------------
// Matrix path λ ↦ M(λ) = λM₁ + (1 − λ)M₂
// ---------------------------------------------------------------------------

/// Two SPD matrices and a threshold `t > 0` defining
/// `h(λ) = P(Zᵀ M(λ)⁻¹ Z ≤ t)`.
#[derive(Clone, Debug)]
pub struct LambdaPath {
    m1: SpdMatrix,
    m2: SpdMatrix,
    t: f64,
}

impl LambdaPath {
    pub fn new(m1: SpdMatrix, m2: SpdMatrix, t: f64) -> Result<Self> {
        if m1.dim() != m2.dim() {
            return Err(Error::DimensionMismatch {
                expected: m1.dim(),
                found: m2.dim(),
            });
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::Domain(format!(
                "threshold must be positive, got {t}"
            )));
        }
        Ok(LambdaPath { m1, m2, t })
    }

    pub fn dim(&self) -> usize {
        self.m1.dim()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn m1(&self) -> &SpdMatrix {
        &self.m1
    }

    pub fn m2(&self) -> &SpdMatrix {
        &self.m2
    }

    pub fn at(&self, lambda: f64) -> Result<Matrix> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::Domain(format!(
                "lambda must lie in [0, 1], got {lambda}"
            )));
        }
        self.m1
            .matrix()
            .lin_comb(lambda, self.m2.matrix(), 1.0 - lambda)
    }

    /// Eigenvalues of `M(λ)` in descending order.
    pub fn eigenvalues(&self, lambda: f64) -> Result<Vec<f64>> {
        Ok(sym_eigen(&self.at(lambda)?)?.values)
    }

    /// Smallest gap between consecutive eigenvalues of `M(λ)`, and the trace.
    pub fn eigen_gap(&self, lambda: f64) -> Result<(f64, f64)> {
        let m = self.at(lambda)?;
        let d = sym_eigen(&m)?.values;
        let gap = d
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(f64::INFINITY, f64::min);
        Ok((gap, trace(&m)))
    }
}

/// `h(λ) = P(Zᵀ M(λ)⁻¹ Z ≤ t) = F(t; d(λ))` with `d(λ)` the eigenvalues of
/// `M(λ)`.
pub fn h_lambda(lambda: f64, path: &LambdaPath) -> Result<f64> {
    let d = path.eigenvalues(lambda)?;
    wchisq_cdf(path.t, &WeightVector::new(d)?)
}

/// Bottom-up cumulative eigenvalue sums `c_i = Σ_{j ≥ i} d_j(λ)`.
pub fn eigen_cumsum_path(path: &LambdaPath, lambda: f64) -> Result<Vec<f64>> {
    let d = path.eigenvalues(lambda)?;
    let mut c = vec![0.0; d.len()];
    let mut acc = 0.0;
    for i in (0..d.len()).rev() {
        acc += d[i];
        c[i] = acc;
    }
    Ok(c)
}
