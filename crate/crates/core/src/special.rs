//! Scalar distribution functions: normal, χ² and F, with the incomplete
//! gamma and beta functions underneath.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

const BETA_CF_TOL: f64 = 1e-14;
const BETA_CF_MAX_ITER: usize = 300;
const GAMMA_TOL: f64 = 1e-16;
const GAMMA_MAX_ITER: usize = 10_000;
const TINY: f64 = 1e-300;

/// Degrees of freedom `(d1, d2)` of an F distribution.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FParams {
    pub d1: f64,
    pub d2: f64,
}

impl FParams {
    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        if !(d1 > 0.0 && d1.is_finite() && d2 > 0.0 && d2.is_finite()) {
            return Err(Error::Domain(format!(
                "F degrees of freedom must be positive and finite, got ({d1}, {d2})"
            )));
        }
        Ok(FParams { d1, d2 })
    }
}

pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

// ---------------------------------------------------------------------------
// Incomplete gamma
// ---------------------------------------------------------------------------

/// Regularised incomplete gamma functions `(P(a, x), Q(a, x))`.
///
/// Series for `x < a + 1`, Lentz continued fraction otherwise; the other
/// member of the pair is obtained by complement.
fn gamma_pq(a: f64, x: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    let log_prefix = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..GAMMA_MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * GAMMA_TOL {
                break;
            }
        }
        let p = (sum.ln() + log_prefix).exp().min(1.0);
        (p, 1.0 - p)
    } else {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..GAMMA_MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < GAMMA_TOL {
                break;
            }
        }
        let q = (h.ln() + log_prefix).exp().min(1.0);
        (1.0 - q, q)
    }
}

/// χ² distribution function with `k` (possibly fractional) degrees of freedom.
pub fn chisq_cdf(t: f64, k: f64) -> Result<f64> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::Domain(format!(
            "chi-square df must be positive, got {k}"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Domain(format!(
            "chi-square argument must be >= 0, got {t}"
        )));
    }
    if t.is_infinite() {
        return Ok(1.0);
    }
    Ok(gamma_pq(0.5 * k, 0.5 * t).0)
}

// ---------------------------------------------------------------------------
// Incomplete beta
// ---------------------------------------------------------------------------

/// Continued fraction for `I_x(a, b)` (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=BETA_CF_MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < BETA_CF_TOL {
            return Ok(h);
        }
    }
    Err(Error::Domain(format!(
        "incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})"
    )))
}

/// Regularised incomplete beta `I_x(a, b)`, given both `x` and `y = 1 - x`
/// so callers can pass an accurately computed complement.
fn beta_inc_xy(a: f64, b: f64, x: f64, y: f64) -> Result<f64> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    if y <= 0.0 {
        return Ok(1.0);
    }
    let ln_front = a * x.ln() + b * y.ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok((ln_front.exp() * beta_cf(a, b, x)? / a).clamp(0.0, 1.0))
    } else {
        Ok((1.0 - ln_front.exp() * beta_cf(b, a, y)? / b).clamp(0.0, 1.0))
    }
}

/// Regularised incomplete beta function `I_x(a, b)`.
pub fn beta_inc(a: f64, b: f64, x: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!(
            "beta parameters must be positive, got ({a}, {b})"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "beta argument must lie in [0, 1], got {x}"
        )));
    }
    beta_inc_xy(a, b, x, 1.0 - x)
}

// ---------------------------------------------------------------------------
// F distribution
// ---------------------------------------------------------------------------

fn check_f_arg(x: f64) -> Result<()> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("F argument must be >= 0, got {x}")));
    }
    Ok(())
}

pub fn f_cdf(x: f64, fp: FParams) -> Result<f64> {
    check_f_arg(x)?;
    if x.is_infinite() {
        return Ok(1.0);
    }
    let denom = fp.d1 * x + fp.d2;
    beta_inc_xy(0.5 * fp.d1, 0.5 * fp.d2, fp.d1 * x / denom, fp.d2 / denom)
}

/// Upper tail `1 - F(x)`, evaluated without cancellation.
pub fn f_sf(x: f64, fp: FParams) -> Result<f64> {
    check_f_arg(x)?;
    if x.is_infinite() {
        return Ok(0.0);
    }
    let denom = fp.d1 * x + fp.d2;
    beta_inc_xy(0.5 * fp.d2, 0.5 * fp.d1, fp.d2 / denom, fp.d1 * x / denom)
}

pub fn f_pdf(x: f64, fp: FParams) -> Result<f64> {
    check_f_arg(x)?;
    if x == 0.0 {
        return Ok(if fp.d1 < 2.0 {
            f64::INFINITY
        } else if fp.d1 == 2.0 {
            1.0
        } else {
            0.0
        });
    }
    let (a, b) = (0.5 * fp.d1, 0.5 * fp.d2);
    let ln = a * (fp.d1 / fp.d2).ln() + (a - 1.0) * x.ln()
        - (a + b) * (1.0 + fp.d1 * x / fp.d2).ln()
        - ln_beta(a, b);
    Ok(ln.exp())
}

/// Inverse of [`f_cdf`]: bracket, bisect, then polish with Newton steps
/// that are kept inside the bracket.
pub fn f_quantile(q: f64, fp: FParams) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!(
            "quantile level must lie in (0, 1), got {q}"
        )));
    }
    let mut lo = 0.0;
    let mut hi = 1.0;
    while f_cdf(hi, fp)? < q {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Domain("F quantile bracket overflow".into()));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f_cdf(mid, fp)? < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-6 * hi {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..50 {
        let err = f_cdf(x, fp)? - q;
        if err < 0.0 {
            lo = lo.max(x);
        } else {
            hi = hi.min(x);
        }
        let dens = f_pdf(x, fp)?;
        let mut next = if dens > 0.0 && dens.is_finite() {
            x - err / dens
        } else {
            0.5 * (lo + hi)
        };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if step <= 1e-15 * x.max(f64::MIN_POSITIVE) || hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_reference_values() {
        assert_eq!(normal_cdf(0.0), 0.5);
        assert!((normal_cdf(1.959963984540054) - 0.975).abs() < 1e-15);
        assert!((normal_cdf(-1.959963984540054) - 0.025).abs() < 1e-15);
        assert!((normal_pdf(0.0) - 0.3989422804014327).abs() < 1e-16);
    }

    #[test]
    fn chisq_reference_values() {
        assert_eq!(chisq_cdf(0.0, 3.0).unwrap(), 0.0);
        assert!((chisq_cdf(3.841458820694124, 1.0).unwrap() - 0.95).abs() < 1e-12);
        for &t in &[0.01, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 80.0] {
            let want = -(-t / 2.0f64).exp_m1();
            assert!((chisq_cdf(t, 2.0).unwrap() - want).abs() < 1e-12, "t={t}");
        }
    }

    #[test]
    fn chisq_domain_errors() {
        assert!(chisq_cdf(-1.0, 2.0).is_err());
        assert!(chisq_cdf(1.0, 0.0).is_err());
        assert!(chisq_cdf(f64::NAN, 2.0).is_err());
    }

    #[test]
    fn f_equal_df_median_is_one() {
        for d in 1..=100 {
            let fp = FParams::new(d as f64, d as f64).unwrap();
            assert!((f_cdf(1.0, fp).unwrap() - 0.5).abs() < 1e-12, "d={d}");
        }
    }

    #[test]
    fn f_cdf_and_sf_are_complements() {
        let fp = FParams::new(5.0, 7.5).unwrap();
        for &x in &[0.0, 0.1, 0.9, 2.0, 10.0, 100.0] {
            let s = f_cdf(x, fp).unwrap() + f_sf(x, fp).unwrap();
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn f_quantile_round_trip() {
        for &(d1, d2) in &[(1.0, 1.0), (2.0, 9.0), (5.0, 5.0), (5.0, 95.0), (3.3, 41.7)] {
            let fp = FParams::new(d1, d2).unwrap();
            for &x in &[0.05, 0.3, 1.0, 2.5, 7.0, 20.0] {
                let q = f_cdf(x, fp).unwrap();
                // Beyond this the CDF is flat to double precision.
                if q > 1.0 - 1e-9 {
                    continue;
                }
                let back = f_quantile(q, fp).unwrap();
                assert!(
                    (back - x).abs() <= 1e-8 * x.max(1.0),
                    "{d1},{d2}: {x} -> {back}"
                );
            }
        }
        assert!(f_quantile(0.0, FParams::new(1.0, 1.0).unwrap()).is_err());
    }

    #[test]
    fn fparams_validation() {
        assert!(FParams::new(0.0, 1.0).is_err());
        assert!(FParams::new(1.0, f64::INFINITY).is_err());
    }
}
