//! Approximate degrees of freedom of the Yao, Johansen, Nel–van der Merwe
//! and Krishnamoorthy–Yu tests.
//!
//! With `S̃ᵢ = Sᵢ/nᵢ` and `S̃ = S̃₁ + S̃₂ = L Lᵀ`, every trace of a power of
//! `S̃ᵢ S̃⁻¹` equals the same trace of the symmetric `Bᵢ = L⁻¹ S̃ᵢ L⁻ᵀ`, and
//! `B₁ + B₂ = I`.

use super::{summarize, Summary, TwoSampleData};
use crate::error::{Error, Result};
use crate::linalg::{forward_substitute, trace, trace_product, Matrix, SpdMatrix};

/// Quantities shared by all four approximations.
pub(super) struct Whitened {
    pub p: usize,
    pub t2: f64,
    /// `S̃₁`, `S̃₂`.
    pub scaled: [Matrix; 2],
    /// `nᵢ − 1`.
    pub dof: [f64; 2],
    pub pooled: SpdMatrix,
    /// `B₁`, `B₂`.
    pub b: [Matrix; 2],
    /// `L⁻¹ d`.
    pub e: Vec<f64>,
}

impl Whitened {
    pub fn new(s: &Summary) -> Result<Self> {
        let scaled = [
            s.s1.matrix().scaled(1.0 / s.m as f64),
            s.s2.matrix().scaled(1.0 / s.n as f64),
        ];
        let pooled = s.pooled_scatter()?;
        let b = [pooled.whiten(&scaled[0])?, pooled.whiten(&scaled[1])?];
        let mut e = s.mean_diff.clone();
        forward_substitute(pooled.chol(), &mut e);
        let t2 = e.iter().map(|v| v * v).sum();
        Ok(Whitened {
            p: s.p(),
            t2,
            scaled,
            dof: [(s.m - 1) as f64, (s.n - 1) as f64],
            pooled,
            b,
            e,
        })
    }

    pub fn yao(&self) -> Result<f64> {
        if !(self.t2 > 0.0) {
            return Err(Error::DegenerateStatistic(
                "Yao df undefined when the mean difference is zero",
            ));
        }
        let mut inv = 0.0;
        for (b, dof) in self.b.iter().zip(self.dof) {
            let be = b.matvec(&self.e);
            let num: f64 = self.e.iter().zip(&be).map(|(x, y)| x * y).sum();
            inv += (num / self.t2).powi(2) / dof;
        }
        Ok(1.0 / inv)
    }

    /// Johansen's correction uses `I − W⁻¹Wᵢ` with weights `Wᵢ = S̃ᵢ⁻¹`,
    /// `W = ΣWⱼ`. With two samples that matrix is similar to `S̃ᵢS̃⁻¹`,
    /// i.e. to the whitened `Bᵢ`.
    pub fn johansen(&self) -> Result<JohansenParams> {
        let p = self.p as f64;
        let mut a = 0.0;
        for (b, dof) in self.b.iter().zip(self.dof) {
            let tr = trace(b);
            a += (trace_product(b, b)? + tr * tr) / (2.0 * dof);
        }
        if !(a > 0.0) {
            return Err(Error::DegenerateStatistic("Johansen correction vanishes"));
        }
        Ok(JohansenParams {
            c: p + 2.0 * a - 6.0 * a / (p * (p - 1.0) + 2.0),
            nu: p * (p + 2.0) / (3.0 * a),
        })
    }

    pub fn nvdm(&self) -> Result<f64> {
        let s = self.pooled.matrix();
        let tr = trace(s);
        let num = trace_product(s, s)? + tr * tr;
        let mut den = 0.0;
        for (si, dof) in self.scaled.iter().zip(self.dof) {
            let tri = trace(si);
            den += (trace_product(si, si)? + tri * tri) / dof;
        }
        Ok(num / den)
    }

    pub fn ky(&self) -> Result<f64> {
        let p = self.p as f64;
        let mut den = 0.0;
        for (b, dof) in self.b.iter().zip(self.dof) {
            let tr = trace(b);
            den += (trace_product(b, b)? + tr * tr) / dof;
        }
        Ok((p + p * p) / den)
    }
}

/// Johansen's scale `c` and denominator degrees of freedom `ν`; the
/// statistic is referred to `c · F_{p,ν}`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct JohansenParams {
    pub c: f64,
    pub nu: f64,
}

pub fn yao_df(data: &TwoSampleData) -> Result<f64> {
    Whitened::new(&summarize(data)?)?.yao()
}

pub fn johansen_params(data: &TwoSampleData) -> Result<JohansenParams> {
    Whitened::new(&summarize(data)?)?.johansen()
}

pub fn nvdm_df(data: &TwoSampleData) -> Result<f64> {
    Whitened::new(&summarize(data)?)?.nvdm()
}

pub fn ky_df(data: &TwoSampleData) -> Result<f64> {
    Whitened::new(&summarize(data)?)?.ky()
}
