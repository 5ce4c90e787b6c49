//! Numerical checks of the majorization, monotonicity, concavity and
//! stochastic-ordering results behind the F-bound test.
//!
//! Every check draws its randomness from streams derived from a caller
//! supplied [`RngStream`], one per instance or replication, so reports do
//! not depend on the number of worker threads.

mod lemmas;
mod ordering;

pub use lemmas::{
    check_appendix_concavity, check_lemma1, check_lemma2, check_path_spectrum,
    sample_nondegenerate_path, ConcavityReport, Lemma1Report, LAMBDA_GRID,
};
pub use ordering::{
    check_theorem1, check_theorem2, compare_forms, random_majorized_pair, OrderCheckReport,
    Theorem2Report,
};

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::bf::lambda_from_k;
use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Absolute tolerance on partial sums in the majorization test.
pub const MAJORIZATION_TOL: f64 = 1e-12;

/// Two nonnegative vectors of equal length, tested for `x ≺ y`.
#[derive(Clone, Debug, PartialEq)]
pub struct MajorizationPair {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl MajorizationPair {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch {
                left: x.len(),
                right: y.len(),
            });
        }
        if let Some(v) = x.iter().chain(&y).find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Domain(format!(
                "majorization entries must be finite and >= 0, got {v}"
            )));
        }
        Ok(MajorizationPair { x, y })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }
}

fn sorted_desc(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// `x ≺ y`: equal totals and every prefix sum of the decreasingly sorted
/// `x` at most that of `y`.
pub fn is_majorized(pair: &MajorizationPair) -> bool {
    let (x, y) = (sorted_desc(&pair.x), sorted_desc(&pair.y));
    let (mut sx, mut sy) = (0.0, 0.0);
    for (a, b) in x.iter().zip(&y) {
        sx += a;
        sy += b;
        if sx > sy + MAJORIZATION_TOL {
            return false;
        }
    }
    (sx - sy).abs() <= MAJORIZATION_TOL
}

/// The weight vectors `ψ ≺ η ≺ ξ` of length `m + n − 2` used to sandwich
/// the canonical form between two Hotelling-type laws.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem2Weights {
    /// Uniform weights: pooled degrees of freedom.
    pub psi: Vec<f64>,
    /// `m − 1` copies of `λ/(m − 1)` and `n − 1` of `(1 − λ)/(n − 1)`.
    pub eta: Vec<f64>,
    /// `min(m, n) − 1` copies of their reciprocal, then zeros.
    pub xi: Vec<f64>,
}

pub fn build_theorem2_weights(m: usize, n: usize, k: f64) -> Result<Theorem2Weights> {
    if m < 2 || n < 2 {
        return Err(Error::Domain(format!(
            "sample sizes must be at least 2, got ({m}, {n})"
        )));
    }
    let lambda = lambda_from_k(k, m, n)?;
    let (nu, theta) = (m - 1, n - 1);
    let total = nu + theta;
    let psi = vec![1.0 / total as f64; total];
    let mut eta = vec![lambda / nu as f64; nu];
    eta.extend(std::iter::repeat_n((1.0 - lambda) / theta as f64, theta));
    let small = nu.min(theta);
    let mut xi = vec![1.0 / small as f64; small];
    xi.resize(total, 0.0);
    Ok(Theorem2Weights { psi, eta, xi })
}

// ---------------------------------------------------------------------------
// Suite
// ---------------------------------------------------------------------------

/// Which group of checks to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Which {
    Lemma1,
    Lemma2,
    Theorem1,
    Theorem2,
    Appendix,
    All,
}

impl Which {
    fn expand(self) -> Vec<Which> {
        match self {
            Which::All => vec![
                Which::Lemma1,
                Which::Lemma2,
                Which::Appendix,
                Which::Theorem1,
                Which::Theorem2,
            ],
            w => vec![w],
        }
    }

    fn label(self) -> u64 {
        match self {
            Which::Lemma1 => 1,
            Which::Lemma2 => 2,
            Which::Appendix => 3,
            Which::Theorem1 => 4,
            Which::Theorem2 => 5,
            Which::All => 0,
        }
    }
}

impl fmt::Display for Which {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Which::Lemma1 => "lemma1",
            Which::Lemma2 => "lemma2",
            Which::Theorem1 => "theorem1",
            Which::Theorem2 => "theorem2",
            Which::Appendix => "appendix",
            Which::All => "all",
        })
    }
}

impl FromStr for Which {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lemma1" => Ok(Which::Lemma1),
            "lemma2" => Ok(Which::Lemma2),
            "theorem1" => Ok(Which::Theorem1),
            "theorem2" => Ok(Which::Theorem2),
            "appendix" => Ok(Which::Appendix),
            "all" => Ok(Which::All),
            _ => Err(Error::Parse(format!(
                "unknown check {s:?}; expected lemma1, lemma2, theorem1, theorem2, appendix or all"
            ))),
        }
    }
}

/// Uniform summary of one check, as written to the JSON report.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub instances: usize,
    pub violations: usize,
    /// Smallest signed distance into the region the result requires, in the
    /// natural units of the check. Negative values are excursions, which
    /// only count as violations beyond the check's tolerance.
    pub worst_margin: f64,
    pub seed: u64,
    pub skipped: usize,
    pub details: serde_json::Value,
}

/// Replication counts and instance numbers of the default suite.
#[derive(Clone, Copy, Debug)]
pub struct SuiteSize {
    pub lemma_instances: usize,
    pub concavity_instances: usize,
    pub theorem1_pairs: usize,
    pub theorem1_reps: usize,
    pub theorem2_reps: usize,
}

impl Default for SuiteSize {
    fn default() -> Self {
        SuiteSize {
            lemma_instances: 200,
            concavity_instances: 100,
            theorem1_pairs: 20,
            theorem1_reps: 50_000,
            theorem2_reps: 100_000,
        }
    }
}

pub const THEOREM2_SETTINGS: [(usize, usize, usize); 3] = [(2, 12, 12), (5, 10, 50), (3, 8, 30)];
pub const THEOREM2_KS: [f64; 3] = [0.01, 1.0, 100.0];
/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 0x5EED;

fn to_json<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

fn run_one(which: Which, seed: u64, size: &SuiteSize) -> Result<CheckReport> {
    let root = RngStream::with_path(seed, &[which.label()]);
    match which {
        Which::Lemma1 => {
            let reports = [2usize, 3, 5]
                .iter()
                .map(|&p| check_lemma1(p, size.lemma_instances, &root.derive(p as u64)))
                .collect::<Result<Vec<_>>>()?;
            Ok(CheckReport {
                check: which.to_string(),
                instances: reports.iter().map(|r| r.instances).sum(),
                violations: reports.iter().map(Lemma1Report::violations).sum(),
                worst_margin: reports
                    .iter()
                    .map(|r| r.worst_margin)
                    .fold(f64::INFINITY, f64::min),
                seed,
                skipped: 0,
                details: to_json(&reports)?,
            })
        }
        Which::Lemma2 | Which::Appendix => {
            let reports = [2usize, 4]
                .iter()
                .map(|&p| {
                    let s = root.derive(p as u64);
                    if which == Which::Lemma2 {
                        check_lemma2(p, size.concavity_instances, &s)
                    } else {
                        check_appendix_concavity(p, size.concavity_instances, &s)
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(CheckReport {
                check: which.to_string(),
                instances: reports.iter().map(|r| r.instances).sum(),
                violations: reports.iter().map(|r| r.violations).sum(),
                worst_margin: reports
                    .iter()
                    .map(|r| r.worst_margin)
                    .fold(f64::INFINITY, f64::min),
                seed,
                skipped: reports.iter().map(|r| r.skipped).sum(),
                details: to_json(&reports)?,
            })
        }
        Which::Theorem1 => {
            let mut reports = Vec::new();
            for j in 0..size.theorem1_pairs {
                let mut s = root.derive(j as u64);
                let r = 2 + (s.uniform() * 5.0) as usize;
                let p = 1 + (s.uniform() * 4.0) as usize;
                let (psi, eta) = random_majorized_pair(r, &mut s);
                reports.push(check_theorem1(
                    &psi,
                    &eta,
                    p,
                    p + 3,
                    size.theorem1_reps,
                    &s.derive(1),
                )?);
            }
            Ok(CheckReport {
                check: which.to_string(),
                instances: reports.len(),
                violations: reports.iter().map(|r| r.violations).sum(),
                worst_margin: reports
                    .iter()
                    .map(|r| r.worst_margin)
                    .fold(f64::INFINITY, f64::min),
                seed,
                skipped: 0,
                details: to_json(&reports)?,
            })
        }
        Which::Theorem2 => {
            let mut reports = Vec::new();
            for (i, &(p, m, n)) in THEOREM2_SETTINGS.iter().enumerate() {
                for (j, &k) in THEOREM2_KS.iter().enumerate() {
                    let s = root.derive(i as u64).derive(j as u64);
                    reports.push(check_theorem2(p, m, n, k, size.theorem2_reps, &s)?);
                }
            }
            Ok(CheckReport {
                check: which.to_string(),
                instances: reports.len(),
                violations: reports.iter().map(|r| r.violations).sum(),
                worst_margin: reports
                    .iter()
                    .map(|r| r.worst_margin)
                    .fold(f64::INFINITY, f64::min),
                seed,
                skipped: 0,
                details: to_json(&reports)?,
            })
        }
        Which::All => unreachable!("expanded by run_checks"),
    }
}

/// Runs the selected checks at the given sizes.
pub fn run_checks(which: Which, seed: u64, size: &SuiteSize) -> Result<Vec<CheckReport>> {
    which
        .expand()
        .into_iter()
        .map(|w| run_one(w, seed, size))
        .collect()
}
