//! Monte Carlo estimation of the Type I error of the five tests over a
//! grid of sample sizes and covariance ratios.

mod output;

pub use output::{
    csv_bytes, emit_csv, emit_json, emit_manifest, emit_svg, parse_csv, svg_file_name, svg_string,
    write_atomic, write_outputs, CSV_HEADER, SIGMA_FILE,
};

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bf::{
    lambda_from_k, sample_canonical_t2, summarize, CanonicalParams, Method, TwoSampleData,
};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, SpdMatrix};
use crate::rng::{sample_normal_vec, sample_wishart, RngStream};

pub const MIN_REPS: usize = 1000;
pub const DEFAULT_SIGMA_SEED: u64 = 0x5EED;
/// Degrees of freedom of the Wishart draw that fixes `Σ`.
pub const SIGMA_DF: usize = 10;
/// Redraw cap for a replication whose sample covariance is singular.
const MAX_RETRIES: u64 = 100;
const SIGMA_LABEL: u64 = 0x5167_6d61;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Simulate observations and apply all five tests.
    Direct,
    /// Draw `T²` from its canonical null law; F-bound only.
    Canonical,
}

/// One `(m, n, k)` cell, serialised as a `[m, n, k]` triple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, usize, f64)", into = "(usize, usize, f64)")]
pub struct Setting {
    pub m: usize,
    pub n: usize,
    pub k: f64,
}

impl From<(usize, usize, f64)> for Setting {
    fn from((m, n, k): (usize, usize, f64)) -> Self {
        Setting { m, n, k }
    }
}

impl From<Setting> for (usize, usize, f64) {
    fn from(s: Setting) -> Self {
        (s.m, s.n, s.k)
    }
}

fn default_mode() -> Mode {
    Mode::Direct
}

fn default_sigma_seed() -> u64 {
    DEFAULT_SIGMA_SEED
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub p: usize,
    pub grid: Vec<Setting>,
    pub alphas: Vec<f64>,
    pub reps: usize,
    pub base_seed: u64,
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default = "default_sigma_seed")]
    pub sigma_seed: u64,
    /// Worker count hint; `None` uses every available core.
    #[serde(default)]
    pub parallelism: Option<usize>,
}

pub const PAPER_KS: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const PAPER_SIZES: [(usize, usize); 6] = [
    (10, 10),
    (10, 20),
    (10, 50),
    (100, 100),
    (100, 200),
    (100, 500),
];

impl SimConfig {
    /// The full study: `p = 5`, six size pairs, five ratios, two levels.
    pub fn paper(reps: usize, base_seed: u64) -> SimConfig {
        let grid = PAPER_SIZES
            .iter()
            .flat_map(|&(m, n)| PAPER_KS.iter().map(move |&k| Setting { m, n, k }))
            .collect();
        SimConfig {
            p: 5,
            grid,
            alphas: vec![0.05, 0.01],
            reps,
            base_seed,
            mode: Mode::Direct,
            sigma_seed: DEFAULT_SIGMA_SEED,
            parallelism: None,
        }
    }

    pub fn from_json_str(s: &str) -> Result<SimConfig> {
        let c: SimConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.reps < MIN_REPS {
            return bad(format!(
                "reps must be at least {MIN_REPS}, got {}",
                self.reps
            ));
        }
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if self.mode == Mode::Direct && self.p > SIGMA_DF {
            return bad(format!(
                "p must be at most {SIGMA_DF} to draw Σ, got {}",
                self.p
            ));
        }
        if self.grid.is_empty() {
            return bad("grid must not be empty".into());
        }
        if self.alphas.is_empty() {
            return bad("alphas must not be empty".into());
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
            return bad(format!("alpha must lie in (0, 1), got {a}"));
        }
        for s in &self.grid {
            if self.p >= s.m.min(s.n) {
                return bad(format!(
                    "p = {} must be below min(m, n) for ({}, {}, {})",
                    self.p, s.m, s.n, s.k
                ));
            }
            if !(s.k > 0.0 && s.k.is_finite()) {
                return bad(format!("k must be positive, got {}", s.k));
            }
        }
        if self.parallelism == Some(0) {
            return bad("parallelism must be positive".into());
        }
        Ok(())
    }

    pub fn methods(&self) -> &'static [Method] {
        match self.mode {
            Mode::Direct => &Method::ALL,
            Mode::Canonical => &[Method::FBound],
        }
    }
}

/// Rejection count of one method at one level in one setting.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SettingResult {
    pub m: usize,
    pub n: usize,
    pub k: f64,
    pub alpha: f64,
    pub method: Method,
    pub reps: usize,
    pub rejections: usize,
    pub empirical_size: f64,
    pub mc_se: f64,
}

impl SettingResult {
    pub fn new(
        setting: Setting,
        alpha: f64,
        method: Method,
        reps: usize,
        rejections: usize,
    ) -> Self {
        SettingResult {
            m: setting.m,
            n: setting.n,
            k: setting.k,
            alpha,
            method,
            reps,
            rejections,
            empirical_size: rejections as f64 / reps as f64,
            mc_se: (alpha * (1.0 - alpha) / reps as f64).sqrt(),
        }
    }

    pub fn setting(&self) -> Setting {
        Setting {
            m: self.m,
            n: self.n,
            k: self.k,
        }
    }
}

// ---------------------------------------------------------------------------
// Σ
// ---------------------------------------------------------------------------

/// A `W(I_p, 10)` draw fixed by `sigma_seed`.
pub fn generate_sigma(sigma_seed: u64, p: usize) -> Result<SpdMatrix> {
    if p > SIGMA_DF || p == 0 {
        return Err(Error::DfTooSmall { df: SIGMA_DF, p });
    }
    let mut s = RngStream::with_path(sigma_seed, &[SIGMA_LABEL, p as u64]);
    sample_wishart(&mut s, &SpdMatrix::identity(p), SIGMA_DF)
}

/// On-disk form of a `Σ` realisation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaFile {
    pub version: u32,
    pub sigma_seed: u64,
    pub df: usize,
    pub p: usize,
    pub sigma: Vec<Vec<f64>>,
}

pub const SIGMA_FILE_VERSION: u32 = 1;

const BUNDLED_SIGMA: &str = include_str!("../../data/sigma_v1_seed5eed_p5.json");

impl SigmaFile {
    /// The stored `p = 5` realisation for the default seed.
    pub fn bundled() -> Result<SigmaFile> {
        Ok(serde_json::from_str(BUNDLED_SIGMA)?)
    }

    /// The bundled file when it matches `(sigma_seed, p)`, otherwise a fresh draw.
    pub fn resolve(sigma_seed: u64, p: usize) -> Result<SigmaFile> {
        let bundled = SigmaFile::bundled()?;
        if bundled.sigma_seed == sigma_seed && bundled.p == p {
            Ok(bundled)
        } else {
            SigmaFile::generate(sigma_seed, p)
        }
    }

    pub fn generate(sigma_seed: u64, p: usize) -> Result<SigmaFile> {
        let sigma = generate_sigma(sigma_seed, p)?;
        Ok(SigmaFile {
            version: SIGMA_FILE_VERSION,
            sigma_seed,
            df: SIGMA_DF,
            p,
            sigma: (0..p).map(|i| sigma.matrix().row(i).to_vec()).collect(),
        })
    }

    pub fn load(path: &Path) -> Result<SigmaFile> {
        let f: SigmaFile = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if f.version != SIGMA_FILE_VERSION {
            return Err(Error::Parse(format!(
                "unsupported sigma file version {}",
                f.version
            )));
        }
        Ok(f)
    }

    pub fn matrix(&self) -> Result<SpdMatrix> {
        SpdMatrix::from_rows(&self.sigma)
    }
}

// ---------------------------------------------------------------------------
// Running
// ---------------------------------------------------------------------------

/// Results of one setting plus its bookkeeping.
#[derive(Clone, Debug)]
pub struct SettingOutcome {
    pub results: Vec<SettingResult>,
    /// Replications redrawn because a sample covariance was singular.
    pub resamples: u64,
    pub elapsed_ms: u128,
}

fn gaussian_rows(stream: &mut RngStream, rows: usize, chol: &Matrix, scale: f64) -> Matrix {
    let p = chol.nrows();
    let mut out = Matrix::zeros(rows, p);
    for r in 0..rows {
        let z = sample_normal_vec(stream, p);
        let row = out.row_mut(r);
        for i in 0..p {
            row[i] = scale * (0..=i).map(|j| chol[(i, j)] * z[j]).sum::<f64>();
        }
    }
    out
}

/// p-values of every method for one replication, and the number of redraws.
fn direct_replication(
    setting: Setting,
    sigma_chol: &Matrix,
    path: [u64; 2],
    base_seed: u64,
) -> Result<(Vec<f64>, u64)> {
    let scale = setting.k.sqrt();
    for retry in 0..MAX_RETRIES {
        let mut s = RngStream::with_path(base_seed, &[path[0], path[1], retry]);
        let x = gaussian_rows(&mut s, setting.m, sigma_chol, 1.0);
        let y = gaussian_rows(&mut s, setting.n, sigma_chol, scale);
        let summary = match summarize(&TwoSampleData::new(x, y)?) {
            Ok(summary) => summary,
            Err(Error::RankDeficientSample { .. }) => continue,
            Err(e) => return Err(e),
        };
        let pv = summary.evaluate_all()?.iter().map(|r| r.p_value).collect();
        return Ok((pv, retry));
    }
    Err(Error::DegenerateStatistic(
        "replication stayed rank deficient after retries",
    ))
}

fn canonical_replication(
    params: &CanonicalParams,
    path: [u64; 2],
    base_seed: u64,
) -> Result<(Vec<f64>, u64)> {
    for retry in 0..MAX_RETRIES {
        let mut s = RngStream::with_path(base_seed, &[path[0], path[1], retry]);
        match sample_canonical_t2(params, &mut s) {
            Ok(t2) => {
                let pv = crate::bf::fbound_pvalue(t2, params.p(), params.m(), params.n())?;
                return Ok((vec![pv], retry));
            }
            Err(Error::NotPositiveDefinite { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Err(Error::DegenerateStatistic(
        "canonical draw stayed singular after retries",
    ))
}

/// Runs every replication of grid cell `index`. Replication `r` draws from
/// the stream at path `(index, r, retry)`, so counts do not depend on the
/// schedule. A test rejects when its p-value is at most `alpha`.
pub fn run_setting(config: &SimConfig, index: usize, sigma: &SpdMatrix) -> Result<SettingOutcome> {
    let setting = *config
        .grid
        .get(index)
        .ok_or_else(|| Error::InvalidConfig(format!("no grid cell {index}")))?;
    let start = Instant::now();
    let methods = config.methods();
    let params = CanonicalParams::new(
        lambda_from_k(setting.k, setting.m, setting.n)?,
        config.p,
        setting.m,
        setting.n,
    )?;
    if config.mode == Mode::Direct && sigma.dim() != config.p {
        return Err(Error::DimensionMismatch {
            expected: config.p,
            found: sigma.dim(),
        });
    }
    let per_rep = (0..config.reps)
        .into_par_iter()
        .map(|r| {
            let path = [index as u64, r as u64];
            match config.mode {
                Mode::Direct => direct_replication(setting, sigma.chol(), path, config.base_seed),
                Mode::Canonical => canonical_replication(&params, path, config.base_seed),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![vec![0usize; methods.len()]; config.alphas.len()];
    let mut resamples = 0;
    for (pv, retries) in &per_rep {
        resamples += retries;
        for (a, &alpha) in config.alphas.iter().enumerate() {
            for (j, &p) in pv.iter().enumerate() {
                counts[a][j] += usize::from(p <= alpha);
            }
        }
    }
    let mut results = Vec::new();
    for (a, &alpha) in config.alphas.iter().enumerate() {
        for (j, &method) in methods.iter().enumerate() {
            results.push(SettingResult::new(
                setting,
                alpha,
                method,
                config.reps,
                counts[a][j],
            ));
        }
    }
    Ok(SettingOutcome {
        results,
        resamples,
        elapsed_ms: start.elapsed().as_millis(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct SettingManifest {
    pub m: usize,
    pub n: usize,
    pub k: f64,
    pub resamples: u64,
    pub elapsed_ms: u128,
}

#[derive(Clone, Debug, Serialize)]
pub struct FailedSetting {
    pub m: usize,
    pub n: usize,
    pub k: f64,
    pub error: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config: SimConfig,
    pub sigma_file: String,
    pub started_at: String,
    pub per_setting: Vec<SettingManifest>,
    /// Cells that errored; their rows are absent from the results.
    pub failed: Vec<FailedSetting>,
}

#[derive(Clone, Debug)]
pub struct GridRun {
    pub rows: Vec<SettingResult>,
    pub manifest: RunManifest,
    pub sigma: SigmaFile,
}

impl GridRun {
    pub fn is_partial(&self) -> bool {
        !self.manifest.failed.is_empty()
    }
}

/// Runs the whole grid, in grid order, on a pool of `config.parallelism`
/// workers. A failing cell is recorded in the manifest and skipped.
pub fn run_grid(config: &SimConfig) -> Result<GridRun> {
    config.validate()?;
    let started_at = chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true);
    // The canonical law ignores Σ; it is still recorded.
    let sigma_file = SigmaFile::resolve(config.sigma_seed, config.p.min(SIGMA_DF))?;
    let sigma = sigma_file.matrix()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.parallelism {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?;
    let mut rows = Vec::new();
    let mut per_setting = Vec::new();
    let mut failed = Vec::new();
    for (i, s) in config.grid.iter().enumerate() {
        match pool.install(|| run_setting(config, i, &sigma)) {
            Ok(outcome) => {
                per_setting.push(SettingManifest {
                    m: s.m,
                    n: s.n,
                    k: s.k,
                    resamples: outcome.resamples,
                    elapsed_ms: outcome.elapsed_ms,
                });
                rows.extend(outcome.results);
            }
            Err(e) => failed.push(FailedSetting {
                m: s.m,
                n: s.n,
                k: s.k,
                error: e.to_string(),
            }),
        }
    }
    Ok(GridRun {
        rows,
        manifest: RunManifest {
            config: config.clone(),
            sigma_file: output::SIGMA_FILE.to_string(),
            started_at,
            per_setting,
            failed,
        },
        sigma: sigma_file,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SimConfig {
        SimConfig {
            p: 2,
            grid: vec![Setting { m: 6, n: 8, k: 2.0 }],
            alphas: vec![0.05, 0.01],
            reps: 1000,
            base_seed: 3,
            mode: Mode::Direct,
            sigma_seed: DEFAULT_SIGMA_SEED,
            parallelism: Some(1),
        }
    }

    #[test]
    fn paper_grid_shape() {
        let c = SimConfig::paper(20_000, 1);
        assert_eq!(c.grid.len(), 30);
        c.validate().unwrap();
    }

    #[test]
    fn config_validation() {
        let mut c = small_config();
        c.reps = 100;
        assert!(matches!(c.validate(), Err(Error::InvalidConfig(_))));
        let mut c = small_config();
        c.grid[0].m = 2;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.grid[0].k = 0.0;
        assert!(c.validate().is_err());
        let mut c = small_config();
        c.alphas = vec![1.5];
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let c = small_config();
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.contains("\"grid\":[[6,8,2.0]]"));
        assert_eq!(SimConfig::from_json_str(&json).unwrap(), c);
        let minimal = r#"{"p":2,"grid":[[6,8,2]],"alphas":[0.05],"reps":1000,"base_seed":1}"#;
        let c = SimConfig::from_json_str(minimal).unwrap();
        assert_eq!(c.mode, Mode::Direct);
        assert_eq!(c.sigma_seed, DEFAULT_SIGMA_SEED);
        assert!(SimConfig::from_json_str(
            r#"{"p":2,"grid":[[6,8,2]],"alphas":[0.05],"reps":1000,"base_seed":1,"bogus":1}"#
        )
        .is_err());
    }

    #[test]
    fn sigma_is_deterministic_spd() {
        let a = generate_sigma(DEFAULT_SIGMA_SEED, 5).unwrap();
        let b = generate_sigma(DEFAULT_SIGMA_SEED, 5).unwrap();
        assert_eq!(a.matrix().as_slice(), b.matrix().as_slice());
        assert!(matches!(
            generate_sigma(1, 11),
            Err(Error::DfTooSmall { df: 10, p: 11 })
        ));
    }

    #[test]
    fn setting_rows_and_monotone_levels() {
        let c = small_config();
        let sigma = generate_sigma(c.sigma_seed, c.p).unwrap();
        let out = run_setting(&c, 0, &sigma).unwrap();
        assert_eq!(out.results.len(), 10);
        for m in Method::ALL {
            let at = |a: f64| {
                out.results
                    .iter()
                    .find(|r| r.method == m && r.alpha == a)
                    .unwrap()
                    .rejections
            };
            assert!(at(0.01) <= at(0.05));
        }
        for r in &out.results {
            assert!(r.rejections <= r.reps && (0.0..=1.0).contains(&r.empirical_size));
        }
    }

    #[test]
    fn canonical_mode_reports_fbound_only() {
        let mut c = small_config();
        c.mode = Mode::Canonical;
        let run = run_grid(&c).unwrap();
        assert_eq!(run.rows.len(), 2);
        assert!(run.rows.iter().all(|r| r.method == Method::FBound));
    }
}
