//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::sync::OnceLock;
use std::time::Instant;

use mbf_core::bf::{fbound_pvalue, ky_df, nvdm_df, yao_df, Method, TwoSampleData};
use mbf_core::linalg::Matrix;
use mbf_core::rng::{sample_std_normal, RngStream};
use mbf_core::sim::{csv_bytes, run_grid, GridRun, SettingResult, SimConfig};
use mbf_core::special::{chisq_cdf, f_cdf, f_quantile, FParams};
use mbf_core::verify::{run_checks, CheckReport, SuiteSize, Which, DEFAULT_SEED};
use statrs::distribution::{ContinuousCDF, StudentsT};

const REPS: usize = 20_000;
const SIM_SEED: u64 = 0x5EED;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn paper_run(workers: usize) -> GridRun {
    let mut c = SimConfig::paper(REPS, SIM_SEED);
    c.parallelism = Some(workers);
    run_grid(&c).expect("paper grid")
}

fn grid() -> &'static GridRun {
    static RUN: OnceLock<GridRun> = OnceLock::new();
    RUN.get_or_init(|| paper_run(1))
}

fn se(alpha: f64) -> f64 {
    (alpha * (1.0 - alpha) / REPS as f64).sqrt()
}

fn cell(r: &SettingResult) -> String {
    format!(
        "{} (m={}, n={}, k={}, α={}) size {:.5}",
        r.method, r.m, r.n, r.k, r.alpha, r.empirical_size
    )
}

fn criterion1() -> Outcome {
    let run = grid();
    let cells: Vec<&SettingResult> = run
        .rows
        .iter()
        .filter(|r| r.method == Method::FBound)
        .collect();
    let bad: Vec<String> = cells
        .iter()
        .filter(|r| r.empirical_size > r.alpha + 3.0 * se(r.alpha))
        .map(|r| cell(r))
        .collect();
    let worst = cells
        .iter()
        .map(|r| (r.empirical_size - r.alpha) / se(r.alpha))
        .fold(f64::NEG_INFINITY, f64::max);
    outcome(
        cells.len() == 60 && bad.is_empty() && !run.is_partial(),
        format!(
            "{} F-bound cells, {} above α + 3se, max excess {:+.2} se {:?}",
            cells.len(),
            bad.len(),
            worst,
            bad
        ),
    )
}

fn criterion2() -> Outcome {
    let run = grid();
    let max_at = |alpha: f64| {
        run.rows
            .iter()
            .filter(|r| r.m == 10 && r.n == 10 && r.alpha == alpha && r.method != Method::FBound)
            .max_by(|a, b| a.empirical_size.total_cmp(&b.empirical_size))
            .unwrap()
    };
    let (a, b) = (max_at(0.05), max_at(0.01));
    outcome(
        a.empirical_size >= 1.5 * 0.05 && b.empirical_size >= 2.5 * 0.01,
        format!(
            "largest competitor sizes at m=n=10: {} (need ≥ 0.075); {} (need ≥ 0.025)",
            cell(a),
            cell(b)
        ),
    )
}

fn criterion3() -> Outcome {
    let run = grid();
    let alpha = 0.05;
    let cells: Vec<&SettingResult> = run
        .rows
        .iter()
        .filter(|r| r.m == 100 && r.alpha == alpha)
        .collect();
    let bad: Vec<String> = cells
        .iter()
        .filter(|r| (r.empirical_size - alpha).abs() > 4.0 * se(alpha))
        .map(|r| {
            format!(
                "{} [{:+.2} se]",
                cell(r),
                (r.empirical_size - alpha) / se(alpha)
            )
        })
        .collect();
    outcome(
        cells.len() == 75 && bad.is_empty(),
        format!(
            "{} cells at m=100, {} outside α ± 4se: {:?}",
            cells.len(),
            bad.len(),
            bad
        ),
    )
}

fn checks(which: Which) -> Vec<CheckReport> {
    run_checks(which, DEFAULT_SEED, &SuiteSize::default()).expect("verify suite")
}

fn summary(reports: &[CheckReport]) -> String {
    reports
        .iter()
        .map(|r| {
            format!(
                "{}: {} instances, {} violations, {} skipped, worst margin {:.3e}",
                r.check, r.instances, r.violations, r.skipped, r.worst_margin
            )
        })
        .collect::<Vec<_>>()
        .join("; ")
}

fn all_clear(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.violations == 0)
}

fn criterion4() -> Outcome {
    let start = Instant::now();
    let r = checks(Which::Theorem2);
    let settings = r[0].details.as_array().map_or(0, Vec::len);
    outcome(
        all_clear(&r) && settings == 9 && r[0].instances == 9,
        format!(
            "{}; {settings} settings; {:.1}s",
            summary(&r),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn criterion5() -> Outcome {
    let r = checks(Which::Theorem1);
    outcome(all_clear(&r) && r[0].instances == 20, summary(&r))
}

fn criterion6() -> Outcome {
    let r = checks(Which::Lemma1);
    let analytic = r[0].details[0]["analytic_max_diff"]
        .as_f64()
        .unwrap_or(f64::NAN);
    outcome(
        all_clear(&r) && r[0].instances == 600 && analytic < 1e-6,
        format!(
            "{}; p=2 first-derivative max diff {analytic:.2e}",
            summary(&r)
        ),
    )
}

fn criterion7() -> Outcome {
    let mut r = checks(Which::Lemma2);
    r.extend(checks(Which::Appendix));
    outcome(all_clear(&r), summary(&r))
}

fn welch_df(x: &Matrix, y: &Matrix) -> f64 {
    let var = |s: &Matrix| {
        let v = s.column(0);
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)
    };
    let (m, n) = (x.nrows() as f64, y.nrows() as f64);
    let (a, b) = (var(x) / m, var(y) / n);
    (a + b).powi(2) / (a * a / (m - 1.0) + b * b / (n - 1.0))
}

fn criterion8() -> Outcome {
    let mut worst_p = 0.0f64;
    for (m, n) in [(5, 5), (10, 10), (8, 30), (40, 12), (100, 500)] {
        let df = (m.min(n) - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, df).unwrap();
        for i in 0..=80 {
            let t2 = 0.25 * i as f64;
            let two_sided = 2.0 * t.sf(t2.sqrt());
            worst_p = worst_p.max((fbound_pvalue(t2, 1, m, n).unwrap() - two_sided).abs());
        }
    }
    let mut worst_df = 0.0f64;
    let mut s = RngStream::new(8);
    for i in 0..50 {
        let m = 3 + (s.uniform() * 40.0) as usize;
        let n = 3 + (s.uniform() * 40.0) as usize;
        let scale = (2.0 * s.uniform() - 1.0).exp2() * 2.0;
        let mut col = |len: usize, sd: f64| {
            Matrix::from_vec(
                len,
                1,
                (0..len).map(|_| sd * sample_std_normal(&mut s)).collect(),
            )
            .unwrap()
        };
        let x = col(m, 1.0);
        let y = col(n, scale);
        let welch = welch_df(&x, &y);
        let data = TwoSampleData::new(x, y).unwrap();
        for nu in [yao_df(&data), nvdm_df(&data), ky_df(&data)] {
            let nu = nu.unwrap_or_else(|e| panic!("dataset {i}: {e}"));
            worst_df = worst_df.max((nu - welch).abs() / welch.max(1.0));
        }
    }
    outcome(
        worst_p <= 1e-10 && worst_df <= 1e-10,
        format!("max |p − two-sided t p| {worst_p:.2e}; max scaled |ν − Welch| {worst_df:.2e} over 50 datasets"),
    )
}

fn criterion9() -> Outcome {
    let median = (1..=100)
        .map(|d| {
            let d = d as f64;
            (f_cdf(1.0, FParams::new(d, d).unwrap()).unwrap() - 0.5).abs()
        })
        .fold(0.0, f64::max);
    let chi2 = (0..=600)
        .map(|i| {
            let t = 0.05 * i as f64;
            (chisq_cdf(t, 2.0).unwrap() - (1.0 - (-t / 2.0).exp())).abs()
        })
        .fold(0.0, f64::max);
    let mut round = 0.0f64;
    for (d1, d2) in [
        (1.0, 1.0),
        (2.0, 5.0),
        (5.0, 5.0),
        (5.0, 45.0),
        (3.0, 200.0),
        (10.0, 14.0),
    ] {
        let fp = FParams::new(d1, d2).unwrap();
        for i in 1..=40 {
            let x = 0.1 * i as f64;
            let back = f_quantile(f_cdf(x, fp).unwrap(), fp).unwrap();
            round = round.max((back - x).abs());
        }
    }
    outcome(
        median <= 1e-12 && chi2 <= 1e-12 && round <= 1e-8,
        format!("f_cdf(1,d,d) err {median:.1e}; χ²₂ closed-form err {chi2:.1e}; quantile round trip err {round:.1e}"),
    )
}

fn criterion10() -> Outcome {
    let a = csv_bytes(&grid().rows).unwrap();
    let b = csv_bytes(&paper_run(4).rows).unwrap();
    outcome(
        a == b,
        format!(
            "1 worker vs 4 workers: {} vs {} CSV bytes, identical = {}",
            a.len(),
            b.len(),
            a == b
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("F-bound conservative on the full grid", criterion1),
        ("competitor inflation at m=n=10", criterion2),
        ("large-sample adequacy at m=100", criterion3),
        ("null law inside the F-bound sandwich", criterion4),
        ("majorization ordering of weighted forms", criterion5),
        (
            "weighted chi-square derivative signs and ordering",
            criterion6,
        ),
        ("concavity of h and of eigenvalue partial sums", criterion7),
        ("dimension-one reductions", criterion8),
        ("special-function accuracy", criterion9),
        ("grid CSV independent of worker count", criterion10),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "criterion {:>2} {} {name} [{:.1}s]: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
