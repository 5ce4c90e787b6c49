use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::{GridRun, RunManifest, SettingResult};
use crate::bf::Method;
use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 9] = [
    "m",
    "n",
    "k",
    "alpha",
    "method",
    "reps",
    "rejections",
    "empirical_size",
    "mc_se",
];
pub const SIGMA_FILE: &str = "sigma.json";

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn non_empty(rows: &[SettingResult]) -> Result<()> {
    if rows.is_empty() {
        Err(Error::EmptyResults)
    } else {
        Ok(())
    }
}

pub fn csv_bytes(rows: &[SettingResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.into());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in rows {
        w.write_record([
            r.m.to_string(),
            r.n.to_string(),
            r.k.to_string(),
            r.alpha.to_string(),
            r.method.id().to_string(),
            r.reps.to_string(),
            r.rejections.to_string(),
            r.empirical_size.to_string(),
            r.mc_se.to_string(),
        ])
        .map_err(io)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// One row per (setting, level, method), in run order.
pub fn emit_csv(rows: &[SettingResult], path: &Path) -> Result<()> {
    non_empty(rows)?;
    write_atomic(path, &csv_bytes(rows)?)
}

/// Reads a file written by [`emit_csv`].
pub fn parse_csv(path: &Path) -> Result<Vec<SettingResult>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    let header = rdr.headers().map_err(|e| Error::Parse(e.to_string()))?;
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Parse(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        let field = |j: usize| rec.get(j).unwrap_or("");
        let num = |j: usize| -> Result<f64> {
            field(j).parse().map_err(|_| {
                Error::Parse(format!("line {line}: bad {} {:?}", CSV_HEADER[j], field(j)))
            })
        };
        let int = |j: usize| -> Result<usize> {
            field(j).parse().map_err(|_| {
                Error::Parse(format!("line {line}: bad {} {:?}", CSV_HEADER[j], field(j)))
            })
        };
        rows.push(SettingResult {
            m: int(0)?,
            n: int(1)?,
            k: num(2)?,
            alpha: num(3)?,
            method: field(4)
                .parse()
                .map_err(|e| Error::Parse(format!("line {line}: {e}")))?,
            reps: int(5)?,
            rejections: int(6)?,
            empirical_size: num(7)?,
            mc_se: num(8)?,
        });
    }
    Ok(rows)
}

pub fn emit_json(rows: &[SettingResult], path: &Path) -> Result<()> {
    non_empty(rows)?;
    write_atomic(path, &serde_json::to_vec_pretty(rows)?)
}

pub fn emit_manifest(manifest: &RunManifest, path: &Path) -> Result<()> {
    write_atomic(path, &serde_json::to_vec_pretty(manifest)?)
}

const PANEL_W: f64 = 240.0;
const PANEL_H: f64 = 180.0;
const PAD_L: f64 = 44.0;
const PAD_T: f64 = 28.0;
const PAD_B: f64 = 30.0;
const PAD_R: f64 = 10.0;

fn distinct<T: PartialEq + Copy>(items: impl Iterator<Item = T>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for x in items {
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Bar charts of empirical size at level `alpha`: one panel per `(k, (m, n))`
/// with rows indexed by `k`, columns by `(m, n)`, and a reference line at
/// `alpha` in every panel.
pub fn svg_string(rows: &[SettingResult], alpha: f64) -> Result<String> {
    let rows: Vec<&SettingResult> = rows.iter().filter(|r| r.alpha == alpha).collect();
    if rows.is_empty() {
        return Err(Error::EmptyResults);
    }
    let mut ks = distinct(rows.iter().map(|r| r.k));
    ks.sort_by(f64::total_cmp);
    let sizes = distinct(rows.iter().map(|r| (r.m, r.n)));
    let methods: Vec<Method> = Method::ALL
        .into_iter()
        .filter(|m| rows.iter().any(|r| r.method == *m))
        .collect();
    let top = rows
        .iter()
        .map(|r| r.empirical_size)
        .fold(2.0 * alpha, f64::max)
        * 1.1;
    let width = PANEL_W * sizes.len() as f64;
    let height = PANEL_H * ks.len() as f64 + 30.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(
        s,
        r#"<text class="title" x="{}" y="18" text-anchor="middle" font-size="13">Empirical size at alpha = {alpha}</text>"#,
        width / 2.0
    );
    let plot_w = PANEL_W - PAD_L - PAD_R;
    let plot_h = PANEL_H - PAD_T - PAD_B;
    let bar_w = plot_w / methods.len() as f64;
    for (ri, &k) in ks.iter().enumerate() {
        for (ci, &(m, n)) in sizes.iter().enumerate() {
            let x0 = ci as f64 * PANEL_W + PAD_L;
            let y0 = 30.0 + ri as f64 * PANEL_H + PAD_T;
            let ybase = y0 + plot_h;
            let scale = |v: f64| ybase - plot_h * v / top;
            let _ = writeln!(
                s,
                r#"<g class="panel" data-k="{k}" data-m="{m}" data-n="{n}">"#
            );
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">m={m}, n={n}, k={k}</text>"#,
                x0 + plot_w / 2.0,
                y0 - 8.0
            );
            let _ = writeln!(
                s,
                r##"<rect class="frame" x="{x0}" y="{y0}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#999"/>"##
            );
            for tick in [0.0, top / 2.0, top] {
                let _ = writeln!(
                    s,
                    r#"<text class="tick" x="{}" y="{}" text-anchor="end">{:.3}</text>"#,
                    x0 - 4.0,
                    scale(tick) + 3.0,
                    tick
                );
            }
            for (j, method) in methods.iter().enumerate() {
                let bx = x0 + j as f64 * bar_w + 0.15 * bar_w;
                let Some(r) = rows
                    .iter()
                    .find(|r| r.k == k && r.m == m && r.n == n && r.method == *method)
                else {
                    continue;
                };
                let y = scale(r.empirical_size);
                let _ = writeln!(
                    s,
                    r##"<rect class="bar" data-method="{}" x="{bx:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#4a7ab5"><title>{}: {}</title></rect>"##,
                    method.id(),
                    0.7 * bar_w,
                    ybase - y,
                    method.label(),
                    r.empirical_size
                );
                let _ = writeln!(
                    s,
                    r#"<text class="label" x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
                    bx + 0.35 * bar_w,
                    ybase + 12.0,
                    method.label()
                );
            }
            let ya = scale(alpha);
            let _ = writeln!(
                s,
                r##"<line class="alpha-line" x1="{x0}" y1="{ya:.2}" x2="{}" y2="{ya:.2}" stroke="#c33" stroke-dasharray="4 3"/>"##,
                x0 + plot_w
            );
            s.push_str("</g>\n");
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn emit_svg(rows: &[SettingResult], alpha: f64, path: &Path) -> Result<()> {
    write_atomic(path, svg_string(rows, alpha)?.as_bytes())
}

pub fn svg_file_name(alpha: f64) -> String {
    format!("size_alpha_{alpha}.svg")
}

/// Writes `results.csv`, `results.json`, `manifest.json`, `sigma.json` and
/// one SVG per level into `dir`, returning the paths written.
pub fn write_outputs(run: &GridRun, dir: &Path) -> Result<Vec<PathBuf>> {
    non_empty(&run.rows)?;
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let csv = dir.join("results.csv");
    emit_csv(&run.rows, &csv)?;
    written.push(csv);
    let json = dir.join("results.json");
    emit_json(&run.rows, &json)?;
    written.push(json);
    let sigma = dir.join(SIGMA_FILE);
    write_atomic(&sigma, &serde_json::to_vec_pretty(&run.sigma)?)?;
    written.push(sigma);
    for &alpha in &run.manifest.config.alphas {
        let svg = dir.join(svg_file_name(alpha));
        emit_svg(&run.rows, alpha, &svg)?;
        written.push(svg);
    }
    let manifest = dir.join("manifest.json");
    emit_manifest(&run.manifest, &manifest)?;
    written.push(manifest);
    Ok(written)
}
