//! CSV tables and SVG line charts of sweep results.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::eval::sweep::RateAccuracyPoint;
use crate::fsutil::write_atomic;
use crate::pipeline::Method;

pub const CSV_HEADER: [&str; 10] = [
    "method",
    "q",
    "threshold",
    "refine_z",
    "bytes_image",
    "bytes_loc",
    "bytes_enh",
    "bytes_total",
    "psnr_db",
    "map",
];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

pub fn to_csv(points: &[RateAccuracyPoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::InvalidConfig(format!("csv: {e}"));
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for p in points {
        w.write_record([
            p.method.to_string(),
            opt(p.q),
            p.threshold.to_string(),
            opt(p.refine_z),
            format!("{:.2}", p.bytes_image),
            format!("{:.2}", p.bytes_loc),
            format!("{:.2}", p.bytes_enh),
            format!("{:.2}", p.bytes_total),
            opt(p.psnr_db.map(|v| format!("{v:.4}"))),
            format!("{:.6}", p.map),
        ])
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(|e| Error::InvalidConfig(format!("csv: {e}")))
}

pub fn write_csv(points: &[RateAccuracyPoint], path: &Path) -> Result<()> {
    write_atomic(path, &to_csv(points)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChartKind {
    RateMap,
    RatePsnr,
    MapPsnrIsoRate,
}

impl ChartKind {
    pub const ALL: [ChartKind; 3] = [ChartKind::RateMap, ChartKind::RatePsnr, ChartKind::MapPsnrIsoRate];

    pub fn file_name(self) -> &'static str {
        match self {
            ChartKind::RateMap => "rate-map.svg",
            ChartKind::RatePsnr => "rate-psnr.svg",
            ChartKind::MapPsnrIsoRate => "map-psnr-iso-rate.svg",
        }
    }
}

type Series = (String, Vec<(f64, f64)>);

/// Series keyed by method, with one HATC curve per image quality.
fn by_curve(points: &[RateAccuracyPoint], y: impl Fn(&RateAccuracyPoint) -> Option<f64>) -> Vec<Series> {
    let mut curves: BTreeMap<(Method, u8), Vec<(f64, f64)>> = BTreeMap::new();
    for p in points {
        let key = match p.method {
            Method::Hatc => (p.method, p.q.unwrap_or(0)),
            m => (m, 0),
        };
        if let Some(v) = y(p) {
            curves.entry(key).or_default().push((p.bytes_total / 1024.0, v));
        }
    }
    curves
        .into_iter()
        .map(|((m, q), mut pts)| {
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            let name = if m == Method::Hatc {
                format!("HATC q={q}")
            } else {
                m.to_string()
            };
            (name, pts)
        })
        .collect()
}

/// MAP against PSNR among image-carrying points near each of a few byte budgets.
fn iso_rate(points: &[RateAccuracyPoint]) -> Vec<Series> {
    let rated: Vec<&RateAccuracyPoint> = points.iter().filter(|p| p.psnr_db.is_some()).collect();
    let Some(lo) = rated.iter().map(|p| p.bytes_total).min_by(f64::total_cmp) else {
        return Vec::new();
    };
    let hi = rated.iter().map(|p| p.bytes_total).max_by(f64::total_cmp).unwrap_or(lo);
    const BUDGETS: usize = 5;
    (0..BUDGETS)
        .filter_map(|i| {
            let budget = lo + (hi - lo) * (i as f64 + 0.5) / BUDGETS as f64;
            let mut pts: Vec<(f64, f64)> = rated
                .iter()
                .filter(|p| (p.bytes_total - budget).abs() <= 0.1 * budget)
                .map(|p| (p.psnr_db.unwrap_or_default(), p.map))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            (!pts.is_empty()).then(|| (format!("{:.1} KB", budget / 1024.0), pts))
        })
        .collect()
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let span = (hi - lo).max(1e-9);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let n = ((end - start) / step).round() as usize;
    (start, end, (0..=n).map(|i| start + i as f64 * step).collect())
}

pub fn render_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (70.0, 170.0, 40.0, 60.0);
    let all = series.iter().flat_map(|s| s.1.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if x0 > x1 {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    let (x0, x1, xt) = ticks(x0, x1);
    let (y0, y1, yt) = ticks(y0, y1);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let sx = |x: f64| left + (x - x0) / (x1 - x0).max(1e-12) * pw;
    let sy = |y: f64| top + ph - (y - y0) / (y1 - y0).max(1e-12) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{title}</text>"#,
        left + pw / 2.0
    );
    for &t in &xt {
        let x = sx(t);
        let _ = writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{top}" x2="{x:.1}" y2="{:.1}" stroke="#ddd"/><text x="{x:.1}" y="{:.1}" text-anchor="middle">{}</text>"##,
            top + ph,
            top + ph + 18.0,
            fmt_tick(t)
        );
    }
    for &t in &yt {
        let y = sy(t);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.1}" x2="{:.1}" y2="{y:.1}" stroke="#ddd"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"##,
            left + pw,
            left - 6.0,
            y + 4.0,
            fmt_tick(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{x_label}</text>"#,
        left + pw / 2.0,
        h - 18.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(18 {:.1}) rotate(-90)" text-anchor="middle">{y_label}</text>"#,
        top + ph / 2.0
    );
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        );
        for &(x, y) in pts {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{color}"/>"#,
                sx(x),
                sy(y)
            );
        }
        let ly = top + 10.0 + i as f64 * 18.0;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{name}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    let r = (v * 1000.0).round() / 1000.0;
    if r == r.trunc() {
        format!("{r:.0}")
    } else {
        format!("{r}")
    }
}

pub fn chart(kind: ChartKind, points: &[RateAccuracyPoint]) -> String {
    match kind {
        ChartKind::RateMap => render_chart(
            "Rate-accuracy",
            "KB per query",
            "MAP",
            &by_curve(points, |p| Some(p.map)),
        ),
        ChartKind::RatePsnr => render_chart(
            "Rate-distortion",
            "KB per query",
            "PSNR (dB)",
            &by_curve(points, |p| p.psnr_db),
        ),
        ChartKind::MapPsnrIsoRate => render_chart(
            "Accuracy vs distortion at fixed budget",
            "PSNR (dB)",
            "MAP",
            &iso_rate(points),
        ),
    }
}

/// Writes all three charts into `dir` and returns their paths.
pub fn write_charts(points: &[RateAccuracyPoint], dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    ChartKind::ALL
        .iter()
        .map(|&k| {
            let path = dir.join(k.file_name());
            write_atomic(&path, chart(k, points).as_bytes())?;
            Ok(path)
        })
        .collect()
}
