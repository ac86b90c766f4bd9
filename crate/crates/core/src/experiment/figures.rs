use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{amplitude_spectrum, ActionLog};

/// Files written by [`cmd_export_figures`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FigureExport {
    pub episodes: usize,
    /// CSV series written (three per completed episode).
    pub series: usize,
    pub files: Vec<PathBuf>,
    /// Set when there was nothing to export.
    pub warning: Option<String>,
}

fn write(path: PathBuf, text: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::file(&path, e))?;
    files.push(path);
    Ok(())
}

fn two_col(header: &str, xs: &[f64], ys: &[f64]) -> String {
    let mut out = format!("{header}\n");
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(out, "{x},{y}");
    }
    out
}

/// Minimal single-series line plot.
pub fn line_svg(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64]) -> String {
    const W: f64 = 640.0;
    const H: f64 = 320.0;
    const M: f64 = 48.0;
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-12 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = range(xs);
    let (y0, y1) = range(ys);
    let px = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let py = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let mut pts = String::new();
    for (x, y) in xs.iter().zip(ys) {
        let _ = write!(pts, "{:.2},{:.2} ", px(*x), py(*y));
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r##"<rect x="{M}" y="{M}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
        W - 2.0 * M,
        H - 2.0 * M
    );
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#1f5fa8" stroke-width="1.2" points="{}"/>"##,
        pts.trim_end()
    );
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{title}</text>"#, W / 2.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{x_label}</text>"#, W / 2.0, H - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {})">{y_label}</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (v, y) in [(y0, H - M), (y1, M)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" font-size="10" text-anchor="end">{v:.3}</text>"#, M - 4.0);
    }
    for (v, x) in [(x0, M), (x1, W - M)] {
        let _ = writeln!(s, r#"<text x="{x}" y="{}" font-size="10" text-anchor="middle">{v:.3}</text>"#, H - M + 14.0);
    }
    s.push_str("</svg>\n");
    s
}

/// Steering vs progress, steering change vs progress, and the steering
/// amplitude spectrum for every completed episode, as CSV plus SVG.
pub fn cmd_export_figures(log: &ActionLog, out_dir: &Path) -> Result<FigureExport> {
    log.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::file(out_dir, e))?;
    let mut files = Vec::new();
    let mut episodes = 0;
    for ep in log.episodes() {
        if !ep.completed() || ep.records.len() < 2 {
            continue;
        }
        episodes += 1;
        let steer = ep.steering();
        let progress = ep.progress();
        let dsteer: Vec<f64> = steer.windows(2).map(|w| w[1] - w[0]).collect();
        let spectrum = amplitude_spectrum(&steer, log.sample_rate)?;
        let stem = format!("episode_{:04}", ep.episode);
        let name = |suffix: &str| out_dir.join(format!("{stem}_{suffix}"));

        write(
            name("steering.csv"),
            &two_col("progress,steer", &progress, &steer),
            &mut files,
        )?;
        write(
            name("dsteer.csv"),
            &two_col("progress,dsteer", &progress[1..], &dsteer),
            &mut files,
        )?;
        write(name("spectrum.csv"), &spectrum.to_csv(), &mut files)?;

        let title = format!("episode {}", ep.episode);
        write(
            name("steering.svg"),
            &line_svg(&title, "progress (laps)", "steering", &progress, &steer),
            &mut files,
        )?;
        write(
            name("dsteer.svg"),
            &line_svg(&title, "progress (laps)", "steering change", &progress[1..], &dsteer),
            &mut files,
        )?;
        write(
            name("spectrum.svg"),
            &line_svg(
                &title,
                "frequency (Hz)",
                "amplitude",
                &spectrum.frequencies,
                &spectrum.amplitudes,
            ),
            &mut files,
        )?;
    }
    let warning = (episodes == 0).then(|| "no completed episodes to export".to_string());
    Ok(FigureExport {
        episodes,
        series: 3 * episodes,
        files,
        warning,
    })
}
