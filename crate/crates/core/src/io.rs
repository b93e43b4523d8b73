//! Files: point clouds as CSV, experiment reports as CSV, pictures as SVG.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::counter::PointCloud;
use crate::error::{Error, Result};
use crate::experiments::{CalibrationReport, PowerPoint, ScalingFit};
use crate::scalar::{Point2, Real};
use crate::strip::{ScaleParams, StripId};

/// Writes `bytes` to a temporary sibling of `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(std::io::Error::new(std::io::ErrorKind::InvalidInput, "output path has no file name")))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    Ok(result?)
}

/// CSV with header `x,y`. Coordinates use the shortest decimal form that
/// parses back to the same value.
pub fn points_to_csv<T: Real>(cloud: &PointCloud<T>) -> String {
    let mut out = String::with_capacity(cloud.len() * 40 + 4);
    out.push_str("x,y\n");
    for p in cloud.points() {
        let _ = writeln!(out, "{},{}", p.x, p.y);
    }
    out
}

pub fn parse_points_csv(reader: impl Read) -> Result<PointCloud<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "x" || &headers[1] != "y" {
        return Err(Error::Malformed(format!("expected header `x,y`, found `{}`", headers.iter().collect::<Vec<_>>().join(","))));
    }
    let mut pts = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Error::Malformed(format!("row {}: {e}", i + 1)))?;
        if rec.len() != 2 {
            return Err(Error::Malformed(format!("row {}: expected 2 fields, found {}", i + 1, rec.len())));
        }
        let field = |k: usize| {
            rec[k]
                .parse::<f64>()
                .map_err(|_| Error::Malformed(format!("row {}: `{}` is not a number", i + 1, &rec[k])))
        };
        pts.push(Point2::new(field(0)?, field(1)?));
    }
    PointCloud::new(pts)
}

pub fn read_points_csv(path: &Path) -> Result<PointCloud<f64>> {
    parse_points_csv(fs::File::open(path)?)
}

pub fn write_points_csv<T: Real>(path: &Path, cloud: &PointCloud<T>) -> Result<()> {
    write_atomic(path, points_to_csv(cloud).as_bytes())
}

/// Points as dots, `strips` as outlined parallelograms, and the unit square.
pub fn render_svg<T: Real>(cloud: &PointCloud<T>, p: Option<&ScaleParams<T>>, strips: &[StripId]) -> String {
    const SIZE: f64 = 512.0;
    const PAD: f64 = 16.0;
    let sx = |x: f64| PAD + x * SIZE;
    let sy = |y: f64| PAD + (1.0 - y) * SIZE;
    let full = SIZE + 2.0 * PAD;
    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{PAD}" y="{PAD}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black" stroke-width="1"/>"#
    );
    let _ = writeln!(s, r#"<g fill="black">"#);
    for pt in cloud.points() {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#, sx(pt.x.as_f64()), sy(pt.y.as_f64()));
    }
    let _ = writeln!(s, "</g>");
    if let Some(p) = p {
        let _ = writeln!(s, r#"<g fill="none" stroke="red" stroke-width="1.2">"#);
        for id in strips {
            let pts: Vec<String> = p
                .geometry(id)
                .corners()
                .iter()
                .map(|c| format!("{:.2},{:.2}", sx(c.x.as_f64()), sy(c.y.as_f64())))
                .collect();
            let _ = writeln!(s, r#"<polygon points="{}"/>"#, pts.join(" "));
        }
        let _ = writeln!(s, "</g>");
    }
    s.push_str("</svg>\n");
    s
}

/// One row per histogram bin.
pub fn calibration_csv(r: &CalibrationReport) -> String {
    let mut s = String::from("lmax,frequency\n");
    for (l, c) in &r.histogram {
        let _ = writeln!(s, "{l},{c}");
    }
    s
}

/// One row per curve weight.
pub fn power_csv(points: &[PowerPoint]) -> String {
    let mut s = String::from("n,epsilon,trials,rejections,power\n");
    for p in points {
        let _ = writeln!(s, "{},{},{},{},{}", p.n, p.epsilon, p.trials, p.rejections, p.power);
    }
    s
}

/// One row per sample size, with the fit repeated on every row.
pub fn scaling_csv(fit: &ScalingFit) -> String {
    let mut s = String::from("n,nstar,lstar,eps_half,residual,slope,intercept,r_squared\n");
    for (p, r) in fit.points.iter().zip(&fit.residuals) {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.n, p.nstar, p.lstar, p.eps_half, r, fit.slope, fit.intercept, fit.r_squared
        );
    }
    s
}
