use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use super::FacetSensitivityRow;
use crate::bounds::BoundReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Csv,
    Json,
    SvgScatter,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "svg" | "svg_scatter" | "svg-scatter" => Ok(Self::SvgScatter),
            other => Err(Error::InvalidConfig(format!("unknown export format {other:?}"))),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn bit(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

const REPORT_COLUMNS: [&str; 15] = [
    "region_true",
    "region_quant",
    "delta",
    "first_term",
    "second_apriori",
    "second_aposteriori",
    "bound_apriori",
    "bound_aposteriori",
    "actual_error",
    "same_region",
    "jump",
    "projection_in_facet",
    "no_region",
    "corner_jump",
    "certificate",
];

/// One header line plus one row per report. Missing values are empty
/// fields, flags are `0`/`1`, floats use the shortest round-trip form.
pub fn write_reports_csv<W: Write>(reports: &[BoundReport], n: usize, mut w: W) -> Result<()> {
    let mut header: Vec<String> = (0..n).map(|c| format!("x{c}")).collect();
    header.extend(REPORT_COLUMNS.iter().map(|s| s.to_string()));
    writeln!(w, "{}", header.join(","))?;
    for r in reports {
        let mut fields: Vec<String> = r.x.iter().map(f64::to_string).collect();
        let f = &r.flags;
        fields.extend([
            r.region_true.to_string(),
            r.region_quant.map(|q| q.to_string()).unwrap_or_default(),
            opt(r.delta),
            opt(r.first_term),
            opt(r.second_apriori),
            opt(r.second_aposteriori),
            opt(r.bound_apriori),
            opt(r.bound_aposteriori),
            opt(r.actual_error),
        ]);
        fields.extend(
            [f.same_region, f.jump, f.projection_in_facet, f.no_region, f.corner_jump, f.certificate]
                .map(|b| bit(b).to_string()),
        );
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}

pub fn write_facet_csv<W: Write>(rows: &[FacetSensitivityRow], mut w: W) -> Result<()> {
    writeln!(w, "i,j,max_aposteriori,max_actual,samples_used,excluded,jumps,trivial")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.i,
            r.j,
            r.max_aposteriori,
            r.max_actual,
            r.samples_used,
            r.excluded,
            r.jumps,
            bit(r.trivial)
        )?;
    }
    Ok(())
}

const SERIES: [(&str, &str); 3] = [("a priori", "#1f77b4"), ("a posteriori", "#ff7f0e"), ("actual", "#2ca02c")];
const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Scatter of report index against the a priori bound, the a posteriori
/// bound and the actual error, one `<g class="series">` per quantity.
pub fn write_svg_scatter<W: Write>(reports: &[BoundReport], mut w: W) -> Result<()> {
    if reports.is_empty() {
        return Err(Error::InvalidConfig("cannot plot an empty sweep".into()));
    }
    let values = |r: &BoundReport| [r.bound_apriori, r.bound_aposteriori, r.actual_error];
    let y_max = reports
        .iter()
        .flat_map(|r| values(r).into_iter().flatten())
        .fold(0.0, f64::max);
    let y_max = if y_max > 0.0 { y_max } else { 1.0 };
    let x_span = (reports.len().max(2) - 1) as f64;
    let px = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / x_span;
    let py = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * v / y_max;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (x0, x1, y0, y1) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        r#"<path d="M{x0} {y1} L{x0} {y0} L{x1} {y0}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">state index (sorted by a priori bound)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12">{y_max:.3e}</text>"#, 4.0, y1 + 4.0);
    let _ = writeln!(s, r#"<text x="{}" y="{}" font-size="12">0</text>"#, 4.0, y0 + 4.0);
    for (k, (label, color)) in SERIES.iter().enumerate() {
        let _ = writeln!(s, r#"<g class="series" data-label="{label}" fill="{color}">"#);
        for (i, r) in reports.iter().enumerate() {
            if let Some(v) = values(r)[k] {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="1.5"/>"#, px(i), py(v));
            }
        }
        let ly = MARGIN + 16.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{ly}" font-size="12">{label}</text>"#,
            WIDTH - MARGIN - 90.0
        );
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, "</svg>");
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Writes reports in the requested format.
pub fn write_reports<W: Write>(reports: &[BoundReport], n: usize, format: ExportFormat, mut w: W) -> Result<()> {
    match format {
        ExportFormat::Csv => write_reports_csv(reports, n, w),
        ExportFormat::Json => {
            serde_json::to_writer_pretty(&mut w, reports)?;
            writeln!(w)?;
            Ok(())
        }
        ExportFormat::SvgScatter => write_svg_scatter(reports, w),
    }
}

pub fn export_sweep(reports: &[BoundReport], n: usize, destination: &Path, format: ExportFormat) -> Result<()> {
    let file = std::fs::File::create(destination)?;
    let mut w = std::io::BufWriter::new(file);
    write_reports(reports, n, format, &mut w)?;
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::control_error_report;
    use crate::fixtures;
    use crate::quantize::{quantize_partition, FixedPointFormat, Formats};
    use nalgebra::DVector;

    fn reports() -> Vec<BoundReport> {
        let p = fixtures::sat1d();
        let qp = quantize_partition(&p, Formats::uniform(FixedPointFormat::new(12, 5).unwrap())).unwrap();
        [0.3, 0.999, 1.01]
            .iter()
            .map(|x| control_error_report(&p, &qp, &DVector::from_vec(vec![*x])).unwrap())
            .collect()
    }

    #[test]
    fn csv_rows() {
        let mut out = Vec::new();
        write_reports_csv(&reports(), 1, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("x0,region_true,region_quant,delta,first_term,"));
        assert_eq!(lines[1].split(',').count(), 16);
        assert!(lines[1].starts_with("0.3,1,1,,0,"));
    }

    #[test]
    fn json_round_trip() {
        let r = reports();
        let mut out = Vec::new();
        write_reports(&r, 1, ExportFormat::Json, &mut out).unwrap();
        let back: Vec<BoundReport> = serde_json::from_slice(&out).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn svg_has_three_series() {
        let mut out = Vec::new();
        write_svg_scatter(&reports(), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.matches(r#"<g class="series""#).count(), 3);
        for label in ["a priori", "a posteriori", "actual"] {
            assert!(text.contains(&format!(r#"data-label="{label}""#)));
        }
        assert!(write_svg_scatter(&[], Vec::new()).is_err());
    }

    #[test]
    fn export_to_unwritable_destination_fails() {
        let dir = tempfile::tempdir().unwrap();
        let bad = dir.path().join("missing").join("r.csv");
        assert!(matches!(export_sweep(&reports(), 1, &bad, ExportFormat::Csv), Err(Error::Io(_))));
        let good = dir.path().join("r.csv");
        export_sweep(&reports(), 1, &good, ExportFormat::Csv).unwrap();
        assert_eq!(std::fs::read_to_string(good).unwrap().lines().count(), 4);
    }

    #[test]
    fn format_names() {
        assert_eq!("csv".parse::<ExportFormat>().unwrap(), ExportFormat::Csv);
        assert_eq!("svg".parse::<ExportFormat>().unwrap(), ExportFormat::SvgScatter);
        assert!("xml".parse::<ExportFormat>().is_err());
    }
}
