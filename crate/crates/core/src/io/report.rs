//! Roundtrip reports as JSON lines and as plain-text tables.

use std::fmt::Write as _;
use std::io::Write;

use crate::error::Result;
use crate::eval::RoundtripReport;
use crate::grid::DFKind;

/// One JSON object per line, in input order.
pub fn write_jsonl(reports: &[RoundtripReport], mut out: impl Write) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut out, r).map_err(std::io::Error::from)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn cell(cd: f64) -> String {
    if cd.is_finite() {
        format!("{:.2}", cd * 100.0)
    } else {
        "-".to_string()
    }
}

fn column_label(r: &RoundtripReport) -> String {
    if r.flipped {
        format!("F-{}", r.kind)
    } else {
        r.kind.to_string()
    }
}

fn render(header: &[String], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].len())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join(" | ").trim_end().to_string()
    };
    let mut s = String::new();
    let _ = writeln!(s, "{}", line(header));
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    let _ = writeln!(s, "{}", rule.join("-+-"));
    for r in rows {
        let _ = writeln!(s, "{}", line(r));
    }
    s
}

/// One row for the dataset, one column per distance function, CD in cm.
/// Followed by a per-report listing with meters, centimeters and timing.
pub fn format_kind_table(dataset: &str, reports: &[RoundtripReport]) -> String {
    let mut header = vec!["Dataset".to_string()];
    let mut row = vec![dataset.to_string()];
    for r in reports {
        header.push(column_label(r));
        row.push(cell(r.cd));
    }
    let mut s = String::from("Chamfer distance (cm), point cloud -> DF -> point cloud\n");
    s.push_str(&render(&header, &[row]));
    s.push('\n');
    s.push_str(&format_details(reports));
    s
}

/// One row per distance function, one column per sigma as a multiple of the
/// voxel size, CD in cm.
pub fn format_sigma_table(dataset: &str, reports: &[RoundtripReport]) -> String {
    let mut kinds: Vec<(DFKind, bool)> = Vec::new();
    let mut ratios: Vec<f64> = Vec::new();
    for r in reports {
        if !kinds.contains(&(r.kind, r.flipped)) {
            kinds.push((r.kind, r.flipped));
        }
        let m = r.sigma / r.voxel_size;
        if !ratios.iter().any(|&x| (x - m).abs() < 1e-9) {
            ratios.push(m);
        }
    }
    let mut header = vec![dataset.to_string()];
    header.extend(ratios.iter().map(|m| format!("{} VS", trim_ratio(*m))));
    let rows: Vec<Vec<String>> = kinds
        .iter()
        .map(|&(kind, flipped)| {
            let mut row = vec![column_label(&RoundtripReport {
                kind,
                flipped,
                sigma: 0.0,
                voxel_size: 0.0,
                cd: 0.0,
                extracted_count: 0,
                occupied_voxels: 0,
                wall_time: 0.0,
            })];
            for &m in &ratios {
                let cd = reports
                    .iter()
                    .find(|r| r.kind == kind && r.flipped == flipped && (r.sigma / r.voxel_size - m).abs() < 1e-9)
                    .map_or(f64::NAN, |r| r.cd);
                row.push(cell(cd));
            }
            row
        })
        .collect();
    let mut s = String::from("Chamfer distance (cm) by sigma\n");
    s.push_str(&render(&header, &rows));
    s.push('\n');
    s.push_str(&format_details(reports));
    s
}

fn trim_ratio(m: f64) -> String {
    let s = format!("{m:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// One line per report with CD in both meters and centimeters.
pub fn format_details(reports: &[RoundtripReport]) -> String {
    let header: Vec<String> = ["kind", "sigma (m)", "CD (m)", "CD (cm)", "points", "voxels", "time (s)"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                column_label(r),
                format!("{:.4}", r.sigma),
                if r.cd.is_finite() {
                    format!("{:.6}", r.cd)
                } else {
                    "inf".to_string()
                },
                cell(r.cd),
                r.extracted_count.to_string(),
                r.occupied_voxels.to_string(),
                format!("{:.3}", r.wall_time),
            ]
        })
        .collect();
    render(&header, &rows)
}
