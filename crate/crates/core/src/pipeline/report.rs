//! Report emission: machine-readable JSON, aligned text tables, and one
//! rate-quality CSV per measured curve. Output is a pure function of the
//! report contents, so rerunning an identical experiment rewrites identical
//! bytes.

use std::fs;
use std::path::{Path, PathBuf};

use super::{Comparison, ExperimentReport, PipelineError};
use crate::metrics::write_rd_csv;

/// Zoom factor rendered the way table headers and file names want it:
/// integral values lose the trailing `.0`.
pub fn sf_label(sf: f64) -> String {
    if sf.fract() == 0.0 && sf.abs() < 1e15 {
        format!("{}", sf as i64)
    } else {
        format!("{sf}")
    }
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Writes report.json, report.txt and the per-curve CSVs into `dir`,
/// returning the created paths.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    fs::create_dir_all(dir).map_err(|e| PipelineError::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut written = Vec::new();

    let json_path = dir.join("report.json");
    let mut json = serde_json::to_string_pretty(report).expect("report serialization cannot fail");
    json.push('\n');
    fs::write(&json_path, json).map_err(|e| PipelineError::Io {
        path: json_path.clone(),
        source: e,
    })?;
    written.push(json_path);

    let txt_path = dir.join("report.txt");
    fs::write(&txt_path, render_tables(report)).map_err(|e| PipelineError::Io {
        path: txt_path.clone(),
        source: e,
    })?;
    written.push(txt_path);

    for curve in &report.curves {
        let name = format!(
            "{}_{}_DCOR{}.csv",
            curve.chain.name(),
            sanitize(&curve.mode),
            sf_label(curve.sf)
        );
        let path = dir.join(name);
        let sweep: Vec<_> = curve.points.iter().map(|p| p.sweep_point()).collect();
        write_rd_csv(&path, &sweep)?;
        written.push(path);
    }
    Ok(written)
}

fn cell(value: Option<f64>, width: usize) -> String {
    match value {
        Some(v) => format!("{:>width$}", format!("{v:+.4}")),
        None => format!("{:>width$}", "n/a"),
    }
}

/// The human-readable side of the report: three delta tables in the layout
/// rows = mode, columns = zoom factor, then provenance and any gaps.
pub fn render_tables(report: &ExperimentReport) -> String {
    let sfs = &report.provenance.zoom_factors;
    let mut modes: Vec<&str> = Vec::new();
    for c in &report.comparisons {
        if !modes.contains(&c.mode.as_str()) {
            modes.push(&c.mode);
        }
    }

    let mode_w = modes
        .iter()
        .map(|m| m.len())
        .chain(["mode".len()])
        .max()
        .unwrap_or(4)
        + 2;
    let val_w = 12usize;

    let find = |sf: f64, mode: &str| -> Option<&Comparison> {
        report
            .comparisons
            .iter()
            .find(|c| c.sf == sf && c.mode == mode)
    };

    let mut out = String::new();
    out.push_str("preDCOR vs postDCOR comparison\n");
    out.push_str("==============================\n");

    type Pick = fn(&Comparison) -> Option<f64>;
    let tables: [(&str, Pick); 3] = [
        ("BD-PSNR [dB] (positive favors preDCOR)", |c| c.bd_psnr_db),
        ("BD-rate [%] (negative favors preDCOR)", |c| {
            c.bd_rate_percent
        }),
        ("delta-SSIM x100 (positive favors preDCOR)", |c| {
            c.delta_ssim_x100
        }),
    ];

    for (title, pick) in tables {
        out.push('\n');
        out.push_str(title);
        out.push('\n');
        out.push_str(&format!("{:<mode_w$}", "mode"));
        for &sf in sfs {
            out.push_str(&format!("{:>val_w$}", format!("DCOR{}", sf_label(sf))));
        }
        out.push('\n');
        for mode in &modes {
            out.push_str(&format!("{mode:<mode_w$}"));
            for &sf in sfs {
                out.push_str(&cell(find(sf, mode).and_then(pick), val_w));
            }
            out.push('\n');
        }
    }

    out.push_str("\nProvenance\n----------\n");
    let p = &report.provenance;
    let rows = [
        ("tool", format!("{} {}", p.tool, p.version)),
        ("input", p.input.clone()),
        ("camera", p.camera.clone()),
        ("rectified geometry", p.rectified_geometry.clone()),
        (
            "zoom factors",
            p.zoom_factors
                .iter()
                .map(|&s| sf_label(s))
                .collect::<Vec<_>>()
                .join(", "),
        ),
        ("zoom semantics", p.zoom_semantics.clone()),
        (
            "qps",
            p.qps
                .iter()
                .map(|q| q.to_string())
                .collect::<Vec<_>>()
                .join(", "),
        ),
        ("codec", p.codec.clone()),
        ("interpolation", p.interpolation.clone()),
        ("psnr convention", p.psnr_convention.clone()),
        ("bd convention", p.bd_convention.clone()),
        ("sign convention", p.sign_convention.clone()),
    ];
    for (key, value) in rows {
        out.push_str(&format!("{:<21}{}\n", format!("{key}:"), value));
    }

    out.push_str("\nIncomplete cells\n----------------\n");
    if report.incomplete.is_empty() {
        out.push_str("none\n");
    } else {
        for c in &report.incomplete {
            out.push_str(&format!(
                "{} {} DCOR{} qp {}: {}\n",
                c.chain.label(),
                c.mode,
                sf_label(c.sf),
                c.qp,
                c.error
            ));
        }
    }

    let noted: Vec<&Comparison> = report
        .comparisons
        .iter()
        .filter(|c| c.note.is_some())
        .collect();
    if !noted.is_empty() {
        out.push_str("\nNotes\n-----\n");
        for c in noted {
            out.push_str(&format!(
                "DCOR{} {}: {}\n",
                sf_label(c.sf),
                c.mode,
                c.note.as_deref().unwrap_or_default()
            ));
        }
    }
    out
}
