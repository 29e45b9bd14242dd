//! File emission: CSV tables, the run manifest, and the optional SVG plot.
//!
//! All CSVs use a mandatory header row, `.` as the decimal separator, LF
//! line endings, and floats printed with 17 significant digits (`{:.16e}`)
//! so a re-parse reproduces the exact f64 values. Undefined cells (NaN) are
//! left empty.

use std::fs;
use std::io;
use std::path::Path;

use samlab::harness::{AggregateResult, SweepCell};
use samlab::theory::ErrorCurve;
use serde::Serialize;

/// One float as a CSV cell: 17 significant digits, empty when undefined.
pub fn float_cell(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        format!("{x:.16e}")
    }
}

/// Optional float as a CSV cell: empty when absent or undefined.
pub fn opt_cell(x: Option<f64>) -> String {
    x.map_or_else(String::new, float_cell)
}

/// The two closed-form curves, GD rows first:
/// `optimizer,k,bias_sq,var_plus,var_minus,error`.
pub fn curves_csv(gd: &ErrorCurve, sam: &ErrorCurve) -> String {
    let mut out = String::from("optimizer,k,bias_sq,var_plus,var_minus,error\n");
    for (name, curve) in [("gd", gd), ("sam", sam)] {
        for k in 0..curve.len() {
            out.push_str(&format!(
                "{name},{k},{},{},{},{}\n",
                float_cell(curve.bias_sq[k]),
                float_cell(curve.var_plus[k]),
                float_cell(curve.var_minus[k]),
                float_cell(curve.error(k)),
            ));
        }
    }
    out
}

/// Per-sigma summary:
/// `sigma,mean_ratio,std_ratio,mean_iter_gap,std_iter_gap,mean_best_sam,std_best_sam`.
pub fn aggregate_csv(agg: &AggregateResult) -> String {
    let mut out = String::from(
        "sigma,mean_ratio,std_ratio,mean_iter_gap,std_iter_gap,mean_best_sam,std_best_sam\n",
    );
    for s in &agg.per_sigma {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            float_cell(s.sigma),
            float_cell(s.mean_ratio),
            float_cell(s.std_ratio),
            float_cell(s.mean_iter_gap),
            float_cell(s.std_iter_gap),
            float_cell(s.mean_best_sam),
            float_cell(s.std_best_sam),
        ));
    }
    out
}

/// Per-iteration trajectory means across trials:
/// `sigma,k,gd_mean,gd_std,sam_mean,sam_std` (cells empty where no trial is
/// still finite).
pub fn trajectories_csv(agg: &AggregateResult) -> String {
    let mut out = String::from("sigma,k,gd_mean,gd_std,sam_mean,sam_std\n");
    for s in &agg.per_sigma {
        let k_len = s.gd_mean.len().max(s.sam_mean.len());
        for k in 0..k_len {
            let cell = |v: &Vec<f64>| v.get(k).copied().map_or_else(String::new, float_cell);
            out.push_str(&format!(
                "{},{k},{},{},{},{}\n",
                float_cell(s.sigma),
                cell(&s.gd_mean),
                cell(&s.gd_std),
                cell(&s.sam_mean),
                cell(&s.sam_std),
            ));
        }
    }
    out
}

/// Feasibility grid: `eta,rho,feasible,c0_lo,c0_hi`.
pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("eta,rho,feasible,c0_lo,c0_hi\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            float_cell(c.eta),
            float_cell(c.rho),
            c.feasible,
            opt_cell(c.c0_lo),
            opt_cell(c.c0_hi),
        ));
    }
    out
}

/// Minimal SVG line chart of the two error curves (k on the horizontal axis,
/// error on the vertical, linear scales clipped to the finite range).
pub fn curves_svg(gd: &ErrorCurve, sam: &ErrorCurve) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const ML: f64 = 50.0; // left margin
    const MB: f64 = 40.0; // bottom margin
    const MT: f64 = 20.0;
    const MR: f64 = 20.0;

    let k_max = gd.len().max(sam.len()).saturating_sub(1).max(1);
    let mut y_max = 0.0f64;
    for curve in [gd, sam] {
        for k in 0..curve.len() {
            let e = curve.error(k);
            if e.is_finite() {
                y_max = y_max.max(e);
            }
        }
    }
    if y_max <= 0.0 {
        y_max = 1.0;
    }

    let x = |k: usize| ML + (W - ML - MR) * k as f64 / k_max as f64;
    let y = |e: f64| H - MB - (H - MB - MT) * (e / y_max).clamp(0.0, 1.0);
    let polyline = |curve: &ErrorCurve, color: &str| {
        let pts: Vec<String> = (0..curve.len())
            .filter(|&k| curve.error(k).is_finite())
            .map(|k| format!("{:.2},{:.2}", x(k), y(curve.error(k))))
            .collect();
        format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
            pts.join(" ")
        )
    };

    format!(
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<line x1=\"{ml}\" y1=\"{yb}\" x2=\"{xr}\" y2=\"{yb}\" stroke=\"black\"/>\n",
            "<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{yb}\" stroke=\"black\"/>\n",
            "<text x=\"{xl}\" y=\"{ylab}\" font-size=\"12\">k</text>\n",
            "<text x=\"8\" y=\"{mt2}\" font-size=\"12\">error</text>\n",
            "<text x=\"{ml2}\" y=\"{mt2}\" font-size=\"12\" fill=\"#1f77b4\">gd</text>\n",
            "<text x=\"{ml3}\" y=\"{mt2}\" font-size=\"12\" fill=\"#d62728\">sam</text>\n",
            "<text x=\"{ml}\" y=\"{yt}\" font-size=\"10\" text-anchor=\"start\">{ymax:.3e}</text>\n",
            "{gd}\n{sam}\n</svg>\n"
        ),
        w = W,
        h = H,
        ml = ML,
        mt = MT,
        yb = H - MB,
        xr = W - MR,
        xl = (W - MR + 8.0).min(W - 12.0),
        ylab = H - MB + 14.0,
        mt2 = MT + 12.0,
        ml2 = ML + 10.0,
        ml3 = ML + 40.0,
        yt = MT - 6.0,
        ymax = y_max,
        gd = polyline(gd, "#1f77b4"),
        sam = polyline(sam, "#d62728"),
    )
}

/// Record of one `predict`/`simulate` invocation, written last so its
/// presence certifies a complete (or completely-described failed) run.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    /// Version of this tool.
    pub tool_version: String,
    /// Wall-clock time of the write, integer seconds since the Unix epoch.
    pub timestamp_epoch_seconds: u64,
    /// Effective base seed (command-line override already applied); absent
    /// for closed-form runs that draw nothing.
    pub base_seed: Option<u64>,
    /// The parsed configuration, echoed back.
    pub config: serde_json::Value,
    /// Every data file this run wrote, in write order.
    pub outputs: Vec<String>,
    /// Anything unusual: curve-range warnings, divergence counts, singular
    /// Gram matrices.
    pub warnings: Vec<String>,
    /// Set when the run failed after reaching the execution stage.
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(config: serde_json::Value, base_seed: Option<u64>) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp_epoch_seconds: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            base_seed,
            config,
            outputs: Vec::new(),
            warnings: Vec::new(),
            error: None,
        }
    }
}

/// Write `manifest.json` atomically: serialize to a temporary file in the
/// same directory, then rename over the final name.
pub fn write_manifest(dir: &Path, manifest: &RunManifest) -> io::Result<()> {
    let body = serde_json::to_string_pretty(manifest)
        .map_err(|e| io::Error::other(format!("manifest serialization: {e}")))?;
    let tmp = dir.join(".manifest.json.tmp");
    fs::write(&tmp, body + "\n")?;
    fs::rename(&tmp, dir.join("manifest.json"))
}
