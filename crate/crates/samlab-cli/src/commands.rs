//! The three subcommands. Each follows the same two-stage discipline:
//! everything that depends only on the configuration (parsing, validation,
//! parameter construction) fails with the configuration exit code and writes
//! nothing; once execution begins, failures carry the runtime exit code and
//! still leave a manifest describing the attempt.

use std::fs;
use std::path::Path;

use serde::Serialize;

use samlab::harness::{self, ExperimentConfig, Scenario};
use samlab::optimizer::OptimConfig;
use samlab::theory::{
    check_condition_kernel, check_condition_linear, epsilon_for_window, iteration_bound_linear,
    iteration_window_kernel, kernel_error_curve, relu_error_curve, ErrorCurve, IterationBound,
    IterationWindow, Spectrum,
};

use crate::config::{build_spectrum, default_model, CheckConfig, CurveModel, PredictConfig};
use crate::output::{self, RunManifest};
use crate::{config_error, effective_workers, runtime_error, CliError, CommonArgs};

/// Parse a JSON config file into `T`, also returning the raw document for
/// the manifest echo. Errors carry serde's line/column diagnostics.
fn read_config<T: serde::de::DeserializeOwned>(
    path: &Path,
) -> Result<(T, serde_json::Value), CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
    let parsed: T = serde_json::from_str(&text)
        .map_err(|e| config_error(format!("config {}: {e}", path.display())))?;
    let echo: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| config_error(format!("config {}: {e}", path.display())))?;
    Ok((parsed, echo))
}

fn require_out<'a>(args: &'a CommonArgs, cmd: &str) -> Result<&'a Path, CliError> {
    args.out
        .as_deref()
        .ok_or_else(|| config_error(format!("{cmd} requires --out <dir>")))
}

fn require_sigma(sigma: f64) -> Result<(), CliError> {
    if sigma.is_finite() && sigma >= 0.0 {
        Ok(())
    } else {
        Err(config_error(format!(
            "sigma must be finite and nonnegative, got {sigma}"
        )))
    }
}

/// Finish a file-writing command: record a failure in the manifest (best
/// effort) or write the final manifest, then report to standard output.
fn finish_run(
    args: &CommonArgs,
    out_dir: &Path,
    mut manifest: RunManifest,
    run_result: Result<(), CliError>,
) -> Result<(), CliError> {
    if let Err(e) = run_result {
        manifest.error = Some(e.message.clone());
        let _ = output::write_manifest(out_dir, &manifest);
        return Err(e);
    }
    output::write_manifest(out_dir, &manifest)
        .map_err(|e| runtime_error(format!("writing manifest: {e}")))?;
    if args.json {
        let summary = serde_json::json!({
            "out_dir": out_dir.display().to_string(),
            "outputs": manifest.outputs,
            "warnings": manifest.warnings,
        });
        println!("{summary}");
    } else {
        for f in &manifest.outputs {
            println!("wrote {}", out_dir.join(f).display());
        }
        println!("wrote {}", out_dir.join("manifest.json").display());
        for w in &manifest.warnings {
            println!("warning: {w}");
        }
    }
    Ok(())
}

fn write_output(
    out_dir: &Path,
    name: &str,
    content: &str,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    fs::write(out_dir.join(name), content)
        .map_err(|e| runtime_error(format!("writing {name}: {e}")))?;
    manifest.outputs.push(name.to_string());
    Ok(())
}

/// Tabulate both closed-form curves for an explicit spectrum.
fn predict_curves(
    cfg: &PredictConfig,
    model: CurveModel,
    spectrum: &Spectrum,
) -> Result<(ErrorCurve, ErrorCurve), CliError> {
    let gd_cfg = OptimConfig::new(cfg.eta, 0.0, cfg.k_max.max(1))
        .map_err(|e| config_error(e.to_string()))?;
    let sam_cfg = OptimConfig::new(cfg.eta, cfg.rho, cfg.k_max.max(1))
        .map_err(|e| config_error(e.to_string()))?;
    let curve = |ocfg: &OptimConfig| match model {
        CurveModel::Relu => relu_error_curve(spectrum, ocfg, cfg.sigma, cfg.k_max),
        CurveModel::Kernel => kernel_error_curve(spectrum, ocfg, cfg.sigma, cfg.k_max),
    };
    let gd = curve(&gd_cfg).map_err(|e| runtime_error(e.to_string()))?;
    let sam = curve(&sam_cfg).map_err(|e| runtime_error(e.to_string()))?;
    Ok((gd, sam))
}

fn range_warnings(gd: &ErrorCurve, sam: &ErrorCurve, warnings: &mut Vec<String>) {
    for (name, curve) in [("gd", gd), ("sam", sam)] {
        if curve.range_warning {
            warnings.push(format!(
                "{name} curve: a contraction factor left (0, 1); values extrapolate \
                 the closed form outside its proved regime"
            ));
        }
    }
}

/// `predict`: closed-form bias/variance/error curves for an explicit
/// spectrum, written as CSV (optionally with an SVG plot).
pub fn cmd_predict(args: &CommonArgs) -> Result<(), CliError> {
    let (cfg, echo): (PredictConfig, _) = read_config(&args.config)?;
    let out_dir = require_out(args, "predict")?;
    require_sigma(cfg.sigma)?;
    let model = cfg.model.unwrap_or_else(|| default_model(&cfg.d));
    let spectrum = build_spectrum(&cfg.d, &cfg.u, cfg.n, model)
        .map_err(|e| config_error(format!("config {}: {e}", args.config.display())))?;
    if model == CurveModel::Kernel && spectrum.d.iter().any(|&x| x == 0.0) {
        return Err(config_error("kernel model requires nonzero eigenvalues"));
    }
    // Curve construction is cheap and pure; run it before touching the
    // filesystem so parameter problems still count as configuration errors.
    let (gd, sam) = predict_curves(&cfg, model, &spectrum)?;

    fs::create_dir_all(out_dir)
        .map_err(|e| runtime_error(format!("creating {}: {e}", out_dir.display())))?;
    let mut manifest = RunManifest::new(echo, None);
    range_warnings(&gd, &sam, &mut manifest.warnings);
    let run = (|| -> Result<(), CliError> {
        write_output(out_dir, "curves.csv", &output::curves_csv(&gd, &sam), &mut manifest)?;
        if cfg.svg {
            write_output(out_dir, "curves.svg", &output::curves_svg(&gd, &sam), &mut manifest)?;
        }
        Ok(())
    })();
    finish_run(args, out_dir, manifest, run)
}

/// `simulate`: dispatch an experiment configuration to the matching harness
/// scenario and write its outputs.
pub fn cmd_simulate(args: &CommonArgs) -> Result<(), CliError> {
    let (mut cfg, echo): (ExperimentConfig, _) = read_config(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.base_seed = seed;
    }
    cfg.validate().map_err(|e| config_error(e.to_string()))?;
    let workers = effective_workers(args)?;
    let out_dir = require_out(args, "simulate")?;

    fs::create_dir_all(out_dir)
        .map_err(|e| runtime_error(format!("creating {}: {e}", out_dir.display())))?;
    let mut manifest = RunManifest::new(echo, Some(cfg.base_seed));
    let run = simulate_outputs(&cfg, workers, out_dir, &mut manifest);
    finish_run(args, out_dir, manifest, run)
}

fn simulate_outputs(
    cfg: &ExperimentConfig,
    workers: usize,
    out_dir: &Path,
    manifest: &mut RunManifest,
) -> Result<(), CliError> {
    match cfg.scenario {
        Scenario::ToyNoiseless | Scenario::ToyNoisy => {
            let (gd, sam) = harness::run_toy(cfg).map_err(|e| runtime_error(e.to_string()))?;
            range_warnings(&gd, &sam, &mut manifest.warnings);
            write_output(out_dir, "curves.csv", &output::curves_csv(&gd, &sam), manifest)
        }
        Scenario::RegionSweep => {
            let cells =
                harness::run_region_sweep(cfg).map_err(|e| runtime_error(e.to_string()))?;
            write_output(out_dir, "sweep.csv", &output::sweep_csv(&cells), manifest)
        }
        Scenario::LinearFullbatch | Scenario::LinearStochastic | Scenario::KernelIndefinite => {
            let agg = match cfg.scenario {
                Scenario::LinearFullbatch => harness::run_linear_fullbatch(cfg, workers),
                Scenario::LinearStochastic => harness::run_linear_stochastic(cfg, workers),
                _ => harness::run_kernel_indefinite(cfg, workers),
            }
            .map_err(|e| runtime_error(e.to_string()))?;
            manifest.warnings.extend(agg.warnings.iter().cloned());
            for s in &agg.per_sigma {
                for (name, count) in [("gd", s.gd_divergence_count), ("sam", s.sam_divergence_count)]
                {
                    if count > 0 {
                        manifest.warnings.push(format!(
                            "sigma {}: {name} hit the divergence guard in {count}/{} trials",
                            s.sigma, cfg.repetitions
                        ));
                    }
                }
            }
            write_output(out_dir, "aggregate.csv", &output::aggregate_csv(&agg), manifest)?;
            write_output(
                out_dir,
                "trajectories.csv",
                &output::trajectories_csv(&agg),
                manifest,
            )
        }
    }
}

/// Which iteration guarantee accompanies a feasible condition.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundReport {
    /// No noise: no iteration limit applies.
    Noiseless,
    /// Preconditions of the bound fail; nothing is asserted.
    NotAsserted,
    /// Dominance asserted for every iteration up to this value.
    UpTo { k_upper: f64 },
    /// Dominance asserted inside the window.
    Window {
        k_lower: f64,
        k_upper: f64,
        nonempty: bool,
    },
}

/// Machine-readable `check` report (the `--json` output).
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    /// Which theory branch evaluated the spectrum.
    pub model: CurveModel,
    pub eta: f64,
    pub rho: f64,
    pub sigma: f64,
    pub feasible: bool,
    /// Admissible comparison-constant interval when feasible.
    pub c0_interval: Option<(f64, f64)>,
    /// Kernel branch only: the epsilon in the window's lower endpoint.
    pub epsilon: Option<f64>,
    /// Kernel branch only: whether every negative eigenvalue satisfies the
    /// epsilon margin.
    pub epsilon_ok: Option<bool>,
    /// Signal-to-noise ratio; absent when `sigma = 0`.
    pub snr: Option<f64>,
    pub bound: BoundReport,
    /// Headline conclusion in words.
    pub message: String,
}

/// Evaluate a check configuration into a report. Used by `cmd_check` and by
/// integration tests.
pub fn evaluate_check(cfg: &CheckConfig) -> Result<CheckReport, CliError> {
    require_sigma(cfg.sigma)?;
    let model = default_model(&cfg.d);
    let spectrum = build_spectrum(&cfg.d, &cfg.u, cfg.n, model)
        .map_err(|e| config_error(e.to_string()))?;
    let ocfg =
        OptimConfig::new(cfg.eta, cfg.rho, 1).map_err(|e| config_error(e.to_string()))?;
    let signal = spectrum.signal_norm_sq();
    let r = spectrum.r();

    let (report, epsilon, bound) = match model {
        CurveModel::Relu => {
            let rep = check_condition_linear(&spectrum, &ocfg)
                .map_err(|e| config_error(e.to_string()))?;
            let b = iteration_bound_linear(&spectrum, &ocfg, cfg.sigma, signal)
                .map_err(|e| config_error(e.to_string()))?;
            let bound = match b {
                IterationBound::Noiseless => BoundReport::Noiseless,
                IterationBound::NotAsserted => BoundReport::NotAsserted,
                IterationBound::UpTo(k) => BoundReport::UpTo { k_upper: k },
            };
            (rep, None, bound)
        }
        CurveModel::Kernel => {
            let eps = epsilon_for_window(20.0);
            let rep = check_condition_kernel(&spectrum, &ocfg, eps)
                .map_err(|e| config_error(e.to_string()))?;
            let w = iteration_window_kernel(&spectrum, &ocfg, cfg.sigma, eps, signal)
                .map_err(|e| config_error(e.to_string()))?;
            let bound = match w {
                IterationWindow::Noiseless => BoundReport::Noiseless,
                IterationWindow::NotAsserted => BoundReport::NotAsserted,
                IterationWindow::Window {
                    k_lower,
                    k_upper,
                    nonempty,
                } => BoundReport::Window {
                    k_lower,
                    k_upper,
                    nonempty,
                },
            };
            (rep, Some(eps), bound)
        }
    };
    let snr = if cfg.sigma > 0.0 && r > 0 {
        Some(signal / (r as f64 * cfg.sigma * cfg.sigma))
    } else {
        None
    };
    let message = if !report.feasible {
        "condition infeasible: no dominance asserted".to_string()
    } else if cfg.sigma == 0.0 {
        "noiseless: SAM dominates for all k".to_string()
    } else {
        match bound {
            BoundReport::Noiseless => "noiseless: SAM dominates for all k".to_string(),
            BoundReport::NotAsserted => "bound not asserted".to_string(),
            BoundReport::UpTo { k_upper } => {
                format!("dominance asserted for all k <= {k_upper}")
            }
            BoundReport::Window {
                k_lower,
                k_upper,
                nonempty,
            } => {
                if nonempty {
                    format!("dominance asserted for {k_lower} <= k <= {k_upper}")
                } else {
                    format!(
                        "bound not asserted: the window {k_lower} <= k <= {k_upper} is empty"
                    )
                }
            }
        }
    };
    Ok(CheckReport {
        model,
        eta: cfg.eta,
        rho: cfg.rho,
        sigma: cfg.sigma,
        feasible: report.feasible,
        c0_interval: report.c0_interval,
        epsilon,
        epsilon_ok: report.epsilon_ok,
        snr,
        bound,
        message,
    })
}

/// `check`: evaluate the dominance condition for an explicit spectrum and
/// print the report (human-readable, or JSON with `--json`).
pub fn cmd_check(args: &CommonArgs) -> Result<(), CliError> {
    let (cfg, _echo): (CheckConfig, _) = read_config(&args.config)?;
    let report = evaluate_check(&cfg)?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string_pretty(&report)
                .map_err(|e| runtime_error(format!("report serialization: {e}")))?
        );
        return Ok(());
    }
    let branch = match report.model {
        CurveModel::Relu => "positive-definite (network/linear) theory",
        CurveModel::Kernel => "indefinite-kernel theory",
    };
    println!("branch: {branch}");
    println!("eta = {}, rho = {}, sigma = {}", report.eta, report.rho, report.sigma);
    println!("feasible: {}", if report.feasible { "yes" } else { "no" });
    match report.c0_interval {
        Some((lo, hi)) => println!("c0 interval: ({lo}, {hi})"),
        None => println!("c0 interval: none"),
    }
    if let (Some(eps), Some(ok)) = (report.epsilon, report.epsilon_ok) {
        println!(
            "epsilon = {eps}: {}",
            if ok { "margin satisfied" } else { "margin violated" }
        );
    }
    match report.snr {
        Some(snr) => println!("snr: {snr}"),
        None => println!("snr: not applicable (sigma = 0)"),
    }
    println!("{}", report.message);
    Ok(())
}
