//! Experiment registry: each experiment builds engine inputs from the
//! configuration, runs, and writes one CSV per run plus a JSON summary.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use ndarray::prelude::*;
use num_complex::Complex64 as C64;
use serde_json::json;

use tempoloop::bath::{CorrelationKernel, SystemModel};
use tempoloop::feedback::{self, FeedbackConfig};
use tempoloop::oracles::{self, OracleReport};
use tempoloop::quasi2d;
use tempoloop::tempo::{self, TempoConfig};
use tempoloop::tensor::TruncationPolicy;
use tempoloop::{SimError, TimeSeries};

use crate::config::{expand_sweeps, InitialState, SimulationConfig};

pub const EXPERIMENTS: &[&str] = &[
    "ibm-benchmark",
    "spin-boson",
    "feedback",
    "feedback-dephasing",
    "lindblad-sweep",
    "quasi2d",
    "convergence-nc",
    "convergence-dcut",
    "convergence-dt",
    "convergence-order",
];

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_ORACLE: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

pub struct RunOutcome {
    pub exit_code: i32,
    pub messages: Vec<String>,
}

fn initial_matrix(cfg: &SimulationConfig) -> Array2<C64> {
    let mut rho = Array2::<C64>::zeros((2, 2));
    match cfg.initial {
        InitialState::Excited => rho[[1, 1]] = C64::new(1.0, 0.0),
        InitialState::Ground => rho[[0, 0]] = C64::new(1.0, 0.0),
        InitialState::MaximallyMixed => {
            rho[[0, 0]] = C64::new(0.5, 0.0);
            rho[[1, 1]] = C64::new(0.5, 0.0);
        }
        InitialState::Coherent { coherence } => {
            rho[[0, 0]] = C64::new(0.5, 0.0);
            rho[[1, 1]] = C64::new(0.5, 0.0);
            rho[[0, 1]] = C64::new(0.0, coherence);
            rho[[1, 0]] = C64::new(0.0, -coherence);
        }
    }
    rho
}

fn kernel(cfg: &SimulationConfig) -> Result<CorrelationKernel> {
    CorrelationKernel::new(
        cfg.bath.temperature,
        cfg.bath.spectral_density(),
        cfg.bath.freq_nodes,
        cfg.bath.cell_nodes,
        cfg.bath.omega_max,
    )
    .map_err(|e| anyhow!("bath kernel: {e}"))
}

fn policy(cfg: &SimulationConfig) -> Result<TruncationPolicy> {
    TruncationPolicy::new(cfg.d_cut, cfg.max_bond).map_err(|e| anyhow!("truncation policy: {e}"))
}

fn tempo_config(cfg: &SimulationConfig) -> Result<TempoConfig> {
    Ok(TempoConfig {
        dt: cfg.dt,
        n_c: cfg.n_c,
        policy: policy(cfg)?,
        total_steps: (cfg.total_time / cfg.dt).round() as usize,
    })
}

fn feedback_config(cfg: &SimulationConfig) -> Result<FeedbackConfig> {
    Ok(FeedbackConfig {
        gamma_rate: cfg.gamma_rate,
        tau: cfg.tau,
        n_d: cfg.n_d,
        phase: cfg.phase,
        dephasing: cfg.dephasing,
        n_ph: cfg.n_ph,
        order: cfg.order,
        policy: policy(cfg)?,
    })
}

fn write_series(dir: &Path, name: &str, series: &TimeSeries) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}.csv"));
    let mut file = fs::File::create(&path).with_context(|| format!("writing {path:?}"))?;
    series.write_csv(&mut file)?;
    Ok(path)
}

fn write_summary(dir: &Path, name: &str, value: serde_json::Value) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("{name}-summary.json"));
    let mut file = fs::File::create(&path)?;
    writeln!(file, "{}", serde_json::to_string_pretty(&value)?)?;
    Ok(path)
}

fn summary_body(series: &TimeSeries, wall: f64) -> serde_json::Value {
    let last = series.rows.last().expect("nonempty series");
    json!({
        "final_time_ps": last.time,
        "final_rho00": last.rho00,
        "final_rho11": last.rho11,
        "final_re_rho01": last.re_rho01,
        "final_im_rho01": last.im_rho01,
        "max_trace_defect": series.max_trace_defect(),
        "peak_link_dim": series.peak_link_dim(),
        "peak_bond": series.peak_bond(),
        "wall_seconds": wall,
    })
}

fn series_deviation(a: &TimeSeries, b: &TimeSeries) -> f64 {
    a.max_population_deviation(b)
}

type Labeled = (String, SimulationConfig);

/// Runs sweep entries, possibly concurrently, preserving input order.
fn run_all(
    entries: Vec<Labeled>,
    jobs: usize,
    runner: impl Fn(&SimulationConfig) -> Result<TimeSeries> + Sync,
) -> Result<Vec<(String, TimeSeries)>> {
    let runner = &runner;
    let results: Vec<(String, Result<TimeSeries>)> = if jobs <= 1 {
        entries
            .iter()
            .map(|(label, c)| (label.clone(), runner(c)))
            .collect()
    } else {
        std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for chunk in entries.chunks(jobs) {
                let mut chunk_handles = Vec::new();
                for (label, c) in chunk {
                    let label = label.clone();
                    chunk_handles.push(scope.spawn(move || (label, runner(c))));
                }
                handles.push(chunk_handles);
            }
            handles
                .into_iter()
                .flatten()
                .map(|h| h.join().expect("runner thread"))
                .collect()
        })
    };
    results
        .into_iter()
        .map(|(label, r)| r.map(|s| (label, s)))
        .collect()
}

fn run_tempo_kind(cfg: &SimulationConfig) -> Result<TimeSeries> {
    let model = SystemModel::two_level(cfg.omega0, cfg.rabi);
    let kernel = kernel(cfg)?;
    let tcfg = tempo_config(cfg)?;
    tempo::run(&model, &kernel, &tcfg, initial_matrix(cfg).view()).map_err(|e| anyhow!("{e}"))
}

fn run_feedback_kind(cfg: &SimulationConfig) -> Result<TimeSeries> {
    let fcfg = feedback_config(cfg)?;
    let steps = (cfg.total_time / fcfg.dt()).round() as usize;
    feedback::run(&fcfg, steps, Some(initial_matrix(cfg).view())).map_err(|e| anyhow!("{e}"))
}

fn run_quasi2d_kind(cfg: &SimulationConfig, budget_override: bool) -> Result<TimeSeries> {
    let model = SystemModel::two_level(cfg.omega0, cfg.rabi);
    let kernel = kernel(cfg)?;
    let tcfg = tempo_config(cfg)?;
    let fcfg = feedback_config(cfg)?;
    quasi2d::run_experiment(
        &model,
        &kernel,
        &fcfg,
        &tcfg,
        initial_matrix(cfg).view(),
        budget_override,
    )
    .map_err(|e| match e {
        SimError::BudgetExceeded { .. } => anyhow!("budget: {e}"),
        other => anyhow!("{other}"),
    })
}

fn is_budget_error(err: &anyhow::Error) -> bool {
    err.to_string().starts_with("budget:")
}

/// Entry point used by main: dispatches on the experiment name.
pub fn run_experiment(
    cfg: &SimulationConfig,
    assert_oracle: bool,
    budget_override: bool,
) -> Result<RunOutcome> {
    let started = Instant::now();
    let entries = expand_sweeps(cfg).map_err(|e| anyhow!(e.join("; ")))?;
    let out_dir = cfg.out_dir.clone();
    let name = cfg.experiment.clone();
    let mut messages = Vec::new();
    let mut exit_code = EXIT_OK;

    let label_of = |label: &str| {
        if label.is_empty() {
            name.clone()
        } else {
            format!("{name}-{label}")
        }
    };

    match name.as_str() {
        "ibm-benchmark" => {
            let series = run_tempo_kind(cfg)?;
            let kern = kernel(cfg)?;
            let rho01_0 = match cfg.initial {
                InitialState::Coherent { coherence } => C64::new(0.0, coherence),
                _ => C64::new(0.0, 0.5),
            };
            let grid: Vec<f64> = series.times();
            let engine: Vec<C64> = series
                .rows
                .iter()
                .map(|r| C64::new(r.re_rho01, r.im_rho01))
                .collect();
            let reference: Vec<C64> = grid
                .iter()
                .map(|&t| oracles::ibm_analytic(&kern, rho01_0, t))
                .collect::<Result<_, _>>()
                .map_err(|e| anyhow!("{e}"))?;
            let report = OracleReport::compare(grid, reference, engine).map_err(|e| anyhow!("{e}"))?;
            let csv = write_series(&out_dir, &label_of(""), &series)?;
            let oracle_path = out_dir.join(format!("{}-oracle.csv", label_of("")));
            let mut f = fs::File::create(&oracle_path)?;
            report.write_csv(&mut f)?;
            let mut summary = summary_body(&series, started.elapsed().as_secs_f64());
            summary["oracle_max_abs_deviation"] = json!(report.max_abs_deviation);
            write_summary(&out_dir, &label_of(""), summary)?;
            messages.push(format!(
                "wrote {} (oracle max deviation {:.3e})",
                csv.display(),
                report.max_abs_deviation
            ));
            if assert_oracle && report.max_abs_deviation > 1e-3 {
                messages.push(format!(
                    "oracle assertion failed: {:.3e} > 1e-3",
                    report.max_abs_deviation
                ));
                exit_code = EXIT_ORACLE;
            }
        }
        "spin-boson" => {
            let series = run_tempo_kind(cfg)?;
            let csv = write_series(&out_dir, &label_of(""), &series)?;
            write_summary(
                &out_dir,
                &label_of(""),
                summary_body(&series, started.elapsed().as_secs_f64()),
            )?;
            messages.push(format!("wrote {}", csv.display()));
        }
        "feedback" | "feedback-dephasing" => {
            let series = run_feedback_kind(cfg)?;
            let csv = write_series(&out_dir, &label_of(""), &series)?;
            let mut summary = summary_body(&series, started.elapsed().as_secs_f64());
            if name == "feedback" && cfg.dephasing == 0.0 {
                // Single-excitation series solution as the reference.
                let omega0 = 2.0 * std::f64::consts::PI * cfg.phase / cfg.tau;
                let grid = series.times();
                let engine: Vec<C64> = series
                    .rows
                    .iter()
                    .map(|r| C64::new(r.rho11, 0.0))
                    .collect();
                let reference: Vec<C64> = grid
                    .iter()
                    .map(|&t| {
                        oracles::feedback_analytic(cfg.gamma_rate, cfg.tau, omega0, t)
                            .map(|a| C64::new(a.norm_sqr(), 0.0))
                    })
                    .collect::<Result<_, _>>()
                    .map_err(|e| anyhow!("{e}"))?;
                let report =
                    OracleReport::compare(grid, reference, engine).map_err(|e| anyhow!("{e}"))?;
                let oracle_path = out_dir.join(format!("{}-oracle.csv", label_of("")));
                let mut f = fs::File::create(&oracle_path)?;
                report.write_csv(&mut f)?;
                summary["oracle_max_abs_deviation"] = json!(report.max_abs_deviation);
                if assert_oracle && report.max_abs_deviation > 1e-2 {
                    messages.push(format!(
                        "oracle assertion failed: {:.3e} > 1e-2",
                        report.max_abs_deviation
                    ));
                    exit_code = EXIT_ORACLE;
                }
            }
            write_summary(&out_dir, &label_of(""), summary)?;
            messages.push(format!("wrote {}", csv.display()));
        }
        "lindblad-sweep" => {
            // Phase/dephasing grid; sweep blocks may refine it.
            let mut grid_entries: Vec<Labeled> = Vec::new();
            if entries.len() > 1 {
                grid_entries = entries;
            } else {
                let gamma = if cfg.dephasing > 0.0 { cfg.dephasing } else { 0.001 };
                for (phase, deph) in [
                    (1.0, 0.0),
                    (1.0, gamma),
                    (1.17, 0.0),
                    (1.17, gamma),
                ] {
                    let mut c = cfg.clone();
                    c.phase = phase;
                    c.dephasing = deph;
                    grid_entries.push((format!("phase-{phase}_gamma-{deph}"), c));
                }
            }
            let results = run_all(grid_entries, cfg.jobs, run_feedback_kind)?;
            let mut runs = serde_json::Map::new();
            for (label, series) in &results {
                let csv = write_series(&out_dir, &label_of(label), series)?;
                runs.insert(
                    label.clone(),
                    summary_body(series, started.elapsed().as_secs_f64()),
                );
                messages.push(format!("wrote {}", csv.display()));
            }
            write_summary(&out_dir, &name, json!({ "runs": runs }))?;
        }
        "quasi2d" => {
            let results = run_all(entries, cfg.jobs, |c| run_quasi2d_kind(c, budget_override));
            let results = match results {
                Ok(r) => r,
                Err(e) if is_budget_error(&e) => {
                    messages.push(e.to_string());
                    return Ok(RunOutcome {
                        exit_code: EXIT_BUDGET,
                        messages,
                    });
                }
                Err(e) => return Err(e),
            };
            let mut runs = serde_json::Map::new();
            for (label, series) in &results {
                let csv = write_series(&out_dir, &label_of(label), series)?;
                runs.insert(
                    label.clone(),
                    summary_body(series, started.elapsed().as_secs_f64()),
                );
                messages.push(format!("wrote {}", csv.display()));
            }
            write_summary(&out_dir, &name, json!({ "runs": runs }))?;
        }
        "convergence-nc" | "convergence-dcut" | "convergence-dt" | "convergence-order" => {
            let sweep_entries: Vec<Labeled> = if entries.len() > 1 {
                entries
            } else {
                let mut list = Vec::new();
                match name.as_str() {
                    "convergence-nc" => {
                        for n_c in [2usize, 3, 4, 5] {
                            let mut c = cfg.clone();
                            c.n_c = n_c;
                            list.push((format!("n_c-{n_c}"), c));
                        }
                    }
                    "convergence-dcut" => {
                        for d_cut in [1e-8f64, 1e-12, 1e-14] {
                            let mut c = cfg.clone();
                            c.d_cut = d_cut;
                            list.push((format!("d_cut-{d_cut:e}"), c));
                        }
                    }
                    "convergence-dt" => {
                        for n_d in [4usize, 5] {
                            let mut c = cfg.clone();
                            c.n_d = n_d;
                            c.dt = c.tau / n_d as f64;
                            list.push((format!("n_d-{n_d}"), c));
                        }
                    }
                    _ => {
                        for order in [8usize, 9, 10] {
                            let mut c = cfg.clone();
                            c.order = order;
                            list.push((format!("order-{order}"), c));
                        }
                    }
                }
                list
            };
            let uses_quasi2d = name != "convergence-order";
            let results = run_all(sweep_entries, cfg.jobs, |c| {
                if uses_quasi2d {
                    run_quasi2d_kind(c, budget_override)
                } else {
                    run_feedback_kind(c)
                }
            });
            let results = match results {
                Ok(r) => r,
                Err(e) if is_budget_error(&e) => {
                    messages.push(e.to_string());
                    return Ok(RunOutcome {
                        exit_code: EXIT_BUDGET,
                        messages,
                    });
                }
                Err(e) => return Err(e),
            };
            let mut runs = serde_json::Map::new();
            for (label, series) in &results {
                let csv = write_series(&out_dir, &label_of(label), series)?;
                runs.insert(
                    label.clone(),
                    summary_body(series, started.elapsed().as_secs_f64()),
                );
                messages.push(format!("wrote {}", csv.display()));
            }
            // Pairwise deviations between consecutive sweep values; for
            // step-size sweeps the traces are compared on the common grid.
            let mut deviations = serde_json::Map::new();
            for pair in results.windows(2) {
                let (la, sa) = &pair[0];
                let (lb, sb) = &pair[1];
                let dev = if name == "convergence-dt" {
                    common_grid_deviation(sa, sb)
                } else {
                    series_deviation(sa, sb)
                };
                deviations.insert(format!("{la} vs {lb}"), json!(dev));
            }
            write_summary(
                &out_dir,
                &name,
                json!({ "runs": runs, "deviation": deviations }),
            )?;
        }
        other => {
            return Ok(RunOutcome {
                exit_code: EXIT_VALIDATION,
                messages: vec![format!(
                    "unknown experiment '{other}'; available: {}",
                    EXPERIMENTS.join(", ")
                )],
            });
        }
    }

    Ok(RunOutcome {
        exit_code,
        messages,
    })
}

/// Largest population deviation restricted to times both series share.
fn common_grid_deviation(a: &TimeSeries, b: &TimeSeries) -> f64 {
    let mut worst = 0.0f64;
    for ra in &a.rows {
        for rb in &b.rows {
            if (ra.time - rb.time).abs() < 1e-9 {
                worst = worst.max((ra.rho11 - rb.rho11).abs());
            }
        }
    }
    worst
}
