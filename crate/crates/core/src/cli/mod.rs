//! Command-line driver: config loading, subcommand dispatch, artifacts and
//! exit codes.

pub mod config;
mod output;
pub mod svg;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Parser, ValueEnum};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::bounds::{
    anderson_second_moment, beta_star, bound_report, gaussian_coupling, intermittency_check,
    linear_moment_bound_series, m2_truncated, ChaosOptions, ReportRequest,
};
use crate::error::{Error, Result};
use crate::estimate::{compare_bound, lyapunov_estimate, mc_moments};
use crate::green::OperatorKind;
use crate::noise::{
    default_bp, moment_mp, rosenthal_constant, vg_variance_check, CellSampler, LevyMeasure,
};
use crate::rng::{stream, SeedKey};
use crate::simulate::{simulate, Model};
use crate::stats::Running;
use config::ExperimentConfig;
use output::{fmt_num, fmt_p, Out};
use svg::{Chart, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Subcommand {
    NoiseCheck,
    Bounds,
    Simulate,
    Moments,
    AndersonSeries,
    Intermittency,
    Report,
}

impl Subcommand {
    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::NoiseCheck => "noise-check",
            Subcommand::Bounds => "bounds",
            Subcommand::Simulate => "simulate",
            Subcommand::Moments => "moments",
            Subcommand::AndersonSeries => "anderson-series",
            Subcommand::Intermittency => "intermittency",
            Subcommand::Report => "report",
        }
    }
}

/// Moment bounds and simulation of SPDEs driven by Lévy colored noise.
#[derive(Debug, Clone, Parser)]
#[command(name = "levy-spde", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub subcommand: Subcommand,
    /// Experiment config (JSON) or a MANIFEST.json from an earlier run.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Continue when the Dalang condition fails, emitting a divergence diagnostic.
    #[arg(long)]
    pub allow_no_dalang: bool,
}

/// Exit status for an error: 2 config, 3 math gate, 4 numerical abort.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::DalangFailed(_)
        | Error::MomentGate { .. }
        | Error::FiniteVariance(_)
        | Error::Divergent(_) => 3,
        Error::NumericalAbort { .. } | Error::Singular => 4,
        _ => 2,
    }
}

/// Short machine-readable reason.
pub fn reason(e: &Error) -> &'static str {
    match e {
        Error::DalangFailed(_) => "dalang-condition-failed",
        Error::MomentGate { .. } => "moment-gate",
        Error::FiniteVariance(_) => "finite-variance",
        Error::Divergent(_) => "divergent-integral",
        Error::NumericalAbort { .. } => "numerical-abort",
        Error::Singular => "singular",
        Error::InvalidParameter(_) => "config-invalid",
        Error::Unsupported(_) => "unsupported",
        Error::GridMismatch(_) => "grid-mismatch",
        Error::Io(_) => "io-error",
        Error::Json(_) => "json-error",
    }
}

/// Artifacts of a successful run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub summary: Value,
}

/// Parses arguments, runs, prints a one-line reason on failure and returns
/// the process exit status.
pub fn main_entry<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim();
            eprintln!("levy-spde: exit=2 reason=usage detail={first:?}");
            return 2;
        }
    };
    match run(&cli) {
        Ok(_) => 0,
        Err(e) => {
            let code = exit_code(&e);
            let detail = e.to_string().replace('\n', " ");
            eprintln!(
                "levy-spde: exit={code} reason={} detail={detail:?}",
                reason(&e)
            );
            code
        }
    }
}

/// Runs one subcommand in-process.
pub fn run(cli: &Cli) -> Result<RunOutcome> {
    let started = Instant::now();
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let dalang_ok = cfg.kernel.dalang_condition().holds;
    cfg.validate(!cli.allow_no_dalang)?;
    let needs_sim = matches!(cli.subcommand, Subcommand::Simulate | Subcommand::Moments);
    if needs_sim && !cfg.operator.simulable() {
        return Err(Error::Unsupported(format!(
            "simulation of the {:?} operator in d = {}",
            cfg.operator.kind, cfg.operator.dim
        )));
    }
    let out_dir = cli
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Out::new(&out_dir)?;
    let threads = cli.threads.unwrap_or(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let sections = pool.install(|| dispatch(cli.subcommand, &cfg, dalang_ok, &mut out))?;
    let summary = json!({
        "subcommand": cli.subcommand.name(),
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "dalang_condition": dalang_ok,
        "results": sections,
    });
    out.json("summary.json", &summary)?;
    let manifest = json!({
        "manifest_version": 1,
        "package": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "subcommand": cli.subcommand.name(),
        "seed": cfg.seed,
        "threads": pool.current_num_threads(),
        "allow_no_dalang": cli.allow_no_dalang,
        "config_hash": cfg.hash(),
        "config": cfg,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "files": out.file_digests()?,
    });
    out.json_untracked("MANIFEST.json", &manifest)?;
    Ok(RunOutcome {
        out_dir,
        files: out.files().to_vec(),
        summary,
    })
}

fn dispatch(
    cmd: Subcommand,
    cfg: &ExperimentConfig,
    dalang_ok: bool,
    out: &mut Out,
) -> Result<Value> {
    let mut sections = serde_json::Map::new();
    match cmd {
        Subcommand::NoiseCheck => {
            sections.insert("noise_check".into(), noise_check(cfg, out)?);
        }
        Subcommand::Bounds => {
            sections.insert("bounds".into(), bounds(cfg, dalang_ok, out)?);
        }
        Subcommand::Simulate => {
            sections.insert("simulate".into(), simulate_cmd(cfg, out)?);
        }
        Subcommand::Moments => {
            sections.insert("moments".into(), moments(cfg, out)?);
        }
        Subcommand::AndersonSeries => {
            sections.insert("anderson_series".into(), anderson_series(cfg, out)?);
        }
        Subcommand::Intermittency => {
            sections.insert("intermittency".into(), intermittency(cfg, out)?);
        }
        Subcommand::Report => {
            sections.insert("noise_check".into(), noise_check(cfg, out)?);
            sections.insert("bounds".into(), bounds(cfg, dalang_ok, out)?);
            if dalang_ok {
                let wave_ok = cfg.operator.kind == OperatorKind::Heat || cfg.operator.dim <= 2;
                if cfg.lip_lower() > 0.0 && wave_ok {
                    sections.insert("intermittency".into(), intermittency(cfg, out)?);
                }
                if matches!(cfg.model, Model::Anderson { .. }) {
                    sections.insert("anderson_series".into(), anderson_series(cfg, out)?);
                }
                if cfg.operator.simulable() {
                    sections.insert("moments".into(), moments(cfg, out)?);
                }
            }
        }
    }
    Ok(Value::Object(sections))
}

fn noise_check(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value> {
    let a = &cfg.analysis;
    let cells = a.noise_cells.max(2);
    let vol = a.noise_cell_volume;
    let sampler = CellSampler::new(&cfg.measure, vol)?;
    let key = SeedKey::new(cfg.seed, 0);
    const CHUNK: usize = 1 << 16;
    let parts: Vec<(Running, Running)> = (0..cells.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = key.rng(stream::NOISE, c as u64);
            let (mut r2, mut r4) = (Running::default(), Running::default());
            for _ in 0..CHUNK.min(cells - c * CHUNK) {
                let x = sampler.sample(&mut rng);
                r2.push(x * x);
                r4.push(x * x * x * x);
            }
            (r2, r4)
        })
        .collect();
    let (r2, r4) = parts.into_iter().fold(
        (Running::default(), Running::default()),
        |(a2, a4), (b2, b4)| (a2.merge(b2), a4.merge(b4)),
    );
    let m2 = cfg.measure.m2();
    let m4 = moment_mp(&cfg.measure, 4.0);
    let m2_hat = r2.mean / vol;
    let m2_se = r2.stderr() / vol;
    // E X⁴ = m4|A| + 3 m2²|A|² for a centered infinitely divisible cell
    let m4_hat = (r4.mean - 3.0 * r2.mean * r2.mean) / vol;
    let m4_se = r4.stderr() / vol;
    let neglected = cfg.measure.neglected_variance();
    let mut rows = vec![
        vec![
            "m2".into(),
            fmt_num(m2),
            fmt_num(m2_hat),
            fmt_num(m2_se),
            fmt_num(m2_hat / m2 - 1.0),
        ],
        vec![
            "m4".into(),
            fmt_num(m4),
            fmt_num(m4_hat),
            fmt_num(m4_se),
            fmt_num(m4_hat / m4 - 1.0),
        ],
    ];
    let mut orders: Vec<f64> = vec![2.0, 4.0];
    for &p in &a.p {
        if !orders.contains(&p) {
            orders.push(p);
        }
    }
    let mut gates = Vec::new();
    for &p in &orders {
        let mp = moment_mp(&cfg.measure, p);
        let bp = a.bp.unwrap_or_else(|| default_bp(p));
        let c_p = rosenthal_constant(p, m2, mp, bp).ok();
        gates.push(json!({"p": p, "m_p": mp, "finite": mp.is_finite(), "b_p": bp, "c_p": c_p}));
    }
    let mut result = json!({
        "cells": cells,
        "cell_volume": vol,
        "m2": {"exact": m2, "empirical": m2_hat, "stderr": m2_se, "rel_error": m2_hat / m2 - 1.0},
        "m4": {"exact": m4, "empirical": m4_hat, "stderr": m4_se, "rel_error": m4_hat / m4 - 1.0},
        "neglected_small_jump_variance": neglected,
        "moment_gate": gates,
    });
    if let LevyMeasure::VarianceGamma { theta, sigma, nu } = cfg.measure {
        let check = vg_variance_check(theta, sigma, nu, vol, cells, cfg.seed)?;
        rows.push(vec![
            "vg_variance_full".into(),
            fmt_num(check.full),
            fmt_num(check.empirical),
            fmt_num(check.stderr),
            fmt_num(check.empirical / check.full - 1.0),
        ]);
        rows.push(vec![
            "vg_variance_five_eighths".into(),
            fmt_num(check.five_eighths),
            fmt_num(check.empirical),
            fmt_num(check.stderr),
            fmt_num(check.empirical / check.five_eighths - 1.0),
        ]);
        result["vg_variance"] = serde_json::to_value(check)?;
    }
    out.csv(
        "tables/noise_moments.csv",
        &["quantity", "exact", "empirical", "stderr", "rel_error"],
        &rows,
    )?;
    Ok(result)
}

fn bounds(cfg: &ExperimentConfig, dalang_ok: bool, out: &mut Out) -> Result<Value> {
    if !dalang_ok {
        return dalang_diagnostic(cfg, out);
    }
    let mut reports = Vec::new();
    for &p in &cfg.analysis.p {
        let req = ReportRequest {
            p,
            times: cfg.bound_times(),
            betas: cfg.betas(),
            lip: cfg.lip(),
            bp: cfg.analysis.bp,
            search: cfg.analysis.beta_search,
            resolution: cfg.analysis.resolution,
        };
        let r = bound_report(&cfg.operator, &cfg.kernel, &cfg.measure, &req)?;
        let tag = fmt_p(p);
        let jp_fit = r.fitted_exponents.iter().find(|f| f.name == "J_p");
        let (slope, se) = jp_fit.map_or((String::new(), String::new()), |f| {
            (fmt_num(f.slope), fmt_num(f.stderr))
        });
        let rows: Vec<Vec<String>> = r
            .j_p
            .iter()
            .map(|&(t, v)| {
                let b = r
                    .j_p_bound
                    .iter()
                    .find(|(s, _)| *s == t)
                    .map_or(String::new(), |x| fmt_num(x.1));
                vec![fmt_num(t), fmt_num(v), b, slope.clone(), se.clone()]
            })
            .collect();
        out.csv(
            &format!("tables/jp_p{tag}.csv"),
            &["t", "J_p", "bound", "slope", "stderr"],
            &rows,
        )?;
        let rows: Vec<Vec<String>> = r
            .m_p
            .iter()
            .zip(&r.linear_p_bound)
            .map(|(&(t, m), (_, lb))| {
                vec![
                    fmt_num(t),
                    fmt_num(m),
                    fmt_num(lb.value),
                    fmt_num(lb.time_dependent),
                ]
            })
            .collect();
        out.csv(
            &format!("tables/mp_p{tag}.csv"),
            &["t", "M_p", "linear_bound", "linear_bound_time_dependent"],
            &rows,
        )?;
        let rows: Vec<Vec<String>> = r
            .a_beta_p
            .iter()
            .map(|&(b, v)| vec![fmt_num(b), fmt_num(v)])
            .collect();
        out.csv(
            &format!("tables/a_beta_p{tag}.csv"),
            &["beta", "A_beta_p"],
            &rows,
        )?;
        let mut series = vec![Series {
            name: format!("J_{tag}"),
            points: r.j_p.clone(),
            dashed: false,
        }];
        if r.j_p_bound.iter().any(|x| x.1.is_finite()) {
            series.push(Series {
                name: "envelope".into(),
                points: r.j_p_bound.clone(),
                dashed: true,
            });
        }
        let title = match jp_fit {
            Some(f) => format!("J_{tag}(t): fitted slope {:.4} ± {:.2e}", f.slope, f.stderr),
            None => format!("J_{tag}(t)"),
        };
        out.svg(
            &format!("plots/jp_p{tag}.svg"),
            &Chart {
                title,
                x_label: "t".into(),
                y_label: "J_p".into(),
                log_x: true,
                log_y: true,
                series,
            },
        )?;
        reports.push(serde_json::to_value(&r)?);
    }
    Ok(Value::Array(reports))
}

/// With the Dalang condition failing, `M_2(t)` restricted to frequencies the
/// grid resolves grows without bound as the grid is refined. Report it for a
/// ladder of refinements, each halving the spacing of the configured grid.
fn dalang_diagnostic(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value> {
    let t = cfg.grid.horizon;
    let h0 = 2.0 * cfg.grid.half_width / cfg.grid.points as f64;
    let levels = 8;
    let mut rows = Vec::new();
    let mut ladder = Vec::new();
    let mut pts = Vec::new();
    for k in 0..levels {
        let h = h0 / (1u64 << k) as f64;
        let cutoff = std::f64::consts::PI / h;
        let m2 = m2_truncated(&cfg.operator, &cfg.kernel, t, cutoff)?;
        rows.push(vec![
            k.to_string(),
            fmt_num(h),
            fmt_num(cutoff),
            fmt_num(m2),
        ]);
        ladder.push(json!({"refinement": k, "spacing": h, "cutoff": cutoff, "M_2": m2}));
        pts.push((cutoff, m2));
    }
    out.csv(
        "tables/dalang_diagnostic.csv",
        &["refinement", "spacing", "cutoff", "M_2"],
        &rows,
    )?;
    let inc: Vec<f64> = pts.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let ratio = inc[inc.len() - 1] / inc[inc.len() - 2];
    // convergent tails shrink by a fixed factor < 1 per halving; log or power
    // growth keeps the ratio at or above 1
    let grows = inc.iter().all(|d| *d > 0.0) && ratio >= 0.99;
    out.svg(
        "plots/dalang_diagnostic.svg",
        &Chart {
            title: format!("M_2({t}) with frequencies up to the grid cutoff"),
            x_label: "cutoff".into(),
            y_label: "M_2".into(),
            log_x: true,
            log_y: true,
            series: vec![Series {
                name: "M_2".into(),
                points: pts,
                dashed: false,
            }],
        },
    )?;
    Ok(json!({
        "dalang_condition": false,
        "t": t,
        "refinement": ladder,
        "increment_ratio": ratio,
        "diverges": grows,
    }))
}

fn simulate_cmd(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value> {
    let sim = cfg.sim_config();
    let key = SeedKey::new(cfg.seed, 0);
    let series = simulate(&sim, key)?;
    let n = sim.grid.spatial_len();
    let mut rows = Vec::new();
    let mut stats = Vec::new();
    for (i, &t) in series.times.iter().enumerate() {
        let s = series.slice(i);
        let mean = crate::stats::mean(s);
        let ms = crate::stats::mean(&s.iter().map(|v| v * v).collect::<Vec<_>>());
        let lo = s.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        rows.push(vec![
            fmt_num(t),
            fmt_num(mean),
            fmt_num(lo),
            fmt_num(hi),
            fmt_num(ms),
        ]);
        stats.push((t, mean, lo, hi, ms));
    }
    out.csv(
        "tables/field_summary.csv",
        &["t", "mean", "min", "max", "mean_square"],
        &rows,
    )?;
    if n * series.times.len() <= 200_000 {
        let sp = sim.grid.spatial();
        let mut header = vec!["t".to_string(), "index".to_string()];
        header.extend((0..sim.grid.dim).map(|a| format!("x{a}")));
        header.push("u".into());
        let mut rows = Vec::with_capacity(n * series.times.len());
        for (i, &t) in series.times.iter().enumerate() {
            for (j, &u) in series.slice(i).iter().enumerate() {
                let mut row = vec![fmt_num(t), j.to_string()];
                row.extend(sp.point(j).into_iter().map(fmt_num));
                row.push(fmt_num(u));
                rows.push(row);
            }
        }
        let h: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        out.csv("tables/field.csv", &h, &rows)?;
    }
    if cfg.analysis.write_field {
        out.binary("fields/field.bin", |path| series.write_binary(path))?;
    }
    let last = series.times.len() - 1;
    if sim.grid.dim == 1 {
        let sp = sim.grid.spatial();
        let pts = series
            .slice(last)
            .iter()
            .enumerate()
            .map(|(j, &u)| (sp.point(j)[0], u))
            .collect();
        out.svg(
            "plots/field_final.svg",
            &Chart {
                title: format!("u(t = {}, x)", series.times[last]),
                x_label: "x".into(),
                y_label: "u".into(),
                log_x: false,
                log_y: false,
                series: vec![Series {
                    name: "u".into(),
                    points: pts,
                    dashed: false,
                }],
            },
        )?;
    } else {
        out.svg(
            "plots/field_mean_square.svg",
            &Chart {
                title: "spatial mean of u²".into(),
                x_label: "t".into(),
                y_label: "mean u²".into(),
                log_x: false,
                log_y: false,
                series: vec![Series {
                    name: "mean u²".into(),
                    points: stats.iter().map(|s| (s.0, s.4)).collect(),
                    dashed: false,
                }],
            },
        )?;
    }
    let f = stats[last];
    Ok(json!({
        "recorded_steps": series.steps.len(),
        "spatial_points": n,
        "final": {"t": f.0, "mean": f.1, "min": f.2, "max": f.3, "mean_square": f.4},
        "field_file": if cfg.analysis.write_field { Some("fields/field.bin") } else { None },
    }))
}

fn moments(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value> {
    let sim = cfg.sim_config();
    let a = &cfg.analysis;
    let report = mc_moments(&sim, &a.p, &a.times, a.replicates, cfg.seed, &a.moments)?;
    let mut rows = Vec::new();
    let mut per_p = Vec::new();
    for (i, &p) in report.p_values.iter().enumerate() {
        let bound: Option<Vec<(f64, f64)>> = match cfg.model {
            Model::Linear => {
                let bp = a.bp.unwrap_or_else(|| default_bp(p));
                let positive: Vec<f64> =
                    report.times.iter().copied().filter(|t| *t > 0.0).collect();
                let series = match linear_moment_bound_series(
                    &cfg.operator,
                    &cfg.kernel,
                    &cfg.measure,
                    p,
                    &positive,
                    bp,
                    &a.resolution,
                ) {
                    Ok(v) => v.iter().map(|b| b.tighter()).collect::<Vec<f64>>(),
                    Err(Error::Divergent(_)) => vec![f64::INFINITY; positive.len()],
                    Err(e) => return Err(e),
                };
                let mut it = series.into_iter();
                Some(
                    report
                        .times
                        .iter()
                        .map(|&t| (t, if t > 0.0 { it.next().unwrap() } else { 0.0 }))
                        .collect(),
                )
            }
            _ => None,
        };
        let comparison = match &bound {
            Some(b) => Some(compare_bound(&report, p, b)?),
            None => None,
        };
        for (k, &t) in report.times.iter().enumerate() {
            let (b, verdict) = match &comparison {
                Some(c) => (
                    fmt_num(c.verdicts[k].bound),
                    if c.verdicts[k].pass { "pass" } else { "fail" }.to_string(),
                ),
                None => (String::new(), "n/a".to_string()),
            };
            rows.push(vec![
                fmt_num(t),
                fmt_num(p),
                fmt_num(report.estimates[i][k]),
                fmt_num(report.stderr[i][k]),
                b,
                verdict,
            ]);
        }
        let growth = lyapunov_estimate(&report, p, a.growth_window);
        let tag = fmt_p(p);
        let est: Vec<(f64, f64)> = report
            .times
            .iter()
            .copied()
            .zip(report.estimates[i].iter().copied())
            .collect();
        let mut series = vec![Series {
            name: format!("E|u|^{tag}"),
            points: est.clone(),
            dashed: false,
        }];
        if let Some(b) = &bound {
            series.push(Series {
                name: "bound".into(),
                points: b.clone(),
                dashed: true,
            });
        }
        out.svg(
            &format!("plots/moments_p{tag}.svg"),
            &Chart {
                title: format!(
                    "Monte Carlo E|u(t,x)|^{tag} ({} replicates)",
                    report.replicates
                ),
                x_label: "t".into(),
                y_label: "moment".into(),
                log_x: false,
                log_y: true,
                series,
            },
        )?;
        if let Ok(g) = &growth {
            let fitted = est
                .iter()
                .filter(|(t, _)| *t >= g.window.0 - 1e-12 && *t <= g.window.1 + 1e-12)
                .map(|&(t, _)| (t, (g.intercept + g.slope * t).exp()))
                .collect();
            out.svg(
                &format!("plots/lyapunov_p{tag}.svg"),
                &Chart {
                    title: format!(
                        "growth rate {:.4} ± {:.4} (finite horizon)",
                        g.slope, g.stderr
                    ),
                    x_label: "t".into(),
                    y_label: format!("E|u|^{tag}"),
                    log_x: false,
                    log_y: true,
                    series: vec![
                        Series {
                            name: "estimate".into(),
                            points: est.clone(),
                            dashed: false,
                        },
                        Series {
                            name: "fit".into(),
                            points: fitted,
                            dashed: true,
                        },
                    ],
                },
            )?;
        }
        per_p.push(json!({
            "p": p,
            "estimates": report.estimates[i],
            "stderr": report.stderr[i],
            "ess": report.ess[i],
            "low_ess": report.low_ess[i],
            "growth_rate": growth.as_ref().ok(),
            "growth_rate_note": growth.as_ref().err().map(|e| e.to_string()),
            "bound_comparison": comparison,
        }));
    }
    out.csv(
        "tables/moments.csv",
        &["t", "p", "estimate", "stderr", "bound", "verdict"],
        &rows,
    )?;
    Ok(json!({
        "times": report.times,
        "replicates": report.replicates,
        "aborted": report.aborted,
        "abort_flag": report.abort_flag,
        "probes": report.probes,
        "per_p": per_p,
    }))
}

fn anderson_series(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value> {
    let lambda = match cfg.model {
        Model::Anderson { lambda } => lambda,
        _ => {
            return Err(Error::InvalidParameter(
                "anderson-series needs model.kind = anderson".into(),
            ))
        }
    };
    let a = &cfg.analysis;
    let t = a.chaos_t.unwrap_or(cfg.grid.horizon);
    let opts = ChaosOptions {
        samples: a.chaos_samples,
        seed: cfg.seed,
        truncation: a.truncation,
    };
    let r = anderson_second_moment(
        &cfg.operator,
        &cfg.kernel,
        &cfg.measure,
        lambda.abs(),
        cfg.eta,
        t,
        a.n_max,
        &opts,
    )?;
    let mut partial = 0.0;
    let rows: Vec<Vec<String>> = r
        .terms
        .iter()
        .map(|term| {
            partial += term.value;
            vec![
                term.n.to_string(),
                fmt_num(term.value),
                fmt_num(term.mc_stderr),
                fmt_num(partial),
            ]
        })
        .collect();
    out.csv(
        "tables/chaos.csv",
        &["n", "value", "stderr", "partial_sum"],
        &rows,
    )?;
    let mut v = serde_json::to_value(&r)?;
    v["gaussian_coupling"] = json!(gaussian_coupling(r.m2, lambda.abs()));
    Ok(v)
}

fn intermittency(cfg: &ExperimentConfig, out: &mut Out) -> Result<Value> {
    let a = &cfg.analysis;
    let lower = cfg.lip_lower();
    if !(lower > 0.0) {
        return Err(Error::InvalidParameter(
            "intermittency needs a positive lower Lipschitz constant (analysis.lip_lower or an anderson model)".into(),
        ));
    }
    let r = intermittency_check(
        &cfg.operator,
        &cfg.kernel,
        &cfg.measure,
        lower,
        &a.intermittency,
    )?;
    let bp = a.bp.unwrap_or_else(|| default_bp(2.0));
    let bs = beta_star(
        &cfg.operator,
        &cfg.kernel,
        &cfg.measure,
        2.0,
        cfg.lip(),
        bp,
        &a.beta_search,
        &a.resolution,
    )?;
    let rows: Vec<Vec<String>> = r
        .ladder
        .iter()
        .map(|&(box_a, b)| vec![fmt_num(box_a), b.map_or(String::new(), fmt_num)])
        .collect();
    out.csv("tables/intermittency.csv", &["a", "beta_sup"], &rows)?;
    let pts: Vec<(f64, f64)> = r
        .ladder
        .iter()
        .filter_map(|&(x, b)| b.map(|b| (x, b)))
        .collect();
    out.svg(
        "plots/intermittency.svg",
        &Chart {
            title: "certified growth rate by box size".into(),
            x_label: "a".into(),
            y_label: "beta".into(),
            log_x: true,
            log_y: true,
            series: vec![Series {
                name: "sup beta".into(),
                points: pts,
                dashed: false,
            }],
        },
    )?;
    Ok(json!({
        "witness": r,
        "beta_star": bs,
        "b_p": bp,
        "growth_rate_interval": {
            "lower": r.witness_beta,
            "upper": output::ext(2.0 * bs.value),
        },
    }))
}
