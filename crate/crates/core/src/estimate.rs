//! Monte Carlo moments, growth-rate regressions and one-sided comparisons
//! against analytic bounds.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::noise::moment_mp;
use crate::noise::NoiseSource;
use crate::rng::SeedKey;
use crate::simulate::{Scheme, SimConfig};
use crate::stats::{bootstrap_stderr, linear_fit, pairwise_sum, LinearFit};

/// Tuning of [`mc_moments`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MomentOptions {
    /// Probes are grid points whose every index is a multiple of this.
    pub probe_stride: usize,
    pub bootstrap_resamples: usize,
    /// Moments whose effective sample size falls below this are flagged.
    pub min_ess: f64,
}

impl Default for MomentOptions {
    fn default() -> Self {
        MomentOptions {
            probe_stride: 4,
            bootstrap_resamples: 400,
            min_ess: 30.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    pub times: Vec<f64>,
    pub p_values: Vec<f64>,
    /// `estimates[i][k]`: `E|u(t_k,·)|^{p_i}` averaged over probes and replicates.
    pub estimates: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
    /// `(Σ r)² / Σ r²` over replicate means `r`.
    pub ess: Vec<Vec<f64>>,
    /// Per `p`: some time point has effective sample size below the threshold.
    pub low_ess: Vec<bool>,
    pub replicates: usize,
    pub aborted: usize,
    /// More than 1% of replicates aborted.
    pub abort_flag: bool,
    pub probes: usize,
    pub seed: u64,
    /// `rows[i][k][r]`: probe average of `|u|^{p_i}` at `t_k` for replicate `r`.
    #[serde(skip)]
    pub rows: Vec<Vec<Vec<f64>>>,
}

/// Mean that is exact when all values coincide.
fn shifted_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let x0 = values[0];
    let dev: Vec<f64> = values.iter().map(|v| v - x0).collect();
    x0 + pairwise_sum(&dev) / values.len() as f64
}

#[inline]
fn abs_pow(u: f64, p: f64) -> f64 {
    if p == 2.0 {
        u * u
    } else {
        u.abs().powf(p)
    }
}

fn probe_indices(cfg: &SimConfig, stride: usize) -> Vec<usize> {
    let sp = cfg.grid.spatial();
    (0..sp.len())
        .filter(|&j| sp.unflatten(j).iter().all(|i| i % stride == 0))
        .collect()
}

fn resolve_times(cfg: &SimConfig, times: &[f64]) -> Result<Vec<usize>> {
    let recorded = cfg.grid.recorded_steps();
    if times.is_empty() {
        return Ok(recorded);
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return invalid("report times must be strictly increasing");
    }
    times
        .iter()
        .map(|&t| {
            let k = (t / cfg.grid.dt).round();
            let ok = k >= 0.0 && (k * cfg.grid.dt - t).abs() <= 1e-9 * t.abs().max(1.0);
            let k = k as usize;
            if ok && recorded.binary_search(&k).is_ok() {
                Ok(k)
            } else {
                Err(Error::GridMismatch(format!(
                    "time {t} is not a recorded step of the grid"
                )))
            }
        })
        .collect()
}

/// Monte Carlo `E|u(t,x)|^p` over `replicates` independent runs.
pub fn mc_moments(
    cfg: &SimConfig,
    p_list: &[f64],
    times: &[f64],
    replicates: usize,
    seed: u64,
    options: &MomentOptions,
) -> Result<MomentReport> {
    if replicates < 2 {
        return invalid("moment estimation needs at least two replicates");
    }
    if p_list.is_empty() || p_list.iter().any(|p| !(*p > 0.0)) {
        return invalid("moment orders must be positive");
    }
    for &p in p_list {
        if p >= 2.0 && !moment_mp(&cfg.measure, p).is_finite() {
            return Err(Error::MomentGate { p });
        }
    }
    let scheme = Scheme::new(cfg)?;
    let steps = resolve_times(cfg, times)?;
    let probes = probe_indices(cfg, options.probe_stride.max(1));
    let np = p_list.len();
    let nt = steps.len();
    let runs: Vec<Result<Option<Vec<f64>>>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let key = SeedKey::new(seed, r as u64);
            let src = NoiseSource::new(&cfg.measure, &cfg.grid, key)?;
            // out[i * nt + k]
            let mut out = vec![0.0; np * nt];
            let mut buf = vec![0.0; probes.len()];
            let res = scheme.run(
                &cfg.grid,
                |k, o| src.fill_step(k, o),
                |k, u| {
                    if let Ok(ti) = steps.binary_search(&k) {
                        for (i, &p) in p_list.iter().enumerate() {
                            for (b, &j) in buf.iter_mut().zip(&probes) {
                                *b = abs_pow(u[j], p);
                            }
                            out[i * nt + ti] = shifted_mean(&buf);
                        }
                    }
                },
            );
            match res {
                Ok(()) => Ok(Some(out)),
                Err(Error::NumericalAbort { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut kept: Vec<Vec<f64>> = Vec::with_capacity(replicates);
    let mut aborted = 0;
    for r in runs {
        match r? {
            Some(v) => kept.push(v),
            None => aborted += 1,
        }
    }
    if kept.len() < 2 {
        return Err(Error::NumericalAbort {
            step: 0,
            reason: format!("{aborted} of {replicates} replicates aborted"),
        });
    }
    let mut rows = vec![vec![Vec::with_capacity(kept.len()); nt]; np];
    for v in &kept {
        for i in 0..np {
            for k in 0..nt {
                rows[i][k].push(v[i * nt + k]);
            }
        }
    }
    let key = SeedKey::new(seed, u64::MAX);
    let mut estimates = vec![vec![0.0; nt]; np];
    let mut stderr = vec![vec![0.0; nt]; np];
    let mut ess = vec![vec![0.0; nt]; np];
    for i in 0..np {
        for k in 0..nt {
            let col = &rows[i][k];
            estimates[i][k] = shifted_mean(col);
            // sorted copy makes the bootstrap independent of replicate order
            let mut sorted = col.clone();
            sorted.sort_by(|a, b| a.total_cmp(b));
            stderr[i][k] =
                bootstrap_stderr(sorted.len(), options.bootstrap_resamples, key, |idx| {
                    let pick: Vec<f64> = idx.iter().map(|&j| sorted[j]).collect();
                    shifted_mean(&pick)
                });
            let s = pairwise_sum(col);
            let s2 = pairwise_sum(&col.iter().map(|v| v * v).collect::<Vec<_>>());
            ess[i][k] = if s2 > 0.0 {
                s * s / s2
            } else {
                col.len() as f64
            };
        }
    }
    let low_ess = ess
        .iter()
        .map(|r| r.iter().any(|&e| e < options.min_ess))
        .collect();
    Ok(MomentReport {
        times: steps.iter().map(|&k| k as f64 * cfg.grid.dt).collect(),
        p_values: p_list.to_vec(),
        estimates,
        stderr,
        ess,
        low_ess,
        replicates: kept.len(),
        aborted,
        abort_flag: aborted as f64 > 0.01 * replicates as f64,
        probes: probes.len(),
        seed,
        rows,
    })
}

/// Finite-horizon growth rate: slope of `log E|u|^p` against `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRate {
    pub p: f64,
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub window: (f64, f64),
    pub points: usize,
    /// `stderr` comes from resampling replicates rather than the residuals.
    pub bootstrap: bool,
}

/// Least-squares growth rate over `window` (default: final third of the
/// horizon).
pub fn lyapunov_estimate(
    report: &MomentReport,
    p: f64,
    window: Option<(f64, f64)>,
) -> Result<GrowthRate> {
    let i = report
        .p_values
        .iter()
        .position(|&q| q == p)
        .ok_or_else(|| Error::InvalidParameter(format!("p = {p} not in the report")))?;
    let t_end = report
        .times
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let window = window.unwrap_or((t_end * 2.0 / 3.0, t_end));
    let sel: Vec<usize> = (0..report.times.len())
        .filter(|&k| report.times[k] >= window.0 - 1e-12 && report.times[k] <= window.1 + 1e-12)
        .collect();
    if sel.len() < 4 {
        return invalid(format!(
            "growth-rate window {window:?} holds {} time points, need 4",
            sel.len()
        ));
    }
    let ts: Vec<f64> = sel.iter().map(|&k| report.times[k]).collect();
    let es: Vec<f64> = sel.iter().map(|&k| report.estimates[i][k]).collect();
    if es.iter().any(|e| !(*e > 0.0)) {
        return invalid("nonpositive moment estimate inside the growth-rate window");
    }
    let fit: LinearFit = linear_fit(&ts, &es.iter().map(|e| e.ln()).collect::<Vec<_>>())?;
    let rows = report
        .rows
        .get(i)
        .filter(|r| !r.is_empty() && r[0].len() >= 2);
    let (stderr, bootstrap) = match rows {
        Some(rows) => {
            let reps = rows[0].len();
            // canonical replicate order: lexicographic in the window values
            let mut order: Vec<usize> = (0..reps).collect();
            order.sort_by(|&a, &b| {
                sel.iter()
                    .map(|&k| rows[k][a].total_cmp(&rows[k][b]))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let key = SeedKey::new(report.seed, u64::MAX - 1);
            let se = bootstrap_stderr(reps, 400, key, |idx| {
                let ys: Vec<f64> = sel
                    .iter()
                    .map(|&k| {
                        shifted_mean(&idx.iter().map(|&j| rows[k][order[j]]).collect::<Vec<_>>())
                            .ln()
                    })
                    .collect();
                linear_fit(&ts, &ys).map(|f| f.slope).unwrap_or(fit.slope)
            });
            (se, true)
        }
        None => (fit.slope_stderr, false),
    };
    Ok(GrowthRate {
        p,
        slope: fit.slope,
        stderr,
        intercept: fit.intercept,
        window,
        points: sel.len(),
        bootstrap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub t: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundComparison {
    pub p: f64,
    pub verdicts: Vec<Verdict>,
    pub all_pass: bool,
}

/// One-sided check `estimate ≤ bound + 3·stderr` at every report time.
pub fn compare_bound(
    report: &MomentReport,
    p: f64,
    bound_series: &[(f64, f64)],
) -> Result<BoundComparison> {
    let i = report
        .p_values
        .iter()
        .position(|&q| q == p)
        .ok_or_else(|| Error::InvalidParameter(format!("p = {p} not in the report")))?;
    if bound_series.len() != report.times.len() {
        return Err(Error::GridMismatch(
            "bound series and report have different lengths".into(),
        ));
    }
    let mut verdicts = Vec::with_capacity(bound_series.len());
    for (k, &(t, bound)) in bound_series.iter().enumerate() {
        let tr = report.times[k];
        if (t - tr).abs() > 1e-9 * tr.abs().max(1.0) {
            return Err(Error::GridMismatch(format!(
                "bound time {t} does not match report time {tr}"
            )));
        }
        let estimate = report.estimates[i][k];
        let stderr = report.stderr[i][k];
        verdicts.push(Verdict {
            t,
            estimate,
            stderr,
            bound,
            pass: estimate <= bound + 3.0 * stderr,
        });
    }
    let all_pass = verdicts.iter().all(|v| v.pass);
    Ok(BoundComparison {
        p,
        verdicts,
        all_pass,
    })
}
