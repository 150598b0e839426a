//! Mild-solution simulation on the periodic grid.
//!
//! The solution is stored as its deviation `w = u - η` from the constant
//! initial condition, which keeps `σ ≡ 0` runs exactly constant. Each step
//! colors the cell increments with `κ`, multiplies by `σ(u)` and propagates
//! with the exact Fourier multiplier of the Green function.

use std::path::Path;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bounds::check_pair;
use crate::error::{invalid, Error, Result};
use crate::green::{OperatorKind, OperatorSpec};
use crate::grid::{SimGrid, SpatialGrid, Spectral};
use crate::kernels::KernelSpec;
use crate::noise::{
    sample_white_noise, write_binary_with_sidecar, LevyMeasure, NoiseField, NoiseSource,
};
use crate::rng::SeedKey;

/// Blow-up threshold for `|u|`.
pub const BLOW_UP: f64 = 1e12;

/// Scalar nonlinearities with known Lipschitz constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalarFn {
    Zero,
    Constant {
        value: f64,
    },
    Identity,
    ScaledLinear {
        scale: f64,
    },
    /// `clamp(slope*u + offset, lo, hi)`.
    AffineClip {
        slope: f64,
        offset: f64,
        lo: f64,
        hi: f64,
    },
    /// `amplitude * sin(frequency * u)`.
    SinBounded {
        amplitude: f64,
        frequency: f64,
    },
}

impl ScalarFn {
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            ScalarFn::Zero => 0.0,
            ScalarFn::Constant { value } => value,
            ScalarFn::Identity => u,
            ScalarFn::ScaledLinear { scale } => scale * u,
            ScalarFn::AffineClip {
                slope,
                offset,
                lo,
                hi,
            } => (slope * u + offset).clamp(lo, hi),
            ScalarFn::SinBounded {
                amplitude,
                frequency,
            } => amplitude * (frequency * u).sin(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            ScalarFn::Zero | ScalarFn::Constant { .. } => 0.0,
            ScalarFn::Identity => 1.0,
            ScalarFn::ScaledLinear { scale } => scale.abs(),
            ScalarFn::AffineClip { slope, .. } => slope.abs(),
            ScalarFn::SinBounded {
                amplitude,
                frequency,
            } => (amplitude * frequency).abs(),
        }
    }

    /// `inf |σ(u)/u|` over `u ≠ 0`, when positive.
    pub fn lower_lipschitz(&self) -> f64 {
        match *self {
            ScalarFn::Identity => 1.0,
            ScalarFn::ScaledLinear { scale } => scale.abs(),
            _ => 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ScalarFn::Zero | ScalarFn::Identity => true,
            ScalarFn::Constant { value } => value.is_finite(),
            ScalarFn::ScaledLinear { scale } => scale.is_finite(),
            ScalarFn::AffineClip {
                slope,
                offset,
                lo,
                hi,
            } => {
                slope.is_finite() && offset.is_finite() && lo <= hi && !lo.is_nan() && !hi.is_nan()
            }
            ScalarFn::SinBounded {
                amplitude,
                frequency,
            } => amplitude.is_finite() && frequency.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            invalid(format!("bad scalar function parameters: {self:?}"))
        }
    }
}

/// Which equation is simulated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    /// Additive noise, zero initial condition.
    Linear,
    Nonlinear {
        sigma: ScalarFn,
        drift: ScalarFn,
    },
    /// `σ(u) = λu`, no drift.
    Anderson {
        lambda: f64,
    },
}

impl Model {
    pub fn sigma(&self) -> ScalarFn {
        match *self {
            Model::Linear => ScalarFn::Constant { value: 1.0 },
            Model::Nonlinear { sigma, .. } => sigma,
            Model::Anderson { lambda } => ScalarFn::ScaledLinear { scale: lambda },
        }
    }

    pub fn drift(&self) -> ScalarFn {
        match *self {
            Model::Nonlinear { drift, .. } => drift,
            _ => ScalarFn::Zero,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Model::Anderson { lambda } = self {
            if !lambda.is_finite() {
                return invalid("Anderson coupling must be finite");
            }
        }
        self.sigma().validate()?;
        self.drift().validate()
    }
}

/// Everything needed to simulate one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub op: OperatorSpec,
    pub kernel: KernelSpec,
    pub measure: LevyMeasure,
    pub model: Model,
    /// Constant initial condition (ignored, i.e. zero, for the linear model).
    pub eta: f64,
    pub grid: SimGrid,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.model.validate()?;
        self.measure.validate()?;
        check_pair(&self.op, &self.kernel)?;
        if self.op.dim != self.grid.dim {
            return Err(Error::GridMismatch(
                "operator and grid dimensions differ".into(),
            ));
        }
        if !self.op.simulable() {
            return Err(Error::Unsupported(format!(
                "simulation of the {:?} operator in d = {}",
                self.op.kind, self.op.dim
            )));
        }
        if !self.eta.is_finite() {
            return invalid("initial condition must be finite");
        }
        Ok(())
    }

    pub fn initial_value(&self) -> f64 {
        match self.model {
            Model::Linear => 0.0,
            _ => self.eta,
        }
    }
}

/// Recorded solution `u(t_k, x_j)` of one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSeries {
    pub grid: SimGrid,
    pub steps: Vec<usize>,
    pub times: Vec<f64>,
    /// `steps.len()` slices of `grid.spatial_len()` values each.
    pub values: Vec<f64>,
    pub model: Model,
    pub eta: f64,
    pub seed_key: SeedKey,
}

impl FieldSeries {
    pub fn slice(&self, i: usize) -> &[f64] {
        let n = self.grid.spatial_len();
        &self.values[i * n..(i + 1) * n]
    }

    /// Binary export: shape `[recorded, N, .., N]`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut shape = vec![self.steps.len()];
        shape.extend(std::iter::repeat_n(self.grid.points, self.grid.dim));
        write_binary_with_sidecar(path, &self.values, shape, &self.grid, self.seed_key)
    }
}

/// Fourier multipliers shared by all replicates of a configuration.
pub(crate) struct Scheme {
    kind: OperatorKind,
    sigma: ScalarFn,
    drift: ScalarFn,
    eta: f64,
    dt: f64,
    inv_cell: f64,
    spatial: SpatialGrid,
    kernel_hat: Vec<Complex64>,
    /// heat: `e^{-dt ρ²/2}`; wave: `cos(dt ρ)`.
    a: Vec<f64>,
    /// heat: `e^{-dt ρ²/4}`; wave: `sin(dt ρ)/ρ`.
    b: Vec<f64>,
    /// wave: `ρ sin(dt ρ)`.
    c: Vec<f64>,
    /// wave: `(1 - cos(dt ρ))/(ρ² dt)` and `sin(dt ρ)/(ρ dt)`.
    src_u: Vec<f64>,
    src_v: Vec<f64>,
}

/// Per-replicate working state.
struct State {
    spectral: Spectral,
    w: Vec<f64>,
    w_hat: Vec<Complex64>,
    v_hat: Vec<Complex64>,
    buf: Vec<Complex64>,
    drift_buf: Vec<Complex64>,
    real: Vec<f64>,
}

impl Scheme {
    pub(crate) fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let spatial = cfg.grid.spatial();
        let mut spectral = Spectral::for_grid(&spatial);
        let mut kernel_hat = Vec::new();
        spectral.forward_real(&cfg.kernel.cell_weights(&spatial), &mut kernel_hat);
        let n = spatial.len();
        let dt = cfg.grid.dt;
        let rho: Vec<f64> = (0..n)
            .map(|m| {
                spatial
                    .frequency_vector(m)
                    .iter()
                    .map(|v| v * v)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        let (mut a, mut b, mut c, mut src_u, mut src_v) =
            (vec![0.0; n], vec![0.0; n], vec![], vec![], vec![]);
        match cfg.op.kind {
            OperatorKind::Heat => {
                for (m, r) in rho.iter().enumerate() {
                    a[m] = (-dt * r * r / 2.0).exp();
                    b[m] = (-dt * r * r / 4.0).exp();
                }
            }
            OperatorKind::Wave => {
                c = vec![0.0; n];
                src_u = vec![0.0; n];
                src_v = vec![0.0; n];
                for (m, &r) in rho.iter().enumerate() {
                    let u = dt * r;
                    a[m] = u.cos();
                    c[m] = r * u.sin();
                    if u < 1e-4 {
                        let u2 = u * u;
                        b[m] = dt * (1.0 - u2 / 6.0);
                        src_u[m] = dt * (0.5 - u2 / 24.0);
                        src_v[m] = 1.0 - u2 / 6.0;
                    } else {
                        b[m] = u.sin() / r;
                        src_u[m] = (1.0 - u.cos()) / (r * r * dt);
                        src_v[m] = u.sin() / u;
                    }
                }
            }
        }
        Ok(Scheme {
            kind: cfg.op.kind,
            sigma: cfg.model.sigma(),
            drift: cfg.model.drift(),
            eta: cfg.initial_value(),
            dt,
            inv_cell: 1.0 / spatial.cell_area(),
            spatial,
            kernel_hat,
            a,
            b,
            c,
            src_u,
            src_v,
        })
    }

    fn state(&self) -> State {
        let n = self.spatial.len();
        let zero = Complex64::new(0.0, 0.0);
        State {
            spectral: Spectral::for_grid(&self.spatial),
            w: vec![0.0; n],
            w_hat: vec![zero; n],
            v_hat: vec![zero; n],
            buf: Vec::with_capacity(n),
            drift_buf: Vec::with_capacity(n),
            real: vec![0.0; n],
        }
    }

    /// Advances one step. `noise` holds the cell increments of the step and
    /// `input` the field fed to `σ` and `b` (the current solution, or the
    /// previous Picard iterate).
    fn step(&self, st: &mut State, noise: &[f64], input: &[f64]) {
        let n = noise.len();
        // colored increments X = Σ_j w_{i-j} ΔL_j
        st.spectral.forward_real(noise, &mut st.buf);
        for (z, k) in st.buf.iter_mut().zip(&self.kernel_hat) {
            *z *= k;
        }
        st.spectral.inverse_real(&mut st.buf, &mut st.real);
        for i in 0..n {
            st.real[i] *= self.sigma.eval(input[i]) * self.inv_cell;
        }
        let with_drift = self.drift != ScalarFn::Zero;
        if with_drift {
            let dr: Vec<f64> = input
                .iter()
                .map(|&u| self.dt * self.drift.eval(u))
                .collect();
            st.spectral.forward_real(&dr, &mut st.drift_buf);
        }
        match self.kind {
            OperatorKind::Heat => {
                for i in 0..n {
                    st.real[i] += st.w[i];
                }
                st.spectral.forward_real(&st.real, &mut st.buf);
                for m in 0..n {
                    st.buf[m] *= self.a[m];
                }
                if with_drift {
                    for m in 0..n {
                        st.buf[m] += st.drift_buf[m] * self.b[m];
                    }
                }
                st.spectral.inverse_real(&mut st.buf, &mut st.w);
            }
            OperatorKind::Wave => {
                st.spectral.forward_real(&st.real, &mut st.buf);
                if with_drift {
                    for m in 0..n {
                        st.buf[m] += st.drift_buf[m];
                    }
                }
                for m in 0..n {
                    let (w, v, f) = (st.w_hat[m], st.v_hat[m], st.buf[m]);
                    st.w_hat[m] = w * self.a[m] + v * self.b[m] + f * self.src_u[m];
                    st.v_hat[m] = v * self.a[m] - w * self.c[m] + f * self.src_v[m];
                }
                st.buf.clear();
                st.buf.extend_from_slice(&st.w_hat);
                st.spectral.inverse_real(&mut st.buf, &mut st.w);
            }
        }
    }

    fn check(&self, st: &State, step: usize) -> Result<()> {
        for &w in &st.w {
            let u = self.eta + w;
            if !u.is_finite() {
                return Err(Error::NumericalAbort {
                    step,
                    reason: "non-finite value".into(),
                });
            }
            if u.abs() > BLOW_UP {
                return Err(Error::NumericalAbort {
                    step,
                    reason: format!("|u| exceeded {BLOW_UP:e}"),
                });
            }
        }
        Ok(())
    }

    /// Runs the scheme; `noise(k, out)` supplies step `k`'s increments and
    /// `visit(k, u)` sees the solution after `k` steps for every recorded `k`.
    pub(crate) fn run<N, V>(&self, grid: &SimGrid, mut noise: N, mut visit: V) -> Result<()>
    where
        N: FnMut(usize, &mut [f64]),
        V: FnMut(usize, &[f64]),
    {
        let recorded = grid.recorded_steps();
        let mut next = 0;
        let mut st = self.state();
        let mut slice = vec![0.0; self.spatial.len()];
        let mut u = vec![self.eta; self.spatial.len()];
        if recorded.first() == Some(&0) {
            visit(0, &u);
            next = 1;
        }
        for k in 0..grid.steps() {
            noise(k, &mut slice);
            self.step(&mut st, &slice, &u);
            self.check(&st, k + 1)?;
            for (ui, wi) in u.iter_mut().zip(&st.w) {
                *ui = self.eta + wi;
            }
            if next < recorded.len() && recorded[next] == k + 1 {
                visit(k + 1, &u);
                next += 1;
            }
        }
        Ok(())
    }
}

fn collect(
    cfg: &SimConfig,
    scheme: &Scheme,
    key: SeedKey,
    noise: impl FnMut(usize, &mut [f64]),
) -> Result<FieldSeries> {
    let mut steps = Vec::new();
    let mut values = Vec::new();
    scheme.run(&cfg.grid, noise, |k, u| {
        steps.push(k);
        values.extend_from_slice(u);
    })?;
    Ok(FieldSeries {
        grid: cfg.grid.clone(),
        times: steps.iter().map(|&k| k as f64 * cfg.grid.dt).collect(),
        steps,
        values,
        model: cfg.model,
        eta: cfg.initial_value(),
        seed_key: key,
    })
}

/// Simulates one replicate with noise drawn from `key`.
pub fn simulate(cfg: &SimConfig, key: SeedKey) -> Result<FieldSeries> {
    let scheme = Scheme::new(cfg)?;
    let src = NoiseSource::new(&cfg.measure, &cfg.grid, key)?;
    collect(cfg, &scheme, key, |k, out| src.fill_step(k, out))
}

/// Simulates one replicate driven by a given noise realization.
pub fn simulate_with_noise(cfg: &SimConfig, noise: &NoiseField) -> Result<FieldSeries> {
    if noise.grid != cfg.grid {
        return Err(Error::GridMismatch(
            "noise field was sampled on a different grid".into(),
        ));
    }
    let scheme = Scheme::new(cfg)?;
    let per = cfg.grid.spatial_len();
    collect(cfg, &scheme, noise.seed_key, |k, out| {
        out.copy_from_slice(&noise.increments[k * per..(k + 1) * per])
    })
}

/// Solution of the additive equation with zero initial condition.
pub fn simulate_linear(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    measure: &LevyMeasure,
    grid: &SimGrid,
    key: SeedKey,
) -> Result<FieldSeries> {
    let cfg = SimConfig {
        op: *op,
        kernel: kernel.clone(),
        measure: measure.clone(),
        model: Model::Linear,
        eta: 0.0,
        grid: grid.clone(),
    };
    simulate(&cfg, key)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_nonlinear(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    measure: &LevyMeasure,
    sigma: ScalarFn,
    drift: ScalarFn,
    eta: f64,
    grid: &SimGrid,
    key: SeedKey,
) -> Result<FieldSeries> {
    let cfg = SimConfig {
        op: *op,
        kernel: kernel.clone(),
        measure: measure.clone(),
        model: Model::Nonlinear { sigma, drift },
        eta,
        grid: grid.clone(),
    };
    simulate(&cfg, key)
}

#[allow(clippy::too_many_arguments)]
pub fn simulate_anderson(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    measure: &LevyMeasure,
    lambda: f64,
    eta: f64,
    grid: &SimGrid,
    key: SeedKey,
) -> Result<FieldSeries> {
    let cfg = SimConfig {
        op: *op,
        kernel: kernel.clone(),
        measure: measure.clone(),
        model: Model::Anderson { lambda },
        eta,
        grid: grid.clone(),
    };
    simulate(&cfg, key)
}

/// Outcome of the Picard check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PicardReport {
    /// `sup_{t,x} mean_r |u_{n+1} - u_n|²` for `n = 0, 1, …`.
    pub distances: Vec<f64>,
    /// `sup|u_last - u| / sup|u|` against the direct scheme on the same noise.
    pub final_gap: f64,
    pub replicates: usize,
}

/// Runs Picard iterations `u_0 ≡ η`, `u_{n+1} = η + ∫G σ(u_n) dX + ∫G b(u_n)`
/// on frozen noise realizations and measures successive distances.
pub fn picard_validate(
    cfg: &SimConfig,
    seed: u64,
    iterations: usize,
    replicates: usize,
) -> Result<PicardReport> {
    if iterations == 0 || replicates == 0 {
        return invalid("Picard check needs at least one iteration and one replicate");
    }
    let mut full = cfg.clone();
    full.grid.record_every = 1;
    let scheme = Scheme::new(&full)?;
    let per = full.grid.spatial_len();
    let steps = full.grid.steps();
    let eta = full.initial_value();
    let runs: Vec<Result<(Vec<Vec<f64>>, f64)>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let key = SeedKey::new(seed, r as u64);
            let noise = sample_white_noise(&full.measure, &full.grid, key)?;
            let mut prev = vec![eta; per * (steps + 1)];
            let mut sq = Vec::with_capacity(iterations);
            for _ in 0..iterations {
                let mut next = vec![eta; per * (steps + 1)];
                let mut st = scheme.state();
                for k in 0..steps {
                    scheme.step(
                        &mut st,
                        &noise.increments[k * per..(k + 1) * per],
                        &prev[k * per..(k + 1) * per],
                    );
                    scheme.check(&st, k + 1)?;
                    for (o, w) in next[(k + 1) * per..(k + 2) * per].iter_mut().zip(&st.w) {
                        *o = eta + w;
                    }
                }
                sq.push(
                    next.iter()
                        .zip(&prev)
                        .map(|(a, b)| (a - b) * (a - b))
                        .collect::<Vec<f64>>(),
                );
                prev = next;
            }
            let direct = simulate_with_noise(&full, &noise)?;
            let gap = direct
                .values
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            let scale = direct.values.iter().map(|a| a.abs()).fold(0.0, f64::max);
            Ok((sq, if scale > 0.0 { gap / scale } else { gap }))
        })
        .collect();
    let mut sums = vec![vec![0.0; per * (steps + 1)]; iterations];
    let mut final_gap: f64 = 0.0;
    for run in runs {
        let (sq, gap) = run?;
        for (s, q) in sums.iter_mut().zip(sq) {
            s.iter_mut().zip(q).for_each(|(a, b)| *a += b);
        }
        final_gap = final_gap.max(gap);
    }
    let distances = sums
        .iter()
        .map(|s| s.iter().fold(0.0, |m: f64, v| m.max(v / replicates as f64)))
        .collect();
    Ok(PicardReport {
        distances,
        final_gap,
        replicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::LevyMeasure;

    fn base(model: Model, eta: f64) -> SimConfig {
        SimConfig {
            op: OperatorSpec::heat(1),
            kernel: KernelSpec::heat(1, 1.0),
            measure: LevyMeasure::Gamma {
                alpha: 1.0,
                beta: 1.0,
            },
            model,
            eta,
            grid: SimGrid::new(1, 4.0, 64, 0.01, 0.3).unwrap(),
        }
    }

    #[test]
    fn zero_sigma_is_constant() {
        let cfg = base(
            Model::Nonlinear {
                sigma: ScalarFn::Zero,
                drift: ScalarFn::Zero,
            },
            1.7,
        );
        let s = simulate(&cfg, SeedKey::new(1, 0)).unwrap();
        assert!(s.values.iter().all(|&v| v == 1.7));
        let cfg = base(Model::Anderson { lambda: 0.0 }, -0.4);
        assert!(simulate(&cfg, SeedKey::new(1, 0))
            .unwrap()
            .values
            .iter()
            .all(|&v| v == -0.4));
    }

    #[test]
    fn unit_sigma_is_shifted_linear() {
        for op in [OperatorSpec::heat(1), OperatorSpec::wave(1)] {
            let mut lin = base(Model::Linear, 0.0);
            lin.op = op;
            let mut non = base(
                Model::Nonlinear {
                    sigma: ScalarFn::Constant { value: 1.0 },
                    drift: ScalarFn::Zero,
                },
                2.5,
            );
            non.op = op;
            let a = simulate(&lin, SeedKey::new(4, 2)).unwrap();
            let b = simulate(&non, SeedKey::new(4, 2)).unwrap();
            for (x, y) in a.values.iter().zip(&b.values) {
                assert!((x + 2.5 - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn anderson_is_scaled_linear_sigma() {
        let a = simulate(
            &base(Model::Anderson { lambda: 0.8 }, 1.0),
            SeedKey::new(9, 0),
        )
        .unwrap();
        let b = simulate(
            &base(
                Model::Nonlinear {
                    sigma: ScalarFn::ScaledLinear { scale: 0.8 },
                    drift: ScalarFn::Zero,
                },
                1.0,
            ),
            SeedKey::new(9, 0),
        )
        .unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn causality() {
        let cfg = base(Model::Anderson { lambda: 1.0 }, 1.0);
        let noise = sample_white_noise(&cfg.measure, &cfg.grid, SeedKey::new(5, 0)).unwrap();
        let mut changed = noise.clone();
        let per = cfg.grid.spatial_len();
        let k0 = 17;
        for v in changed.increments[k0 * per..].iter_mut() {
            *v = -*v * 3.0;
        }
        let a = simulate_with_noise(&cfg, &noise).unwrap();
        let b = simulate_with_noise(&cfg, &changed).unwrap();
        let upto = a.steps.iter().position(|&k| k > k0).unwrap();
        assert_eq!(a.values[..upto * per], b.values[..upto * per]);
        assert_ne!(a.values[upto * per..], b.values[upto * per..]);
    }

    #[test]
    fn drift_only_matches_ode() {
        // σ = 0, b(u) = -u: spatially constant solution decays like e^{-t}
        let cfg = base(
            Model::Nonlinear {
                sigma: ScalarFn::Zero,
                drift: ScalarFn::ScaledLinear { scale: -1.0 },
            },
            1.0,
        );
        let s = simulate(&cfg, SeedKey::new(0, 0)).unwrap();
        let last = s.slice(s.steps.len() - 1);
        let t = *s.times.last().unwrap();
        assert!((last[10] - (-t).exp()).abs() < 5e-3);
        // wave: u'' = -u started at rest gives cos t
        let mut w = cfg.clone();
        w.op = OperatorSpec::wave(1);
        let s = simulate(&w, SeedKey::new(0, 0)).unwrap();
        assert!((s.slice(s.steps.len() - 1)[3] - t.cos()).abs() < 5e-3);
    }

    #[test]
    fn blow_up_aborts() {
        let mut cfg = base(
            Model::Nonlinear {
                sigma: ScalarFn::Zero,
                drift: ScalarFn::ScaledLinear { scale: 400.0 },
            },
            1.0,
        );
        cfg.grid = SimGrid::new(1, 4.0, 16, 0.01, 1.0).unwrap();
        match simulate(&cfg, SeedKey::new(0, 0)) {
            Err(Error::NumericalAbort { step, .. }) => assert!(step > 1 && step < 100),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn picard_behaviour() {
        let zero = base(
            Model::Nonlinear {
                sigma: ScalarFn::Zero,
                drift: ScalarFn::Zero,
            },
            1.0,
        );
        let r = picard_validate(&zero, 3, 4, 2).unwrap();
        assert!(r.distances.iter().all(|&d| d == 0.0));
        let mut cfg = base(
            Model::Nonlinear {
                sigma: ScalarFn::SinBounded {
                    amplitude: 1.0,
                    frequency: 1.0,
                },
                drift: ScalarFn::ScaledLinear { scale: 0.5 },
            },
            0.5,
        );
        cfg.grid = SimGrid::new(1, 4.0, 64, 0.01, 0.1).unwrap();
        let r = picard_validate(&cfg, 3, 8, 4).unwrap();
        for w in r.distances[2..].windows(2) {
            assert!(w[1] <= w[0]);
        }
        assert!(r.final_gap < 0.05, "{:?}", r);
    }

    #[test]
    fn wave_two_dimensions_runs() {
        let mut cfg = base(Model::Anderson { lambda: 0.5 }, 1.0);
        cfg.op = OperatorSpec::wave(2);
        cfg.kernel = KernelSpec::riesz(2, 1.0);
        cfg.grid = SimGrid::new(2, 4.0, 32, 0.02, 0.2).unwrap();
        let s = simulate(&cfg, SeedKey::new(2, 1)).unwrap();
        assert!(s.values.iter().all(|v| v.is_finite()));
        cfg.op = OperatorSpec::wave(3);
        cfg.kernel = KernelSpec::riesz(3, 2.0);
        cfg.grid = SimGrid::new(3, 4.0, 8, 0.02, 0.2).unwrap();
        assert!(matches!(
            simulate(&cfg, SeedKey::new(2, 1)),
            Err(Error::Unsupported(_))
        ));
    }
}
