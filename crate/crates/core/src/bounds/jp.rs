//! `J_p(t) = ‖G_t * κ‖²_{L^p}`, its theoretical envelopes, `M_p(t)` and the
//! moment bound for the linear equation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::green::{OperatorKind, OperatorSpec};
use crate::grid::SpatialGrid;
use crate::kernels::{circular_convolution, KernelFamily, KernelSpec};
use crate::noise::{moment_mp, rosenthal_constant, LevyMeasure};
use crate::quad::{gauss_kronrod_panels, half_line, sphere_area, tanh_sinh, Quad};
use crate::stats::pairwise_sum;

const PI: f64 = std::f64::consts::PI;

/// Grid used when `J_p` has to be computed in physical space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Resolution {
    /// Points per axis; `None` picks a default by dimension.
    pub points: Option<usize>,
    /// Half width of the box in units of the larger of the Green and kernel
    /// length scales.
    pub width: f64,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution {
            points: None,
            width: 16.0,
        }
    }
}

impl Resolution {
    pub fn points_for(&self, dim: usize) -> usize {
        self.points.unwrap_or(match dim {
            1 => 1 << 14,
            2 => 512,
            _ => 64,
        })
    }
}

/// Checks shared by every functional: matching dimensions and Dalang.
pub(crate) fn check_pair(op: &OperatorSpec, kernel: &KernelSpec) -> Result<()> {
    op.validate()?;
    kernel.validate()?;
    if op.dim != kernel.dim {
        return Err(Error::GridMismatch(format!(
            "operator d = {} but kernel d = {}",
            op.dim, kernel.dim
        )));
    }
    if !kernel.dalang_condition().holds {
        return Err(Error::DalangFailed(format!(
            "{:?} in d = {}",
            kernel.family, kernel.dim
        )));
    }
    Ok(())
}

/// A one-factor product is just its factor.
pub(crate) fn isotropic_view(kernel: &KernelSpec) -> Option<KernelSpec> {
    match &kernel.family {
        KernelFamily::Product { factors } if factors.len() == 1 => Some(KernelSpec {
            dim: 1,
            family: factors[0].clone(),
        }),
        KernelFamily::Product { .. } => None,
        _ => Some(kernel.clone()),
    }
}

/// Radial integral `∫ h(|ξ|) μ(dξ)` for an oscillating weight: panels of a
/// quarter period up to a cutoff, then the non-oscillating mean `h_mean`.
fn oscillatory_mu_integral<H, M>(kernel: &KernelSpec, t: f64, h: H, h_mean: M) -> f64
where
    H: Fn(f64) -> f64,
    M: Fn(f64) -> f64,
{
    let d = kernel.dim;
    let g = |r: f64| kernel.fourier_sq_radial(r).unwrap();
    let decay = match kernel.family {
        KernelFamily::Heat { alpha } => (80.0 / alpha).sqrt(),
        KernelFamily::Poisson { alpha } => 40.0 / alpha,
        _ => f64::INFINITY,
    };
    let quarter = 0.5 * PI / t;
    let r_cut = decay
        .min(8000.0 * quarter)
        .max(200.0 * quarter.min(decay / 200.0));
    let panels = ((r_cut / quarter).ceil() as usize).clamp(1, 8000);
    let prof = |r: f64| {
        let gr = g(r);
        if gr == 0.0 || r == 0.0 && d > 1 {
            0.0
        } else {
            r.powi(d as i32 - 1) * gr * h(r)
        }
    };
    let head = gauss_kronrod_panels(prof, 0.0, r_cut, panels, 0.0, 1e-11).value;
    let tail = if r_cut >= decay {
        0.0
    } else {
        half_line(
            |u| (r_cut + u).powi(d as i32 - 1) * g(r_cut + u) * h_mean(r_cut + u),
            r_cut,
            1e-11,
        )
        .value
    };
    (2.0 * PI).powi(-(d as i32)) * sphere_area(d) * (head + tail)
}

/// `J_2(t) = ∫ |FG_t(ξ)|² μ(dξ)` by quadrature in frequency space.
///
/// Returns `None` for combinations that need the physical-space route
/// (wave operator with a genuine product kernel).
pub fn j2_spectral(op: &OperatorSpec, kernel: &KernelSpec, t: f64) -> Option<f64> {
    if t < 0.0 {
        return Some(0.0);
    }
    match (op.kind, isotropic_view(kernel)) {
        (OperatorKind::Heat, _) => Some(kernel.mu_gaussian(t)),
        (OperatorKind::Wave, Some(k)) => {
            if t == 0.0 {
                return Some(0.0);
            }
            Some(oscillatory_mu_integral(
                &k,
                t,
                |r| op.fourier_sq_radial(t, r),
                |r| 0.5 / (r * r),
            ))
        }
        (OperatorKind::Wave, None) => None,
    }
}

/// `M_2(t) = ∫_0^t J_2(s) ds` by quadrature in frequency space.
pub fn m2_spectral(op: &OperatorSpec, kernel: &KernelSpec, t: f64) -> Option<f64> {
    if t <= 0.0 {
        return Some(0.0);
    }
    match (op.kind, isotropic_view(kernel)) {
        (OperatorKind::Heat, Some(k)) => {
            let scale = t.sqrt().recip().min(1.0);
            Some(k.mu_radial_integral_scaled(
                |r| {
                    let x = t * r * r;
                    if x < 1e-8 {
                        t * (1.0 - 0.5 * x)
                    } else {
                        -(-x).exp_m1() / (r * r)
                    }
                },
                scale,
                1e-11,
            ))
        }
        (OperatorKind::Heat, None) => {
            Some(tanh_sinh(|s| kernel.mu_gaussian(s), 0.0, t, 1e-10).value)
        }
        (OperatorKind::Wave, Some(k)) => Some(oscillatory_mu_integral(
            &k,
            t,
            |r| {
                // ∫_0^t sin²(sr)/r² ds = (2tr - sin 2tr)/(4r³)
                let u = 2.0 * t * r;
                if u < 1e-3 {
                    t * t * t / 3.0 * (1.0 - u * u / 20.0)
                } else {
                    (u - u.sin()) / (4.0 * r * r * r)
                }
            },
            |r| 0.5 * t / (r * r),
        )),
        (OperatorKind::Wave, None) => None,
    }
}

/// `M_2(t)` with the frequencies cut off at `cutoff`: the ball `|ξ| ≤ R` for
/// isotropic kernels, the cube `max|ξ_j| ≤ R` for products (heat only). A
/// grid of spacing `h` resolves frequencies up to `π/h`, so growth in `R` is
/// growth under grid refinement. It stays bounded iff the Dalang condition
/// holds. No Dalang check is made.
pub fn m2_truncated(op: &OperatorSpec, kernel: &KernelSpec, t: f64, cutoff: f64) -> Result<f64> {
    op.validate()?;
    kernel.validate()?;
    if op.dim != kernel.dim {
        return Err(Error::GridMismatch(format!(
            "operator d = {} but kernel d = {}",
            op.dim, kernel.dim
        )));
    }
    if !(t > 0.0 && cutoff > 0.0) {
        return invalid("truncated M_2 needs t > 0 and a positive cutoff");
    }
    match (op.kind, isotropic_view(kernel)) {
        (kind, Some(k)) => {
            let h = |r: f64| {
                if r > cutoff {
                    return 0.0;
                }
                match kind {
                    OperatorKind::Heat => {
                        let x = t * r * r;
                        if x < 1e-8 {
                            t * (1.0 - 0.5 * x)
                        } else {
                            -(-x).exp_m1() / (r * r)
                        }
                    }
                    OperatorKind::Wave => {
                        let u = 2.0 * t * r;
                        if u < 1e-3 {
                            t * t * t / 3.0 * (1.0 - u * u / 20.0)
                        } else {
                            (u - u.sin()) / (4.0 * r * r * r)
                        }
                    }
                }
            };
            Ok(k.mu_radial_integral_scaled(h, cutoff, 1e-10))
        }
        (OperatorKind::Heat, None) => {
            let KernelFamily::Product { factors } = &kernel.family else {
                unreachable!()
            };
            let one_axis = |j: usize, s: f64| {
                let g = |x: f64| (-s * x * x).exp() * kernel.factor_fourier_sq(j, x);
                tanh_sinh(g, 0.0, cutoff, 1e-10).value / PI
            };
            let j2 = |s: f64| (0..factors.len()).map(|j| one_axis(j, s)).product::<f64>();
            Ok(tanh_sinh(j2, 0.0, t, 1e-8).value)
        }
        (OperatorKind::Wave, None) => Err(Error::Unsupported(
            "truncated M_2 for wave with a product kernel".into(),
        )),
    }
}

/// Half width of the physical box used for `G_t * κ`.
fn box_half_width(op: &OperatorSpec, kernel: &KernelSpec, t: f64, res: &Resolution) -> f64 {
    let ell = kernel.length_scale();
    let s = op.length_scale(t);
    if ell == 0.0 {
        return res.width * s;
    }
    match op.kind {
        OperatorKind::Heat => res.width * s.max(ell),
        OperatorKind::Wave => 1.25 * t + res.width * ell,
    }
}

/// `J_p(t)` from cell-integrated `G_t` and `κ` on a periodic box.
pub fn j_p_grid(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    t: f64,
    p: f64,
    res: &Resolution,
) -> Result<f64> {
    if op.kind == OperatorKind::Wave && op.dim > 2 {
        return Err(Error::Unsupported(
            "pointwise wave kernel needs d <= 2".into(),
        ));
    }
    if t <= 0.0 {
        return Ok(0.0);
    }
    let d = op.dim;
    let grid = SpatialGrid::new(d, box_half_width(op, kernel, t, res), res.points_for(d));
    let gw = op.cell_weights(t, &grid)?;
    let kw = kernel.cell_weights(&grid);
    let conv = circular_convolution(&gw, &kw, &grid);
    let area = grid.cell_area();
    let terms: Vec<f64> = conv
        .iter()
        .map(|c| (c.abs() / area).powf(p) * area)
        .collect();
    Ok(pairwise_sum(&terms).powf(2.0 / p))
}

/// `J_p(t) = ‖G_t * κ‖²_{L^p}`.
///
/// `p = 2` uses the Plancherel form when available; otherwise the
/// convolution is formed on a grid and its `L^p` norm summed.
pub fn j_p_numeric(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    t: f64,
    p: f64,
    res: &Resolution,
) -> Result<f64> {
    check_pair(op, kernel)?;
    if !(p >= 2.0) {
        return invalid(format!("J_p needs p >= 2, got {p}"));
    }
    if !(t >= 0.0) {
        return invalid("J_p needs t >= 0");
    }
    if p == 2.0 {
        if let Some(v) = j2_spectral(op, kernel, t) {
            return Ok(v);
        }
    }
    j_p_grid(op, kernel, t, p, res)
}

/// `‖G_t‖²_{L^q}` by quadrature of the pointwise Green function;
/// `+inf` when `G_t ∉ L^q`.
pub fn green_lq_norm_sq(op: &OperatorSpec, t: f64, q: f64) -> Result<f64> {
    if !(q >= 1.0) || t <= 0.0 {
        return invalid("Green norm needs q >= 1 and t > 0");
    }
    let d = op.dim;
    let radial = |r: f64| {
        let mut x = vec![0.0; d];
        x[0] = r;
        op.green_value(t, &x).unwrap_or(0.0)
    };
    let integral = match (op.kind, d) {
        (OperatorKind::Heat, _) => {
            let s = t.sqrt();
            sphere_area(d)
                * gauss_kronrod_panels(
                    |r| r.powi(d as i32 - 1) * radial(r).powf(q),
                    0.0,
                    40.0 * s,
                    40,
                    0.0,
                    1e-12,
                )
                .value
        }
        (OperatorKind::Wave, 1) => {
            2.0 * gauss_kronrod_panels(|r| radial(r).powf(q), 0.0, t, 1, 0.0, 1e-13).value
        }
        (OperatorKind::Wave, 2) => {
            if q >= 2.0 {
                return Ok(f64::INFINITY);
            }
            2.0 * PI * tanh_sinh(|r| r * radial(r).powf(q), 0.0, t, 1e-12).value
        }
        (OperatorKind::Wave, d) => {
            return Err(Error::Unsupported(format!(
                "wave Green function is a measure in d = {d}"
            )))
        }
    };
    Ok(integral.powf(2.0 / q))
}

/// Which estimate produced a [`JpBound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundBranch {
    /// `J_p ≤ ∫|FG_t|² μ_p(dξ)` with an explicit `μ_p` (heat kernel).
    SpectralMeasure,
    /// Hardy-Littlewood-Sobolev: `J_p ≤ C ‖G_t‖²_{L^q}`, `1/q = 1/p + α/2d`.
    HardyLittlewoodSobolev,
    /// Bessel potential estimate: `J_p ≤ C ‖G_t‖²_{L^p}`.
    BesselPotential,
}

/// Envelope `J_p(t) ≤ value ∝ t^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JpBound {
    pub branch: BoundBranch,
    pub exponent: f64,
    /// Explicit bound value, or `+inf` when the constant is unknown.
    #[serde(with = "crate::stats::ext_real")]
    pub value: f64,
    pub explicit: bool,
    /// `‖G_t‖²_{L^q}` for the norm-based branches (the known factor).
    pub green_norm_sq: Option<f64>,
}

/// Constant `C` in `K_p = C H_{d,α}` for the heat kernel `κ = H_{d,α/2}`,
/// so that `μ_p = C μ`.
pub fn heat_kernel_envelope_constant(d: usize, alpha: f64, p: f64) -> f64 {
    let d = d as f64;
    (PI * alpha).powf(-d)
        * (2.0 * PI * alpha / p).powf(2.0 * d / p)
        * (2.0 * PI * alpha).powf(d / 2.0)
        * (4.0 * PI * alpha / p).powf(-d / p)
}

/// Theoretical envelope of `J_p(t)` for the covered (operator, kernel) pairs.
pub fn j_p_bound(op: &OperatorSpec, kernel: &KernelSpec, t: f64, p: f64) -> Result<JpBound> {
    check_pair(op, kernel)?;
    if !(p >= 2.0) || !(t > 0.0) {
        return invalid("envelope needs p >= 2 and t > 0");
    }
    let d = op.dim;
    let df = d as f64;
    let uncovered = |why: &str| Err(Error::Unsupported(format!("no envelope for {why}")));
    match (&kernel.family, op.kind) {
        (KernelFamily::Heat { alpha }, kind) => {
            let c = heat_kernel_envelope_constant(d, *alpha, p);
            let exponent = if kind == OperatorKind::Heat { 0.0 } else { 2.0 };
            let j2 = j2_spectral(op, kernel, t).expect("isotropic kernel");
            Ok(JpBound {
                branch: BoundBranch::SpectralMeasure,
                exponent,
                value: c * j2,
                explicit: true,
                green_norm_sq: None,
            })
        }
        (KernelFamily::Riesz { alpha }, kind) => {
            let inv_q = 1.0 / p + alpha / (2.0 * df);
            let q = 1.0 / inv_q;
            let exponent = match (kind, d) {
                (OperatorKind::Heat, _) => df * (inv_q - 1.0),
                (OperatorKind::Wave, 1) => 2.0 / p + alpha,
                (OperatorKind::Wave, 2) => {
                    if q >= 2.0 {
                        return uncovered("wave d = 2 with Riesz kernel and p >= 4/(2-α)");
                    }
                    4.0 / p + alpha - 2.0
                }
                _ => return uncovered("wave d = 3 with Riesz kernel"),
            };
            Ok(JpBound {
                branch: BoundBranch::HardyLittlewoodSobolev,
                exponent,
                value: f64::INFINITY,
                explicit: false,
                green_norm_sq: Some(green_lq_norm_sq(op, t, q)?),
            })
        }
        (KernelFamily::Bessel { .. }, kind) => {
            let exponent = match (kind, d) {
                (OperatorKind::Heat, _) => df * (1.0 - p) / p,
                (OperatorKind::Wave, 1) => 2.0 / p,
                _ => return uncovered("wave d >= 2 with Bessel kernel"),
            };
            Ok(JpBound {
                branch: BoundBranch::BesselPotential,
                exponent,
                value: f64::INFINITY,
                explicit: false,
                green_norm_sq: Some(green_lq_norm_sq(op, t, p)?),
            })
        }
        _ => uncovered("Poisson or product kernels"),
    }
}

/// Whether `M_p(t) < ∞` is guaranteed, following the admissible ranges of
/// the kernel examples; `Err(Divergent)` otherwise.
pub fn check_moment_range(op: &OperatorSpec, kernel: &KernelSpec, p: f64) -> Result<()> {
    if p == 2.0 {
        return Ok(());
    }
    let d = op.dim as f64;
    let diverge = |msg: String| Err(Error::Divergent(msg));
    match (&kernel.family, op.kind, op.dim) {
        (KernelFamily::Heat { .. }, OperatorKind::Heat, _) => Ok(()),
        (KernelFamily::Heat { .. }, OperatorKind::Wave, 1 | 2) => Ok(()),
        (KernelFamily::Riesz { alpha }, OperatorKind::Heat, _) => {
            let lim = (2.0 * d + 4.0) / (2.0 * d - alpha);
            if p < lim {
                Ok(())
            } else {
                diverge(format!("heat + Riesz needs p < {lim:.6}, got p = {p}"))
            }
        }
        (KernelFamily::Bessel { .. }, OperatorKind::Heat, _) => {
            let lim = 1.0 + 2.0 / d;
            if p < lim {
                Ok(())
            } else {
                diverge(format!("heat + Bessel needs p < {lim:.6}, got p = {p}"))
            }
        }
        (KernelFamily::Riesz { .. }, OperatorKind::Wave, 1) => Ok(()),
        (KernelFamily::Riesz { alpha }, OperatorKind::Wave, 2) => {
            let lim = 4.0 / (2.0 - alpha);
            if p < lim {
                Ok(())
            } else {
                diverge(format!(
                    "wave d = 2 + Riesz needs p < {lim:.6}, got p = {p}"
                ))
            }
        }
        (KernelFamily::Bessel { .. }, OperatorKind::Wave, 1) => Ok(()),
        (KernelFamily::Poisson { .. }, OperatorKind::Heat, _) => Ok(()),
        (KernelFamily::Poisson { .. }, OperatorKind::Wave, 1 | 2) => Ok(()),
        (KernelFamily::Product { factors }, kind, dim)
            if (kind == OperatorKind::Heat || dim <= 2)
                && factors.iter().all(|f| {
                    matches!(f, KernelFamily::Heat { .. } | KernelFamily::Poisson { .. })
                }) =>
        {
            // a bounded integrable κ keeps J_p bounded near t = 0
            Ok(())
        }
        _ => diverge(format!(
            "no finite-moment guarantee for p = {p} with this operator and kernel"
        )),
    }
}

/// Exact exponent `e` with `J_p(t) = J_p(1) t^e` when the kernel is
/// homogeneous (Riesz, or a product of Riesz factors).
///
/// `G_t(x) = t^{m-ds} g(x/t^s)` and `κ(λx) = λ^{-γ} κ(x)` give
/// `G_t * κ = t^{m-sγ} (g * κ)(x/t^s)`, so `e = 2(m - sγ) + 2sd/p`.
pub fn self_similar_exponent(op: &OperatorSpec, kernel: &KernelSpec, p: f64) -> Option<f64> {
    let d = kernel.dim as f64;
    let gamma = match &kernel.family {
        KernelFamily::Riesz { alpha } => d - alpha / 2.0,
        KernelFamily::Product { factors } => factors
            .iter()
            .map(|f| match f {
                KernelFamily::Riesz { alpha } => Some(1.0 - alpha / 2.0),
                _ => None,
            })
            .sum::<Option<f64>>()?,
        _ => return None,
    };
    let (m, s) = match op.kind {
        OperatorKind::Heat => (0.0, 0.5),
        OperatorKind::Wave => (1.0, 1.0),
    };
    Some(2.0 * (m - s * gamma) + 2.0 * s * d / p)
}

/// Tabulated `t -> J_p(t)` on a logarithmic grid, interpolated linearly in
/// log-log coordinates and extrapolated as power laws at both ends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JpProfile {
    pub p: f64,
    pub log_t: Vec<f64>,
    pub log_j: Vec<f64>,
}

impl JpProfile {
    pub fn build(
        op: &OperatorSpec,
        kernel: &KernelSpec,
        p: f64,
        res: &Resolution,
        t_lo: f64,
        t_hi: f64,
        per_decade: usize,
    ) -> Result<Self> {
        check_pair(op, kernel)?;
        if !(t_lo > 0.0 && t_hi > t_lo) {
            return invalid("profile needs 0 < t_lo < t_hi");
        }
        let decades = (t_hi / t_lo).log10();
        let n = ((decades * per_decade as f64).ceil() as usize).max(2) + 1;
        let log_t: Vec<f64> = (0..n)
            .map(|i| t_lo.ln() + (t_hi / t_lo).ln() * i as f64 / (n - 1) as f64)
            .collect();
        let values: Vec<Result<f64>> = match self_similar_exponent(op, kernel, p) {
            Some(e) => {
                let lt_ref = 0.5 * (log_t[0] + log_t[n - 1]);
                let j_ref = j_p_numeric(op, kernel, lt_ref.exp(), p, res)?;
                log_t
                    .iter()
                    .map(|&lt| Ok(j_ref * (e * (lt - lt_ref)).exp()))
                    .collect()
            }
            None => log_t
                .par_iter()
                .map(|&lt| j_p_numeric(op, kernel, lt.exp(), p, res))
                .collect(),
        };
        let mut log_j = Vec::with_capacity(n);
        for v in values {
            let v = v?;
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Divergent(format!("J_{p} evaluated to {v}")));
            }
            log_j.push(v.ln());
        }
        Ok(JpProfile { p, log_t, log_j })
    }

    fn slope(&self, i: usize) -> f64 {
        (self.log_j[i + 1] - self.log_j[i]) / (self.log_t[i + 1] - self.log_t[i])
    }

    /// Power-law exponent of `J_p` below the first node.
    pub fn head_exponent(&self) -> f64 {
        self.slope(0)
    }

    /// Power-law exponent of `J_p` above the last node.
    pub fn tail_exponent(&self) -> f64 {
        self.slope(self.log_t.len() - 2)
    }

    pub fn value(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return if self.head_exponent() < 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
        }
        let lt = t.ln();
        let n = self.log_t.len();
        let i = match self.log_t.partition_point(|&x| x <= lt) {
            0 => 0,
            k if k >= n => n - 2,
            k => k - 1,
        };
        (self.log_j[i] + self.slope(i) * (lt - self.log_t[i])).exp()
    }

    pub fn t_min(&self) -> f64 {
        self.log_t[0].exp()
    }

    pub fn t_max(&self) -> f64 {
        self.log_t[self.log_t.len() - 1].exp()
    }

    /// `∫_0^b e^{-ct} J_p(t)^q dt` (with `b = inf` allowed when `c > 0`).
    ///
    /// `+inf` when the power-law head is not integrable.
    pub fn weighted_integral(&self, q: f64, c: f64, b: f64) -> Quad {
        if b <= 0.0 {
            return Quad {
                value: 0.0,
                error: 0.0,
            };
        }
        if self.head_exponent() * q <= -1.0 {
            return Quad {
                value: f64::INFINITY,
                error: 0.0,
            };
        }
        if b.is_infinite() && c <= 0.0 {
            return Quad {
                value: f64::INFINITY,
                error: 0.0,
            };
        }
        let f = |t: f64| (-c * t).exp() * self.value(t).powf(q);
        let (t0, t1) = (self.t_min(), self.t_max());
        let head = tanh_sinh(f, 0.0, b.min(t0), 1e-10);
        let mut total = head;
        if b > t0 {
            let hi = b.min(t1);
            let g = |u: f64| {
                let t = u.exp();
                f(t) * t
            };
            let panels = self.log_t.len() - 1;
            let mid = gauss_kronrod_panels(g, t0.ln(), hi.ln(), panels, 0.0, 1e-10);
            total.value += mid.value;
            total.error += mid.error;
        }
        if b > t1 {
            let tail = if b.is_infinite() {
                half_line(|v| f(t1 + v), (1.0 / c).min(t1).max(1e-300), 1e-10)
            } else {
                let g = |u: f64| {
                    let t = u.exp();
                    f(t) * t
                };
                gauss_kronrod_panels(g, t1.ln(), b.ln(), 8, 0.0, 1e-10)
            };
            total.value += tail.value;
            total.error += tail.error;
        }
        total
    }
}

/// `M_p(t) = ∫_0^t J_p(s)^{p/2} ds` at each time in `times`.
pub fn m_p_series(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    p: f64,
    times: &[f64],
    res: &Resolution,
) -> Result<Vec<f64>> {
    check_pair(op, kernel)?;
    check_moment_range(op, kernel, p)?;
    if times.iter().any(|t| !(*t >= 0.0)) {
        return invalid("M_p needs t >= 0");
    }
    if p == 2.0 {
        if let Some(first) = times.iter().find(|t| **t > 0.0) {
            if m2_spectral(op, kernel, *first).is_some() {
                return Ok(times
                    .iter()
                    .map(|&t| m2_spectral(op, kernel, t).unwrap())
                    .collect());
            }
        }
    }
    let positive: Vec<f64> = times.iter().copied().filter(|t| *t > 0.0).collect();
    if positive.is_empty() {
        return Ok(vec![0.0; times.len()]);
    }
    let lo = positive.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = positive.iter().copied().fold(0.0, f64::max);
    let profile = JpProfile::build(op, kernel, p, res, lo * 1e-7, hi.max(lo * 1.0001), 8)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let v = profile.weighted_integral(p / 2.0, 0.0, t).value;
        if !v.is_finite() {
            return Err(Error::Divergent(format!(
                "J_{p}^(p/2) is not integrable at 0 (head exponent {:.4})",
                profile.head_exponent() * p / 2.0
            )));
        }
        out.push(v);
    }
    Ok(out)
}

/// `M_p(t)`; zero at `t = 0`.
pub fn m_p(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    t: f64,
    p: f64,
    res: &Resolution,
) -> Result<f64> {
    Ok(m_p_series(op, kernel, p, &[t], res)?[0])
}

/// Upper bounds on `E|v(t,x)|^p` for the linear equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearBound {
    /// `C_p {M_2^{p/2} + M_p}`.
    pub value: f64,
    /// `C_p max(M_2^{p/2-1}, 1) (M_2 + M_p)`, the variant with a
    /// time-dependent constant.
    pub time_dependent: f64,
    pub m2_time: f64,
    pub mp_time: f64,
    pub c_p: f64,
}

impl LinearBound {
    pub fn tighter(&self) -> f64 {
        self.value.min(self.time_dependent)
    }
}

/// The p-th moment bound for the linear solution at each time.
pub fn linear_moment_bound_series(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    measure: &LevyMeasure,
    p: f64,
    times: &[f64],
    bp: f64,
    res: &Resolution,
) -> Result<Vec<LinearBound>> {
    measure.validate()?;
    let m2 = measure.m2();
    let c_p = rosenthal_constant(p, m2, moment_mp(measure, p), bp)?;
    let big_m2 = m_p_series(op, kernel, 2.0, times, res)?;
    let big_mp = if p == 2.0 {
        big_m2.clone()
    } else {
        m_p_series(op, kernel, p, times, res)?
    };
    Ok(big_m2
        .iter()
        .zip(&big_mp)
        .map(|(&a, &b)| LinearBound {
            value: c_p * (a.powf(p / 2.0) + b),
            time_dependent: c_p * a.powf(p / 2.0 - 1.0).max(1.0) * (a + b),
            m2_time: a,
            mp_time: b,
            c_p,
        })
        .collect())
}

pub fn linear_moment_bound(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    measure: &LevyMeasure,
    p: f64,
    t: f64,
    bp: f64,
    res: &Resolution,
) -> Result<LinearBound> {
    Ok(linear_moment_bound_series(op, kernel, measure, p, &[t], bp, res)?[0])
}
