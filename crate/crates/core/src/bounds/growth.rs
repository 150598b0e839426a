//! Exponential growth: `A_{β,p}`, the contraction threshold `β*`, the boxed
//! spectral integral `Υ_a(β)`, the intermittency witness search and the
//! closed-form second-moment Lyapunov exponents.

use serde::{Deserialize, Serialize};

use super::jp::{check_moment_range, check_pair, isotropic_view, JpProfile, Resolution};
use crate::error::{invalid, Error, Result};
use crate::green::{OperatorKind, OperatorSpec};
use crate::kernels::KernelSpec;
use crate::noise::{moment_mp, rosenthal_constant, LevyMeasure};
use crate::quad::gauss_kronrod;

const PI: f64 = std::f64::consts::PI;

/// Value of `A_{β,p}` split into its two terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ABeta {
    pub beta: f64,
    /// `(∫ e^{-2βt} J_2)^{p/2}`.
    pub first: f64,
    /// `∫ e^{-pβt} J_p^{p/2}`.
    #[serde(with = "crate::stats::ext_real")]
    pub second: f64,
    #[serde(with = "crate::stats::ext_real")]
    pub value: f64,
    /// Quadrature error estimate carried by the second term.
    pub error: f64,
}

/// Precomputed data for evaluating `A_{β,p}` at many `β`.
///
/// The `J_2` term uses `∫_0^∞ e^{-ct} |FG_t(ξ)|² dt` in closed form inside a
/// single frequency integral. For `p > 2` the `J_p` term integrates a
/// tabulated profile with power-law extrapolation at both ends.
pub struct GrowthFunctional {
    op: OperatorSpec,
    kernel: KernelSpec,
    p: f64,
    jp: Option<JpProfile>,
    j2: Option<JpProfile>,
    finite: bool,
}

const PROFILE_LO: f64 = 1e-8;
const PROFILE_HI: f64 = 1e6;

impl GrowthFunctional {
    pub fn new(op: &OperatorSpec, kernel: &KernelSpec, p: f64, res: &Resolution) -> Result<Self> {
        check_pair(op, kernel)?;
        if !(p >= 2.0) {
            return invalid(format!("A_beta_p needs p >= 2, got {p}"));
        }
        let finite = check_moment_range(op, kernel, p).is_ok();
        let jp = if p > 2.0 && finite {
            Some(JpProfile::build(
                op, kernel, p, res, PROFILE_LO, PROFILE_HI, 6,
            )?)
        } else {
            None
        };
        let needs_j2 = op.kind == OperatorKind::Wave && isotropic_view(kernel).is_none();
        let j2 = if needs_j2 {
            Some(JpProfile::build(
                op, kernel, 2.0, res, PROFILE_LO, PROFILE_HI, 6,
            )?)
        } else {
            None
        };
        Ok(GrowthFunctional {
            op: *op,
            kernel: kernel.clone(),
            p,
            jp,
            j2,
            finite,
        })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// `∫_0^∞ e^{-ct} J_2(t) dt = ∫ I_c(ξ) μ(dξ)`.
    pub fn laplace_j2(&self, c: f64) -> f64 {
        if let Some(prof) = &self.j2 {
            return prof.weighted_integral(1.0, c, f64::INFINITY).value;
        }
        match (self.op.kind, isotropic_view(&self.kernel)) {
            (OperatorKind::Heat, None) => self.kernel.mu_resolvent(c),
            (kind, Some(k)) => {
                let scale = match kind {
                    OperatorKind::Heat => c.sqrt(),
                    OperatorKind::Wave => 0.5 * c,
                };
                k.mu_radial_integral_scaled(|r| self.op.laplace_green_sq_radial(c, r), scale, 1e-11)
            }
            (OperatorKind::Wave, None) => unreachable!("profile built for wave product kernels"),
        }
    }

    pub fn evaluate(&self, beta: f64) -> ABeta {
        let p = self.p;
        let l2 = self.laplace_j2(2.0 * beta);
        let first = l2.powf(p / 2.0);
        let (second, error) = if p == 2.0 {
            (l2, 0.0)
        } else if !self.finite {
            (f64::INFINITY, 0.0)
        } else {
            let prof = self.jp.as_ref().expect("profile for p > 2");
            if prof.head_exponent() * p / 2.0 <= -1.0 + 1e-9 {
                (f64::INFINITY, 0.0)
            } else {
                let q = prof.weighted_integral(p / 2.0, p * beta, f64::INFINITY);
                (q.value, q.error)
            }
        };
        ABeta {
            beta,
            first,
            second,
            value: first + second,
            error,
        }
    }
}

/// `A_{β,p}`; `+inf` when `J_p^{p/2}` is not integrable at the origin.
pub fn a_beta_p(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    beta: f64,
    p: f64,
    res: &Resolution,
) -> Result<f64> {
    if !(beta > 0.0) {
        return invalid("A_beta_p needs beta > 0");
    }
    Ok(GrowthFunctional::new(op, kernel, p, res)?
        .evaluate(beta)
        .value)
}

/// Search interval and bisection depth for `β*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BetaSearch {
    pub beta_min: f64,
    pub beta_max: f64,
    pub steps: usize,
}

impl Default for BetaSearch {
    fn default() -> Self {
        BetaSearch {
            beta_min: 1e-6,
            beta_max: 1e6,
            steps: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaStarFlag {
    /// `Lip(σ) = 0`: the contraction holds for every `β`.
    Zero,
    /// Located inside the search interval.
    Interior,
    /// Holds already at `beta_min`; `value` is an upper bound.
    BelowRange,
    /// Fails at `beta_max`; `value` is `+inf`.
    AboveRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaStar {
    #[serde(with = "crate::stats::ext_real")]
    pub value: f64,
    pub flag: BetaStarFlag,
    pub c_p: f64,
}

/// `β* = inf{β > 0 : Lip^p C_p A_{β,p} < 1}` by bisection in `log β`.
pub fn beta_star_with(
    functional: &GrowthFunctional,
    c_p: f64,
    lip: f64,
    search: &BetaSearch,
) -> BetaStar {
    if lip == 0.0 {
        return BetaStar {
            value: 0.0,
            flag: BetaStarFlag::Zero,
            c_p,
        };
    }
    let p = functional.p();
    let factor = lip.powf(p) * c_p;
    let holds = |beta: f64| factor * functional.evaluate(beta).value < 1.0;
    if holds(search.beta_min) {
        return BetaStar {
            value: search.beta_min,
            flag: BetaStarFlag::BelowRange,
            c_p,
        };
    }
    if !holds(search.beta_max) {
        return BetaStar {
            value: f64::INFINITY,
            flag: BetaStarFlag::AboveRange,
            c_p,
        };
    }
    let (mut lo, mut hi) = (search.beta_min.ln(), search.beta_max.ln());
    for _ in 0..search.steps {
        let mid = 0.5 * (lo + hi);
        if holds(mid.exp()) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    BetaStar {
        value: hi.exp(),
        flag: BetaStarFlag::Interior,
        c_p,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn beta_star(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    measure: &LevyMeasure,
    p: f64,
    lip: f64,
    bp: f64,
    search: &BetaSearch,
    res: &Resolution,
) -> Result<BetaStar> {
    measure.validate()?;
    if !(lip >= 0.0) {
        return invalid("Lipschitz constant must be nonnegative");
    }
    let c_p = rosenthal_constant(p, measure.m2(), moment_mp(measure, p), bp)?;
    let functional = GrowthFunctional::new(op, kernel, p, res)?;
    Ok(beta_star_with(&functional, c_p, lip, search))
}

/// Nested adaptive quadrature over a box.
fn box_integral(f: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], prefix: &mut Vec<f64>) -> f64 {
    let k = prefix.len();
    let last = k + 1 == lo.len();
    gauss_kronrod(
        |x| {
            let mut pt = prefix.clone();
            pt.push(x);
            if last {
                f(&pt)
            } else {
                box_integral(f, lo, hi, &mut pt)
            }
        },
        lo[k],
        hi[k],
        0.0,
        1e-10,
    )
    .value
}

/// `Υ_a(β) = ∫_{[a,2a]} (β+|ξ|²)^{-1} μ(dξ)`.
pub fn upsilon(kernel: &KernelSpec, a: &[f64], beta: f64) -> Result<f64> {
    kernel.validate()?;
    if a.len() != kernel.dim {
        return Err(Error::GridMismatch(
            "box corner has the wrong dimension".into(),
        ));
    }
    if a.iter().any(|v| !(*v > 0.0)) || !(beta >= 0.0) {
        return invalid("upsilon needs a > 0 and beta >= 0");
    }
    let d = kernel.dim;
    let hi: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
    let f = |xi: &[f64]| {
        let r2: f64 = xi.iter().map(|v| v * v).sum();
        kernel.fourier_sq(xi).unwrap_or(0.0) / (beta + r2)
    };
    Ok((2.0 * PI).powi(-(d as i32)) * box_integral(&f, a, &hi, &mut Vec::with_capacity(d)))
}

/// How the wave-equation witness condition evaluates `Υ_a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum WaveRule {
    /// `Υ_a(β) / 2β ≥ 1/(m_2 L²)`.
    #[default]
    Displayed,
    /// `Υ_a(β²/4) / 2β ≥ 1/(m_2 L²)`, the form that appears inside the
    /// Laplace-transformed series.
    Series,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntermittencySearch {
    pub a_min: f64,
    pub a_max: f64,
    pub a_count: usize,
    pub beta_min: f64,
    pub beta_max: f64,
    pub steps: usize,
    #[serde(default)]
    pub wave_rule: WaveRule,
}

impl Default for IntermittencySearch {
    fn default() -> Self {
        IntermittencySearch {
            a_min: 1e-3,
            a_max: 1e2,
            a_count: 41,
            beta_min: 1e-8,
            beta_max: 1e4,
            steps: 60,
            wave_rule: WaveRule::Displayed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntermittencyResult {
    /// A witness was found, so the second-moment growth rate is positive.
    pub intermittent_lb: bool,
    pub witness_a: Option<Vec<f64>>,
    /// Largest certified `β`; a lower bound on the second-moment growth rate.
    pub witness_beta: Option<f64>,
    /// `1/(m_2 L²)`.
    pub threshold: f64,
    /// The witness sits at the top of the `β` range (the true supremum may
    /// be larger).
    pub capped: bool,
    /// Per box size `a`: the largest `β` satisfying the condition.
    pub ladder: Vec<(f64, Option<f64>)>,
}

/// Searches boxes `[a, 2a]^d` on a logarithmic ladder for a `β` that
/// certifies positive second-moment growth.
pub fn intermittency_check(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    measure: &LevyMeasure,
    lip_lower: f64,
    search: &IntermittencySearch,
) -> Result<IntermittencyResult> {
    check_pair(op, kernel)?;
    measure.validate()?;
    if op.kind == OperatorKind::Wave && op.dim > 2 {
        return Err(Error::Unsupported(
            "intermittency witness for the wave operator needs d <= 2".into(),
        ));
    }
    if !(lip_lower > 0.0) {
        return invalid("lower Lipschitz constant must be positive");
    }
    let threshold = 1.0 / (measure.m2() * lip_lower * lip_lower);
    let d = kernel.dim;
    let mut ladder = Vec::with_capacity(search.a_count);
    let mut best: Option<(f64, f64)> = None;
    let mut capped = false;
    for a in crate::stats::log_space(search.a_min, search.a_max, search.a_count) {
        let corner = vec![a; d];
        let ups = |b: f64| upsilon(kernel, &corner, b).unwrap_or(0.0);
        let lhs = |beta: f64| match op.kind {
            OperatorKind::Heat => ups(beta),
            OperatorKind::Wave => match search.wave_rule {
                WaveRule::Displayed => ups(beta) / (2.0 * beta),
                WaveRule::Series => ups(beta * beta / 4.0) / (2.0 * beta),
            },
        };
        if op.kind == OperatorKind::Heat && ups(0.0) <= threshold {
            ladder.push((a, None));
            continue;
        }
        let found = if lhs(search.beta_max) >= threshold {
            capped = true;
            Some(search.beta_max)
        } else if lhs(search.beta_min) < threshold {
            None
        } else {
            let (mut lo, mut hi) = (search.beta_min.ln(), search.beta_max.ln());
            for _ in 0..search.steps {
                let mid = 0.5 * (lo + hi);
                if lhs(mid.exp()) >= threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Some(lo.exp())
        };
        if let Some(b) = found {
            if best.is_none_or(|(_, bb)| b > bb) {
                best = Some((a, b));
            }
        }
        ladder.push((a, found));
    }
    Ok(IntermittencyResult {
        intermittent_lb: best.is_some(),
        witness_a: best.map(|(a, _)| vec![a; d]),
        witness_beta: best.map(|(_, b)| b),
        threshold,
        capped: capped && best.map(|(_, b)| b == search.beta_max).unwrap_or(false),
        ladder,
    })
}

/// Coupling of the Gaussian model with the same second moment: `√m_2 λ`.
pub fn gaussian_coupling(m2: f64, lambda: f64) -> f64 {
    m2.sqrt() * lambda
}

fn riesz_gap(op: OperatorKind, d: usize, kernel_alpha: f64) -> Result<f64> {
    if !(kernel_alpha > 0.0 && kernel_alpha < d as f64) {
        return invalid(format!(
            "scaling regime needs 0 < alpha < d, got alpha = {kernel_alpha}"
        ));
    }
    let gap = d as f64 - kernel_alpha;
    let limit = match op {
        OperatorKind::Heat => 2.0,
        OperatorKind::Wave => 3.0,
    };
    if gap >= limit {
        return invalid(format!(
            "d - alpha = {gap} is outside the formula domain (< {limit})"
        ));
    }
    Ok(gap)
}

/// Second-moment Lyapunov exponent of the Anderson model with a Riesz
/// kernel, in terms of the variational constant `ρ`.
pub fn lyapunov_exact(
    op: OperatorKind,
    d: usize,
    kernel_alpha: f64,
    lambda: f64,
    m2: f64,
    rho: f64,
) -> Result<f64> {
    let g = riesz_gap(op, d, kernel_alpha)?;
    let theta = gaussian_coupling(m2, lambda);
    Ok(match op {
        OperatorKind::Heat => (theta * rho).powf(2.0 / (2.0 - g)),
        OperatorKind::Wave => (2f64.powf(1.0 - g) * theta * rho).powf(1.0 / (3.0 - g)),
    })
}

/// Same exponent in terms of the variational constant `E(f)` for kernels
/// with the scaling property.
pub fn lyapunov_exact_variational(
    op: OperatorKind,
    d: usize,
    kernel_alpha: f64,
    lambda: f64,
    m2: f64,
    e_f: f64,
) -> Result<f64> {
    let g = riesz_gap(op, d, kernel_alpha)?;
    let theta = gaussian_coupling(m2, lambda);
    Ok(match op {
        OperatorKind::Heat => theta.powf(2.0 / (2.0 - g)) * 2f64.powf(-g / (2.0 - g)) * e_f,
        OperatorKind::Wave => {
            theta.powf(1.0 / (3.0 - g))
                * 2f64.powf((2.0 - 3.0 * g) / (6.0 - 2.0 * g))
                * e_f.powf((2.0 - g) / (6.0 - 2.0 * g))
        }
    })
}
