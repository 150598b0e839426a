//! Coloring kernels, their spectral densities, the Dalang classifier and the
//! periodic grid convolution.
//!
//! A kernel of parameter `alpha` is the family member of order `alpha/2`, so
//! its autocorrelation `f = κ * κ` is the member of order `alpha`:
//!
//! | family  | member of order `a`                                   | `|Fκ|²`              |
//! |---------|-------------------------------------------------------|----------------------|
//! | heat    | `(2πa)^{-d/2} exp(-|x|²/2a)`                          | `exp(-α|ξ|²/2)`      |
//! | riesz   | `C_{d,a} |x|^{a-d}`                                   | `|ξ|^{-α}`           |
//! | bessel  | `Γ(a/2)^{-1} ∫ w^{a/2-1} e^{-w} (4πw)^{-d/2} e^{-|x|²/4w} dw` | `(1+|ξ|²)^{-α/2}` |
//! | poisson | `Γ((d+1)/2) π^{-(d+1)/2} a (|x|²+a²)^{-(d+1)/2}`      | `exp(-α|ξ|)`         |

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
pub use crate::grid::SimGrid;
use crate::grid::{SpatialGrid, Spectral};
use crate::quad::{gauss_kronrod_panels, gauss_legendre, half_line, sphere_area, tanh_sinh};

const PI: f64 = std::f64::consts::PI;

/// Kernel family with its parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelFamily {
    Heat {
        alpha: f64,
    },
    Riesz {
        alpha: f64,
    },
    Bessel {
        alpha: f64,
    },
    Poisson {
        alpha: f64,
    },
    /// One 1-d factor per coordinate.
    Product {
        factors: Vec<KernelFamily>,
    },
}

/// A coloring kernel on `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub dim: usize,
    #[serde(flatten)]
    pub family: KernelFamily,
}

/// Result of the Dalang classifier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dalang {
    pub holds: bool,
    /// `∫(1+|ξ|²)^{-1} μ(dξ)`, `+inf` when the condition fails.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Radial {
    Heat,
    Riesz,
    Bessel,
    Poisson,
}

fn riesz_constant(d: usize, a: f64) -> f64 {
    let d = d as f64;
    PI.powf(-d / 2.0) * 2f64.powf(-a) * libm::tgamma((d - a) / 2.0) / libm::tgamma(a / 2.0)
}

/// Bessel potential kernel `B_{d,a}` at radius `r`.
fn bessel_value(d: usize, a: f64, r: f64) -> f64 {
    let dd = d as f64;
    if r == 0.0 && a <= dd {
        return f64::INFINITY;
    }
    if r < 1e-200 && a < dd {
        // leading term of the expansion at the origin, relative error O(r^{min(2, d-a)})
        return riesz_constant(d, a) * r.powf(a - dd);
    }
    // w = e^s turns the w-integral into a doubly decaying integrand on the line
    let e = 0.5 * (a - dd);
    let c = (4.0 * PI).powf(-dd / 2.0) / libm::tgamma(a / 2.0);
    let q = 0.25 * r * r;
    let integrand = |s: f64| (e * s - s.exp() - q * (-s).exp()).exp();
    let hi = 5.0;
    let lo = if r > 0.0 {
        (2.0 * (0.5 * r).ln() - 750f64.ln()).clamp(-1000.0, -1.0)
    } else {
        -80.0 / e
    };
    let panels = ((hi - lo) / 2.0).ceil() as usize;
    c * gauss_kronrod_panels(integrand, lo, hi, panels, 0.0, 1e-13).value
}

fn radial_member(kind: Radial, d: usize, a: f64, r: f64) -> f64 {
    let dd = d as f64;
    match kind {
        Radial::Heat => (2.0 * PI * a).powf(-dd / 2.0) * (-r * r / (2.0 * a)).exp(),
        Radial::Riesz => {
            if r == 0.0 {
                f64::INFINITY
            } else {
                riesz_constant(d, a) * r.powf(a - dd)
            }
        }
        Radial::Bessel => bessel_value(d, a, r),
        Radial::Poisson => {
            libm::tgamma((dd + 1.0) / 2.0)
                * PI.powf(-(dd + 1.0) / 2.0)
                * a
                * (r * r + a * a).powf(-(dd + 1.0) / 2.0)
        }
    }
}

fn radial_fourier_sq(kind: Radial, alpha: f64, rho: f64) -> Result<f64> {
    Ok(match kind {
        Radial::Heat => (-alpha * rho * rho / 2.0).exp(),
        Radial::Riesz => {
            if rho == 0.0 {
                return Err(Error::Singular);
            }
            rho.powf(-alpha)
        }
        Radial::Bessel => (1.0 + rho * rho).powf(-alpha / 2.0),
        Radial::Poisson => (-alpha * rho).exp(),
    })
}

impl KernelFamily {
    fn radial(&self) -> Option<(Radial, f64)> {
        match self {
            KernelFamily::Heat { alpha } => Some((Radial::Heat, *alpha)),
            KernelFamily::Riesz { alpha } => Some((Radial::Riesz, *alpha)),
            KernelFamily::Bessel { alpha } => Some((Radial::Bessel, *alpha)),
            KernelFamily::Poisson { alpha } => Some((Radial::Poisson, *alpha)),
            KernelFamily::Product { .. } => None,
        }
    }
}

/// Mass of the centered Gaussian of variance `var` on `[lo, hi]`.
fn heat_cell_mass(var: f64, lo: f64, hi: f64) -> f64 {
    let s = (2.0 * var).sqrt();
    if lo >= 0.0 {
        0.5 * (libm::erfc(lo / s) - libm::erfc(hi / s))
    } else if hi <= 0.0 {
        0.5 * (libm::erfc(-hi / s) - libm::erfc(-lo / s))
    } else {
        0.5 * (libm::erf(hi / s) - libm::erf(lo / s))
    }
}

/// The Bessel member of order `a` is the Gamma(a/2)-mixture of centered
/// Gaussians of variance `2w`, so `∫_A B = E[P_{2w}(A)]` with
/// `w ~ Gamma(a/2, 1)`. Trapezoid rule in `s = ln w`, where the integrand
/// decays doubly exponentially at both ends.
struct Subordination {
    w: Vec<f64>,
    weight: Vec<f64>,
}

impl Subordination {
    /// `cell` is the smallest length scale the Gaussian masses resolve.
    fn new(shape: f64, cell: f64) -> Self {
        let ds = 0.05;
        let lo = 2.0 * cell.ln() - (3200.0f64).ln() - 1.0;
        let hi = (1000.0f64).ln().max(1.5 * (1.0 + shape).ln() + 8.0);
        let n = ((hi - lo) / ds).ceil() as usize + 1;
        let norm = ds / libm::tgamma(shape);
        let (w, weight) = (0..n)
            .map(|i| {
                let s = lo + i as f64 * ds;
                let w = s.exp();
                (w, norm * (shape * s - w).exp())
            })
            .unzip();
        Subordination { w, weight }
    }

    /// `P(X > x)` for `x >= 0`; variances too small to reach `x` are skipped.
    fn tail(&self, x: f64) -> f64 {
        let first = self.w.partition_point(|&w| w < x * x / 2800.0);
        self.w[first..]
            .iter()
            .zip(&self.weight[first..])
            .map(|(&w, &c)| c * 0.5 * libm::erfc(x / (2.0 * w.sqrt())))
            .sum()
    }

    fn mass(&self, lo: f64, hi: f64) -> f64 {
        if lo >= 0.0 {
            self.tail(lo) - self.tail(hi)
        } else if hi <= 0.0 {
            self.tail(-hi) - self.tail(-lo)
        } else {
            1.0 - self.tail(-lo) - self.tail(hi)
        }
    }
}

/// 1-d Bessel cell masses along one grid axis, from tails at the cell edges.
fn bessel_axis_masses(grid: &SpatialGrid, a: f64) -> Vec<f64> {
    let h = grid.spacing();
    let rule = Subordination::new(a / 2.0, h);
    // edge k sits at (k + 1/2) h
    let reach = grid.points / 2 + 1;
    let tails: Vec<f64> = (0..=reach)
        .map(|k| rule.tail((k as f64 + 0.5) * h))
        .collect();
    (0..grid.points)
        .map(|m| {
            let o = grid.offset_cells(m).unsigned_abs() as usize;
            if o == 0 {
                1.0 - 2.0 * tails[0]
            } else {
                tails[o - 1] - tails[o]
            }
        })
        .collect()
}

/// Integral of the 1-d member of order `a` over `[lo, hi]`.
fn cell_integral_1d(kind: Radial, a: f64, lo: f64, hi: f64) -> f64 {
    match kind {
        Radial::Heat => heat_cell_mass(a, lo, hi),
        Radial::Riesz => {
            let c = riesz_constant(1, a) / a;
            let anti = |x: f64| x.signum() * x.abs().powf(a);
            c * (anti(hi) - anti(lo))
        }
        Radial::Poisson => ((hi / a).atan() - (lo / a).atan()) / PI,
        Radial::Bessel => Subordination::new(a / 2.0, hi - lo).mass(lo, hi),
    }
}

/// `∫_{[-1/2,1/2]^d} |x|^{-s} dx` by decomposing the cube into pyramids.
pub(crate) fn cube_power_average(d: usize, s: f64) -> f64 {
    let dd = d as f64;
    if d == 1 {
        return 0.5f64.powf(-s) / (1.0 - s);
    }
    // each of 2d pyramids: (1/2)^{d-s} / (d-s) * ∫_{[-1,1]^{d-1}} (|y|²+1)^{-s/2} dy
    let face = tensor_gl(d - 1, 24, |y| {
        (y.iter().map(|v| v * v).sum::<f64>() + 1.0).powf(-s / 2.0)
    });
    2.0 * dd * 0.5f64.powf(dd - s) / (dd - s) * face
}

/// Tensor Gauss-Legendre rule on `[-1, 1]^k`.
fn tensor_gl<F: Fn(&[f64]) -> f64>(k: usize, n: usize, f: F) -> f64 {
    if k == 0 {
        return f(&[]);
    }
    let (x, w) = gauss_legendre(n);
    let total = n.pow(k as u32);
    let mut y = vec![0.0; k];
    let mut s = 0.0;
    for flat in 0..total {
        let mut rem = flat;
        let mut weight = 1.0;
        for yi in y.iter_mut() {
            let i = rem % n;
            rem /= n;
            *yi = x[i];
            weight *= w[i];
        }
        s += weight * f(&y);
    }
    s
}

impl KernelSpec {
    pub fn new(dim: usize, family: KernelFamily) -> Result<Self> {
        let k = KernelSpec { dim, family };
        k.validate()?;
        Ok(k)
    }

    pub fn heat(dim: usize, alpha: f64) -> Self {
        KernelSpec {
            dim,
            family: KernelFamily::Heat { alpha },
        }
    }

    pub fn riesz(dim: usize, alpha: f64) -> Self {
        KernelSpec {
            dim,
            family: KernelFamily::Riesz { alpha },
        }
    }

    pub fn bessel(dim: usize, alpha: f64) -> Self {
        KernelSpec {
            dim,
            family: KernelFamily::Bessel { alpha },
        }
    }

    pub fn poisson(dim: usize, alpha: f64) -> Self {
        KernelSpec {
            dim,
            family: KernelFamily::Poisson { alpha },
        }
    }

    pub fn product(factors: Vec<KernelFamily>) -> Self {
        KernelSpec {
            dim: factors.len(),
            family: KernelFamily::Product { factors },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return invalid("kernel dimension must be positive");
        }
        let check = |fam: &KernelFamily, d: usize| -> Result<()> {
            match fam {
                KernelFamily::Riesz { alpha } => {
                    if !(*alpha > 0.0 && *alpha < d as f64) {
                        return invalid(format!(
                            "Riesz kernel needs 0 < alpha < d = {d}, got {alpha}"
                        ));
                    }
                }
                KernelFamily::Heat { alpha }
                | KernelFamily::Bessel { alpha }
                | KernelFamily::Poisson { alpha } => {
                    if !(*alpha > 0.0 && alpha.is_finite()) {
                        return invalid("kernel alpha must be positive");
                    }
                }
                KernelFamily::Product { .. } => {
                    return invalid("product factors must be 1-d families")
                }
            }
            Ok(())
        };
        match &self.family {
            KernelFamily::Product { factors } => {
                if factors.len() != self.dim {
                    return invalid("product kernel needs one factor per coordinate");
                }
                for f in factors {
                    check(f, 1)?;
                }
                Ok(())
            }
            fam => check(fam, self.dim),
        }
    }

    /// Length scale used for domain sizing (0 for scale-free kernels).
    pub fn length_scale(&self) -> f64 {
        fn one(f: &KernelFamily) -> f64 {
            match f {
                KernelFamily::Heat { alpha } => (alpha / 2.0).sqrt(),
                KernelFamily::Riesz { .. } => 0.0,
                KernelFamily::Bessel { .. } => 1.0,
                KernelFamily::Poisson { alpha } => alpha / 2.0,
                KernelFamily::Product { factors } => factors.iter().map(one).fold(0.0, f64::max),
            }
        }
        one(&self.family)
    }

    /// Largest parameter among factors (used in reporting).
    pub fn alpha(&self) -> Option<f64> {
        self.family.radial().map(|(_, a)| a)
    }

    /// `κ(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.member_value(x, 0.5)
    }

    /// `f(x) = (κ * κ)(x)`.
    pub fn f_value(&self, x: &[f64]) -> f64 {
        self.member_value(x, 1.0)
    }

    fn member_value(&self, x: &[f64], order_factor: f64) -> f64 {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        match &self.family {
            KernelFamily::Product { factors } => factors
                .iter()
                .zip(x)
                .map(|(f, xi)| {
                    let (kind, alpha) = f.radial().expect("1-d factor");
                    radial_member(kind, 1, alpha * order_factor, xi.abs())
                })
                .product(),
            fam => {
                let (kind, alpha) = fam.radial().unwrap();
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                radial_member(kind, self.dim, alpha * order_factor, r)
            }
        }
    }

    /// `|Fκ(ξ)|²`; the Riesz family signals [`Error::Singular`] at zero.
    pub fn fourier_sq(&self, xi: &[f64]) -> Result<f64> {
        assert_eq!(xi.len(), self.dim, "frequency dimension mismatch");
        match &self.family {
            KernelFamily::Product { factors } => {
                let mut p = 1.0;
                for (f, x) in factors.iter().zip(xi) {
                    let (kind, alpha) = f.radial().expect("1-d factor");
                    p *= radial_fourier_sq(kind, alpha, x.abs())?;
                }
                Ok(p)
            }
            fam => {
                let (kind, alpha) = fam.radial().unwrap();
                radial_fourier_sq(kind, alpha, xi.iter().map(|v| v * v).sum::<f64>().sqrt())
            }
        }
    }

    /// Radial profile of `|Fκ|²` for isotropic kernels.
    pub fn fourier_sq_radial(&self, rho: f64) -> Option<f64> {
        let (kind, alpha) = self.family.radial()?;
        Some(match radial_fourier_sq(kind, alpha, rho) {
            Ok(v) => v,
            Err(_) => f64::INFINITY,
        })
    }

    pub fn is_isotropic(&self) -> bool {
        self.family.radial().is_some()
    }

    /// 1-d factors `(kind, alpha)` of a product kernel.
    fn factors(&self) -> Vec<(Radial, f64)> {
        match &self.family {
            KernelFamily::Product { factors } => factors
                .iter()
                .map(|f| f.radial().expect("1-d factor"))
                .collect(),
            fam => vec![fam.radial().unwrap()],
        }
    }

    /// 1-d spectral densities of a product kernel: `g_j(ξ_j)`.
    pub fn factor_fourier_sq(&self, j: usize, xi: f64) -> f64 {
        let (kind, alpha) = self.factors()[j];
        radial_fourier_sq(kind, alpha, xi.abs()).unwrap_or(f64::INFINITY)
    }

    /// `∫ h(|ξ|) μ(dξ)` for a radial weight `h` and isotropic kernel.
    pub fn mu_radial_integral<H: Fn(f64) -> f64>(&self, h: H, rel_tol: f64) -> f64 {
        self.mu_radial_integral_scaled(h, 1.0, rel_tol)
    }

    /// As [`Self::mu_radial_integral`], splitting the half line at `scale`
    /// (pick the radius where `h` changes character).
    pub fn mu_radial_integral_scaled<H: Fn(f64) -> f64>(
        &self,
        h: H,
        scale: f64,
        rel_tol: f64,
    ) -> f64 {
        let d = self.dim;
        let prof = |r: f64| {
            let g = self.fourier_sq_radial(r).unwrap();
            if g == 0.0 {
                0.0
            } else {
                r.powi(d as i32 - 1) * g * h(r)
            }
        };
        (2.0 * PI).powi(-(d as i32)) * sphere_area(d) * half_line(prof, scale, rel_tol).value
    }

    /// Analytic Dalang classification plus the value of the integral.
    pub fn dalang_condition(&self) -> Dalang {
        let d = self.dim as f64;
        let holds = match &self.family {
            KernelFamily::Heat { .. } | KernelFamily::Poisson { .. } => true,
            KernelFamily::Riesz { alpha } => *alpha > (d - 2.0).max(0.0),
            KernelFamily::Bessel { alpha } => *alpha > d - 2.0,
            KernelFamily::Product { factors } => {
                let deficit: f64 = factors
                    .iter()
                    .map(|f| match f {
                        KernelFamily::Riesz { alpha } | KernelFamily::Bessel { alpha } => {
                            (1.0 - alpha).max(0.0)
                        }
                        _ => 0.0,
                    })
                    .sum();
                deficit < 2.0
            }
        };
        if !holds {
            return Dalang {
                holds,
                value: f64::INFINITY,
            };
        }
        Dalang {
            holds,
            value: self.mu_resolvent(1.0),
        }
    }

    /// `∫ exp(-s|ξ|²) μ(dξ)`, finite for `s > 0` whenever the Dalang
    /// condition holds.
    pub fn mu_gaussian(&self, s: f64) -> f64 {
        if self.is_isotropic() {
            let scale = if s > 0.0 {
                s.sqrt().recip().min(1.0)
            } else {
                1.0
            };
            return self.mu_radial_integral_scaled(|r| (-s * r * r).exp(), scale, 1e-11);
        }
        let scale = if s > 0.0 { s.sqrt().recip() } else { 1.0 };
        self.factors()
            .iter()
            .map(|&(kind, alpha)| {
                let inner = half_line(
                    |x: f64| (-s * x * x).exp() * radial_fourier_sq(kind, alpha, x).unwrap_or(0.0),
                    scale.min(1.0),
                    1e-11,
                );
                inner.value / PI
            })
            .product()
    }

    /// `∫ (c+|ξ|²)^{-1} μ(dξ)` for `c > 0`; `+inf` when it diverges.
    pub fn mu_resolvent(&self, c: f64) -> f64 {
        if self.is_isotropic() {
            return self.mu_radial_integral_scaled(|r| 1.0 / (c + r * r), c.sqrt().min(1.0), 1e-11);
        }
        // 1/(c+|ξ|²) = ∫ e^{-s(c+|ξ|²)} ds factorizes over coordinates
        half_line(|s: f64| (-s * c).exp() * self.mu_gaussian(s), 1.0 / c, 1e-9).value
    }

    /// `|Fκ|²` sampled on the FFT frequency lattice of `grid`.
    ///
    /// Singular Riesz modes get the average of `|ξ|^{-α}` over the
    /// fundamental frequency cell.
    pub fn fourier_sq_on_grid(&self, grid: &SpatialGrid) -> Vec<f64> {
        let dxi = PI / grid.half_width;
        let n = grid.len();
        match &self.family {
            KernelFamily::Riesz { alpha } => {
                let zero = dxi.powf(-alpha) * cube_power_average(self.dim, *alpha);
                (0..n)
                    .map(|k| {
                        if k == 0 {
                            zero
                        } else {
                            self.fourier_sq(&grid.frequency_vector(k)).unwrap()
                        }
                    })
                    .collect()
            }
            KernelFamily::Product { .. } => {
                let factors = self.factors();
                let per_axis: Vec<Vec<f64>> = factors
                    .iter()
                    .map(|&(kind, alpha)| {
                        (0..grid.points)
                            .map(|k| {
                                let xi = grid.frequency(k);
                                if xi == 0.0 && kind == Radial::Riesz {
                                    (0.5 * dxi).powf(-alpha) / (1.0 - alpha)
                                } else {
                                    radial_fourier_sq(kind, alpha, xi.abs()).unwrap()
                                }
                            })
                            .collect()
                    })
                    .collect();
                (0..n)
                    .map(|k| {
                        grid.unflatten(k)
                            .iter()
                            .zip(&per_axis)
                            .map(|(&i, axis)| axis[i])
                            .product()
                    })
                    .collect()
            }
            _ => (0..n)
                .map(|k| self.fourier_sq(&grid.frequency_vector(k)).unwrap())
                .collect(),
        }
    }

    /// Cell integrals `∫_{cell} κ` indexed by FFT-ordered offset.
    pub fn cell_weights(&self, grid: &SpatialGrid) -> Vec<f64> {
        self.member_cell_weights(grid, 0.5)
    }

    fn member_cell_weights(&self, grid: &SpatialGrid, order_factor: f64) -> Vec<f64> {
        let h = grid.spacing();
        let n = grid.points;
        let d = self.dim;
        assert_eq!(grid.dim, d, "grid dimension mismatch");
        let total = grid.len();
        let separable: Option<Vec<(Radial, f64)>> = match &self.family {
            KernelFamily::Product { .. } => Some(self.factors()),
            KernelFamily::Heat { alpha } => Some(vec![(Radial::Heat, *alpha); d]),
            fam if d == 1 => Some(vec![fam.radial().unwrap()]),
            _ => None,
        };
        if let Some(factors) = separable {
            let axes: Vec<Vec<f64>> = factors
                .iter()
                .map(|&(kind, alpha)| {
                    if kind == Radial::Bessel {
                        return bessel_axis_masses(grid, alpha * order_factor);
                    }
                    (0..n)
                        .map(|m| {
                            let c = grid.offset_cells(m) as f64 * h;
                            cell_integral_1d(kind, alpha * order_factor, c - 0.5 * h, c + 0.5 * h)
                        })
                        .collect()
                })
                .collect();
            return (0..total)
                .map(|k| {
                    grid.unflatten(k)
                        .iter()
                        .enumerate()
                        .map(|(a, &i)| axes[a][i])
                        .product()
                })
                .collect();
        }
        let (kind, alpha) = self.family.radial().unwrap();
        let a = alpha * order_factor;
        if kind == Radial::Bessel {
            return bessel_cell_weights(grid, a);
        }
        let member = |r: f64| radial_member(kind, d, a, r);
        let (gx, gw) = gauss_legendre(4);
        let (nx, nw) = gauss_legendre(12);
        let mut out = vec![0.0; total];
        for (k, o) in out.iter_mut().enumerate() {
            let offs: Vec<f64> = grid
                .unflatten(k)
                .iter()
                .map(|&m| grid.offset_cells(m) as f64)
                .collect();
            let far = offs.iter().any(|v| v.abs() > 1.0);
            if offs.iter().all(|v| *v == 0.0) {
                *o = origin_cell_integral(d, h, &member);
            } else {
                let (x, w) = if far { (&gx, &gw) } else { (&nx, &nw) };
                let q = x.len();
                let mut s = 0.0;
                for flat in 0..q.pow(d as u32) {
                    let mut rem = flat;
                    let mut wt = 1.0;
                    let mut r2 = 0.0;
                    for c in &offs {
                        let i = rem % q;
                        rem /= q;
                        let xi = (c + 0.5 * x[i]) * h;
                        r2 += xi * xi;
                        wt *= w[i];
                    }
                    s += wt * member(r2.sqrt());
                }
                *o = s * (0.5 * h).powi(d as i32);
            }
        }
        out
    }
}

/// Cell masses of the `d`-dimensional Bessel member of order `a`: the
/// Gaussian mixture factorizes over axes for each mixing variance.
fn bessel_cell_weights(grid: &SpatialGrid, a: f64) -> Vec<f64> {
    let h = grid.spacing();
    let n = grid.points;
    let rule = Subordination::new(a / 2.0, h);
    let axis: Vec<Vec<f64>> = (0..n)
        .map(|m| {
            let c = grid.offset_cells(m) as f64 * h;
            rule.w
                .iter()
                .map(|&w| heat_cell_mass(2.0 * w, c - 0.5 * h, c + 0.5 * h))
                .collect()
        })
        .collect();
    (0..grid.len())
        .map(|k| {
            let idx = grid.unflatten(k);
            let prod = |j: usize| idx.iter().map(|&m| axis[m][j]).product::<f64>();
            if idx.iter().all(|&m| m == 0) {
                1.0 - rule
                    .weight
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * (1.0 - prod(j)))
                    .sum::<f64>()
            } else {
                rule.weight
                    .iter()
                    .enumerate()
                    .map(|(j, c)| c * prod(j))
                    .sum()
            }
        })
        .collect()
}

/// `∫_{[-h/2,h/2]^d} g(|x|) dx` for a radial `g` with an integrable
/// singularity at the origin.
fn origin_cell_integral<G: Fn(f64) -> f64>(d: usize, h: f64, g: &G) -> f64 {
    let half = 0.5 * h;
    let face = tensor_gl(d - 1, 16, |y| {
        let rho = half * (y.iter().map(|v| v * v).sum::<f64>() + 1.0).sqrt();
        tanh_sinh(|t: f64| t.powi(d as i32 - 1) * g(t * rho), 0.0, 1.0, 1e-12).value
    });
    2.0 * d as f64 * half.powi(d as i32) * face
}

/// Circular convolution with the cell-averaged, periodized kernel.
///
/// `out_j = Σ_m field_m W_{j-m}` where `W` holds cell integrals of κ, so a
/// spike of height `h^{-d}` at the origin reproduces cell averages of κ.
pub fn convolve_periodic(
    field: &[f64],
    kernel: &KernelSpec,
    grid: &SpatialGrid,
) -> Result<Vec<f64>> {
    if grid.dim != kernel.dim {
        return Err(Error::GridMismatch(format!(
            "grid dim {} vs kernel dim {}",
            grid.dim, kernel.dim
        )));
    }
    if field.len() != grid.len() {
        return Err(Error::GridMismatch(format!(
            "field has {} values, grid has {}",
            field.len(),
            grid.len()
        )));
    }
    let w = kernel.cell_weights(grid);
    Ok(circular_convolution(field, &w, grid))
}

/// Circular convolution of two grid arrays (second one in offset order).
pub(crate) fn circular_convolution(a: &[f64], b: &[f64], grid: &SpatialGrid) -> Vec<f64> {
    let mut sp = Spectral::for_grid(grid);
    let mut fa = Vec::new();
    let mut fb = Vec::new();
    sp.forward_real(a, &mut fa);
    sp.forward_real(b, &mut fb);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    let mut out = vec![0.0; a.len()];
    sp.inverse_real(&mut fa, &mut out);
    out
}

/// Warning text when the torus is too small for the kernel.
pub fn domain_warning(kernel: &KernelSpec, grid: &SimGrid) -> Option<String> {
    let ell = kernel.length_scale();
    if grid.half_width < 6.0 * ell {
        Some(format!(
            "half_width {} is below 6 x kernel length scale {:.4}; periodization bias possible",
            grid.half_width, ell
        ))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_examples() {
        let k = KernelSpec::heat(1, 1.0);
        assert!((k.value(&[0.0]) - 0.564_189_583_547_756_3).abs() < 1e-12);
        assert!((k.f_value(&[0.0]) - 0.398_942_280_401_432_7).abs() < 1e-12);
        let r = KernelSpec::riesz(2, 1.0);
        assert!((r.value(&[0.6, 0.8]) - riesz_constant(2, 0.5)).abs() < 1e-14);
        assert!((r.f_value(&[0.0, 2.0]) - riesz_constant(2, 1.0) / 2.0).abs() < 1e-14);
        assert_eq!(r.value(&[0.0, 0.0]), f64::INFINITY);
        assert_eq!(KernelSpec::bessel(1, 1.0).value(&[0.0]), f64::INFINITY);
    }

    #[test]
    fn bessel_matches_closed_forms() {
        // B_{1,2}(x) = e^{-|x|}/2 and B_{3,2}(x) = e^{-|x|}/(4π|x|)
        let k = KernelSpec::bessel(1, 4.0);
        for x in [0.0, 0.3, 1.0, 4.0] {
            let exact = 0.5 * (-x as f64).exp();
            assert!((k.value(&[x]) / exact - 1.0).abs() < 1e-10, "x={x}");
        }
        let k = KernelSpec::bessel(3, 4.0);
        for r in [0.2, 1.0, 3.0] {
            let exact = (-r as f64).exp() / (4.0 * PI * r);
            assert!((k.value(&[r, 0.0, 0.0]) / exact - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn fourier_examples() {
        assert!(
            (KernelSpec::heat(1, 2.0).fourier_sq(&[1.0]).unwrap() - (-1.0f64).exp()).abs() < 1e-15
        );
        assert_eq!(KernelSpec::bessel(1, 2.0).fourier_sq(&[0.0]).unwrap(), 1.0);
        let p = KernelSpec::product(vec![
            KernelFamily::Heat { alpha: 1.0 },
            KernelFamily::Heat { alpha: 1.0 },
        ]);
        assert!((p.fourier_sq(&[1.0, 1.0]).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        assert!(matches!(
            KernelSpec::riesz(2, 1.0).fourier_sq(&[0.0, 0.0]),
            Err(Error::Singular)
        ));
    }

    #[test]
    fn dalang_examples() {
        assert!(!KernelSpec::riesz(3, 0.5).dalang_condition().holds);
        assert!(KernelSpec::heat(5, 7.0).dalang_condition().holds);
        let b = KernelSpec::bessel(1, 0.1).dalang_condition();
        assert!(b.holds && b.value.is_finite());
        // heat kernel d=1 α=1: (1/π)∫_0^∞ e^{-ξ²/2}/(1+ξ²) dξ = e^{1/2} erfc(1/√2)/2
        let h = KernelSpec::heat(1, 1.0).dalang_condition();
        let exact = 0.5 * 0.5f64.exp() * libm::erfc(std::f64::consts::FRAC_1_SQRT_2);
        assert!((h.value - exact).abs() < 1e-10, "{}", h.value);
        // isotropic and product forms of the 2-d heat kernel agree
        let iso = KernelSpec::heat(2, 1.0).dalang_condition().value;
        let prod = KernelSpec::product(vec![
            KernelFamily::Heat { alpha: 1.0 },
            KernelFamily::Heat { alpha: 1.0 },
        ])
        .dalang_condition()
        .value;
        assert!((iso - prod).abs() < 1e-7 * iso, "{iso} {prod}");
    }

    #[test]
    fn cube_average_matches_direct_quadrature() {
        // d=2, s=1: direct polar-free check with fine midpoint sum away from 0
        let s = 1.0;
        let exact = cube_power_average(2, s);
        let n = 2000;
        let h = 1.0 / n as f64;
        let mut sum = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = -0.5 + (i as f64 + 0.5) * h;
                let y = -0.5 + (j as f64 + 0.5) * h;
                sum += (x * x + y * y).sqrt().powf(-s) * h * h;
            }
        }
        assert!((sum / exact - 1.0).abs() < 2e-3, "{sum} {exact}");
    }

    #[test]
    fn spike_reproduces_cell_averages() {
        let grid = SpatialGrid::new(1, 4.0, 64);
        let k = KernelSpec::heat(1, 1.0);
        let h = grid.spacing();
        let mut field = vec![0.0; 64];
        field[grid.origin()] = 1.0 / h;
        let out = convolve_periodic(&field, &k, &grid).unwrap();
        for (j, v) in out.iter().enumerate() {
            let x = grid.point(j)[0];
            let avg = cell_integral_1d(Radial::Heat, 0.5, x - h / 2.0, x + h / 2.0) / h;
            assert!((v - avg).abs() <= 1e-10 * avg.max(1e-300) + 1e-16, "j={j}");
        }
    }

    #[test]
    fn convolution_matches_direct_sum_and_is_linear() {
        for (d, n) in [(1usize, 32usize), (2, 8)] {
            let grid = SpatialGrid::new(d, 3.0, n);
            let k = KernelSpec::poisson(d, 0.7);
            let w = k.cell_weights(&grid);
            let total = grid.len();
            let a: Vec<f64> = (0..total)
                .map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5)
                .collect();
            let b: Vec<f64> = (0..total)
                .map(|i| ((i * 104_729) % 89) as f64 / 89.0)
                .collect();
            let ca = convolve_periodic(&a, &k, &grid).unwrap();
            for j in 0..total {
                let jj = grid.unflatten(j);
                let mut s = 0.0;
                for (m, am) in a.iter().enumerate() {
                    let mm = grid.unflatten(m);
                    let off: Vec<usize> =
                        jj.iter().zip(&mm).map(|(x, y)| (x + n - y) % n).collect();
                    s += am * w[grid.flatten(&off)];
                }
                assert!((s - ca[j]).abs() < 1e-12);
            }
            let cb = convolve_periodic(&b, &k, &grid).unwrap();
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
            let cm = convolve_periodic(&mix, &k, &grid).unwrap();
            for j in 0..total {
                assert!((cm[j] - (2.0 * ca[j] - 3.0 * cb[j])).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn cell_weights_preserve_mass() {
        // ∫κ = Fκ(0) = 1 for heat, Bessel and Poisson members
        let grid = SpatialGrid::new(2, 24.0, 128);
        for k in [KernelSpec::heat(2, 1.0), KernelSpec::bessel(2, 3.0)] {
            let s: f64 = k.cell_weights(&grid).iter().sum();
            assert!((s - 1.0).abs() < 2e-3, "{k:?}: {s}");
        }
        let grid1 = SpatialGrid::new(1, 40.0, 1024);
        let s: f64 = KernelSpec::bessel(1, 1.0).cell_weights(&grid1).iter().sum();
        assert!((s - 1.0).abs() < 1e-6, "{s}");
    }

    #[test]
    fn bessel_cell_masses_match_pointwise_quadrature() {
        // the Gaussian-mixture masses against direct quadrature of the kernel
        for a in [0.1, 0.5, 1.5] {
            let h = 0.05;
            let f = |x: f64| bessel_value(1, a, x.abs());
            let origin = 2.0 * tanh_sinh(f, 0.0, 0.5 * h, 1e-13).value;
            let near = gauss_kronrod_panels(f, 0.5 * h, 1.5 * h, 1, 0.0, 1e-13).value;
            let far = gauss_kronrod_panels(f, 3.5, 3.5 + h, 1, 0.0, 1e-13).value;
            let got = [
                cell_integral_1d(Radial::Bessel, a, -0.5 * h, 0.5 * h),
                cell_integral_1d(Radial::Bessel, a, 0.5 * h, 1.5 * h),
                cell_integral_1d(Radial::Bessel, a, 3.5, 3.5 + h),
            ];
            for (g, want) in got.iter().zip([origin, near, far]) {
                assert!((g / want - 1.0).abs() < 1e-9, "a = {a}: {g} vs {want}");
            }
        }
        // 2-d: origin and an off-diagonal cell against tensor quadrature
        let grid = SpatialGrid::new(2, 1.0, 16);
        let h = grid.spacing();
        let a = 1.25;
        let w = bessel_cell_weights(&grid, a);
        let member = |r: f64| bessel_value(2, a, r);
        let origin = origin_cell_integral(2, h, &member);
        assert!((w[0] / origin - 1.0).abs() < 1e-8, "{} vs {origin}", w[0]);
        let (x, wt) = gauss_legendre(24);
        let mut cell = 0.0;
        for i in 0..24 {
            for j in 0..24 {
                let (u, v) = ((1.0 + 0.5 * x[i]) * h, (2.0 + 0.5 * x[j]) * h);
                cell += wt[i] * wt[j] * member((u * u + v * v).sqrt());
            }
        }
        cell *= 0.25 * h * h;
        let k = grid.flatten(&[1, 2]);
        assert!((w[k] / cell - 1.0).abs() < 1e-9, "{} vs {cell}", w[k]);
    }

    #[test]
    fn riesz_origin_cell_2d() {
        // cell integral of C|x|^{a-2} over [-h/2,h/2]^2 equals C h^a times the cube average
        let grid = SpatialGrid::new(2, 1.0, 16);
        let h = grid.spacing();
        let k = KernelSpec::riesz(2, 1.0);
        let w = k.cell_weights(&grid);
        let exact = riesz_constant(2, 0.5) * h.powf(0.5) * cube_power_average(2, 1.5);
        assert!((w[0] / exact - 1.0).abs() < 1e-8, "{} {}", w[0], exact);
    }

    #[test]
    fn semigroup_on_grid() {
        // H_{1,a} * H_{1,b} = H_{1,a+b}: convolve cell averages of κ with itself
        let grid = SpatialGrid::new(1, 8.0, 256);
        let k = KernelSpec::heat(1, 1.0);
        let h = grid.spacing();
        let w = k.cell_weights(&grid);
        let mut field = vec![0.0; 256];
        for m in 0..256 {
            let idx = (m + grid.origin()) % 256;
            field[idx] = w[m] / h;
        }
        let out = convolve_periodic(&field, &k, &grid).unwrap();
        for j in (96..160).step_by(8) {
            let x = grid.point(j)[0];
            let f = k.f_value(&[x]);
            assert!((out[j] / f - 1.0).abs() < 0.01, "x={x}");
        }
    }

    #[test]
    fn parseval_consistency() {
        // Σ (φ*κ)² h = (2π)^{-1} Σ |Fφ|² |Fκ|² Δξ for a smooth bump
        let mut last = f64::INFINITY;
        for n in [64usize, 128] {
            let grid = SpatialGrid::new(1, 8.0, n);
            let h = grid.spacing();
            let k = KernelSpec::heat(1, 0.5);
            let bump: Vec<f64> = (0..n).map(|j| (-grid.point(j)[0].powi(2)).exp()).collect();
            let conv = convolve_periodic(&bump, &k, &grid).unwrap();
            let lhs: f64 = conv.iter().map(|v| v * v).sum::<f64>() * h;
            let mut sp = Spectral::for_grid(&grid);
            let mut fb = Vec::new();
            sp.forward_real(&bump, &mut fb);
            let g = k.fourier_sq_on_grid(&grid);
            let rhs: f64 = fb
                .iter()
                .zip(&g)
                .map(|(c, g)| (c.norm_sqr() * h * h) * g)
                .sum::<f64>()
                * grid.frequency_cell()
                / (2.0 * PI);
            let err = (lhs - rhs).abs() / rhs;
            assert!(err < 1e-2 && err <= last + 1e-12, "n={n} err={err}");
            last = err;
        }
    }

    #[test]
    fn symmetry() {
        for k in [
            KernelSpec::riesz(2, 1.2),
            KernelSpec::bessel(2, 1.0),
            KernelSpec::poisson(2, 0.3),
        ] {
            for x in [[0.3, -0.4], [1.5, 0.2]] {
                assert_eq!(k.value(&x), k.value(&[-x[0], -x[1]]));
            }
        }
    }
}
