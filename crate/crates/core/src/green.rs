//! Fundamental solutions of the heat operator `∂_t - Δ/2` and the wave
//! operator `∂²_t - Δ`, their Fourier transforms and Laplace functionals.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::SpatialGrid;
use crate::quad::gauss_kronrod_panels;

const PI: f64 = std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Heat,
    Wave,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub dim: usize,
}

impl OperatorSpec {
    pub fn heat(dim: usize) -> Self {
        OperatorSpec {
            kind: OperatorKind::Heat,
            dim,
        }
    }

    pub fn wave(dim: usize) -> Self {
        OperatorSpec {
            kind: OperatorKind::Wave,
            dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return invalid("operator dimension must be positive");
        }
        if self.kind == OperatorKind::Wave && self.dim > 3 {
            return Err(Error::Unsupported(format!(
                "wave operator in d = {}",
                self.dim
            )));
        }
        Ok(())
    }

    /// Whether solutions can be simulated on a grid.
    pub fn simulable(&self) -> bool {
        match self.kind {
            OperatorKind::Heat => true,
            OperatorKind::Wave => self.dim <= 2,
        }
    }

    /// `G_t(x)`; zero for `t <= 0`.
    pub fn green_value(&self, t: f64, x: &[f64]) -> Result<f64> {
        assert_eq!(x.len(), self.dim, "point dimension mismatch");
        if t <= 0.0 {
            return Ok(0.0);
        }
        let r2: f64 = x.iter().map(|v| v * v).sum();
        let d = self.dim as f64;
        match self.kind {
            OperatorKind::Heat => Ok((2.0 * PI * t).powf(-d / 2.0) * (-r2 / (2.0 * t)).exp()),
            OperatorKind::Wave => match self.dim {
                1 => Ok(if r2.sqrt() < t { 0.5 } else { 0.0 }),
                2 => {
                    let r = r2.sqrt();
                    Ok(if r < t {
                        1.0 / (2.0 * PI * (t * t - r2).sqrt())
                    } else if r == t {
                        f64::INFINITY
                    } else {
                        0.0
                    })
                }
                d => Err(Error::Unsupported(format!(
                    "pointwise wave kernel in d = {d}"
                ))),
            },
        }
    }

    /// `FG_t(ξ)` as a function of `|ξ|`.
    pub fn fourier_radial(&self, t: f64, rho: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self.kind {
            OperatorKind::Heat => (-t * rho * rho / 2.0).exp(),
            OperatorKind::Wave => {
                let u = t * rho;
                if u.abs() < 1e-8 {
                    t * (1.0 - u * u / 6.0)
                } else {
                    (u).sin() / rho
                }
            }
        }
    }

    /// `FG_t(ξ)`.
    pub fn green_fourier(&self, t: f64, xi: &[f64]) -> f64 {
        self.fourier_radial(t, xi.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    /// `|FG_t(ξ)|²` as a function of `|ξ|`.
    pub fn fourier_sq_radial(&self, t: f64, rho: f64) -> f64 {
        match self.kind {
            OperatorKind::Heat => (-t * rho * rho).exp(),
            OperatorKind::Wave => self.fourier_radial(t, rho).powi(2),
        }
    }

    /// `I_β(ξ) = ∫_0^∞ e^{-βt} |FG_t(ξ)|² dt` in closed form.
    pub fn laplace_green_sq(&self, beta: f64, xi: &[f64]) -> f64 {
        self.laplace_green_sq_radial(beta, xi.iter().map(|v| v * v).sum::<f64>().sqrt())
    }

    pub fn laplace_green_sq_radial(&self, beta: f64, rho: f64) -> f64 {
        match self.kind {
            OperatorKind::Heat => 1.0 / (beta + rho * rho),
            OperatorKind::Wave => 1.0 / (2.0 * beta * (beta * beta / 4.0 + rho * rho)),
        }
    }

    /// Total mass `G_t(R^d)`.
    pub fn mass(&self, t: f64) -> f64 {
        match self.kind {
            OperatorKind::Heat => 1.0,
            OperatorKind::Wave => t.max(0.0),
        }
    }

    /// Spatial extent of `G_t` used to size numerical domains.
    pub fn length_scale(&self, t: f64) -> f64 {
        match self.kind {
            OperatorKind::Heat => t.sqrt(),
            OperatorKind::Wave => t,
        }
    }

    /// Cell integrals of `G_t` on a grid, FFT offset order (origin at index 0).
    pub fn cell_weights(&self, t: f64, grid: &SpatialGrid) -> Result<Vec<f64>> {
        if grid.dim != self.dim {
            return Err(Error::GridMismatch(
                "operator and grid dimensions differ".into(),
            ));
        }
        let h = grid.spacing();
        let n = grid.points;
        let centre = |m: usize| grid.offset_cells(m) as f64 * h;
        match (self.kind, self.dim) {
            (OperatorKind::Heat, _) => {
                let s = (2.0 * t).sqrt();
                let axis: Vec<f64> = (0..n)
                    .map(|m| {
                        let (lo, hi) = (centre(m) - 0.5 * h, centre(m) + 0.5 * h);
                        if lo >= 0.0 {
                            0.5 * (libm::erfc(lo / s) - libm::erfc(hi / s))
                        } else if hi <= 0.0 {
                            0.5 * (libm::erfc(-hi / s) - libm::erfc(-lo / s))
                        } else {
                            0.5 * (libm::erf(hi / s) - libm::erf(lo / s))
                        }
                    })
                    .collect();
                Ok((0..grid.len())
                    .map(|k| grid.unflatten(k).iter().map(|&i| axis[i]).product())
                    .collect())
            }
            (OperatorKind::Wave, 1) => Ok((0..n)
                .map(|m| {
                    let (lo, hi) = (centre(m) - 0.5 * h, centre(m) + 0.5 * h);
                    0.5 * (hi.min(t) - lo.max(-t)).max(0.0)
                })
                .collect()),
            (OperatorKind::Wave, 2) => Ok((0..grid.len())
                .map(|k| {
                    let idx = grid.unflatten(k);
                    let (cx, cy) = (centre(idx[0]), centre(idx[1]));
                    wave2_cell(t, cx - 0.5 * h, cx + 0.5 * h, cy - 0.5 * h, cy + 0.5 * h)
                })
                .collect()),
            (OperatorKind::Wave, d) => {
                Err(Error::Unsupported(format!("wave kernel cells in d = {d}")))
            }
        }
    }
}

/// `∫∫ G_t` of the 2-d wave kernel over a rectangle; the inner integral in
/// `y` is an arcsine, the outer one is done numerically.
fn wave2_cell(t: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    let lo = x0.max(-t);
    let hi = x1.min(t);
    if lo >= hi {
        return 0.0;
    }
    let nearest = |a: f64, b: f64| {
        if a <= 0.0 && b >= 0.0 {
            0.0
        } else {
            a.abs().min(b.abs())
        }
    };
    let (rx, ry) = (nearest(x0, x1), nearest(y0, y1));
    if rx * rx + ry * ry >= t * t {
        return 0.0;
    }
    let inner = |x: f64| {
        let s2 = t * t - x * x;
        if s2 <= 0.0 {
            return 0.0;
        }
        let s = s2.sqrt();
        let a = |y: f64| (y / s).clamp(-1.0, 1.0).asin();
        a(y1) - a(y0)
    };
    gauss_kronrod_panels(inner, lo, hi, 2, 1e-15, 1e-11).value / (2.0 * PI)
}
