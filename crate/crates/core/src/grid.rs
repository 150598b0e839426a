//! Periodic space-time grids and the discrete Fourier machinery on them.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Torus discretization of `[0, T] x [-L, L]^d`.
///
/// Spatial points are `x_i = -L + i*h` with `h = 2L/N`, so the origin sits at
/// index `N/2` along every axis. Arrays are row-major with the last axis
/// contiguous.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimGrid {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
    pub dt: f64,
    pub horizon: f64,
    /// Keep every `record_every`-th time slice in simulation output.
    #[serde(default = "one")]
    pub record_every: usize,
}

fn one() -> usize {
    1
}

impl SimGrid {
    pub fn new(dim: usize, half_width: f64, points: usize, dt: f64, horizon: f64) -> Result<Self> {
        let g = SimGrid {
            dim,
            half_width,
            points,
            dt,
            horizon,
            record_every: 1,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return invalid("grid dimension must be positive");
        }
        if !(self.half_width.is_finite() && self.half_width > 0.0) {
            return invalid("grid half_width must be positive and finite");
        }
        if self.points < 2 || !self.points.is_power_of_two() {
            return invalid(format!(
                "points_per_dim = {} is not a power of two >= 2",
                self.points
            ));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return invalid("time step must be positive");
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return invalid("horizon must be positive");
        }
        let ratio = self.horizon / self.dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return invalid(format!(
                "horizon {} is not a multiple of dt {}",
                self.horizon, self.dt
            ));
        }
        if self.record_every == 0 {
            return invalid("record_every must be at least 1");
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn spatial_len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Space-time cell volume `dt * h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.dt * self.cell_area()
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn spatial(&self) -> SpatialGrid {
        SpatialGrid {
            dim: self.dim,
            half_width: self.half_width,
            points: self.points,
        }
    }

    /// Recorded time indices (always includes 0 and the final step).
    pub fn recorded_steps(&self) -> Vec<usize> {
        let k = self.steps();
        let mut v: Vec<usize> = (0..=k).step_by(self.record_every).collect();
        if *v.last().unwrap() != k {
            v.push(k);
        }
        v
    }
}

/// Spatial part of a grid: `[-L, L]^d` with `N` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialGrid {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

impl SpatialGrid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Self {
        SpatialGrid {
            dim,
            half_width,
            points,
        }
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Multi-index of a flat index.
    pub fn unflatten(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim];
        for a in (0..self.dim).rev() {
            idx[a] = flat % self.points;
            flat /= self.points;
        }
        idx
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Coordinates of grid point `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let h = self.spacing();
        self.unflatten(flat)
            .into_iter()
            .map(|i| -self.half_width + i as f64 * h)
            .collect()
    }

    /// Flat index of the grid point at the origin.
    pub fn origin(&self) -> usize {
        self.flatten(&vec![self.points / 2; self.dim])
    }

    /// Signed displacement (in cells) represented by FFT-ordered offset `m`.
    /// Offset `N/2` stands for `+N/2`.
    pub fn offset_cells(&self, m: usize) -> i64 {
        if m <= self.points / 2 {
            m as i64
        } else {
            m as i64 - self.points as i64
        }
    }

    /// Angular frequency of FFT index `k` along one axis; Nyquist uses `+pi/h`.
    pub fn frequency(&self, k: usize) -> f64 {
        std::f64::consts::PI * self.offset_cells(k) as f64 / self.half_width
    }

    /// Frequency vector of flat FFT index `flat`.
    pub fn frequency_vector(&self, flat: usize) -> Vec<f64> {
        self.unflatten(flat)
            .into_iter()
            .map(|k| self.frequency(k))
            .collect()
    }

    /// Volume of one cell of the dual (frequency) lattice.
    pub fn frequency_cell(&self) -> f64 {
        (std::f64::consts::PI / self.half_width).powi(self.dim as i32)
    }
}

/// Reusable multi-dimensional FFT on a cubic grid.
pub struct Spectral {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    line: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Spectral {
    pub fn new(dim: usize, n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Spectral {
            dim,
            n,
            forward,
            inverse,
            line: vec![Complex64::new(0.0, 0.0); n],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn for_grid(grid: &SpatialGrid) -> Self {
        Spectral::new(grid.dim, grid.points)
    }

    fn transform(&mut self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let total = n.pow(self.dim as u32);
        assert_eq!(data.len(), total, "array does not match transform size");
        let plan = if inverse {
            self.inverse.clone()
        } else {
            self.forward.clone()
        };
        // last axis is contiguous: transform all rows at once
        plan.process_with_scratch(data, &mut self.scratch);
        let mut stride = n;
        for _axis in 1..self.dim {
            let block = stride * n;
            for base in (0..total).step_by(block) {
                for off in 0..stride {
                    for i in 0..n {
                        self.line[i] = data[base + off + i * stride];
                    }
                    plan.process_with_scratch(&mut self.line, &mut self.scratch);
                    for i in 0..n {
                        data[base + off + i * stride] = self.line[i];
                    }
                }
            }
            stride = block;
        }
        if inverse {
            let s = 1.0 / total as f64;
            for v in data.iter_mut() {
                *v *= s;
            }
        }
    }

    /// Unnormalized forward transform.
    pub fn forward(&mut self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    /// Inverse transform including the `1/N^d` factor.
    pub fn inverse(&mut self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    /// Forward transform of a real array.
    pub fn forward_real(&mut self, data: &[f64], out: &mut Vec<Complex64>) {
        out.clear();
        out.extend(data.iter().map(|&v| Complex64::new(v, 0.0)));
        self.forward(out);
    }

    /// Inverse transform, keeping the real part.
    pub fn inverse_real(&mut self, data: &mut [Complex64], out: &mut [f64]) {
        self.inverse(data);
        for (o, v) in out.iter_mut().zip(data.iter()) {
            *o = v.re;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(SimGrid::new(1, 4.0, 64, 0.01, 1.0).is_ok());
        assert!(SimGrid::new(1, 4.0, 60, 0.01, 1.0).is_err());
        assert!(SimGrid::new(1, 4.0, 64, 0.03, 1.0).is_err());
        let g = SimGrid::new(2, 4.0, 16, 0.1, 1.0)
            .unwrap()
            .with_record_every(3);
        assert_eq!(g.steps(), 10);
        assert_eq!(g.recorded_steps(), vec![0, 3, 6, 9, 10]);
        assert!((g.cell_volume() - 0.1 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn origin_and_frequencies() {
        let s = SpatialGrid::new(2, 1.0, 8);
        let o = s.origin();
        assert_eq!(s.point(o), vec![0.0, 0.0]);
        assert_eq!(s.offset_cells(4), 4);
        assert_eq!(s.offset_cells(5), -3);
        assert!((s.frequency(1) - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn nd_roundtrip_and_delta() {
        for dim in 1..=3 {
            let n: usize = 8;
            let total = n.pow(dim as u32);
            let mut sp = Spectral::new(dim, n);
            let orig: Vec<Complex64> = (0..total)
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
                .collect();
            let mut data = orig.clone();
            sp.forward(&mut data);
            sp.inverse(&mut data);
            for (a, b) in data.iter().zip(&orig) {
                assert!((a - b).norm() < 1e-12);
            }
            let mut delta = vec![Complex64::new(0.0, 0.0); total];
            delta[0] = Complex64::new(1.0, 0.0);
            sp.forward(&mut delta);
            assert!(delta
                .iter()
                .all(|v| (v - Complex64::new(1.0, 0.0)).norm() < 1e-14));
        }
    }
}
