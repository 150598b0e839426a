//! Monte Carlo evaluation of the chaos series for the second moment of the
//! Anderson model `σ(u) = λu` with constant initial condition `η`.
//!
//! Term `n` is `η² (m_2 λ²)^n` times an integral over the time simplex
//! `0 < t_1 < … < t_n < t` and `n` frequencies drawn from `μ` of
//! `∏_j |FG_{t_{j+1}-t_j}(ξ_1+…+ξ_j)|²` with `t_{n+1} = t`.

use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::jp::check_pair;
use crate::error::{invalid, Error, Result};
use crate::green::OperatorSpec;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::noise::LevyMeasure;
use crate::quad::{gauss_kronrod, half_line, sphere_area};
use crate::rng::{stream, SeedKey};
use crate::stats::Running;

const PI: f64 = std::f64::consts::PI;
const CHUNK: usize = 4096;

/// How frequencies are cut off when `μ` has infinite mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truncation {
    /// Only normalizable `μ` accepted.
    None,
    /// Fixed cutoff radius (per coordinate for product kernels).
    Radius { radius: f64 },
    /// Smallest power-of-two radius whose neglected `∫ μ/(1+|ξ|²)` is below
    /// `tolerance`; normalizable `μ` is not truncated.
    Auto { tolerance: f64 },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Auto { tolerance: 1e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosTerm {
    pub n: usize,
    pub value: f64,
    pub mc_stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosSeriesResult {
    pub terms: Vec<ChaosTerm>,
    pub partial_sum: f64,
    /// Terms are independent, so their standard errors add in quadrature.
    pub partial_sum_stderr: f64,
    pub n_max: usize,
    pub eta: f64,
    pub lambda: f64,
    pub m2: f64,
    pub t: f64,
    pub samples: usize,
    /// Cutoff radius actually used (`None` when `μ` was sampled exactly).
    pub cutoff: Option<f64>,
    /// `∫ μ/(1+|ξ|²)` over the discarded frequencies.
    pub neglected_dalang_mass: f64,
    /// Total mass of the (possibly truncated) spectral measure.
    pub mu_mass: f64,
}

impl ChaosSeriesResult {
    /// Partial sum using terms `0..=n` only.
    pub fn partial_sum_to(&self, n: usize) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.n <= n)
            .map(|t| t.value)
            .sum()
    }
}

/// Law of a nonnegative radius (or of `|ξ_j|` for a 1-d factor).
#[derive(Debug, Clone)]
enum RadiusLaw {
    /// Density `∝ r^{k-1} e^{-r²/(2v)}`; sampled through `k` normals.
    Gaussian { var: f64 },
    /// Density `∝ r^{e-1}` on `[0, cut]`.
    Power { cut: f64, expo: f64 },
    /// Density `∝ r^{k-1} e^{-rate r}`.
    GammaLaw(Gamma<f64>),
    /// Tabulated cumulative distribution.
    Table { r: Vec<f64>, cdf: Vec<f64> },
}

impl RadiusLaw {
    fn sample<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> f64 {
        match self {
            RadiusLaw::Gaussian { var } => {
                let s: f64 = (0..k)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        z * z
                    })
                    .sum();
                (s * var).sqrt()
            }
            RadiusLaw::Power { cut, expo } => cut * rng.random::<f64>().powf(1.0 / expo),
            RadiusLaw::GammaLaw(g) => g.sample(rng),
            RadiusLaw::Table { r, cdf } => {
                let u: f64 = rng.random::<f64>() * cdf[cdf.len() - 1];
                let i = cdf.partition_point(|&c| c < u).clamp(1, cdf.len() - 1);
                let (c0, c1) = (cdf[i - 1], cdf[i]);
                let w = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.0 };
                r[i - 1] + w * (r[i] - r[i - 1])
            }
        }
    }
}

/// Tabulates `∫_0^r density` on a log grid of `[0, cut]`.
fn table(density: &dyn Fn(f64) -> f64, cut: f64) -> (RadiusLaw, f64) {
    let lo = cut * 1e-9;
    let mut r = vec![0.0];
    r.extend(crate::stats::log_space(lo, cut, 2000));
    let mut cdf = vec![0.0; r.len()];
    for i in 1..r.len() {
        cdf[i] = cdf[i - 1] + gauss_kronrod(density, r[i - 1], r[i], 0.0, 1e-10).value;
    }
    let total = cdf[cdf.len() - 1];
    (RadiusLaw::Table { r, cdf }, total)
}

/// Sampler for `μ` restricted to the kept frequencies, with its mass.
#[derive(Debug, Clone)]
enum FreqSampler {
    /// Uniform direction times a radius with `∫ r^{d-1} g` law.
    Isotropic { dim: usize, radius: RadiusLaw },
    /// Independent symmetric coordinates.
    Product { coords: Vec<RadiusLaw> },
}

impl FreqSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match self {
            FreqSampler::Isotropic { dim, radius } => {
                if let RadiusLaw::Gaussian { var } = radius {
                    let sd = var.sqrt();
                    for v in out.iter_mut() {
                        let z: f64 = rng.sample(StandardNormal);
                        *v = sd * z;
                    }
                    return;
                }
                let r = radius.sample(*dim, rng);
                let mut norm = 0.0;
                for v in out.iter_mut() {
                    let z: f64 = rng.sample(StandardNormal);
                    *v = z;
                    norm += z * z;
                }
                let s = r / norm.sqrt();
                out.iter_mut().for_each(|v| *v *= s);
            }
            FreqSampler::Product { coords } => {
                for (v, law) in out.iter_mut().zip(coords) {
                    let m = law_abs_1d(law, rng);
                    *v = if rng.random::<bool>() { m } else { -m };
                }
            }
        }
    }
}

fn law_abs_1d<R: Rng + ?Sized>(law: &RadiusLaw, rng: &mut R) -> f64 {
    match law {
        RadiusLaw::Gaussian { var } => {
            let z: f64 = rng.sample(StandardNormal);
            (z * var.sqrt()).abs()
        }
        other => other.sample(1, rng),
    }
}

struct Built {
    sampler: FreqSampler,
    mass: f64,
    cutoff: Option<f64>,
    neglected: f64,
}

/// `∫_{r > cut} r^{k-1} g(r)/(1+r²) dr`.
fn radial_tail(g: &dyn Fn(f64) -> f64, k: usize, cut: f64) -> f64 {
    half_line(
        |s: f64| {
            let r = cut + s;
            r.powi(k as i32 - 1) * g(r) / (1.0 + r * r)
        },
        cut.max(1.0),
        1e-8,
    )
    .value
}

fn choose_cutoff(tail: &dyn Fn(f64) -> f64, trunc: Truncation) -> Result<f64> {
    match trunc {
        Truncation::None => Err(Error::InvalidParameter(
            "spectral measure has infinite mass and no frequency truncation is configured".into(),
        )),
        Truncation::Radius { radius } => {
            if radius > 0.0 && radius.is_finite() {
                Ok(radius)
            } else {
                invalid("truncation radius must be positive")
            }
        }
        Truncation::Auto { tolerance } => {
            if !(tolerance > 0.0) {
                return invalid("truncation tolerance must be positive");
            }
            let mut cut = 1.0;
            while tail(cut) >= tolerance {
                cut *= 2.0;
                if cut > 1e12 {
                    return Err(Error::Divergent(
                        "no frequency cutoff meets the tolerance".into(),
                    ));
                }
            }
            Ok(cut)
        }
    }
}

fn build_sampler(kernel: &KernelSpec, trunc: Truncation) -> Result<Built> {
    let d = kernel.dim;
    let dd = d as f64;
    match &kernel.family {
        KernelFamily::Product { factors } => {
            let mut coords = Vec::with_capacity(d);
            let mut mass = 1.0;
            let mut cutoff = None;
            let mut neglected = 0.0;
            // each coordinate is cut separately; the neglected figure is the
            // sum of 1-d Dalang tails
            let tol_each = match trunc {
                Truncation::Auto { tolerance } => Truncation::Auto {
                    tolerance: tolerance / d as f64,
                },
                t => t,
            };
            for f in factors {
                let k1 = KernelSpec {
                    dim: 1,
                    family: f.clone(),
                };
                let b = build_sampler(&k1, tol_each)?;
                mass *= b.mass;
                neglected += b.neglected;
                if let Some(c) = b.cutoff {
                    cutoff = Some(cutoff.map_or(c, |x: f64| x.max(c)));
                }
                let law = match b.sampler {
                    FreqSampler::Isotropic { radius, .. } => radius,
                    FreqSampler::Product { .. } => unreachable!(),
                };
                coords.push(law);
            }
            Ok(Built {
                sampler: FreqSampler::Product { coords },
                mass,
                cutoff,
                neglected,
            })
        }
        fam => {
            let shell = (2.0 * PI).powi(-(d as i32)) * sphere_area(d);
            let g = |r: f64| kernel.fourier_sq_radial(r).unwrap_or(0.0);
            let iso = |radius| FreqSampler::Isotropic { dim: d, radius };
            match *fam {
                KernelFamily::Heat { alpha } => Ok(Built {
                    sampler: iso(RadiusLaw::Gaussian { var: 1.0 / alpha }),
                    mass: (2.0 * PI * alpha).powf(-dd / 2.0),
                    cutoff: None,
                    neglected: 0.0,
                }),
                KernelFamily::Poisson { alpha } => Ok(Built {
                    sampler: iso(RadiusLaw::GammaLaw(
                        Gamma::new(dd, 1.0 / alpha)
                            .map_err(|e| Error::InvalidParameter(e.to_string()))?,
                    )),
                    mass: shell * libm::tgamma(dd) * alpha.powf(-dd),
                    cutoff: None,
                    neglected: 0.0,
                }),
                KernelFamily::Riesz { alpha } => {
                    let cut = choose_cutoff(&|c| shell * radial_tail(&g, d, c), trunc)?;
                    let expo = dd - alpha;
                    Ok(Built {
                        sampler: iso(RadiusLaw::Power { cut, expo }),
                        mass: shell * cut.powf(expo) / expo,
                        cutoff: Some(cut),
                        neglected: shell * radial_tail(&g, d, cut),
                    })
                }
                KernelFamily::Bessel { alpha } => {
                    let normalizable = alpha > dd;
                    let cut = match (normalizable, trunc) {
                        (true, Truncation::None | Truncation::Auto { .. }) => None,
                        _ => Some(choose_cutoff(&|c| shell * radial_tail(&g, d, c), trunc)?),
                    };
                    // a finite table range is needed even without truncation;
                    // push it far enough that the dropped mass is negligible
                    let range = match cut {
                        Some(c) => c,
                        None => {
                            let mut c: f64 = 1.0;
                            while shell
                                * half_line(|s: f64| (c + s).powi(d as i32 - 1) * g(c + s), c, 1e-8)
                                    .value
                                > 1e-12
                                && c < 1e15
                            {
                                c *= 4.0;
                            }
                            c
                        }
                    };
                    let density = |r: f64| r.powi(d as i32 - 1) * g(r);
                    let (law, integral) = table(&density, range);
                    Ok(Built {
                        sampler: iso(law),
                        mass: shell * integral,
                        cutoff: cut,
                        neglected: cut.map_or(0.0, |c| shell * radial_tail(&g, d, c)),
                    })
                }
                KernelFamily::Product { .. } => unreachable!(),
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChaosOptions {
    pub samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub truncation: Truncation,
}

/// Monte Carlo estimate of `E|u(t,x)|²` for the Anderson model through the
/// first `n_max` chaos terms.
#[allow(clippy::too_many_arguments)]
pub fn anderson_second_moment(
    op: &OperatorSpec,
    kernel: &KernelSpec,
    measure: &LevyMeasure,
    lambda: f64,
    eta: f64,
    t: f64,
    n_max: usize,
    options: &ChaosOptions,
) -> Result<ChaosSeriesResult> {
    check_pair(op, kernel)?;
    measure.validate()?;
    if !(lambda > 0.0 && t > 0.0 && eta.is_finite()) {
        return invalid("chaos series needs lambda > 0, t > 0 and finite eta");
    }
    if n_max == 0 || options.samples == 0 {
        return invalid("chaos series needs n_max >= 1 and samples >= 1");
    }
    let built = build_sampler(kernel, options.truncation)?;
    let m2 = measure.m2();
    let d = kernel.dim;
    let mut terms = vec![ChaosTerm {
        n: 0,
        value: eta * eta,
        mc_stderr: 0.0,
    }];
    let mut log_fact = 0.0;
    for n in 1..=n_max {
        log_fact += (n as f64).ln();
        let chunks = options.samples.div_ceil(CHUNK);
        let key = SeedKey::new(options.seed, n as u64);
        let parts: Vec<Running> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = key.rng(stream::CHAOS, c as u64);
                let count = CHUNK.min(options.samples - c * CHUNK);
                let mut acc = Running::default();
                let mut times = vec![0.0; n + 1];
                let mut xi = vec![0.0; d];
                let mut zeta = vec![0.0; d];
                for _ in 0..count {
                    for s in times.iter_mut().take(n) {
                        *s = t * rng.random::<f64>();
                    }
                    times[..n].sort_by(|a, b| a.total_cmp(b));
                    times[n] = t;
                    zeta.iter_mut().for_each(|v| *v = 0.0);
                    let mut prod = 1.0;
                    for j in 0..n {
                        built.sampler.sample(&mut rng, &mut xi);
                        zeta.iter_mut().zip(&xi).for_each(|(z, x)| *z += x);
                        let g = op.green_fourier(times[j + 1] - times[j], &zeta);
                        prod *= g * g;
                    }
                    acc.push(prod);
                }
                acc
            })
            .collect();
        let acc = parts.into_iter().fold(Running::default(), Running::merge);
        let scale =
            eta * eta * (n as f64 * (m2 * lambda * lambda * t * built.mass).ln() - log_fact).exp();
        terms.push(ChaosTerm {
            n,
            value: scale * acc.mean,
            mc_stderr: scale * acc.stderr(),
        });
    }
    let partial_sum = terms.iter().map(|x| x.value).sum();
    let partial_sum_stderr = terms
        .iter()
        .map(|x| x.mc_stderr * x.mc_stderr)
        .sum::<f64>()
        .sqrt();
    Ok(ChaosSeriesResult {
        terms,
        partial_sum,
        partial_sum_stderr,
        n_max,
        eta,
        lambda,
        m2,
        t,
        samples: options.samples,
        cutoff: built.cutoff,
        neglected_dalang_mass: built.neglected,
        mu_mass: built.mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts(samples: usize) -> ChaosOptions {
        ChaosOptions {
            samples,
            seed: 11,
            truncation: Truncation::default(),
        }
    }

    #[test]
    fn first_term_matches_time_integral_of_j2() {
        // heat + heat kernel d = 1: ∫_0^t J_2 = π^{-1/2}(√(t+1/2) - √(1/2))
        let m = LevyMeasure::Gamma {
            alpha: 1.0,
            beta: 1.0,
        };
        let (lambda, eta, t) = (0.7, 1.3, 0.8);
        let r = anderson_second_moment(
            &OperatorSpec::heat(1),
            &KernelSpec::heat(1, 1.0),
            &m,
            lambda,
            eta,
            t,
            2,
            &opts(200_000),
        )
        .unwrap();
        assert_eq!(r.terms[0].value, eta * eta);
        let exact =
            m.m2() * lambda * lambda * eta * eta * ((t + 0.5).sqrt() - 0.5f64.sqrt()) / PI.sqrt();
        let t1 = r.terms[1];
        assert!(
            (t1.value - exact).abs() < 4.0 * t1.mc_stderr,
            "{} {exact} {}",
            t1.value,
            t1.mc_stderr
        );
    }

    #[test]
    fn terms_respect_factorial_bound() {
        // |FG| ≤ 1 for the heat operator, so term n ≤ η² (m_2 λ² M t)^n / n!
        let m = LevyMeasure::Gamma {
            alpha: 1.0,
            beta: 1.0,
        };
        let r = anderson_second_moment(
            &OperatorSpec::heat(1),
            &KernelSpec::heat(1, 1.0),
            &m,
            1.0,
            1.0,
            1.0,
            5,
            &opts(20_000),
        )
        .unwrap();
        let mut fact = 1.0;
        for term in &r.terms {
            if term.n > 0 {
                fact *= term.n as f64;
            }
            assert!(term.value >= 0.0);
            assert!(term.value <= (r.m2 * r.mu_mass).powi(term.n as i32) / fact * (1.0 + 1e-12));
        }
    }

    #[test]
    fn truncation_reported_for_riesz() {
        let m = LevyMeasure::Gamma {
            alpha: 1.0,
            beta: 1.0,
        };
        let k = KernelSpec::riesz(1, 0.5);
        let r = anderson_second_moment(
            &OperatorSpec::heat(1),
            &k,
            &m,
            0.3,
            1.0,
            0.5,
            1,
            &opts(50_000),
        )
        .unwrap();
        assert!(r.cutoff.is_some() && r.neglected_dalang_mass < 1e-3);
        // the first term equals m2 λ² ∫_0^t J_2 restricted to |ξ| < cut
        let cut = r.cutoff.unwrap();
        let inner = |xi: f64| xi.powf(-0.5) * (1.0 - (-0.5 * xi * xi).exp()) / (xi * xi);
        let exact = 0.09 * crate::quad::tanh_sinh(inner, 0.0, cut, 1e-10).value / PI;
        assert!((r.terms[1].value - exact).abs() < 4.0 * r.terms[1].mc_stderr + 1e-9);
        let none = ChaosOptions {
            truncation: Truncation::None,
            ..opts(10)
        };
        assert!(
            anderson_second_moment(&OperatorSpec::heat(1), &k, &m, 0.3, 1.0, 0.5, 1, &none)
                .is_err()
        );
    }

    #[test]
    fn deterministic_in_seed() {
        let m = LevyMeasure::Gamma {
            alpha: 1.0,
            beta: 1.0,
        };
        let k = KernelSpec::product(vec![
            KernelFamily::Heat { alpha: 1.0 },
            KernelFamily::Poisson { alpha: 1.0 },
        ]);
        let a = anderson_second_moment(
            &OperatorSpec::wave(2),
            &k,
            &m,
            0.5,
            1.0,
            1.0,
            3,
            &opts(9000),
        )
        .unwrap();
        let b = anderson_second_moment(
            &OperatorSpec::wave(2),
            &k,
            &m,
            0.5,
            1.0,
            1.0,
            3,
            &opts(9000),
        )
        .unwrap();
        assert_eq!(a, b);
    }
}
