//! One-dimensional quadrature rules used throughout the crate.
//!
//! Two workhorses: adaptive Gauss-Kronrod (7/15) for smooth or piecewise smooth
//! integrands, and tanh-sinh for integrands with algebraic endpoint singularities.

use std::collections::BinaryHeap;

/// Value and error estimate of a quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quad {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Quad {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let f1 = f(c - h * x);
        let f2 = f(c + h * x);
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    Quad {
        value: kron * h,
        error: ((kron - gauss) * h).abs(),
    }
}

struct Segment {
    a: f64,
    b: f64,
    q: Quad,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.q.error == other.q.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.q.error.total_cmp(&other.q.error)
    }
}

/// Adaptive Gauss-Kronrod on `[a, b]` split into `panels` equal pieces first.
///
/// Refines the worst segment until the summed error falls below
/// `max(abs_tol, rel_tol * |value|)` or the segment budget is exhausted.
pub fn gauss_kronrod_panels<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    abs_tol: f64,
    rel_tol: f64,
) -> Quad {
    if a == b {
        return Quad {
            value: 0.0,
            error: 0.0,
        };
    }
    let panels = panels.max(1);
    let mut heap = BinaryHeap::with_capacity(panels * 4);
    let w = (b - a) / panels as f64;
    for i in 0..panels {
        let lo = a + w * i as f64;
        let hi = if i + 1 == panels { b } else { lo + w };
        heap.push(Segment {
            a: lo,
            b: hi,
            q: gk15(&f, lo, hi),
        });
    }
    let max_segments = 4000 + 4 * panels;
    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.q.value, e + s.q.error));
        if error <= abs_tol.max(rel_tol * value.abs()) || heap.len() >= max_segments {
            return Quad { value, error };
        }
        let worst = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            return Quad { value, error };
        }
        heap.push(Segment {
            a: worst.a,
            b: mid,
            q: gk15(&f, worst.a, mid),
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            q: gk15(&f, mid, worst.b),
        });
    }
}

/// Adaptive Gauss-Kronrod on `[a, b]`.
pub fn gauss_kronrod<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Quad {
    gauss_kronrod_panels(f, a, b, 1, abs_tol, rel_tol)
}

/// Tanh-sinh (double exponential) quadrature on `[a, b]`.
///
/// Never evaluates `f` at the endpoints, so integrable algebraic singularities
/// there are handled. Nonfinite samples are skipped.
pub fn tanh_sinh<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Quad {
    if a == b {
        return Quad {
            value: 0.0,
            error: 0.0,
        };
    }
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let half_pi = std::f64::consts::FRAC_PI_2;
    let t_max = 6.5;
    // contribution of abscissa t (and -t when t > 0)
    let eval = |t: f64| -> f64 {
        let u = half_pi * t.sinh();
        let cu = u.cosh();
        let w = half_pi * t.cosh() / (cu * cu);
        // distance from the nearer endpoint, computed without cancellation
        let e = (-2.0 * u.abs()).exp();
        let gap = r * 2.0 * e / (1.0 + e);
        let mut s = 0.0;
        let (xl, xr) = (a + gap, b - gap);
        if t == 0.0 {
            let v = f(c);
            return if v.is_finite() { v * w } else { 0.0 };
        }
        for x in [xl, xr] {
            if x > a && x < b {
                let v = f(x);
                if v.is_finite() {
                    s += v * w;
                }
            }
        }
        s
    };
    let mut h = 0.5;
    let mut sum = eval(0.0);
    let mut k = 1;
    while (k as f64) * h <= t_max {
        sum += eval(k as f64 * h);
        k += 1;
    }
    let mut estimate = sum * h * r;
    let mut error = f64::INFINITY;
    for _level in 0..9 {
        h *= 0.5;
        let mut k = 1;
        let mut add = 0.0;
        while (k as f64) * h <= t_max {
            add += eval(k as f64 * h);
            k += 2;
        }
        sum += add;
        let next = sum * h * r;
        error = (next - estimate).abs();
        estimate = next;
        if error <= rel_tol * estimate.abs() || estimate == 0.0 {
            break;
        }
    }
    Quad {
        value: estimate,
        error,
    }
}

/// Integral over `[0, inf)`: tanh-sinh on `[0, scale]` plus the substitution
/// `x = scale / u` on the tail, which turns algebraic decay into an
/// endpoint singularity that tanh-sinh resolves.
pub fn half_line<F: Fn(f64) -> f64>(f: F, scale: f64, rel_tol: f64) -> Quad {
    let head = tanh_sinh(&f, 0.0, scale, rel_tol);
    let tail = tanh_sinh(|u: f64| f(scale / u) * scale / (u * u), 0.0, 1.0, rel_tol);
    Quad {
        value: head.value + tail.value,
        error: head.error + tail.error,
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p1 = z;
                p0 = 1.0;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    (x, w)
}

/// Surface area of the unit sphere in R^d.
pub fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * std::f64::consts::PI.powf(h) / libm::tgamma(h)
}
