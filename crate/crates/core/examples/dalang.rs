//! Dalang classifier for the spatial kernel families, with the resolvent
//! value `∫(1+|ξ|²)^{-1} μ(dξ)` where it is finite.
//!
//! `cargo run --release --example dalang`

use levy_spde::kernels::{KernelFamily, KernelSpec};

fn main() {
    let kernels = [
        KernelSpec::heat(3, 1.0),
        KernelSpec::poisson(2, 1.0),
        KernelSpec::riesz(1, 0.5),
        KernelSpec::riesz(2, 0.1),
        KernelSpec::riesz(3, 0.5),
        KernelSpec::riesz(3, 1.1),
        KernelSpec::bessel(3, 0.9),
        KernelSpec::bessel(3, 1.1),
        KernelSpec::product(vec![
            KernelFamily::Riesz { alpha: 0.5 },
            KernelFamily::Riesz { alpha: 0.6 },
        ]),
        KernelSpec::product(vec![KernelFamily::Riesz { alpha: 0.2 }; 3]),
    ];
    for k in &kernels {
        let d = k.dalang_condition();
        println!(
            "d={} {:?}: holds={} resolvent={}",
            k.dim, k.family, d.holds, d.value
        );
    }
}
