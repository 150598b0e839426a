//! One replicate of a nonlinear heat equation; prints the spatial mean and
//! mean square at each recorded time.
//!
//! `cargo run --release --example simulate_field`

use levy_spde::green::OperatorSpec;
use levy_spde::grid::SimGrid;
use levy_spde::kernels::KernelSpec;
use levy_spde::noise::LevyMeasure;
use levy_spde::rng::SeedKey;
use levy_spde::simulate::{simulate, Model, ScalarFn, SimConfig};
use levy_spde::stats::mean;

fn main() -> levy_spde::Result<()> {
    let cfg = SimConfig {
        op: OperatorSpec::heat(1),
        kernel: KernelSpec::bessel(1, 1.0),
        measure: LevyMeasure::VarianceGamma {
            theta: 0.5,
            sigma: 1.0,
            nu: 0.5,
        },
        model: Model::Nonlinear {
            sigma: ScalarFn::SinBounded {
                amplitude: 1.0,
                frequency: 1.0,
            },
            drift: ScalarFn::AffineClip {
                slope: -0.5,
                offset: 0.0,
                lo: -2.0,
                hi: 2.0,
            },
        },
        eta: 1.0,
        grid: SimGrid::new(1, 10.0, 256, 0.01, 4.0)?.with_record_every(50),
    };
    let field = simulate(&cfg, SeedKey::new(7, 0))?;
    println!("t, mean u, mean u^2");
    for (i, t) in field.times.iter().enumerate() {
        let u = field.slice(i);
        let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
        println!("{t:.2}, {:.5}, {:.5}", mean(u), mean(&sq));
    }
    Ok(())
}
