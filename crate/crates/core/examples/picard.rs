//! Picard iterates of a nonlinear equation on frozen noise: successive
//! distances and the gap to the direct scheme.
//!
//! `cargo run --release --example picard`

use levy_spde::green::OperatorSpec;
use levy_spde::grid::SimGrid;
use levy_spde::kernels::KernelSpec;
use levy_spde::noise::LevyMeasure;
use levy_spde::simulate::{picard_validate, Model, ScalarFn, SimConfig};

fn main() -> levy_spde::Result<()> {
    let cfg = SimConfig {
        op: OperatorSpec::heat(1),
        kernel: KernelSpec::heat(1, 1.0),
        measure: LevyMeasure::Gamma {
            alpha: 1.0,
            beta: 1.0,
        },
        model: Model::Nonlinear {
            sigma: ScalarFn::SinBounded {
                amplitude: 1.0,
                frequency: 1.0,
            },
            drift: ScalarFn::ScaledLinear { scale: -0.5 },
        },
        eta: 1.0,
        grid: SimGrid::new(1, 8.0, 64, 0.01, 1.0)?,
    };
    let r = picard_validate(&cfg, 3, 8, 20)?;
    for (n, d) in r.distances.iter().enumerate() {
        println!("iterate {n}: distance {d:.3e}");
    }
    println!("final gap to direct scheme {:.3e}", r.final_gap);
    Ok(())
}
