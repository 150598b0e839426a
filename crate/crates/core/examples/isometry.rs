//! Second moment of the linear heat equation against `m_2 ∫_0^t J_2`.
//!
//! `cargo run --release --example isometry -- [replicates]`

use levy_spde::bounds::m2_spectral;
use levy_spde::estimate::{mc_moments, MomentOptions};
use levy_spde::green::OperatorSpec;
use levy_spde::grid::SimGrid;
use levy_spde::kernels::KernelSpec;
use levy_spde::noise::LevyMeasure;
use levy_spde::simulate::{Model, SimConfig};

fn main() -> levy_spde::Result<()> {
    let replicates: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(500);
    let cfg = SimConfig {
        op: OperatorSpec::heat(1),
        kernel: KernelSpec::heat(1, 1.0),
        measure: LevyMeasure::Gamma {
            alpha: 1.0,
            beta: 1.0,
        },
        model: Model::Linear,
        eta: 0.0,
        grid: SimGrid::new(1, 8.0, 256, 0.005, 1.0)?.with_record_every(50),
    };
    let times = [0.25, 0.5, 1.0];
    let report = mc_moments(
        &cfg,
        &[2.0],
        &times,
        replicates,
        2024,
        &MomentOptions::default(),
    )?;
    println!("t, mc, stderr, quadrature, z");
    for (k, &t) in report.times.iter().enumerate() {
        let exact = cfg.measure.m2() * m2_spectral(&cfg.op, &cfg.kernel, t).unwrap();
        let (e, s) = (report.estimates[0][k], report.stderr[0][k]);
        println!("{t}, {e:.9}, {s:.9}, {exact:.9}, {:.2}", (e - exact) / s);
    }
    Ok(())
}
