//! Monte Carlo moments of the Anderson model and their finite-horizon growth
//! rate, placed between the intermittency witness and `2β*`.
//!
//! `cargo run --release --example lyapunov -- [replicates]`

use levy_spde::bounds::{
    beta_star, intermittency_check, BetaSearch, IntermittencySearch, Resolution,
};
use levy_spde::estimate::{lyapunov_estimate, mc_moments, MomentOptions};
use levy_spde::green::OperatorSpec;
use levy_spde::grid::SimGrid;
use levy_spde::kernels::KernelSpec;
use levy_spde::noise::LevyMeasure;
use levy_spde::simulate::{Model, SimConfig};

fn main() -> levy_spde::Result<()> {
    let replicates: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1000);
    let lambda = 1.5;
    let cfg = SimConfig {
        op: OperatorSpec::heat(1),
        kernel: KernelSpec::heat(1, 1.0),
        measure: LevyMeasure::Gamma {
            alpha: 1.0,
            beta: 1.0,
        },
        model: Model::Anderson { lambda },
        eta: 1.0,
        grid: SimGrid::new(1, 8.0, 128, 0.02, 12.0)?.with_record_every(25),
    };
    let report = mc_moments(&cfg, &[2.0], &[], replicates, 6, &MomentOptions::default())?;
    let rate = lyapunov_estimate(&report, 2.0, None)?;
    let witness = intermittency_check(
        &cfg.op,
        &cfg.kernel,
        &cfg.measure,
        lambda,
        &IntermittencySearch::default(),
    )?;
    let upper = beta_star(
        &cfg.op,
        &cfg.kernel,
        &cfg.measure,
        2.0,
        lambda,
        1.0,
        &BetaSearch::default(),
        &Resolution::default(),
    )?;
    println!("t, E u^2, stderr");
    for (k, t) in report.times.iter().enumerate() {
        println!(
            "{t:.2}, {:.5}, {:.5}",
            report.estimates[0][k], report.stderr[0][k]
        );
    }
    println!(
        "growth rate {:.4} ± {:.4} on {:?}; witness {:?}; 2β* {:.4}",
        rate.slope,
        rate.stderr,
        rate.window,
        witness.witness_beta,
        2.0 * upper.value
    );
    Ok(())
}
