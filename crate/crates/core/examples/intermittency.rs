//! Intermittency witness ladder: for each box size, the largest `β` at which
//! second-moment growth is certified.
//!
//! `cargo run --release --example intermittency`

use levy_spde::bounds::{intermittency_check, IntermittencySearch};
use levy_spde::green::OperatorSpec;
use levy_spde::kernels::KernelSpec;
use levy_spde::noise::LevyMeasure;

fn main() -> levy_spde::Result<()> {
    let m = LevyMeasure::Gamma {
        alpha: 1.0,
        beta: 1.0,
    };
    for lower in [0.5, 1.0, 2.0] {
        let r = intermittency_check(
            &OperatorSpec::heat(2),
            &KernelSpec::riesz(2, 1.0),
            &m,
            lower,
            &IntermittencySearch::default(),
        )?;
        println!(
            "lower Lipschitz {lower}: intermittent={} witness β={:?} box={:?}",
            r.intermittent_lb, r.witness_beta, r.witness_a
        );
    }
    Ok(())
}
