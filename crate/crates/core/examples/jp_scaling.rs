//! Time scaling of `J_p(t)` against the envelope exponents.
//!
//! `cargo run --release --example jp_scaling`

use levy_spde::bounds::{j_p_bound, j_p_numeric, Resolution};
use levy_spde::green::OperatorSpec;
use levy_spde::kernels::KernelSpec;
use levy_spde::stats::{log_log_fit, log_space};

fn main() -> levy_spde::Result<()> {
    let res = Resolution::default();
    let times = log_space(0.01, 1.0, 12);
    let pairs = [
        (
            "heat + Riesz(0.5)",
            OperatorSpec::heat(1),
            KernelSpec::riesz(1, 0.5),
        ),
        (
            "heat + heat",
            OperatorSpec::heat(1),
            KernelSpec::heat(1, 1.0),
        ),
        (
            "wave + Riesz(1)",
            OperatorSpec::wave(2),
            KernelSpec::riesz(2, 1.0),
        ),
    ];
    for (name, op, k) in &pairs {
        for p in [2.0, 3.0] {
            let j: Vec<f64> = times
                .iter()
                .map(|&t| j_p_numeric(op, k, t, p, &res))
                .collect::<Result<_, _>>()?;
            let fit = log_log_fit(&times, &j)?;
            let env = j_p_bound(op, k, 1.0, p)?;
            println!(
                "{name} p={p}: fitted slope {:.4}, envelope exponent {:.4} ({:?})",
                fit.slope, env.exponent, env.branch
            );
        }
    }
    Ok(())
}
