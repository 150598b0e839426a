//! Chaos expansion of `E|u(t,x)|²` for the Anderson model, term by term.
//!
//! `cargo run --release --example chaos_series`

use levy_spde::bounds::{anderson_second_moment, ChaosOptions, Truncation};
use levy_spde::green::OperatorSpec;
use levy_spde::kernels::KernelSpec;
use levy_spde::noise::LevyMeasure;

fn main() -> levy_spde::Result<()> {
    let opts = ChaosOptions {
        samples: 200_000,
        seed: 11,
        truncation: Truncation::default(),
    };
    let m = LevyMeasure::Gamma {
        alpha: 1.0,
        beta: 1.0,
    };
    for (name, op, k) in [
        (
            "heat + heat",
            OperatorSpec::heat(1),
            KernelSpec::heat(1, 1.0),
        ),
        (
            "heat + Riesz(0.5)",
            OperatorSpec::heat(1),
            KernelSpec::riesz(1, 0.5),
        ),
        (
            "wave + Riesz(0.5)",
            OperatorSpec::wave(1),
            KernelSpec::riesz(1, 0.5),
        ),
    ] {
        let r = anderson_second_moment(&op, &k, &m, 0.5, 1.0, 1.0, 5, &opts)?;
        let terms: Vec<String> = r
            .terms
            .iter()
            .map(|t| format!("{:.3e}±{:.1e}", t.value, t.mc_stderr))
            .collect();
        println!(
            "{name}: sum {:.6} ± {:.1e}; terms [{}]; cutoff {:?}",
            r.partial_sum,
            r.partial_sum_stderr,
            terms.join(", "),
            r.cutoff
        );
    }
    Ok(())
}
