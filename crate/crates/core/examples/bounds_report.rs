//! Full bound report for one operator/kernel/noise triple: `J_p`, `M_p`,
//! the linear moment bound, `A_{β,p}` and `β*`.
//!
//! `cargo run --release --example bounds_report`

use levy_spde::bounds::{bound_report, BetaSearch, ReportRequest, Resolution};
use levy_spde::green::OperatorSpec;
use levy_spde::kernels::KernelSpec;
use levy_spde::noise::LevyMeasure;
use levy_spde::stats::log_space;

fn main() -> levy_spde::Result<()> {
    let req = ReportRequest {
        p: 2.5,
        times: log_space(0.05, 5.0, 8),
        betas: log_space(0.01, 100.0, 9),
        lip: 0.2,
        bp: None,
        search: BetaSearch::default(),
        resolution: Resolution::default(),
    };
    let m = LevyMeasure::Gamma {
        alpha: 1.0,
        beta: 1.0,
    };
    let r = bound_report(&OperatorSpec::heat(2), &KernelSpec::riesz(2, 1.0), &m, &req)?;
    println!("t, J_p, envelope, M_p");
    for ((a, b), c) in r.j_p.iter().zip(&r.j_p_bound).zip(&r.m_p) {
        println!("{:.4}, {:.6e}, {:.6e}, {:.6e}", a.0, a.1, b.1, c.1);
    }
    println!("beta, A_beta");
    for (b, a) in &r.a_beta_p {
        println!("{b:.4}, {a:.6e}");
    }
    println!(
        "beta* = {} ({:?}), C_p = {:.3}",
        r.beta_star.value, r.beta_star.flag, r.c_p
    );
    for f in &r.fitted_exponents {
        println!(
            "{}: slope {:.4} (expected {:?})",
            f.name, f.slope, f.expected
        );
    }
    for n in &r.notes {
        println!("note: {n}");
    }
    Ok(())
}
