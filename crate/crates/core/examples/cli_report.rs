//! Drives the `report` subcommand in-process and lists the artifacts.
//!
//! `cargo run --release --example cli_report -- [config.json] [out-dir]`

use std::path::PathBuf;

use levy_spde::cli::{run, Cli, Subcommand};

fn main() -> levy_spde::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().map(PathBuf::from).unwrap_or_else(|| {
        concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../configs/heat_linear_1d.json"
        )
        .into()
    });
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("levy-spde-report"));
    let cli = Cli {
        subcommand: Subcommand::Report,
        config,
        seed: None,
        threads: None,
        out: Some(out),
        allow_no_dalang: false,
    };
    let outcome = run(&cli)?;
    println!(
        "wrote {} files under {}",
        outcome.files.len(),
        outcome.out_dir.display()
    );
    for f in &outcome.files {
        println!("  {f}");
    }
    Ok(())
}
