//! Experiment driver for witness-point-regularized kernel discrepancy
//! training. Every subcommand reads a flat key/value config file (flags
//! override file keys override built-in defaults), seeds all randomness
//! explicitly, writes CSV outputs plus a hash-carrying run manifest, and
//! optionally renders SVG plots.

use clap::{Parser, Subcommand};
use glocad_cli::commands::{self, CommonArgs};

#[derive(Parser)]
#[command(
    name = "glocad",
    version,
    about = "Witness-point-regularized kernel discrepancy training experiments"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the single-Gaussian mean/witness training dynamics.
    #[command(name = "single_gaussian")]
    SingleGaussian(CommonArgs),
    /// Evaluate the dynamics field on a (mean, witness) grid.
    #[command(name = "phase_portrait")]
    PhasePortrait(CommonArgs),
    /// Integrate the two-mean mixture dynamics with one witness point.
    #[command(name = "mog1d")]
    Mog1d(CommonArgs),
    /// Bandwidth-sensitivity curves of the global and local statistics.
    #[command(name = "spiky_sensitivity")]
    SpikySensitivity(CommonArgs),
    /// Witness-anchored gradient of the local statistic across model means.
    #[command(name = "ume_gradient")]
    UmeGradient(CommonArgs),
    /// Alternating witness/generator training on the ring-of-rings mixture.
    #[command(name = "glocad2d")]
    Glocad2d(CommonArgs),
    /// Two-branch continual-learning comparison on a new data blob.
    #[command(name = "continual2d")]
    Continual2d(CommonArgs),
    /// Run the oracle battery (quadrature, gradient, consistency, stability).
    #[command(name = "verify")]
    Verify(CommonArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::SingleGaussian(a) => commands::single_gaussian::run(a),
        Cmd::PhasePortrait(a) => commands::phase_portrait::run(a),
        Cmd::Mog1d(a) => commands::mog1d::run(a),
        Cmd::SpikySensitivity(a) => commands::spiky_sensitivity::run(a),
        Cmd::UmeGradient(a) => commands::ume_gradient::run(a),
        Cmd::Glocad2d(a) => commands::glocad2d::run(a),
        Cmd::Continual2d(a) => commands::continual2d::run(a),
        Cmd::Verify(a) => commands::verify::run(a),
    };
    if let Err(e) = result {
        eprintln!("glocad: {e}");
        std::process::exit(e.exit_code());
    }
}
