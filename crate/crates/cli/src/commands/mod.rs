//! One module per subcommand. Every command follows the same shape:
//! resolve config (typed getters + unknown-key rejection), compute, write
//! CSVs (always) and SVGs (`--plots`), then finish the run directory with a
//! manifest. All numeric work happens through the core library.

pub mod continual2d;
pub mod glocad2d;
pub mod mog1d;
pub mod phase_portrait;
pub mod single_gaussian;
pub mod spiky_sensitivity;
pub mod ume_gradient;
pub mod verify;

use crate::config::ResolvedConfig;
use crate::manifest::sha256_hex;
use clap::Args;
use std::path::PathBuf;

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Flat TOML config file (optional; defaults apply without it)
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Run seed; overrides the config file's `seed` key
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also render SVG plots (CSV is always written)
    #[arg(long)]
    pub plots: bool,
    /// Output directory (default: runs/<subcommand>)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Resume from a checkpoint file (glocad2d only)
    #[arg(long)]
    pub resume: Option<PathBuf>,
}

impl CommonArgs {
    pub fn out_dir(&self, subcommand: &str) -> PathBuf {
        self.out
            .clone()
            .unwrap_or_else(|| PathBuf::from("runs").join(subcommand))
    }
}

/// Short content hash of the resolved config, carried as trajectory
/// provenance.
pub fn config_hash(resolved: &ResolvedConfig) -> String {
    let text = crate::config::to_toml_string(resolved).unwrap_or_default();
    sha256_hex(text.as_bytes())[..16].to_string()
}
