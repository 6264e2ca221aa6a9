//! Experiment runner for the fuzzy cellular traffic model and its NaSch
//! reference: configuration, commands and machine-readable output.

pub mod commands;
pub mod config;
pub mod output;

use std::path::Path;

use anyhow::{Context, Result};

pub use commands::Artifact;

/// Writes every artifact into `dir`, creating it when missing.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for a in artifacts {
        let path = dir.join(&a.name);
        std::fs::write(&path, &a.contents).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
