use std::path::PathBuf;
use std::time::Instant;

use clap::Args;

use orsearch::{generate, save_dataset, SynthConfig};

use crate::error::{CliError, CliResult};
use crate::io::read_text;
use crate::manifest::{dataset_hash, Manifest, MANIFEST_FILE};

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    /// Generator configuration (JSON); omitted fields take their defaults.
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the configuration's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for the dataset files.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: &SynthArgs) -> CliResult<Manifest> {
    let start = Instant::now();
    let mut cfg = SynthConfig::from_json(&read_text(&args.config)?)
        .map_err(|e| CliError::from(e).context(&args.config.display().to_string()))?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let ds = generate(&cfg)?;
    let paths = save_dataset(&ds, &args.out)?;
    let config = serde_json::to_value(&cfg).expect("config serializes");
    let mut manifest = Manifest::new("synth", config, dataset_hash(&paths)?, vec![cfg.seed]);
    manifest.details = serde_json::json!({
        "num_items": ds.items().len(),
        "num_frames": ds.frames().len(),
        "num_probes": ds.probes().len(),
    });
    manifest.wall_time_ms = start.elapsed().as_millis() as u64;
    manifest.write(&args.out.join(MANIFEST_FILE))?;
    Ok(manifest)
}
