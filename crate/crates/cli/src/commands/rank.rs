use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use rayon::prelude::*;
use serde_json::json;

use orsearch::dataset::format::parse_probes;
use orsearch::ranking::to_tsv;
use orsearch::{
    build_probe_context, load_dataset, rank_gallery, sample_gallery_subset, truncate_top_k, Dataset, DatasetPaths,
    RankedList, ScoringMode,
};

use crate::error::{CliError, CliResult};
use crate::io::{create_dir, read_text, sanitize_file_stem, write_text};
use crate::lists::{parse_mode, GallerySize};
use crate::manifest::{dataset_hash, probes_hash, Manifest, MANIFEST_FILE};

pub const RANKED_DIR: &str = "ranked";

#[derive(Debug, Clone, Args)]
pub struct RankArgs {
    /// Dataset directory (embeddings.bin, items.jsonl, frames.jsonl, probes.jsonl).
    #[arg(long)]
    pub data: PathBuf,
    /// Probe list in the probes.jsonl format; defaults to the dataset's own.
    #[arg(long)]
    pub probes: Option<PathBuf>,
    /// Scoring mode: visual, o, r or or.
    #[arg(long, default_value = "or", value_parser = parse_mode)]
    pub mode: ScoringMode,
    /// Sample this many gallery detections per probe instead of searching all.
    #[arg(long)]
    pub gallery_size: Option<usize>,
    /// Seed for gallery sampling.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Keep only the best K entries of each list.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Also search the probe's own frame.
    #[arg(long)]
    pub include_probe_frame: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

/// Ranks one probe's gallery; the flag reports a gallery without positives.
pub fn rank_probe(
    ds: &Dataset,
    probe_id: &str,
    mode: ScoringMode,
    size: GallerySize,
    seed: u64,
    exclude_probe_frame: bool,
) -> orsearch::Result<(RankedList, bool)> {
    let ctx = build_probe_context(ds, probe_id)?;
    match size {
        GallerySize::Full => Ok((rank_gallery(&ctx, ds.items(), mode, exclude_probe_frame)?, false)),
        GallerySize::Sampled(n) => {
            let subset = sample_gallery_subset(ds, probe_id, n, seed)?;
            let list = rank_gallery(&ctx, &subset.items(ds), mode, exclude_probe_frame)?;
            Ok((list, subset.degenerate))
        }
    }
}

pub fn load_with_probes(data: &Path, probes: Option<&Path>) -> CliResult<(Dataset, DatasetPaths)> {
    let paths = DatasetPaths::in_dir(data);
    let mut ds = load_dataset(&paths)?;
    if let Some(p) = probes {
        let ids = parse_probes(&read_text(p)?)?
            .into_iter()
            .map(|r| r.probe_item_id)
            .collect();
        ds = ds.with_probes(ids)?;
    }
    Ok((ds, paths))
}

pub fn run(args: &RankArgs) -> CliResult<Manifest> {
    let start = Instant::now();
    if args.top_k == Some(0) {
        return Err(CliError::usage("--top-k must be at least 1"));
    }
    let size = match args.gallery_size {
        None => GallerySize::Full,
        Some(0) => return Err(CliError::usage("--gallery-size must be at least 1")),
        Some(n) => GallerySize::Sampled(n),
    };
    let (ds, paths) = load_with_probes(&args.data, args.probes.as_deref())?;
    let exclude = !args.include_probe_frame;

    let ranked: Vec<orsearch::Result<(String, bool)>> = ds
        .probes()
        .par_iter()
        .map(|p| {
            let (list, degenerate) = rank_probe(&ds, p, args.mode, size, args.seed, exclude)?;
            let list = match args.top_k {
                Some(k) => truncate_top_k(list, k)?,
                None => list,
            };
            Ok((to_tsv(&list), degenerate))
        })
        .collect();

    let mut files = Vec::with_capacity(ranked.len());
    let mut degenerate = Vec::new();
    for (probe, result) in ds.probes().iter().zip(ranked) {
        let (tsv, flagged) = result.map_err(|e| CliError::from(e).context(&format!("probe `{probe}`")))?;
        if flagged {
            degenerate.push(probe.clone());
        }
        files.push((sanitize_file_stem(probe), tsv));
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    if let Some(w) = files.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(CliError::usage(format!("two probes map to the file name `{}`", w[0].0)));
    }
    degenerate.sort();

    let dir = args.out.join(RANKED_DIR);
    create_dir(&dir)?;
    clear_tsv(&dir)?;
    for (stem, tsv) in &files {
        write_text(&dir.join(format!("{stem}.tsv")), tsv)?;
    }

    let config = json!({
        "mode": args.mode.as_str(),
        "gallery_size": args.gallery_size,
        "seed": args.seed,
        "top_k": args.top_k,
        "exclude_probe_frame": exclude,
        "probes_hash": probes_hash(&ds),
    });
    let mut manifest = Manifest::new("rank", config, dataset_hash(&paths)?, vec![args.seed]);
    manifest.details = json!({
        "num_probes": files.len(),
        "degenerate_probes": degenerate,
    });
    manifest.wall_time_ms = start.elapsed().as_millis() as u64;
    manifest.write(&args.out.join(MANIFEST_FILE))?;
    Ok(manifest)
}

/// Removes ranked lists left over from an earlier run into the same directory.
fn clear_tsv(dir: &Path) -> CliResult<()> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if path.extension().is_some_and(|x| x == "tsv") {
            fs::remove_file(&path).map_err(|e| CliError::io(&path, e))?;
        }
    }
    Ok(())
}
