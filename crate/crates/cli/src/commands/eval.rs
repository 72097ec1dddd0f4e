use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use serde_json::json;
use sha2::{Digest, Sha256};

use orsearch::ranking::parse_tsv;
use orsearch::{evaluate_detection, evaluate_search, load_dataset, DatasetPaths, RankedList, ScoringMode};

use crate::error::{CliError, CliResult};
use crate::io::{read_text, write_text};
use crate::lists::parse_ks;
use crate::manifest::{dataset_hash, Manifest, MANIFEST_FILE};

use super::rank::RANKED_DIR;

#[derive(Debug, Clone, Args)]
pub struct EvalSearchArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory of `rank`, or a directory of ranked-list files.
    #[arg(long)]
    pub ranked: PathBuf,
    /// CMC cut-offs.
    #[arg(long, default_value = "1,5,10")]
    pub ks: String,
    /// Minimum IoU for a detection to match an annotated box.
    #[arg(long, default_value_t = orsearch::DEFAULT_IOU_THRESHOLD)]
    pub iou: f64,
    /// Report file; its manifest goes next to it as `<file>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct EvalDetArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Minimum IoU for a detection to match an annotated box.
    #[arg(long, default_value_t = orsearch::DEFAULT_IOU_THRESHOLD)]
    pub iou: f64,
    /// Report file; its manifest goes next to it as `<file>.manifest.json`.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn sidecar_manifest_path(report: &Path) -> PathBuf {
    let mut name = report.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    report.with_file_name(name)
}

/// Ranked lists of a `rank` output (or bare list) directory, with the hash
/// of the files read and the producing manifest when there is one.
pub fn read_ranked_dir(dir: &Path) -> CliResult<(Vec<RankedList>, String, Option<Manifest>)> {
    let nested = dir.join(RANKED_DIR);
    let list_dir = if nested.is_dir() { nested } else { dir.to_path_buf() };
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest = if manifest_path.is_file() {
        Some(Manifest::read(&manifest_path)?)
    } else {
        None
    };
    let mode = manifest
        .as_ref()
        .and_then(|m| m.config.get("mode").and_then(|v| v.as_str()).map(str::to_owned))
        .map(|m| m.parse::<ScoringMode>().map_err(|e| CliError::format(e.to_string())))
        .transpose()?
        .unwrap_or(ScoringMode::VisualOR);

    let entries = fs::read_dir(&list_dir).map_err(|e| CliError::io(&list_dir, e))?;
    let mut files = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(&list_dir, e))?.path();
        if path.extension().is_some_and(|x| x == "tsv") {
            files.push(path);
        }
    }
    if files.is_empty() {
        return Err(CliError::usage(format!("no ranked lists in {}", list_dir.display())));
    }
    files.sort();
    let mut hasher = Sha256::new();
    let mut lists = Vec::new();
    for path in &files {
        let text = read_text(path)?;
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        hasher.update((name.len() as u64).to_le_bytes());
        hasher.update(name.as_bytes());
        hasher.update((text.len() as u64).to_le_bytes());
        hasher.update(text.as_bytes());
        let parsed = parse_tsv(&text, mode).map_err(|e| CliError::from(e).context(&path.display().to_string()))?;
        lists.extend(parsed);
    }
    Ok((lists, hex::encode(hasher.finalize()), manifest))
}

pub fn run_search(args: &EvalSearchArgs) -> CliResult<Manifest> {
    let start = Instant::now();
    let ks = parse_ks(&args.ks).map_err(|e| CliError::usage(format!("--ks: {e}")))?;
    let paths = DatasetPaths::in_dir(&args.data);
    let ds = load_dataset(&paths)?;
    let (lists, ranked_hash, producer) = read_ranked_dir(&args.ranked)?;
    let report = evaluate_search(&lists, &ds.ground_truth(), &ks, args.iou)?;
    write_text(&args.out, &report.to_text())?;

    let config = json!({
        "ks": ks,
        "iou_threshold": args.iou,
        "ranked_hash": ranked_hash,
    });
    let seeds = producer.map(|m| m.seeds).unwrap_or_default();
    let mut manifest = Manifest::new("eval-search", config, dataset_hash(&paths)?, seeds);
    manifest.details = json!({
        "num_probes": report.num_probes,
        "num_skipped": report.skipped.len(),
    });
    manifest.wall_time_ms = start.elapsed().as_millis() as u64;
    manifest.write(&sidecar_manifest_path(&args.out))?;
    Ok(manifest)
}

pub fn run_det(args: &EvalDetArgs) -> CliResult<Manifest> {
    let start = Instant::now();
    let paths = DatasetPaths::in_dir(&args.data);
    let ds = load_dataset(&paths)?;
    let report = evaluate_detection(ds.items(), ds.frames(), args.iou)?;
    write_text(&args.out, &report.to_text())?;
    let config = json!({ "iou_threshold": args.iou });
    let mut manifest = Manifest::new("eval-det", config, dataset_hash(&paths)?, vec![]);
    manifest.wall_time_ms = start.elapsed().as_millis() as u64;
    manifest.write(&sidecar_manifest_path(&args.out))?;
    Ok(manifest)
}
