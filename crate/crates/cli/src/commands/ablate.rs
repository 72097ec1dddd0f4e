use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use rayon::prelude::*;
use serde_json::json;

use orsearch::ranking::format_sig9;
use orsearch::{evaluate_search, or_score, Dataset, EvalReport, RankedList, ScoringMode};

use crate::error::{CliError, CliResult};
use crate::io::{create_dir, write_text};
use crate::lists::{parse_gallery_sizes, parse_ks, parse_modes, parse_seeds, GallerySize};
use crate::manifest::{dataset_hash, probes_hash, Manifest, MANIFEST_FILE};

use super::rank::{load_with_probes, rank_probe};

/// Largest allowed gap between a combined score and its factorisations.
pub const CONSISTENCY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Args)]
pub struct AblateArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Probe list in the probes.jsonl format; defaults to the dataset's own.
    #[arg(long)]
    pub probes: Option<PathBuf>,
    /// `all` or a comma list of visual, o, r, or.
    #[arg(long, default_value = "all")]
    pub modes: String,
    /// Comma list of gallery sizes; `full` searches every detection.
    #[arg(long, default_value = "full")]
    pub gallery_sizes: String,
    /// Sampling seeds: a comma list or a range such as `1..5`.
    #[arg(long, default_value = "1")]
    pub seeds: String,
    #[arg(long, default_value = "1,5,10")]
    pub ks: String,
    #[arg(long, default_value_t = orsearch::DEFAULT_IOU_THRESHOLD)]
    pub iou: f64,
    /// Entries per probe whose scores are checked and logged.
    #[arg(long, default_value_t = 3)]
    pub log_per_probe: usize,
    /// Also search the probe's own frame.
    #[arg(long)]
    pub include_probe_frame: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone)]
pub struct AblationPlan {
    pub modes: Vec<ScoringMode>,
    pub sizes: Vec<GallerySize>,
    pub seeds: Vec<u64>,
    pub ks: Vec<usize>,
    pub iou: f64,
    pub log_per_probe: usize,
    pub exclude_probe_frame: bool,
}

#[derive(Debug, Clone)]
pub struct AblationCell {
    pub mode: ScoringMode,
    pub size: GallerySize,
    pub seed: u64,
    pub report: EvalReport,
}

/// One checked (probe, item) pair: the OR score and its two factorisations.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyRecord {
    pub size: GallerySize,
    pub seed: u64,
    pub probe_id: String,
    pub item_id: String,
    pub or: f64,
    pub o_times_r: f64,
    pub r_times_o: f64,
}

impl ConsistencyRecord {
    pub fn max_error(&self) -> f64 {
        (self.or - self.o_times_r).abs().max((self.or - self.r_times_o).abs())
    }

    pub fn holds(&self) -> bool {
        self.max_error() <= CONSISTENCY_TOLERANCE
    }
}

#[derive(Debug, Clone)]
pub struct Ablation {
    /// Ordered by gallery size, seed, then mode.
    pub cells: Vec<AblationCell>,
    pub consistency: Vec<ConsistencyRecord>,
}

impl Ablation {
    pub fn cell(&self, mode: ScoringMode, size: GallerySize, seed: u64) -> Option<&AblationCell> {
        self.cells
            .iter()
            .find(|c| c.mode == mode && c.size == size && c.seed == seed)
    }
}

/// Label of a mode in the summary table.
pub fn method_label(mode: ScoringMode) -> &'static str {
    match mode {
        ScoringMode::Visual => "baseline",
        ScoringMode::VisualR => "+R",
        ScoringMode::VisualO => "+O",
        ScoringMode::VisualOR => "+OR",
    }
}

const TABLE_ORDER: [ScoringMode; 4] = [
    ScoringMode::Visual,
    ScoringMode::VisualR,
    ScoringMode::VisualO,
    ScoringMode::VisualOR,
];

pub fn ablate(ds: &Dataset, plan: &AblationPlan) -> CliResult<Ablation> {
    let mut cells = Vec::new();
    let mut consistency = Vec::new();
    let gt = ds.ground_truth();
    for &size in &plan.sizes {
        for &seed in &plan.seeds {
            let per_probe: Vec<orsearch::Result<(Vec<RankedList>, Vec<ConsistencyRecord>)>> = ds
                .probes()
                .par_iter()
                .map(|p| {
                    let lists = plan
                        .modes
                        .iter()
                        .map(|&m| rank_probe(ds, p, m, size, seed, plan.exclude_probe_frame).map(|(l, _)| l))
                        .collect::<orsearch::Result<Vec<_>>>()?;
                    let checks = check_consistency(ds, p, &lists[0], plan.log_per_probe, size, seed)?;
                    Ok((lists, checks))
                })
                .collect();
            let mut by_mode: Vec<Vec<RankedList>> = vec![Vec::new(); plan.modes.len()];
            for (probe, result) in ds.probes().iter().zip(per_probe) {
                let (lists, checks) = result.map_err(|e| CliError::from(e).context(&format!("probe `{probe}`")))?;
                for (slot, list) in by_mode.iter_mut().zip(lists) {
                    slot.push(list);
                }
                consistency.extend(checks);
            }
            for (&mode, lists) in plan.modes.iter().zip(by_mode) {
                let report = evaluate_search(&lists, &gt, &plan.ks, plan.iou)?;
                cells.push(AblationCell {
                    mode,
                    size,
                    seed,
                    report,
                });
            }
        }
    }
    Ok(Ablation { cells, consistency })
}

fn check_consistency(
    ds: &Dataset,
    probe_id: &str,
    list: &RankedList,
    limit: usize,
    size: GallerySize,
    seed: u64,
) -> orsearch::Result<Vec<ConsistencyRecord>> {
    if limit == 0 {
        return Ok(Vec::new());
    }
    let ctx = orsearch::build_probe_context(ds, probe_id)?;
    list.entries
        .iter()
        .take(limit)
        .map(|e| {
            let item = ds
                .item(&e.item_id)
                .ok_or_else(|| orsearch::Error::UnknownItem(e.item_id.clone()))?;
            let or = or_score(&ctx, item, ScoringMode::VisualOR)?;
            let o = or_score(&ctx, item, ScoringMode::VisualO)?;
            let r = or_score(&ctx, item, ScoringMode::VisualR)?;
            Ok(ConsistencyRecord {
                size,
                seed,
                probe_id: probe_id.to_owned(),
                item_id: e.item_id.clone(),
                or: or.combined,
                o_times_r: o.combined * or.repulsion,
                r_times_o: r.combined * or.objectness,
            })
        })
        .collect()
}

fn report_name(cell: &AblationCell) -> String {
    format!("{}_g{}_s{}.txt", cell.mode.as_str(), cell.size.label(), cell.seed)
}

/// Mean mAP and CMC at the smallest cut-off over seeds, per mode and size,
/// in percent; rows follow the baseline, +R, +O, +OR order.
pub fn summary_table(ab: &Ablation, plan: &AblationPlan) -> String {
    let k = plan.ks.iter().copied().min().unwrap_or(1);
    let mut out = String::from("method");
    for size in &plan.sizes {
        let _ = write!(out, "\tmap_g{0}\ttop{k}_g{0}", size.label());
    }
    out.push('\n');
    for mode in TABLE_ORDER.into_iter().filter(|m| plan.modes.contains(m)) {
        out.push_str(method_label(mode));
        for &size in &plan.sizes {
            let cells: Vec<&AblationCell> = plan.seeds.iter().filter_map(|&s| ab.cell(mode, size, s)).collect();
            let n = cells.len().max(1) as f64;
            let map = cells.iter().map(|c| c.report.map_score).sum::<f64>() / n;
            let top = cells.iter().map(|c| c.report.cmc_at(k).unwrap_or(0.0)).sum::<f64>() / n;
            let _ = write!(out, "\t{:.2}\t{:.2}", 100.0 * map, 100.0 * top);
        }
        out.push('\n');
    }
    out
}

pub fn per_run_table(ab: &Ablation, plan: &AblationPlan) -> String {
    let mut out = String::from("mode\tgallery_size\tseed\tnum_probes\tnum_skipped\tmap");
    for k in sorted_ks(plan) {
        let _ = write!(out, "\ttop{k}");
    }
    out.push('\n');
    for c in &ab.cells {
        let _ = write!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            c.mode.as_str(),
            c.size.label(),
            c.seed,
            c.report.num_probes,
            c.report.skipped.len(),
            format_sig9(c.report.map_score)
        );
        for (_, v) in &c.report.cmc {
            let _ = write!(out, "\t{}", format_sig9(*v));
        }
        out.push('\n');
    }
    out
}

fn sorted_ks(plan: &AblationPlan) -> Vec<usize> {
    let mut ks = plan.ks.clone();
    ks.sort_unstable();
    ks.dedup();
    ks
}

pub fn consistency_table(ab: &Ablation) -> String {
    let mut out = String::from("gallery_size\tseed\tprobe_id\titem_id\tor\to_times_r\tr_times_o\tmax_abs_err\tok\n");
    for r in &ab.consistency {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.size.label(),
            r.seed,
            r.probe_id,
            r.item_id,
            format_sig9(r.or),
            format_sig9(r.o_times_r),
            format_sig9(r.r_times_o),
            format_sig9(r.max_error()),
            if r.holds() { "yes" } else { "no" }
        );
    }
    out
}

pub fn parse_plan(args: &AblateArgs) -> CliResult<AblationPlan> {
    fn usage(flag: &'static str) -> impl Fn(String) -> CliError {
        move |e| CliError::usage(format!("{flag}: {e}"))
    }
    Ok(AblationPlan {
        modes: parse_modes(&args.modes).map_err(usage("--modes"))?,
        sizes: parse_gallery_sizes(&args.gallery_sizes).map_err(usage("--gallery-sizes"))?,
        seeds: parse_seeds(&args.seeds).map_err(usage("--seeds"))?,
        ks: parse_ks(&args.ks).map_err(usage("--ks"))?,
        iou: args.iou,
        log_per_probe: args.log_per_probe,
        exclude_probe_frame: !args.include_probe_frame,
    })
}

pub fn run(args: &AblateArgs) -> CliResult<(Manifest, Ablation)> {
    let start = Instant::now();
    let plan = parse_plan(args)?;
    let (ds, paths) = load_with_probes(&args.data, args.probes.as_deref())?;
    let ab = ablate(&ds, &plan)?;

    let reports = args.out.join("reports");
    create_dir(&reports)?;
    for cell in &ab.cells {
        write_text(&reports.join(report_name(cell)), &cell.report.to_text())?;
    }
    write_text(&args.out.join("summary.tsv"), &summary_table(&ab, &plan))?;
    write_text(&args.out.join("runs.tsv"), &per_run_table(&ab, &plan))?;
    write_text(&args.out.join("consistency.tsv"), &consistency_table(&ab))?;

    let violations = ab.consistency.iter().filter(|r| !r.holds()).count();
    let config = json!({
        "modes": plan.modes.iter().map(|m| m.as_str()).collect::<Vec<_>>(),
        "gallery_sizes": plan.sizes.iter().map(|s| s.label()).collect::<Vec<_>>(),
        "ks": sorted_ks(&plan),
        "iou_threshold": plan.iou,
        "log_per_probe": plan.log_per_probe,
        "exclude_probe_frame": plan.exclude_probe_frame,
        "probes_hash": probes_hash(&ds),
    });
    let mut manifest = Manifest::new("ablate", config, dataset_hash(&paths)?, plan.seeds.clone());
    manifest.details = json!({
        "consistency_checked": ab.consistency.len(),
        "consistency_violations": violations,
    });
    manifest.wall_time_ms = start.elapsed().as_millis() as u64;
    manifest.write(&args.out.join(MANIFEST_FILE))?;
    if violations > 0 {
        return Err(CliError::invariant(format!(
            "{violations} logged scores break VisualOR = VisualO x R = VisualR x O; see consistency.tsv"
        )));
    }
    Ok((manifest, ab))
}
