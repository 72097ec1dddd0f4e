use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde_json::json;

use orsearch::dataset::{
    detection_score_histogram, has_two_modes, repulsion_pair_census, score_fractions, visual_scorer, PairCensus,
    ScoreFractions, ScoreHistograms,
};
use orsearch::ranking::format_sig9;
use orsearch::{load_dataset, Dataset, DatasetPaths};

use crate::error::{CliError, CliResult};
use crate::io::{create_dir, write_text};
use crate::manifest::{dataset_hash, Manifest, MANIFEST_FILE};

#[derive(Debug, Clone, Args)]
pub struct StatsArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Number of equal-width score bins on [0, 1].
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    /// Score threshold for the summary fractions.
    #[arg(long, default_value_t = 0.9)]
    pub threshold: f64,
    /// Also write histograms.csv for plotting.
    #[arg(long)]
    pub csv: bool,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stats {
    pub histograms: ScoreHistograms,
    pub fractions: ScoreFractions,
    pub distractor_bimodal: bool,
    pub census: PairCensus,
}

pub fn compute(ds: &Dataset, bins: usize, threshold: f64) -> CliResult<Stats> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::usage(format!("--threshold {threshold} is outside [0, 1]")));
    }
    let histograms = detection_score_histogram(ds, bins)?;
    Ok(Stats {
        distractor_bimodal: has_two_modes(&histograms.distractor),
        fractions: score_fractions(ds, threshold),
        census: repulsion_pair_census(ds, visual_scorer)?,
        histograms,
    })
}

fn histogram_rows(h: &ScoreHistograms, sep: char) -> String {
    let mut out = format!("bin_low{sep}bin_high{sep}positive{sep}distractor\n");
    for i in 0..h.bins() {
        let _ = writeln!(
            out,
            "{}{sep}{}{sep}{}{sep}{}",
            format_sig9(h.edges[i]),
            format_sig9(h.edges[i + 1]),
            h.positive[i],
            h.distractor[i]
        );
    }
    out
}

fn summary(s: &Stats, threshold: f64) -> String {
    let f = &s.fractions;
    format!(
        "threshold\t{}\nnum_positive\t{}\nnum_distractor\t{}\npositive_above_threshold\t{}\ndistractor_below_threshold\t{}\ndistractor_bimodal\t{}\n",
        format_sig9(threshold),
        f.num_positive,
        f.num_distractor,
        format_sig9(f.positive_above),
        format_sig9(f.distractor_below),
        s.distractor_bimodal
    )
}

fn census(c: &PairCensus) -> String {
    format!(
        "# (probe, true positive) pairs where the positive is more similar to the probe than to every\n\
         # other detection in the probe's frame, by visual similarity alone.\n\
         satisfied\t{}\nviolated\t{}\n",
        c.satisfied, c.violated
    )
}

pub fn run(args: &StatsArgs) -> CliResult<(Manifest, Stats)> {
    let start = Instant::now();
    let paths = DatasetPaths::in_dir(&args.data);
    let ds = load_dataset(&paths)?;
    let stats = compute(&ds, args.bins, args.threshold)?;

    create_dir(&args.out)?;
    write_text(
        &args.out.join("histograms.tsv"),
        &histogram_rows(&stats.histograms, '\t'),
    )?;
    if args.csv {
        write_text(
            &args.out.join("histograms.csv"),
            &histogram_rows(&stats.histograms, ','),
        )?;
    }
    write_text(&args.out.join("summary.tsv"), &summary(&stats, args.threshold))?;
    write_text(&args.out.join("census.tsv"), &census(&stats.census))?;

    let config = json!({ "bins": args.bins, "threshold": args.threshold, "csv": args.csv });
    let mut manifest = Manifest::new("stats", config, dataset_hash(&paths)?, vec![]);
    manifest.wall_time_ms = start.elapsed().as_millis() as u64;
    manifest.write(&args.out.join(MANIFEST_FILE))?;
    Ok((manifest, stats))
}
