use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::similarity::visual_similarity;
use crate::types::GalleryItem;

use super::{build_probe_context, Dataset};

/// Detection-score histograms of labeled detections and distractors over
/// `bins` equal-width bins on [0, 1]; a score of exactly 1 falls in the last bin.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreHistograms {
    pub edges: Vec<f64>,
    pub positive: Vec<u64>,
    pub distractor: Vec<u64>,
}

impl ScoreHistograms {
    pub fn bins(&self) -> usize {
        self.positive.len()
    }
}

pub fn detection_score_histogram(ds: &Dataset, bins: usize) -> Result<ScoreHistograms> {
    if bins < 2 {
        return Err(Error::InvalidBins(bins));
    }
    let mut positive = vec![0u64; bins];
    let mut distractor = vec![0u64; bins];
    for item in ds.items() {
        let b = ((item.det_score * bins as f64) as usize).min(bins - 1);
        if item.person_id.is_some() {
            positive[b] += 1;
        } else {
            distractor[b] += 1;
        }
    }
    let edges = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    Ok(ScoreHistograms {
        edges,
        positive,
        distractor,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreFractions {
    pub num_positive: usize,
    pub num_distractor: usize,
    /// Share of labeled detections scoring strictly above the threshold.
    pub positive_above: f64,
    /// Share of distractors scoring strictly below the threshold.
    pub distractor_below: f64,
}

pub fn score_fractions(ds: &Dataset, threshold: f64) -> ScoreFractions {
    let (mut np, mut nd, mut above, mut below) = (0usize, 0usize, 0usize, 0usize);
    for item in ds.items() {
        if item.person_id.is_some() {
            np += 1;
            above += usize::from(item.det_score > threshold);
        } else {
            nd += 1;
            below += usize::from(item.det_score < threshold);
        }
    }
    let frac = |a: usize, n: usize| if n == 0 { 0.0 } else { a as f64 / n as f64 };
    ScoreFractions {
        num_positive: np,
        num_distractor: nd,
        positive_above: frac(above, np),
        distractor_below: frac(below, nd),
    }
}

/// True when some bin sits at or below half of the smaller of the tallest
/// bins on either side of it, and both of those hold at least 5% of the mass.
pub fn has_two_modes(counts: &[u64]) -> bool {
    let total: u64 = counts.iter().sum();
    if counts.len() < 3 || total == 0 {
        return false;
    }
    let mut left_max = vec![0u64; counts.len()];
    for i in 1..counts.len() {
        left_max[i] = left_max[i - 1].max(counts[i - 1]);
    }
    let mut right_max = 0u64;
    for j in (1..counts.len() - 1).rev() {
        right_max = right_max.max(counts[j + 1]);
        let shoulder = left_max[j].min(right_max);
        if shoulder as f64 >= 0.05 * total as f64 && (counts[j] as f64) <= 0.5 * shoulder as f64 {
            return true;
        }
    }
    false
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PairCensus {
    pub satisfied: u64,
    pub violated: u64,
}

pub fn visual_scorer(a: &GalleryItem, b: &GalleryItem) -> Result<f64> {
    visual_similarity(&a.embedding, &b.embedding)
}

/// Counts (probe, true positive) pairs where the positive is strictly more
/// similar to the probe than to every neighbor of the probe.
pub fn repulsion_pair_census<F>(ds: &Dataset, scorer: F) -> Result<PairCensus>
where
    F: Fn(&GalleryItem, &GalleryItem) -> Result<f64> + Sync,
{
    let per_probe = ds
        .probes()
        .par_iter()
        .map(|probe_id| -> Result<PairCensus> {
            let ctx = build_probe_context(ds, probe_id)?;
            let probe = ctx.probe();
            let person = probe.person_id.as_deref();
            let mut census = PairCensus::default();
            for item in ds.items() {
                if item.frame_id == probe.frame_id || item.person_id.as_deref() != person {
                    continue;
                }
                let to_probe = scorer(probe, item)?;
                let mut ok = true;
                for n in ctx.neighbors() {
                    if scorer(n, item)? >= to_probe {
                        ok = false;
                        break;
                    }
                }
                if ok {
                    census.satisfied += 1;
                } else {
                    census.violated += 1;
                }
            }
            Ok(census)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_probe.into_iter().fold(PairCensus::default(), |acc, c| PairCensus {
        satisfied: acc.satisfied + c.satisfied,
        violated: acc.violated + c.violated,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BBox, Embedding, Frame};

    fn item(id: &str, frame: &str, v: &[f32], score: f64, person: Option<&str>) -> GalleryItem {
        GalleryItem::new(
            id,
            frame,
            BBox::new(0.0, 0.0, 10.0, 20.0).unwrap(),
            score,
            Embedding::new(v.to_vec()).unwrap(),
            person.map(str::to_owned),
        )
        .unwrap()
    }

    fn dataset(items: Vec<GalleryItem>, probes: &[&str]) -> Dataset {
        let mut frames: Vec<String> = items.iter().map(|i| i.frame_id.clone()).collect();
        frames.sort();
        frames.dedup();
        let frames = frames.into_iter().map(|f| Frame::new(f, vec![]).unwrap()).collect();
        Dataset::new(2, items, frames, probes.iter().map(|p| p.to_string()).collect()).unwrap()
    }

    #[test]
    fn histogram_binning() {
        let ds = dataset(
            vec![
                item("a", "f", &[1.0, 0.0], 0.95, Some("x")),
                item("b", "f", &[1.0, 0.0], 0.95, Some("y")),
                item("c", "f", &[1.0, 0.0], 1.0, Some("z")),
            ],
            &[],
        );
        let h = detection_score_histogram(&ds, 10).unwrap();
        assert_eq!(h.positive[9], 3);
        assert_eq!(h.positive.iter().sum::<u64>(), 3);
        assert!(h.distractor.iter().all(|&c| c == 0));
        assert_eq!(h.edges.len(), 11);
        assert_eq!(detection_score_histogram(&ds, 1), Err(Error::InvalidBins(1)));
        let f = score_fractions(&ds, 0.9);
        assert_eq!((f.positive_above, f.distractor_below, f.num_distractor), (1.0, 0.0, 0));
    }

    #[test]
    fn bimodality() {
        assert!(has_two_modes(&[0, 10, 30, 10, 2, 1, 5, 25, 8]));
        assert!(!has_two_modes(&[0, 5, 10, 30, 10, 5, 0]));
        assert!(!has_two_modes(&[0, 0, 0]));
        // a one-count blip is not a mode
        assert!(!has_two_modes(&[1, 0, 0, 0, 50, 100, 50]));
    }

    #[test]
    fn census_without_neighbors_is_vacuous() {
        let ds = dataset(
            vec![
                item("p", "f0", &[1.0, 0.0], 1.0, Some("a")),
                item("g1", "f1", &[0.0, 1.0], 1.0, Some("a")),
                item("g2", "f2", &[1.0, 0.1], 1.0, Some("a")),
            ],
            &["p"],
        );
        let c = repulsion_pair_census(&ds, visual_scorer).unwrap();
        assert_eq!(
            c,
            PairCensus {
                satisfied: 2,
                violated: 0
            }
        );
    }

    #[test]
    fn census_counts_occluded_positive_as_violated() {
        // the positive g1 is a blend that sits closer to the occluder n than to the probe
        let ds = dataset(
            vec![
                item("p", "f0", &[1.0, 0.0], 1.0, Some("a")),
                item("n", "f0", &[0.0, 1.0], 1.0, Some("b")),
                item("g1", "f1", &[0.4, 0.9], 1.0, Some("a")),
                item("g2", "f2", &[0.9, 0.2], 1.0, Some("a")),
            ],
            &["p"],
        );
        let c = repulsion_pair_census(&ds, visual_scorer).unwrap();
        assert_eq!(
            c,
            PairCensus {
                satisfied: 1,
                violated: 1
            }
        );
    }
}
