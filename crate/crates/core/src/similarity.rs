//! Objectness- and repulsion-aware similarity.
//!
//! The combined score of a gallery detection is the product of three factors:
//!
//! * the visual term, `1 - ½‖u_q - u_g‖²` over unit-normalized embeddings;
//! * the objectness term, `exp(det_score - 1)`, which discounts detections the
//!   detector is unsure contain a person;
//! * the repulsion term, `exp(gap / best)`, where `best` is the highest
//!   similarity between the gallery detection and any query-frame detection
//!   (probe or neighbor) and `gap` is the probe's similarity minus `best`.
//!   A detection that looks more like one of the probe's neighbors than like
//!   the probe is attenuated; one closest to the probe is left untouched.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{squared_distance, squared_distances};
use crate::types::{Embedding, GalleryItem, ProbeContext};

/// Best query-side similarities at or below this carry no repulsion
/// information; the term is then 1.
pub const EPS_DEN: f64 = 1e-6;

/// Which factors enter the combined score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ScoringMode {
    /// Visual term only.
    Visual,
    /// Visual × objectness.
    VisualO,
    /// Visual × repulsion.
    VisualR,
    /// Visual × repulsion × objectness.
    VisualOR,
}

impl ScoringMode {
    pub const ALL: [ScoringMode; 4] = [
        ScoringMode::Visual,
        ScoringMode::VisualO,
        ScoringMode::VisualR,
        ScoringMode::VisualOR,
    ];

    pub fn uses_objectness(self) -> bool {
        matches!(self, ScoringMode::VisualO | ScoringMode::VisualOR)
    }

    pub fn uses_repulsion(self) -> bool {
        matches!(self, ScoringMode::VisualR | ScoringMode::VisualOR)
    }

    /// Short name used on the command line and in file names.
    pub fn as_str(self) -> &'static str {
        match self {
            ScoringMode::Visual => "visual",
            ScoringMode::VisualO => "o",
            ScoringMode::VisualR => "r",
            ScoringMode::VisualOR => "or",
        }
    }
}

impl fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScoringMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "visual" | "v" => Ok(ScoringMode::Visual),
            "o" | "visual+o" | "visualo" => Ok(ScoringMode::VisualO),
            "r" | "visual+r" | "visualr" => Ok(ScoringMode::VisualR),
            "or" | "visual+or" | "visualor" => Ok(ScoringMode::VisualOR),
            other => Err(Error::Config(format!(
                "unknown scoring mode `{other}` (expected visual, o, r or or)"
            ))),
        }
    }
}

/// All intermediate quantities for one (probe, gallery item) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreBreakdown {
    pub visual: f64,
    pub objectness: f64,
    pub repulsion: f64,
    pub gap: f64,
    /// Index into the query set of the most similar query detection; 0 is the probe.
    pub nearest_query_index: usize,
    pub combined: f64,
}

/// Outcome of the repulsion computation on one similarity row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Repulsion {
    pub value: f64,
    pub gap: f64,
    pub nearest_query_index: usize,
}

impl Repulsion {
    const NEUTRAL: Repulsion = Repulsion {
        value: 1.0,
        gap: 0.0,
        nearest_query_index: 0,
    };
}

/// Visual similarity from two unit vectors; clamped to [-1, 1].
pub fn visual_from_units(a: &[f64], b: &[f64]) -> f64 {
    visual_from_squared_distance(squared_distance(a, b))
}

fn visual_from_squared_distance(d: f64) -> f64 {
    (1.0 - 0.5 * d).clamp(-1.0, 1.0)
}

/// Visual similarity of two raw embeddings (cosine similarity).
pub fn visual_similarity(fq: &Embedding, fg: &Embedding) -> Result<f64> {
    if fq.dim() != fg.dim() {
        return Err(Error::DimensionMismatch {
            expected: fq.dim(),
            actual: fg.dim(),
        });
    }
    Ok(visual_from_units(fq.unit()?, fg.unit()?))
}

pub fn objectness_term(det_score: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&det_score) {
        return Err(Error::OutOfRange {
            what: "det_score",
            value: det_score,
        });
    }
    Ok((det_score - 1.0).exp())
}

/// Repulsion term for one similarity row `[S(probe, g), S(neighbor_1, g), ...]`.
///
/// Ties in the arg-max resolve to the lowest index, so the probe wins ties.
/// The result is floored at `f64::MIN_POSITIVE` so it never underflows to 0.
pub fn repulsion_term(row: &[f64]) -> Result<Repulsion> {
    let (&first, rest) = row.split_first().ok_or(Error::EmptyRow)?;
    let mut nearest = 0;
    let mut best = first;
    for (i, &s) in rest.iter().enumerate() {
        if s > best {
            best = s;
            nearest = i + 1;
        }
    }
    if nearest == 0 || !(best > EPS_DEN) {
        return Ok(Repulsion::NEUTRAL);
    }
    let gap = first - best;
    Ok(Repulsion {
        value: (gap / best).exp().max(f64::MIN_POSITIVE),
        gap,
        nearest_query_index: nearest,
    })
}

/// Unit vectors of a probe context, computed once and reused across items.
pub(crate) struct QueryUnits<'a> {
    units: Vec<&'a [f64]>,
    dim: usize,
}

impl<'a> QueryUnits<'a> {
    pub(crate) fn new(ctx: &'a ProbeContext) -> Result<Self> {
        let dim = ctx.probe().embedding.dim();
        let units = ctx
            .queries()
            .map(|q| {
                if q.embedding.dim() != dim {
                    return Err(Error::for_item(
                        &q.item_id,
                        Error::DimensionMismatch {
                            expected: dim,
                            actual: q.embedding.dim(),
                        },
                    ));
                }
                q.embedding.unit().map_err(|e| Error::for_item(&q.item_id, e))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { units, dim })
    }

    fn score(&self, item: &GalleryItem, mode: ScoringMode, row: &mut Vec<f64>) -> Result<ScoreBreakdown> {
        if item.embedding.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: item.embedding.dim(),
            });
        }
        self.score_unit(item.embedding.unit()?, item.det_score, mode, row)
    }

    fn score_unit(
        &self,
        unit: &[f64],
        det_score: f64,
        mode: ScoringMode,
        row: &mut Vec<f64>,
    ) -> Result<ScoreBreakdown> {
        let objectness = if mode.uses_objectness() {
            objectness_term(det_score)?
        } else {
            1.0
        };
        let (visual, rep) = if mode.uses_repulsion() {
            row.clear();
            squared_distances(&self.units, unit, row);
            for d in row.iter_mut() {
                *d = visual_from_squared_distance(*d);
            }
            (row[0], repulsion_term(row)?)
        } else {
            (visual_from_units(self.units[0], unit), Repulsion::NEUTRAL)
        };
        Ok(ScoreBreakdown {
            visual,
            objectness,
            repulsion: rep.value,
            gap: rep.gap,
            nearest_query_index: rep.nearest_query_index,
            combined: visual * rep.value * objectness,
        })
    }
}

/// Scores one gallery item against a probe context.
pub fn or_score(ctx: &ProbeContext, item: &GalleryItem, mode: ScoringMode) -> Result<ScoreBreakdown> {
    let queries = QueryUnits::new(ctx)?;
    queries
        .score(item, mode, &mut Vec::new())
        .map_err(|e| Error::for_item(&item.item_id, e))
}

/// Scores every gallery item against a probe context; element `j` matches
/// `or_score(ctx, &gallery[j], mode)` bit for bit.
pub fn or_score_matrix<G: AsRef<GalleryItem>>(
    ctx: &ProbeContext,
    gallery: &[G],
    mode: ScoringMode,
) -> Result<Vec<ScoreBreakdown>> {
    if gallery.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let queries = QueryUnits::new(ctx)?;
    let mut row = Vec::with_capacity(ctx.num_neighbors() + 1);
    gallery
        .iter()
        .map(|g| {
            let item = g.as_ref();
            queries
                .score(item, mode, &mut row)
                .map_err(|e| Error::for_item(&item.item_id, e))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::BBox;

    fn item(id: &str, frame: &str, v: &[f32], score: f64) -> GalleryItem {
        GalleryItem::new(
            id,
            frame,
            BBox::new(0.0, 0.0, 10.0, 20.0).unwrap(),
            score,
            Embedding::new(v.to_vec()).unwrap(),
            None,
        )
        .unwrap()
    }

    fn emb(v: &[f32]) -> Embedding {
        Embedding::new(v.to_vec()).unwrap()
    }

    #[test]
    fn visual_examples() {
        let e1 = emb(&[1.0, 0.0, 0.0]);
        let e2 = emb(&[0.0, 1.0, 0.0]);
        let neg = emb(&[-1.0, 0.0, 0.0]);
        assert_eq!(visual_similarity(&e1, &e1).unwrap(), 1.0);
        assert_eq!(visual_similarity(&e1, &e2).unwrap(), 0.0);
        assert_eq!(visual_similarity(&e1, &neg).unwrap(), -1.0);
        // scale does not matter
        let s = visual_similarity(&emb(&[3.0, 4.0]), &emb(&[0.3, 0.4])).unwrap();
        assert!((s - 1.0).abs() < 1e-12);
        assert!(matches!(
            visual_similarity(&e1, &emb(&[1.0, 0.0])),
            Err(Error::DimensionMismatch { expected: 3, actual: 2 })
        ));
        assert_eq!(visual_similarity(&e1, &emb(&[0.0, 0.0, 0.0])), Err(Error::ZeroVector));
    }

    #[test]
    fn objectness_examples() {
        assert_eq!(objectness_term(1.0).unwrap(), 1.0);
        assert!((objectness_term(0.5).unwrap() - 0.606_530_659_712_633_4).abs() < 1e-15);
        assert!((objectness_term(0.0).unwrap() - 0.367_879_441_171_442_3).abs() < 1e-15);
        assert!(objectness_term(-0.1).is_err());
        assert!(objectness_term(1.5).is_err());
        assert!(objectness_term(f64::NAN).is_err());
    }

    #[test]
    fn repulsion_examples() {
        let r = repulsion_term(&[0.9, 0.3, 0.5]).unwrap();
        assert_eq!((r.value, r.gap, r.nearest_query_index), (1.0, 0.0, 0));

        let r = repulsion_term(&[0.4, 0.8]).unwrap();
        assert!((r.value - 0.606_530_659_712_633_4).abs() < 1e-15);
        assert!((r.gap + 0.4).abs() < 1e-15);
        assert_eq!(r.nearest_query_index, 1);

        let r = repulsion_term(&[-0.2, -0.1]).unwrap();
        assert_eq!((r.value, r.gap, r.nearest_query_index), (1.0, 0.0, 0));

        assert_eq!(repulsion_term(&[]), Err(Error::EmptyRow));
    }

    #[test]
    fn repulsion_ties_favor_probe() {
        let r = repulsion_term(&[0.7, 0.7, 0.2]).unwrap();
        assert_eq!(r, Repulsion::NEUTRAL);
        // among neighbors the first one wins
        let r = repulsion_term(&[0.1, 0.7, 0.7]).unwrap();
        assert_eq!(r.nearest_query_index, 1);
    }

    #[test]
    fn repulsion_never_underflows() {
        let r = repulsion_term(&[-1.0, 2e-6]).unwrap();
        assert!(r.value > 0.0);
    }

    #[test]
    fn or_score_reduces_to_visual() {
        let probe = item("p", "f0", &[1.0, 0.2, 0.0], 1.0);
        let ctx = ProbeContext::new(probe, vec![]).unwrap();
        let g = item("g", "f1", &[0.5, 0.5, 0.1], 1.0);
        let b = or_score(&ctx, &g, ScoringMode::VisualOR).unwrap();
        assert_eq!(b.combined, b.visual);
        let g = item("g", "f1", &[0.5, 0.5, 0.1], 0.3);
        let neighbor = item("n", "f0", &[0.5, 0.5, 0.0], 0.9);
        let ctx = ProbeContext::new(ctx.probe().clone(), vec![neighbor]).unwrap();
        let b = or_score(&ctx, &g, ScoringMode::Visual).unwrap();
        assert_eq!(b.combined, b.visual);
        assert_eq!((b.objectness, b.repulsion), (1.0, 1.0));
    }

    #[test]
    fn or_score_composes_terms() {
        // visual 0.6, neighbor similarity 0.8, det_score 0.8
        let probe = item("p", "f0", &[1.0, 0.0, 0.0], 1.0);
        let neighbor = item("n", "f0", &[0.0, 1.0, 0.0], 1.0);
        let ctx = ProbeContext::new(probe, vec![neighbor]).unwrap();
        let g = item("g", "f1", &[3.0, 4.0, 0.0], 0.8);
        let b = or_score(&ctx, &g, ScoringMode::VisualOR).unwrap();
        assert!((b.visual - 0.6).abs() < 1e-12);
        assert!((b.objectness - 0.818_730_753_077_981_8).abs() < 1e-12);
        assert!((b.repulsion - 0.778_800_783_071_404_9).abs() < 1e-12);
        assert_eq!(b.nearest_query_index, 1);
        // 0.6 * e^-0.25 * e^-0.2 at 30 digits
        assert!((b.combined - 0.382_576_890_973_064).abs() < 1e-12);
    }

    #[test]
    fn matrix_matches_single_calls() {
        let probe = item("p", "f0", &[1.0, 0.1, 0.3], 1.0);
        let n1 = item("n1", "f0", &[0.1, 1.0, 0.2], 0.7);
        let ctx = ProbeContext::new(probe, vec![n1]).unwrap();
        let gallery = vec![
            item("a", "f1", &[0.9, 0.2, 0.1], 0.95),
            item("b", "f1", &[0.2, 0.9, 0.1], 0.6),
            item("c", "f2", &[0.3, 0.3, 0.9], 0.8),
        ];
        for mode in ScoringMode::ALL {
            let m = or_score_matrix(&ctx, &gallery, mode).unwrap();
            for (g, b) in gallery.iter().zip(&m) {
                assert_eq!(*b, or_score(&ctx, g, mode).unwrap());
            }
        }
        let single = or_score_matrix(&ctx, &gallery[..1], ScoringMode::VisualOR).unwrap();
        assert_eq!(
            single,
            vec![or_score(&ctx, &gallery[0], ScoringMode::VisualOR).unwrap()]
        );
        let empty: Vec<GalleryItem> = vec![];
        assert_eq!(
            or_score_matrix(&ctx, &empty, ScoringMode::Visual),
            Err(Error::EmptyGallery)
        );
    }

    #[test]
    fn matrix_reports_offending_item() {
        let ctx = ProbeContext::new(item("p", "f0", &[1.0, 0.0], 1.0), vec![]).unwrap();
        let gallery = vec![
            item("ok", "f1", &[1.0, 1.0], 1.0),
            item("bad", "f1", &[1.0, 1.0, 1.0], 1.0),
        ];
        match or_score_matrix(&ctx, &gallery, ScoringMode::Visual) {
            Err(Error::Item { item_id, source }) => {
                assert_eq!(item_id, "bad");
                assert!(matches!(*source, Error::DimensionMismatch { .. }));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn mode_names_round_trip() {
        for m in ScoringMode::ALL {
            assert_eq!(m.as_str().parse::<ScoringMode>().unwrap(), m);
        }
        assert!("xyz".parse::<ScoringMode>().is_err());
    }
}
