//! Straight-line reference implementations used to cross-check ranking and
//! evaluation. Nothing here shares caches, lookup tables or matching code with
//! the main path; only the documented floating-point evaluation order of the
//! scores is reproduced, so that rankings can be compared bit for bit.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ranking::{RankedEntry, RankedList};
use crate::similarity::{ScoreBreakdown, ScoringMode};
use crate::types::{BBox, Frame, GalleryItem, ProbeContext};

fn unit_of(item: &GalleryItem) -> Result<Vec<f64>> {
    let raw = item.embedding.values();
    let mut sum = 0.0f64;
    for &v in raw {
        let v = v as f64;
        sum += v * v;
    }
    let norm = sum.sqrt();
    if !(norm >= 1e-12) {
        return Err(Error::ZeroVector);
    }
    let mut out = Vec::with_capacity(raw.len());
    for &v in raw {
        out.push(v as f64 / norm);
    }
    Ok(out)
}

#[allow(clippy::manual_clamp)]
fn similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let mut lanes = [0.0f64; 8];
    for i in 0..a.len() {
        let d = a[i] - b[i];
        lanes[i % 8] += d * d;
    }
    let sq = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) + ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    let s = 1.0 - 0.5 * sq;
    Ok(if s > 1.0 {
        1.0
    } else if s < -1.0 {
        -1.0
    } else {
        s
    })
}

fn score_one(ctx: &ProbeContext, item: &GalleryItem, mode: ScoringMode) -> Result<ScoreBreakdown> {
    let g = unit_of(item)?;
    let p = unit_of(ctx.probe())?;
    let visual = similarity(&p, &g)?;

    let use_o = mode == ScoringMode::VisualO || mode == ScoringMode::VisualOR;
    let use_r = mode == ScoringMode::VisualR || mode == ScoringMode::VisualOR;

    let mut objectness = 1.0;
    if use_o {
        if !(item.det_score >= 0.0 && item.det_score <= 1.0) {
            return Err(Error::OutOfRange {
                what: "det_score",
                value: item.det_score,
            });
        }
        objectness = (item.det_score - 1.0).exp();
    }

    let mut repulsion = 1.0;
    let mut gap = 0.0;
    let mut nearest = 0usize;
    if use_r {
        let mut best = visual;
        for (i, n) in ctx.neighbors().iter().enumerate() {
            let s = similarity(&unit_of(n)?, &g)?;
            if s > best {
                best = s;
                nearest = i + 1;
            }
        }
        if nearest != 0 && best > 1e-6 {
            gap = visual - best;
            repulsion = (gap / best).exp();
            if repulsion < f64::MIN_POSITIVE {
                repulsion = f64::MIN_POSITIVE;
            }
        } else {
            nearest = 0;
        }
    }
    Ok(ScoreBreakdown {
        visual,
        objectness,
        repulsion,
        gap,
        nearest_query_index: nearest,
        combined: visual * repulsion * objectness,
    })
}

fn ranks_before(a: &RankedEntry, b: &RankedEntry) -> bool {
    a.scores.combined > b.scores.combined || (a.scores.combined == b.scores.combined && a.item_id < b.item_id)
}

/// Reference ranking with the same contract as `ranking::rank_gallery`.
pub fn brute_force_rank(
    ctx: &ProbeContext,
    gallery: &[GalleryItem],
    mode: ScoringMode,
    exclude_probe_frame: bool,
) -> Result<RankedList> {
    for i in 0..gallery.len() {
        for j in 0..i {
            if gallery[i].item_id == gallery[j].item_id {
                return Err(Error::DuplicateItem(gallery[i].item_id.clone()));
            }
        }
    }
    let mut entries = Vec::new();
    for item in gallery {
        if item.item_id == ctx.probe().item_id {
            continue;
        }
        if exclude_probe_frame && item.frame_id == ctx.probe().frame_id {
            continue;
        }
        let scores = score_one(ctx, item, mode).map_err(|e| Error::Item {
            item_id: item.item_id.clone(),
            source: Box::new(e),
        })?;
        entries.push(RankedEntry {
            item_id: item.item_id.clone(),
            scores,
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyGallery);
    }
    // selection sort
    for i in 0..entries.len() {
        let mut best = i;
        for j in i + 1..entries.len() {
            if ranks_before(&entries[j], &entries[best]) {
                best = j;
            }
        }
        entries.swap(i, best);
    }
    Ok(RankedList {
        probe_id: ctx.probe().item_id.clone(),
        mode,
        entries,
    })
}

fn overlap(a: &BBox, b: &BBox) -> f64 {
    let (ax1, ay1, ax2, ay2) = (a.x, a.y, a.x + a.w, a.y + a.h);
    let (bx1, by1, bx2, by2) = (b.x, b.y, b.x + b.w, b.y + b.h);
    let left = if ax1 > bx1 { ax1 } else { bx1 };
    let right = if ax2 < bx2 { ax2 } else { bx2 };
    let top = if ay1 > by1 { ay1 } else { by1 };
    let bottom = if ay2 < by2 { ay2 } else { by2 };
    if a == b {
        return 1.0;
    }
    if right <= left || bottom <= top {
        return 0.0;
    }
    let inter = (right - left) * (bottom - top);
    inter / (a.w * a.h + b.w * b.h - inter)
}

fn find_item<'a>(items: &'a [GalleryItem], id: &str) -> Option<&'a GalleryItem> {
    items.iter().find(|i| i.item_id == id)
}

fn find_frame<'a>(frames: &'a BTreeMap<String, Frame>, id: &str) -> Option<&'a Frame> {
    frames.values().find(|f| f.frame_id == id)
}

/// Greedy claim: the unclaimed candidate box with the largest overlap at or
/// above the threshold, earliest on ties.
fn claim(bbox: &BBox, frame: &Frame, person: Option<&str>, claimed: &mut Vec<(String, usize)>, threshold: f64) -> bool {
    let mut best: Option<usize> = None;
    let mut best_overlap = -1.0;
    for (idx, g) in frame.gt.iter().enumerate() {
        if let Some(p) = person {
            if g.person_id != p {
                continue;
            }
        }
        if claimed.iter().any(|(f, i)| *f == frame.frame_id && *i == idx) {
            continue;
        }
        let o = overlap(bbox, &g.bbox);
        if o >= threshold && o > best_overlap {
            best = Some(idx);
            best_overlap = o;
        }
    }
    match best {
        Some(idx) => {
            claimed.push((frame.frame_id.clone(), idx));
            true
        }
        None => false,
    }
}

fn precision_sum_ap(hits: &[bool], num_gt: usize) -> f64 {
    let mut total = 0.0;
    for p in 0..hits.len() {
        if hits[p] {
            let mut upto = 0;
            for &h in &hits[..=p] {
                if h {
                    upto += 1;
                }
            }
            total += upto as f64 / (p + 1) as f64;
        }
    }
    total / num_gt as f64
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSearch {
    pub map: f64,
    pub cmc: Vec<(usize, f64)>,
    pub num_probes: usize,
}

/// Reference search evaluation. Skips the same probes as `evaluate_search`
/// (unknown, unlabeled, no ground truth, unmatched references, duplicates).
pub fn brute_force_search(
    ranked: &[RankedList],
    frames: &BTreeMap<String, Frame>,
    items: &[GalleryItem],
    ks: &[usize],
    threshold: f64,
) -> OracleSearch {
    let mut results: Vec<(String, f64, Vec<bool>)> = Vec::new();
    'probes: for (li, list) in ranked.iter().enumerate() {
        for earlier in &ranked[..li] {
            if earlier.probe_id == list.probe_id {
                continue 'probes;
            }
        }
        let Some(probe) = find_item(items, &list.probe_id) else {
            continue;
        };
        let Some(person) = probe.person_id.as_deref() else {
            continue;
        };
        let mut num_gt = 0;
        for f in frames.values() {
            if f.frame_id == probe.frame_id {
                continue;
            }
            for g in &f.gt {
                if g.person_id == person {
                    num_gt += 1;
                }
            }
        }
        if num_gt == 0 {
            continue;
        }
        let mut claimed = Vec::new();
        let mut hits = Vec::new();
        for e in &list.entries {
            let Some(item) = find_item(items, &e.item_id) else {
                continue 'probes;
            };
            let Some(frame) = find_frame(frames, &item.frame_id) else {
                continue 'probes;
            };
            if frame.frame_id == probe.frame_id {
                hits.push(false);
            } else {
                hits.push(claim(&item.bbox, frame, Some(person), &mut claimed, threshold));
            }
        }
        let cmc_flags = ks
            .iter()
            .map(|&k| {
                let mut any = false;
                for h in hits.iter().take(k) {
                    any = any || *h;
                }
                any
            })
            .collect();
        results.push((list.probe_id.clone(), precision_sum_ap(&hits, num_gt), cmc_flags));
    }
    results.sort_by(|a, b| a.0.cmp(&b.0));
    let n = results.len();
    let mut map = 0.0;
    for r in &results {
        map += r.1;
    }
    let mut cmc = Vec::new();
    for (i, &k) in ks.iter().enumerate() {
        let mut c = 0.0;
        for r in &results {
            if r.2[i] {
                c += 1.0;
            }
        }
        cmc.push((k, if n == 0 { 0.0 } else { c / n as f64 }));
    }
    OracleSearch {
        map: if n == 0 { 0.0 } else { map / n as f64 },
        cmc,
        num_probes: n,
    }
}

pub fn brute_force_map(
    ranked: &[RankedList],
    frames: &BTreeMap<String, Frame>,
    items: &[GalleryItem],
    threshold: f64,
) -> f64 {
    brute_force_search(ranked, frames, items, &[], threshold).map
}

/// Reference detection evaluation: `(ap, recall)`, or `None` without
/// ground truth or when a detection references an unknown frame.
pub fn brute_force_detection(
    detections: &[GalleryItem],
    frames: &BTreeMap<String, Frame>,
    threshold: f64,
) -> Option<(f64, f64)> {
    let mut num_gt = 0;
    for f in frames.values() {
        num_gt += f.gt.len();
    }
    if num_gt == 0 {
        return None;
    }
    let mut order: Vec<&GalleryItem> = detections.iter().collect();
    // insertion sort: score descending, id ascending
    for i in 1..order.len() {
        let mut j = i;
        while j > 0 {
            let (a, b) = (order[j - 1], order[j]);
            let swap = b.det_score > a.det_score || (b.det_score == a.det_score && b.item_id < a.item_id);
            if !swap {
                break;
            }
            order.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut claimed = Vec::new();
    let mut hits = Vec::new();
    for d in order {
        let frame = find_frame(frames, &d.frame_id)?;
        hits.push(claim(&d.bbox, frame, None, &mut claimed, threshold));
    }
    Some((precision_sum_ap(&hits, num_gt), claimed.len() as f64 / num_gt as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::rank_gallery;
    use crate::types::{Embedding, GtBox};

    fn item(id: &str, frame: &str, v: &[f32], score: f64) -> GalleryItem {
        GalleryItem::new(
            id,
            frame,
            BBox::new(0.0, 0.0, 10.0, 20.0).unwrap(),
            score,
            Embedding::new(v.to_vec()).unwrap(),
            Some("x".into()),
        )
        .unwrap()
    }

    #[test]
    fn single_item_and_ties() {
        let ctx = ProbeContext::new(item("p", "f0", &[1.0, 0.0], 1.0), vec![]).unwrap();
        let one = brute_force_rank(&ctx, &[item("g", "f1", &[0.0, 1.0], 1.0)], ScoringMode::VisualOR, true).unwrap();
        assert_eq!(one.entries[0].item_id, "g");
        let tied = vec![item("b", "f1", &[1.0, 1.0], 1.0), item("a", "f2", &[1.0, 1.0], 1.0)];
        let list = brute_force_rank(&ctx, &tied, ScoringMode::Visual, true).unwrap();
        assert_eq!(list.item_ids().collect::<Vec<_>>(), ["a", "b"]);
        assert_eq!(list, rank_gallery(&ctx, &tied, ScoringMode::Visual, true).unwrap());
    }

    #[test]
    fn manual_ap_case() {
        assert!((precision_sum_ap(&[true, false, true], 2) - 0.833_333_333_333_333_4).abs() < 1e-15);
        let b = BBox::new(0.0, 0.0, 10.0, 20.0).unwrap();
        let frames: BTreeMap<String, Frame> = [
            (
                "f0",
                vec![GtBox {
                    bbox: b,
                    person_id: "x".into(),
                }],
            ),
            (
                "f1",
                vec![GtBox {
                    bbox: b,
                    person_id: "x".into(),
                }],
            ),
        ]
        .into_iter()
        .map(|(id, gt)| (id.to_owned(), Frame::new(id, gt).unwrap()))
        .collect();
        let items = vec![item("p", "f0", &[1.0, 0.0], 1.0), item("g", "f1", &[1.0, 0.0], 1.0)];
        let ctx = ProbeContext::new(items[0].clone(), vec![]).unwrap();
        let list = brute_force_rank(&ctx, &items, ScoringMode::Visual, true).unwrap();
        assert_eq!(brute_force_map(&[list], &frames, &items, 0.5), 1.0);
    }
}
