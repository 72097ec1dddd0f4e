//! Search and detection metrics: IoU matching against annotated boxes,
//! interpolation-free average precision, CMC top-K and mAP.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::ranking::{format_sig9, RankedList};
use crate::types::{BBox, Frame, GalleryItem};

pub const DEFAULT_IOU_THRESHOLD: f64 = 0.5;

/// Annotated frames plus the location of every detection, keyed by id.
#[derive(Debug, Clone)]
pub struct GroundTruth<'a> {
    frames: &'a BTreeMap<String, Frame>,
    items: HashMap<&'a str, &'a GalleryItem>,
}

impl<'a> GroundTruth<'a> {
    pub fn new(frames: &'a BTreeMap<String, Frame>, items: &'a [GalleryItem]) -> Self {
        Self {
            frames,
            items: items.iter().map(|i| (i.item_id.as_str(), i)).collect(),
        }
    }

    pub fn frames(&self) -> &'a BTreeMap<String, Frame> {
        self.frames
    }

    pub fn item(&self, item_id: &str) -> Option<&'a GalleryItem> {
        self.items.get(item_id).copied()
    }

    /// Occurrences of `person_id` over all frames except `skip_frame`.
    pub fn count_person(&self, person_id: &str, skip_frame: Option<&str>) -> usize {
        self.frames
            .values()
            .filter(|f| Some(f.frame_id.as_str()) != skip_frame)
            .map(|f| f.gt.iter().filter(|g| g.person_id == person_id).count())
            .sum()
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if t > 0.0 && t <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidThreshold(t))
    }
}

/// Index of the unclaimed box with the highest IoU at or above `threshold`;
/// ties go to the lowest index.
fn best_unclaimed<'b>(
    bbox: &BBox,
    candidates: impl Iterator<Item = (usize, &'b BBox)>,
    claimed: impl Fn(usize) -> bool,
    threshold: f64,
) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (idx, gt) in candidates {
        if claimed(idx) {
            continue;
        }
        let overlap = iou(bbox, gt);
        if overlap >= threshold && best.is_none_or(|(_, b)| overlap > b) {
            best = Some((idx, overlap));
        }
    }
    best.map(|(i, _)| i)
}

fn match_hits(
    list: &RankedList,
    gt: &GroundTruth<'_>,
    target_person: &str,
    iou_threshold: f64,
    excluded_frame: Option<&str>,
) -> Result<Vec<bool>> {
    check_threshold(iou_threshold)?;
    let mut claimed: HashSet<(&str, usize)> = HashSet::new();
    let mut hits = Vec::with_capacity(list.entries.len());
    for entry in &list.entries {
        let item = gt
            .item(&entry.item_id)
            .ok_or_else(|| Error::UnknownItem(entry.item_id.clone()))?;
        let frame = gt
            .frames
            .get(&item.frame_id)
            .ok_or_else(|| Error::UnknownFrame(item.frame_id.clone()))?;
        if Some(frame.frame_id.as_str()) == excluded_frame {
            hits.push(false);
            continue;
        }
        let fid = frame.frame_id.as_str();
        let candidates = frame
            .gt
            .iter()
            .enumerate()
            .filter(|(_, g)| g.person_id == target_person)
            .map(|(i, g)| (i, &g.bbox));
        match best_unclaimed(&item.bbox, candidates, |i| claimed.contains(&(fid, i)), iou_threshold) {
            Some(idx) => {
                claimed.insert((fid, idx));
                hits.push(true);
            }
            None => hits.push(false),
        }
    }
    Ok(hits)
}

/// Flags each ranked entry that matches an unclaimed annotated box of
/// `target_person` in its frame. Boxes are claimed greedily in rank order.
pub fn match_ranked_list(
    list: &RankedList,
    gt: &GroundTruth<'_>,
    target_person: &str,
    iou_threshold: f64,
) -> Result<Vec<bool>> {
    match_hits(list, gt, target_person, iou_threshold, None)
}

/// Mean of precision@p over hit positions p, divided by `num_gt`.
pub fn average_precision(hits: &[bool], num_gt: usize) -> Result<f64> {
    if num_gt == 0 {
        return Err(Error::NoGroundTruth);
    }
    let mut found = 0usize;
    let mut sum = 0.0;
    for (i, &hit) in hits.iter().enumerate() {
        if hit {
            found += 1;
            sum += found as f64 / (i + 1) as f64;
        }
    }
    if found > num_gt {
        return Err(Error::TooManyHits { hits: found, num_gt });
    }
    Ok(sum / num_gt as f64)
}

/// Whether any of the first `k` entries is a hit.
pub fn cmc_at_k(hits: &[bool], k: usize) -> Result<bool> {
    if k < 1 {
        return Err(Error::InvalidK(k));
    }
    Ok(hits.iter().take(k).any(|&h| h))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    pub probe_id: String,
    pub ap: f64,
    pub num_gt: usize,
    pub num_hits: usize,
    /// 1-based rank of the first hit.
    pub first_hit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedProbe {
    pub probe_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub map_score: f64,
    /// `(k, fraction of probes with a hit in the top k)`, ascending in k.
    pub cmc: Vec<(usize, f64)>,
    pub per_probe: Vec<ProbeResult>,
    pub num_probes: usize,
    pub skipped: Vec<SkippedProbe>,
    pub iou_threshold: f64,
}

impl EvalReport {
    pub fn cmc_at(&self, k: usize) -> Option<f64> {
        self.cmc.iter().find(|(kk, _)| *kk == k).map(|(_, v)| *v)
    }

    /// Key-value header followed by a per-probe table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# person search evaluation");
        let _ = writeln!(out, "num_probes\t{}", self.num_probes);
        let _ = writeln!(out, "num_skipped\t{}", self.skipped.len());
        let _ = writeln!(out, "iou_threshold\t{}", format_sig9(self.iou_threshold));
        let _ = writeln!(out, "map\t{}", format_sig9(self.map_score));
        for (k, v) in &self.cmc {
            let _ = writeln!(out, "top{k}\t{}", format_sig9(*v));
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "probe_id\tap\tnum_gt\tnum_hits\tfirst_hit");
        for p in &self.per_probe {
            let first = p.first_hit.map_or_else(|| "-".to_owned(), |r| r.to_string());
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{first}",
                p.probe_id,
                format_sig9(p.ap),
                p.num_gt,
                p.num_hits
            );
        }
        if !self.skipped.is_empty() {
            let _ = writeln!(out);
            let _ = writeln!(out, "skipped_probe\treason");
            for s in &self.skipped {
                let _ = writeln!(out, "{}\t{}", s.probe_id, s.reason);
            }
        }
        out
    }
}

enum ProbeOutcome {
    Done(ProbeResult, Vec<bool>),
    Skipped(SkippedProbe),
}

fn evaluate_probe(list: &RankedList, gt: &GroundTruth<'_>, ks: &[usize], iou_threshold: f64) -> ProbeOutcome {
    let skip = |reason: String| {
        ProbeOutcome::Skipped(SkippedProbe {
            probe_id: list.probe_id.clone(),
            reason,
        })
    };
    let Some(probe) = gt.item(&list.probe_id) else {
        return skip(Error::UnknownProbe(list.probe_id.clone()).to_string());
    };
    let Some(person) = probe.person_id.as_deref() else {
        return skip(Error::UnlabeledProbe(list.probe_id.clone()).to_string());
    };
    let num_gt = gt.count_person(person, Some(&probe.frame_id));
    if num_gt == 0 {
        return skip(Error::NoGroundTruth.to_string());
    }
    let hits = match match_hits(list, gt, person, iou_threshold, Some(&probe.frame_id)) {
        Ok(h) => h,
        Err(e) => return skip(e.to_string()),
    };
    let ap = match average_precision(&hits, num_gt) {
        Ok(ap) => ap,
        Err(e) => return skip(e.to_string()),
    };
    let cmc = ks.iter().map(|&k| hits.iter().take(k).any(|&h| h)).collect();
    ProbeOutcome::Done(
        ProbeResult {
            probe_id: list.probe_id.clone(),
            ap,
            num_gt,
            num_hits: hits.iter().filter(|&&h| h).count(),
            first_hit: hits.iter().position(|&h| h).map(|p| p + 1),
        },
        cmc,
    )
}

/// Evaluates ranked lists for many probes.
///
/// The probe's own frame is not part of its gallery: its annotations are not
/// counted and its detections never match. Probes without any ground-truth
/// occurrence, or whose list cannot be matched, are listed in
/// [`EvalReport::skipped`] and left out of every average.
pub fn evaluate_search(
    ranked: &[RankedList],
    gt: &GroundTruth<'_>,
    ks: &[usize],
    iou_threshold: f64,
) -> Result<EvalReport> {
    check_threshold(iou_threshold)?;
    if let Some(&k) = ks.iter().find(|&&k| k < 1) {
        return Err(Error::InvalidK(k));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();

    let mut outcomes: Vec<ProbeOutcome> = ranked
        .par_iter()
        .map(|list| evaluate_probe(list, gt, &ks, iou_threshold))
        .collect();
    let mut seen = HashSet::new();
    for (list, outcome) in ranked.iter().zip(outcomes.iter_mut()) {
        if !seen.insert(list.probe_id.as_str()) {
            *outcome = ProbeOutcome::Skipped(SkippedProbe {
                probe_id: list.probe_id.clone(),
                reason: "duplicate probe".into(),
            });
        }
    }

    let mut done: Vec<(ProbeResult, Vec<bool>)> = Vec::new();
    let mut skipped = Vec::new();
    for outcome in outcomes {
        match outcome {
            ProbeOutcome::Done(r, c) => done.push((r, c)),
            ProbeOutcome::Skipped(s) => skipped.push(s),
        }
    }
    done.sort_by(|a, b| a.0.probe_id.cmp(&b.0.probe_id));
    skipped.sort_by(|a, b| a.probe_id.cmp(&b.probe_id).then_with(|| a.reason.cmp(&b.reason)));

    let n = done.len();
    let mean = |sum: f64| if n == 0 { 0.0 } else { sum / n as f64 };
    let map_score = mean(done.iter().map(|(r, _)| r.ap).sum());
    let cmc = ks
        .iter()
        .enumerate()
        .map(|(i, &k)| (k, mean(done.iter().filter(|(_, c)| c[i]).count() as f64)))
        .collect();
    Ok(EvalReport {
        map_score,
        cmc,
        per_probe: done.into_iter().map(|(r, _)| r).collect(),
        num_probes: n,
        skipped,
        iou_threshold,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub ap: f64,
    pub recall: f64,
    pub num_gt: usize,
    pub num_detections: usize,
}

impl DetectionReport {
    pub fn to_text(&self) -> String {
        format!(
            "# person detection evaluation\nap\t{}\nrecall\t{}\nnum_gt\t{}\nnum_detections\t{}\n",
            format_sig9(self.ap),
            format_sig9(self.recall),
            self.num_gt,
            self.num_detections
        )
    }
}

/// Detection AP and recall, ignoring identities. Detections are visited by
/// descending score (ties by item id) and each claims the best unclaimed box
/// in its frame.
pub fn evaluate_detection<G: AsRef<GalleryItem>>(
    detections: &[G],
    frames: &BTreeMap<String, Frame>,
    iou_threshold: f64,
) -> Result<DetectionReport> {
    check_threshold(iou_threshold)?;
    let num_gt: usize = frames.values().map(|f| f.gt.len()).sum();
    if num_gt == 0 {
        return Err(Error::NoGroundTruth);
    }
    let mut order: Vec<&GalleryItem> = detections.iter().map(AsRef::as_ref).collect();
    order.sort_by(|a, b| {
        b.det_score
            .total_cmp(&a.det_score)
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
    let mut claimed: HashSet<(&str, usize)> = HashSet::new();
    let mut hits = Vec::with_capacity(order.len());
    for det in order {
        let frame = frames
            .get(&det.frame_id)
            .ok_or_else(|| Error::UnknownFrame(det.frame_id.clone()))?;
        let fid = frame.frame_id.as_str();
        let candidates = frame.gt.iter().enumerate().map(|(i, g)| (i, &g.bbox));
        match best_unclaimed(&det.bbox, candidates, |i| claimed.contains(&(fid, i)), iou_threshold) {
            Some(idx) => {
                claimed.insert((fid, idx));
                hits.push(true);
            }
            None => hits.push(false),
        }
    }
    Ok(DetectionReport {
        ap: average_precision(&hits, num_gt)?,
        recall: claimed.len() as f64 / num_gt as f64,
        num_gt,
        num_detections: detections.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ranking::RankedEntry;
    use crate::similarity::{ScoreBreakdown, ScoringMode};
    use crate::types::{Embedding, GtBox};

    fn bx(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    fn det(id: &str, frame: &str, b: BBox, score: f64, person: Option<&str>) -> GalleryItem {
        GalleryItem::new(
            id,
            frame,
            b,
            score,
            Embedding::new(vec![1.0, 0.0]).unwrap(),
            person.map(str::to_owned),
        )
        .unwrap()
    }

    fn frames(list: &[(&str, &[(BBox, &str)])]) -> BTreeMap<String, Frame> {
        list.iter()
            .map(|(id, gt)| {
                let gt = gt
                    .iter()
                    .map(|(b, p)| GtBox {
                        bbox: *b,
                        person_id: (*p).to_owned(),
                    })
                    .collect();
                (id.to_string(), Frame::new(*id, gt).unwrap())
            })
            .collect()
    }

    fn ranked(probe: &str, ids: &[&str]) -> RankedList {
        RankedList {
            probe_id: probe.into(),
            mode: ScoringMode::Visual,
            entries: ids
                .iter()
                .enumerate()
                .map(|(i, id)| RankedEntry {
                    item_id: id.to_string(),
                    scores: ScoreBreakdown {
                        visual: 1.0 - i as f64 * 0.1,
                        objectness: 1.0,
                        repulsion: 1.0,
                        gap: 0.0,
                        nearest_query_index: 0,
                        combined: 1.0 - i as f64 * 0.1,
                    },
                })
                .collect(),
        }
    }

    #[test]
    fn ap_examples() {
        assert_eq!(average_precision(&[true], 1).unwrap(), 1.0);
        let ap = average_precision(&[true, false, true], 2).unwrap();
        assert!((ap - 0.833_333_333_333_333_4).abs() < 1e-15);
        assert_eq!(average_precision(&[false, false, false], 3).unwrap(), 0.0);
        assert_eq!(average_precision(&[true], 0), Err(Error::NoGroundTruth));
        assert!(matches!(
            average_precision(&[true, true], 1),
            Err(Error::TooManyHits { .. })
        ));
        // missed ground truth lowers AP
        assert_eq!(average_precision(&[true], 2).unwrap(), 0.5);
    }

    #[test]
    fn cmc_examples() {
        assert!(!cmc_at_k(&[false, true], 1).unwrap());
        assert!(cmc_at_k(&[false, true], 2).unwrap());
        for k in 1..5 {
            assert!(cmc_at_k(&[true, false], k).unwrap());
        }
        assert_eq!(cmc_at_k(&[true], 0), Err(Error::InvalidK(0)));
    }

    #[test]
    fn matching_rules() {
        let gt_box = bx(0.0, 0.0, 10.0, 10.0);
        let fr = frames(&[("f1", &[(gt_box, "alice")]), ("f0", &[])]);
        // second box overlaps the first by exactly half: 10x10 vs 10x5 inside it
        let half = bx(0.0, 0.0, 10.0, 5.0);
        assert_eq!(iou(&gt_box, &half), 0.5);
        let items = vec![
            det("exact", "f1", gt_box, 0.9, None),
            det("half", "f1", half, 0.9, None),
            det("lost", "f9", gt_box, 0.9, None),
        ];
        let gt = GroundTruth::new(&fr, &items);
        assert_eq!(
            match_ranked_list(&ranked("p", &["exact"]), &gt, "alice", 0.5).unwrap(),
            [true]
        );
        assert_eq!(
            match_ranked_list(&ranked("p", &["half"]), &gt, "alice", 0.5).unwrap(),
            [true]
        );
        assert_eq!(
            match_ranked_list(&ranked("p", &["half"]), &gt, "alice", 0.51).unwrap(),
            [false]
        );
        // one box can be claimed once
        assert_eq!(
            match_ranked_list(&ranked("p", &["half", "exact"]), &gt, "alice", 0.5).unwrap(),
            [true, false]
        );
        assert_eq!(
            match_ranked_list(&ranked("p", &["exact"]), &gt, "bob", 0.5).unwrap(),
            [false]
        );
        assert_eq!(
            match_ranked_list(&ranked("p", &["lost"]), &gt, "alice", 0.5),
            Err(Error::UnknownFrame("f9".into()))
        );
        assert_eq!(
            match_ranked_list(&ranked("p", &["exact"]), &gt, "alice", 0.0),
            Err(Error::InvalidThreshold(0.0))
        );
    }

    #[test]
    fn search_reports() {
        let a = bx(0.0, 0.0, 10.0, 20.0);
        let b = bx(50.0, 0.0, 10.0, 20.0);
        let fr = frames(&[
            ("f0", &[(a, "alice"), (b, "bob")]),
            ("f1", &[(a, "alice")]),
            ("f2", &[(b, "bob")]),
            ("f3", &[(a, "bob")]),
        ]);
        let items = vec![
            det("pa", "f0", a, 1.0, Some("alice")),
            det("pb", "f0", b, 1.0, Some("bob")),
            det("a1", "f1", a, 1.0, Some("alice")),
            det("b2", "f2", b, 1.0, Some("bob")),
            det("b3", "f3", a, 1.0, Some("bob")),
        ];
        let gt = GroundTruth::new(&fr, &items);
        let lists = vec![ranked("pb", &["a1", "b2", "b3"]), ranked("pa", &["a1", "b2", "b3"])];
        let report = evaluate_search(&lists, &gt, &[5, 1], 0.5).unwrap();
        assert_eq!(report.num_probes, 2);
        // alice: AP 1; bob: hits at 2 and 3 -> (1/2 + 2/3) / 2
        let bob_ap = (0.5 + 2.0 / 3.0) / 2.0;
        assert_eq!(report.per_probe[0].probe_id, "pa");
        assert_eq!(report.per_probe[0].ap, 1.0);
        assert!((report.per_probe[1].ap - bob_ap).abs() < 1e-15);
        assert!((report.map_score - (1.0 + bob_ap) / 2.0).abs() < 1e-15);
        assert_eq!(report.cmc, vec![(1, 0.5), (5, 1.0)]);
        // probe order does not matter
        let rev: Vec<_> = lists.iter().rev().cloned().collect();
        assert_eq!(evaluate_search(&rev, &gt, &[1, 5], 0.5).unwrap(), report);
    }

    #[test]
    fn search_skips_probes_without_ground_truth() {
        let a = bx(0.0, 0.0, 10.0, 20.0);
        let fr = frames(&[("f0", &[(a, "alice")]), ("f1", &[(a, "carol")])]);
        let items = vec![
            det("pa", "f0", a, 1.0, Some("alice")),
            det("c", "f1", a, 1.0, Some("carol")),
        ];
        let gt = GroundTruth::new(&fr, &items);
        let report = evaluate_search(&[ranked("pa", &["c"])], &gt, &[1], 0.5).unwrap();
        assert_eq!(report.num_probes, 0);
        assert_eq!(report.skipped.len(), 1);
        assert_eq!(report.map_score, 0.0);
        assert!(evaluate_search(&[], &gt, &[0], 0.5).is_err());
    }

    #[test]
    fn single_perfect_probe() {
        let a = bx(0.0, 0.0, 10.0, 20.0);
        let fr = frames(&[("f0", &[(a, "alice")]), ("f1", &[(a, "alice")])]);
        let items = vec![
            det("p", "f0", a, 1.0, Some("alice")),
            det("g", "f1", a, 1.0, Some("alice")),
        ];
        let gt = GroundTruth::new(&fr, &items);
        let report = evaluate_search(&[ranked("p", &["g"])], &gt, &[1], 0.5).unwrap();
        assert_eq!((report.map_score, report.cmc_at(1)), (1.0, Some(1.0)));
        assert!(report.to_text().contains("map\t1\n"));
    }

    #[test]
    fn detection_examples() {
        let a = bx(0.0, 0.0, 10.0, 20.0);
        let fr = frames(&[("f0", &[(a, "alice")])]);
        let one = vec![det("d", "f0", a, 0.9, None)];
        let r = evaluate_detection(&one, &fr, 0.5).unwrap();
        assert_eq!((r.ap, r.recall, r.num_gt, r.num_detections), (1.0, 1.0, 1, 1));
        let none: Vec<GalleryItem> = vec![];
        let r = evaluate_detection(&none, &fr, 0.5).unwrap();
        assert_eq!((r.ap, r.recall), (0.0, 0.0));
        let empty = frames(&[("f0", &[])]);
        assert_eq!(evaluate_detection(&one, &empty, 0.5), Err(Error::NoGroundTruth));
        // a low-scoring duplicate is a false positive after the true positive
        let two = vec![det("d", "f0", a, 0.9, None), det("e", "f0", a, 0.95, None)];
        let r = evaluate_detection(&two, &fr, 0.5).unwrap();
        assert_eq!((r.ap, r.recall), (1.0, 1.0));
    }
}
