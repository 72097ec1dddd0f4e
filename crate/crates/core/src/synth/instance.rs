use crate::dataset::{build_probe_context, Dataset};
use crate::error::Result;
use crate::ranking::{rank_gallery, RankedList};
use crate::rng::CounterRng;
use crate::similarity::ScoringMode;
use crate::types::{BBox, Embedding, Frame, GalleryItem, GtBox};

pub const MAX_INSTANCE_FRAMES: usize = 20;
pub const MAX_INSTANCE_DETECTIONS: usize = 50;

/// A small random evaluation problem for cross-checking metrics.
#[derive(Debug, Clone)]
pub struct EvalInstance {
    pub dataset: Dataset,
    pub ranked: Vec<RankedList>,
}

/// Builds an instance with at most 20 frames and 50 detections.
///
/// Detections jitter around annotated boxes so that IoUs straddle the usual
/// thresholds, some boxes get a second detection, scores repeat to produce
/// ties, and ranked lists are random gallery subsets (sometimes including the
/// probe's own frame) ranked in a random mode.
pub fn eval_instance(seed: u64) -> Result<EvalInstance> {
    let mut rng = CounterRng::new(seed);
    let num_frames = 1 + rng.below(MAX_INSTANCE_FRAMES as u64) as usize;
    let num_people = 1 + rng.below(6) as usize;
    let dim = 2 + rng.below(5) as usize;
    let mut frames = Vec::new();
    let mut items = Vec::new();
    let random_embedding = |rng: &mut CounterRng| -> Embedding {
        loop {
            let v: Vec<f32> = (0..dim).map(|_| (rng.next_f64() * 2.0 - 1.0) as f32).collect();
            if let Ok(e) = Embedding::new(v) {
                if e.unit().is_ok() {
                    return e;
                }
            }
        }
    };
    for f in 0..num_frames {
        let frame_id = format!("f{f:02}");
        let mut people: Vec<usize> = (0..num_people).collect();
        let k = rng.below(num_people.min(4) as u64 + 1) as usize;
        rng.partial_shuffle(&mut people, k);
        let mut gt = Vec::new();
        for &p in &people[..k] {
            let w = 20.0 + 60.0 * rng.next_f64();
            let h = 50.0 + 100.0 * rng.next_f64();
            let bbox = BBox::new(500.0 * rng.next_f64(), 300.0 * rng.next_f64(), w, h)?;
            gt.push(GtBox {
                bbox,
                person_id: format!("p{p}"),
            });
        }
        for g in &gt {
            let copies = usize::from(rng.chance(0.8)) + usize::from(rng.chance(0.2));
            for _ in 0..copies {
                if items.len() >= MAX_INSTANCE_DETECTIONS {
                    break;
                }
                let b = g.bbox;
                let jitter = |rng: &mut CounterRng, size: f64| (rng.next_f64() - 0.5) * 0.6 * size;
                let bbox = BBox::new(
                    b.x + jitter(&mut rng, b.w),
                    b.y + jitter(&mut rng, b.h),
                    b.w * (0.7 + 0.6 * rng.next_f64()),
                    b.h * (0.7 + 0.6 * rng.next_f64()),
                )?;
                let score = rng.below(11) as f64 / 10.0;
                let id = format!("d{:02}", items.len());
                let emb = random_embedding(&mut rng);
                items.push(GalleryItem::new(
                    id,
                    &frame_id,
                    bbox,
                    score,
                    emb,
                    Some(g.person_id.clone()),
                )?);
            }
        }
        let clutter = rng.below(3);
        for _ in 0..clutter {
            if items.len() >= MAX_INSTANCE_DETECTIONS {
                break;
            }
            let bbox = BBox::new(500.0 * rng.next_f64(), 300.0 * rng.next_f64(), 30.0, 80.0)?;
            let score = rng.below(11) as f64 / 10.0;
            let id = format!("d{:02}", items.len());
            let emb = random_embedding(&mut rng);
            items.push(GalleryItem::new(id, &frame_id, bbox, score, emb, None)?);
        }
        frames.push(Frame::new(frame_id, gt)?);
    }
    let mut labeled: Vec<String> = items
        .iter()
        .filter(|i| i.person_id.is_some())
        .map(|i| i.item_id.clone())
        .collect();
    let num_probes = labeled.len().min(5);
    rng.partial_shuffle(&mut labeled, num_probes);
    labeled.truncate(num_probes);
    let dataset = Dataset::new(dim, items, frames, labeled)?;

    let mut ranked = Vec::new();
    for probe_id in dataset.probes() {
        let ctx = build_probe_context(&dataset, probe_id)?;
        let mut gallery: Vec<&GalleryItem> = dataset.items().iter().collect();
        let n = gallery.len();
        let keep = 1 + rng.below(n as u64) as usize;
        rng.partial_shuffle(&mut gallery, keep);
        gallery.truncate(keep);
        let mode = ScoringMode::ALL[rng.below(4) as usize];
        let exclude = rng.chance(0.5);
        if let Ok(list) = rank_gallery(&ctx, &gallery, mode, exclude) {
            ranked.push(list);
        }
    }
    Ok(EvalInstance { dataset, ranked })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn within_limits_and_deterministic() {
        for seed in 0..30 {
            let a = eval_instance(seed).unwrap();
            assert!(a.dataset.frames().len() <= MAX_INSTANCE_FRAMES);
            assert!(a.dataset.items().len() <= MAX_INSTANCE_DETECTIONS);
            let b = eval_instance(seed).unwrap();
            assert_eq!(a.ranked, b.ranked);
            assert_eq!(a.dataset, b.dataset);
        }
    }
}
