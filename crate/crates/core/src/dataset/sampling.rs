use crate::error::{Error, Result};
use crate::rng::{fnv1a64, CounterRng};
use crate::types::GalleryItem;

use super::Dataset;

/// Gallery drawn for one probe: every true positive outside the probe's
/// frame plus uniformly sampled other detections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GallerySubset {
    pub probe_id: String,
    /// Sorted ascending.
    pub gallery_item_ids: Vec<String>,
    pub seed: u64,
    pub size: usize,
    /// No true positive was available for the probe.
    pub degenerate: bool,
}

impl GallerySubset {
    pub fn items<'a>(&self, ds: &'a Dataset) -> Vec<&'a GalleryItem> {
        self.gallery_item_ids
            .iter()
            .map(|id| ds.item(id).expect("subset ids come from the dataset"))
            .collect()
    }
}

/// Key of the generator stream used for a probe: `seed ^ fnv1a64(probe_id)`.
pub fn subset_stream_key(seed: u64, probe_id: &str) -> u64 {
    seed ^ fnv1a64(probe_id.as_bytes())
}

/// Draws a gallery of exactly `size` detections for `probe_id`.
///
/// Candidates are the detections outside the probe's frame, in dataset order.
/// Positives (same person id as the probe) are always kept; the remaining
/// `size - positives` slots are the first picks of a partial Fisher-Yates
/// shuffle of the non-positive candidates driven by
/// `CounterRng::new(subset_stream_key(seed, probe_id))`.
pub fn sample_gallery_subset(ds: &Dataset, probe_id: &str, size: usize, seed: u64) -> Result<GallerySubset> {
    let probe = ds
        .item(probe_id)
        .ok_or_else(|| Error::UnknownProbe(probe_id.to_owned()))?;
    let person = probe
        .person_id
        .as_deref()
        .ok_or_else(|| Error::UnlabeledProbe(probe_id.to_owned()))?;
    let (positives, mut others): (Vec<&GalleryItem>, Vec<&GalleryItem>) = ds
        .items()
        .iter()
        .filter(|i| i.frame_id != probe.frame_id)
        .partition(|i| i.person_id.as_deref() == Some(person));
    let available = positives.len() + others.len();
    if size > available {
        return Err(Error::SizeTooLarge {
            requested: size,
            available,
        });
    }
    if size < positives.len() {
        return Err(Error::SizeTooSmall {
            requested: size,
            positives: positives.len(),
        });
    }
    let pad = size - positives.len();
    let mut rng = CounterRng::new(subset_stream_key(seed, probe_id));
    rng.partial_shuffle(&mut others, pad);
    let mut ids: Vec<String> = positives
        .iter()
        .chain(&others[..pad])
        .map(|i| i.item_id.clone())
        .collect();
    ids.sort_unstable();
    Ok(GallerySubset {
        probe_id: probe_id.to_owned(),
        gallery_item_ids: ids,
        seed,
        size,
        degenerate: positives.is_empty(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{BBox, Embedding, Frame};

    fn pool() -> Dataset {
        let b = BBox::new(0.0, 0.0, 10.0, 20.0).unwrap();
        let mut items = Vec::new();
        for i in 0..40 {
            let person = match i % 10 {
                0 => Some("alice".to_owned()),
                1 => Some(format!("other{i}")),
                _ => None,
            };
            items.push(
                GalleryItem::new(
                    format!("d{i:03}"),
                    format!("f{}", i / 4),
                    b,
                    0.9,
                    Embedding::new(vec![1.0, i as f32]).unwrap(),
                    person,
                )
                .unwrap(),
            );
        }
        let frames = (0..10).map(|f| Frame::new(format!("f{f}"), vec![]).unwrap()).collect();
        Dataset::new(2, items, frames, vec!["d000".into()]).unwrap()
    }

    #[test]
    fn deterministic_and_contains_positives() {
        let ds = pool();
        let a = sample_gallery_subset(&ds, "d000", 12, 5).unwrap();
        let b = sample_gallery_subset(&ds, "d000", 12, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.gallery_item_ids.len(), 12);
        for p in ["d010", "d020", "d030"] {
            assert!(a.gallery_item_ids.iter().any(|id| id == p));
        }
        // the probe's frame is never sampled
        assert!(a
            .gallery_item_ids
            .iter()
            .all(|id| !["d000", "d001", "d002", "d003"].contains(&id.as_str())));
        assert!(!a.degenerate);
        let c = sample_gallery_subset(&ds, "d000", 12, 6).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn exact_positive_count() {
        let ds = pool();
        let s = sample_gallery_subset(&ds, "d000", 3, 1).unwrap();
        assert_eq!(s.gallery_item_ids, ["d010", "d020", "d030"]);
        assert!(matches!(
            sample_gallery_subset(&ds, "d000", 2, 1),
            Err(Error::SizeTooSmall { .. })
        ));
        assert!(matches!(
            sample_gallery_subset(&ds, "d000", 37, 1),
            Err(Error::SizeTooLarge {
                requested: 37,
                available: 36
            })
        ));
        assert_eq!(
            sample_gallery_subset(&ds, "d000", 36, 1)
                .unwrap()
                .gallery_item_ids
                .len(),
            36
        );
    }
}
