//! Domain types shared by every module.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::geometry::l2_normalize;

/// Raw feature vector for one detection.
///
/// Values are stored as given (binary32) and normalized lazily; the unit
/// vector is computed once per embedding and shared by all clones.
#[derive(Debug, Clone)]
pub struct Embedding {
    values: Arc<[f32]>,
    unit: Arc<OnceLock<Option<Arc<[f64]>>>>,
}

impl Embedding {
    pub fn new(values: Vec<f32>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::DimensionZero);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("embedding contains a non-finite value".into()));
        }
        Ok(Self {
            values: values.into(),
            unit: Arc::new(OnceLock::new()),
        })
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    /// The L2-normalized vector, computed on first use.
    pub fn unit(&self) -> Result<&[f64]> {
        self.unit
            .get_or_init(|| {
                let wide: Vec<f64> = self.values.iter().map(|&v| f64::from(v)).collect();
                l2_normalize(&wide).ok().map(Into::into)
            })
            .as_deref()
            .ok_or(Error::ZeroVector)
    }
}

impl PartialEq for Embedding {
    fn eq(&self, other: &Self) -> bool {
        self.values.len() == other.values.len()
            && self
                .values
                .iter()
                .zip(other.values.iter())
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Axis-aligned box in pixels: top-left corner plus width and height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if ![x, y, w, h].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidBox(format!(
                "non-finite coordinate in [{x}, {y}, {w}, {h}]"
            )));
        }
        if !(w > 0.0 && h > 0.0) {
            return Err(Error::InvalidBox(format!("width {w} and height {h} must be positive")));
        }
        Ok(Self { x, y, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.y, self.w, self.h]
    }
}

/// One detection: a candidate person crop with its detector confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct GalleryItem {
    pub item_id: String,
    pub frame_id: String,
    pub bbox: BBox,
    pub det_score: f64,
    pub embedding: Embedding,
    /// Ground-truth identity; `None` for distractors.
    pub person_id: Option<String>,
}

impl GalleryItem {
    pub fn new(
        item_id: impl Into<String>,
        frame_id: impl Into<String>,
        bbox: BBox,
        det_score: f64,
        embedding: Embedding,
        person_id: Option<String>,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&det_score) {
            return Err(Error::OutOfRange {
                what: "det_score",
                value: det_score,
            });
        }
        Ok(Self {
            item_id: item_id.into(),
            frame_id: frame_id.into(),
            bbox,
            det_score,
            embedding,
            person_id,
        })
    }
}

impl AsRef<GalleryItem> for GalleryItem {
    fn as_ref(&self) -> &GalleryItem {
        self
    }
}

/// A probe detection and the other detections of its frame.
#[derive(Debug, Clone)]
pub struct ProbeContext {
    probe: GalleryItem,
    neighbors: Vec<GalleryItem>,
}

impl ProbeContext {
    pub fn new(probe: GalleryItem, neighbors: Vec<GalleryItem>) -> Result<Self> {
        for n in &neighbors {
            if n.frame_id != probe.frame_id {
                return Err(Error::InvalidContext(format!(
                    "neighbor `{}` is in frame `{}`, probe is in `{}`",
                    n.item_id, n.frame_id, probe.frame_id
                )));
            }
            if n.item_id == probe.item_id {
                return Err(Error::InvalidContext(format!(
                    "probe `{}` listed among its own neighbors",
                    probe.item_id
                )));
            }
        }
        Ok(Self { probe, neighbors })
    }

    pub fn probe(&self) -> &GalleryItem {
        &self.probe
    }

    pub fn neighbors(&self) -> &[GalleryItem] {
        &self.neighbors
    }

    /// Probe first, then neighbors in order.
    pub fn queries(&self) -> impl Iterator<Item = &GalleryItem> {
        std::iter::once(&self.probe).chain(self.neighbors.iter())
    }

    pub fn num_neighbors(&self) -> usize {
        self.neighbors.len()
    }
}

/// Annotated person box inside a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GtBox {
    pub bbox: BBox,
    pub person_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub frame_id: String,
    pub gt: Vec<GtBox>,
}

impl Frame {
    /// Persons in one frame must carry distinct ids.
    pub fn new(frame_id: impl Into<String>, gt: Vec<GtBox>) -> Result<Self> {
        let frame_id = frame_id.into();
        let mut seen = std::collections::HashSet::new();
        for g in &gt {
            if !seen.insert(g.person_id.as_str()) {
                return Err(Error::DuplicatePerson {
                    frame_id,
                    person_id: g.person_id.clone(),
                });
            }
        }
        Ok(Self { frame_id, gt })
    }
}
