//! Datasets of detections: loading, validation, probe contexts, gallery
//! sampling and score statistics.

pub mod format;
mod sampling;
mod stats;

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

pub use sampling::{sample_gallery_subset, subset_stream_key, GallerySubset};
pub use stats::{
    detection_score_histogram, has_two_modes, repulsion_pair_census, score_fractions, visual_scorer, PairCensus,
    ScoreFractions, ScoreHistograms,
};

use crate::error::{Error, Result};
use crate::eval::GroundTruth;
use crate::types::{Embedding, Frame, GalleryItem, ProbeContext};
use format::{FrameRecord, GtRecord, ItemRecord, ProbeRecord};

#[derive(Debug, Clone)]
pub struct Dataset {
    items: Vec<GalleryItem>,
    frames: BTreeMap<String, Frame>,
    probes: Vec<String>,
    embedding_dim: usize,
    index: HashMap<String, usize>,
    by_frame: HashMap<String, Vec<usize>>,
}

impl PartialEq for Dataset {
    fn eq(&self, other: &Self) -> bool {
        self.embedding_dim == other.embedding_dim
            && self.items == other.items
            && self.frames == other.frames
            && self.probes == other.probes
    }
}

impl Dataset {
    /// Builds a cross-referenced dataset. Every item must have dimension
    /// `embedding_dim` and reference a known frame; every probe must be a
    /// labeled item.
    pub fn new(embedding_dim: usize, items: Vec<GalleryItem>, frames: Vec<Frame>, probes: Vec<String>) -> Result<Self> {
        if embedding_dim == 0 {
            return Err(Error::DimensionZero);
        }
        let mut frame_map = BTreeMap::new();
        for f in frames {
            let id = f.frame_id.clone();
            if frame_map.insert(id.clone(), f).is_some() {
                return Err(Error::Format(format!("frame `{id}` listed twice")));
            }
        }
        let mut index = HashMap::with_capacity(items.len());
        let mut by_frame: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, item) in items.iter().enumerate() {
            if item.embedding.dim() != embedding_dim {
                return Err(Error::for_item(
                    &item.item_id,
                    Error::DimensionMismatch {
                        expected: embedding_dim,
                        actual: item.embedding.dim(),
                    },
                ));
            }
            if index.insert(item.item_id.clone(), i).is_some() {
                return Err(Error::DuplicateItem(item.item_id.clone()));
            }
            if !frame_map.contains_key(&item.frame_id) {
                return Err(Error::DanglingFrameRef {
                    item_id: item.item_id.clone(),
                    frame_id: item.frame_id.clone(),
                });
            }
            by_frame.entry(item.frame_id.clone()).or_default().push(i);
        }
        for members in by_frame.values_mut() {
            members.sort_by(|&a, &b| items[a].item_id.cmp(&items[b].item_id));
        }
        let mut seen = std::collections::HashSet::new();
        for p in &probes {
            let item = index
                .get(p)
                .map(|&i| &items[i])
                .ok_or_else(|| Error::UnknownProbe(p.clone()))?;
            if item.person_id.is_none() {
                return Err(Error::UnlabeledProbe(p.clone()));
            }
            if !seen.insert(p.as_str()) {
                return Err(Error::Format(format!("probe `{p}` listed twice")));
            }
        }
        Ok(Self {
            items,
            frames: frame_map,
            probes,
            embedding_dim,
            index,
            by_frame,
        })
    }

    pub fn items(&self) -> &[GalleryItem] {
        &self.items
    }

    pub fn frames(&self) -> &BTreeMap<String, Frame> {
        &self.frames
    }

    pub fn probes(&self) -> &[String] {
        &self.probes
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding_dim
    }

    pub fn item(&self, item_id: &str) -> Option<&GalleryItem> {
        self.index.get(item_id).map(|&i| &self.items[i])
    }

    /// Detections of a frame, ordered by item id.
    pub fn frame_items(&self, frame_id: &str) -> impl Iterator<Item = &GalleryItem> {
        self.by_frame
            .get(frame_id)
            .into_iter()
            .flatten()
            .map(|&i| &self.items[i])
    }

    pub fn ground_truth(&self) -> GroundTruth<'_> {
        GroundTruth::new(&self.frames, &self.items)
    }

    /// Same dataset with a different probe list.
    pub fn with_probes(self, probes: Vec<String>) -> Result<Self> {
        let frames = self.frames.into_values().collect();
        Dataset::new(self.embedding_dim, self.items, frames, probes)
    }
}

/// The probe and every other detection of its frame, ordered by item id.
pub fn build_probe_context(ds: &Dataset, probe_id: &str) -> Result<ProbeContext> {
    build_probe_context_filtered(ds, probe_id, None)
}

/// As [`build_probe_context`], keeping only neighbors whose detection score
/// is at least `min_neighbor_score` when given.
pub fn build_probe_context_filtered(
    ds: &Dataset,
    probe_id: &str,
    min_neighbor_score: Option<f64>,
) -> Result<ProbeContext> {
    let probe = ds
        .item(probe_id)
        .ok_or_else(|| Error::UnknownProbe(probe_id.to_owned()))?;
    let neighbors = ds
        .frame_items(&probe.frame_id)
        .filter(|n| n.item_id != probe.item_id)
        .filter(|n| min_neighbor_score.is_none_or(|t| n.det_score >= t))
        .cloned()
        .collect();
    ProbeContext::new(probe.clone(), neighbors)
}

/// File locations of one dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub embeddings: PathBuf,
    pub items: PathBuf,
    pub frames: PathBuf,
    pub probes: PathBuf,
}

impl DatasetPaths {
    pub const EMBEDDINGS: &'static str = "embeddings.bin";
    pub const ITEMS: &'static str = "items.jsonl";
    pub const FRAMES: &'static str = "frames.jsonl";
    pub const PROBES: &'static str = "probes.jsonl";

    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            embeddings: dir.join(Self::EMBEDDINGS),
            items: dir.join(Self::ITEMS),
            frames: dir.join(Self::FRAMES),
            probes: dir.join(Self::PROBES),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [&self.embeddings, &self.items, &self.frames, &self.probes]
    }
}

/// Serialized form of a dataset: embedding bytes plus the three JSONL texts.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedDataset {
    pub embeddings: Vec<u8>,
    pub items: String,
    pub frames: String,
    pub probes: String,
}

/// Decodes and cross-references a dataset from its serialized parts.
pub fn decode_dataset(embeddings: &[u8], items: &str, frames: &str, probes: &str) -> Result<Dataset> {
    let matrix = format::decode_embeddings(embeddings)?;
    let records = format::parse_items(items)?;
    if matrix.count != records.len() {
        return Err(Error::CountMismatch {
            embeddings: matrix.count,
            records: records.len(),
        });
    }
    let items = records
        .into_iter()
        .zip(matrix.rows())
        .map(|(r, row)| {
            let bbox = format::bbox_from_array(r.bbox).map_err(|e| Error::for_item(&r.item_id, e))?;
            let embedding = Embedding::new(row.to_vec())?;
            GalleryItem::new(&r.item_id, r.frame_id, bbox, r.det_score, embedding, r.person_id)
                .map_err(|e| Error::for_item(&r.item_id, e))
        })
        .collect::<Result<Vec<_>>>()?;
    let frames = format::parse_frames(frames)?;
    let probes = format::parse_probes(probes)?
        .into_iter()
        .map(|p| p.probe_item_id)
        .collect();
    Dataset::new(matrix.dim, items, frames, probes)
}

pub fn encode_dataset(ds: &Dataset) -> EncodedDataset {
    let embeddings = format::encode_embeddings(ds.embedding_dim, ds.items.iter().map(|i| i.embedding.values()));
    let items: Vec<ItemRecord> = ds
        .items
        .iter()
        .map(|i| ItemRecord {
            item_id: i.item_id.clone(),
            frame_id: i.frame_id.clone(),
            bbox: i.bbox.to_array(),
            det_score: i.det_score,
            person_id: i.person_id.clone(),
        })
        .collect();
    let frames: Vec<FrameRecord> = ds
        .frames
        .values()
        .map(|f| FrameRecord {
            frame_id: f.frame_id.clone(),
            gt: f
                .gt
                .iter()
                .map(|g| GtRecord {
                    bbox: g.bbox.to_array(),
                    person_id: g.person_id.clone(),
                })
                .collect(),
        })
        .collect();
    let probes: Vec<ProbeRecord> = ds
        .probes
        .iter()
        .map(|p| ProbeRecord {
            probe_item_id: p.clone(),
        })
        .collect();
    EncodedDataset {
        embeddings,
        items: format::to_jsonl(&items),
        frames: format::to_jsonl(&frames),
        probes: format::to_jsonl(&probes),
    }
}

pub fn load_dataset(paths: &DatasetPaths) -> Result<Dataset> {
    let read_text = |p: &Path| fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())));
    let embeddings =
        fs::read(&paths.embeddings).map_err(|e| Error::Io(format!("{}: {e}", paths.embeddings.display())))?;
    decode_dataset(
        &embeddings,
        &read_text(&paths.items)?,
        &read_text(&paths.frames)?,
        &read_text(&paths.probes)?,
    )
}

/// Writes the four dataset files into `dir`, creating it if needed.
pub fn save_dataset(ds: &Dataset, dir: impl AsRef<Path>) -> Result<DatasetPaths> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let paths = DatasetPaths::in_dir(dir);
    let enc = encode_dataset(ds);
    fs::write(&paths.embeddings, enc.embeddings)?;
    fs::write(&paths.items, enc.items)?;
    fs::write(&paths.frames, enc.frames)?;
    fs::write(&paths.probes, enc.probes)?;
    Ok(paths)
}
