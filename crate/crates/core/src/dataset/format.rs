//! On-disk formats.
//!
//! Embedding file (all integers little-endian):
//!
//! | offset | size | field                      |
//! |--------|------|----------------------------|
//! | 0      | 4    | magic `ORSE`               |
//! | 4      | 2    | format version, u16 = 1    |
//! | 6      | 8    | row count, u64             |
//! | 14     | 4    | dimension, u32             |
//! | 18     | 4·n·d| rows of IEEE-754 binary32  |
//!
//! Metadata files are JSON Lines: detections
//! `{"item_id", "frame_id", "bbox": [x, y, w, h], "det_score", "person_id"?}`,
//! frames `{"frame_id", "gt": [{"bbox", "person_id"}]}` and probes
//! `{"probe_item_id"}`. Blank lines are ignored.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{BBox, Frame, GtBox};

pub const MAGIC: &[u8; 4] = b"ORSE";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 18;

/// Dense row-major matrix read from an embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub count: usize,
    pub dim: usize,
    pub data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }
}

pub fn encode_embeddings<'a>(dim: usize, rows: impl ExactSizeIterator<Item = &'a [f32]>) -> Vec<u8> {
    let count = rows.len();
    let mut out = Vec::with_capacity(HEADER_LEN + count * dim * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(count as u64).to_le_bytes());
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for row in rows {
        assert_eq!(row.len(), dim, "row length differs from header dimension");
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<EmbeddingMatrix> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Format(format!(
            "embedding file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(Error::Format("bad magic, expected `ORSE`".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let count = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
    let dim = u32::from_le_bytes(bytes[14..18].try_into().expect("4 bytes")) as usize;
    if dim == 0 {
        return Err(Error::DimensionZero);
    }
    let payload = &bytes[HEADER_LEN..];
    let expected = usize::try_from(count)
        .ok()
        .and_then(|c| c.checked_mul(dim))
        .and_then(|n| n.checked_mul(4));
    if expected != Some(payload.len()) {
        return Err(Error::Format(format!(
            "header declares {count} x {dim} values but the payload holds {} bytes",
            payload.len()
        )));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
        .collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::Format(format!(
            "non-finite value in row {}, column {}",
            pos / dim,
            pos % dim
        )));
    }
    Ok(EmbeddingMatrix {
        count: count as usize,
        dim,
        data,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub item_id: String,
    pub frame_id: String,
    pub bbox: [f64; 4],
    pub det_score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtRecord {
    pub bbox: [f64; 4],
    pub person_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_id: String,
    #[serde(default)]
    pub gt: Vec<GtRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub probe_item_id: String,
}

fn parse_jsonl<T: DeserializeOwned>(text: &str, what: &str) -> Result<Vec<T>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::Format(format!("{what} line {}: {e}", i + 1))))
        .collect()
}

pub(crate) fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_items(text: &str) -> Result<Vec<ItemRecord>> {
    parse_jsonl(text, "items")
}

pub fn parse_probes(text: &str) -> Result<Vec<ProbeRecord>> {
    parse_jsonl(text, "probes")
}

pub fn bbox_from_array(a: [f64; 4]) -> Result<BBox> {
    BBox::new(a[0], a[1], a[2], a[3])
}

/// Parses and validates frame records.
pub fn parse_frames(text: &str) -> Result<Vec<Frame>> {
    parse_jsonl::<FrameRecord>(text, "frames")?
        .into_iter()
        .map(|r| {
            let gt =
                r.gt.into_iter()
                    .map(|g| {
                        Ok(GtBox {
                            bbox: bbox_from_array(g.bbox)
                                .map_err(|e| Error::Format(format!("frame `{}`: {e}", r.frame_id)))?,
                            person_id: g.person_id,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
            Frame::new(r.frame_id, gt)
        })
        .collect()
}
