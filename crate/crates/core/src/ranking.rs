//! Deterministic ranked lists and their tab-separated text form.

use std::collections::HashSet;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::similarity::{or_score_matrix, ScoreBreakdown, ScoringMode};
use crate::types::{GalleryItem, ProbeContext};

#[derive(Debug, Clone, PartialEq)]
pub struct RankedEntry {
    pub item_id: String,
    pub scores: ScoreBreakdown,
}

/// Gallery items for one probe, best first.
///
/// Entries are ordered by combined score descending, then by ascending
/// `item_id`, which makes the order a total function of the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    pub probe_id: String,
    pub mode: ScoringMode,
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn item_ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.item_id.as_str())
    }
}

/// Orders entries by combined score descending, ties by ascending item id.
pub fn sort_entries(entries: &mut [RankedEntry]) {
    entries.sort_by(|a, b| {
        b.scores
            .combined
            .total_cmp(&a.scores.combined)
            .then_with(|| a.item_id.cmp(&b.item_id))
    });
}

/// Scores and ranks a gallery for one probe.
///
/// The probe detection itself is never ranked. With `exclude_probe_frame`
/// set, every detection from the probe's frame is dropped as well.
pub fn rank_gallery<G: AsRef<GalleryItem>>(
    ctx: &ProbeContext,
    gallery: &[G],
    mode: ScoringMode,
    exclude_probe_frame: bool,
) -> Result<RankedList> {
    let probe = ctx.probe();
    let mut seen = HashSet::with_capacity(gallery.len());
    let mut kept: Vec<&GalleryItem> = Vec::with_capacity(gallery.len());
    for g in gallery {
        let item = g.as_ref();
        if !seen.insert(item.item_id.as_str()) {
            return Err(Error::DuplicateItem(item.item_id.clone()));
        }
        if item.item_id == probe.item_id || (exclude_probe_frame && item.frame_id == probe.frame_id) {
            continue;
        }
        kept.push(item);
    }
    if kept.is_empty() {
        return Err(Error::EmptyGallery);
    }
    let scores = or_score_matrix(ctx, &kept, mode)?;
    let mut entries: Vec<RankedEntry> = kept
        .iter()
        .zip(scores)
        .map(|(item, scores)| RankedEntry {
            item_id: item.item_id.clone(),
            scores,
        })
        .collect();
    sort_entries(&mut entries);
    Ok(RankedList {
        probe_id: probe.item_id.clone(),
        mode,
        entries,
    })
}

pub fn truncate_top_k(mut list: RankedList, k: usize) -> Result<RankedList> {
    if k < 1 {
        return Err(Error::InvalidK(k));
    }
    list.entries.truncate(k);
    Ok(list)
}

/// Formats a float with 9 significant digits, like C's `%.9g`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("exponent digits");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_owned()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_owned()
}

/// Serializes a ranked list: one line per entry with
/// `probe_id, rank, item_id, combined, visual, objectness, repulsion, gap,
/// nearest_query_index`, tab-separated, ranks starting at 1.
pub fn to_tsv(list: &RankedList) -> String {
    let mut out = String::new();
    for (i, e) in list.entries.iter().enumerate() {
        let s = &e.scores;
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            list.probe_id,
            i + 1,
            e.item_id,
            format_sig9(s.combined),
            format_sig9(s.visual),
            format_sig9(s.objectness),
            format_sig9(s.repulsion),
            format_sig9(s.gap),
            s.nearest_query_index
        );
    }
    out
}

/// Parses ranked-list records produced by [`to_tsv`]. Records are grouped by
/// probe in order of first appearance; ranks must run 1, 2, ... per probe.
/// Scores come back rounded to 9 significant digits.
pub fn parse_tsv(text: &str, mode: ScoringMode) -> Result<Vec<RankedList>> {
    let mut lists: Vec<RankedList> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 9 {
            return Err(Error::Format(format!(
                "line {lineno}: expected 9 tab-separated fields, found {}",
                fields.len()
            )));
        }
        let num = |i: usize| -> Result<f64> {
            fields[i]
                .parse::<f64>()
                .map_err(|_| Error::Format(format!("line {lineno}: bad number `{}`", fields[i])))
        };
        let rank: usize = fields[1]
            .parse()
            .map_err(|_| Error::Format(format!("line {lineno}: bad rank `{}`", fields[1])))?;
        let nearest: usize = fields[8]
            .parse()
            .map_err(|_| Error::Format(format!("line {lineno}: bad index `{}`", fields[8])))?;
        let entry = RankedEntry {
            item_id: fields[2].to_owned(),
            scores: ScoreBreakdown {
                combined: num(3)?,
                visual: num(4)?,
                objectness: num(5)?,
                repulsion: num(6)?,
                gap: num(7)?,
                nearest_query_index: nearest,
            },
        };
        let probe_id = fields[0];
        let list = match lists.iter_mut().position(|l| l.probe_id == probe_id) {
            Some(i) => &mut lists[i],
            None => {
                lists.push(RankedList {
                    probe_id: probe_id.to_owned(),
                    mode,
                    entries: Vec::new(),
                });
                lists.last_mut().expect("just pushed")
            }
        };
        if rank != list.entries.len() + 1 {
            return Err(Error::Format(format!(
                "line {lineno}: rank {rank} out of sequence for probe `{probe_id}`"
            )));
        }
        if list.entries.iter().any(|e| e.item_id == entry.item_id) {
            return Err(Error::DuplicateItem(entry.item_id));
        }
        list.entries.push(entry);
    }
    Ok(lists)
}
