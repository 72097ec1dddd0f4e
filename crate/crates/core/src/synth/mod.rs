//! Seeded synthetic person-search benchmarks and brute-force oracles.
//!
//! A generated dataset has labeled identities whose detections scatter
//! around a unit-sphere center, plus three kinds of distractors:
//!
//! * unlabeled pedestrians (an identity nobody searches for), drawn from the
//!   high mode of the distractor score distribution;
//! * partial crops of a labeled person in the same frame, whose box covers
//!   less than half of the person and whose embedding resembles them;
//! * clutter with a random embedding.
//!
//! The latter two use the low score mode. Occlusion blends a detection's
//! embedding with that of another person in its frame.

mod instance;
mod oracle;

use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use instance::{eval_instance, EvalInstance, MAX_INSTANCE_DETECTIONS, MAX_INSTANCE_FRAMES};
pub use oracle::{brute_force_detection, brute_force_map, brute_force_rank, brute_force_search, OracleSearch};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::types::{BBox, Embedding, Frame, GalleryItem, GtBox};

/// Detection-score distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreDist {
    Constant {
        value: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    /// `low + (high - low) * Beta(alpha, beta)`.
    Beta {
        alpha: f64,
        beta: f64,
        low: f64,
        high: f64,
    },
    /// With probability `high_weight` draw from `high`, otherwise from `low`.
    Bimodal {
        high_weight: f64,
        high: Box<ScoreDist>,
        low: Box<ScoreDist>,
    },
}

/// Which component of a [`ScoreDist::Bimodal`] produced a draw; plain
/// distributions always report [`ScoreMode::High`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScoreMode {
    High,
    Low,
}

impl ScoreDist {
    fn validate(&self, name: &str) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let ok = match self {
            ScoreDist::Constant { value } => unit(*value),
            ScoreDist::Uniform { low, high } => unit(*low) && unit(*high) && low <= high,
            ScoreDist::Beta { alpha, beta, low, high } => {
                *alpha > 0.0
                    && *beta > 0.0
                    && alpha.is_finite()
                    && beta.is_finite()
                    && unit(*low)
                    && unit(*high)
                    && low <= high
            }
            ScoreDist::Bimodal { high_weight, high, low } => {
                high.validate(name)?;
                low.validate(name)?;
                unit(*high_weight)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("{name}: invalid parameters {self:?}")))
        }
    }

    fn sample(&self, rng: &mut CounterRng) -> (f64, ScoreMode) {
        match self {
            ScoreDist::Constant { value } => (*value, ScoreMode::High),
            ScoreDist::Uniform { low, high } => (low + (high - low) * rng.next_f64(), ScoreMode::High),
            ScoreDist::Beta { alpha, beta, low, high } => {
                let x: f64 = Beta::new(*alpha, *beta).expect("validated").sample(rng);
                ((low + (high - low) * x).clamp(0.0, 1.0), ScoreMode::High)
            }
            ScoreDist::Bimodal { high_weight, high, low } => {
                if rng.chance(*high_weight) {
                    (high.sample(rng).0, ScoreMode::High)
                } else {
                    (low.sample(rng).0, ScoreMode::Low)
                }
            }
        }
    }
}

/// Generator parameters. Every field has a default, so a JSON config only
/// needs the fields it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub num_identities: usize,
    pub embedding_dim: usize,
    pub frames_per_identity: usize,
    pub max_persons_per_frame: usize,
    /// Share of all detections that are distractors, in [0, 1).
    pub distractor_fraction: f64,
    /// Share of low-mode distractors that are partial crops of a person.
    pub partial_fraction: f64,
    /// Noise norm of a partial crop relative to the unit identity center.
    pub partial_noise_sigma: f64,
    pub occlusion_rate: f64,
    pub occlusion_alpha: f64,
    /// Expected norm of a detection's noise relative to its unit identity
    /// center; each component is N(0, sigma² / dim).
    pub intra_class_noise_sigma: f64,
    pub positive_score_dist: ScoreDist,
    pub distractor_score_dist: ScoreDist,
    pub frame_width: f64,
    pub frame_height: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_identities: 500,
            embedding_dim: 64,
            frames_per_identity: 4,
            max_persons_per_frame: 4,
            distractor_fraction: 0.5,
            partial_fraction: 0.6,
            partial_noise_sigma: 1.0,
            occlusion_rate: 0.3,
            occlusion_alpha: 0.5,
            intra_class_noise_sigma: 0.6,
            positive_score_dist: ScoreDist::Beta {
                alpha: 30.0,
                beta: 1.5,
                low: 0.5,
                high: 1.0,
            },
            distractor_score_dist: ScoreDist::Bimodal {
                high_weight: 0.5,
                high: Box::new(ScoreDist::Beta {
                    alpha: 12.0,
                    beta: 2.0,
                    low: 0.5,
                    high: 1.0,
                }),
                low: Box::new(ScoreDist::Beta {
                    alpha: 3.0,
                    beta: 7.0,
                    low: 0.5,
                    high: 1.0,
                }),
            },
            frame_width: 1920.0,
            frame_height: 1080.0,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SynthConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let rate = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} = {v} must lie in [0, 1]")))
            }
        };
        rate("occlusion_rate", self.occlusion_rate)?;
        rate("occlusion_alpha", self.occlusion_alpha)?;
        rate("partial_fraction", self.partial_fraction)?;
        rate("distractor_fraction", self.distractor_fraction)?;
        if self.distractor_fraction >= 1.0 {
            return Err(Error::Config("distractor_fraction must be below 1".into()));
        }
        for (name, v) in [
            ("intra_class_noise_sigma", self.intra_class_noise_sigma),
            ("partial_noise_sigma", self.partial_noise_sigma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} = {v} must be a finite value >= 0")));
            }
        }
        if self.embedding_dim < 2 {
            return Err(Error::Config("embedding_dim must be at least 2".into()));
        }
        if self.num_identities == 0 || self.frames_per_identity == 0 || self.max_persons_per_frame == 0 {
            return Err(Error::Config(
                "num_identities, frames_per_identity and max_persons_per_frame must be positive".into(),
            ));
        }
        if !(self.frame_width >= 100.0 && self.frame_height >= 100.0)
            || !self.frame_width.is_finite()
            || !self.frame_height.is_finite()
        {
            return Err(Error::Config("frames must be at least 100 x 100 pixels".into()));
        }
        self.positive_score_dist.validate("positive_score_dist")?;
        self.distractor_score_dist.validate("distractor_score_dist")?;
        Ok(())
    }
}

// Labels for independent generator streams.
const STREAM_CENTERS: u64 = 1;
const STREAM_LAYOUT: u64 = 2;
const STREAM_DETECTIONS: u64 = 3;
const STREAM_OCCLUSION: u64 = 4;
const STREAM_DISTRACTORS: u64 = 5;
const STREAM_PROBES: u64 = 6;

struct Person {
    identity: usize,
    gt: BBox,
    det: BBox,
    score: f64,
    clean: Vec<f64>,
    embedding: Vec<f64>,
}

struct Distractor {
    frame: usize,
    bbox: BBox,
    score: f64,
    embedding: Vec<f64>,
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

fn random_unit(rng: &mut CounterRng, dim: usize) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        if v.iter().any(|x| *x != 0.0) {
            normalize(&mut v);
            return v;
        }
    }
}

fn noisy(rng: &mut CounterRng, center: &[f64], sigma: f64) -> Vec<f64> {
    if sigma == 0.0 {
        return center.to_vec();
    }
    let normal = Normal::new(0.0, sigma / (center.len() as f64).sqrt()).expect("finite sigma");
    let mut v: Vec<f64> = center.iter().map(|c| c + normal.sample(rng)).collect();
    if v.iter().all(|x| *x == 0.0) {
        return center.to_vec();
    }
    normalize(&mut v);
    v
}

fn uniform(rng: &mut CounterRng, low: f64, high: f64) -> f64 {
    low + (high - low) * rng.next_f64()
}

/// Frame composition: each frame is a list of distinct identities, and each
/// identity appears in `frames_per_identity` frames.
fn layout_frames(cfg: &SynthConfig, rng: &mut CounterRng) -> Vec<Vec<usize>> {
    let mut slots: Vec<usize> = (0..cfg.num_identities)
        .flat_map(|id| std::iter::repeat_n(id, cfg.frames_per_identity))
        .collect();
    let n = slots.len();
    rng.partial_shuffle(&mut slots, n);
    let mut frames: Vec<Vec<usize>> = Vec::new();
    let mut pending: Vec<usize> = Vec::new();
    let mut queue = slots.into_iter().peekable();
    while queue.peek().is_some() || !pending.is_empty() {
        let want = 1 + rng.below(cfg.max_persons_per_frame as u64) as usize;
        let mut frame: Vec<usize> = Vec::with_capacity(want);
        let mut deferred = Vec::new();
        for id in pending.drain(..) {
            if frame.len() < want && !frame.contains(&id) {
                frame.push(id);
            } else {
                deferred.push(id);
            }
        }
        pending = deferred;
        while frame.len() < want {
            match queue.next() {
                Some(id) if frame.contains(&id) => pending.push(id),
                Some(id) => frame.push(id),
                None => break,
            }
        }
        if frame.is_empty() {
            // only repeats of identities already placed remain
            frame.push(pending.remove(0));
        }
        frames.push(frame);
    }
    frames
}

fn clip_box(cfg: &SynthConfig, x: f64, y: f64, w: f64, h: f64) -> BBox {
    let x = x.clamp(0.0, cfg.frame_width - w);
    let y = y.clamp(0.0, cfg.frame_height - h);
    BBox::new(x, y, w, h).expect("positive size")
}

fn to_embedding(v: &[f64]) -> Embedding {
    Embedding::new(v.iter().map(|&x| x as f32).collect()).expect("finite, nonempty")
}

/// Generates a dataset. The output depends only on `cfg`.
pub fn generate(cfg: &SynthConfig) -> Result<Dataset> {
    cfg.validate()?;
    let dim = cfg.embedding_dim;

    let mut rng = CounterRng::derive(cfg.seed, STREAM_CENTERS);
    let centers: Vec<Vec<f64>> = (0..cfg.num_identities).map(|_| random_unit(&mut rng, dim)).collect();

    let mut rng = CounterRng::derive(cfg.seed, STREAM_LAYOUT);
    let layout = layout_frames(cfg, &mut rng);

    // People are placed in vertical strips so that boxes of different people
    // never overlap.
    let strip = cfg.frame_width / cfg.max_persons_per_frame as f64;
    let mut rng = CounterRng::derive(cfg.seed, STREAM_DETECTIONS);
    let mut frames: Vec<Vec<Person>> = layout
        .iter()
        .map(|ids| {
            ids.iter()
                .enumerate()
                .map(|(slot, &identity)| {
                    let w = uniform(&mut rng, 0.3, 0.8) * strip.min(cfg.frame_height / 2.0);
                    let h = (w * uniform(&mut rng, 2.0, 2.5)).min(cfg.frame_height * 0.9);
                    let x = slot as f64 * strip + uniform(&mut rng, 0.0, strip - w);
                    let y = uniform(&mut rng, 0.0, cfg.frame_height - h);
                    let gt = clip_box(cfg, x, y, w, h);
                    let jitter = |rng: &mut CounterRng, s: f64| uniform(rng, -0.04, 0.04) * s;
                    let det = clip_box(
                        cfg,
                        gt.x + jitter(&mut rng, w),
                        gt.y + jitter(&mut rng, h),
                        w * (1.0 + jitter(&mut rng, 1.0)),
                        h * (1.0 + jitter(&mut rng, 1.0)),
                    );
                    let score = cfg.positive_score_dist.sample(&mut rng).0;
                    let clean = noisy(&mut rng, &centers[identity], cfg.intra_class_noise_sigma);
                    Person {
                        identity,
                        gt,
                        det,
                        score,
                        embedding: clean.clone(),
                        clean,
                    }
                })
                .collect()
        })
        .collect();

    let mut rng = CounterRng::derive(cfg.seed, STREAM_OCCLUSION);
    let alpha = cfg.occlusion_alpha;
    for people in frames.iter_mut() {
        if people.len() < 2 {
            continue;
        }
        // occlusion is one-directional: an occluder is never occluded by its victim
        let mut occluder_of: Vec<Option<usize>> = vec![None; people.len()];
        for i in 0..people.len() {
            if !rng.chance(cfg.occlusion_rate) {
                continue;
            }
            let mut j = rng.below(people.len() as u64 - 1) as usize;
            if j >= i {
                j += 1;
            }
            if occluder_of[j] == Some(i) {
                continue;
            }
            occluder_of[i] = Some(j);
            let mut mixed: Vec<f64> = people[i]
                .clean
                .iter()
                .zip(&people[j].clean)
                .map(|(own, occ)| (1.0 - alpha) * own + alpha * occ)
                .collect();
            if alpha == 1.0 {
                mixed = people[j].clean.clone();
            } else if mixed.iter().all(|x| *x == 0.0) {
                mixed = people[i].clean.clone();
            } else {
                normalize(&mut mixed);
            }
            people[i].embedding = mixed;
        }
    }

    let num_people: usize = frames.iter().map(Vec::len).sum();
    let num_distractors =
        (num_people as f64 * cfg.distractor_fraction / (1.0 - cfg.distractor_fraction)).round() as usize;
    let mut rng = CounterRng::derive(cfg.seed, STREAM_DISTRACTORS);
    let mut distractors: Vec<Distractor> = Vec::with_capacity(num_distractors);
    for _ in 0..num_distractors {
        let frame = rng.below(frames.len() as u64) as usize;
        let (score, mode) = cfg.distractor_score_dist.sample(&mut rng);
        let people = &frames[frame];
        let partial = mode == ScoreMode::Low && rng.chance(cfg.partial_fraction);
        let (bbox, embedding) = if partial {
            let who = &people[rng.below(people.len() as u64) as usize];
            let g = who.gt;
            // top 30% of the person: IoU with the full box is 0.3
            let bbox = BBox::new(g.x, g.y, g.w, g.h * 0.3).expect("positive size");
            (bbox, noisy(&mut rng, &centers[who.identity], cfg.partial_noise_sigma))
        } else {
            let w = uniform(&mut rng, 20.0, 0.4 * strip.min(cfg.frame_height / 2.0).max(40.0));
            let h = w * uniform(&mut rng, 1.0, 2.5);
            let x = uniform(&mut rng, 0.0, cfg.frame_width - w);
            let y = uniform(&mut rng, 0.0, (cfg.frame_height - h).max(0.0));
            let bbox = clip_box(cfg, x, y, w, h.min(cfg.frame_height));
            (bbox, random_unit(&mut rng, dim))
        };
        distractors.push(Distractor {
            frame,
            bbox,
            score,
            embedding,
        });
    }

    let person_id = |identity: usize| format!("p{identity:05}");
    let frame_id = |f: usize| format!("f{f:06}");
    let mut items = Vec::with_capacity(num_people + distractors.len());
    let mut frame_records = Vec::with_capacity(frames.len());
    let mut appearances: Vec<Vec<usize>> = vec![Vec::new(); cfg.num_identities];
    for (f, people) in frames.iter().enumerate() {
        let gt = people
            .iter()
            .map(|p| GtBox {
                bbox: p.gt,
                person_id: person_id(p.identity),
            })
            .collect();
        frame_records.push(Frame::new(frame_id(f), gt)?);
        for p in people {
            appearances[p.identity].push(items.len());
            items.push(GalleryItem::new(
                format!("d{:07}", items.len()),
                frame_id(f),
                p.det,
                p.score,
                to_embedding(&p.embedding),
                Some(person_id(p.identity)),
            )?);
        }
    }
    for d in &distractors {
        items.push(GalleryItem::new(
            format!("d{:07}", items.len()),
            frame_id(d.frame),
            d.bbox,
            d.score,
            to_embedding(&d.embedding),
            None,
        )?);
    }

    let mut rng = CounterRng::derive(cfg.seed, STREAM_PROBES);
    let probes = appearances
        .iter()
        .filter(|a| a.len() >= 2)
        .map(|a| items[a[rng.below(a.len() as u64) as usize]].item_id.clone())
        .collect();
    Dataset::new(dim, items, frame_records, probes)
}
