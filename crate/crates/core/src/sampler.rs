//! Hybrid image/video training-sample selection.
//!
//! Each draw flips a Bernoulli coin with probability `sigma` for the image
//! branch. Image tuples take three distinct image identities and duplicate
//! each into a (t, t-1) pair; video tuples take one clip and three
//! independent consecutive-frame pairs from it, so all three roles share the
//! clip's identity and self-supervision is possible.

use std::fmt;

use rand::Rng;

use crate::{Error, Result};

/// One video clip: an identity filmed for `frame_count` frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoClip {
    pub clip_id: String,
    pub identity_id: String,
    pub frame_count: u32,
}

/// The catalogs draws are made from. Every clip must have at least two
/// frames so a consecutive pair exists.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetCatalog {
    pub video_clips: Vec<VideoClip>,
    pub image_ids: Vec<String>,
}

impl DatasetCatalog {
    pub fn new(video_clips: Vec<VideoClip>, image_ids: Vec<String>) -> Result<Self> {
        for clip in &video_clips {
            if clip.frame_count < 2 {
                return Err(Error::InvalidArgument(format!(
                    "clip {:?} has {} frames, need at least 2",
                    clip.clip_id, clip.frame_count
                )));
            }
        }
        Ok(Self {
            video_clips,
            image_ids,
        })
    }

    fn clip(&self, id: &str) -> Option<&VideoClip> {
        self.video_clips.iter().find(|c| c.clip_id == id)
    }
}

/// Which branch a tuple was drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleMode {
    Video,
    Image,
}

/// A reference to one frame: a clip id plus frame index for video sources,
/// an image id with frame 0 for image sources.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameRef {
    pub source_id: String,
    pub frame: u32,
}

/// A (t, t-1) pair of frame references. Image-branch pairs duplicate the
/// same reference.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePair {
    pub ref_t: FrameRef,
    pub ref_tm1: FrameRef,
}

impl SamplePair {
    fn duplicated(source_id: &str) -> Self {
        let r = FrameRef {
            source_id: source_id.to_string(),
            frame: 0,
        };
        Self {
            ref_t: r.clone(),
            ref_tm1: r,
        }
    }

    fn consecutive(clip_id: &str, t: u32) -> Self {
        Self {
            ref_t: FrameRef {
                source_id: clip_id.to_string(),
                frame: t,
            },
            ref_tm1: FrameRef {
                source_id: clip_id.to_string(),
                frame: t - 1,
            },
        }
    }
}

/// One training tuple: identity, pose, and expression sources, each as a
/// (t, t-1) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleTuple {
    pub mode: SampleMode,
    pub identity_pair: SamplePair,
    pub pose_pair: SamplePair,
    pub expression_pair: SamplePair,
}

impl fmt::Display for SampleTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = match self.mode {
            SampleMode::Video => "video",
            SampleMode::Image => "image",
        };
        let pair = |p: &SamplePair| match self.mode {
            SampleMode::Video => format!(
                "{}:{},{}:{}",
                p.ref_t.source_id, p.ref_t.frame, p.ref_tm1.source_id, p.ref_tm1.frame
            ),
            SampleMode::Image => format!("{},{}", p.ref_t.source_id, p.ref_tm1.source_id),
        };
        write!(
            f,
            "mode={} identity={} pose={} expression={}",
            mode,
            pair(&self.identity_pair),
            pair(&self.pose_pair),
            pair(&self.expression_pair)
        )
    }
}

/// Draws one tuple. With probability `sigma` the image branch is taken:
/// three distinct image ids uniformly without replacement, each duplicated
/// into its pair. Otherwise one clip is chosen uniformly and three
/// independent time indices `t` uniform in `[1, frame_count - 1]` become the
/// (t, t-1) pairs. Deterministic for a given rng state.
pub fn draw<R: Rng>(catalog: &DatasetCatalog, sigma: f64, rng: &mut R) -> Result<SampleTuple> {
    if !(0.0..=1.0).contains(&sigma) {
        return Err(Error::InvalidArgument(format!(
            "sigma must lie in [0,1], got {sigma}"
        )));
    }
    let image_mode = rng.random_bool(sigma);
    if image_mode {
        if catalog.image_ids.len() < 3 {
            return Err(Error::InvalidArgument(format!(
                "image branch needs at least 3 images, catalog has {}",
                catalog.image_ids.len()
            )));
        }
        let picks = rand::seq::index::sample(rng, catalog.image_ids.len(), 3);
        let id = |i: usize| catalog.image_ids[picks.index(i)].as_str();
        Ok(SampleTuple {
            mode: SampleMode::Image,
            identity_pair: SamplePair::duplicated(id(0)),
            pose_pair: SamplePair::duplicated(id(1)),
            expression_pair: SamplePair::duplicated(id(2)),
        })
    } else {
        if catalog.video_clips.is_empty() {
            return Err(Error::InvalidArgument(
                "video branch needs a nonempty clip catalog".into(),
            ));
        }
        let clip = &catalog.video_clips[rng.random_range(0..catalog.video_clips.len())];
        let mut pick = || SamplePair::consecutive(&clip.clip_id, rng.random_range(1..clip.frame_count));
        Ok(SampleTuple {
            mode: SampleMode::Video,
            identity_pair: pick(),
            pose_pair: pick(),
            expression_pair: pick(),
        })
    }
}

/// A broken invariant found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    UnknownClip(String),
    UnknownImage(String),
    CrossClip { role: &'static str, expected: String, found: String },
    NonConsecutive { role: &'static str, t: u32, tm1: u32 },
    FrameOutOfRange { role: &'static str, frame: u32, frame_count: u32 },
    PairNotDuplicated { role: &'static str },
    IdentitiesNotDistinct,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::UnknownClip(id) => write!(f, "clip {id:?} is not in the catalog"),
            Violation::UnknownImage(id) => write!(f, "image {id:?} is not in the catalog"),
            Violation::CrossClip { role, expected, found } => write!(
                f,
                "{role} pair references clip {found:?}, tuple clip is {expected:?}"
            ),
            Violation::NonConsecutive { role, t, tm1 } => {
                write!(f, "{role} pair frames ({t}, {tm1}) are not consecutive")
            }
            Violation::FrameOutOfRange { role, frame, frame_count } => {
                write!(f, "{role} pair frame {frame} exceeds clip length {frame_count}")
            }
            Violation::PairNotDuplicated { role } => {
                write!(f, "{role} pair must duplicate one image reference")
            }
            Violation::IdentitiesNotDistinct => {
                write!(f, "image tuple must reference three distinct identities")
            }
        }
    }
}

/// Checks every [`SampleTuple`] invariant against the catalog and returns
/// all violations found (empty means valid).
pub fn validate(tuple: &SampleTuple, catalog: &DatasetCatalog) -> Vec<Violation> {
    let mut violations = Vec::new();
    let roles: [(&'static str, &SamplePair); 3] = [
        ("identity", &tuple.identity_pair),
        ("pose", &tuple.pose_pair),
        ("expression", &tuple.expression_pair),
    ];
    match tuple.mode {
        SampleMode::Video => {
            let anchor = &tuple.identity_pair.ref_t.source_id;
            match catalog.clip(anchor) {
                None => violations.push(Violation::UnknownClip(anchor.clone())),
                Some(clip) => {
                    for (role, pair) in &roles {
                        for r in [&pair.ref_t, &pair.ref_tm1] {
                            if &r.source_id != anchor {
                                violations.push(Violation::CrossClip {
                                    role,
                                    expected: anchor.clone(),
                                    found: r.source_id.clone(),
                                });
                            }
                            if r.frame >= clip.frame_count {
                                violations.push(Violation::FrameOutOfRange {
                                    role,
                                    frame: r.frame,
                                    frame_count: clip.frame_count,
                                });
                            }
                        }
                        if pair.ref_t.frame == 0
                            || pair.ref_tm1.frame != pair.ref_t.frame - 1
                        {
                            violations.push(Violation::NonConsecutive {
                                role,
                                t: pair.ref_t.frame,
                                tm1: pair.ref_tm1.frame,
                            });
                        }
                    }
                }
            }
        }
        SampleMode::Image => {
            for (role, pair) in &roles {
                if pair.ref_t != pair.ref_tm1 {
                    violations.push(Violation::PairNotDuplicated { role });
                }
                if !catalog.image_ids.contains(&pair.ref_t.source_id) {
                    violations.push(Violation::UnknownImage(pair.ref_t.source_id.clone()));
                }
            }
            let ids = [
                &tuple.identity_pair.ref_t.source_id,
                &tuple.pose_pair.ref_t.source_id,
                &tuple.expression_pair.ref_t.source_id,
            ];
            if ids[0] == ids[1] || ids[0] == ids[2] || ids[1] == ids[2] {
                violations.push(Violation::IdentitiesNotDistinct);
            }
        }
    }
    violations
}
