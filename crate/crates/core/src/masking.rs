//! Availability masking for training and perturbation patterns for evaluation.
//!
//! Masking only ever clears availability flags; values are left untouched
//! except by [`EvalPattern::GaussianNoise`].

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::coretypes::{keypoint_layout, BodyGroup, CueKind, Scene};
use crate::error::{Error, Result};

/// Independent random stream for `(seed, domain, index)`.
///
/// Domains keep e.g. shuffling and masking draws apart under one user seed.
pub fn substream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug, PartialEq)]
pub enum EvalPattern {
    None,
    /// Each `(t, element)` entry of the listed cue is kept with probability `q`.
    KeepFraction(Vec<(CueKind, f64)>),
    /// Each arm and leg keypoint entry is hidden with probability 0.5.
    RandomLimb,
    /// Right-leg keypoints hidden at every step.
    StructuredRightLeg,
    /// Whole pose frames hidden with probability `p`.
    FrameDrop(f64),
    /// Gaussian noise with this standard deviation on available pose values.
    GaussianNoise(f64),
}

impl EvalPattern {
    pub fn check(&self) -> Result<()> {
        let prob = |p: f64, what: &str| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::Config(format!("{what} must lie in [0, 1], got {p}")))
            }
        };
        match self {
            EvalPattern::KeepFraction(list) => {
                list.iter().try_for_each(|(k, q)| prob(*q, &format!("keep fraction of {k}")))
            }
            EvalPattern::FrameDrop(p) => prob(*p, "frame-drop probability"),
            EvalPattern::GaussianNoise(s) if !(s.is_finite() && *s >= 0.0) => {
                Err(Error::Config(format!("noise std must be >= 0, got {s}")))
            }
            _ => Ok(()),
        }
    }

    /// Parses `T=0.5,P3d=0.1` into a keep-fraction pattern.
    pub fn keep_fraction(text: &str) -> Result<Self> {
        let mut list = Vec::new();
        for part in text.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (kind, q) = part
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("expected CUE=FRACTION, got `{part}`")))?;
            let q: f64 = q
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad keep fraction `{q}`")))?;
            list.push((kind.trim().parse()?, q));
        }
        let p = EvalPattern::KeepFraction(list);
        p.check()?;
        Ok(p)
    }
}

impl FromStr for EvalPattern {
    type Err = Error;

    /// Accepts `none`, `random-limb`, `right-leg`, `frame-drop:P`, `noise:S`
    /// and `keep:CUE=Q,...`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let num = |a: Option<&str>| -> Result<f64> {
            a.ok_or_else(|| Error::Config(format!("pattern `{head}` needs a value")))?
                .parse()
                .map_err(|_| Error::Config(format!("bad number in pattern `{s}`")))
        };
        let p = match head {
            "none" => EvalPattern::None,
            "random-limb" => EvalPattern::RandomLimb,
            "right-leg" | "structured-right-leg" => EvalPattern::StructuredRightLeg,
            "frame-drop" => EvalPattern::FrameDrop(num(arg)?),
            "noise" => EvalPattern::GaussianNoise(num(arg)?),
            "keep" => return EvalPattern::keep_fraction(arg.unwrap_or("")),
            other => return Err(Error::Config(format!("unknown evaluation pattern `{other}`"))),
        };
        p.check()?;
        Ok(p)
    }
}

impl fmt::Display for EvalPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvalPattern::None => f.write_str("none"),
            EvalPattern::KeepFraction(list) => {
                f.write_str("keep:")?;
                for (i, (k, q)) in list.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{k}={q}")?;
                }
                Ok(())
            }
            EvalPattern::RandomLimb => f.write_str("random-limb"),
            EvalPattern::StructuredRightLeg => f.write_str("right-leg"),
            EvalPattern::FrameDrop(p) => write!(f, "frame-drop:{p}"),
            EvalPattern::GaussianNoise(s) => write!(f, "noise:{s}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaskPolicy {
    pub modality_rate: f64,
    pub meta_rate: f64,
    pub seed: u64,
}

impl Default for MaskPolicy {
    fn default() -> Self {
        MaskPolicy {
            modality_rate: 0.3,
            meta_rate: 0.1,
            seed: 0,
        }
    }
}

impl MaskPolicy {
    pub fn off() -> Self {
        MaskPolicy {
            modality_rate: 0.0,
            meta_rate: 0.0,
            seed: 0,
        }
    }

    pub fn check(&self) -> Result<()> {
        for (name, r) in [("modality_rate", self.modality_rate), ("meta_rate", self.meta_rate)] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {r}")));
            }
        }
        Ok(())
    }
}

/// Training-time masking of every agent.
///
/// Each non-trajectory cue is dropped whole with probability
/// `modality_rate`; every remaining `(t, element)` flag, trajectory
/// included, is then cleared with probability `meta_rate`. If the primary
/// loses its whole trajectory, its last observed frame is restored.
pub fn apply_train_masking(scene: &Scene, policy: &MaskPolicy, rng: &mut impl Rng) -> Scene {
    let mut out = scene.clone();
    let primary_traj = scene.primary().trajectory().map(|t| t.mask.clone());
    for agent in out.agents.iter_mut() {
        for cue in agent.cues.iter_mut() {
            if cue.kind != CueKind::Trajectory && policy.modality_rate > 0.0 && rng.gen_bool(policy.modality_rate) {
                cue.clear_mask();
                continue;
            }
            if policy.meta_rate > 0.0 {
                for m in cue.mask.iter_mut().filter(|m| **m) {
                    if rng.gen_bool(policy.meta_rate) {
                        *m = false;
                    }
                }
            }
        }
    }
    if let Some(orig) = primary_traj {
        keep_one_trajectory_frame(&mut out, &orig);
    }
    out
}

fn keep_one_trajectory_frame(scene: &mut Scene, orig: &[bool]) {
    let traj = scene.agents[0]
        .cue_mut(CueKind::Trajectory)
        .expect("primary has a trajectory");
    if traj.is_empty() {
        if let Some(last) = orig.iter().rposition(|m| *m) {
            traj.mask[last] = true;
        }
    }
}

/// Applies an evaluation-time perturbation to every agent.
///
/// Limb and frame patterns hide the same `(agent, t, keypoint)` entries in
/// both pose cues. A keep-fraction on `T` never leaves the primary without
/// trajectory: its last observed frame is restored if every entry was drawn out.
pub fn apply_eval_pattern(scene: &Scene, pattern: &EvalPattern, rng: &mut impl Rng) -> Result<Scene> {
    pattern.check()?;
    let mut out = scene.clone();
    let steps = scene.t_obs;
    let pose_elements = scene.keypoints();
    match pattern {
        EvalPattern::None => {}
        EvalPattern::KeepFraction(list) => {
            let primary_traj = scene.primary().trajectory().map(|t| t.mask.clone());
            for agent in out.agents.iter_mut() {
                for &(kind, q) in list {
                    if let Some(cue) = agent.cue_mut(kind) {
                        for m in cue.mask.iter_mut().filter(|m| **m) {
                            *m = rng.gen_bool(q);
                        }
                    }
                }
            }
            if let Some(orig) = primary_traj {
                keep_one_trajectory_frame(&mut out, &orig);
            }
        }
        EvalPattern::RandomLimb | EvalPattern::StructuredRightLeg => {
            let Some(k) = pose_elements else { return Ok(out) };
            let layout = keypoint_layout(k)?;
            let targets = if *pattern == EvalPattern::RandomLimb {
                layout.limb_indices()
            } else {
                layout.indices(BodyGroup::RightLeg)
            };
            for agent in out.agents.iter_mut() {
                for t in 0..steps {
                    for &e in &targets {
                        let hide = *pattern == EvalPattern::StructuredRightLeg || rng.gen_bool(0.5);
                        if hide {
                            for cue in agent.cues.iter_mut().filter(|c| c.kind.is_pose()) {
                                cue.set_available(t, e, false);
                            }
                        }
                    }
                }
            }
        }
        EvalPattern::FrameDrop(p) => {
            for agent in out.agents.iter_mut() {
                for t in 0..steps {
                    if rng.gen_bool(*p) {
                        for cue in agent.cues.iter_mut().filter(|c| c.kind.is_pose()) {
                            for e in 0..cue.elements {
                                cue.set_available(t, e, false);
                            }
                        }
                    }
                }
            }
        }
        EvalPattern::GaussianNoise(sigma) => {
            let normal = Normal::new(0.0, *sigma).map_err(|e| Error::Config(e.to_string()))?;
            for agent in out.agents.iter_mut() {
                for cue in agent.cues.iter_mut().filter(|c| c.kind.is_pose()) {
                    for t in 0..cue.steps {
                        for e in 0..cue.elements {
                            if cue.available(t, e) {
                                for v in cue.feature_mut(t, e) {
                                    *v += normal.sample(rng);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Applies several patterns in order.
pub fn apply_eval_patterns(scene: &Scene, patterns: &[EvalPattern], rng: &mut impl Rng) -> Result<Scene> {
    let mut out = scene.clone();
    for p in patterns {
        out = apply_eval_pattern(&out, p, rng)?;
    }
    Ok(out)
}

/// Drops every cue outside `subset`. The subset must contain `T`.
pub fn restrict_cues(scene: &Scene, subset: &[CueKind]) -> Result<Scene> {
    if !subset.contains(&CueKind::Trajectory) {
        return Err(Error::Config("cue subset must include T".into()));
    }
    let mut out = scene.clone();
    for agent in out.agents.iter_mut() {
        agent.cues.retain(|c| subset.contains(&c.kind));
    }
    Ok(out)
}
