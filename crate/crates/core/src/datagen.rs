//! Synthetic multi-agent scenes with consistent trajectory, pose and box cues.
//!
//! Every agent moves with constant speed along a heading schedule. Its body
//! yaw at frame `t` equals its movement heading at `t + preview`, so a turn
//! shows up in the pose a few frames before it shows up in the trajectory.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::coretypes::io::write_corpus;
use crate::coretypes::{
    keypoint_layout, Agent, CueKind, CueTensor, PredictionY, Role, ScenarioKind, Scene, SceneLatent,
    TurnSchedule,
};
use crate::error::{Error, Result};
use crate::masking::substream;

/// Scenario family of a corpus; `Mixed` draws each scene uniformly from the other three.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioMix {
    ConstantVelocity,
    TurnWithPreview,
    SocialAvoidance,
    Mixed,
}

impl FromStr for ScenarioMix {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "constant-velocity" | "cv" => ScenarioMix::ConstantVelocity,
            "turn-with-preview" | "turn" => ScenarioMix::TurnWithPreview,
            "social-avoidance" | "social" => ScenarioMix::SocialAvoidance,
            "mixed" => ScenarioMix::Mixed,
            other => return Err(Error::Config(format!("unknown scenario `{other}`"))),
        })
    }
}

impl fmt::Display for ScenarioMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioMix::ConstantVelocity => "constant-velocity",
            ScenarioMix::TurnWithPreview => "turn-with-preview",
            ScenarioMix::SocialAvoidance => "social-avoidance",
            ScenarioMix::Mixed => "mixed",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioMix,
    pub agents_min: usize,
    pub agents_max: usize,
    /// Scene units per step.
    pub speed_min: f64,
    pub speed_max: f64,
    /// Steps by which body yaw leads the movement heading.
    pub preview: usize,
    /// Degrees; the sign is drawn separately.
    pub turn_angle_min: f64,
    pub turn_angle_max: f64,
    pub turn_duration: usize,
    /// Extra random delay of the turn start after the last observed step.
    pub turn_jitter: usize,
    pub noise: f64,
    pub seed: u64,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub fps: f64,
    pub t_obs: usize,
    pub horizon: usize,
    pub keypoints: usize,
    pub cues: Vec<CueKind>,
    pub social_radius: f64,
    /// Draw the primary's heading uniformly instead of pointing it along +x.
    pub random_heading: bool,
    /// Gait cycles per step.
    pub gait_frequency: f64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScenarioSpec {
            kind: ScenarioMix::Mixed,
            agents_min: 1,
            agents_max: 3,
            speed_min: 0.5,
            speed_max: 1.5,
            preview: 3,
            turn_angle_min: 30.0,
            turn_angle_max: 90.0,
            turn_duration: 3,
            turn_jitter: 0,
            noise: 0.02,
            seed: 0,
            train: 1000,
            val: 100,
            test: 100,
            fps: 2.5,
            t_obs: 9,
            horizon: 12,
            keypoints: 17,
            cues: CueKind::ALL.to_vec(),
            social_radius: 3.0,
            random_heading: false,
            gait_frequency: 0.4,
        }
    }
}

impl ScenarioSpec {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Generation(m));
        if self.agents_min == 0 || self.agents_min > self.agents_max {
            return bad(format!("agent range {}..={} is empty", self.agents_min, self.agents_max));
        }
        if !(self.speed_min >= 0.0 && self.speed_min <= self.speed_max && self.speed_max.is_finite()) {
            return bad(format!("speed range {}..{} is invalid", self.speed_min, self.speed_max));
        }
        let turns = matches!(self.kind, ScenarioMix::TurnWithPreview | ScenarioMix::Mixed);
        if turns && self.speed_max == 0.0 {
            return bad("turning scenes need a positive speed".into());
        }
        if !(0.0 <= self.turn_angle_min && self.turn_angle_min <= self.turn_angle_max) {
            return bad("turn angle range is invalid".into());
        }
        if self.turn_duration == 0 {
            return bad("turn_duration must be at least 1".into());
        }
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad(format!("noise must be >= 0, got {}", self.noise));
        }
        if self.t_obs < 2 || self.horizon == 0 {
            return bad("t_obs must be >= 2 and horizon >= 1".into());
        }
        if !(self.fps > 0.0) {
            return bad("fps must be positive".into());
        }
        if !self.cues.contains(&CueKind::Trajectory) {
            return bad("cue menu must include T".into());
        }
        keypoint_layout(self.keypoints)?;
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat spec serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScenarioSpec =
            toml::from_str(text).map_err(|e| Error::Config(format!("scenario spec: {e}")))?;
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub train: Vec<Scene>,
    pub val: Vec<Scene>,
    pub test: Vec<Scene>,
}

impl Corpus {
    /// Writes `train.jsonl`, `val.jsonl`, `test.jsonl` and the resolved `spec.toml`.
    pub fn write_dir(&self, dir: &Path, spec: &ScenarioSpec) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_corpus(&dir.join("train.jsonl"), &self.train)?;
        write_corpus(&dir.join("val.jsonl"), &self.val)?;
        write_corpus(&dir.join("test.jsonl"), &self.test)?;
        let path = dir.join("spec.toml");
        std::fs::write(&path, spec.to_toml()).map_err(|e| Error::io(&path, e))
    }
}

/// Body-frame template: x forward, y left, z up, pelvis at the origin.
const TEMPLATE17: [(&str, [f64; 3]); 17] = [
    ("nose", [0.10, 0.0, 0.75]),
    ("left_eye", [0.08, 0.03, 0.77]),
    ("right_eye", [0.08, -0.03, 0.77]),
    ("left_ear", [0.0, 0.08, 0.73]),
    ("right_ear", [0.0, -0.08, 0.73]),
    ("left_shoulder", [0.0, 0.20, 0.50]),
    ("right_shoulder", [0.0, -0.20, 0.50]),
    ("left_elbow", [0.0, 0.25, 0.20]),
    ("right_elbow", [0.0, -0.25, 0.20]),
    ("left_wrist", [0.0, 0.25, -0.10]),
    ("right_wrist", [0.0, -0.25, -0.10]),
    ("left_hip", [0.0, 0.12, 0.0]),
    ("right_hip", [0.0, -0.12, 0.0]),
    ("left_knee", [0.0, 0.12, -0.45]),
    ("right_knee", [0.0, -0.12, -0.45]),
    ("left_ankle", [0.0, 0.12, -0.90]),
    ("right_ankle", [0.0, -0.12, -0.90]),
];

/// Skeleton template for a registered layout, with per-keypoint gait swing weights.
#[derive(Clone, Debug)]
pub struct SkeletonModel {
    pub points: Vec<[f64; 3]>,
    /// Forward swing per unit amplitude at gait phase zero; arms oppose legs.
    pub swing: Vec<f64>,
}

impl SkeletonModel {
    pub fn new(keypoints: usize) -> Result<Self> {
        let layout = keypoint_layout(keypoints)?;
        let mut points = Vec::new();
        let mut swing = Vec::new();
        for kp in layout.keypoints {
            let p = TEMPLATE17
                .iter()
                .find(|(l, _)| *l == kp.label)
                .map(|(_, p)| *p)
                .unwrap_or([0.0; 3]);
            let side = if kp.label.starts_with("left") { 1.0 } else { -1.0 };
            let w = match kp.label {
                l if l.ends_with("wrist") => -side,
                l if l.ends_with("elbow") => -0.5 * side,
                l if l.ends_with("ankle") => side,
                l if l.ends_with("knee") => 0.5 * side,
                _ => 0.0,
            };
            points.push(p);
            swing.push(w);
        }
        Ok(SkeletonModel { points, swing })
    }

    /// Root-relative keypoints for body yaw `yaw`, gait phase and swing amplitude.
    pub fn pose(&self, yaw: f64, phase: f64, amplitude: f64) -> Vec<[f64; 3]> {
        let (s, c) = yaw.sin_cos();
        let swing = amplitude * phase.sin();
        self.points
            .iter()
            .zip(&self.swing)
            .map(|(p, w)| {
                let x = p[0] + w * swing;
                [c * x - s * p[1], s * x + c * p[1], p[2]]
            })
            .collect()
    }
}

struct Walker {
    pos: Vec<[f64; 2]>,
    heading: Vec<f64>,
    speed: f64,
    phase: f64,
}

fn wrap(a: f64) -> f64 {
    (a + PI).rem_euclid(2.0 * PI) - PI
}

/// Heading of the primary at step `t` under a turn schedule.
pub fn scheduled_heading(base: f64, turn: Option<&TurnSchedule>, t: usize) -> f64 {
    match turn {
        Some(s) if t >= s.start => {
            let f = ((t - s.start + 1) as f64 / s.duration as f64).min(1.0);
            base + s.angle * f
        }
        _ => base,
    }
}

fn generate_scene(spec: &ScenarioSpec, kind: ScenarioKind, id: String, rng: &mut impl Rng) -> Result<Scene> {
    let total = spec.t_obs + spec.horizon;
    let steps = total + spec.preview;
    let mut n = rng.gen_range(spec.agents_min..=spec.agents_max);
    if kind == ScenarioKind::SocialAvoidance {
        n = n.max(2);
    }
    let speed = |rng: &mut dyn rand::RngCore| {
        if spec.speed_max > spec.speed_min {
            rng.gen_range(spec.speed_min..spec.speed_max)
        } else {
            spec.speed_min
        }
    };
    let v0 = speed(rng);
    if kind == ScenarioKind::TurnWithPreview && v0 == 0.0 {
        return Err(Error::Generation("turn scenario with zero speed".into()));
    }
    let h0 = if spec.random_heading { rng.gen_range(-PI..PI) } else { 0.0 };
    let turn = (kind == ScenarioKind::TurnWithPreview).then(|| {
        let deg = if spec.turn_angle_max > spec.turn_angle_min {
            rng.gen_range(spec.turn_angle_min..spec.turn_angle_max)
        } else {
            spec.turn_angle_min
        };
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        TurnSchedule {
            start: spec.t_obs + rng.gen_range(0..=spec.turn_jitter),
            angle: sign * deg.to_radians(),
            duration: spec.turn_duration,
        }
    });

    // Desired headings and start positions; the primary starts at the origin.
    let mut desired: Vec<Vec<f64>> = vec![(0..steps).map(|t| scheduled_heading(h0, turn.as_ref(), t)).collect()];
    let mut starts = vec![[0.0, 0.0]];
    let mut speeds = vec![v0];
    let dir0 = [h0.cos(), h0.sin()];
    for _ in 1..n {
        let v = speed(rng);
        let (start, h) = if kind == ScenarioKind::SocialAvoidance {
            // Aim at the primary's path so that the two meet around the end of observation.
            let meet = rng.gen_range(spec.t_obs as f64 - 2.0..spec.t_obs as f64 + 4.0);
            let target = [dir0[0] * v0 * meet, dir0[1] * v0 * meet];
            let rel = rng.gen_range(PI / 3.0..PI) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            let h = h0 + rel;
            let offset = rng.gen_range(-0.3..0.3);
            (
                [
                    target[0] - h.cos() * v * meet - h.sin() * offset,
                    target[1] - h.sin() * v * meet + h.cos() * offset,
                ],
                h,
            )
        } else {
            let r = rng.gen_range(3.0..10.0);
            let a = rng.gen_range(-PI..PI);
            let end = [dir0[0] * v0 * spec.t_obs as f64, dir0[1] * v0 * spec.t_obs as f64];
            ([end[0] + r * a.cos(), end[1] + r * a.sin()], rng.gen_range(-PI..PI))
        };
        desired.push(vec![h; steps]);
        starts.push(start);
        speeds.push(v);
    }

    let mut walkers: Vec<Walker> = starts
        .iter()
        .zip(&speeds)
        .map(|(p, &v)| Walker {
            pos: vec![*p],
            heading: Vec::with_capacity(steps),
            speed: v,
            phase: rng.gen_range(0.0..2.0 * PI),
        })
        .collect();
    let social = kind == ScenarioKind::SocialAvoidance;
    for t in 0..steps {
        let now: Vec<[f64; 2]> = walkers.iter().map(|w| w.pos[t]).collect();
        for (i, w) in walkers.iter_mut().enumerate() {
            let mut h = desired[i][t];
            if social {
                h += repulsion(i, &now, h, spec.social_radius);
            }
            let p = w.pos[t];
            w.heading.push(h);
            w.pos.push([p[0] + w.speed * h.cos(), p[1] + w.speed * h.sin()]);
        }
    }

    let skeleton = SkeletonModel::new(spec.keypoints)?;
    let noise = Normal::new(0.0, spec.noise).map_err(|e| Error::Generation(e.to_string()))?;
    let mut observed: Vec<Vec<[f64; 2]>> = Vec::new();
    let mut poses: Vec<Vec<Vec<[f64; 3]>>> = Vec::new();
    for w in &walkers {
        let traj: Vec<[f64; 2]> = (0..spec.t_obs)
            .map(|t| [w.pos[t][0] + noise.sample(rng), w.pos[t][1] + noise.sample(rng)])
            .collect();
        let pose: Vec<Vec<[f64; 3]>> = (0..spec.t_obs)
            .map(|t| {
                let yaw = w.heading[t + spec.preview];
                let phase = w.phase + 2.0 * PI * spec.gait_frequency * t as f64;
                skeleton
                    .pose(yaw, phase, 0.3 * w.speed)
                    .into_iter()
                    .map(|p| [p[0] + noise.sample(rng), p[1] + noise.sample(rng), p[2] + noise.sample(rng)])
                    .collect()
            })
            .collect();
        observed.push(traj);
        poses.push(pose);
    }

    let origin = observed[0][spec.t_obs - 1];
    let k = spec.keypoints;
    let agents = (0..n)
        .map(|i| {
            let traj: Vec<[f64; 2]> =
                observed[i].iter().map(|p| [p[0] - origin[0], p[1] - origin[1]]).collect();
            let role = if i == 0 { Role::Primary } else { Role::Neighbor };
            let mut agent = Agent::new(role, CueTensor::trajectory(&traj));
            for &kind in spec.cues.iter().filter(|c| **c != CueKind::Trajectory) {
                let mut values = Vec::new();
                for (t, frame) in poses[i].iter().enumerate() {
                    let root = traj[t];
                    match kind {
                        CueKind::Pose3d => frame.iter().for_each(|p| values.extend_from_slice(p)),
                        CueKind::Pose2d => frame.iter().for_each(|p| values.extend_from_slice(&[p[0], p[2]])),
                        CueKind::Box3d => {
                            let world = frame.iter().map(|p| [root[0] + p[0], root[1] + p[1], p[2]]);
                            let (lo, hi) = extents::<3>(world);
                            values.extend_from_slice(&lo);
                            values.extend_from_slice(&hi);
                        }
                        CueKind::Box2d => {
                            let (lo, hi) = extents::<2>(frame.iter().map(|p| [root[0] + p[0], p[2]]));
                            values.extend_from_slice(&lo);
                            values.extend_from_slice(&hi);
                        }
                        CueKind::Trajectory => unreachable!(),
                    }
                }
                let cue = CueTensor::new(kind, spec.t_obs, kind.elements(k), values)?;
                agent.set_cue(cue);
            }
            Ok(agent)
        })
        .collect::<Result<Vec<_>>>()?;

    let future = (spec.t_obs..total)
        .map(|t| {
            let p = walkers[0].pos[t];
            [p[0] - origin[0], p[1] - origin[1]]
        })
        .collect();
    Scene {
        id,
        fps: spec.fps,
        t_obs: spec.t_obs,
        horizon: spec.horizon,
        agents,
        future,
        latent: Some(SceneLatent {
            scenario: kind,
            heading: h0,
            speed: v0,
            turn,
        }),
    }
    .validate()
}

fn extents<const N: usize>(points: impl Iterator<Item = [f64; N]>) -> ([f64; N], [f64; N]) {
    let mut lo = [f64::INFINITY; N];
    let mut hi = [f64::NEG_INFINITY; N];
    for p in points {
        for d in 0..N {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    (lo, hi)
}

/// Bounded heading perturbation away from the nearest agent ahead within `radius`.
fn repulsion(i: usize, pos: &[[f64; 2]], heading: f64, radius: f64) -> f64 {
    let me = pos[i];
    let dir = [heading.cos(), heading.sin()];
    let nearest = pos
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != i)
        .map(|(_, p)| ([p[0] - me[0], p[1] - me[1]], (p[0] - me[0]).hypot(p[1] - me[1])))
        .filter(|(rel, d)| *d < radius && rel[0] * dir[0] + rel[1] * dir[1] > 0.0)
        .min_by(|a, b| a.1.total_cmp(&b.1));
    match nearest {
        Some((rel, d)) => {
            let side = dir[0] * rel[1] - dir[1] * rel[0];
            let away = if side >= 0.0 { -1.0 } else { 1.0 };
            wrap(away * 0.8 * (1.0 - d / radius))
        }
        None => 0.0,
    }
}

const DOMAIN_SCENES: u64 = 0x5CE7E;

/// Generates the train/val/test splits. Output depends only on the spec.
pub fn generate(spec: &ScenarioSpec) -> Result<Corpus> {
    spec.check()?;
    let split = |name: &str, index: u64, count: usize| -> Result<Vec<Scene>> {
        (0..count)
            .map(|i| {
                let mut rng = substream(spec.seed, DOMAIN_SCENES + index, i as u64);
                let kind = match spec.kind {
                    ScenarioMix::ConstantVelocity => ScenarioKind::ConstantVelocity,
                    ScenarioMix::TurnWithPreview => ScenarioKind::TurnWithPreview,
                    ScenarioMix::SocialAvoidance => ScenarioKind::SocialAvoidance,
                    ScenarioMix::Mixed => [
                        ScenarioKind::ConstantVelocity,
                        ScenarioKind::TurnWithPreview,
                        ScenarioKind::SocialAvoidance,
                    ][rng.gen_range(0..3)],
                };
                generate_scene(spec, kind, format!("{name}-{i:05}"), &mut rng)
            })
            .collect()
    };
    Ok(Corpus {
        train: split("train", 0, spec.train)?,
        val: split("val", 1, spec.val)?,
        test: split("test", 2, spec.test)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleKind {
    /// Extrapolates the last observed velocity.
    ConstantVelocity,
    /// Replays the generator's turn schedule from the last observed position.
    Turn,
}

pub fn oracle_predict(scene: &Scene, kind: OracleKind) -> Result<PredictionY> {
    let traj = scene
        .primary()
        .trajectory()
        .ok_or_else(|| Error::Contract("primary has no trajectory".into()))?;
    let seen: Vec<(usize, [f64; 2])> = (0..traj.steps).filter_map(|t| traj.position(t).map(|p| (t, p))).collect();
    let &(t_last, last) = seen
        .last()
        .ok_or_else(|| Error::Contract("primary trajectory fully masked".into()))?;
    let positions = match kind {
        OracleKind::ConstantVelocity => {
            let vel = match seen.len() {
                1 => [0.0, 0.0],
                n => {
                    let (t0, p0) = seen[n - 2];
                    let gap = (t_last - t0) as f64;
                    [(last[0] - p0[0]) / gap, (last[1] - p0[1]) / gap]
                }
            };
            (1..=scene.horizon)
                .map(|k| {
                    let k = (k + scene.t_obs - 1 - t_last) as f64;
                    [last[0] + k * vel[0], last[1] + k * vel[1]]
                })
                .collect()
        }
        OracleKind::Turn => {
            let latent = scene
                .latent
                .as_ref()
                .filter(|l| l.turn.is_some())
                .ok_or_else(|| Error::Contract(format!("scene {} has no turn schedule", scene.id)))?;
            let mut p = last;
            let mut out = Vec::with_capacity(scene.horizon);
            for t in t_last..scene.t_obs + scene.horizon - 1 {
                let h = scheduled_heading(latent.heading, latent.turn.as_ref(), t);
                p = [p[0] + latent.speed * h.cos(), p[1] + latent.speed * h.sin()];
                if t + 1 >= scene.t_obs {
                    out.push(p);
                }
            }
            out
        }
    };
    Ok(PredictionY { positions })
}

/// Expected constant-velocity oracle ADE on noise-free straight walks observed
/// with isotropic Gaussian position noise `sigma`.
pub fn expected_cv_ade(sigma: f64, horizon: usize) -> f64 {
    let mean: f64 = (1..=horizon)
        .map(|k| {
            let k = k as f64;
            ((1.0 + k).powi(2) + k * k).sqrt()
        })
        .sum::<f64>()
        / horizon as f64;
    sigma * (PI / 2.0).sqrt() * mean
}
