use serde::{Deserialize, Serialize};

use super::cue::{CueKind, CueTensor};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Primary,
    Neighbor,
}

/// One agent's cue bundle. Cues are kept as a list so malformed inputs
/// (duplicate kinds) survive parsing and are reported by validation.
#[derive(Clone, Debug, PartialEq)]
pub struct Agent {
    pub role: Role,
    pub cues: Vec<CueTensor>,
}

impl Agent {
    pub fn new(role: Role, trajectory: CueTensor) -> Self {
        Agent {
            role,
            cues: vec![trajectory],
        }
    }

    pub fn cue(&self, kind: CueKind) -> Option<&CueTensor> {
        self.cues.iter().find(|c| c.kind == kind)
    }

    pub fn cue_mut(&mut self, kind: CueKind) -> Option<&mut CueTensor> {
        self.cues.iter_mut().find(|c| c.kind == kind)
    }

    pub fn trajectory(&self) -> Option<&CueTensor> {
        self.cue(CueKind::Trajectory)
    }

    /// Inserts or replaces the cue of the same kind, keeping canonical order.
    pub fn set_cue(&mut self, cue: CueTensor) {
        self.cues.retain(|c| c.kind != cue.kind);
        self.cues.push(cue);
        self.cues.sort_by_key(|c| c.kind);
    }

    pub fn remove_cue(&mut self, kind: CueKind) -> Option<CueTensor> {
        let pos = self.cues.iter().position(|c| c.kind == kind)?;
        Some(self.cues.remove(pos))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    ConstantVelocity,
    TurnWithPreview,
    SocialAvoidance,
}

/// Heading change of the primary, starting at absolute frame `start`
/// (frame 0 is the first observation) and spread over `duration` steps.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnSchedule {
    pub start: usize,
    pub angle: f64,
    pub duration: usize,
}

/// Generator state kept alongside synthetic scenes for oracle predictors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneLatent {
    pub scenario: ScenarioKind,
    /// Movement heading of the primary during observation, radians.
    pub heading: f64,
    /// Primary speed, scene units per step.
    pub speed: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn: Option<TurnSchedule>,
}

/// A multi-agent scene. Agent 0 is the primary; `future` holds its
/// ground-truth positions for the prediction horizon.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub id: String,
    pub fps: f64,
    pub t_obs: usize,
    pub horizon: usize,
    pub agents: Vec<Agent>,
    pub future: Vec<[f64; 2]>,
    pub latent: Option<SceneLatent>,
}

/// Predicted primary-agent positions, `(horizon, 2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionY {
    pub positions: Vec<[f64; 2]>,
}

impl PredictionY {
    pub fn horizon(&self) -> usize {
        self.positions.len()
    }

    pub fn is_finite(&self) -> bool {
        self.positions.iter().flatten().all(|v| v.is_finite())
    }
}

impl Scene {
    pub fn primary(&self) -> &Agent {
        &self.agents[0]
    }

    pub fn neighbors(&self) -> &[Agent] {
        &self.agents[1..]
    }

    /// Keypoint count implied by the pose cues, if any are present.
    pub fn keypoints(&self) -> Option<usize> {
        self.agents
            .iter()
            .flat_map(|a| a.cues.iter())
            .find(|c| c.kind.is_pose())
            .map(|c| c.elements)
    }

    /// Cue kinds present on at least one agent.
    pub fn cue_kinds(&self) -> Vec<CueKind> {
        let mut kinds: Vec<CueKind> = self
            .agents
            .iter()
            .flat_map(|a| a.cues.iter().map(|c| c.kind))
            .collect();
        kinds.sort();
        kinds.dedup();
        kinds
    }

    /// Returns the scene when every structural invariant holds.
    pub fn validate(self) -> Result<Scene> {
        self.check()?;
        Ok(self)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(Error::validation("fps", format!("must be positive, got {}", self.fps)));
        }
        if self.t_obs == 0 {
            return Err(Error::validation("t_obs", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(Error::validation("t_pred", "must be at least 1"));
        }
        if self.agents.is_empty() {
            return Err(Error::validation("agents", "scene has no agents"));
        }
        if self.future.len() != self.horizon {
            return Err(Error::validation(
                "future",
                format!("{} positions for horizon {}", self.future.len(), self.horizon),
            ));
        }
        if let Some(i) = self.future.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::validation(format!("future[{i}]"), "non-finite position"));
        }
        let mut keypoints: Option<usize> = None;
        for (i, agent) in self.agents.iter().enumerate() {
            let expected_role = if i == 0 { Role::Primary } else { Role::Neighbor };
            if agent.role != expected_role {
                return Err(Error::validation(
                    format!("agents[{i}].role"),
                    format!("expected {expected_role:?}, got {:?}", agent.role),
                ));
            }
            let mut seen = Vec::new();
            for cue in &agent.cues {
                let path = format!("agents[{i}].cues.{}", cue.kind);
                if seen.contains(&cue.kind) {
                    return Err(Error::validation(path, "duplicate cue kind"));
                }
                seen.push(cue.kind);
                if cue.features != cue.kind.features() {
                    return Err(Error::validation(
                        format!("{path}.features"),
                        format!("expected {}, got {}", cue.kind.features(), cue.features),
                    ));
                }
                if cue.steps != self.t_obs {
                    return Err(Error::validation(
                        format!("{path}.steps"),
                        format!("expected {} observed steps, got {}", self.t_obs, cue.steps),
                    ));
                }
                let expected_elements = if cue.kind.is_pose() {
                    if cue.elements == 0 {
                        return Err(Error::validation(format!("{path}.elements"), "pose cue without keypoints"));
                    }
                    match keypoints {
                        Some(k) if k != cue.elements => {
                            return Err(Error::validation(
                                format!("{path}.elements"),
                                format!("{} keypoints, scene uses {k}", cue.elements),
                            ))
                        }
                        _ => keypoints = Some(cue.elements),
                    }
                    cue.elements
                } else {
                    cue.kind.elements(0)
                };
                if cue.elements != expected_elements {
                    return Err(Error::validation(
                        format!("{path}.elements"),
                        format!("expected {expected_elements}, got {}", cue.elements),
                    ));
                }
                if cue.values.len() != cue.steps * cue.elements * cue.features {
                    return Err(Error::validation(format!("{path}.values"), "length does not match shape"));
                }
                if cue.mask.len() != cue.steps * cue.elements {
                    return Err(Error::validation(format!("{path}.mask"), "length does not match shape"));
                }
                for t in 0..cue.steps {
                    for e in 0..cue.elements {
                        if cue.available(t, e) && cue.feature(t, e).iter().any(|x| !x.is_finite()) {
                            return Err(Error::validation(format!("{path}.values[{t}][{e}]"), "non-finite value"));
                        }
                    }
                }
            }
            let trajectories = agent
                .cues
                .iter()
                .filter(|c| c.kind == CueKind::Trajectory)
                .count();
            if trajectories != 1 {
                return Err(Error::validation(
                    format!("agents[{i}].cues.T"),
                    format!("expected exactly one trajectory cue, found {trajectories}"),
                ));
            }
        }
        Ok(())
    }
}
