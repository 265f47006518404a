use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One input channel of an agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CueKind {
    #[serde(rename = "T")]
    Trajectory,
    #[serde(rename = "P3d")]
    Pose3d,
    #[serde(rename = "P2d")]
    Pose2d,
    #[serde(rename = "B3d")]
    Box3d,
    #[serde(rename = "B2d")]
    Box2d,
}

impl CueKind {
    /// Order in which cue tokens are laid out inside the cross-modality encoder.
    pub const ALL: [CueKind; 5] = [
        CueKind::Trajectory,
        CueKind::Pose3d,
        CueKind::Pose2d,
        CueKind::Box3d,
        CueKind::Box2d,
    ];

    pub fn features(self) -> usize {
        match self {
            CueKind::Trajectory | CueKind::Pose2d | CueKind::Box2d => 2,
            CueKind::Pose3d | CueKind::Box3d => 3,
        }
    }

    /// Elements per frame; pose cues carry one element per keypoint.
    pub fn elements(self, keypoints: usize) -> usize {
        match self {
            CueKind::Trajectory => 1,
            CueKind::Pose3d | CueKind::Pose2d => keypoints,
            CueKind::Box3d | CueKind::Box2d => 2,
        }
    }

    pub fn is_pose(self) -> bool {
        matches!(self, CueKind::Pose3d | CueKind::Pose2d)
    }

    pub fn is_box(self) -> bool {
        matches!(self, CueKind::Box3d | CueKind::Box2d)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CueKind::Trajectory => "T",
            CueKind::Pose3d => "P3d",
            CueKind::Pose2d => "P2d",
            CueKind::Box3d => "B3d",
            CueKind::Box2d => "B2d",
        }
    }

    /// Parses a comma separated list such as `T,P3d`.
    pub fn parse_list(s: &str) -> Result<Vec<CueKind>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let kind: CueKind = part.parse()?;
            if !out.contains(&kind) {
                out.push(kind);
            }
        }
        out.sort();
        Ok(out)
    }
}

impl fmt::Display for CueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CueKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "T" => CueKind::Trajectory,
            "P3d" | "3dP" => CueKind::Pose3d,
            "P2d" | "2dP" => CueKind::Pose2d,
            "B3d" | "3dB" => CueKind::Box3d,
            "B2d" | "2dB" => CueKind::Box2d,
            other => return Err(Error::Config(format!("unknown cue kind `{other}`"))),
        })
    }
}

/// A `(steps, elements, features)` cue sequence with a `(steps, elements)`
/// availability mask. Values under a cleared flag carry no information.
#[derive(Clone, Debug, PartialEq)]
pub struct CueTensor {
    pub kind: CueKind,
    pub steps: usize,
    pub elements: usize,
    pub features: usize,
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl CueTensor {
    /// Fully available cue with the feature width of `kind`.
    pub fn new(kind: CueKind, steps: usize, elements: usize, values: Vec<f64>) -> Result<Self> {
        let features = kind.features();
        if values.len() != steps * elements * features {
            return Err(Error::Dimension {
                op: "cue",
                left: vec![steps, elements, features],
                right: vec![values.len()],
            });
        }
        Ok(CueTensor {
            kind,
            steps,
            elements,
            features,
            values,
            mask: vec![true; steps * elements],
        })
    }

    pub fn trajectory(points: &[[f64; 2]]) -> Self {
        let values = points.iter().flat_map(|p| p.iter().copied()).collect();
        CueTensor::new(CueKind::Trajectory, points.len(), 1, values).expect("consistent shape")
    }

    pub fn available(&self, t: usize, e: usize) -> bool {
        self.mask[t * self.elements + e]
    }

    pub fn set_available(&mut self, t: usize, e: usize, on: bool) {
        self.mask[t * self.elements + e] = on;
    }

    pub fn feature(&self, t: usize, e: usize) -> &[f64] {
        let start = (t * self.elements + e) * self.features;
        &self.values[start..start + self.features]
    }

    pub fn feature_mut(&mut self, t: usize, e: usize) -> &mut [f64] {
        let start = (t * self.elements + e) * self.features;
        &mut self.values[start..start + self.features]
    }

    pub fn available_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn clear_mask(&mut self) {
        self.mask.iter_mut().for_each(|m| *m = false);
    }

    pub fn is_empty(&self) -> bool {
        self.available_count() == 0
    }

    /// Trajectory position at step `t`, when available.
    pub fn position(&self, t: usize) -> Option<[f64; 2]> {
        (self.kind == CueKind::Trajectory && self.available(t, 0)).then(|| {
            let f = self.feature(t, 0);
            [f[0], f[1]]
        })
    }
}
