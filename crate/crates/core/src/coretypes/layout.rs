use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coarse body region a keypoint belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BodyGroup {
    Head,
    Torso,
    LeftArm,
    RightArm,
    LeftLeg,
    RightLeg,
}

impl BodyGroup {
    pub fn is_limb(self) -> bool {
        matches!(
            self,
            BodyGroup::LeftArm | BodyGroup::RightArm | BodyGroup::LeftLeg | BodyGroup::RightLeg
        )
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "head" => BodyGroup::Head,
            "torso" => BodyGroup::Torso,
            "left-arm" => BodyGroup::LeftArm,
            "right-arm" => BodyGroup::RightArm,
            "left-leg" => BodyGroup::LeftLeg,
            "right-leg" => BodyGroup::RightLeg,
            _ => return None,
        })
    }
}

impl fmt::Display for BodyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BodyGroup::Head => "head",
            BodyGroup::Torso => "torso",
            BodyGroup::LeftArm => "left-arm",
            BodyGroup::RightArm => "right-arm",
            BodyGroup::LeftLeg => "left-leg",
            BodyGroup::RightLeg => "right-leg",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Keypoint {
    pub label: &'static str,
    pub group: BodyGroup,
}

/// Mapping from keypoint index to semantic label and body group.
#[derive(Debug, PartialEq, Eq)]
pub struct KeypointLayout {
    pub name: &'static str,
    pub keypoints: &'static [Keypoint],
}

const fn kp(label: &'static str, group: BodyGroup) -> Keypoint {
    Keypoint { label, group }
}

use BodyGroup::*;

static ROOT: KeypointLayout = KeypointLayout {
    name: "root",
    keypoints: &[kp("root", Torso)],
};

static EXTREMITIES5: KeypointLayout = KeypointLayout {
    name: "extremities-5",
    keypoints: &[
        kp("nose", Head),
        kp("left_wrist", LeftArm),
        kp("right_wrist", RightArm),
        kp("left_ankle", LeftLeg),
        kp("right_ankle", RightLeg),
    ],
};

static COMPACT9: KeypointLayout = KeypointLayout {
    name: "compact-9",
    keypoints: &[
        kp("nose", Head),
        kp("left_shoulder", Torso),
        kp("right_shoulder", Torso),
        kp("left_wrist", LeftArm),
        kp("right_wrist", RightArm),
        kp("left_hip", Torso),
        kp("right_hip", Torso),
        kp("left_ankle", LeftLeg),
        kp("right_ankle", RightLeg),
    ],
};

// Common 17-keypoint skeleton ordering. Shoulders and hips are torso
// anchors; elbows/wrists and knees/ankles make up the limbs.
static SKELETON17: KeypointLayout = KeypointLayout {
    name: "skeleton-17",
    keypoints: &[
        kp("nose", Head),
        kp("left_eye", Head),
        kp("right_eye", Head),
        kp("left_ear", Head),
        kp("right_ear", Head),
        kp("left_shoulder", Torso),
        kp("right_shoulder", Torso),
        kp("left_elbow", LeftArm),
        kp("right_elbow", RightArm),
        kp("left_wrist", LeftArm),
        kp("right_wrist", RightArm),
        kp("left_hip", Torso),
        kp("right_hip", Torso),
        kp("left_knee", LeftLeg),
        kp("right_knee", RightLeg),
        kp("left_ankle", LeftLeg),
        kp("right_ankle", RightLeg),
    ],
};

/// Registered layout for `k` keypoints.
pub fn keypoint_layout(k: usize) -> Result<&'static KeypointLayout> {
    match k {
        1 => Ok(&ROOT),
        5 => Ok(&EXTREMITIES5),
        9 => Ok(&COMPACT9),
        17 => Ok(&SKELETON17),
        _ => Err(Error::UnknownLayout(k)),
    }
}

/// Keypoint counts with a registered layout.
pub const REGISTERED_LAYOUTS: [usize; 4] = [1, 5, 9, 17];

impl KeypointLayout {
    pub fn len(&self) -> usize {
        self.keypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keypoints.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<Keypoint> {
        self.keypoints.get(index).copied()
    }

    pub fn indices(&self, group: BodyGroup) -> Vec<usize> {
        self.indices_where(|g| g == group)
    }

    pub fn limb_indices(&self) -> Vec<usize> {
        self.indices_where(BodyGroup::is_limb)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.keypoints.iter().position(|k| k.label == label)
    }

    /// A left/right keypoint pair whose connecting axis tracks body yaw:
    /// the shoulders when present, otherwise the wrists.
    pub fn lateral_pair(&self) -> Option<(usize, usize)> {
        [("left_shoulder", "right_shoulder"), ("left_wrist", "right_wrist")]
            .iter()
            .find_map(|(l, r)| Some((self.index_of(l)?, self.index_of(r)?)))
    }

    fn indices_where(&self, pred: impl Fn(BodyGroup) -> bool) -> Vec<usize> {
        self.keypoints
            .iter()
            .enumerate()
            .filter(|(_, k)| pred(k.group))
            .map(|(i, _)| i)
            .collect()
    }
}
