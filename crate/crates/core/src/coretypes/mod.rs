//! Scenes, agents and cue tensors.
//!
//! A scene holds `N >= 1` agents; agent 0 is the primary whose future is
//! predicted. Every cue is a `(steps, elements, features)` array plus a
//! per-`(step, element)` availability mask:
//!
//! | cue | elements | features |
//! |-----|----------|----------|
//! | `T` (ground-plane trajectory) | 1 | 2 |
//! | `P3d` (root-relative pose) | K | 3 |
//! | `P2d` (root-relative pose) | K | 2 |
//! | `B3d` (min/max corner) | 2 | 3 |
//! | `B2d` (min/max corner) | 2 | 2 |

mod cue;
pub mod io;
mod layout;
mod scene;

pub use cue::{CueKind, CueTensor};
pub use layout::{keypoint_layout, BodyGroup, Keypoint, KeypointLayout, REGISTERED_LAYOUTS};
pub use scene::{Agent, PredictionY, Role, ScenarioKind, Scene, SceneLatent, TurnSchedule};

#[cfg(test)]
mod tests;
