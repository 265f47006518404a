use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::embedding::IdentityMode;
use crate::error::{Error, Result};

/// Architecture variants compared in the ablation suite.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Cross-modality encoder per agent, then the social encoder.
    #[serde(rename = "CMT-ST")]
    CmtSt,
    /// Per-token MLP with per-step mean pooling in place of the cross-modality encoder.
    #[serde(rename = "MLP-ST")]
    MlpSt,
    /// Social encoding per time step first, then the per-agent encoder.
    #[serde(rename = "ST-CMT")]
    StCmt,
    /// Cross-modality encoder only; no cross-agent path.
    #[serde(rename = "CMT")]
    CmtOnly,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::CmtSt, Variant::MlpSt, Variant::StCmt, Variant::CmtOnly];

    pub fn name(self) -> &'static str {
        match self {
            Variant::CmtSt => "CMT-ST",
            Variant::MlpSt => "MLP-ST",
            Variant::StCmt => "ST-CMT",
            Variant::CmtOnly => "CMT",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

/// Whether the head emits positions directly or per-step displacements
/// that are accumulated from the last observed position.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    Absolute,
    Offset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub width: usize,
    pub cmt_layers: usize,
    pub cmt_heads: usize,
    pub st_layers: usize,
    pub st_heads: usize,
    /// Feed-forward hidden width as a multiple of `width`.
    pub ff_mult: usize,
    pub variant: Variant,
    pub keypoints: usize,
    pub t_obs: usize,
    pub horizon: usize,
    pub identity: IdentityMode,
    pub max_agents: usize,
    pub target: TargetMode,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            width: 128,
            cmt_layers: 6,
            cmt_heads: 4,
            st_layers: 3,
            st_heads: 4,
            ff_mult: 4,
            variant: Variant::CmtSt,
            keypoints: 17,
            t_obs: 9,
            horizon: 12,
            identity: IdentityMode::Binary,
            max_agents: 16,
            target: TargetMode::Absolute,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.width == 0 {
            return bad("model width must be positive".into());
        }
        for (name, heads) in [("cmt", self.cmt_heads), ("st", self.st_heads)] {
            if heads == 0 || self.width % heads != 0 {
                return bad(format!("{name}_heads = {heads} does not divide width {}", self.width));
            }
        }
        if self.t_obs == 0 || self.horizon == 0 {
            return bad("t_obs and horizon must be at least 1".into());
        }
        if self.ff_mult == 0 {
            return bad("ff_mult must be at least 1".into());
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ModelConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("model config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}
