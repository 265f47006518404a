//! JSON-lines scene corpus: one scene object per line.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::{MapAccess, Visitor};
use serde::ser::SerializeMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::cue::{CueKind, CueTensor};
use super::scene::{Agent, Role, Scene, SceneLatent};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneRecord {
    id: String,
    fps: f64,
    t_obs: usize,
    t_pred: usize,
    agents: Vec<AgentRecord>,
    future: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    latent: Option<SceneLatent>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AgentRecord {
    role: Role,
    cues: CueMap,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CueRecord {
    values: Vec<Vec<Vec<f64>>>,
    mask: Vec<Vec<bool>>,
}

/// Ordered cue map that keeps duplicate keys so validation can reject them.
struct CueMap(Vec<(CueKind, CueRecord)>);

impl Serialize for CueMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for CueMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct CueMapVisitor;
        impl<'de> Visitor<'de> for CueMapVisitor {
            type Value = CueMap;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a map from cue kind to cue record")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut m: A) -> std::result::Result<CueMap, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = m.next_entry()? {
                    out.push((k, v));
                }
                Ok(CueMap(out))
            }
        }
        d.deserialize_map(CueMapVisitor)
    }
}

impl From<&CueTensor> for CueRecord {
    fn from(c: &CueTensor) -> Self {
        let values = (0..c.steps)
            .map(|t| (0..c.elements).map(|e| c.feature(t, e).to_vec()).collect())
            .collect();
        let mask = (0..c.steps)
            .map(|t| (0..c.elements).map(|e| c.available(t, e)).collect())
            .collect();
        CueRecord { values, mask }
    }
}

impl CueRecord {
    fn into_cue(self, kind: CueKind, path: &str) -> Result<CueTensor> {
        let steps = self.values.len();
        let elements = self.values.first().map_or(0, Vec::len);
        let features = self
            .values
            .first()
            .and_then(|f| f.first())
            .map_or(kind.features(), Vec::len);
        if self.mask.len() != steps {
            return Err(Error::validation(format!("{path}.mask"), "step count differs from values"));
        }
        let mut values = Vec::with_capacity(steps * elements * features);
        let mut mask = Vec::with_capacity(steps * elements);
        for (t, (frame, mframe)) in self.values.into_iter().zip(self.mask).enumerate() {
            if frame.len() != elements || mframe.len() != elements {
                return Err(Error::validation(
                    format!("{path}.values[{t}]"),
                    "ragged element dimension",
                ));
            }
            for (e, feat) in frame.into_iter().enumerate() {
                if feat.len() != features {
                    return Err(Error::validation(
                        format!("{path}.values[{t}][{e}]"),
                        "ragged feature dimension",
                    ));
                }
                values.extend(feat);
            }
            mask.extend(mframe);
        }
        Ok(CueTensor {
            kind,
            steps,
            elements,
            features,
            values,
            mask,
        })
    }
}

fn to_record(scene: &Scene) -> SceneRecord {
    SceneRecord {
        id: scene.id.clone(),
        fps: scene.fps,
        t_obs: scene.t_obs,
        t_pred: scene.horizon,
        agents: scene
            .agents
            .iter()
            .map(|a| AgentRecord {
                role: a.role,
                cues: CueMap(a.cues.iter().map(|c| (c.kind, CueRecord::from(c))).collect()),
            })
            .collect(),
        future: scene.future.clone(),
        latent: scene.latent.clone(),
    }
}

fn from_record(r: SceneRecord) -> Result<Scene> {
    let mut agents = Vec::with_capacity(r.agents.len());
    for (i, a) in r.agents.into_iter().enumerate() {
        let mut cues = Vec::with_capacity(a.cues.0.len());
        for (kind, rec) in a.cues.0 {
            cues.push(rec.into_cue(kind, &format!("agents[{i}].cues.{kind}"))?);
        }
        agents.push(Agent { role: a.role, cues });
    }
    Ok(Scene {
        id: r.id,
        fps: r.fps,
        t_obs: r.t_obs,
        horizon: r.t_pred,
        agents,
        future: r.future,
        latent: r.latent,
    })
}

/// Serializes one scene as a single JSON line (without the newline).
pub fn scene_to_json(scene: &Scene) -> String {
    serde_json::to_string(&to_record(scene)).expect("scene records always serialize")
}

/// Parses one JSON line without validating invariants.
pub fn scene_from_json(line: &str) -> std::result::Result<Scene, SceneParseError> {
    let record: SceneRecord = serde_json::from_str(line).map_err(SceneParseError::Json)?;
    from_record(record).map_err(SceneParseError::Shape)
}

#[derive(Debug)]
pub enum SceneParseError {
    Json(serde_json::Error),
    Shape(Error),
}

pub fn write_corpus(path: &Path, scenes: &[Scene]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for s in scenes {
        writeln!(w, "{}", scene_to_json(s)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads and validates every scene of a corpus file; blank lines are skipped.
pub fn read_corpus(path: &Path) -> Result<Vec<Scene>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut scenes = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let scene = match scene_from_json(&line) {
            Ok(s) => s,
            Err(SceneParseError::Json(source)) => {
                return Err(Error::Json {
                    path: path.to_path_buf(),
                    line: i + 1,
                    source,
                })
            }
            Err(SceneParseError::Shape(e)) => return Err(e),
        };
        scenes.push(scene.validate()?);
    }
    Ok(scenes)
}
