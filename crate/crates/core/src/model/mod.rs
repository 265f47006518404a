//! Dual-transformer predictor.
//!
//! Each agent's cue tokens and latent queries pass through the shared
//! cross-modality encoder (CMT). Only the transformed trajectory and query
//! tokens (the motion tensor) continue to the social encoder (ST), which
//! attends over every agent's motion tensor at once. The primary agent's
//! query block is projected to future positions.

mod config;

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use config::{ModelConfig, TargetMode, Variant};

use crate::attnviz::AttentionCapture;
use crate::coretypes::{CueKind, PredictionY, Scene};
use crate::embedding::{EmbeddingConfig, EmbeddingParams, TokenBatch, TokenInfo};
use crate::error::{Error, Result};
use crate::nnkernel::{checkpoint, Encoder, Gradients, Graph, Mlp, NodeId, ParamStore, Tensor};

pub const CONFIG_FILE: &str = "model.toml";
pub const CHECKPOINT_FILE: &str = "model.ckpt";

/// Parameter handles of every learned component.
#[derive(Clone, Debug)]
pub struct ModelLayout {
    pub embedding: EmbeddingParams,
    pub cmt: Option<Encoder>,
    pub st: Option<Encoder>,
    pub token_mlp: Option<Mlp>,
    pub head: Mlp,
}

/// A configured model with its parameters.
#[derive(Clone, Debug)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub layout: ModelLayout,
}

/// Transformed tokens of one agent after the per-agent stage.
#[derive(Clone, Debug)]
pub struct MotionTensor {
    /// `[trajectory tokens; query tokens]`, `[T_obs + horizon, D]` for a
    /// complete trajectory.
    pub tokens: NodeId,
    pub trajectory_len: usize,
    pub horizon: usize,
}

/// Output of the cross-modality encoder for one agent.
pub struct CmtOutput {
    pub motion: MotionTensor,
    /// Transformed pose and box tokens, for diagnostics.
    pub cue_tokens: Option<NodeId>,
    pub attention: Vec<NodeId>,
    pub provenance: Vec<TokenInfo>,
}

/// The primary agent's block after the social encoder.
pub struct SocialTensor {
    pub tokens: NodeId,
    pub trajectory_len: usize,
    pub horizon: usize,
    /// Total number of tokens the social encoder saw.
    pub sequence_len: usize,
}

/// Everything a forward pass leaves behind besides the graph.
pub struct ForwardOutput {
    pub prediction: NodeId,
    pub capture: Option<AttentionCapture>,
    /// Length of the social encoder input, when the variant has one.
    pub social_len: Option<usize>,
    /// Per-agent motion tensor lengths fed to the social stage.
    pub motion_lens: Vec<usize>,
}

struct AgentTokens {
    trajectory: TokenBatch,
    queries: TokenBatch,
    others: Vec<TokenBatch>,
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut store = ParamStore::new();
        let d = config.width;
        let embedding = EmbeddingParams::register(
            &mut store,
            EmbeddingConfig {
                width: d,
                max_keypoints: config.keypoints,
                max_steps: config.t_obs + config.horizon,
                horizon: config.horizon,
                identity: config.identity,
                max_agents: config.max_agents,
            },
            &mut rng,
        );
        let ff = config.ff_mult * d;
        let uses_cmt = config.variant != Variant::MlpSt;
        let uses_st = config.variant != Variant::CmtOnly;
        let cmt = uses_cmt
            .then(|| {
                Encoder::register(&mut store, "cmt", d, config.cmt_heads, config.cmt_layers, ff, &mut rng)
            })
            .transpose()?;
        let token_mlp =
            (!uses_cmt).then(|| Mlp::register(&mut store, "token_mlp", d, d, d, &mut rng));
        let st = uses_st
            .then(|| Encoder::register(&mut store, "st", d, config.st_heads, config.st_layers, ff, &mut rng))
            .transpose()?;
        let head = Mlp::register(&mut store, "head", d, d, 2, &mut rng);
        Ok(Model {
            config,
            params: store,
            layout: ModelLayout {
                embedding,
                cmt,
                st,
                token_mlp,
                head,
            },
        })
    }

    /// Rebuilds a model around previously trained parameters.
    pub fn with_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let mut model = Model::new(config)?;
        if !model.params.same_layout(&params) {
            return Err(Error::Checkpoint(
                "parameter names or shapes do not match the model configuration".into(),
            ));
        }
        model.params = params;
        Ok(model)
    }

    fn check_scene(&self, scene: &Scene) -> Result<()> {
        let c = &self.config;
        if scene.horizon > c.horizon {
            return Err(Error::Capacity(format!(
                "scene horizon {} exceeds model horizon {}",
                scene.horizon, c.horizon
            )));
        }
        if scene.t_obs + scene.horizon > c.t_obs + c.horizon {
            return Err(Error::Capacity(format!(
                "scene spans {} steps, temporal table holds {}",
                scene.t_obs + scene.horizon,
                c.t_obs + c.horizon
            )));
        }
        if let Some(k) = scene.keypoints() {
            if k > c.keypoints {
                return Err(Error::Capacity(format!(
                    "scene has {k} keypoints, model supports {}",
                    c.keypoints
                )));
            }
        }
        Ok(())
    }

    fn agent_tokens(&self, g: &mut Graph<'_>, scene: &Scene, slot: usize) -> Result<AgentTokens> {
        let agent = &scene.agents[slot];
        let emb = &self.layout.embedding;
        let id_row = emb.identity_row(slot, agent.role)?;
        let trajectory = match agent.trajectory() {
            Some(t) => emb.embed_cue(g, t, slot, id_row)?,
            None => TokenBatch::default(),
        };
        let queries = emb.latent_queries(g, scene.t_obs, scene.horizon, slot, id_row)?;
        let mut others = Vec::new();
        for kind in &CueKind::ALL[1..] {
            if let Some(cue) = agent.cue(*kind) {
                let batch = emb.embed_cue(g, cue, slot, id_row)?;
                if !batch.is_empty() {
                    others.push(batch);
                }
            }
        }
        Ok(AgentTokens {
            trajectory,
            queries,
            others,
        })
    }

    /// Cross-modality encoding of one agent over
    /// `[trajectory; queries; P3d; P2d; B3d; B2d]` tokens.
    pub fn cmt_forward(&self, g: &mut Graph<'_>, scene: &Scene, slot: usize) -> Result<CmtOutput> {
        let tokens = self.agent_tokens(g, scene, slot)?;
        self.cmt_over(g, &tokens, None)
    }

    fn cmt_over(
        &self,
        g: &mut Graph<'_>,
        tokens: &AgentTokens,
        replaced: Option<NodeId>,
    ) -> Result<CmtOutput> {
        let cmt = self
            .layout
            .cmt
            .as_ref()
            .ok_or_else(|| Error::Contract("variant has no cross-modality encoder".into()))?;
        let mut parts = Vec::new();
        let mut provenance = Vec::new();
        for batch in std::iter::once(&tokens.trajectory)
            .chain(std::iter::once(&tokens.queries))
            .chain(tokens.others.iter())
        {
            if let Some(t) = batch.tokens {
                parts.push(t);
                provenance.extend_from_slice(&batch.provenance);
            }
        }
        if parts.is_empty() {
            return Err(Error::Contract("cross-modality encoder got no tokens".into()));
        }
        let input = match replaced {
            Some(node) => node,
            None => g.concat_rows(&parts)?,
        };
        let (out, attention) = cmt.forward(g, input)?;
        let traj_len = tokens.trajectory.len();
        let horizon = tokens.queries.len();
        let motion_len = traj_len + horizon;
        let motion = g.slice_rows(out, 0, motion_len)?;
        let rest = provenance.len() - motion_len;
        let cue_tokens = (rest > 0)
            .then(|| g.slice_rows(out, motion_len, rest))
            .transpose()?;
        Ok(CmtOutput {
            motion: MotionTensor {
                tokens: motion,
                trajectory_len: traj_len,
                horizon,
            },
            cue_tokens,
            attention,
            provenance,
        })
    }

    /// Per-token MLP plus mean pooling over all cue tokens of each observed step.
    fn mlp_motion(&self, g: &mut Graph<'_>, tokens: &AgentTokens) -> Result<MotionTensor> {
        let mlp = self
            .layout
            .token_mlp
            .as_ref()
            .ok_or_else(|| Error::Contract("variant has no token MLP".into()))?;
        let mut parts = Vec::new();
        let mut times = Vec::new();
        for batch in std::iter::once(&tokens.trajectory).chain(tokens.others.iter()) {
            if let Some(t) = batch.tokens {
                parts.push(t);
                times.extend(batch.provenance.iter().map(|p| p.time));
            }
        }
        let queries = tokens.queries.tokens.expect("horizon >= 1");
        let q = mlp.forward(g, queries)?;
        if parts.is_empty() {
            return Ok(MotionTensor {
                tokens: q,
                trajectory_len: 0,
                horizon: tokens.queries.len(),
            });
        }
        let cat = g.concat_rows(&parts)?;
        let h = mlp.forward(g, cat)?;
        let mut distinct: Vec<usize> = times.clone();
        distinct.sort_unstable();
        distinct.dedup();
        let groups: Vec<Vec<usize>> = distinct
            .iter()
            .map(|&t| (0..times.len()).filter(|&i| times[i] == t).collect())
            .collect();
        let pooled = g.mean_rows(h, &groups)?;
        let motion = g.concat_rows(&[pooled, q])?;
        Ok(MotionTensor {
            tokens: motion,
            trajectory_len: distinct.len(),
            horizon: tokens.queries.len(),
        })
    }

    /// Social encoding over the flattened motion tensors of all agents;
    /// returns the primary agent's block.
    pub fn st_forward(&self, g: &mut Graph<'_>, motions: &[MotionTensor]) -> Result<SocialTensor> {
        let st = self
            .layout
            .st
            .as_ref()
            .ok_or_else(|| Error::Contract("variant has no social encoder".into()))?;
        let primary = motions
            .first()
            .ok_or_else(|| Error::Contract("social encoder needs at least one agent".into()))?;
        let nodes: Vec<NodeId> = motions.iter().map(|m| m.tokens).collect();
        let input = g.concat_rows(&nodes)?;
        let sequence_len = g.value(input).rows();
        let (out, _) = st.forward(g, input)?;
        let len = primary.trajectory_len + primary.horizon;
        let tokens = g.slice_rows(out, 0, len)?;
        Ok(SocialTensor {
            tokens,
            trajectory_len: primary.trajectory_len,
            horizon: primary.horizon,
            sequence_len,
        })
    }

    /// Maps `[horizon, D]` query tokens to `[horizon, 2]` positions.
    pub fn project(&self, g: &mut Graph<'_>, queries: NodeId, scene: &Scene) -> Result<NodeId> {
        let out = self.layout.head.forward(g, queries)?;
        match self.config.target {
            TargetMode::Absolute => Ok(out),
            TargetMode::Offset => {
                let steps = g.cumsum_rows(out);
                let last = last_observed(scene);
                let h = g.value(steps).rows();
                let base = g.input(Tensor::new(vec![h, 2], [last[0], last[1]].repeat(h))?);
                g.add(steps, base)
            }
        }
    }

    /// Records the full forward pass on `g`.
    pub fn build(&self, g: &mut Graph<'_>, scene: &Scene, capture: bool) -> Result<ForwardOutput> {
        self.check_scene(scene)?;
        let n = scene.agents.len();
        match self.config.variant {
            Variant::CmtSt => {
                let mut motions = Vec::with_capacity(n);
                let mut capture_out = None;
                for slot in 0..n {
                    let out = self.cmt_forward(g, scene, slot)?;
                    if slot == 0 && capture {
                        capture_out = Some(self.capture(g, &out));
                    }
                    motions.push(out.motion);
                }
                let motion_lens = motions.iter().map(|m| m.trajectory_len + m.horizon).collect();
                let social = self.st_forward(g, &motions)?;
                let q = g.slice_rows(social.tokens, social.trajectory_len, social.horizon)?;
                Ok(ForwardOutput {
                    prediction: self.project(g, q, scene)?,
                    capture: capture_out,
                    social_len: Some(social.sequence_len),
                    motion_lens,
                })
            }
            Variant::MlpSt => {
                let mut motions = Vec::with_capacity(n);
                for slot in 0..n {
                    let tokens = self.agent_tokens(g, scene, slot)?;
                    motions.push(self.mlp_motion(g, &tokens)?);
                }
                let motion_lens = motions.iter().map(|m| m.trajectory_len + m.horizon).collect();
                let social = self.st_forward(g, &motions)?;
                let q = g.slice_rows(social.tokens, social.trajectory_len, social.horizon)?;
                Ok(ForwardOutput {
                    prediction: self.project(g, q, scene)?,
                    capture: None,
                    social_len: Some(social.sequence_len),
                    motion_lens,
                })
            }
            Variant::CmtOnly => {
                let out = self.cmt_forward(g, scene, 0)?;
                let m = &out.motion;
                let q = g.slice_rows(m.tokens, m.trajectory_len, m.horizon)?;
                let capture_out = capture.then(|| self.capture(g, &out));
                Ok(ForwardOutput {
                    prediction: self.project(g, q, scene)?,
                    capture: capture_out,
                    social_len: None,
                    motion_lens: vec![m.trajectory_len + m.horizon],
                })
            }
            Variant::StCmt => self.build_st_cmt(g, scene, capture),
        }
    }

    /// Social encoding of each time step across agents, then the
    /// per-agent cross-modality encoder over the socially mixed tokens.
    fn build_st_cmt(&self, g: &mut Graph<'_>, scene: &Scene, capture: bool) -> Result<ForwardOutput> {
        let st = self
            .layout
            .st
            .as_ref()
            .ok_or_else(|| Error::Contract("variant has no social encoder".into()))?;
        let n = scene.agents.len();
        let agents: Vec<AgentTokens> = (0..n)
            .map(|slot| self.agent_tokens(g, scene, slot))
            .collect::<Result<_>>()?;

        // Flatten every token of every agent in per-agent CMT order.
        let mut parts = Vec::new();
        let mut prov = Vec::new();
        let mut agent_ranges = Vec::with_capacity(n);
        for a in &agents {
            let start = prov.len();
            for batch in std::iter::once(&a.trajectory)
                .chain(std::iter::once(&a.queries))
                .chain(a.others.iter())
            {
                if let Some(t) = batch.tokens {
                    parts.push(t);
                    prov.extend_from_slice(&batch.provenance);
                }
            }
            agent_ranges.push(start..prov.len());
        }
        let all = g.concat_rows(&parts)?;

        let max_time = prov.iter().map(|p| p.time).max().unwrap_or(0);
        let mut group_outputs = Vec::new();
        let mut position = vec![0usize; prov.len()];
        let mut offset = 0;
        for t in 0..=max_time {
            let members: Vec<usize> = (0..prov.len()).filter(|&i| prov[i].time == t).collect();
            if members.is_empty() {
                continue;
            }
            let block = g.gather_rows(all, &members)?;
            let (mixed, _) = st.forward(g, block)?;
            for (j, &i) in members.iter().enumerate() {
                position[i] = offset + j;
            }
            offset += members.len();
            group_outputs.push(mixed);
        }
        let mixed_all = g.concat_rows(&group_outputs)?;

        let mut prediction = None;
        let mut capture_out = None;
        let mut motion_lens = Vec::with_capacity(n);
        for (slot, a) in agents.iter().enumerate() {
            let index: Vec<usize> = agent_ranges[slot].clone().map(|i| position[i]).collect();
            let seq = g.gather_rows(mixed_all, &index)?;
            if slot == 0 {
                let out = self.cmt_over(g, a, Some(seq))?;
                let m = &out.motion;
                let q = g.slice_rows(m.tokens, m.trajectory_len, m.horizon)?;
                prediction = Some(self.project(g, q, scene)?);
                if capture {
                    capture_out = Some(self.capture(g, &out));
                }
            }
            motion_lens.push(a.trajectory.len() + a.queries.len());
        }
        Ok(ForwardOutput {
            prediction: prediction.expect("scene has a primary agent"),
            capture: capture_out,
            social_len: Some(prov.len()),
            motion_lens,
        })
    }

    fn capture(&self, g: &Graph<'_>, out: &CmtOutput) -> AttentionCapture {
        AttentionCapture {
            layers: out
                .attention
                .iter()
                .filter_map(|&a| g.attention_weights(a))
                .collect(),
            provenance: out.provenance.clone(),
        }
    }

    /// Writes `model.toml` and `model.ckpt` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.config.save(&dir.join(CONFIG_FILE))?;
        checkpoint::save(&self.params, &dir.join(CHECKPOINT_FILE))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let config = ModelConfig::load(&dir.join(CONFIG_FILE))?;
        let params = checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
        Model::with_params(config, params)
    }

    /// Deterministic prediction for the primary agent of `scene`.
    pub fn forward(&self, scene: &Scene) -> Result<(PredictionY, Option<AttentionCapture>)> {
        let mut g = Graph::new(&self.params);
        let out = self.build(&mut g, scene, true)?;
        Ok((to_prediction(g.value(out.prediction)), out.capture))
    }

    pub fn predict(&self, scene: &Scene) -> Result<PredictionY> {
        let mut g = Graph::new(&self.params);
        let out = self.build(&mut g, scene, false)?;
        Ok(to_prediction(g.value(out.prediction)))
    }

    /// Mean squared error against the scene's future and its gradients.
    pub fn loss_and_grads(&self, scene: &Scene) -> Result<(f64, Gradients)> {
        let mut g = Graph::new(&self.params);
        let out = self.build(&mut g, scene, false)?;
        let target = future_tensor(scene)?;
        let loss = g.mse(out.prediction, &target)?;
        let value = g.value(loss).data()[0];
        Ok((value, g.backward(loss)?))
    }

    /// Loss only, for finite-difference checks.
    pub fn loss(&self, scene: &Scene) -> Result<f64> {
        let mut g = Graph::new(&self.params);
        let out = self.build(&mut g, scene, false)?;
        let loss = g.mse(out.prediction, &future_tensor(scene)?)?;
        Ok(g.value(loss).data()[0])
    }
}

pub(crate) fn future_tensor(scene: &Scene) -> Result<Tensor> {
    Tensor::new(
        vec![scene.future.len(), 2],
        scene.future.iter().flat_map(|p| p.iter().copied()).collect(),
    )
}

fn to_prediction(t: &Tensor) -> PredictionY {
    PredictionY {
        positions: (0..t.rows()).map(|r| [t.at(r, 0), t.at(r, 1)]).collect(),
    }
}

/// Last available trajectory position of the primary, or the origin.
pub fn last_observed(scene: &Scene) -> [f64; 2] {
    scene
        .primary()
        .trajectory()
        .and_then(|t| (0..t.steps).rev().find_map(|s| t.position(s)))
        .unwrap_or([0.0, 0.0])
}
