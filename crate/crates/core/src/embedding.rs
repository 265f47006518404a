//! Cue-specific token embeddings.
//!
//! Every available `(step, element)` entry of a cue becomes one token:
//!
//! ```text
//! token = MLP_cue(features) + temporal[step] + identity[agent] (+ keypoint[element] for poses)
//! ```
//!
//! Latent queries are learned future-slot tokens shared by all agents,
//! offset by the temporal rows of the future steps and the agent identity.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::coretypes::{CueKind, CueTensor, Role};
use crate::error::{Error, Result};
use crate::nnkernel::{Graph, Mlp, NodeId, ParamId, ParamStore, Tensor, INIT_STD};

/// How the identity table is indexed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IdentityMode {
    /// Two rows: primary and neighbor. Keeps predictions invariant to
    /// neighbor order.
    Binary,
    /// One row per agent slot, up to the configured maximum.
    PerSlot,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingConfig {
    pub width: usize,
    pub max_keypoints: usize,
    /// Rows of the temporal table: observed plus predicted steps.
    pub max_steps: usize,
    pub horizon: usize,
    pub identity: IdentityMode,
    pub max_agents: usize,
}

/// Where a token came from. `cue == None` marks a latent query.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TokenInfo {
    pub cue: Option<CueKind>,
    pub time: usize,
    pub element: usize,
    pub agent: usize,
}

/// A `[S, D]` block of tokens on a graph plus per-token provenance.
#[derive(Clone, Debug, Default)]
pub struct TokenBatch {
    pub tokens: Option<NodeId>,
    pub provenance: Vec<TokenInfo>,
}

impl TokenBatch {
    pub fn len(&self) -> usize {
        self.provenance.len()
    }

    pub fn is_empty(&self) -> bool {
        self.provenance.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct EmbeddingParams {
    pub config: EmbeddingConfig,
    pub cue_mlps: BTreeMap<CueKind, Mlp>,
    pub temporal: ParamId,
    pub identity: ParamId,
    pub keypoint: ParamId,
    pub queries: ParamId,
}

impl EmbeddingParams {
    pub fn register(store: &mut ParamStore, config: EmbeddingConfig, rng: &mut impl Rng) -> Self {
        let d = config.width;
        let cue_mlps = CueKind::ALL
            .iter()
            .map(|&k| {
                let mlp = Mlp::register(store, &format!("embed.{k}"), k.features(), d, d, rng);
                (k, mlp)
            })
            .collect();
        let identity_rows = match config.identity {
            IdentityMode::Binary => 2,
            IdentityMode::PerSlot => config.max_agents.max(1),
        };
        let temporal = store.add(
            "embed.temporal",
            Tensor::randn(&[config.max_steps, d], INIT_STD, rng),
        );
        let identity = store.add(
            "embed.identity",
            Tensor::randn(&[identity_rows, d], INIT_STD, rng),
        );
        let keypoint = store.add(
            "embed.keypoint",
            Tensor::randn(&[config.max_keypoints.max(1), d], INIT_STD, rng),
        );
        let queries = store.add(
            "queries",
            Tensor::randn(&[config.horizon, d], INIT_STD, rng),
        );
        EmbeddingParams {
            config,
            cue_mlps,
            temporal,
            identity,
            keypoint,
            queries,
        }
    }

    /// Identity-table row for the agent at `slot` (0 = primary).
    pub fn identity_row(&self, slot: usize, role: Role) -> Result<usize> {
        match self.config.identity {
            IdentityMode::Binary => Ok(match role {
                Role::Primary => 0,
                Role::Neighbor => 1,
            }),
            IdentityMode::PerSlot if slot < self.config.max_agents => Ok(slot),
            IdentityMode::PerSlot => Err(Error::Capacity(format!(
                "agent slot {slot} exceeds the identity table ({} slots)",
                self.config.max_agents
            ))),
        }
    }

    /// Embeds every available entry of `cue` for agent `agent` whose
    /// identity row is `identity_row`.
    pub fn embed_cue(
        &self,
        g: &mut Graph<'_>,
        cue: &CueTensor,
        agent: usize,
        identity_row: usize,
    ) -> Result<TokenBatch> {
        let mut features = Vec::new();
        let mut provenance = Vec::new();
        for t in 0..cue.steps {
            for e in 0..cue.elements {
                if cue.available(t, e) {
                    features.extend_from_slice(cue.feature(t, e));
                    provenance.push(TokenInfo {
                        cue: Some(cue.kind),
                        time: t,
                        element: e,
                        agent,
                    });
                }
            }
        }
        if provenance.is_empty() {
            return Ok(TokenBatch::default());
        }
        let max_steps = self.config.max_steps;
        if let Some(bad) = provenance.iter().find(|p| p.time >= max_steps) {
            return Err(Error::Capacity(format!(
                "time index {} is outside the temporal table ({max_steps} rows)",
                bad.time
            )));
        }
        let n = provenance.len();
        let x = g.input(Tensor::new(vec![n, cue.features], features)?);
        let mlp = self
            .cue_mlps
            .get(&cue.kind)
            .ok_or_else(|| Error::Config(format!("no embedding for cue {}", cue.kind)))?;
        let mut tokens = mlp.forward(g, x)?;

        let times: Vec<usize> = provenance.iter().map(|p| p.time).collect();
        tokens = self.add_rows(g, tokens, self.temporal, &times)?;
        tokens = self.add_rows(g, tokens, self.identity, &vec![identity_row; n])?;
        if cue.kind.is_pose() {
            let kps: Vec<usize> = provenance.iter().map(|p| p.element).collect();
            tokens = self.add_rows(g, tokens, self.keypoint, &kps)?;
        }
        Ok(TokenBatch {
            tokens: Some(tokens),
            provenance,
        })
    }

    /// Learned query tokens for the `horizon` future steps after `t_obs`.
    pub fn latent_queries(
        &self,
        g: &mut Graph<'_>,
        t_obs: usize,
        horizon: usize,
        agent: usize,
        identity_row: usize,
    ) -> Result<TokenBatch> {
        if horizon == 0 {
            return Err(Error::Contract("latent queries need a horizon of at least 1".into()));
        }
        if horizon > self.config.horizon {
            return Err(Error::Capacity(format!(
                "horizon {horizon} exceeds the {} learned queries",
                self.config.horizon
            )));
        }
        let rows: Vec<usize> = (0..horizon).collect();
        let table = g.param(self.queries);
        let mut tokens = g.gather_rows(table, &rows)?;
        let times: Vec<usize> = (t_obs..t_obs + horizon).collect();
        tokens = self.add_rows(g, tokens, self.temporal, &times)?;
        tokens = self.add_rows(g, tokens, self.identity, &vec![identity_row; horizon])?;
        Ok(TokenBatch {
            tokens: Some(tokens),
            provenance: times
                .iter()
                .map(|&time| TokenInfo {
                    cue: None,
                    time,
                    element: 0,
                    agent,
                })
                .collect(),
        })
    }

    fn add_rows(
        &self,
        g: &mut Graph<'_>,
        tokens: NodeId,
        table: ParamId,
        rows: &[usize],
    ) -> Result<NodeId> {
        let table = g.param(table);
        let enc = g.gather_rows(table, rows)?;
        g.add(tokens, enc)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn config(identity: IdentityMode) -> EmbeddingConfig {
        EmbeddingConfig {
            width: 128,
            max_keypoints: 17,
            max_steps: 21,
            horizon: 12,
            identity,
            max_agents: 4,
        }
    }

    fn setup(identity: IdentityMode) -> (ParamStore, EmbeddingParams) {
        let mut store = ParamStore::new();
        let params = EmbeddingParams::register(
            &mut store,
            config(identity),
            &mut ChaCha8Rng::seed_from_u64(1),
        );
        (store, params)
    }

    fn pose(steps: usize, seed: u64) -> CueTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..steps * 17 * 3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        CueTensor::new(CueKind::Pose3d, steps, 17, values).unwrap()
    }

    #[test]
    fn nine_step_trajectory_gives_nine_tokens_of_width_128() {
        let (store, emb) = setup(IdentityMode::Binary);
        let traj = CueTensor::trajectory(&[[0.5, 1.0]; 9]);
        let mut g = Graph::new(&store);
        let batch = emb.embed_cue(&mut g, &traj, 0, 0).unwrap();
        assert_eq!(g.value(batch.tokens.unwrap()).shape(), &[9, 128]);
        assert_eq!(batch.len(), 9);
    }

    #[test]
    fn fully_masked_cue_is_empty() {
        let (store, emb) = setup(IdentityMode::Binary);
        let mut cue = pose(9, 2);
        cue.clear_mask();
        let mut g = Graph::new(&store);
        let batch = emb.embed_cue(&mut g, &cue, 0, 0).unwrap();
        assert!(batch.is_empty());
        assert!(batch.tokens.is_none());
    }

    #[test]
    fn zero_mlp_leaves_only_encodings() {
        let (mut store, emb) = setup(IdentityMode::Binary);
        let mlp = emb.cue_mlps[&CueKind::Pose3d];
        for id in [mlp.hidden.weight, mlp.hidden.bias, mlp.output.weight, mlp.output.bias] {
            let shape = store.get(id).shape().to_vec();
            store.set(id, Tensor::zeros(&shape)).unwrap();
        }
        let cue = pose(3, 3);
        let mut g = Graph::new(&store);
        let batch = emb.embed_cue(&mut g, &cue, 1, 1).unwrap();
        let tokens = g.value(batch.tokens.unwrap());
        for (i, p) in batch.provenance.iter().enumerate() {
            for c in 0..128 {
                let expected = store.get(emb.temporal).at(p.time, c)
                    + store.get(emb.identity).at(1, c)
                    + store.get(emb.keypoint).at(p.element, c);
                assert_eq!(tokens.at(i, c), expected);
            }
        }
    }

    #[test]
    fn time_beyond_temporal_table_is_a_capacity_error() {
        let (store, emb) = setup(IdentityMode::Binary);
        let traj = CueTensor::trajectory(&[[0.0, 0.0]; 22]);
        let mut g = Graph::new(&store);
        assert!(matches!(emb.embed_cue(&mut g, &traj, 0, 0), Err(Error::Capacity(_))));
    }

    #[test]
    fn query_counts_follow_the_horizon() {
        let (store, emb) = setup(IdentityMode::Binary);
        let mut g = Graph::new(&store);
        assert_eq!(emb.latent_queries(&mut g, 9, 12, 0, 0).unwrap().len(), 12);
        assert_eq!(emb.latent_queries(&mut g, 9, 1, 0, 0).unwrap().len(), 1);
        assert!(emb.latent_queries(&mut g, 9, 13, 0, 0).is_err());
    }

    #[test]
    fn queries_of_two_agents_differ_only_by_identity() {
        let (store, emb) = setup(IdentityMode::Binary);
        let mut g = Graph::new(&store);
        let a = emb.latent_queries(&mut g, 9, 12, 0, 0).unwrap();
        let b = emb.latent_queries(&mut g, 9, 12, 1, 1).unwrap();
        let (ta, tb) = (g.value(a.tokens.unwrap()), g.value(b.tokens.unwrap()));
        let id = store.get(emb.identity);
        for r in 0..12 {
            for c in 0..128 {
                let diff = ta.at(r, c) - tb.at(r, c);
                let expected = id.at(0, c) - id.at(1, c);
                assert!((diff - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn same_pose_on_two_agents_differs_by_identity_rows() {
        let (store, emb) = setup(IdentityMode::PerSlot);
        let cue = pose(4, 5);
        let mut g = Graph::new(&store);
        let a = emb.embed_cue(&mut g, &cue, 0, 0).unwrap();
        let b = emb.embed_cue(&mut g, &cue, 3, 3).unwrap();
        let (ta, tb) = (g.value(a.tokens.unwrap()), g.value(b.tokens.unwrap()));
        let id = store.get(emb.identity);
        for r in 0..ta.rows() {
            for c in 0..128 {
                let diff = ta.at(r, c) - tb.at(r, c);
                assert!((diff - (id.at(0, c) - id.at(3, c))).abs() < 1e-15);
            }
        }
        assert!(emb.identity_row(4, Role::Neighbor).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn masked_entries_never_reach_tokens(seed in any::<u64>(), junk in -1e6f64..1e6) {
            let (store, emb) = setup(IdentityMode::Binary);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cue = pose(5, seed);
            for m in cue.mask.iter_mut() {
                *m = rng.gen_bool(0.6);
            }
            let mut corrupted = cue.clone();
            for t in 0..5 {
                for e in 0..17 {
                    if !cue.available(t, e) {
                        corrupted.feature_mut(t, e).iter_mut().for_each(|v| *v = junk);
                    }
                }
            }
            let mut g = Graph::new(&store);
            let a = emb.embed_cue(&mut g, &cue, 0, 0).unwrap();
            let b = emb.embed_cue(&mut g, &corrupted, 0, 0).unwrap();
            prop_assert_eq!(a.len(), cue.available_count());
            match (a.tokens, b.tokens) {
                (Some(x), Some(y)) => prop_assert_eq!(g.value(x), g.value(y)),
                (None, None) => {}
                _ => prop_assert!(false, "token presence differs"),
            }
        }
    }
}
