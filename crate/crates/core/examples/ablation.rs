//! Trains the four architecture variants for a fixed step budget and prints
//! their test metrics side by side.

use promptraj::cli::{ablate, ablation_table};
use promptraj::datagen::{generate, ScenarioSpec};
use promptraj::model::ModelConfig;
use promptraj::training::TrainConfig;

fn main() -> promptraj::Result<()> {
    let data = generate(&ScenarioSpec { keypoints: 5, train: 200, val: 0, test: 50, seed: 2, ..ScenarioSpec::default() })?;
    let base = ModelConfig { width: 16, cmt_layers: 2, st_layers: 1, keypoints: 5, ..ModelConfig::default() };
    let cfg = TrainConfig { lr: 1e-3, batch_size: 16, ..TrainConfig::default() };
    let rows = ablate(&base, &cfg, 100, &data.train, &data.test)?;
    print!("{}", ablation_table(&rows));
    Ok(())
}
