//! Trains a small model with the generic (masked) protocol and saves it.
//!
//!     cargo run --release --example train_model -- /tmp/model

use std::path::PathBuf;

use promptraj::datagen::{generate, ScenarioSpec};
use promptraj::model::{Model, ModelConfig};
use promptraj::training::{train_to_dir, TrainConfig};

fn main() -> promptraj::Result<()> {
    env_logger::init();
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "model".into()).into();
    let data = generate(&ScenarioSpec { keypoints: 9, train: 600, val: 60, test: 0, seed: 1, ..ScenarioSpec::default() })?;
    let mut model = Model::new(ModelConfig {
        width: 32,
        cmt_layers: 2,
        st_layers: 1,
        keypoints: 9,
        ..ModelConfig::default()
    })?;
    let cfg = TrainConfig { epochs: 5, lr: 1e-3, ..TrainConfig::default() };
    let log = train_to_dir(&mut model, &data.train, &data.val, &cfg, &out)?;
    print!("{}", log.to_csv());
    println!("best epoch {:?}, saved to {}", log.best_epoch, out.display());

    let reloaded = Model::load(&out)?;
    assert_eq!(reloaded.predict(&data.val[0])?, model.predict(&data.val[0])?);
    Ok(())
}
