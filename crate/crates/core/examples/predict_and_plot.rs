//! Predicts a few scenes and writes one SVG overlay per scene.
//!
//!     cargo run --release --example predict_and_plot -- /tmp/plots

use std::path::PathBuf;

use promptraj::datagen::{generate, ScenarioMix, ScenarioSpec};
use promptraj::model::{Model, ModelConfig};
use promptraj::plot::trajectory_svg;
use promptraj::training::{train, TrainConfig};

fn main() -> promptraj::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "plots".into()).into();
    let spec = ScenarioSpec { kind: ScenarioMix::SocialAvoidance, keypoints: 5, train: 200, val: 0, test: 4, seed: 9, ..ScenarioSpec::default() };
    let data = generate(&spec)?;
    let mut model = Model::new(ModelConfig { width: 16, cmt_layers: 1, st_layers: 1, keypoints: 5, ..ModelConfig::default() })?;
    train(&mut model, &data.train, &[], &TrainConfig { epochs: 3, lr: 1e-3, ..TrainConfig::default() })?;

    for scene in &data.test {
        let pred = model.predict(scene)?;
        let path = out.join(format!("{}.svg", scene.id));
        promptraj::attnviz::write_text(&path, &trajectory_svg(scene, Some(&pred)))?;
        let last = pred.positions.last().unwrap();
        println!("{} -> ({:.2}, {:.2})  {}", scene.id, last[0], last[1], path.display());
    }
    Ok(())
}
