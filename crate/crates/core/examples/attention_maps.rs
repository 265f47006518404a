//! Extracts temporal and per-keypoint attention maps from a trained model
//! and writes them as CSV and SVG heatmaps.
//!
//!     cargo run --release --example attention_maps -- /tmp/attention

use std::path::PathBuf;

use promptraj::attnviz::{heatmap_svg, matrix_csv, mean_map, spatial_map, temporal_map, write_text};
use promptraj::coretypes::keypoint_layout;
use promptraj::datagen::{generate, ScenarioMix, ScenarioSpec};
use promptraj::model::{Model, ModelConfig};
use promptraj::training::{train, TrainConfig};

fn main() -> promptraj::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "attention".into()).into();
    let data = generate(&ScenarioSpec { keypoints: 9, train: 1500, val: 0, test: 20, seed: 4, ..ScenarioSpec::default() })?;
    let turns = generate(&ScenarioSpec { kind: ScenarioMix::TurnWithPreview, keypoints: 9, train: 0, val: 0, test: 20, seed: 8, ..ScenarioSpec::default() })?;
    let mut model = Model::new(ModelConfig { width: 32, cmt_layers: 2, st_layers: 1, keypoints: 9, ..ModelConfig::default() })?;
    train(&mut model, &data.train, &[], &TrainConfig { epochs: 6, lr: 1e-3, batch_size: 8, ..TrainConfig::default() })?;

    let layout = keypoint_layout(9)?;
    let (mut temporal, mut spatial) = (Vec::new(), Vec::new());
    for scene in &turns.test {
        let (_, capture) = model.forward(scene)?;
        let capture = capture.expect("CMT variants capture attention");
        temporal.push(temporal_map(&capture)?);
        spatial.extend(spatial_map(&capture, layout)?);
    }
    let steps: Vec<String> = (0..temporal[0].len()).map(|t| format!("t{t}")).collect();
    let joints: Vec<String> = layout.keypoints.iter().map(|k| k.label.to_string()).collect();
    let t_rows = vec![("mean".to_string(), mean_map(&temporal).unwrap())];
    let s_rows = vec![("mean".to_string(), mean_map(&spatial).unwrap())];

    write_text(&out.join("temporal.csv"), &matrix_csv(&steps, &t_rows))?;
    write_text(&out.join("temporal.svg"), &heatmap_svg("attention per observed step", &steps, &t_rows))?;
    write_text(&out.join("spatial.csv"), &matrix_csv(&joints, &s_rows))?;
    write_text(&out.join("spatial.svg"), &heatmap_svg("attention per keypoint", &joints, &s_rows))?;
    for (label, v) in steps.iter().zip(&t_rows[0].1) {
        println!("{label:>4} {v:.3} {}", "#".repeat((v * 100.0) as usize));
    }
    Ok(())
}
