//! Computes ADE, FDE and ASWAEE for a hand-made prediction.

use promptraj::metrics::{aswaee_indices, MetricReport, SceneMetrics, ASWAEE_TIMES};

fn main() -> promptraj::Result<()> {
    let truth: Vec<[f64; 2]> = (1..=12).map(|t| [t as f64 * 0.5, 0.0]).collect();
    let pred: Vec<[f64; 2]> = truth.iter().enumerate().map(|(i, p)| [p[0], 0.05 * i as f64]).collect();
    let fps = 2.5;
    println!("ASWAEE steps at {fps} fps: {:?}", aswaee_indices(fps, &ASWAEE_TIMES, truth.len())?);

    let lagging: Vec<[f64; 2]> = truth.iter().map(|p| [p[0] * 0.9, 0.0]).collect();
    let drifting = MetricReport::from_scenes(vec![SceneMetrics::compute("drift", &pred, &truth, fps)?])?;
    let slow = MetricReport::from_scenes(vec![SceneMetrics::compute("slow", &lagging, &truth, fps)?])?;
    print!("{}", drifting.summary_table("drift", None));
    print!("{}", slow.summary_table("slow", Some(&drifting)));
    print!("{}", slow.to_csv());
    Ok(())
}
