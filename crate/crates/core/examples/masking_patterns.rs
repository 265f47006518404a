//! Shows how the training and evaluation masks thin out a scene's tokens.

use promptraj::coretypes::{CueKind, Scene};
use promptraj::datagen::{generate, ScenarioSpec};
use promptraj::masking::{apply_eval_pattern, apply_train_masking, substream, EvalPattern, MaskPolicy};

fn counts(scene: &Scene) -> String {
    CueKind::ALL
        .iter()
        .map(|&k| {
            let n: usize = scene.agents.iter().filter_map(|a| a.cue(k)).map(|c| c.available_count()).sum();
            format!("{k}={n}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn main() -> promptraj::Result<()> {
    let data = generate(&ScenarioSpec { train: 1, val: 0, test: 0, seed: 6, ..ScenarioSpec::default() })?;
    let scene = &data.train[0];
    println!("{:<22} {}", "original", counts(scene));

    let policy = MaskPolicy::default();
    for i in 0..3 {
        let masked = apply_train_masking(scene, &policy, &mut substream(1, 0, i));
        println!("{:<22} {}", format!("training draw {i}"), counts(&masked));
    }
    for text in ["keep:T=0.5,P3d=0.5", "random-limb", "right-leg", "frame-drop:1", "noise:0.05"] {
        let pattern: EvalPattern = text.parse()?;
        let masked = apply_eval_pattern(scene, &pattern, &mut substream(2, 0, 0))?;
        println!("{:<22} {}", pattern.to_string(), counts(&masked));
    }
    Ok(())
}
