//! Evaluates one model under several cue menus and occlusion patterns and
//! prints degradation against the clean run.

use promptraj::coretypes::CueKind;
use promptraj::datagen::{generate, ScenarioSpec};
use promptraj::masking::EvalPattern;
use promptraj::model::{Model, ModelConfig};
use promptraj::training::{evaluate, train, TrainConfig};

fn main() -> promptraj::Result<()> {
    let data = generate(&ScenarioSpec { keypoints: 9, train: 1500, val: 0, test: 100, seed: 5, ..ScenarioSpec::default() })?;
    let mut model = Model::new(ModelConfig { width: 32, cmt_layers: 2, st_layers: 1, keypoints: 9, ..ModelConfig::default() })?;
    train(&mut model, &data.train, &[], &TrainConfig { epochs: 6, lr: 1e-3, batch_size: 8, ..TrainConfig::default() })?;

    let tp = [CueKind::Trajectory, CueKind::Pose3d];
    let clean = evaluate(&model, &data.test, &tp, &[], 0)?;
    print!("{}", evaluate(&model, &data.test, &[CueKind::Trajectory], &[], 0)?.summary_table("T only", None));
    print!("{}", clean.summary_table("T + P3d", None));
    let patterns = [
        ("keep half", EvalPattern::keep_fraction("T=0.5,P3d=0.5")?),
        ("random limb", EvalPattern::RandomLimb),
        ("right leg", EvalPattern::StructuredRightLeg),
        ("frame drop 50%", EvalPattern::FrameDrop(0.5)),
        ("pose noise 0.05", EvalPattern::GaussianNoise(0.05)),
    ];
    for (label, p) in patterns {
        let report = evaluate(&model, &data.test, &tp, &[p], 0)?;
        print!("{}", report.summary_table(label, Some(&clean)));
    }
    Ok(())
}
