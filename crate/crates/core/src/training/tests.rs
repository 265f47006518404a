use super::*;
use crate::datagen::{generate, ScenarioMix, ScenarioSpec};
use crate::model::ModelConfig;

fn corpus(n: usize) -> (Vec<Scene>, Vec<Scene>) {
    let c = generate(&ScenarioSpec {
        kind: ScenarioMix::Mixed,
        keypoints: 5,
        agents_max: 2,
        train: n,
        val: 4,
        test: 0,
        seed: 5,
        ..ScenarioSpec::default()
    })
    .unwrap();
    (c.train, c.val)
}

fn tiny() -> Model {
    Model::new(ModelConfig {
        width: 16,
        cmt_layers: 1,
        cmt_heads: 2,
        st_layers: 1,
        st_heads: 2,
        keypoints: 5,
        seed: 1,
        ..ModelConfig::default()
    })
    .unwrap()
}

fn quick(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        lr: 1e-3,
        batch_size: 4,
        seed: 9,
        ..TrainConfig::default()
    }
}

#[test]
fn mse_hand_values() {
    let truth = vec![[1.0, 2.0]; 12];
    let same = PredictionY { positions: truth.clone() };
    assert_eq!(mse_loss(&same, &truth).unwrap(), 0.0);
    let shifted = PredictionY { positions: vec![[2.0, 3.0]; 12] };
    assert_eq!(mse_loss(&shifted, &truth).unwrap(), 1.0);
    let mut one = truth.clone();
    one[4][1] += 2.0;
    assert_eq!(mse_loss(&PredictionY { positions: one }, &truth).unwrap(), 4.0 / 24.0);
    assert!(mse_loss(&same, &truth[1..]).is_err());
}

#[test]
fn default_schedule_decays_after_forty_epochs() {
    let cfg = TrainConfig::default();
    assert_eq!(cfg.decay_epoch(), 40);
    assert!((0..40).all(|e| cfg.lr_at(e) == 1e-4));
    assert!((40..50).all(|e| (cfg.lr_at(e) - 1e-5).abs() < 1e-20));
    let odd = TrainConfig { epochs: 7, ..TrainConfig::default() };
    assert_eq!(odd.decay_epoch(), 5);
}

#[test]
fn loss_on_a_fixed_batch_falls_for_ten_steps() {
    let (train_set, _) = corpus(4);
    let mut model = tiny();
    let cfg = TrainConfig {
        epochs: 10,
        lr: 1e-4,
        decay_at: 1.0,
        batch_size: 4,
        mask: MaskPolicy::off(),
        ..TrainConfig::default()
    };
    let log = train(&mut model, &train_set, &[], &cfg).unwrap();
    let losses: Vec<f64> = log.epochs.iter().map(|e| e.train_loss).collect();
    assert_eq!(losses.len(), 10);
    for w in losses.windows(2) {
        assert!(w[1] < w[0], "{losses:?}");
    }
}

#[test]
fn same_seed_gives_identical_runs() {
    let (train_set, val) = corpus(8);
    let run = || {
        let mut m = tiny();
        let log = train(&mut m, &train_set, &val, &quick(3)).unwrap();
        let report = evaluate(&m, &val, &CueKind::ALL, &[EvalPattern::RandomLimb], 3).unwrap();
        (log, report, m.params)
    };
    assert_eq!(run(), run());
}

#[test]
fn best_validation_epoch_is_kept() {
    let (train_set, val) = corpus(8);
    let mut m = tiny();
    let log = train(&mut m, &train_set, &val, &quick(4)).unwrap();
    let best = log
        .epochs
        .iter()
        .min_by(|a, b| a.val_ade.unwrap().total_cmp(&b.val_ade.unwrap()))
        .unwrap();
    assert_eq!(log.best_epoch, Some(best.epoch));
    let r = evaluate(&m, &val, &CueKind::ALL, &[], 0).unwrap();
    assert_eq!(Some(r.ade), best.val_ade);
    assert!(log.epochs.windows(2).all(|w| w[1].epoch == w[0].epoch + 1));
}

#[test]
fn max_steps_stops_mid_epoch() {
    let (train_set, _) = corpus(8);
    let mut m = tiny();
    let cfg = TrainConfig { max_steps: Some(3), ..quick(10) };
    let log = train(&mut m, &train_set, &[], &cfg).unwrap();
    assert_eq!(log.epochs.len(), 2);
    assert_eq!(log.epochs.last().unwrap().steps, 3);
}

#[test]
fn diverging_loss_aborts_with_diagnostics() {
    let (mut train_set, _) = corpus(4);
    train_set[2].future[0] = [1e200, 0.0];
    let mut m = tiny();
    match train(&mut m, &train_set, &[], &quick(2)) {
        Err(Error::NonFiniteLoss { epoch, batch, lr, .. }) => {
            assert_eq!((epoch, batch), (0, 0));
            assert_eq!(lr, 1e-3);
        }
        other => panic!("expected a non-finite loss, got {other:?}"),
    }
}

#[test]
fn checkpoint_round_trip_reproduces_the_report() {
    let (train_set, val) = corpus(4);
    let dir = tempfile::tempdir().unwrap();
    let mut m = tiny();
    let log = train_to_dir(&mut m, &train_set, &val, &quick(2), dir.path()).unwrap();
    assert!(log.checkpoint.unwrap().exists());
    assert!(dir.path().join("runlog.csv").exists());
    let loaded = Model::load(dir.path()).unwrap();
    let subset = [CueKind::Trajectory, CueKind::Pose3d];
    let pats = [EvalPattern::keep_fraction("T=0.5,P3d=0.5").unwrap()];
    assert_eq!(
        evaluate(&m, &val, &subset, &pats, 1).unwrap(),
        evaluate(&loaded, &val, &subset, &pats, 1).unwrap()
    );
}

#[test]
fn config_errors() {
    let (train_set, val) = corpus(2);
    let m = tiny();
    assert!(matches!(evaluate(&m, &val, &[CueKind::Pose3d], &[], 0), Err(Error::Config(_))));
    let mut m2 = tiny();
    assert!(train(&mut m2, &[], &val, &quick(1)).is_err());
    assert!(train(&mut m2, &train_set, &val, &TrainConfig { epochs: 0, ..quick(1) }).is_err());
    let specific = TrainConfig { protocol: Protocol::Specific, cues: vec![CueKind::Pose3d], ..quick(1) };
    assert!(train(&mut m2, &train_set, &val, &specific).is_err());
    let bare: Vec<Scene> = val.iter().map(|s| restrict_cues(s, &[CueKind::Trajectory]).unwrap()).collect();
    assert!(check_subset(&bare, &[CueKind::Trajectory]).is_ok());
    assert!(check_subset(&bare, &[CueKind::Trajectory, CueKind::Pose2d]).is_err());
}

#[test]
fn specific_protocol_sees_only_its_subset() {
    let (train_set, _) = corpus(1);
    let cfg = TrainConfig {
        protocol: Protocol::Specific,
        cues: vec![CueKind::Trajectory, CueKind::Pose3d],
        ..quick(1)
    };
    let view = training_view(&train_set[0], &cfg, 0, 0).unwrap();
    assert_eq!(view.cue_kinds(), vec![CueKind::Trajectory, CueKind::Pose3d]);
    for (a, b) in view.agents.iter().zip(&train_set[0].agents) {
        assert_eq!(a.cue(CueKind::Pose3d), b.cue(CueKind::Pose3d));
    }
}

#[test]
fn config_text_round_trip() {
    let cfg = TrainConfig { protocol: Protocol::Specific, max_steps: Some(20), ..TrainConfig::default() };
    assert_eq!(TrainConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    assert!(TrainConfig::from_toml("epoch = 3").is_err());
}
