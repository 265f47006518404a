use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::io::{scene_from_json, scene_to_json};
use super::*;
use crate::error::Error;

fn line(n: usize) -> Vec<[f64; 2]> {
    (0..n).map(|t| [t as f64 * 0.5, -(t as f64)]).collect()
}

fn simple_scene(t_obs: usize, horizon: usize) -> Scene {
    Scene {
        id: "s".into(),
        fps: 2.5,
        t_obs,
        horizon,
        agents: vec![Agent::new(Role::Primary, CueTensor::trajectory(&line(t_obs)))],
        future: line(horizon),
        latent: None,
    }
}

fn random_scene(seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t_obs = rng.gen_range(1..6);
    let horizon = rng.gen_range(1..5);
    let k = [1, 5, 9, 17][rng.gen_range(0..4)];
    let n = rng.gen_range(1..4);
    let mut agents = Vec::new();
    for i in 0..n {
        let role = if i == 0 { Role::Primary } else { Role::Neighbor };
        let traj: Vec<[f64; 2]> = (0..t_obs).map(|_| [rng.gen(), rng.gen::<f64>() * 1e3]).collect();
        let mut agent = Agent::new(role, CueTensor::trajectory(&traj));
        for kind in &CueKind::ALL[1..] {
            if rng.gen_bool(0.5) {
                let e = kind.elements(k);
                let values = (0..t_obs * e * kind.features()).map(|_| rng.gen_range(-3.0..3.0)).collect();
                let mut cue = CueTensor::new(*kind, t_obs, e, values).unwrap();
                for m in cue.mask.iter_mut() {
                    *m = rng.gen_bool(0.8);
                }
                agent.set_cue(cue);
            }
        }
        agents.push(agent);
    }
    Scene {
        id: format!("scene-{seed}"),
        fps: 2.5,
        t_obs,
        horizon,
        agents,
        future: (0..horizon).map(|_| [rng.gen_range(-9.0..9.0), 1.0 / 3.0]).collect(),
        latent: rng.gen_bool(0.5).then(|| SceneLatent {
            scenario: ScenarioKind::TurnWithPreview,
            heading: 0.1,
            speed: 1.0,
            turn: Some(TurnSchedule {
                start: t_obs,
                angle: -0.7,
                duration: 3,
            }),
        }),
    }
}

#[test]
fn trajectory_only_nine_by_twelve_is_accepted() {
    assert!(simple_scene(9, 12).validate().is_ok());
}

#[test]
fn two_trajectory_cues_are_rejected() {
    let mut s = simple_scene(9, 12);
    s.agents[0].cues.push(CueTensor::trajectory(&line(9)));
    match s.validate() {
        Err(Error::Validation { path, .. }) => assert_eq!(path, "agents[0].cues.T"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn pose_with_wrong_feature_count_is_rejected() {
    let mut s = simple_scene(9, 12);
    let mut cue = CueTensor::new(CueKind::Pose2d, 9, 17, vec![0.0; 9 * 17 * 2]).unwrap();
    cue.kind = CueKind::Pose3d;
    s.agents[0].cues.push(cue);
    match s.validate() {
        Err(Error::Validation { path, .. }) => assert_eq!(path, "agents[0].cues.P3d.features"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn structural_violations_name_their_field() {
    let mut s = simple_scene(4, 3);
    s.future.pop();
    assert!(matches!(s.validate(), Err(Error::Validation { path, .. }) if path == "future"));

    let mut s = simple_scene(4, 3);
    s.agents.push(Agent::new(Role::Primary, CueTensor::trajectory(&line(4))));
    assert!(matches!(s.validate(), Err(Error::Validation { path, .. }) if path == "agents[1].role"));

    let mut s = simple_scene(4, 3);
    s.agents[0].set_cue(CueTensor::new(CueKind::Box2d, 4, 3, vec![0.0; 24]).unwrap());
    assert!(matches!(s.validate(), Err(Error::Validation { path, .. }) if path == "agents[0].cues.B2d.elements"));

    let mut s = simple_scene(4, 3);
    s.agents[0].set_cue(CueTensor::new(CueKind::Pose3d, 4, 5, vec![0.0; 60]).unwrap());
    s.agents[0].set_cue(CueTensor::new(CueKind::Pose2d, 4, 9, vec![0.0; 72]).unwrap());
    assert!(matches!(s.validate(), Err(Error::Validation { path, .. }) if path == "agents[0].cues.P2d.elements"));

    let mut s = simple_scene(4, 3);
    s.agents[0].cues[0].values[3] = f64::NAN;
    assert!(s.clone().validate().is_err());
    s.agents[0].cues[0].set_available(1, 0, false);
    assert!(s.validate().is_ok(), "masked values carry no information");

    let s = Scene {
        agents: vec![],
        ..simple_scene(2, 2)
    };
    assert!(s.validate().is_err());
}

#[test]
fn duplicate_cue_keys_survive_parsing_and_fail_validation() {
    let json = r#"{"id":"d","fps":2.5,"t_obs":1,"t_pred":1,"agents":[{"role":"primary","cues":{"T":{"values":[[[0.0,0.0]]],"mask":[[true]]},"T":{"values":[[[1.0,0.0]]],"mask":[[true]]}}}],"future":[[1.0,1.0]]}"#;
    let scene = scene_from_json(json).unwrap();
    assert_eq!(scene.agents[0].cues.len(), 2);
    assert!(scene.validate().is_err());
}

#[test]
fn wire_format_field_names() {
    let s = simple_scene(2, 1);
    let json = scene_to_json(&s);
    assert_eq!(
        json,
        r#"{"id":"s","fps":2.5,"t_obs":2,"t_pred":1,"agents":[{"role":"primary","cues":{"T":{"values":[[[0.0,-0.0]],[[0.5,-1.0]]],"mask":[[true],[true]]}}}],"future":[[0.0,-0.0]]}"#
    );
}

#[test]
fn corpus_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let scenes: Vec<Scene> = (0..5).map(random_scene).collect();
    io::write_corpus(&path, &scenes).unwrap();
    assert_eq!(io::read_corpus(&path).unwrap(), scenes);
    std::fs::write(&path, "{\"id\": 3}\n").unwrap();
    assert!(matches!(io::read_corpus(&path), Err(Error::Json { line: 1, .. })));
}

proptest! {
    #[test]
    fn serialize_parse_serialize_is_byte_identical(seed in any::<u64>()) {
        let scene = random_scene(seed);
        prop_assert!(scene.check().is_ok());
        let a = scene_to_json(&scene);
        let parsed = scene_from_json(&a).unwrap();
        prop_assert_eq!(&parsed, &scene);
        prop_assert_eq!(scene_to_json(&parsed), a);
    }

    #[test]
    fn validation_is_idempotent(seed in any::<u64>()) {
        let scene = random_scene(seed);
        let once = scene.clone().validate().unwrap();
        let twice = once.clone().validate().unwrap();
        prop_assert_eq!(once, twice);
    }
}
