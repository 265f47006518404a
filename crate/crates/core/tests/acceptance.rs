//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::io::Write;
use std::time::{Duration, Instant};

use promptraj::attnviz::{spatial_map, temporal_map};
use promptraj::cli::ablate;
use promptraj::coretypes::{keypoint_layout, CueKind, Scene};
use promptraj::datagen::{generate, Corpus, ScenarioMix, ScenarioSpec};
use promptraj::masking::{restrict_cues, EvalPattern};
use promptraj::metrics::{ade, aswaee, aswaee_indices, fde, MetricReport, ASWAEE_TIMES};
use promptraj::model::{Model, ModelConfig, Variant};
use promptraj::nnkernel::Graph;
use promptraj::training::{evaluate, train, Protocol, TrainConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    format!("error: {e}")
}

fn small_model(keypoints: usize, width: usize) -> ModelConfig {
    ModelConfig {
        width,
        cmt_layers: 2,
        cmt_heads: 4,
        st_layers: 1,
        st_heads: 4,
        keypoints,
        seed: 1,
        ..ModelConfig::default()
    }
}

fn corpus(spec: ScenarioSpec) -> Result<Corpus, String> {
    generate(&spec).map_err(fail)
}

fn gradient_oracle() -> Outcome {
    let start = Instant::now();
    let spec = ScenarioSpec {
        keypoints: 5,
        t_obs: 4,
        horizon: 3,
        agents_min: 2,
        agents_max: 2,
        train: 1,
        val: 0,
        test: 0,
        seed: 11,
        ..ScenarioSpec::default()
    };
    let scene = corpus(spec)?.train.remove(0);
    let cfg = ModelConfig {
        width: 8,
        cmt_layers: 1,
        cmt_heads: 2,
        st_layers: 1,
        st_heads: 2,
        keypoints: 5,
        t_obs: 4,
        horizon: 3,
        seed: 5,
        ..ModelConfig::default()
    };
    let mut model = Model::new(cfg).map_err(fail)?;
    let (_, grads) = model.loss_and_grads(&scene).map_err(fail)?;
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for id in model.params.ids().collect::<Vec<_>>() {
        for j in 0..model.params.get(id).numel() {
            let orig = model.params.get(id).data()[j];
            model.params.get_mut(id).data_mut()[j] = orig + h;
            let plus = model.loss(&scene).map_err(fail)?;
            model.params.get_mut(id).data_mut()[j] = orig - h;
            let minus = model.loss(&scene).map_err(fail)?;
            model.params.get_mut(id).data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads.get(id).data()[j];
            let rel = (numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6);
            worst = worst.max(rel);
            count += 1;
        }
    }
    let took = start.elapsed();
    check(
        worst < 1e-4 && took < Duration::from_secs(120),
        format!("{count} parameters, worst relative error {worst:.2e}, {:.1}s", took.as_secs_f64()),
    )
}

fn random_subset(rng: &mut impl Rng) -> Vec<CueKind> {
    let mut kinds = vec![CueKind::Trajectory];
    kinds.extend(CueKind::ALL.iter().skip(1).filter(|_| rng.gen_bool(0.5)));
    kinds
}

fn token_count() -> Outcome {
    let scenes = corpus(ScenarioSpec { keypoints: 9, train: 100, val: 0, test: 0, seed: 21, agents_max: 4, ..Default::default() })?.train;
    let model = Model::new(small_model(9, 16)).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for s in &scenes {
        let subset = random_subset(&mut rng);
        let view = restrict_cues(s, &subset).map_err(fail)?;
        let mut g = Graph::new(&model.params);
        let out = model.build(&mut g, &view, false).map_err(fail)?;
        let per_agent = s.t_obs + s.horizon;
        if out.motion_lens.iter().any(|&l| l != per_agent) || out.social_len != Some(per_agent * s.agents.len()) {
            return Err(format!("{}: motion lengths {:?} with cues {subset:?}", s.id, out.motion_lens));
        }
    }
    Ok(format!("{} scenes, every agent contributes 21 tokens", scenes.len()))
}

fn masking_completeness() -> Outcome {
    let scenes = corpus(ScenarioSpec { keypoints: 9, train: 100, val: 0, test: 0, seed: 31, ..Default::default() })?.train;
    let model = Model::new(small_model(9, 16)).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for s in &scenes {
        let kind = *CueKind::ALL[1..].choose(&mut rng).unwrap();
        let (mut masked, mut omitted) = (s.clone(), s.clone());
        for a in masked.agents.iter_mut() {
            if let Some(c) = a.cue_mut(kind) {
                c.clear_mask();
            }
        }
        for a in omitted.agents.iter_mut() {
            a.remove_cue(kind);
        }
        let p = model.predict(&masked).map_err(fail)?;
        let q = model.predict(&omitted).map_err(fail)?;
        if p != q {
            return Err(format!("{}: masking {kind} differs from omitting it", s.id));
        }
    }
    Ok(format!("{} scenes bit-equal", scenes.len()))
}

fn permutation_invariance() -> Outcome {
    let spec = ScenarioSpec {
        kind: ScenarioMix::SocialAvoidance,
        keypoints: 9,
        agents_min: 3,
        agents_max: 5,
        train: 100,
        val: 0,
        test: 0,
        seed: 41,
        ..Default::default()
    };
    let scenes = corpus(spec)?.train;
    let model = Model::new(small_model(9, 16)).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for s in &scenes {
        let base = model.predict(s).map_err(fail)?;
        for _ in 0..10 {
            let mut p = s.clone();
            p.agents[1..].shuffle(&mut rng);
            let out = model.predict(&p).map_err(fail)?;
            for (a, b) in base.positions.iter().zip(&out.positions) {
                worst = worst.max((a[0] - b[0]).abs()).max((a[1] - b[1]).abs());
            }
        }
    }
    check(worst < 1e-9, format!("1000 permutations, max difference {worst:.2e}"))
}

fn overfit() -> Outcome {
    let start = Instant::now();
    let scenes = corpus(ScenarioSpec { keypoints: 5, train: 32, val: 0, test: 0, seed: 51, ..Default::default() })?.train;
    let mut model = Model::new(small_model(5, 32)).map_err(fail)?;
    let cfg = TrainConfig {
        epochs: 2000,
        lr: 1e-3,
        batch_size: 32,
        protocol: Protocol::Specific,
        cues: TP.to_vec(),
        ..TrainConfig::default()
    };
    let log = train(&mut model, &scenes, &[], &cfg).map_err(fail)?;
    let steps = log.epochs.last().map_or(0, |e| e.steps);
    let report = evaluate(&model, &scenes, &TP, &[], 0).map_err(fail)?;
    let took = start.elapsed();
    check(
        report.ade < 0.05 && steps == 2000 && took < Duration::from_secs(600),
        format!("{steps} steps, train ADE {:.4}, {:.0}s", report.ade, took.as_secs_f64()),
    )
}

/// Models shared by the pose, robustness and attention criteria.
struct Trained {
    generic: Model,
    specific: Model,
    turn_test: Vec<Scene>,
    mixed_test: Vec<Scene>,
    generic_time: Duration,
}

const TP: [CueKind; 2] = [CueKind::Trajectory, CueKind::Pose3d];

fn train_shared() -> Result<Trained, String> {
    let start = Instant::now();
    let data = corpus(ScenarioSpec { keypoints: 9, train: 5000, val: 200, test: 500, seed: 61, ..Default::default() })?;
    let turn_test = corpus(ScenarioSpec {
        kind: ScenarioMix::TurnWithPreview,
        keypoints: 9,
        train: 0,
        val: 0,
        test: 500,
        seed: 62,
        ..Default::default()
    })?
    .test;
    let base = TrainConfig { epochs: 12, lr: 1e-3, seed: 7, ..TrainConfig::default() };
    let mut generic = Model::new(small_model(9, 32)).map_err(fail)?;
    train(&mut generic, &data.train, &data.val, &base).map_err(fail)?;
    let generic_time = start.elapsed();
    let mut specific = Model::new(small_model(9, 32)).map_err(fail)?;
    let cfg = TrainConfig { protocol: Protocol::Specific, cues: TP.to_vec(), ..base };
    train(&mut specific, &data.train, &data.val, &cfg).map_err(fail)?;
    Ok(Trained { generic, specific, turn_test, mixed_test: data.test, generic_time })
}

fn pose_benefit(t: &Trained) -> Outcome {
    let start = Instant::now();
    let only_t = evaluate(&t.generic, &t.turn_test, &[CueKind::Trajectory], &[], 0).map_err(fail)?;
    let with_pose = evaluate(&t.generic, &t.turn_test, &TP, &[], 0).map_err(fail)?;
    let took = t.generic_time + start.elapsed();
    check(
        with_pose.ade <= 0.95 * only_t.ade && took < Duration::from_secs(3600),
        format!(
            "turn split ADE {{T}} {:.3}, {{T,P3d}} {:.3} (ratio {:.3}), {:.0}s",
            only_t.ade,
            with_pose.ade,
            with_pose.ade / only_t.ade,
            took.as_secs_f64()
        ),
    )
}

fn robustness(t: &Trained) -> Outcome {
    let keep = EvalPattern::keep_fraction("T=0.5,P3d=0.5").map_err(fail)?;
    let degradation = |m: &Model| -> Result<(f64, f64), String> {
        let clean = evaluate(m, &t.mixed_test, &TP, &[], 0).map_err(fail)?;
        let masked = evaluate(m, &t.mixed_test, &TP, &[keep.clone()], 0).map_err(fail)?;
        let d = masked.degradation(&clean);
        Ok((d.ade, d.fde))
    };
    let (ga, gf) = degradation(&t.generic)?;
    let (sa, sf) = degradation(&t.specific)?;
    check(
        ga < sa && gf < sf,
        format!("degradation ADE generic {ga:.1}% vs specific {sa:.1}%, FDE generic {gf:.1}% vs specific {sf:.1}%"),
    )
}

fn frame_drop_equivalence(t: &Trained) -> Outcome {
    let poses = [CueKind::Trajectory, CueKind::Pose3d, CueKind::Pose2d];
    let scenes = &t.mixed_test[..200];
    let dropped = evaluate(&t.generic, scenes, &poses, &[EvalPattern::FrameDrop(1.0)], 0).map_err(fail)?;
    let only_t = evaluate(&t.generic, scenes, &[CueKind::Trajectory], &[], 0).map_err(fail)?;
    check(dropped == only_t, format!("ADE {:.6} vs {:.6}", dropped.ade, only_t.ade))
}

fn brute_force(pred: &[[f64; 2]], truth: &[[f64; 2]], fps: f64) -> (f64, f64, f64) {
    let dist = |i: usize| ((pred[i][0] - truth[i][0]).powi(2) + (pred[i][1] - truth[i][1]).powi(2)).sqrt();
    let n = pred.len();
    let mut total = 0.0;
    for i in 0..n {
        total += dist(i);
    }
    let mut picked = 0.0;
    for t in ASWAEE_TIMES {
        let idx = (t * fps + 0.5).floor() as usize - 1;
        picked += dist(idx);
    }
    (total / n as f64, dist(n - 1), picked / ASWAEE_TIMES.len() as f64)
}

fn metric_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mut pts = || (0..12).map(|_| [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0)]).collect::<Vec<_>>();
        let (p, q) = (pts(), pts());
        let (a, f, w) = brute_force(&p, &q, 2.5);
        worst = worst
            .max((ade(&p, &q).map_err(fail)? - a).abs())
            .max((fde(&p, &q).map_err(fail)? - f).abs())
            .max((aswaee(&p, &q, 2.5, &ASWAEE_TIMES).map_err(fail)? - w).abs());
    }
    let idx = aswaee_indices(25.0, &ASWAEE_TIMES, 63).map_err(fail)?;
    check(
        worst <= 1e-12 && idx == [10, 23, 36, 49, 62],
        format!("max difference {worst:.1e}, indices at 25 fps {idx:?}"),
    )
}

fn determinism() -> Outcome {
    let data = corpus(ScenarioSpec { keypoints: 5, train: 48, val: 8, test: 16, seed: 71, ..Default::default() })?;
    let run = || -> Result<_, String> {
        let mut model = Model::new(small_model(5, 16)).map_err(fail)?;
        let cfg = TrainConfig { epochs: 3, lr: 1e-3, batch_size: 8, seed: 3, ..TrainConfig::default() };
        let log = train(&mut model, &data.train, &data.val, &cfg).map_err(fail)?;
        let keep = EvalPattern::keep_fraction("T=0.5,P3d=0.5").map_err(fail)?;
        let report: MetricReport = evaluate(&model, &data.test, &CueKind::ALL, &[keep], 5).map_err(fail)?;
        Ok((log, report))
    };
    let (a, b) = (run()?, run()?);
    check(a == b, format!("run logs equal {}, reports equal {}", a.0 == b.0, a.1 == b.1))
}

fn ablation_suite() -> Outcome {
    let data = corpus(ScenarioSpec { keypoints: 5, agents_min: 2, train: 64, val: 0, test: 32, seed: 81, ..Default::default() })?;
    let cfg = TrainConfig { lr: 1e-3, batch_size: 8, seed: 1, ..TrainConfig::default() };
    let rows = ablate(&small_model(5, 16), &cfg, 200, &data.train, &data.test).map_err(fail)?;
    let names: Vec<&str> = rows.iter().map(|r| r.variant.name()).collect();
    if rows.len() != 4 || rows.iter().any(|r| !r.final_loss.is_finite() || !r.report.ade.is_finite()) {
        return Err(format!("variants {names:?} with losses {:?}", rows.iter().map(|r| r.final_loss).collect::<Vec<_>>()));
    }
    let model = Model::new(ModelConfig { variant: Variant::CmtOnly, ..small_model(5, 16) }).map_err(fail)?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for s in &data.test {
        let base = model.predict(s).map_err(fail)?;
        let mut edited = s.clone();
        for a in edited.agents[1..].iter_mut() {
            for c in a.cues.iter_mut() {
                for t in 0..c.steps {
                    for e in 0..c.elements {
                        c.feature_mut(t, e).iter_mut().for_each(|v| *v += rng.gen_range(-3.0..3.0));
                    }
                }
            }
        }
        if model.predict(&edited).map_err(fail)? != base {
            return Err(format!("{}: CMT prediction moved after a neighbor edit", s.id));
        }
    }
    Ok(format!("{names:?} finite after 200 steps, CMT ignores neighbor edits"))
}

fn attention_maps(t: &Trained) -> Outcome {
    let layout = keypoint_layout(9).map_err(fail)?;
    let mut temporal = Vec::new();
    for s in &t.turn_test[..100] {
        let view = restrict_cues(s, &TP).map_err(fail)?;
        let (_, capture) = t.generic.forward(&view).map_err(fail)?;
        let capture = capture.ok_or("no attention captured")?;
        let tm = temporal_map(&capture).map_err(fail)?;
        let sm = spatial_map(&capture, layout).map_err(fail)?.ok_or("no pose tokens")?;
        for m in [&tm, &sm] {
            let sum: f64 = m.iter().sum();
            if m.iter().any(|&v| v < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(format!("{}: map sums to {sum}", s.id));
            }
        }
        temporal.push(tm);
    }
    let n = temporal.len() as f64;
    let steps = temporal[0].len();
    let mean = |r: std::ops::Range<usize>| temporal.iter().map(|m| m[r.clone()].iter().sum::<f64>()).sum::<f64>() / n;
    let (first, last) = (mean(0..3), mean(steps - 3..steps));
    check(last > first, format!("mass on first 3 frames {first:.3}, last 3 frames {last:.3}"))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, outcome: Outcome| {
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {n:>2} {name}: {tag} ({detail})");
        let _ = std::io::stdout().flush();
    };
    report(1, "gradient oracle", gradient_oracle());
    report(2, "token count", token_count());
    report(3, "masking completeness", masking_completeness());
    report(4, "neighbor permutation", permutation_invariance());
    report(5, "overfit", overfit());
    let shared = train_shared();
    let on_shared = |f: fn(&Trained) -> Outcome| shared.as_ref().map_err(Clone::clone).and_then(f);
    let pose = on_shared(pose_benefit);
    let robust = on_shared(robustness);
    let dropped = on_shared(frame_drop_equivalence);
    let attention = on_shared(attention_maps);
    report(6, "pose benefit", pose);
    report(7, "robustness ordering", robust);
    report(8, "frame-drop equivalence", dropped);
    report(9, "metric oracles", metric_oracles());
    report(10, "determinism", determinism());
    report(11, "ablation suite", ablation_suite());
    report(12, "attention maps", attention);
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
