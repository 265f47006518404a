//! Generates a small synthetic corpus, writes it as JSON lines and compares
//! the two oracle predictors on it.
//!
//!     cargo run --release --example generate_scenes -- /tmp/scenes

use std::path::PathBuf;

use promptraj::datagen::{expected_cv_ade, generate, oracle_predict, OracleKind, ScenarioMix, ScenarioSpec};
use promptraj::metrics::ade;

fn main() -> promptraj::Result<()> {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "scenes".into()).into();
    let spec = ScenarioSpec { train: 200, val: 20, test: 100, seed: 3, ..ScenarioSpec::default() };
    let corpus = generate(&spec)?;
    corpus.write_dir(&out, &spec)?;
    println!("wrote {} scenes to {}", corpus.train.len() + corpus.val.len() + corpus.test.len(), out.display());

    for kind in [ScenarioMix::ConstantVelocity, ScenarioMix::TurnWithPreview, ScenarioMix::SocialAvoidance] {
        let c = generate(&ScenarioSpec { kind, train: 0, val: 0, test: 300, ..spec.clone() })?;
        let mean_ade = |oracle: OracleKind| -> promptraj::Result<f64> {
            let mut sum = 0.0;
            for s in &c.test {
                sum += ade(&oracle_predict(s, oracle)?.positions, &s.future)?;
            }
            Ok(sum / c.test.len() as f64)
        };
        let mut line = format!("{:<8} cv-oracle ADE {:.3}", kind.to_string(), mean_ade(OracleKind::ConstantVelocity)?);
        if kind == ScenarioMix::TurnWithPreview {
            line += &format!("  turn-oracle ADE {:.3}", mean_ade(OracleKind::Turn)?);
        }
        println!("{line}");
    }
    println!("closed-form cv-oracle ADE on straight walks: {:.3}", expected_cv_ade(spec.noise, spec.horizon));
    Ok(())
}
