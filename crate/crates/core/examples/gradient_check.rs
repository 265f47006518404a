//! Compares analytic gradients of a tiny model against central differences.

use promptraj::datagen::{generate, ScenarioSpec};
use promptraj::model::{Model, ModelConfig};

fn main() -> promptraj::Result<()> {
    let spec = ScenarioSpec { keypoints: 5, t_obs: 4, horizon: 3, agents_min: 2, agents_max: 2, train: 1, val: 0, test: 0, ..ScenarioSpec::default() };
    let scene = generate(&spec)?.train.remove(0);
    let cfg = ModelConfig { width: 8, cmt_layers: 1, cmt_heads: 2, st_layers: 1, st_heads: 2, keypoints: 5, t_obs: 4, horizon: 3, ..ModelConfig::default() };
    let mut model = Model::new(cfg)?;
    let (loss, grads) = model.loss_and_grads(&scene)?;
    println!("loss {loss:.6}");

    let h = 1e-5;
    for id in model.params.ids().collect::<Vec<_>>() {
        let mut worst: f64 = 0.0;
        for j in 0..model.params.get(id).numel() {
            let orig = model.params.get(id).data()[j];
            model.params.get_mut(id).data_mut()[j] = orig + h;
            let plus = model.loss(&scene)?;
            model.params.get_mut(id).data_mut()[j] = orig - h;
            let minus = model.loss(&scene)?;
            model.params.get_mut(id).data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = grads.get(id).data()[j];
            worst = worst.max((numeric - analytic).abs() / numeric.abs().max(analytic.abs()).max(1e-6));
        }
        println!("{:<40} {worst:.2e}", model.params.name(id));
    }
    Ok(())
}
