//! Displacement metrics and report aggregation.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default evaluation times in seconds for [`aswaee`].
pub const ASWAEE_TIMES: [f64; 5] = [0.44, 0.96, 1.48, 2.00, 2.52];

fn check_shapes(pred: &[[f64; 2]], truth: &[[f64; 2]]) -> Result<()> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Dimension {
            op: "metric",
            left: vec![pred.len(), 2],
            right: vec![truth.len(), 2],
        });
    }
    Ok(())
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Mean Euclidean error over the horizon.
pub fn ade(pred: &[[f64; 2]], truth: &[[f64; 2]]) -> Result<f64> {
    check_shapes(pred, truth)?;
    let total: f64 = pred.iter().zip(truth).map(|(p, t)| dist(*p, *t)).sum();
    Ok(total / pred.len() as f64)
}

/// Euclidean error at the last step.
pub fn fde(pred: &[[f64; 2]], truth: &[[f64; 2]]) -> Result<f64> {
    check_shapes(pred, truth)?;
    let h = pred.len() - 1;
    Ok(dist(pred[h], truth[h]))
}

/// Prediction-window indices for evaluation times: `round(t * fps) - 1`.
pub fn aswaee_indices(fps: f64, times: &[f64], horizon: usize) -> Result<Vec<usize>> {
    times
        .iter()
        .map(|&t| {
            let step = (t * fps).round();
            if step < 1.0 || step > horizon as f64 {
                Err(Error::Range(format!(
                    "time {t}s at {fps} fps maps to step {step}, outside 1..={horizon}"
                )))
            } else {
                Ok(step as usize - 1)
            }
        })
        .collect()
}

/// Mean error at the steps matching `times`.
pub fn aswaee(pred: &[[f64; 2]], truth: &[[f64; 2]], fps: f64, times: &[f64]) -> Result<f64> {
    check_shapes(pred, truth)?;
    if times.is_empty() {
        return Err(Error::Range("no evaluation times".into()));
    }
    let idx = aswaee_indices(fps, times, pred.len())?;
    Ok(idx.iter().map(|&i| dist(pred[i], truth[i])).sum::<f64>() / idx.len() as f64)
}

/// `100 * (value - reference) / reference`.
pub fn degradation_pct(value: f64, reference: f64) -> f64 {
    100.0 * (value - reference) / reference
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub id: String,
    pub ade: f64,
    pub fde: f64,
    pub aswaee: f64,
}

impl SceneMetrics {
    pub fn compute(id: &str, pred: &[[f64; 2]], truth: &[[f64; 2]], fps: f64) -> Result<Self> {
        Ok(SceneMetrics {
            id: id.to_string(),
            ade: ade(pred, truth)?,
            fde: fde(pred, truth)?,
            aswaee: aswaee(pred, truth, fps, &ASWAEE_TIMES)?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Degradation {
    pub ade: f64,
    pub fde: f64,
    pub aswaee: f64,
}

/// Corpus-level means plus the per-scene breakdown.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub ade: f64,
    pub fde: f64,
    pub aswaee: f64,
    pub per_scene: Vec<SceneMetrics>,
}

impl MetricReport {
    pub fn from_scenes(per_scene: Vec<SceneMetrics>) -> Result<Self> {
        if per_scene.is_empty() {
            return Err(Error::Contract("metric report over zero scenes".into()));
        }
        let n = per_scene.len() as f64;
        let mean = |f: fn(&SceneMetrics) -> f64| per_scene.iter().map(f).sum::<f64>() / n;
        Ok(MetricReport {
            ade: mean(|s| s.ade),
            fde: mean(|s| s.fde),
            aswaee: mean(|s| s.aswaee),
            per_scene,
        })
    }

    pub fn degradation(&self, reference: &MetricReport) -> Degradation {
        Degradation {
            ade: degradation_pct(self.ade, reference.ade),
            fde: degradation_pct(self.fde, reference.fde),
            aswaee: degradation_pct(self.aswaee, reference.aswaee),
        }
    }

    /// Per-scene rows followed by a `mean` row.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("scene,ade,fde,aswaee\n");
        for m in &self.per_scene {
            let _ = writeln!(s, "{},{},{},{}", m.id, m.ade, m.fde, m.aswaee);
        }
        let _ = writeln!(s, "mean,{},{},{}", self.ade, self.fde, self.aswaee);
        s
    }

    pub fn summary_table(&self, label: &str, reference: Option<&MetricReport>) -> String {
        let mut s = format!("{:<24} {:>8} {:>8} {:>8}\n", "", "ADE", "FDE", "ASWAEE");
        let _ = writeln!(s, "{:<24} {:>8.4} {:>8.4} {:>8.4}", label, self.ade, self.fde, self.aswaee);
        if let Some(r) = reference {
            let d = self.degradation(r);
            let _ = writeln!(s, "{:<24} {:>7.1}% {:>7.1}% {:>7.1}%", "vs reference", d.ade, d.fde, d.aswaee);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn hand_values() {
        let truth = [[0.0, 0.0], [1.0, 1.0]];
        assert_eq!(ade(&truth, &truth).unwrap(), 0.0);
        assert_eq!(ade(&[[1.0, 0.0], [2.0, 1.0]], &truth).unwrap(), 1.0);
        assert_eq!(ade(&[[0.0, 0.0], [4.0, 5.0]], &truth).unwrap(), 2.5);
        assert_eq!(fde(&[[9.0, 9.0], [4.0, 5.0]], &truth).unwrap(), 5.0);
        assert!(matches!(ade(&truth, &truth[..1]), Err(Error::Dimension { .. })));
        assert!(fde(&[], &[]).is_err());
    }

    #[test]
    fn default_indices_at_25_fps() {
        assert_eq!(aswaee_indices(25.0, &ASWAEE_TIMES, 63).unwrap(), vec![10, 23, 36, 49, 62]);
        assert!(matches!(aswaee_indices(25.0, &ASWAEE_TIMES, 62), Err(Error::Range(_))));
        assert!(aswaee_indices(25.0, &[0.01], 63).is_err());
    }

    #[test]
    fn single_time_at_last_step_is_fde() {
        let pred = [[0.0, 1.0], [2.0, 2.0], [3.0, -1.0]];
        let truth = [[0.0, 0.0], [1.0, 1.0], [0.0, 3.0]];
        assert_eq!(aswaee(&pred, &truth, 2.5, &[1.2]).unwrap(), fde(&pred, &truth).unwrap());
        assert_eq!(aswaee(&truth, &truth, 2.5, &[0.4, 1.2]).unwrap(), 0.0);
    }

    #[test]
    fn degradation_and_report() {
        assert!((degradation_pct(1.2, 1.0) - 20.0).abs() < 1e-9);
        assert_eq!(degradation_pct(0.5, 1.0), -50.0);
        let a = SceneMetrics { id: "a".into(), ade: 1.0, fde: 2.0, aswaee: 1.5 };
        let b = SceneMetrics { id: "b".into(), ade: 3.0, fde: 4.0, aswaee: 2.5 };
        let r = MetricReport::from_scenes(vec![a, b]).unwrap();
        assert_eq!((r.ade, r.fde, r.aswaee), (2.0, 3.0, 2.0));
        assert_eq!(r.to_csv(), "scene,ade,fde,aswaee\na,1,2,1.5\nb,3,4,2.5\nmean,2,3,2\n");
        assert!(MetricReport::from_scenes(vec![]).is_err());
    }

    fn traj(h: usize) -> impl Strategy<Value = Vec<[f64; 2]>> {
        prop::collection::vec(prop::array::uniform2(-50.0..50.0f64), h)
    }

    proptest! {
        #[test]
        fn ade_is_bounded_by_step_errors(pair in (1usize..20).prop_flat_map(|h| (traj(h), traj(h)))) {
            let (p, t) = pair;
            let errs: Vec<f64> = p.iter().zip(&t).map(|(a, b)| dist(*a, *b)).collect();
            let v = ade(&p, &t).unwrap();
            let lo = errs.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = errs.iter().cloned().fold(0.0, f64::max);
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            prop_assert_eq!(fde(&p, &t).unwrap(), *errs.last().unwrap());
        }

        #[test]
        fn metrics_ignore_common_translation(
            pair in (12usize..13).prop_flat_map(|h| (traj(h), traj(h))),
            dx in -100.0..100.0f64, dy in -100.0..100.0f64,
        ) {
            let (p, t) = pair;
            let shift = |v: &[[f64; 2]]| v.iter().map(|a| [a[0] + dx, a[1] + dy]).collect::<Vec<_>>();
            let (ps, ts) = (shift(&p), shift(&t));
            prop_assert!((ade(&p, &t).unwrap() - ade(&ps, &ts).unwrap()).abs() < 1e-9);
            prop_assert!((fde(&p, &t).unwrap() - fde(&ps, &ts).unwrap()).abs() < 1e-9);
            let a0 = aswaee(&p, &t, 2.5, &ASWAEE_TIMES).unwrap();
            let a1 = aswaee(&ps, &ts, 2.5, &ASWAEE_TIMES).unwrap();
            prop_assert!((a0 - a1).abs() < 1e-9);
        }
    }
}
