//! SVG overlay of observed, true and predicted trajectories.

use std::fmt::Write as _;

use crate::coretypes::{PredictionY, Scene};

const SIZE: f64 = 480.0;
const MARGIN: f64 = 30.0;

fn polyline(s: &mut String, pts: &[[f64; 2]], map: &dyn Fn([f64; 2]) -> (f64, f64), style: &str) {
    if pts.is_empty() {
        return;
    }
    let coords: Vec<String> = pts
        .iter()
        .map(|p| {
            let (x, y) = map(*p);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let _ = writeln!(s, r#"<polyline points="{}" fill="none" {style}/>"#, coords.join(" "));
}

/// Top-down view of one scene: neighbors in grey, the primary's observed
/// track in blue, ground truth in green and the prediction in red.
pub fn trajectory_svg(scene: &Scene, pred: Option<&PredictionY>) -> String {
    let observed = |i: usize| -> Vec<[f64; 2]> {
        scene.agents[i]
            .trajectory()
            .map(|t| (0..t.steps).filter_map(|s| t.position(s)).collect())
            .unwrap_or_default()
    };
    let mut all: Vec<[f64; 2]> = (0..scene.agents.len()).flat_map(observed).collect();
    all.extend_from_slice(&scene.future);
    if let Some(p) = pred {
        all.extend_from_slice(&p.positions);
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in all.iter().filter(|p| p[0].is_finite() && p[1].is_finite()) {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    }
    if !lo[0].is_finite() {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-6);
    let scale = (SIZE - 2.0 * MARGIN) / span;
    let map = move |p: [f64; 2]| (MARGIN + (p[0] - lo[0]) * scale, SIZE - MARGIN - (p[1] - lo[1]) * scale);

    let mut s = format!(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" font-family="sans-serif" font-size="11">"#
    );
    s.push('\n');
    let _ = writeln!(s, r#"<text x="8" y="16">{}</text>"#, crate::attnviz::escape(&scene.id));
    for i in 1..scene.agents.len() {
        polyline(&mut s, &observed(i), &map, r##"stroke="#999" stroke-width="1.5""##);
    }
    let obs = observed(0);
    polyline(&mut s, &obs, &map, r##"stroke="#1f5fbf" stroke-width="2""##);
    let mut truth = obs.last().map(|p| vec![*p]).unwrap_or_default();
    truth.extend_from_slice(&scene.future);
    polyline(&mut s, &truth, &map, r##"stroke="#2a9d3a" stroke-width="2""##);
    if let Some(p) = pred {
        let mut line = obs.last().map(|p| vec![*p]).unwrap_or_default();
        line.extend_from_slice(&p.positions);
        polyline(&mut s, &line, &map, r##"stroke="#d62728" stroke-width="2" stroke-dasharray="5,3""##);
    }
    for (label, color, y) in [("observed", "#1f5fbf", 34), ("ground truth", "#2a9d3a", 50), ("prediction", "#d62728", 66), ("neighbors", "#999", 82)] {
        let _ = writeln!(s, r#"<rect x="8" y="{}" width="10" height="4" fill="{color}"/><text x="24" y="{y}">{label}</text>"#, y - 5);
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coretypes::{Agent, CueTensor, Role};

    #[test]
    fn overlay_has_one_line_per_track() {
        let traj = |dy: f64| CueTensor::trajectory(&[[0.0, dy], [1.0, dy], [2.0, dy]]);
        let scene = Scene {
            id: "a<b".into(),
            fps: 2.5,
            t_obs: 3,
            horizon: 2,
            agents: vec![Agent::new(Role::Primary, traj(0.0)), Agent::new(Role::Neighbor, traj(2.0))],
            future: vec![[3.0, 0.0], [4.0, 0.0]],
            latent: None,
        };
        let pred = PredictionY { positions: vec![[3.0, 0.5], [4.0, 1.0]] };
        let svg = trajectory_svg(&scene, Some(&pred));
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(trajectory_svg(&scene, None).matches("<polyline").count(), 3);
    }
}
