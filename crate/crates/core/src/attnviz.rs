//! Temporal and spatial attention maps of the cross-modality encoder.

use std::fmt::Write as _;
use std::path::Path;

use crate::coretypes::{CueKind, KeypointLayout};
use crate::embedding::TokenInfo;
use crate::error::{Error, Result};
use crate::nnkernel::AttentionWeights;

/// Per-layer attention weights of the primary agent's CMT pass together
/// with the provenance of each token position.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionCapture {
    pub layers: Vec<AttentionWeights>,
    pub provenance: Vec<TokenInfo>,
}

/// Which attention rows are aggregated into a map.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RowSelection {
    /// Rows of the latent query tokens, which drive the prediction.
    #[default]
    Queries,
    /// Every row of the sequence.
    AllTokens,
}

impl AttentionCapture {
    fn check(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Contract("no attention was captured".into()));
        }
        for l in &self.layers {
            if l.rows != self.provenance.len() || l.cols != self.provenance.len() {
                return Err(Error::Contract("capture shape does not match provenance".into()));
            }
        }
        Ok(())
    }

    fn observed_steps(&self) -> usize {
        self.provenance
            .iter()
            .filter(|p| p.cue.is_none())
            .map(|p| p.time)
            .min()
            .unwrap_or_else(|| self.provenance.iter().map(|p| p.time + 1).max().unwrap_or(0))
    }

    /// Sums attention mass over layers, heads and selected rows into bins
    /// chosen by `bin` for each source column.
    fn aggregate(
        &self,
        rows: RowSelection,
        bins: usize,
        bin: impl Fn(&TokenInfo) -> Option<usize>,
    ) -> Vec<f64> {
        let selected: Vec<usize> = (0..self.provenance.len())
            .filter(|&r| rows == RowSelection::AllTokens || self.provenance[r].cue.is_none())
            .collect();
        let targets: Vec<(usize, usize)> = self
            .provenance
            .iter()
            .enumerate()
            .filter_map(|(c, p)| bin(p).map(|b| (c, b)))
            .collect();
        let mut out = vec![0.0; bins];
        for layer in &self.layers {
            for h in 0..layer.heads {
                for &r in &selected {
                    let row = layer.row(h, r);
                    for &(c, b) in &targets {
                        out[b] += row[c];
                    }
                }
            }
        }
        out
    }
}

fn normalize(mut v: Vec<f64>) -> Option<Vec<f64>> {
    let total: f64 = v.iter().sum();
    if total <= 0.0 {
        return None;
    }
    v.iter_mut().for_each(|x| *x /= total);
    Some(v)
}

/// Attention mass per observed time step, flowing from the query tokens to
/// trajectory and pose tokens. Sums to one.
pub fn temporal_map(capture: &AttentionCapture) -> Result<Vec<f64>> {
    temporal_map_with(capture, RowSelection::Queries)
}

pub fn temporal_map_with(capture: &AttentionCapture, rows: RowSelection) -> Result<Vec<f64>> {
    capture.check()?;
    let steps = capture.observed_steps();
    let mass = capture.aggregate(rows, steps, |p| match p.cue {
        Some(CueKind::Trajectory | CueKind::Pose3d | CueKind::Pose2d) if p.time < steps => {
            Some(p.time)
        }
        _ => None,
    });
    normalize(mass).ok_or_else(|| Error::Contract("no trajectory or pose tokens attended".into()))
}

/// Attention mass per keypoint from query tokens to pose tokens, or `None`
/// when the capture holds no pose tokens.
pub fn spatial_map(capture: &AttentionCapture, layout: &KeypointLayout) -> Result<Option<Vec<f64>>> {
    spatial_map_with(capture, layout, RowSelection::Queries)
}

pub fn spatial_map_with(
    capture: &AttentionCapture,
    layout: &KeypointLayout,
    rows: RowSelection,
) -> Result<Option<Vec<f64>>> {
    capture.check()?;
    let k = layout.len();
    if let Some(p) = capture
        .provenance
        .iter()
        .find(|p| p.cue.is_some_and(CueKind::is_pose) && p.element >= k)
    {
        return Err(Error::Contract(format!(
            "pose token for keypoint {} outside a {k}-keypoint layout",
            p.element
        )));
    }
    let mass = capture.aggregate(rows, k, |p| match p.cue {
        Some(c) if c.is_pose() => Some(p.element),
        _ => None,
    });
    Ok(normalize(mass))
}

/// Element-wise mean of equally long maps.
pub fn mean_map(maps: &[Vec<f64>]) -> Option<Vec<f64>> {
    let first = maps.first()?;
    let mut out = vec![0.0; first.len()];
    for m in maps {
        for (o, v) in out.iter_mut().zip(m) {
            *o += v / maps.len() as f64;
        }
    }
    Some(out)
}

/// CSV with a header row of column labels and one labelled row per map.
pub fn matrix_csv(col_labels: &[String], rows: &[(String, Vec<f64>)]) -> String {
    let mut s = String::from("row");
    for c in col_labels {
        s.push(',');
        s.push_str(c);
    }
    s.push('\n');
    for (label, values) in rows {
        s.push_str(label);
        for v in values {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

/// Heatmap of a labelled matrix; cell shade is proportional to the value
/// relative to the row maximum.
pub fn heatmap_svg(title: &str, col_labels: &[String], rows: &[(String, Vec<f64>)]) -> String {
    let cell = 28.0;
    let left = 150.0;
    let top = 50.0;
    let bottom = 90.0;
    let width = left + cell * col_labels.len() as f64 + 20.0;
    let height = top + cell * rows.len() as f64 + bottom;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="10" y="20" font-size="14">{}</text>"#, escape(title));
    for (r, (label, values)) in rows.iter().enumerate() {
        let y = top + r as f64 * cell;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + cell * 0.65,
            escape(label)
        );
        let max = values.iter().copied().fold(0.0, f64::max);
        for (c, v) in values.iter().enumerate() {
            let level = if max > 0.0 { v / max } else { 0.0 };
            let shade = (255.0 * (1.0 - level)).round() as u8;
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{y}" width="{cell}" height="{cell}" fill="rgb(255,{shade},{shade})" stroke="#999"><title>{v:.4}</title></rect>"##,
                left + c as f64 * cell
            );
        }
    }
    let label_y = top + rows.len() as f64 * cell + 10.0;
    for (c, label) in col_labels.iter().enumerate() {
        let x = left + (c as f64 + 0.5) * cell;
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{label_y}" transform="rotate(60 {x} {label_y})">{}</text>"#,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes `text` to `path`, creating missing parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
