//! Confusion matrices, per-class F-measure and the hidden-keyframe ablation.
//!
//! Frame scores are class means over the classes present in either the
//! prediction or the ground truth; a class that appears in the ground truth
//! but is never predicted scores zero. Sequence scores average the frame
//! means. The pooled confusion over all frames is kept alongside as the
//! alternative aggregate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::FlowSource;
use crate::model::{LabelMap, CLASS_NAMES};
use crate::par;
use crate::segprop::Propagator;

/// `counts[g * classes + p]` = pixels with ground truth `g` predicted `p`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    classes: usize,
    counts: Vec<u64>,
}

impl Confusion {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, gt: usize, pred: usize) -> u64 {
        self.counts[gt * self.classes + pred]
    }

    pub fn add(&mut self, gt: usize, pred: usize, n: u64) {
        self.counts[gt * self.classes + pred] += n;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn merge(&mut self, other: &Confusion) -> Result<()> {
        if other.classes != self.classes {
            return Err(Error::Invalid(format!(
                "cannot merge confusion over {} classes into {}",
                other.classes, self.classes
            )));
        }
        self.counts.iter_mut().zip(&other.counts).for_each(|(a, b)| *a += b);
        Ok(())
    }

    pub fn true_positives(&self, c: usize) -> u64 {
        self.get(c, c)
    }

    pub fn false_positives(&self, c: usize) -> u64 {
        (0..self.classes).filter(|&g| g != c).map(|g| self.get(g, c)).sum()
    }

    pub fn false_negatives(&self, c: usize) -> u64 {
        (0..self.classes).filter(|&p| p != c).map(|p| self.get(c, p)).sum()
    }

    /// Whether `c` occurs in the ground truth or the prediction.
    pub fn is_present(&self, c: usize) -> bool {
        (0..self.classes).any(|o| self.get(c, o) > 0 || self.get(o, c) > 0)
    }

    pub fn in_ground_truth(&self, c: usize) -> bool {
        (0..self.classes).any(|p| self.get(c, p) > 0)
    }

    /// TP / (TP + FP), or 0 when nothing was predicted as `c`.
    pub fn precision(&self, c: usize) -> f64 {
        ratio(self.true_positives(c), self.true_positives(c) + self.false_positives(c))
    }

    /// TP / (TP + FN), or 0 when `c` is absent from the ground truth.
    pub fn recall(&self, c: usize) -> f64 {
        ratio(self.true_positives(c), self.true_positives(c) + self.false_negatives(c))
    }

    pub fn f_measure(&self, c: usize) -> f64 {
        let (p, r) = (self.precision(c), self.recall(c));
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Mean F over present classes; 0 for an empty matrix.
    pub fn mean_f(&self) -> f64 {
        let present: Vec<usize> = (0..self.classes).filter(|&c| self.is_present(c)).collect();
        if present.is_empty() {
            return 0.0;
        }
        present.iter().map(|&c| self.f_measure(c)).sum::<f64>() / present.len() as f64
    }

    /// Fraction of pixels on the diagonal.
    pub fn accuracy(&self) -> f64 {
        ratio((0..self.classes).map(|c| self.get(c, c)).sum(), self.total())
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(pred: &LabelMap, gt: &LabelMap, classes: usize) -> Result<Confusion> {
    confusion_masked(pred, gt, classes, None)
}

/// Confusion restricted to pixels where `include` is true.
pub fn confusion_masked(pred: &LabelMap, gt: &LabelMap, classes: usize, include: Option<&[bool]>) -> Result<Confusion> {
    pred.check_same_dims(gt)?;
    if let Some(mask) = include {
        if mask.len() != gt.as_slice().len() {
            return Err(Error::Invalid(format!(
                "mask has {} entries for {} pixels",
                mask.len(),
                gt.as_slice().len()
            )));
        }
    }
    let mut m = Confusion::new(classes);
    for (i, (&p, &g)) in pred.as_slice().iter().zip(gt.as_slice()).enumerate() {
        if include.is_some_and(|mask| !mask[i]) {
            continue;
        }
        if p as usize >= classes || g as usize >= classes {
            return Err(Error::Invalid(format!(
                "pixel {i} of frame {} is unlabeled or out of range (pred {p}, gt {g})",
                gt.frame_index
            )));
        }
        m.add(g as usize, p as usize, 1);
    }
    Ok(m)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub class: usize,
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub present: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub frame: usize,
    pub mean_f: f64,
    /// Per-class F, `None` for classes absent from both maps.
    pub per_class: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: usize,
    pub frames: Vec<FrameScore>,
    /// Average of the per-frame class means.
    pub mean_f: f64,
    /// Mean F of the pooled confusion.
    pub pooled_mean_f: f64,
    /// Per-class scores from the pooled confusion.
    pub per_class: Vec<ClassScore>,
    pub confusion: Confusion,
}

fn class_name(c: usize) -> String {
    CLASS_NAMES
        .get(c)
        .map_or_else(|| format!("class{c}"), |s| s.to_string())
}

impl EvalReport {
    pub fn from_confusions(frames: Vec<(usize, Confusion)>, classes: usize) -> Result<Self> {
        let mut pooled = Confusion::new(classes);
        let mut scores = Vec::with_capacity(frames.len());
        for (frame, m) in &frames {
            pooled.merge(m)?;
            scores.push(FrameScore {
                frame: *frame,
                mean_f: m.mean_f(),
                per_class: (0..classes).map(|c| m.is_present(c).then(|| m.f_measure(c))).collect(),
            });
        }
        let mean_f = if scores.is_empty() {
            0.0
        } else {
            scores.iter().map(|s| s.mean_f).sum::<f64>() / scores.len() as f64
        };
        Ok(Self {
            classes,
            mean_f,
            pooled_mean_f: pooled.mean_f(),
            per_class: (0..classes)
                .map(|c| ClassScore {
                    class: c,
                    name: class_name(c),
                    precision: pooled.precision(c),
                    recall: pooled.recall(c),
                    f: pooled.f_measure(c),
                    present: pooled.is_present(c),
                })
                .collect(),
            frames: scores,
            confusion: pooled,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Scores `(prediction, ground truth)` pairs; frames are evaluated in
/// parallel.
pub fn evaluate_frames(pairs: &[(&LabelMap, &LabelMap)], classes: usize) -> Result<EvalReport> {
    let confusions = par::map_slice(pairs, |(p, g)| confusion(p, g, classes).map(|m| (g.frame_index, m)));
    EvalReport::from_confusions(confusions.into_iter().collect::<Result<_>>()?, classes)
}

/// Three decimals with the leading zero dropped: `.857`, `.000`, `1.000`.
pub fn format_score(v: f64) -> String {
    let s = format!("{v:.3}");
    s.strip_prefix('0').map_or(s.clone(), str::to_string)
}

/// Rows of named reports laid out as a class-by-column table with a final
/// mean column. Classes absent from a row's frames are left blank.
pub fn format_class_table(rows: &[(String, &EvalReport)]) -> String {
    let classes = rows.first().map_or(0, |(_, r)| r.classes);
    let label_w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(5);
    let mut out = format!("{:<label_w$}", "video");
    let widths: Vec<usize> = (0..classes).map(|c| class_name(c).len().max(5)).collect();
    for (c, w) in widths.iter().enumerate() {
        out.push_str(&format!("  {:>w$}", class_name(c)));
    }
    out.push_str("   mean\n");
    for (name, r) in rows {
        out.push_str(&format!("{name:<label_w$}"));
        for (c, w) in widths.iter().enumerate() {
            let cell = r
                .per_class
                .get(c)
                .filter(|s| s.present)
                .map_or(String::new(), |s| format_score(s.f));
            out.push_str(&format!("  {cell:>w$}"));
        }
        out.push_str(&format!("  {:>5}\n", format_score(r.mean_f)));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub stride: usize,
    pub kept_keyframes: Vec<usize>,
    pub hidden_keyframes: Vec<usize>,
    /// `None` when nothing was left to score at this stride.
    pub report: Option<EvalReport>,
}

impl AblationRow {
    pub fn mean_f(&self) -> Option<f64> {
        self.report.as_ref().map(|r| r.mean_f)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn format_text(&self, method: &str) -> String {
        let mut out = format!("{:<18}  {:>8}  {:>7}\n", "propagated frames", method, "hidden");
        for row in &self.rows {
            let score = row.mean_f().map_or_else(|| "-".to_string(), format_score);
            out.push_str(&format!(
                "{:<18}  {:>8}  {:>7}\n",
                row.stride,
                score,
                row.hidden_keyframes.len()
            ));
        }
        out
    }
}

/// Keyframes kept at `stride`: every multiple of the stride counted from
/// the first keyframe. Fails unless the span between first and last
/// keyframe is a whole number of strides and every multiple is a keyframe.
pub fn keyframes_at_stride(keyframes: &[usize], stride: usize) -> Result<Vec<usize>> {
    let (Some(&first), Some(&last)) = (keyframes.first(), keyframes.last()) else {
        return Err(Error::TooFewKeyframes(0));
    };
    if stride == 0 {
        return Err(Error::Invalid("stride must be positive".into()));
    }
    if (last - first) % stride != 0 {
        return Err(Error::Invalid(format!(
            "keyframe span {first}..{last} is not a multiple of stride {stride}"
        )));
    }
    let kept: Vec<usize> = (first..=last).step_by(stride).collect();
    if let Some(missing) = kept.iter().find(|k| keyframes.binary_search(k).is_err()) {
        return Err(Error::Invalid(format!(
            "stride {stride} needs frame {missing} to be a keyframe"
        )));
    }
    if kept.len() < 2 {
        return Err(Error::TooFewKeyframes(kept.len()));
    }
    Ok(kept)
}

/// For each stride, keeps the keyframes on that stride, propagates from
/// them alone and scores the hidden keyframes against their labels.
pub fn ablation_propagation_length(
    keyframe_labels: &[LabelMap],
    frame_count: usize,
    flows: &dyn FlowSource,
    propagator: &Propagator,
    strides: &[usize],
) -> Result<AblationTable> {
    ablate(keyframe_labels, None, frame_count, flows, propagator, strides)
}

/// Like [`ablation_propagation_length`], but scores every frame that is not
/// a kept keyframe against a dense ground truth (one map per frame, in
/// order), so strides at the annotation rate are still measured.
pub fn ablation_against_ground_truth(
    keyframe_labels: &[LabelMap],
    ground_truth: &[LabelMap],
    flows: &dyn FlowSource,
    propagator: &Propagator,
    strides: &[usize],
) -> Result<AblationTable> {
    if let Some((t, _)) = ground_truth.iter().enumerate().find(|(t, g)| g.frame_index != *t) {
        return Err(Error::Invalid(format!("ground truth entry {t} is not frame {t}")));
    }
    ablate(
        keyframe_labels,
        Some(ground_truth),
        ground_truth.len(),
        flows,
        propagator,
        strides,
    )
}

fn ablate(
    keyframe_labels: &[LabelMap],
    ground_truth: Option<&[LabelMap]>,
    frame_count: usize,
    flows: &dyn FlowSource,
    propagator: &Propagator,
    strides: &[usize],
) -> Result<AblationTable> {
    let keyframes: Vec<usize> = keyframe_labels.iter().map(|l| l.frame_index).collect();
    if keyframes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Unsorted(keyframes));
    }
    let classes = propagator.config().num_classes;
    let mut rows = Vec::with_capacity(strides.len());
    for &stride in strides {
        let kept = keyframes_at_stride(&keyframes, stride)?;
        let hidden: Vec<usize> = keyframes
            .iter()
            .copied()
            .filter(|k| kept.binary_search(k).is_err())
            .collect();
        let targets: Vec<&LabelMap> = match ground_truth {
            Some(gt) => gt
                .iter()
                .filter(|g| kept.binary_search(&g.frame_index).is_err())
                .collect(),
            None => keyframe_labels
                .iter()
                .filter(|l| hidden.binary_search(&l.frame_index).is_ok())
                .collect(),
        };
        if targets.is_empty() {
            rows.push(AblationRow {
                stride,
                kept_keyframes: kept,
                hidden_keyframes: hidden,
                report: None,
            });
            continue;
        }
        let inputs: Vec<LabelMap> = keyframe_labels
            .iter()
            .filter(|l| kept.binary_search(&l.frame_index).is_ok())
            .cloned()
            .collect();
        let out = propagator.propagate_sequence(&inputs, frame_count, flows)?;
        let pairs: Vec<(&LabelMap, &LabelMap)> = targets.iter().map(|gt| (&out.labels[gt.frame_index], *gt)).collect();
        log::info!("stride {stride}: {} kept, {} scored", kept.len(), pairs.len());
        rows.push(AblationRow {
            stride,
            kept_keyframes: kept,
            hidden_keyframes: hidden,
            report: Some(evaluate_frames(&pairs, classes)?),
        });
    }
    Ok(AblationTable { rows })
}
