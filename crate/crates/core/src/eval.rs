//! Detection metrics: IoU, greedy confidence-ranked matching, AP and mAP.
//!
//! Matching follows the usual VOC/COCO greedy protocol. Predictions are
//! ranked by descending confidence (ties by ascending `x_min`, then `y_min`,
//! then `x_max`, `y_max`, then input order). Each prediction takes the
//! unmatched truth with the highest IoU at or above the threshold (ties go to
//! the lower truth index).
//!
//! Precision-recall points are taken once per distinct confidence value, so
//! tied predictions enter the curve together and AP depends on ranks only.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::parse_label_fields;
use crate::types::{yolo_to_pixel_box, PixelBox};

/// IoU thresholds 0.50, 0.55, ..., 0.95.
pub fn coco_thresholds() -> [f64; 10] {
    std::array::from_fn(|i| (50 + 5 * i) as f64 / 100.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_id: u64,
    pub class_id: u32,
    pub bbox: PixelBox,
    pub confidence: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub frame_id: u64,
    pub class_id: u32,
    pub bbox: PixelBox,
}

pub fn iou(a: &PixelBox, b: &PixelBox) -> f64 {
    let ix = a.x_max.min(b.x_max).saturating_sub(a.x_min.max(b.x_min)) as u64;
    let iy = a.y_max.min(b.y_max).saturating_sub(a.y_min.max(b.y_min)) as u64;
    let inter = ix * iy;
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

fn rank_order(a: &Detection, b: &Detection) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.bbox.x_min.cmp(&b.bbox.x_min))
        .then(a.bbox.y_min.cmp(&b.bbox.y_min))
        .then(a.bbox.x_max.cmp(&b.bbox.x_max))
        .then(a.bbox.y_max.cmp(&b.bbox.y_max))
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchOutcome {
    /// Predictions in rank order.
    pub ranked: Vec<Detection>,
    /// TP flag per ranked prediction.
    pub true_positive: Vec<bool>,
    /// Index of the matched truth per ranked prediction.
    pub matched_truth: Vec<Option<usize>>,
    pub false_negatives: usize,
}

impl MatchOutcome {
    pub fn tp(&self) -> usize {
        self.true_positive.iter().filter(|&&t| t).count()
    }

    pub fn fp(&self) -> usize {
        self.true_positive.len() - self.tp()
    }
}

/// Greedy matching within one frame and one class.
pub fn match_detections(
    preds: &[Detection],
    truths: &[GroundTruth],
    iou_threshold: f64,
) -> Result<MatchOutcome> {
    let key = preds
        .first()
        .map(|p| (p.frame_id, p.class_id))
        .or_else(|| truths.first().map(|t| (t.frame_id, t.class_id)));
    if let Some(k) = key {
        let mixed = preds.iter().any(|p| (p.frame_id, p.class_id) != k)
            || truths.iter().any(|t| (t.frame_id, t.class_id) != k);
        if mixed {
            return Err(Error::MixedGroup(format!(
                "expected every item in frame {} class {}",
                k.0, k.1
            )));
        }
    }
    for p in preds {
        check_confidence(p.confidence)?;
    }
    let mut ranked = preds.to_vec();
    ranked.sort_by(rank_order);
    let mut taken = vec![false; truths.len()];
    let mut true_positive = Vec::with_capacity(ranked.len());
    let mut matched_truth = Vec::with_capacity(ranked.len());
    for p in &ranked {
        let mut best: Option<(usize, f64)> = None;
        for (j, t) in truths.iter().enumerate() {
            if taken[j] {
                continue;
            }
            let v = iou(&p.bbox, &t.bbox);
            if v >= iou_threshold && best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        if let Some((j, _)) = best {
            taken[j] = true;
        }
        true_positive.push(best.is_some());
        matched_truth.push(best.map(|(j, _)| j));
    }
    Ok(MatchOutcome {
        ranked,
        true_positive,
        matched_truth,
        false_negatives: taken.iter().filter(|&&t| !t).count(),
    })
}

fn check_confidence(c: f64) -> Result<()> {
    if (0.0..=1.0).contains(&c) {
        Ok(())
    } else {
        Err(Error::GeometryOutOfRange(format!(
            "confidence {c} outside [0, 1]"
        )))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ApMode {
    /// Area under the precision envelope at every recall step.
    AllPoints,
    /// Envelope sampled at recall 0.00, 0.01, ..., 1.00.
    Point101,
}

impl FromStr for ApMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "all-points" => Ok(ApMode::AllPoints),
            "101-point" => Ok(ApMode::Point101),
            _ => Err(format!("unknown AP mode '{s}' (all-points or 101-point)")),
        }
    }
}

/// Average precision for one class from per-prediction confidences and TP
/// flags.
pub fn average_precision(
    confidences: &[f64],
    true_positive: &[bool],
    total_truths: usize,
    mode: ApMode,
) -> Result<f64> {
    if confidences.len() != true_positive.len() {
        return Err(Error::LengthMismatch(format!(
            "{} confidences vs {} flags",
            confidences.len(),
            true_positive.len()
        )));
    }
    for &c in confidences {
        if c.is_nan() {
            return Err(Error::GeometryOutOfRange("NaN confidence".into()));
        }
    }
    if total_truths == 0 {
        return Ok(if confidences.is_empty() { 1.0 } else { 0.0 });
    }
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| confidences[b].total_cmp(&confidences[a]));

    // (recall, precision) at the end of each tie group.
    let mut points: Vec<(f64, f64)> = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    for (k, &i) in order.iter().enumerate() {
        if true_positive[i] {
            tp += 1;
        } else {
            fp += 1;
        }
        let group_ends = order
            .get(k + 1)
            .is_none_or(|&n| confidences[n] != confidences[i]);
        if group_ends {
            points.push((
                tp as f64 / total_truths as f64,
                tp as f64 / (tp + fp) as f64,
            ));
        }
    }

    // Precision envelope: best precision at this or any higher recall.
    let mut envelope: Vec<f64> = points.iter().map(|p| p.1).collect();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }

    Ok(match mode {
        ApMode::AllPoints => {
            let mut ap = 0.0;
            let mut prev_recall = 0.0;
            for (k, &(r, _)) in points.iter().enumerate() {
                ap += (r - prev_recall) * envelope[k];
                prev_recall = r;
            }
            ap
        }
        ApMode::Point101 => {
            let mut sum = 0.0;
            for t in 0..=100 {
                let r = t as f64 / 100.0;
                let k = points.partition_point(|p| p.0 < r);
                sum += envelope.get(k).copied().unwrap_or(0.0);
            }
            sum / 101.0
        }
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub iou_threshold: f64,
    pub ap_mode: ApMode,
    /// Predictions below this confidence are ignored for P/R/F1 counts.
    pub confidence_cut: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            iou_threshold: 0.5,
            ap_mode: ApMode::Point101,
            confidence_cut: 0.25,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl Counts {
    pub fn precision(&self) -> f64 {
        if self.tp + self.fp == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fp) as f64
        }
    }

    pub fn recall(&self) -> f64 {
        if self.tp + self.fn_ == 0 {
            0.0
        } else {
            self.tp as f64 / (self.tp + self.fn_) as f64
        }
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class_id: u32,
    pub truths: usize,
    pub predictions: usize,
    /// AP at the configured IoU threshold.
    pub ap50: f64,
    pub ap50_95: f64,
    pub counts: Counts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub config: EvalConfig,
    pub per_class: Vec<ClassReport>,
    pub map50: f64,
    pub map50_95: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub counts: Counts,
}

type Groups<'a> = BTreeMap<u64, (Vec<Detection>, Vec<GroundTruth>)>;

fn class_ap(groups: &Groups, total_truths: usize, threshold: f64, mode: ApMode) -> Result<f64> {
    let mut conf = Vec::new();
    let mut flags = Vec::new();
    for (preds, truths) in groups.values() {
        let m = match_detections(preds, truths, threshold)?;
        conf.extend(m.ranked.iter().map(|d| d.confidence));
        flags.extend(m.true_positive);
    }
    average_precision(&conf, &flags, total_truths, mode)
}

pub fn evaluate(
    preds: &[Detection],
    truths: &[GroundTruth],
    config: &EvalConfig,
) -> Result<EvalReport> {
    let classes: BTreeSet<u32> = preds
        .iter()
        .map(|p| p.class_id)
        .chain(truths.iter().map(|t| t.class_id))
        .collect();
    let mut per_class = Vec::new();
    let mut total = Counts::default();
    for &class in &classes {
        let mut groups: Groups = BTreeMap::new();
        for p in preds.iter().filter(|p| p.class_id == class) {
            groups.entry(p.frame_id).or_default().0.push(*p);
        }
        for t in truths.iter().filter(|t| t.class_id == class) {
            groups.entry(t.frame_id).or_default().1.push(*t);
        }
        let n_truths = groups.values().map(|g| g.1.len()).sum();
        let n_preds = groups.values().map(|g| g.0.len()).sum();
        let ap50 = class_ap(&groups, n_truths, config.iou_threshold, config.ap_mode)?;
        let mut ap_sum = 0.0;
        for t in coco_thresholds() {
            ap_sum += class_ap(&groups, n_truths, t, config.ap_mode)?;
        }

        let mut counts = Counts::default();
        for (p, t) in groups.values() {
            let kept: Vec<Detection> = p
                .iter()
                .filter(|d| d.confidence >= config.confidence_cut)
                .copied()
                .collect();
            let m = match_detections(&kept, t, config.iou_threshold)?;
            counts.tp += m.tp();
            counts.fp += m.fp();
            counts.fn_ += m.false_negatives;
        }
        total.tp += counts.tp;
        total.fp += counts.fp;
        total.fn_ += counts.fn_;
        per_class.push(ClassReport {
            class_id: class,
            truths: n_truths,
            predictions: n_preds,
            ap50,
            ap50_95: ap_sum / 10.0,
            counts,
        });
    }
    let scored: Vec<&ClassReport> = per_class.iter().filter(|c| c.truths > 0).collect();
    let mean = |f: fn(&ClassReport) -> f64| {
        if scored.is_empty() {
            0.0
        } else {
            scored.iter().map(|c| f(c)).sum::<f64>() / scored.len() as f64
        }
    };
    Ok(EvalReport {
        config: config.clone(),
        map50: mean(|c| c.ap50),
        map50_95: mean(|c| c.ap50_95),
        precision: total.precision(),
        recall: total.recall(),
        f1: total.f1(),
        counts: total,
        per_class,
    })
}

/// Reads `class cx cy w h conf` lines for one frame.
pub fn read_prediction_file(
    path: &Path,
    frame_id: u64,
    width: u32,
    height: u32,
) -> Result<Vec<Detection>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (label, extra) = parse_label_fields(line, 1, path, i + 1)?;
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let confidence = extra[0];
        check_confidence(confidence).map_err(|e| err(e.to_string()))?;
        let bbox =
            yolo_to_pixel_box(&label.geometry(), width, height).map_err(|e| err(e.to_string()))?;
        out.push(Detection {
            frame_id,
            class_id: label.class_id,
            bbox,
            confidence,
        });
    }
    Ok(out)
}

pub fn write_report_csv<W: Write>(out: W, report: &EvalReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "scope",
        "class_id",
        "truths",
        "predictions",
        "ap50",
        "ap50_95",
        "precision",
        "recall",
        "f1",
        "tp",
        "fp",
        "fn",
    ])?;
    let f = |v: f64| format!("{v:.6}");
    for c in &report.per_class {
        w.write_record([
            "class".to_string(),
            c.class_id.to_string(),
            c.truths.to_string(),
            c.predictions.to_string(),
            f(c.ap50),
            f(c.ap50_95),
            f(c.counts.precision()),
            f(c.counts.recall()),
            f(c.counts.f1()),
            c.counts.tp.to_string(),
            c.counts.fp.to_string(),
            c.counts.fn_.to_string(),
        ])?;
    }
    let truths: usize = report.per_class.iter().map(|c| c.truths).sum();
    let predictions: usize = report.per_class.iter().map(|c| c.predictions).sum();
    w.write_record([
        "all".to_string(),
        String::new(),
        truths.to_string(),
        predictions.to_string(),
        f(report.map50),
        f(report.map50_95),
        f(report.precision),
        f(report.recall),
        f(report.f1),
        report.counts.tp.to_string(),
        report.counts.fp.to_string(),
        report.counts.fn_.to_string(),
    ])?;
    w.flush().map_err(|e| Error::io("report", e))?;
    Ok(())
}

pub fn format_report(report: &EvalReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:>6} {:>7} {:>7} {:>8} {:>10}",
        "class", "truths", "preds", "AP50", "AP50-95"
    );
    for c in &report.per_class {
        let _ = writeln!(
            s,
            "{:>6} {:>7} {:>7} {:>8.4} {:>10.4}",
            c.class_id, c.truths, c.predictions, c.ap50, c.ap50_95
        );
    }
    let _ = writeln!(s, "mAP@0.5      {:.4}", report.map50);
    let _ = writeln!(s, "mAP@.5:.95   {:.4}", report.map50_95);
    let _ = writeln!(
        s,
        "P {:.4}  R {:.4}  F1 {:.4}  (TP {} FP {} FN {}, conf >= {})",
        report.precision,
        report.recall,
        report.f1,
        report.counts.tp,
        report.counts.fp,
        report.counts.fn_,
        report.config.confidence_cut
    );
    s
}
