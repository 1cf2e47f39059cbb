//! Online keep/drop engine and the three collection modes.
//!
//! Each step compares the incoming frame with a reference frame using
//! windowed UQI. A frame at least as similar as the effective threshold is
//! redundant; otherwise the quality gates (instance count, merged blobs)
//! decide. The effective threshold rises by `density_boost` for frames with
//! at least `boost_at` instances, which lets crowded frames through more
//! often.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quality::{
    luma, FrameQuality, Plane, SimilarityWindow, DEFAULT_MIN_AREA, DEFAULT_WINDOW,
};
use crate::types::Frame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceMode {
    PreviousKept,
    PreviousRaw,
}

impl FromStr for ReferenceMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "previous-kept" => Ok(ReferenceMode::PreviousKept),
            "previous-raw" => Ok(ReferenceMode::PreviousRaw),
            _ => Err(format!("unknown reference mode '{s}'")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// UQI at or above which a frame is redundant.
    pub tau: f64,
    pub window_b: usize,
    pub min_instances: usize,
    pub drop_merged: bool,
    pub max_merged: usize,
    pub density_boost: f64,
    pub boost_at: usize,
    pub min_area: u64,
    pub reference_mode: ReferenceMode,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            tau: 0.90,
            window_b: DEFAULT_WINDOW,
            min_instances: 1,
            drop_merged: false,
            max_merged: 0,
            density_boost: 0.05,
            boost_at: 4,
            min_area: DEFAULT_MIN_AREA,
            reference_mode: ReferenceMode::PreviousKept,
        }
    }
}

impl PolicyConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must be in (0, 1], got {}", self.tau));
        }
        if !(self.density_boost >= 0.0 && self.density_boost.is_finite()) {
            return bad(format!(
                "density_boost must be >= 0, got {}",
                self.density_boost
            ));
        }
        if self.tau + self.density_boost > 1.0 {
            return bad(format!(
                "tau + density_boost = {} exceeds 1",
                self.tau + self.density_boost
            ));
        }
        if self.window_b < 2 {
            return bad(format!("window_b must be >= 2, got {}", self.window_b));
        }
        Ok(())
    }

    pub fn window(&self) -> SimilarityWindow {
        SimilarityWindow::Tiled(self.window_b)
    }

    fn effective_threshold(&self, instance_count: usize) -> f64 {
        let boost = if instance_count >= self.boost_at {
            self.density_boost
        } else {
            0.0
        };
        (self.tau + boost).min(1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Keep,
    Drop,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Reason {
    FirstFrame,
    Novel,
    Redundant,
    TooFewInstances,
    TooManyMerged,
    QuotaReached,
    /// Passive collection skipped the frame because of its stride.
    Skipped,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Keep => "keep",
            Verdict::Drop => "drop",
        })
    }
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Reason::FirstFrame => "first_frame",
            Reason::Novel => "novel",
            Reason::Redundant => "redundant",
            Reason::TooFewInstances => "too_few_instances",
            Reason::TooManyMerged => "too_many_merged",
            Reason::QuotaReached => "quota_reached",
            Reason::Skipped => "skipped",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AcquisitionDecision {
    pub frame_id: u64,
    pub verdict: Verdict,
    pub reason: Reason,
    pub quality: FrameQuality,
}

impl AcquisitionDecision {
    pub fn kept(&self) -> bool {
        self.verdict == Verdict::Keep
    }
}

/// Sequential policy state. One reference plane is retained between steps.
#[derive(Clone, Debug)]
pub struct Policy {
    config: PolicyConfig,
    reference: Option<Plane>,
    dims: Option<(u32, u32)>,
    kept: usize,
    quota: Option<usize>,
}

impl Policy {
    pub fn new(config: PolicyConfig) -> Result<Self> {
        config.validate()?;
        Ok(Policy {
            config,
            reference: None,
            dims: None,
            kept: 0,
            quota: None,
        })
    }

    /// Once `quota` frames are kept, every further frame is dropped with
    /// [`Reason::QuotaReached`].
    pub fn with_quota(mut self, quota: usize) -> Self {
        self.quota = Some(quota);
        self
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn kept(&self) -> usize {
        self.kept
    }

    pub fn quota_reached(&self) -> bool {
        self.quota.is_some_and(|q| self.kept >= q)
    }

    fn check_dims(&mut self, frame: &Frame) -> Result<()> {
        match self.dims {
            Some(d) if d != frame.dims() => Err(Error::DimensionMismatch {
                expected: d,
                actual: frame.dims(),
            }),
            _ => {
                self.dims = Some(frame.dims());
                Ok(())
            }
        }
    }

    pub fn step(&mut self, frame: &Frame) -> Result<AcquisitionDecision> {
        self.check_dims(frame)?;
        let cfg = &self.config;
        let plane = luma(&frame.rgb);
        let quality = FrameQuality::measure(
            frame,
            &plane,
            self.reference.as_ref(),
            cfg.window(),
            cfg.min_area,
        )?;

        let (verdict, reason) = if self.quota_reached() {
            (Verdict::Drop, Reason::QuotaReached)
        } else {
            match quality.uqi_vs_reference {
                None => (Verdict::Keep, Reason::FirstFrame),
                Some(q) if q >= cfg.effective_threshold(quality.instance_count) => {
                    (Verdict::Drop, Reason::Redundant)
                }
                Some(_) if quality.instance_count < cfg.min_instances => {
                    (Verdict::Drop, Reason::TooFewInstances)
                }
                Some(_) if cfg.drop_merged && quality.merged_component_count > cfg.max_merged => {
                    (Verdict::Drop, Reason::TooManyMerged)
                }
                Some(_) => (Verdict::Keep, Reason::Novel),
            }
        };

        let keep = verdict == Verdict::Keep;
        if keep {
            self.kept += 1;
        }
        if keep || cfg.reference_mode == ReferenceMode::PreviousRaw {
            self.reference = Some(plane);
        }
        Ok(AcquisitionDecision {
            frame_id: frame.frame_id,
            verdict,
            reason,
            quality,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuotaStatus {
    pub target: usize,
    pub reached: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CollectionStats {
    pub frames_seen: usize,
    pub frames_kept: usize,
    pub instances_kept: usize,
    pub instances_per_kept_frame: f64,
    pub merged_frames_seen: usize,
    /// `frames_seen * frame_period` in seconds.
    pub wall_clock_equivalent: f64,
    pub quota: Option<QuotaStatus>,
}

impl CollectionStats {
    fn from_decisions(decisions: &[AcquisitionDecision], frame_period: f64) -> Self {
        let kept: Vec<_> = decisions.iter().filter(|d| d.kept()).collect();
        let instances_kept: usize = kept.iter().map(|d| d.quality.instance_count).sum();
        CollectionStats {
            frames_seen: decisions.len(),
            frames_kept: kept.len(),
            instances_kept,
            instances_per_kept_frame: ratio(instances_kept, kept.len()),
            merged_frames_seen: decisions
                .iter()
                .filter(|d| d.quality.merged_component_count > 0)
                .count(),
            wall_clock_equivalent: decisions.len() as f64 * frame_period,
            quota: None,
        }
    }
}

pub(crate) fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CollectedFrame {
    pub frame: Frame,
    pub decision: AcquisitionDecision,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Collection {
    pub kept: Vec<CollectedFrame>,
    pub decisions: Vec<AcquisitionDecision>,
    pub stats: CollectionStats,
}

/// Keeps every `stride`-th frame. Quality is still measured (against the
/// previous kept frame) so that the decision log is comparable.
pub fn collect_passive<I>(
    stream: I,
    stride: usize,
    config: &PolicyConfig,
    frame_period: f64,
) -> Result<Collection>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    if stride == 0 {
        return Err(Error::InvalidConfig("stride must be >= 1".into()));
    }
    config.validate()?;
    let mut reference: Option<Plane> = None;
    let mut dims = None;
    let mut kept = Vec::new();
    let mut decisions = Vec::new();
    for (i, frame) in stream.into_iter().enumerate() {
        let frame = frame?;
        match dims {
            Some(d) if d != frame.dims() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    actual: frame.dims(),
                })
            }
            _ => dims = Some(frame.dims()),
        }
        let plane = luma(&frame.rgb);
        let quality = FrameQuality::measure(
            &frame,
            &plane,
            reference.as_ref(),
            config.window(),
            config.min_area,
        )?;
        let take = i % stride == 0;
        let (verdict, reason) = match (take, i) {
            (true, 0) => (Verdict::Keep, Reason::FirstFrame),
            (true, _) => (Verdict::Keep, Reason::Novel),
            (false, _) => (Verdict::Drop, Reason::Skipped),
        };
        let decision = AcquisitionDecision {
            frame_id: frame.frame_id,
            verdict,
            reason,
            quality,
        };
        if take {
            reference = Some(plane);
            kept.push(CollectedFrame {
                frame,
                decision: decision.clone(),
            });
        }
        decisions.push(decision);
    }
    if decisions.is_empty() {
        return Err(Error::EmptyStream);
    }
    let stats = CollectionStats::from_decisions(&decisions, frame_period);
    Ok(Collection {
        kept,
        decisions,
        stats,
    })
}

fn run_policy<I>(stream: I, mut policy: Policy, frame_period: f64) -> Result<Collection>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    let mut kept = Vec::new();
    let mut decisions = Vec::new();
    for frame in stream {
        if policy.quota_reached() {
            break;
        }
        let frame = frame?;
        let decision = policy.step(&frame)?;
        if decision.kept() {
            kept.push(CollectedFrame {
                frame,
                decision: decision.clone(),
            });
        }
        decisions.push(decision);
    }
    if decisions.is_empty() {
        return Err(Error::EmptyStream);
    }
    let mut stats = CollectionStats::from_decisions(&decisions, frame_period);
    if let Some(target) = policy.quota {
        stats.quota = Some(QuotaStatus {
            target,
            reached: policy.quota_reached(),
        });
    }
    Ok(Collection {
        kept,
        decisions,
        stats,
    })
}

/// Runs the active policy over the whole stream (equal exposure time).
pub fn collect_active_time<I>(
    stream: I,
    config: &PolicyConfig,
    frame_period: f64,
) -> Result<Collection>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    run_policy(stream, Policy::new(config.clone())?, frame_period)
}

/// Runs the active policy until `target_frames` are kept or the stream ends.
/// Frames after the quota are not consumed.
pub fn collect_active_size<I>(
    stream: I,
    config: &PolicyConfig,
    target_frames: usize,
    frame_period: f64,
) -> Result<Collection>
where
    I: IntoIterator<Item = Result<Frame>>,
{
    if target_frames == 0 {
        return Err(Error::InvalidConfig("target_frames must be >= 1".into()));
    }
    let policy = Policy::new(config.clone())?.with_quota(target_frames);
    run_policy(stream, policy, frame_period)
}

/// Writes the per-frame audit log:
/// `frame_id,verdict,reason,uqi,instance_count,merged_count`.
pub fn write_decision_log<W: Write>(out: W, decisions: &[AcquisitionDecision]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "frame_id",
        "verdict",
        "reason",
        "uqi",
        "instance_count",
        "merged_count",
    ])?;
    for d in decisions {
        w.write_record([
            d.frame_id.to_string(),
            d.verdict.to_string(),
            d.reason.to_string(),
            d.quality
                .uqi_vs_reference
                .map(|q| format!("{q:.6}"))
                .unwrap_or_default(),
            d.quality.instance_count.to_string(),
            d.quality.merged_component_count.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("decision log", e))?;
    Ok(())
}
