//! Dataset directories: `images/<id>.png`, `labels/<id>.txt` and a JSON
//! `manifest.json` at the root. The manifest caches statistics; label files
//! are the source of truth and [`dataset_stats`] always recounts them.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::{
    extract_instances, read_label_file, to_yolo_labels, write_label_file, ExportClassMap,
};
use crate::policy::{ratio, CollectedFrame, CollectionStats, PolicyConfig};
use crate::quality::FrameQuality;
use crate::synth::{frame_file_name, read_json, write_json};
use crate::types::{Palette, YoloLabel};

pub const DATASET_SCHEMA_VERSION: u32 = 1;
pub const DATASET_MANIFEST: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CollectionMode {
    Passive,
    ActiveTime,
    ActiveSize,
}

impl fmt::Display for CollectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CollectionMode::Passive => "passive",
            CollectionMode::ActiveTime => "active-time",
            CollectionMode::ActiveSize => "active-size",
        })
    }
}

impl FromStr for CollectionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "passive" => Ok(CollectionMode::Passive),
            "active-time" => Ok(CollectionMode::ActiveTime),
            "active-size" => Ok(CollectionMode::ActiveSize),
            _ => Err(format!(
                "unknown mode '{s}' (passive, active-time or active-size)"
            )),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub frame_id: u64,
    pub timestamp: f64,
    /// Relative to the dataset root.
    pub image: String,
    pub label: String,
    pub width: u32,
    pub height: u32,
    pub image_crc32: u32,
    pub quality: FrameQuality,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub name: String,
    /// Scene preset or map identifier.
    pub source: Option<String>,
    pub collection_mode: CollectionMode,
    pub policy: PolicyConfig,
    pub palette: Palette,
    pub class_map: ExportClassMap,
    pub entries: Vec<DatasetEntry>,
    pub stats: CollectionStats,
}

/// Everything in a manifest except the entries and statistics.
#[derive(Clone, Debug)]
pub struct DatasetHeader {
    pub name: String,
    pub source: Option<String>,
    pub collection_mode: CollectionMode,
    pub policy: PolicyConfig,
    pub palette: Palette,
    pub class_map: ExportClassMap,
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Writes images, labels and the manifest for the kept frames.
pub fn write_dataset(
    dir: &Path,
    header: &DatasetHeader,
    kept: &[CollectedFrame],
    stats: &CollectionStats,
) -> Result<DatasetManifest> {
    create_dir(&dir.join("images"))?;
    create_dir(&dir.join("labels"))?;
    let mut entries = Vec::with_capacity(kept.len());
    for c in kept {
        let f = &c.frame;
        let image = format!("images/{}", frame_file_name(f.frame_id, "png"));
        let label = format!("labels/{}", frame_file_name(f.frame_id, "txt"));
        let image_path = dir.join(&image);
        f.rgb.write_png(&image_path)?;
        let bytes = fs::read(&image_path).map_err(|e| Error::io(&image_path, e))?;
        let records = extract_instances(f, header.policy.min_area)?;
        let labels = to_yolo_labels(&records, f.width(), f.height(), &header.class_map)?;
        write_label_file(&labels, &dir.join(&label))?;
        entries.push(DatasetEntry {
            frame_id: f.frame_id,
            timestamp: f.timestamp,
            image,
            label,
            width: f.width(),
            height: f.height(),
            image_crc32: crc32fast::hash(&bytes),
            quality: c.decision.quality.clone(),
        });
    }
    let manifest = DatasetManifest {
        schema_version: DATASET_SCHEMA_VERSION,
        name: header.name.clone(),
        source: header.source.clone(),
        collection_mode: header.collection_mode,
        policy: header.policy.clone(),
        palette: header.palette.clone(),
        class_map: header.class_map.clone(),
        entries,
        stats: stats.clone(),
    };
    write_json(&dir.join(DATASET_MANIFEST), &manifest)?;
    Ok(manifest)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoadedEntry {
    pub entry: DatasetEntry,
    pub labels: Vec<YoloLabel>,
}

pub fn read_manifest(dir: &Path) -> Result<DatasetManifest> {
    let manifest: DatasetManifest = read_json(&dir.join(DATASET_MANIFEST))?;
    if manifest.schema_version != DATASET_SCHEMA_VERSION {
        return Err(Error::InvalidConfig(format!(
            "unsupported dataset schema version {}",
            manifest.schema_version
        )));
    }
    Ok(manifest)
}

/// Reads the manifest and every label file, verifying image presence,
/// checksum and dimensions. All per-entry problems are reported together.
pub fn read_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<LoadedEntry>)> {
    let manifest = read_manifest(dir)?;
    let mut problems = Vec::new();
    let mut loaded = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let image_path = dir.join(&e.image);
        match fs::read(&image_path) {
            Err(_) => problems.push(format!(
                "frame {}: missing image {}",
                e.frame_id,
                image_path.display()
            )),
            Ok(bytes) => {
                if crc32fast::hash(&bytes) != e.image_crc32 {
                    problems.push(format!("frame {}: image checksum mismatch", e.frame_id));
                }
                match image::image_dimensions(&image_path) {
                    Ok(dims) if dims == (e.width, e.height) => {}
                    Ok(dims) => problems.push(format!(
                        "frame {}: image is {}x{}, manifest says {}x{}",
                        e.frame_id, dims.0, dims.1, e.width, e.height
                    )),
                    Err(err) => problems.push(format!("frame {}: {err}", e.frame_id)),
                }
            }
        }
        let label_path = dir.join(&e.label);
        if !label_path.exists() {
            problems.push(format!(
                "frame {}: missing label file {}",
                e.frame_id,
                label_path.display()
            ));
            continue;
        }
        match read_label_file(&label_path) {
            Ok(labels) => loaded.push(LoadedEntry {
                entry: e.clone(),
                labels,
            }),
            Err(err) => problems.push(format!("frame {}: {err}", e.frame_id)),
        }
    }
    if !problems.is_empty() {
        return Err(Error::Integrity(problems));
    }
    Ok((manifest, loaded))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub name: String,
    /// Frame, instance and density figures recounted from the label files;
    /// the rest is carried over from the manifest.
    pub stats: CollectionStats,
    /// Label count per export class id.
    pub per_class: BTreeMap<u32, usize>,
    pub merged_frames_kept: usize,
    pub warnings: Vec<String>,
}

pub fn dataset_stats(dir: &Path) -> Result<StatsReport> {
    let (manifest, loaded) = read_dataset(dir)?;
    Ok(stats_from_loaded(&manifest, &loaded))
}

pub fn stats_from_loaded(manifest: &DatasetManifest, loaded: &[LoadedEntry]) -> StatsReport {
    let mut per_class: BTreeMap<u32, usize> = manifest
        .class_map
        .export_ids()
        .into_iter()
        .map(|c| (c, 0))
        .collect();
    for l in loaded {
        for label in &l.labels {
            *per_class.entry(label.class_id).or_insert(0) += 1;
        }
    }
    let frames_kept = loaded.len();
    let instances_kept: usize = per_class.values().sum();
    let cached = &manifest.stats;
    let mut warnings = Vec::new();
    if cached.frames_kept != frames_kept {
        warnings.push(format!(
            "manifest records {} kept frames but lists {} entries",
            cached.frames_kept, frames_kept
        ));
    }
    if cached.instances_kept != instances_kept {
        warnings.push(format!(
            "manifest records {} instances but label files hold {}",
            cached.instances_kept, instances_kept
        ));
    }
    if cached.frames_seen < frames_kept {
        warnings.push(format!(
            "manifest records {} frames seen, fewer than {} kept",
            cached.frames_seen, frames_kept
        ));
    }
    StatsReport {
        name: manifest.name.clone(),
        stats: CollectionStats {
            frames_kept,
            instances_kept,
            instances_per_kept_frame: ratio(instances_kept, frames_kept),
            ..cached.clone()
        },
        per_class,
        merged_frames_kept: loaded
            .iter()
            .filter(|l| l.entry.quality.merged_component_count > 0)
            .count(),
        warnings,
    }
}

/// `metric,value` rows.
pub fn write_stats_csv<W: Write>(out: W, report: &StatsReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "value"])?;
    let s = &report.stats;
    let mut rows = vec![
        ("name".to_string(), report.name.clone()),
        ("frames_seen".into(), s.frames_seen.to_string()),
        ("frames_kept".into(), s.frames_kept.to_string()),
        ("instances_kept".into(), s.instances_kept.to_string()),
        (
            "instances_per_kept_frame".into(),
            format!("{:.6}", s.instances_per_kept_frame),
        ),
        (
            "merged_frames_seen".into(),
            s.merged_frames_seen.to_string(),
        ),
        (
            "merged_frames_kept".into(),
            report.merged_frames_kept.to_string(),
        ),
        (
            "wall_clock_equivalent_s".into(),
            format!("{:.6}", s.wall_clock_equivalent),
        ),
    ];
    for (class, n) in &report.per_class {
        rows.push((format!("class_{class}_instances"), n.to_string()));
    }
    for (k, v) in rows {
        w.write_record([k, v])?;
    }
    w.flush().map_err(|e| Error::io("stats", e))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub frames: usize,
    pub instances: usize,
    pub instances_per_frame: f64,
    pub merged_frame_rate: f64,
    pub wall_clock_equivalent: f64,
}

impl From<&StatsReport> for DatasetSummary {
    fn from(r: &StatsReport) -> Self {
        DatasetSummary {
            name: r.name.clone(),
            frames: r.stats.frames_kept,
            instances: r.stats.instances_kept,
            instances_per_frame: r.stats.instances_per_kept_frame,
            merged_frame_rate: ratio(r.merged_frames_kept, r.stats.frames_kept),
            wall_clock_equivalent: r.stats.wall_clock_equivalent,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub a: f64,
    pub b: f64,
    /// `b - a`
    pub delta: f64,
    /// `b / a`, absent when `a` is zero.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub a: DatasetSummary,
    pub b: DatasetSummary,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(&self, metric: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }
}

pub fn compare_datasets(a: &StatsReport, b: &StatsReport) -> ComparisonReport {
    let (sa, sb) = (DatasetSummary::from(a), DatasetSummary::from(b));
    let metrics = [
        ("frames", sa.frames as f64, sb.frames as f64),
        ("instances", sa.instances as f64, sb.instances as f64),
        (
            "instances_per_frame",
            sa.instances_per_frame,
            sb.instances_per_frame,
        ),
        (
            "merged_frame_rate",
            sa.merged_frame_rate,
            sb.merged_frame_rate,
        ),
        (
            "wall_clock_equivalent_s",
            sa.wall_clock_equivalent,
            sb.wall_clock_equivalent,
        ),
    ];
    let rows = metrics
        .into_iter()
        .map(|(metric, a, b)| ComparisonRow {
            metric: metric.to_string(),
            a,
            b,
            delta: b - a,
            ratio: (a != 0.0).then(|| b / a),
        })
        .collect();
    ComparisonReport { a: sa, b: sb, rows }
}

/// Columns: `metric,a,b,delta,ratio` (ratio empty when undefined).
pub fn write_comparison_csv<W: Write>(out: W, report: &ComparisonReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["metric", "a", "b", "delta", "ratio"])?;
    for r in &report.rows {
        w.write_record([
            r.metric.clone(),
            format!("{:.6}", r.a),
            format!("{:.6}", r.b),
            format!("{:.6}", r.delta),
            r.ratio.map(|v| format!("{v:.6}")).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("comparison", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{collect_active_time, collect_passive};
    use crate::synth::{generate, Preset, SceneConfig};

    fn header(mode: CollectionMode) -> DatasetHeader {
        DatasetHeader {
            name: format!("{mode}"),
            source: Some("stop_and_go".into()),
            collection_mode: mode,
            policy: PolicyConfig::default(),
            palette: Palette::default(),
            class_map: ExportClassMap::default(),
        }
    }

    fn frames(preset: Preset, seed: u64, n: u64) -> Vec<Result<crate::types::Frame>> {
        generate(SceneConfig::preset(preset, seed, n))
            .unwrap()
            .map(|g| Ok(g.frame))
            .collect()
    }

    #[test]
    fn write_read_round_trip() {
        let c = collect_passive(
            frames(Preset::DenseJunction, 1, 10),
            1,
            &PolicyConfig::default(),
            0.1,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let written = write_dataset(
            dir.path(),
            &header(CollectionMode::Passive),
            &c.kept,
            &c.stats,
        )
        .unwrap();
        let (read, loaded) = read_dataset(dir.path()).unwrap();
        assert_eq!(read, written);
        assert_eq!(loaded.len(), 10);
        let report = dataset_stats(dir.path()).unwrap();
        assert!(report.warnings.is_empty(), "{:?}", report.warnings);
        let label_lines: usize = loaded.iter().map(|l| l.labels.len()).sum();
        assert_eq!(report.stats.instances_kept, label_lines);
        assert_eq!(report.stats, c.stats);
    }

    #[test]
    fn missing_label_names_the_frame() {
        let c = collect_passive(
            frames(Preset::SparseRoad, 2, 4),
            1,
            &PolicyConfig::default(),
            0.1,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            &header(CollectionMode::Passive),
            &c.kept,
            &c.stats,
        )
        .unwrap();
        fs::remove_file(dir.path().join("labels/000002.txt")).unwrap();
        match read_dataset(dir.path()) {
            Err(Error::Integrity(p)) => {
                assert_eq!(p.len(), 1);
                assert!(p[0].contains("frame 2"), "{p:?}");
            }
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn corrupted_image_is_reported() {
        let c = collect_passive(
            frames(Preset::SparseRoad, 2, 3),
            1,
            &PolicyConfig::default(),
            0.1,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_dataset(
            dir.path(),
            &header(CollectionMode::Passive),
            &c.kept,
            &c.stats,
        )
        .unwrap();
        crate::types::Image::filled(8, 8, [1, 1, 1])
            .unwrap()
            .write_png(&dir.path().join("images/000001.png"))
            .unwrap();
        match read_dataset(dir.path()) {
            Err(Error::Integrity(p)) => {
                assert!(p.iter().any(|m| m.contains("checksum")));
                assert!(p.iter().any(|m| m.contains("8x8")));
            }
            other => panic!("expected integrity error, got {other:?}"),
        }
    }

    #[test]
    fn empty_dataset_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        let m = write_dataset(
            dir.path(),
            &header(CollectionMode::ActiveSize),
            &[],
            &CollectionStats::default(),
        )
        .unwrap();
        assert!(m.entries.is_empty());
        let r = dataset_stats(dir.path()).unwrap();
        assert_eq!(r.stats.frames_kept, 0);
        assert_eq!(r.stats.instances_kept, 0);
        assert_eq!(r.stats.instances_per_kept_frame, 0.0);
    }

    #[test]
    fn tampered_frame_count_warns() {
        let c = collect_passive(
            frames(Preset::SparseRoad, 3, 5),
            1,
            &PolicyConfig::default(),
            0.1,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut m = write_dataset(
            dir.path(),
            &header(CollectionMode::Passive),
            &c.kept,
            &c.stats,
        )
        .unwrap();
        m.stats.frames_kept = 99;
        write_json(&dir.path().join(DATASET_MANIFEST), &m).unwrap();
        let r = dataset_stats(dir.path()).unwrap();
        assert!(r.warnings.iter().any(|w| w.contains("99 kept frames")));
        assert_eq!(r.stats.frames_kept, 5);
    }

    #[test]
    fn stats_ignore_entry_order() {
        let c = collect_passive(
            frames(Preset::DenseJunction, 4, 8),
            1,
            &PolicyConfig::default(),
            0.1,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let mut m = write_dataset(
            dir.path(),
            &header(CollectionMode::Passive),
            &c.kept,
            &c.stats,
        )
        .unwrap();
        let first = dataset_stats(dir.path()).unwrap();
        assert_eq!(dataset_stats(dir.path()).unwrap(), first);
        m.entries.reverse();
        write_json(&dir.path().join(DATASET_MANIFEST), &m).unwrap();
        assert_eq!(dataset_stats(dir.path()).unwrap(), first);
    }

    #[test]
    fn comparison_identity_and_reciprocity() {
        let dir = tempfile::tempdir().unwrap();
        let (pa, pb) = (dir.path().join("a"), dir.path().join("b"));
        let stream = || frames(Preset::StopAndGo, 5, 120);
        let passive = collect_passive(stream(), 1, &PolicyConfig::default(), 0.1).unwrap();
        let active = collect_active_time(stream(), &PolicyConfig::default(), 0.1).unwrap();
        write_dataset(
            &pa,
            &header(CollectionMode::Passive),
            &passive.kept,
            &passive.stats,
        )
        .unwrap();
        write_dataset(
            &pb,
            &header(CollectionMode::ActiveTime),
            &active.kept,
            &active.stats,
        )
        .unwrap();
        let (a, b) = (dataset_stats(&pa).unwrap(), dataset_stats(&pb).unwrap());

        let same = compare_datasets(&a, &a);
        for r in &same.rows {
            assert_eq!(r.delta, 0.0);
            if r.a != 0.0 {
                assert_eq!(r.ratio, Some(1.0));
            }
        }
        let ab = compare_datasets(&a, &b);
        let ba = compare_datasets(&b, &a);
        for (x, y) in ab.rows.iter().zip(&ba.rows) {
            assert_eq!(x.delta, -y.delta);
            if let (Some(r1), Some(r2)) = (x.ratio, y.ratio) {
                assert!((r1 * r2 - 1.0).abs() < 1e-12);
            }
        }
        assert!(ab.row("frames").unwrap().ratio.unwrap() < 1.0);
        assert!(ab.row("instances").unwrap().ratio.unwrap() <= 1.0);

        let mut out = Vec::new();
        write_comparison_csv(&mut out, &ab).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("metric,a,b,delta,ratio\nframes,"));
    }
}
