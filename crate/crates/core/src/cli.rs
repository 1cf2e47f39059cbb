//! Command-line front end.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use crate::dataset::{
    compare_datasets, dataset_stats, read_dataset, write_comparison_csv, write_dataset,
    write_stats_csv, CollectionMode, DatasetHeader, StatsReport,
};
use crate::eval::{
    evaluate, format_report, read_prediction_file, write_report_csv, ApMode, EvalConfig,
    GroundTruth,
};
use crate::labeler::{extract_instances, to_yolo_labels, write_label_file, ExportClassMap};
use crate::policy::{
    collect_active_size, collect_active_time, collect_passive, write_decision_log, Collection,
    PolicyConfig, ReferenceMode,
};
use crate::quality::{DEFAULT_MIN_AREA, DEFAULT_WINDOW};
use crate::synth::{export_scene, frame_file_name, generate, Pause, Preset, SceneConfig, SceneDir};
use crate::types::yolo_to_pixel_box;

#[derive(Debug, Parser)]
#[command(
    name = "adacq",
    version,
    about = "Active data acquisition for driving-perception datasets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene and export RGB, semantic and instance frames.
    Synth(SynthArgs),
    /// Filter a scene into a dataset with a passive or active policy.
    Collect(CollectArgs),
    /// Write YOLO labels for every frame of a scene.
    Label(LabelArgs),
    /// Recount a dataset's statistics from its label files.
    Stats(StatsArgs),
    /// Score per-frame predictions against a dataset's labels.
    Eval(EvalArgs),
    /// Compare two datasets.
    Compare(CompareArgs),
}

fn parse_pause(s: &str) -> Result<Pause, String> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected START:LENGTH, got '{s}'"))?;
    let start = a.parse().map_err(|_| format!("bad pause start '{a}'"))?;
    let length = b.parse().map_err(|_| format!("bad pause length '{b}'"))?;
    Ok(Pause { start, length })
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value = "stop_and_go")]
    pub preset: Preset,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub frames: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub width: Option<u32>,
    #[arg(long)]
    pub height: Option<u32>,
    #[arg(long)]
    pub vehicles: Option<u32>,
    #[arg(long)]
    pub lights: Option<u32>,
    /// Background scroll in pixels per tick.
    #[arg(long)]
    pub ego_speed: Option<u32>,
    /// Seconds between frames.
    #[arg(long)]
    pub frame_period: Option<f64>,
    /// Replaces the preset's pause schedule; repeatable, START:LENGTH.
    #[arg(long = "pause", value_parser = parse_pause)]
    pub pauses: Vec<Pause>,
    /// Drop all pauses.
    #[arg(long, conflicts_with = "pauses")]
    pub no_pauses: bool,
}

impl SynthArgs {
    pub fn scene_config(&self) -> SceneConfig {
        let mut c = SceneConfig::preset(self.preset, self.seed, self.frames);
        if let Some(v) = self.width {
            c.width = v;
        }
        if let Some(v) = self.height {
            c.height = v;
        }
        if let Some(v) = self.vehicles {
            c.n_vehicles = v;
        }
        if let Some(v) = self.lights {
            c.n_lights = v;
        }
        if let Some(v) = self.ego_speed {
            c.ego_speed = v;
        }
        if let Some(v) = self.frame_period {
            c.frame_period = v;
        }
        if self.no_pauses {
            c.pause_schedule.clear();
        } else if !self.pauses.is_empty() {
            c.pause_schedule = self.pauses.clone();
        }
        c
    }
}

#[derive(Debug, Args)]
pub struct PolicyArgs {
    /// Similarity at or above which a frame is redundant.
    #[arg(long, default_value_t = 0.90)]
    pub tau: f64,
    /// UQI tile size in pixels.
    #[arg(long, default_value_t = DEFAULT_WINDOW)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub min_instances: usize,
    #[arg(long)]
    pub drop_merged: bool,
    #[arg(long, default_value_t = 0)]
    pub max_merged: usize,
    #[arg(long, default_value_t = 0.05)]
    pub density_boost: f64,
    #[arg(long, default_value_t = 4)]
    pub boost_at: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_AREA)]
    pub min_area: u64,
    /// previous-kept or previous-raw.
    #[arg(long, default_value = "previous-kept")]
    pub reference: ReferenceMode,
}

impl PolicyArgs {
    pub fn config(&self) -> PolicyConfig {
        PolicyConfig {
            tau: self.tau,
            window_b: self.window,
            min_instances: self.min_instances,
            drop_merged: self.drop_merged,
            max_merged: self.max_merged,
            density_boost: self.density_boost,
            boost_at: self.boost_at,
            min_area: self.min_area,
            reference_mode: self.reference,
        }
    }
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// passive, active-time or active-size.
    #[arg(long)]
    pub mode: CollectionMode,
    /// Passive mode keeps every stride-th frame.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub stride: u64,
    /// Quota for active-size mode.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub target_frames: Option<u64>,
    /// Dataset name recorded in the manifest; defaults to the output directory name.
    #[arg(long)]
    pub name: Option<String>,
    #[command(flatten)]
    pub policy: PolicyArgs,
}

#[derive(Debug, Args)]
pub struct LabelArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_MIN_AREA)]
    pub min_area: u64,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    pub dataset: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Directory of per-frame `class cx cy w h conf` files named like the labels.
    #[arg(long)]
    pub preds: PathBuf,
    /// Dataset directory whose labels are the ground truth.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    /// all-points or 101-point.
    #[arg(long, default_value = "101-point")]
    pub ap_mode: ApMode,
    #[arg(long, default_value_t = 0.25)]
    pub conf: f64,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub a: PathBuf,
    pub b: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Collect(a) => cmd_collect(&a),
        Command::Label(a) => cmd_label(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::Compare(a) => cmd_compare(&a),
    }
}

fn csv_file(path: &Path) -> anyhow::Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

pub fn cmd_synth(a: &SynthArgs) -> anyhow::Result<()> {
    let config = a.scene_config();
    let gen = generate(config.clone())?;
    let palette = gen.palette().clone();
    let frames = gen.collect::<Vec<_>>();
    export_scene(&frames, Some(&config), &palette, &a.out)?;
    let paused: u64 = config.pause_schedule.iter().map(|p| p.length).sum();
    println!(
        "synth: preset={} seed={} frames={} pauses={} paused_frames={} out={}",
        config.preset.name(),
        config.seed,
        frames.len(),
        config.pause_schedule.len(),
        paused,
        a.out.display()
    );
    Ok(())
}

fn frame_period_of(scene: &SceneDir) -> f64 {
    let m = scene.manifest();
    if let Some(c) = &m.config {
        return c.frame_period;
    }
    match m.frames.as_slice() {
        [a, b, ..] if b.timestamp > a.timestamp => b.timestamp - a.timestamp,
        _ => 0.1,
    }
}

pub fn cmd_collect(a: &CollectArgs) -> anyhow::Result<()> {
    let scene = SceneDir::open(&a.scene)?;
    let policy = a.policy.config();
    policy.validate()?;
    let period = frame_period_of(&scene);
    let stream = scene.frames().map(|r| r.map(|g| g.frame));
    let collection: Collection = match a.mode {
        CollectionMode::Passive => collect_passive(stream, a.stride as usize, &policy, period)?,
        CollectionMode::ActiveTime => collect_active_time(stream, &policy, period)?,
        CollectionMode::ActiveSize => {
            let Some(target) = a.target_frames else {
                bail!("--target-frames is required for --mode active-size");
            };
            collect_active_size(stream, &policy, target as usize, period)?
        }
    };
    let name = a.name.clone().unwrap_or_else(|| {
        a.out
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "dataset".into())
    });
    let header = DatasetHeader {
        name,
        source: scene
            .manifest()
            .config
            .as_ref()
            .map(|c| c.preset.name().to_string()),
        collection_mode: a.mode,
        policy,
        palette: scene.manifest().palette.clone(),
        class_map: ExportClassMap::default(),
    };
    write_dataset(&a.out, &header, &collection.kept, &collection.stats)?;
    let mut log = csv_file(&a.out.join("decisions.csv"))?;
    write_decision_log(&mut log, &collection.decisions)?;
    log.flush()?;

    let s = &collection.stats;
    if let Some(q) = &s.quota {
        if !q.reached {
            eprintln!(
                "warning: scene exhausted after {} frames with {} of {} target frames kept",
                s.frames_seen, s.frames_kept, q.target
            );
        }
    }
    println!(
        "collect: mode={} seen={} kept={} instances={} instances_per_frame={:.3} wall_clock_s={:.3} out={}",
        a.mode,
        s.frames_seen,
        s.frames_kept,
        s.instances_kept,
        s.instances_per_kept_frame,
        s.wall_clock_equivalent,
        a.out.display()
    );
    Ok(())
}

pub fn cmd_label(a: &LabelArgs) -> anyhow::Result<()> {
    let scene = SceneDir::open(&a.scene)?;
    let map = ExportClassMap::default();
    let dir = a.out.join("labels");
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let (mut frames, mut labels) = (0usize, 0usize);
    for g in scene.frames() {
        let f = g?.frame;
        let records = extract_instances(&f, a.min_area)?;
        let yolo = to_yolo_labels(&records, f.width(), f.height(), &map)?;
        write_label_file(&yolo, &dir.join(frame_file_name(f.frame_id, "txt")))?;
        frames += 1;
        labels += yolo.len();
    }
    println!(
        "label: frames={frames} labels={labels} out={}",
        dir.display()
    );
    Ok(())
}

fn print_stats(r: &StatsReport) {
    let s = &r.stats;
    println!("dataset           {}", r.name);
    println!("frames seen       {}", s.frames_seen);
    println!("frames kept       {}", s.frames_kept);
    println!("instances         {}", s.instances_kept);
    println!("instances/frame   {:.3}", s.instances_per_kept_frame);
    println!(
        "merged frames     {} seen, {} kept",
        s.merged_frames_seen, r.merged_frames_kept
    );
    println!("wall clock (s)    {:.3}", s.wall_clock_equivalent);
    for (class, n) in &r.per_class {
        println!("class {class:<11} {n}");
    }
}

pub fn cmd_stats(a: &StatsArgs) -> anyhow::Result<()> {
    let report = dataset_stats(&a.dataset)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    print_stats(&report);
    if let Some(path) = &a.csv {
        let mut out = csv_file(path)?;
        write_stats_csv(&mut out, &report)?;
        out.flush()?;
    }
    Ok(())
}

pub fn cmd_eval(a: &EvalArgs) -> anyhow::Result<()> {
    let config = EvalConfig {
        iou_threshold: a.iou,
        ap_mode: a.ap_mode,
        confidence_cut: a.conf,
    };
    let (_, loaded) = read_dataset(&a.truth)?;
    let mut truths = Vec::new();
    let mut preds = Vec::new();
    let mut known = BTreeMap::new();
    for l in &loaded {
        let e = &l.entry;
        for label in &l.labels {
            truths.push(GroundTruth {
                frame_id: e.frame_id,
                class_id: label.class_id,
                bbox: yolo_to_pixel_box(&label.geometry(), e.width, e.height)?,
            });
        }
        let name = frame_file_name(e.frame_id, "txt");
        let path = a.preds.join(&name);
        if path.exists() {
            preds.extend(read_prediction_file(&path, e.frame_id, e.width, e.height)?);
        }
        known.insert(name, ());
    }
    if !a.preds.is_dir() {
        bail!("prediction directory {} not found", a.preds.display());
    }
    let mut extra: Vec<String> = fs::read_dir(&a.preds)
        .with_context(|| format!("reading {}", a.preds.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".txt") && !known.contains_key(n))
        .collect();
    extra.sort();
    for n in extra {
        eprintln!("warning: {n} has no matching dataset frame; ignored");
    }
    let report = evaluate(&preds, &truths, &config)?;
    print!("{}", format_report(&report));
    if let Some(path) = &a.csv {
        let mut out = csv_file(path)?;
        write_report_csv(&mut out, &report)?;
        out.flush()?;
    }
    Ok(())
}

pub fn cmd_compare(a: &CompareArgs) -> anyhow::Result<()> {
    let ra = dataset_stats(&a.a)?;
    let rb = dataset_stats(&a.b)?;
    for w in ra.warnings.iter().chain(&rb.warnings) {
        eprintln!("warning: {w}");
    }
    let report = compare_datasets(&ra, &rb);
    println!(
        "{:<26}{:>14}{:>14}{:>14}{:>10}",
        "metric", ra.name, rb.name, "delta", "ratio"
    );
    for r in &report.rows {
        println!(
            "{:<26}{:>14.3}{:>14.3}{:>14.3}{:>10}",
            r.metric,
            r.a,
            r.b,
            r.delta,
            r.ratio
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "-".into())
        );
    }
    if let Some(path) = &a.csv {
        let mut out = csv_file(path)?;
        write_comparison_csv(&mut out, &report)?;
        out.flush()?;
    }
    Ok(())
}

/// Parses arguments, runs the command and maps failures to exit code 1.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(io::stderr(), "error: {e:#}");
            1
        }
    }
}
