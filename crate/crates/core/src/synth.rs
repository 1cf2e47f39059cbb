//! Deterministic synthetic driving scenes with exact ground truth.
//!
//! The world is a top-down 2-D strip: a textured road scrolls past a fixed
//! camera as the ego vehicle drives, vehicles move linearly and bounce off
//! the image bounds, traffic lights stand at the road edges. Objects are
//! painted in index order, so later objects occlude earlier ones. During a
//! scheduled pause nothing advances and consecutive frames are bitwise
//! identical.
//!
//! Ground truth is derived from object geometry (a pixel is visible for
//! object `i` when no later, present object covers it), not from the rendered
//! masks, so it can serve as an oracle for the mask labeler.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeler::InstanceRecord;
use crate::quality::occlusion_from_counts;
use crate::types::{
    decode_instance, decode_semantic, encode_instance, encode_semantic, ClassId, Frame, Image,
    InstanceMask, Palette, PixelBox, SemanticMask, BACKGROUND, ROAD, TRAFFIC_LIGHT, VEHICLE,
};

pub const SCENE_SCHEMA_VERSION: u32 = 1;
pub const SCENE_MANIFEST: &str = "scene.json";
pub const TRUTH_FILE: &str = "truth.txt";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    DenseJunction,
    SparseRoad,
    StopAndGo,
    /// Alternating dense and sparse traffic phases.
    Mixed,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::DenseJunction => "dense_junction",
            Preset::SparseRoad => "sparse_road",
            Preset::StopAndGo => "stop_and_go",
            Preset::Mixed => "mixed",
        }
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "dense_junction" => Ok(Preset::DenseJunction),
            "sparse_road" => Ok(Preset::SparseRoad),
            "stop_and_go" => Ok(Preset::StopAndGo),
            "mixed" => Ok(Preset::Mixed),
            _ => Err(format!(
                "unknown preset '{s}' (expected dense_junction, sparse_road, stop_and_go or mixed)"
            )),
        }
    }
}

/// World freeze covering frames `start .. start + length`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pause {
    pub start: u64,
    pub length: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub seed: u64,
    pub width: u32,
    pub height: u32,
    pub n_vehicles: u32,
    pub n_lights: u32,
    /// Vehicle speed bounds in pixels per frame.
    pub speed_range: (f64, f64),
    /// Road scroll per frame in pixels.
    pub ego_speed: u32,
    pub frame_period: f64,
    pub n_frames: u64,
    pub pause_schedule: Vec<Pause>,
    pub preset: Preset,
    /// Length of each dense/sparse traffic phase in world ticks; 0 disables
    /// phases.
    pub phase_len: u64,
}

impl SceneConfig {
    pub fn preset(preset: Preset, seed: u64, n_frames: u64) -> Self {
        let mut cfg = SceneConfig {
            seed,
            width: 160,
            height: 96,
            n_vehicles: 6,
            n_lights: 2,
            speed_range: (0.5, 2.5),
            ego_speed: 3,
            frame_period: 0.1,
            n_frames,
            pause_schedule: Vec::new(),
            preset,
            phase_len: 0,
        };
        match preset {
            Preset::DenseJunction => {
                cfg.n_vehicles = 12;
                cfg.n_lights = 4;
            }
            Preset::SparseRoad => {
                cfg.n_vehicles = 3;
                cfg.n_lights = 1;
            }
            Preset::StopAndGo => {
                cfg.pause_schedule = stop_and_go_schedule(seed, n_frames);
            }
            Preset::Mixed => {
                cfg.n_vehicles = 12;
                cfg.phase_len = 24;
            }
        }
        cfg
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("zero-area scene {}x{}", self.width, self.height));
        }
        if self.width < 16 || self.height < 16 {
            return bad(format!(
                "scene {}x{} is too small (minimum 16x16)",
                self.width, self.height
            ));
        }
        if self.n_frames == 0 {
            return bad("n_frames must be at least 1".into());
        }
        if self.n_vehicles as u64 + self.n_lights as u64 > u16::MAX as u64 {
            return bad("too many objects for 16-bit instance ids".into());
        }
        let (lo, hi) = self.speed_range;
        if !(lo >= 0.0 && lo <= hi && hi.is_finite()) {
            return bad(format!("invalid speed range {lo}..{hi}"));
        }
        if !(self.frame_period > 0.0 && self.frame_period.is_finite()) {
            return bad(format!("invalid frame period {}", self.frame_period));
        }
        let mut pauses = self.pause_schedule.clone();
        pauses.sort_by_key(|p| p.start);
        for p in &pauses {
            if p.length == 0 || p.start + p.length > self.n_frames {
                return bad(format!(
                    "pause {}+{} outside [0, {})",
                    p.start, p.length, self.n_frames
                ));
            }
        }
        for pair in pauses.windows(2) {
            if pair[0].start + pair[0].length > pair[1].start {
                return bad(format!(
                    "pauses at {} and {} overlap",
                    pair[0].start, pair[1].start
                ));
            }
        }
        Ok(())
    }

    /// True when the world does not advance between frame `t - 1` and `t`.
    fn frozen_before(&self, t: u64) -> bool {
        self.pause_schedule
            .iter()
            .any(|p| t > p.start && t < p.start + p.length)
    }
}

/// Short stops spread over the stream: one every 60 frames, 3 to 5 frames
/// long.
fn stop_and_go_schedule(seed: u64, n_frames: u64) -> Vec<Pause> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5_7A11);
    let count = (n_frames / 60).max(1);
    let segment = n_frames / count;
    let mut pauses = Vec::new();
    for j in 0..count {
        let length = rng.gen_range(3..=5u64);
        if segment < length + 2 {
            continue;
        }
        let start = j * segment + rng.gen_range(1..=segment - length);
        pauses.push(Pause { start, length });
    }
    pauses
}

#[derive(Clone, Debug)]
struct Object {
    class_id: ClassId,
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    w: u32,
    h: u32,
    color: [u8; 3],
}

impl Object {
    fn rect(&self) -> PixelBox {
        let x = self.x.floor() as u32;
        let y = self.y.floor() as u32;
        PixelBox {
            x_min: x,
            y_min: y,
            x_max: x + self.w,
            y_max: y + self.h,
        }
    }
}

/// One rendered frame together with its visible-region ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct GroundTruthFrame {
    pub frame: Frame,
    pub truth: Vec<InstanceRecord>,
}

/// Stateful frame source for one scene.
pub struct SceneGenerator {
    config: SceneConfig,
    palette: Palette,
    objects: Vec<Object>,
    next_frame: u64,
    world_clock: u64,
}

pub fn generate(config: SceneConfig) -> Result<SceneGenerator> {
    SceneGenerator::new(config)
}

impl SceneGenerator {
    pub fn new(config: SceneConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (w, h) = (config.width, config.height);
        let mut objects = Vec::new();
        for _ in 0..config.n_vehicles {
            let ow = rng.gen_range((w / 13).max(2)..=(w / 6).max(3));
            let oh = rng.gen_range((h / 12).max(2)..=(h / 6).max(3));
            let speed = if config.speed_range.0 < config.speed_range.1 {
                rng.gen_range(config.speed_range.0..config.speed_range.1)
            } else {
                config.speed_range.0
            };
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            objects.push(Object {
                class_id: VEHICLE,
                x: rng.gen_range(0.0..(w - ow) as f64),
                y: rng.gen_range(0.0..(h - oh) as f64),
                vx: speed * angle.cos(),
                vy: speed * angle.sin(),
                w: ow,
                h: oh,
                color: [
                    rng.gen_range(30..=240),
                    rng.gen_range(30..=240),
                    rng.gen_range(30..=240),
                ],
            });
        }
        let (lw, lh) = ((w / 40).max(2), (h / 10).max(4));
        let (road_x0, road_x1) = road_band(w);
        for i in 0..config.n_lights {
            let x = if i % 2 == 0 {
                road_x0.saturating_sub(lw)
            } else {
                road_x1.min(w - lw)
            };
            objects.push(Object {
                class_id: TRAFFIC_LIGHT,
                x: x as f64,
                y: rng.gen_range(0..=h - lh) as f64,
                vx: 0.0,
                vy: 0.0,
                w: lw,
                h: lh,
                color: [20, 20, 20],
            });
        }
        Ok(SceneGenerator {
            config,
            palette: Palette::default(),
            objects,
            next_frame: 0,
            world_clock: 0,
        })
    }

    pub fn config(&self) -> &SceneConfig {
        &self.config
    }

    pub fn palette(&self) -> &Palette {
        &self.palette
    }

    fn advance(&mut self) {
        let (w, h) = (self.config.width as f64, self.config.height as f64);
        for o in &mut self.objects {
            o.x += o.vx;
            o.y += o.vy;
            let max_x = w - o.w as f64;
            let max_y = h - o.h as f64;
            if o.x < 0.0 {
                o.x = -o.x;
                o.vx = -o.vx;
            } else if o.x > max_x {
                o.x = 2.0 * max_x - o.x;
                o.vx = -o.vx;
            }
            if o.y < 0.0 {
                o.y = -o.y;
                o.vy = -o.vy;
            } else if o.y > max_y {
                o.y = 2.0 * max_y - o.y;
                o.vy = -o.vy;
            }
            o.x = o.x.clamp(0.0, max_x);
            o.y = o.y.clamp(0.0, max_y);
        }
        self.world_clock += 1;
    }

    fn present(&self, index: usize) -> bool {
        let o = &self.objects[index];
        if o.class_id != VEHICLE || self.config.phase_len == 0 {
            return true;
        }
        let sparse = (self.world_clock / self.config.phase_len) % 2 == 1;
        !sparse || index < (self.config.n_vehicles as usize / 4).max(1)
    }

    fn render(&self, frame_id: u64) -> Result<GroundTruthFrame> {
        let (w, h) = (self.config.width, self.config.height);
        let n = w as usize * h as usize;
        let mut rgb = vec![0u8; n * 3];
        let mut sem = vec![BACKGROUND; n];
        let mut inst = vec![0u16; n];

        let (road_x0, road_x1) = road_band(w);
        let lane = w / 2;
        let offset = self.config.ego_speed as i64 * self.world_clock as i64;
        for y in 0..h {
            let wy = y as i64 - offset;
            for x in 0..w {
                let i = (y * w + x) as usize;
                let n = value_noise(self.config.seed, x as i64, wy);
                let color = if x >= road_x0 && x < road_x1 {
                    sem[i] = ROAD;
                    if x + 1 >= lane && x <= lane && wy.rem_euclid(16) < 8 {
                        [230, 230, 230]
                    } else {
                        let g = (70.0 + 90.0 * n) as u8;
                        [g, g, g.saturating_add(6)]
                    }
                } else {
                    [
                        (40.0 + 70.0 * n) as u8,
                        (80.0 + 90.0 * n) as u8,
                        (30.0 + 50.0 * n) as u8,
                    ]
                };
                rgb[i * 3..i * 3 + 3].copy_from_slice(&color);
            }
        }

        let present: Vec<usize> = (0..self.objects.len())
            .filter(|&i| self.present(i))
            .collect();
        let rects: Vec<PixelBox> = self.objects.iter().map(Object::rect).collect();
        for &k in &present {
            let o = &self.objects[k];
            let r = rects[k];
            for y in r.y_min..r.y_max {
                for x in r.x_min..r.x_max {
                    let i = (y * w + x) as usize;
                    let edge = x == r.x_min || y == r.y_min || x + 1 == r.x_max || y + 1 == r.y_max;
                    let color = match o.class_id {
                        TRAFFIC_LIGHT if y < r.y_min + r.height() / 3 => [230, 30, 30],
                        _ if edge => o.color.map(|c| c / 2),
                        _ => o.color,
                    };
                    rgb[i * 3..i * 3 + 3].copy_from_slice(&color);
                    sem[i] = o.class_id;
                    inst[i] = k as u16 + 1;
                }
            }
        }

        let truth = self.visible_truth(&present, &rects);
        let frame = Frame::new(
            frame_id,
            frame_id as f64 * self.config.frame_period,
            Image::new(w, h, rgb)?,
            SemanticMask::new(w, h, sem)?,
            InstanceMask::new(w, h, inst)?,
        )?;
        Ok(GroundTruthFrame { frame, truth })
    }

    /// Visible pixels per object from rectangle geometry and depth order.
    fn visible_truth(&self, present: &[usize], rects: &[PixelBox]) -> Vec<InstanceRecord> {
        let mut records = Vec::new();
        for (pos, &k) in present.iter().enumerate() {
            let r = rects[k];
            let nearer = &present[pos + 1..];
            let mut area = 0u64;
            let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
            for y in r.y_min..r.y_max {
                for x in r.x_min..r.x_max {
                    if nearer.iter().any(|&j| rects[j].contains(x, y)) {
                        continue;
                    }
                    area += 1;
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x + 1);
                    y1 = y1.max(y + 1);
                }
            }
            if area == 0 {
                continue;
            }
            let bbox = PixelBox {
                x_min: x0,
                y_min: y0,
                x_max: x1,
                y_max: y1,
            };
            records.push(InstanceRecord {
                instance_id: k as u16 + 1,
                class_id: self.objects[k].class_id,
                bbox,
                pixel_area: area,
                occlusion: occlusion_from_counts(area, bbox.area()),
            });
        }
        records
    }
}

impl Iterator for SceneGenerator {
    type Item = GroundTruthFrame;

    fn next(&mut self) -> Option<GroundTruthFrame> {
        let t = self.next_frame;
        if t >= self.config.n_frames {
            return None;
        }
        if t > 0 && !self.config.frozen_before(t) {
            self.advance();
        }
        self.next_frame += 1;
        // Dimensions were validated at construction.
        Some(self.render(t).expect("validated scene renders"))
    }
}

fn road_band(width: u32) -> (u32, u32) {
    (width / 8, width - width / 8)
}

fn lattice(seed: u64, ix: i64, iy: i64) -> f64 {
    let mut z = seed
        ^ (ix as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ (iy as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Bilinear value noise on a 4-pixel lattice, in [0, 1).
fn value_noise(seed: u64, x: i64, y: i64) -> f64 {
    const CELL: i64 = 4;
    let (cx, cy) = (x.div_euclid(CELL), y.div_euclid(CELL));
    let fx = x.rem_euclid(CELL) as f64 / CELL as f64;
    let fy = y.rem_euclid(CELL) as f64 / CELL as f64;
    let a = lattice(seed, cx, cy);
    let b = lattice(seed, cx + 1, cy);
    let c = lattice(seed, cx, cy + 1);
    let d = lattice(seed, cx + 1, cy + 1);
    let top = a + (b - a) * fx;
    let bottom = c + (d - c) * fx;
    top + (bottom - top) * fy
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneFrameEntry {
    pub frame_id: u64,
    pub timestamp: f64,
}

/// `scene.json` at the root of an exported scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub schema_version: u32,
    pub config: Option<SceneConfig>,
    pub palette: Palette,
    pub frames: Vec<SceneFrameEntry>,
}

pub fn frame_file_name(frame_id: u64, ext: &str) -> String {
    format!("{frame_id:06}.{ext}")
}

/// Writes `rgb/`, `semantic/`, `instance/` PNG triples, `truth.txt` and
/// `scene.json` under `dir`.
pub fn export_scene<'a>(
    frames: impl IntoIterator<Item = &'a GroundTruthFrame>,
    config: Option<&SceneConfig>,
    palette: &Palette,
    dir: &Path,
) -> Result<SceneManifest> {
    for sub in ["rgb", "semantic", "instance"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let mut truth = String::from(
        "# frame_id instance_id class_id x_min y_min x_max y_max pixel_area occlusion\n",
    );
    let mut entries = Vec::new();
    for gt in frames {
        let f = &gt.frame;
        let name = frame_file_name(f.frame_id, "png");
        f.rgb.write_png(&dir.join("rgb").join(&name))?;
        encode_semantic(&f.semantic, palette)?.write_png(&dir.join("semantic").join(&name))?;
        encode_instance(&f.instance, &f.semantic)?.write_png(&dir.join("instance").join(&name))?;
        for r in &gt.truth {
            let b = r.bbox;
            let _ = writeln!(
                truth,
                "{} {} {} {} {} {} {} {} {}",
                f.frame_id,
                r.instance_id,
                r.class_id,
                b.x_min,
                b.y_min,
                b.x_max,
                b.y_max,
                r.pixel_area,
                r.occlusion
            );
        }
        entries.push(SceneFrameEntry {
            frame_id: f.frame_id,
            timestamp: f.timestamp,
        });
    }
    let truth_path = dir.join(TRUTH_FILE);
    fs::write(&truth_path, truth).map_err(|e| Error::io(&truth_path, e))?;
    let manifest = SceneManifest {
        schema_version: SCENE_SCHEMA_VERSION,
        config: config.cloned(),
        palette: palette.clone(),
        frames: entries,
    };
    write_json(&dir.join(SCENE_MANIFEST), &manifest)?;
    Ok(manifest)
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// An exported scene opened for reading. Frames are loaded lazily.
pub struct SceneDir {
    root: PathBuf,
    manifest: SceneManifest,
    truth: BTreeMap<u64, Vec<InstanceRecord>>,
}

impl SceneDir {
    pub fn open(root: &Path) -> Result<Self> {
        let manifest: SceneManifest = read_json(&root.join(SCENE_MANIFEST))?;
        if manifest.schema_version != SCENE_SCHEMA_VERSION {
            return Err(Error::InvalidConfig(format!(
                "unsupported scene schema version {}",
                manifest.schema_version
            )));
        }
        let truth = read_truth(&root.join(TRUTH_FILE))?;
        Ok(SceneDir {
            root: root.to_path_buf(),
            manifest,
            truth,
        })
    }

    pub fn manifest(&self) -> &SceneManifest {
        &self.manifest
    }

    pub fn len(&self) -> usize {
        self.manifest.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.frames.is_empty()
    }

    pub fn load(&self, index: usize) -> Result<GroundTruthFrame> {
        let entry = &self.manifest.frames[index];
        let name = frame_file_name(entry.frame_id, "png");
        let rgb = Image::read_png(&self.root.join("rgb").join(&name))?;
        let sem_path = self.root.join("semantic").join(&name);
        let semantic = decode_semantic(&Image::read_png(&sem_path)?, &self.manifest.palette)
            .map_err(|e| Error::InvalidImage(format!("{}: {e}", sem_path.display())))?;
        let instance = decode_instance(&Image::read_png(&self.root.join("instance").join(&name))?);
        let frame = Frame::new(entry.frame_id, entry.timestamp, rgb, semantic, instance)?;
        Ok(GroundTruthFrame {
            frame,
            truth: self.truth.get(&entry.frame_id).cloned().unwrap_or_default(),
        })
    }

    pub fn frames(&self) -> impl Iterator<Item = Result<GroundTruthFrame>> + '_ {
        (0..self.len()).map(move |i| self.load(i))
    }
}

pub fn import_scene(root: &Path) -> Result<(SceneManifest, Vec<GroundTruthFrame>)> {
    let dir = SceneDir::open(root)?;
    let frames = dir.frames().collect::<Result<Vec<_>>>()?;
    Ok((dir.manifest, frames))
}

fn read_truth(path: &Path) -> Result<BTreeMap<u64, Vec<InstanceRecord>>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out: BTreeMap<u64, Vec<InstanceRecord>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 9 {
            return Err(err(format!("expected 9 fields, found {}", f.len())));
        }
        fn num<T: FromStr>(s: &str) -> std::result::Result<T, String> {
            s.parse().map_err(|_| format!("invalid value '{s}'"))
        }
        let parsed = (|| -> std::result::Result<(u64, InstanceRecord), String> {
            let bbox = PixelBox::new(num(f[3])?, num(f[4])?, num(f[5])?, num(f[6])?)
                .map_err(|e| e.to_string())?;
            Ok((
                num(f[0])?,
                InstanceRecord {
                    instance_id: num(f[1])?,
                    class_id: num(f[2])?,
                    bbox,
                    pixel_area: num(f[7])?,
                    occlusion: num(f[8])?,
                },
            ))
        })()
        .map_err(err)?;
        out.entry(parsed.0).or_default().push(parsed.1);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeler::extract_instances;
    use crate::quality::{frame_similarity, SimilarityWindow};

    fn stream(cfg: SceneConfig) -> Vec<GroundTruthFrame> {
        generate(cfg).unwrap().collect()
    }

    #[test]
    fn same_config_is_bitwise_deterministic() {
        let cfg = SceneConfig::preset(Preset::DenseJunction, 42, 15);
        assert_eq!(stream(cfg.clone()), stream(cfg));
    }

    #[test]
    fn prefix_is_independent_of_stream_length() {
        let short = stream(SceneConfig::preset(Preset::Mixed, 4, 10));
        let long = stream(SceneConfig::preset(Preset::Mixed, 4, 30));
        assert_eq!(short[..], long[..10]);
    }

    #[test]
    fn pause_yields_identical_frames() {
        let mut cfg = SceneConfig::preset(Preset::SparseRoad, 1, 20);
        cfg.pause_schedule = vec![Pause {
            start: 6,
            length: 5,
        }];
        let frames = stream(cfg);
        let pixels = |i: usize| (&frames[i].frame.rgb, &frames[i].frame.instance);
        for i in 7..11 {
            assert_eq!(pixels(i), pixels(6));
        }
        assert_ne!(pixels(5), pixels(6));
        assert_ne!(pixels(11), pixels(10));
        let q = frame_similarity(
            &frames[6].frame,
            &frames[10].frame,
            SimilarityWindow::default(),
        )
        .unwrap();
        assert_eq!(q, 1.0);
        assert_eq!(frames[8].frame.frame_id, 8);
        assert!(frames[8].frame.timestamp > frames[7].frame.timestamp);
    }

    #[test]
    fn dense_junction_is_denser_than_sparse_road() {
        let mean = |p| {
            let frames = stream(SceneConfig::preset(p, 9, 40));
            frames.iter().map(|g| g.truth.len()).sum::<usize>() as f64 / frames.len() as f64
        };
        assert!(mean(Preset::DenseJunction) > mean(Preset::SparseRoad));
    }

    #[test]
    fn truth_matches_labeler_and_class_pixel_counts() {
        for preset in [
            Preset::DenseJunction,
            Preset::SparseRoad,
            Preset::StopAndGo,
            Preset::Mixed,
        ] {
            for gt in stream(SceneConfig::preset(preset, 21, 30)) {
                assert_eq!(extract_instances(&gt.frame, 1).unwrap(), gt.truth);
                for class in [VEHICLE, TRAFFIC_LIGHT] {
                    let truth_px: u64 = gt
                        .truth
                        .iter()
                        .filter(|r| r.class_id == class)
                        .map(|r| r.pixel_area)
                        .sum();
                    let mask_px = gt
                        .frame
                        .semantic
                        .class_ids()
                        .iter()
                        .filter(|&&c| c == class)
                        .count() as u64;
                    assert_eq!(truth_px, mask_px);
                }
            }
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = SceneConfig::preset(Preset::SparseRoad, 0, 10);
        cfg.n_frames = 0;
        assert!(generate(cfg.clone()).is_err());
        cfg.n_frames = 10;
        cfg.width = 0;
        assert!(generate(cfg.clone()).is_err());
        cfg.width = 160;
        cfg.pause_schedule = vec![
            Pause {
                start: 2,
                length: 4,
            },
            Pause {
                start: 4,
                length: 2,
            },
        ];
        assert!(generate(cfg.clone()).is_err());
        cfg.pause_schedule = vec![Pause {
            start: 8,
            length: 4,
        }];
        assert!(generate(cfg).is_err());
    }

    #[test]
    fn stop_and_go_schedule_is_valid() {
        for seed in 0..20 {
            for n in [1, 7, 60, 120, 240, 1000] {
                let cfg = SceneConfig::preset(Preset::StopAndGo, seed, n);
                cfg.validate().unwrap();
                if n >= 60 {
                    assert!(!cfg.pause_schedule.is_empty());
                }
            }
        }
    }

    #[test]
    fn export_import_round_trip() {
        let cfg = SceneConfig::preset(Preset::StopAndGo, 3, 20);
        let frames = stream(cfg.clone());
        let dir = tempfile::tempdir().unwrap();
        let manifest = export_scene(&frames, Some(&cfg), &Palette::default(), dir.path()).unwrap();
        let (back_manifest, back) = import_scene(dir.path()).unwrap();
        assert_eq!(back_manifest, manifest);
        assert_eq!(back, frames);
        for gt in &back {
            assert_eq!(
                extract_instances(&gt.frame, 1).unwrap().len(),
                gt.truth.len()
            );
        }
    }

    #[test]
    fn export_of_empty_stream_is_valid() {
        let dir = tempfile::tempdir().unwrap();
        export_scene(&[], None, &Palette::default(), dir.path()).unwrap();
        let (manifest, frames) = import_scene(dir.path()).unwrap();
        assert!(manifest.frames.is_empty());
        assert!(frames.is_empty());
    }
}
