//! Frame similarity (Universal Image Quality Index) and frame-quality
//! measurements: instance density, merged same-class blobs, occlusion.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ClassId, Frame, Image, InstanceId, Palette, TARGET_CLASSES};

pub const DEFAULT_WINDOW: usize = 8;
pub const DEFAULT_MIN_AREA: u64 = 25;

/// Real-valued single-channel raster.
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl Plane {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::LengthMismatch(format!(
                "plane {width}x{height} given {} samples",
                data.len()
            )));
        }
        Ok(Plane {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }
}

/// Rec.601 luma.
pub fn luma(rgb: &Image) -> Plane {
    let data = rgb
        .pixels()
        .chunks_exact(3)
        .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
        .collect();
    Plane {
        width: rgb.width(),
        height: rgb.height(),
        data,
    }
}

/// First and second moments of a pair of equally sized sample windows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowStats {
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov_xy: f64,
}

impl WindowStats {
    /// Sample statistics (divisor `n - 1`). Requires `x.len() == y.len() >= 2`.
    pub fn from_samples(x: &[f64], y: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch(format!(
                "{} vs {} samples",
                x.len(),
                y.len()
            )));
        }
        if x.len() < 2 {
            return Err(Error::LengthMismatch(format!(
                "uqi needs at least 2 samples, got {}",
                x.len()
            )));
        }
        let n = x.len() as f64;
        let mean_x = x.iter().sum::<f64>() / n;
        let mean_y = y.iter().sum::<f64>() / n;
        let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
        for (&a, &b) in x.iter().zip(y) {
            let (dx, dy) = (a - mean_x, b - mean_y);
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
        Ok(WindowStats {
            mean_x,
            mean_y,
            var_x: sxx / (n - 1.0),
            var_y: syy / (n - 1.0),
            cov_xy: sxy / (n - 1.0),
        })
    }

    /// `4 cov mx my / ((vx + vy)(mx^2 + my^2))`. A zero denominator yields 1
    /// for bitwise-identical windows and 0 otherwise.
    pub fn quality_index(&self, identical: bool) -> f64 {
        // Both sides are associated the same way so that x == y gives exactly 1.
        let num = (4.0 * self.cov_xy) * (self.mean_x * self.mean_y);
        let den =
            (self.var_x + self.var_y) * (self.mean_x * self.mean_x + self.mean_y * self.mean_y);
        if den == 0.0 {
            if identical {
                1.0
            } else {
                0.0
            }
        } else {
            num / den
        }
    }
}

fn bitwise_equal(x: &[f64], y: &[f64]) -> bool {
    x.len() == y.len() && x.iter().zip(y).all(|(a, b)| a.to_bits() == b.to_bits())
}

/// UQI over two sample sets treated as a single window.
pub fn uqi_samples(x: &[f64], y: &[f64]) -> Result<f64> {
    let stats = WindowStats::from_samples(x, y)?;
    Ok(stats.quality_index(bitwise_equal(x, y)))
}

/// Global (single-window) UQI of two planes.
pub fn uqi(x: &Plane, y: &Plane) -> Result<f64> {
    check_same(x, y)?;
    uqi_samples(&x.data, &y.data)
}

/// Mean UQI over non-overlapping `window x window` tiles anchored at the
/// top-left corner. Partial edge tiles take part when they hold at least two
/// pixels.
pub fn uqi_windowed(x: &Plane, y: &Plane, window: usize) -> Result<f64> {
    check_same(x, y)?;
    if x.width < 2 || x.height < 2 {
        return Err(Error::TooSmall {
            width: x.width,
            height: x.height,
        });
    }
    if window < 2 {
        return Err(Error::InvalidConfig(format!(
            "uqi window must be at least 2, got {window}"
        )));
    }
    let (w, h) = (x.width as usize, x.height as usize);
    let mut tx = Vec::with_capacity(window * window);
    let mut ty = Vec::with_capacity(window * window);
    let (mut total, mut tiles) = (0.0, 0usize);
    for ty0 in (0..h).step_by(window) {
        for tx0 in (0..w).step_by(window) {
            tx.clear();
            ty.clear();
            for row in ty0..(ty0 + window).min(h) {
                let span = row * w + tx0..row * w + (tx0 + window).min(w);
                tx.extend_from_slice(&x.data[span.clone()]);
                ty.extend_from_slice(&y.data[span]);
            }
            if tx.len() < 2 {
                continue;
            }
            total += uqi_samples(&tx, &ty)?;
            tiles += 1;
        }
    }
    Ok(total / tiles as f64)
}

fn check_same(x: &Plane, y: &Plane) -> Result<()> {
    if x.dims() != y.dims() {
        return Err(Error::DimensionMismatch {
            expected: x.dims(),
            actual: y.dims(),
        });
    }
    Ok(())
}

/// How UQI statistics are pooled over an image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimilarityWindow {
    Global,
    Tiled(usize),
}

impl Default for SimilarityWindow {
    fn default() -> Self {
        SimilarityWindow::Tiled(DEFAULT_WINDOW)
    }
}

pub fn plane_similarity(a: &Plane, b: &Plane, window: SimilarityWindow) -> Result<f64> {
    match window {
        SimilarityWindow::Global => uqi(a, b),
        SimilarityWindow::Tiled(size) => uqi_windowed(a, b, size),
    }
}

pub fn frame_similarity(a: &Frame, b: &Frame, window: SimilarityWindow) -> Result<f64> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            expected: a.dims(),
            actual: b.dims(),
        });
    }
    plane_similarity(&luma(&a.rgb), &luma(&b.rgb), window)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct InstanceStats {
    pub count: usize,
    /// Pixel areas of the instances that passed the area gate.
    pub areas: BTreeMap<InstanceId, u64>,
}

fn instance_areas(frame: &Frame) -> BTreeMap<InstanceId, u64> {
    let mut areas = BTreeMap::new();
    for &id in frame.instance.instance_ids() {
        if id != 0 {
            *areas.entry(id).or_insert(0) += 1;
        }
    }
    areas
}

pub fn instance_stats(frame: &Frame, min_area: u64) -> InstanceStats {
    let areas: BTreeMap<_, _> = instance_areas(frame)
        .into_iter()
        .filter(|&(_, a)| a >= min_area)
        .collect();
    InstanceStats {
        count: areas.len(),
        areas,
    }
}

/// Number of 4-connected regions of `class_id` in the semantic mask that hold
/// two or more distinct instance ids, counting only instances whose total
/// area reaches `min_area`.
pub fn merged_components(
    frame: &Frame,
    class_id: ClassId,
    palette: &Palette,
    min_area: u64,
) -> Result<usize> {
    if !palette.contains(class_id) {
        return Err(Error::UnknownClass(class_id));
    }
    let areas = instance_areas(frame);
    Ok(merged_components_unchecked(frame, class_id, |id| {
        areas.get(&id).is_some_and(|&a| a >= min_area)
    }))
}

fn merged_components_unchecked(
    frame: &Frame,
    class_id: ClassId,
    counts: impl Fn(InstanceId) -> bool,
) -> usize {
    let (w, h) = (frame.width() as usize, frame.height() as usize);
    let classes = frame.semantic.class_ids();
    let ids = frame.instance.instance_ids();
    let mut seen = vec![false; w * h];
    let mut stack = Vec::new();
    let mut members: Vec<InstanceId> = Vec::new();
    let mut merged = 0;
    for start in 0..w * h {
        if seen[start] || classes[start] != class_id {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        members.clear();
        while let Some(p) = stack.pop() {
            let id = ids[p];
            if id != 0 && counts(id) && !members.contains(&id) {
                members.push(id);
            }
            let (x, y) = (p % w, p / w);
            let mut visit = |q: usize| {
                if !seen[q] && classes[q] == class_id {
                    seen[q] = true;
                    stack.push(q);
                }
            };
            if x > 0 {
                visit(p - 1);
            }
            if x + 1 < w {
                visit(p + 1);
            }
            if y > 0 {
                visit(p - w);
            }
            if y + 1 < h {
                visit(p + w);
            }
        }
        if members.len() >= 2 {
            merged += 1;
        }
    }
    merged
}

/// `1 - visible pixels / tight bounding-box area` of one instance.
pub fn occlusion_degree(frame: &Frame, instance_id: InstanceId) -> Result<f64> {
    if instance_id == 0 {
        return Err(Error::AbsentInstance(0));
    }
    let w = frame.width();
    let mut count = 0u64;
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
    for (i, &id) in frame.instance.instance_ids().iter().enumerate() {
        if id == instance_id {
            let (x, y) = (i as u32 % w, i as u32 / w);
            count += 1;
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x + 1);
            y1 = y1.max(y + 1);
        }
    }
    if count == 0 {
        return Err(Error::AbsentInstance(instance_id));
    }
    let box_area = (x1 - x0) as u64 * (y1 - y0) as u64;
    Ok(occlusion_from_counts(count, box_area))
}

pub(crate) fn occlusion_from_counts(visible: u64, box_area: u64) -> f64 {
    1.0 - visible as f64 / box_area as f64
}

/// Measurements attached to every acquisition decision.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameQuality {
    /// Similarity to the policy's reference frame; `None` when there is none.
    pub uqi_vs_reference: Option<f64>,
    pub instance_count: usize,
    pub merged_component_count: usize,
    pub per_instance_occlusion: BTreeMap<InstanceId, f64>,
}

impl FrameQuality {
    /// Measures a frame against an optional reference luma plane. Merged
    /// components are summed over the target classes.
    pub fn measure(
        frame: &Frame,
        frame_luma: &Plane,
        reference: Option<&Plane>,
        window: SimilarityWindow,
        min_area: u64,
    ) -> Result<Self> {
        let uqi_vs_reference = reference
            .map(|r| plane_similarity(frame_luma, r, window))
            .transpose()?;

        let w = frame.width();
        let mut per: BTreeMap<InstanceId, (u64, u32, u32, u32, u32)> = BTreeMap::new();
        for (i, &id) in frame.instance.instance_ids().iter().enumerate() {
            if id == 0 {
                continue;
            }
            let (x, y) = (i as u32 % w, i as u32 / w);
            let e = per.entry(id).or_insert((0, u32::MAX, u32::MAX, 0, 0));
            e.0 += 1;
            e.1 = e.1.min(x);
            e.2 = e.2.min(y);
            e.3 = e.3.max(x + 1);
            e.4 = e.4.max(y + 1);
        }
        let per_instance_occlusion: BTreeMap<_, _> = per
            .iter()
            .filter(|(_, e)| e.0 >= min_area)
            .map(|(&id, e)| {
                let box_area = (e.3 - e.1) as u64 * (e.4 - e.2) as u64;
                (id, occlusion_from_counts(e.0, box_area))
            })
            .collect();
        let counted = |id: InstanceId| per_instance_occlusion.contains_key(&id);
        let merged_component_count = TARGET_CLASSES
            .iter()
            .map(|&c| merged_components_unchecked(frame, c, counted))
            .sum();

        Ok(FrameQuality {
            uqi_vs_reference,
            instance_count: per_instance_occlusion.len(),
            merged_component_count,
            per_instance_occlusion,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{InstanceMask, SemanticMask, ROAD, VEHICLE};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn plane(w: u32, h: u32, data: &[f64]) -> Plane {
        Plane::new(w, h, data.to_vec()).unwrap()
    }

    /// Frame whose semantic and instance masks come from a list of
    /// `(instance id, x0, y0, x1, y1)` rectangles painted in order.
    fn frame_with(w: u32, h: u32, rects: &[(u16, u32, u32, u32, u32)]) -> Frame {
        let mut sem = vec![ROAD; (w * h) as usize];
        let mut inst = vec![0u16; (w * h) as usize];
        for &(id, x0, y0, x1, y1) in rects {
            for y in y0..y1 {
                for x in x0..x1 {
                    sem[(y * w + x) as usize] = VEHICLE;
                    inst[(y * w + x) as usize] = id;
                }
            }
        }
        Frame::new(
            0,
            0.0,
            Image::filled(w, h, [0, 0, 0]).unwrap(),
            SemanticMask::new(w, h, sem).unwrap(),
            InstanceMask::new(w, h, inst).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn luma_examples() {
        let white = Image::filled(2, 2, [255, 255, 255]).unwrap();
        assert!(luma(&white)
            .data()
            .iter()
            .all(|&v| (v - 255.0).abs() < 1e-12));
        let black = Image::filled(2, 2, [0, 0, 0]).unwrap();
        assert!(luma(&black).data().iter().all(|&v| v == 0.0));
        let px = Image::filled(1, 1, [100, 50, 200]).unwrap();
        assert!((luma(&px).data()[0] - 82.05).abs() < 1e-9);
    }

    #[test]
    fn uqi_examples() {
        let x = plane(4, 1, &[1.0, 2.0, 3.0, 4.0]);
        let y = plane(4, 1, &[4.0, 3.0, 2.0, 1.0]);
        assert_eq!(uqi(&x, &x).unwrap(), 1.0);
        assert!((uqi(&x, &y).unwrap() + 1.0).abs() < 1e-12);
        let c = plane(4, 1, &[5.0; 4]);
        assert_eq!(uqi(&c, &c).unwrap(), 1.0);
        let d = plane(4, 1, &[6.0; 4]);
        assert_eq!(uqi(&c, &d).unwrap(), 0.0);
        assert!(uqi(&x, &plane(2, 2, &[1.0, 2.0, 3.0, 4.0])).is_err());
        assert!(uqi(&plane(1, 1, &[1.0]), &plane(1, 1, &[1.0])).is_err());
    }

    #[test]
    fn uqi_sample_statistics_match_hand_values() {
        let s = WindowStats::from_samples(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(s.mean_x, 2.5);
        assert!((s.var_x - 5.0 / 3.0).abs() < 1e-15);
        assert!((s.cov_xy + 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn windowed_identical_is_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let data: Vec<f64> = (0..20 * 13).map(|_| rng.gen_range(0.0..255.0)).collect();
        let p = plane(20, 13, &data);
        for b in [2, 3, 8, 16, 64] {
            assert_eq!(uqi_windowed(&p, &p, b).unwrap(), 1.0);
        }
    }

    #[test]
    fn windowed_anticorrelated_tiling_is_minus_one() {
        // 4x4 plane made of 2x2 tiles [1 2; 3 4], counterpart tiles [4 3; 2 1].
        let mut x = vec![0.0; 16];
        let mut y = vec![0.0; 16];
        for row in 0..4 {
            for col in 0..4 {
                let v = [1.0, 2.0, 3.0, 4.0][(row % 2) * 2 + col % 2];
                x[row * 4 + col] = v;
                y[row * 4 + col] = 5.0 - v;
            }
        }
        let q = uqi_windowed(&plane(4, 4, &x), &plane(4, 4, &y), 2).unwrap();
        assert!((q + 1.0).abs() < 1e-12);
    }

    /// Per-tile oracle written independently: explicit tile coordinate loops
    /// and textbook moment formulas.
    fn windowed_oracle(x: &[f64], y: &[f64], w: usize, h: usize, b: usize) -> f64 {
        let mut qs = Vec::new();
        let mut ty = 0;
        while ty < h {
            let mut tx = 0;
            while tx < w {
                let mut xs = Vec::new();
                let mut ys = Vec::new();
                for r in ty..h.min(ty + b) {
                    for c in tx..w.min(tx + b) {
                        xs.push(x[r * w + c]);
                        ys.push(y[r * w + c]);
                    }
                }
                if xs.len() >= 2 {
                    let n = xs.len() as f64;
                    let mx = xs.iter().sum::<f64>() / n;
                    let my = ys.iter().sum::<f64>() / n;
                    let vx = xs.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / (n - 1.0);
                    let vy = ys.iter().map(|v| (v - my).powi(2)).sum::<f64>() / (n - 1.0);
                    let c = xs
                        .iter()
                        .zip(&ys)
                        .map(|(a, b)| (a - mx) * (b - my))
                        .sum::<f64>()
                        / (n - 1.0);
                    qs.push(4.0 * c * mx * my / ((vx + vy) * (mx * mx + my * my)));
                }
                tx += b;
            }
            ty += b;
        }
        qs.iter().sum::<f64>() / qs.len() as f64
    }

    #[test]
    fn windowed_noise_matches_per_tile_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let (w, h) = (37, 29);
        let x: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..255.0)).collect();
        let y: Vec<f64> = (0..w * h).map(|_| rng.gen_range(0.0..255.0)).collect();
        let q = uqi_windowed(
            &plane(w as u32, h as u32, &x),
            &plane(w as u32, h as u32, &y),
            8,
        )
        .unwrap();
        assert!(q > -1.0 && q < 1.0);
        assert!((q - windowed_oracle(&x, &y, w, h, 8)).abs() < 1e-12);
    }

    #[test]
    fn windowed_rejects_tiny_images() {
        let p = plane(1, 5, &[1.0, 2.0, 3.0, 4.0, 5.0]);
        assert!(matches!(
            uqi_windowed(&p, &p, 8),
            Err(Error::TooSmall { .. })
        ));
    }

    #[test]
    fn frame_similarity_self_and_mirror() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (w, h) = (24u32, 16u32);
        let px: Vec<u8> = (0..w * h * 3).map(|_| rng.gen()).collect();
        let mut mirrored = Vec::with_capacity(px.len());
        for y in 0..h {
            for x in (0..w).rev() {
                let i = ((y * w + x) * 3) as usize;
                mirrored.extend_from_slice(&px[i..i + 3]);
            }
        }
        let mk = |pixels: Vec<u8>| {
            Frame::new(
                0,
                0.0,
                Image::new(w, h, pixels).unwrap(),
                SemanticMask::new(w, h, vec![ROAD; (w * h) as usize]).unwrap(),
                InstanceMask::new(w, h, vec![0; (w * h) as usize]).unwrap(),
            )
            .unwrap()
        };
        let a = mk(px);
        let b = mk(mirrored);
        let win = SimilarityWindow::default();
        assert_eq!(frame_similarity(&a, &a, win).unwrap(), 1.0);
        assert!(frame_similarity(&a, &b, win).unwrap() < 1.0);
    }

    #[test]
    fn instance_stats_examples() {
        let empty = frame_with(10, 10, &[]);
        assert_eq!(instance_stats(&empty, 25).count, 0);
        let blob = frame_with(10, 10, &[(1, 0, 0, 5, 2)]);
        assert_eq!(instance_stats(&blob, 25).count, 0);
        assert_eq!(instance_stats(&blob, 10).count, 1);
        let five = frame_with(
            40,
            10,
            &[
                (1, 0, 0, 5, 5),
                (2, 7, 0, 12, 5),
                (3, 14, 0, 19, 5),
                (4, 21, 0, 26, 5),
                (5, 28, 0, 33, 5),
            ],
        );
        let stats = instance_stats(&five, 25);
        assert_eq!(stats.count, 5);
        assert!(stats.areas.values().all(|&a| a == 25));
    }

    #[test]
    fn merged_component_examples() {
        let palette = Palette::default();
        let gap = frame_with(20, 10, &[(1, 0, 0, 5, 5), (2, 6, 0, 11, 5)]);
        assert_eq!(merged_components(&gap, VEHICLE, &palette, 1).unwrap(), 0);
        let touching = frame_with(20, 10, &[(1, 0, 0, 5, 5), (2, 5, 0, 10, 5)]);
        assert_eq!(
            merged_components(&touching, VEHICLE, &palette, 1).unwrap(),
            1
        );
        let three = frame_with(
            20,
            10,
            &[(1, 0, 0, 5, 5), (2, 5, 0, 10, 5), (3, 2, 5, 8, 9)],
        );
        assert_eq!(merged_components(&three, VEHICLE, &palette, 1).unwrap(), 1);
        // Diagonal contact only: not 4-connected.
        let diag = frame_with(20, 10, &[(1, 0, 0, 5, 5), (2, 5, 5, 10, 10)]);
        assert_eq!(merged_components(&diag, VEHICLE, &palette, 1).unwrap(), 0);
        assert!(matches!(
            merged_components(&gap, 42, &palette, 1),
            Err(Error::UnknownClass(42))
        ));
    }

    #[test]
    fn occlusion_examples() {
        let rect = frame_with(20, 20, &[(1, 2, 2, 10, 8)]);
        assert_eq!(occlusion_degree(&rect, 1).unwrap(), 0.0);
        // Corner overdraw: 12 of 16 box pixels remain visible.
        let corner = frame_with(20, 20, &[(1, 0, 0, 4, 4), (2, 2, 2, 6, 6)]);
        assert_eq!(occlusion_degree(&corner, 1).unwrap(), 0.25);
        // Two nearer instances cover the off-diagonal quadrants: 8 of 16.
        let halved = frame_with(20, 20, &[(1, 0, 0, 4, 4), (2, 2, 0, 6, 2), (3, 0, 2, 2, 4)]);
        assert_eq!(occlusion_degree(&halved, 1).unwrap(), 0.5);
        assert!(matches!(
            occlusion_degree(&rect, 9),
            Err(Error::AbsentInstance(9))
        ));
    }

    #[test]
    fn frame_quality_respects_merge_invariant() {
        // Two touching instances, one below the area gate.
        let f = frame_with(20, 10, &[(1, 0, 0, 6, 6), (2, 6, 0, 8, 2)]);
        let q = FrameQuality::measure(&f, &luma(&f.rgb), None, SimilarityWindow::default(), 25)
            .unwrap();
        assert_eq!(q.instance_count, 1);
        assert_eq!(q.merged_component_count, 0);
        let q =
            FrameQuality::measure(&f, &luma(&f.rgb), None, SimilarityWindow::default(), 1).unwrap();
        assert_eq!(q.instance_count, 2);
        assert_eq!(q.merged_component_count, 1);
        assert_eq!(q.uqi_vs_reference, None);
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..64).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..255.0, n),
                proptest::collection::vec(0.0f64..255.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn uqi_is_symmetric_and_bounded((x, y) in pair()) {
            let a = uqi_samples(&x, &y).unwrap();
            let b = uqi_samples(&y, &x).unwrap();
            prop_assert_eq!(a.to_bits(), b.to_bits());
            prop_assert!(a.abs() <= 1.0 + 1e-9);
        }

        #[test]
        fn uqi_self_is_one((x, _y) in pair()) {
            prop_assert_eq!(uqi_samples(&x, &x).unwrap(), 1.0);
        }

        #[test]
        fn uqi_penalizes_constant_shift((x, _y) in pair(), c in 1.0f64..100.0) {
            let spread = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - x.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assume!(spread > 1e-6);
            let y: Vec<f64> = x.iter().map(|v| v + c).collect();
            prop_assert!(uqi_samples(&x, &y).unwrap() < 1.0);
        }
    }
}
