//! Shared domain types: rasters, frames, boxes, YOLO geometry and the
//! segmentation color conventions.
//!
//! Conventions used throughout the crate:
//!
//! * Pixel boxes are half-open, `[x_min, x_max) x [y_min, y_max)`, so the box
//!   area is `(x_max - x_min) * (y_max - y_min)`.
//! * Rendered instance images carry the class id in the red channel and the
//!   instance id as `G * 256 + B`. Instance id 0 is background.
//! * Semantic images use the [`Palette`] registry. The default registry is
//!   *not* CARLA's palette; real CARLA exports need a matching registry.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ClassId = u8;
pub type InstanceId = u16;

pub const BACKGROUND: ClassId = 0;
pub const ROAD: ClassId = 1;
pub const VEHICLE: ClassId = 2;
pub const TRAFFIC_LIGHT: ClassId = 3;

/// Classes that carry object instances and are exported as detection targets.
pub const TARGET_CLASSES: [ClassId; 2] = [VEHICLE, TRAFFIC_LIGHT];

/// Tolerance applied to normalized YOLO geometry bounds.
pub const GEOMETRY_TOLERANCE: f64 = 1e-6;

/// 8-bit RGB raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(width: u32, height: u32, pixels: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize * 3;
        if pixels.len() != expected {
            return Err(Error::InvalidImage(format!(
                "pixel buffer has {} bytes, expected {expected}",
                pixels.len()
            )));
        }
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, color: [u8; 3]) -> Result<Self> {
        check_dims(width, height)?;
        let pixels = color
            .iter()
            .copied()
            .cycle()
            .take(width as usize * height as usize * 3)
            .collect();
        Ok(Image {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: u32, y: u32, color: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.pixels[i..i + 3].copy_from_slice(&color);
    }

    pub fn read_png(path: &Path) -> Result<Self> {
        let img = image::open(path)
            .map_err(|source| Error::Png {
                path: path.to_path_buf(),
                source,
            })?
            .into_rgb8();
        let (w, h) = img.dimensions();
        Image::new(w, h, img.into_raw())
    }

    pub fn write_png(&self, path: &Path) -> Result<()> {
        image::save_buffer(
            path,
            &self.pixels,
            self.width,
            self.height,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|source| Error::Png {
            path: path.to_path_buf(),
            source,
        })
    }
}

fn check_dims(width: u32, height: u32) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::InvalidImage(format!(
            "zero-area raster {width}x{height}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SemanticMask {
    width: u32,
    height: u32,
    class_ids: Vec<ClassId>,
}

impl SemanticMask {
    pub fn new(width: u32, height: u32, class_ids: Vec<ClassId>) -> Result<Self> {
        check_dims(width, height)?;
        if class_ids.len() != width as usize * height as usize {
            return Err(Error::InvalidImage(format!(
                "semantic mask has {} entries, expected {}",
                class_ids.len(),
                width as usize * height as usize
            )));
        }
        Ok(SemanticMask {
            width,
            height,
            class_ids,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn class_ids(&self) -> &[ClassId] {
        &self.class_ids
    }

    pub fn get(&self, x: u32, y: u32) -> ClassId {
        self.class_ids[y as usize * self.width as usize + x as usize]
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InstanceMask {
    width: u32,
    height: u32,
    instance_ids: Vec<InstanceId>,
}

impl InstanceMask {
    pub fn new(width: u32, height: u32, instance_ids: Vec<InstanceId>) -> Result<Self> {
        check_dims(width, height)?;
        if instance_ids.len() != width as usize * height as usize {
            return Err(Error::InvalidImage(format!(
                "instance mask has {} entries, expected {}",
                instance_ids.len(),
                width as usize * height as usize
            )));
        }
        Ok(InstanceMask {
            width,
            height,
            instance_ids,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn instance_ids(&self) -> &[InstanceId] {
        &self.instance_ids
    }

    pub fn get(&self, x: u32, y: u32) -> InstanceId {
        self.instance_ids[y as usize * self.width as usize + x as usize]
    }
}

/// One time step of a sensor stream.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame {
    pub frame_id: u64,
    pub timestamp: f64,
    pub rgb: Image,
    pub semantic: SemanticMask,
    pub instance: InstanceMask,
}

impl Frame {
    pub fn new(
        frame_id: u64,
        timestamp: f64,
        rgb: Image,
        semantic: SemanticMask,
        instance: InstanceMask,
    ) -> Result<Self> {
        if !timestamp.is_finite() || timestamp < 0.0 {
            return Err(Error::InvalidImage(format!(
                "frame {frame_id} has invalid timestamp {timestamp}"
            )));
        }
        for dims in [semantic.dims(), instance.dims()] {
            if dims != rgb.dims() {
                return Err(Error::DimensionMismatch {
                    expected: rgb.dims(),
                    actual: dims,
                });
            }
        }
        Ok(Frame {
            frame_id,
            timestamp,
            rgb,
            semantic,
            instance,
        })
    }

    pub fn width(&self) -> u32 {
        self.rgb.width()
    }

    pub fn height(&self) -> u32 {
        self.rgb.height()
    }

    pub fn dims(&self) -> (u32, u32) {
        self.rgb.dims()
    }

    /// Maps every nonzero instance id to its class, failing when one instance
    /// spans two classes.
    pub fn instance_classes(&self) -> Result<BTreeMap<InstanceId, ClassId>> {
        let mut map = BTreeMap::new();
        for (&id, &class) in self
            .instance
            .instance_ids()
            .iter()
            .zip(self.semantic.class_ids())
        {
            if id == 0 {
                continue;
            }
            match map.insert(id, class) {
                Some(prev) if prev != class => {
                    return Err(Error::InstanceClassConflict {
                        instance_id: id,
                        first: prev,
                        second: class,
                    })
                }
                _ => {}
            }
        }
        Ok(map)
    }
}

/// Half-open pixel box `[x_min, x_max) x [y_min, y_max)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PixelBox {
    pub x_min: u32,
    pub y_min: u32,
    pub x_max: u32,
    pub y_max: u32,
}

impl PixelBox {
    /// Builds a non-empty box. Bounds against an image are checked separately
    /// by [`PixelBox::check_within`].
    pub fn new(x_min: u32, y_min: u32, x_max: u32, y_max: u32) -> Result<Self> {
        let b = PixelBox {
            x_min,
            y_min,
            x_max,
            y_max,
        };
        if x_min >= x_max || y_min >= y_max {
            return Err(b.out_of(u32::MAX, u32::MAX));
        }
        Ok(b)
    }

    pub fn width(&self) -> u32 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> u32 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x_min && x < self.x_max && y >= self.y_min && y < self.y_max
    }

    pub fn check_within(&self, width: u32, height: u32) -> Result<()> {
        if self.x_min < self.x_max
            && self.y_min < self.y_max
            && self.x_max <= width
            && self.y_max <= height
        {
            Ok(())
        } else {
            Err(self.out_of(width, height))
        }
    }

    fn out_of(&self, width: u32, height: u32) -> Error {
        Error::BoxOutOfBounds {
            x_min: self.x_min,
            y_min: self.y_min,
            x_max: self.x_max,
            y_max: self.y_max,
            width,
            height,
        }
    }
}

/// Box center and size normalized by image dimensions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl NormalizedBox {
    pub fn validate(&self) -> Result<()> {
        let NormalizedBox { cx, cy, w, h } = *self;
        let tol = GEOMETRY_TOLERANCE;
        let ok = [cx, cy, w, h].iter().all(|v| v.is_finite())
            && (0.0..=1.0).contains(&cx)
            && (0.0..=1.0).contains(&cy)
            && w > 0.0
            && w <= 1.0
            && h > 0.0
            && h <= 1.0
            && cx - w / 2.0 >= -tol
            && cx + w / 2.0 <= 1.0 + tol
            && cy - h / 2.0 >= -tol
            && cy + h / 2.0 <= 1.0 + tol;
        if ok {
            Ok(())
        } else {
            Err(Error::GeometryOutOfRange(format!(
                "cx={cx} cy={cy} w={w} h={h}"
            )))
        }
    }
}

/// One YOLO annotation: export class id plus normalized geometry.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YoloLabel {
    pub class_id: u32,
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl YoloLabel {
    pub fn new(class_id: u32, geometry: NormalizedBox) -> Result<Self> {
        geometry.validate()?;
        Ok(YoloLabel {
            class_id,
            cx: geometry.cx,
            cy: geometry.cy,
            w: geometry.w,
            h: geometry.h,
        })
    }

    pub fn geometry(&self) -> NormalizedBox {
        NormalizedBox {
            cx: self.cx,
            cy: self.cy,
            w: self.w,
            h: self.h,
        }
    }
}

pub fn pixel_box_to_yolo(b: &PixelBox, width: u32, height: u32) -> Result<NormalizedBox> {
    b.check_within(width, height)?;
    let (w, h) = (width as f64, height as f64);
    Ok(NormalizedBox {
        cx: (b.x_min as f64 + b.x_max as f64) / (2.0 * w),
        cy: (b.y_min as f64 + b.y_max as f64) / (2.0 * h),
        w: (b.x_max - b.x_min) as f64 / w,
        h: (b.y_max - b.y_min) as f64 / h,
    })
}

pub fn yolo_to_pixel_box(g: &NormalizedBox, width: u32, height: u32) -> Result<PixelBox> {
    g.validate()?;
    let (w, h) = (width as f64, height as f64);
    let edge = |v: f64, limit: f64| v.round().clamp(0.0, limit) as u32;
    let b = PixelBox {
        x_min: edge((g.cx - g.w / 2.0) * w, w),
        y_min: edge((g.cy - g.h / 2.0) * h, h),
        x_max: edge((g.cx + g.w / 2.0) * w, w),
        y_max: edge((g.cy + g.h / 2.0) * h, h),
    };
    if b.x_min >= b.x_max || b.y_min >= b.y_max {
        return Err(Error::GeometryOutOfRange(format!(
            "{g:?} collapses to an empty box in a {width}x{height} image"
        )));
    }
    Ok(b)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaletteEntry {
    pub class_id: ClassId,
    pub name: String,
    pub color: [u8; 3],
}

/// Registry of semantic classes and their rendering colors.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    entries: Vec<PaletteEntry>,
}

impl Default for Palette {
    /// background, road, vehicle, traffic light.
    fn default() -> Self {
        let entry = |class_id, name: &str, color| PaletteEntry {
            class_id,
            name: name.to_string(),
            color,
        };
        Palette {
            entries: vec![
                entry(BACKGROUND, "background", [0, 0, 0]),
                entry(ROAD, "road", [128, 64, 128]),
                entry(VEHICLE, "vehicle", [0, 0, 142]),
                entry(TRAFFIC_LIGHT, "traffic_light", [250, 170, 30]),
            ],
        }
    }
}

impl Palette {
    pub fn new(entries: Vec<PaletteEntry>) -> Result<Self> {
        let mut ids = HashMap::new();
        let mut colors = HashMap::new();
        for e in &entries {
            if ids.insert(e.class_id, ()).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "palette registers class {} twice",
                    e.class_id
                )));
            }
            if colors.insert(e.color, ()).is_some() {
                return Err(Error::InvalidConfig(format!(
                    "palette color {:?} is used twice",
                    e.color
                )));
            }
        }
        Ok(Palette { entries })
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }

    pub fn contains(&self, class_id: ClassId) -> bool {
        self.entries.iter().any(|e| e.class_id == class_id)
    }

    pub fn color_of(&self, class_id: ClassId) -> Result<[u8; 3]> {
        self.entries
            .iter()
            .find(|e| e.class_id == class_id)
            .map(|e| e.color)
            .ok_or(Error::UnknownClass(class_id))
    }

    pub fn name_of(&self, class_id: ClassId) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.class_id == class_id)
            .map(|e| e.name.as_str())
    }

    fn color_lookup(&self) -> HashMap<[u8; 3], ClassId> {
        self.entries.iter().map(|e| (e.color, e.class_id)).collect()
    }
}

pub fn decode_semantic(rgb: &Image, palette: &Palette) -> Result<SemanticMask> {
    let lookup = palette.color_lookup();
    let w = rgb.width() as usize;
    let ids = rgb
        .pixels()
        .chunks_exact(3)
        .enumerate()
        .map(|(i, px)| {
            let color = [px[0], px[1], px[2]];
            lookup.get(&color).copied().ok_or(Error::UnknownColor {
                color,
                x: (i % w) as u32,
                y: (i / w) as u32,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    SemanticMask::new(rgb.width(), rgb.height(), ids)
}

pub fn encode_semantic(mask: &SemanticMask, palette: &Palette) -> Result<Image> {
    let mut pixels = Vec::with_capacity(mask.class_ids().len() * 3);
    let mut cache: HashMap<ClassId, [u8; 3]> = HashMap::new();
    for &class in mask.class_ids() {
        let color = match cache.get(&class) {
            Some(c) => *c,
            None => {
                let c = palette.color_of(class)?;
                cache.insert(class, c);
                c
            }
        };
        pixels.extend_from_slice(&color);
    }
    Image::new(mask.width(), mask.height(), pixels)
}

pub fn decode_instance(rgb: &Image) -> InstanceMask {
    let ids = rgb
        .pixels()
        .chunks_exact(3)
        .map(|px| (px[1] as u16) << 8 | px[2] as u16)
        .collect();
    InstanceMask {
        width: rgb.width(),
        height: rgb.height(),
        instance_ids: ids,
    }
}

/// Renders an instance mask with the class id in R and the id split over G, B.
pub fn encode_instance(instance: &InstanceMask, semantic: &SemanticMask) -> Result<Image> {
    if instance.dims() != semantic.dims() {
        return Err(Error::DimensionMismatch {
            expected: semantic.dims(),
            actual: instance.dims(),
        });
    }
    let pixels = instance
        .instance_ids()
        .iter()
        .zip(semantic.class_ids())
        .flat_map(|(&id, &class)| {
            let r = if id == 0 { 0 } else { class };
            [r, (id >> 8) as u8, (id & 0xff) as u8]
        })
        .collect();
    Image::new(instance.width(), instance.height(), pixels)
}
