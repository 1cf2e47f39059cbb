//! Ground-truth extraction from segmentation masks and YOLO label files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quality::occlusion_from_counts;
use crate::types::{
    pixel_box_to_yolo, ClassId, Frame, InstanceId, NormalizedBox, PixelBox, YoloLabel,
    TRAFFIC_LIGHT, VEHICLE,
};

/// One visible object instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub instance_id: InstanceId,
    pub class_id: ClassId,
    pub bbox: PixelBox,
    pub pixel_area: u64,
    pub occlusion: f64,
}

/// Tight boxes around the visible pixels of every instance whose area reaches
/// `min_area`, ordered by instance id.
pub fn extract_instances(frame: &Frame, min_area: u64) -> Result<Vec<InstanceRecord>> {
    struct Acc {
        class_id: ClassId,
        area: u64,
        x0: u32,
        y0: u32,
        x1: u32,
        y1: u32,
    }
    let w = frame.width();
    let mut accs: BTreeMap<InstanceId, Acc> = BTreeMap::new();
    let ids = frame.instance.instance_ids();
    let classes = frame.semantic.class_ids();
    for (i, (&id, &class_id)) in ids.iter().zip(classes).enumerate() {
        if id == 0 {
            continue;
        }
        let (x, y) = (i as u32 % w, i as u32 / w);
        let acc = accs.entry(id).or_insert(Acc {
            class_id,
            area: 0,
            x0: x,
            y0: y,
            x1: x + 1,
            y1: y + 1,
        });
        if acc.class_id != class_id {
            return Err(Error::InstanceClassConflict {
                instance_id: id,
                first: acc.class_id,
                second: class_id,
            });
        }
        acc.area += 1;
        acc.x0 = acc.x0.min(x);
        acc.y0 = acc.y0.min(y);
        acc.x1 = acc.x1.max(x + 1);
        acc.y1 = acc.y1.max(y + 1);
    }
    Ok(accs
        .into_iter()
        .filter(|(_, a)| a.area >= min_area.max(1))
        .map(|(instance_id, a)| {
            let bbox = PixelBox {
                x_min: a.x0,
                y_min: a.y0,
                x_max: a.x1,
                y_max: a.y1,
            };
            InstanceRecord {
                instance_id,
                class_id: a.class_id,
                bbox,
                pixel_area: a.area,
                occlusion: occlusion_from_counts(a.area, bbox.area()),
            }
        })
        .collect())
}

/// Mask class id to contiguous YOLO class index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportClassMap(pub BTreeMap<ClassId, u32>);

impl Default for ExportClassMap {
    fn default() -> Self {
        ExportClassMap(BTreeMap::from([(VEHICLE, 0), (TRAFFIC_LIGHT, 1)]))
    }
}

impl ExportClassMap {
    pub fn get(&self, class_id: ClassId) -> Option<u32> {
        self.0.get(&class_id).copied()
    }

    pub fn export_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.0.values().copied().collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

pub fn to_yolo_labels(
    records: &[InstanceRecord],
    width: u32,
    height: u32,
    class_map: &ExportClassMap,
) -> Result<Vec<YoloLabel>> {
    records
        .iter()
        .map(|r| {
            let class = class_map
                .get(r.class_id)
                .ok_or(Error::UnmappedClass(r.class_id))?;
            YoloLabel::new(class, pixel_box_to_yolo(&r.bbox, width, height)?)
        })
        .collect()
}

pub fn format_label_line(label: &YoloLabel) -> String {
    format!(
        "{} {:.6} {:.6} {:.6} {:.6}",
        label.class_id, label.cx, label.cy, label.w, label.h
    )
}

pub fn write_label_file(labels: &[YoloLabel], path: &Path) -> Result<()> {
    let mut out = String::new();
    for l in labels {
        let _ = writeln!(out, "{}", format_label_line(l));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Parses `class cx cy w h` followed by `extra` further numeric fields.
pub(crate) fn parse_label_fields(
    line: &str,
    extra: usize,
    path: &Path,
    line_no: usize,
) -> Result<(YoloLabel, Vec<f64>)> {
    let err = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != 5 + extra {
        return Err(err(format!(
            "expected {} fields, found {}",
            5 + extra,
            fields.len()
        )));
    }
    let class_id: u32 = fields[0]
        .parse()
        .map_err(|_| err(format!("invalid class id '{}'", fields[0])))?;
    let nums = fields[1..]
        .iter()
        .map(|f| {
            f.parse::<f64>()
                .map_err(|_| err(format!("invalid number '{f}'")))
        })
        .collect::<Result<Vec<_>>>()?;
    let geometry = NormalizedBox {
        cx: nums[0],
        cy: nums[1],
        w: nums[2],
        h: nums[3],
    };
    let label = YoloLabel::new(class_id, geometry).map_err(|e| err(e.to_string()))?;
    Ok((label, nums[4..].to_vec()))
}

pub fn read_label_file(path: &Path) -> Result<Vec<YoloLabel>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| parse_label_fields(l, 0, path, i + 1).map(|(label, _)| label))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{yolo_to_pixel_box, Image, InstanceMask, SemanticMask, ROAD};
    use proptest::prelude::*;

    fn frame(w: u32, h: u32, rects: &[(u16, u8, u32, u32, u32, u32)]) -> Frame {
        let mut sem = vec![ROAD; (w * h) as usize];
        let mut inst = vec![0u16; (w * h) as usize];
        for &(id, class, x0, y0, x1, y1) in rects {
            for y in y0..y1 {
                for x in x0..x1 {
                    sem[(y * w + x) as usize] = class;
                    inst[(y * w + x) as usize] = id;
                }
            }
        }
        Frame::new(
            3,
            0.3,
            Image::filled(w, h, [0, 0, 0]).unwrap(),
            SemanticMask::new(w, h, sem).unwrap(),
            InstanceMask::new(w, h, inst).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn extract_examples() {
        assert!(extract_instances(&frame(10, 10, &[]), 1)
            .unwrap()
            .is_empty());
        let f = frame(100, 100, &[(7, VEHICLE, 10, 30, 20, 50)]);
        let recs = extract_instances(&f, 25).unwrap();
        assert_eq!(
            recs,
            vec![InstanceRecord {
                instance_id: 7,
                class_id: VEHICLE,
                bbox: PixelBox::new(10, 30, 20, 50).unwrap(),
                pixel_area: 200,
                occlusion: 0.0,
            }]
        );
        assert!(extract_instances(&f, 201).unwrap().is_empty());
    }

    #[test]
    fn extract_orders_by_id_and_uses_visible_pixels() {
        let f = frame(
            30,
            30,
            &[(9, VEHICLE, 0, 0, 10, 10), (2, TRAFFIC_LIGHT, 5, 0, 10, 10)],
        );
        let recs = extract_instances(&f, 1).unwrap();
        assert_eq!(recs[0].instance_id, 2);
        assert_eq!(recs[1].instance_id, 9);
        assert_eq!(recs[1].bbox, PixelBox::new(0, 0, 5, 10).unwrap());
        assert_eq!(recs[1].pixel_area, 50);
    }

    #[test]
    fn extract_reports_class_conflicts() {
        let f = frame(
            10,
            10,
            &[(1, VEHICLE, 0, 0, 2, 2), (1, TRAFFIC_LIGHT, 4, 4, 6, 6)],
        );
        assert!(matches!(
            extract_instances(&f, 1),
            Err(Error::InstanceClassConflict { instance_id: 1, .. })
        ));
    }

    #[test]
    fn yolo_label_examples() {
        let f = frame(100, 100, &[(1, VEHICLE, 10, 30, 20, 50)]);
        let recs = extract_instances(&f, 1).unwrap();
        let labels = to_yolo_labels(&recs, 100, 100, &ExportClassMap::default()).unwrap();
        assert_eq!(
            format_label_line(&labels[0]),
            "0 0.150000 0.400000 0.100000 0.200000"
        );
        assert!(to_yolo_labels(&[], 100, 100, &ExportClassMap::default())
            .unwrap()
            .is_empty());
        let mut rec = recs[0].clone();
        rec.class_id = ROAD;
        assert!(matches!(
            to_yolo_labels(&[rec], 100, 100, &ExportClassMap::default()),
            Err(Error::UnmappedClass(ROAD))
        ));
    }

    #[test]
    fn label_file_errors_carry_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        fs::write(&path, "0 0.5 0.5 0.1 0.1\n0 1.5 0.5 0.1 0.1\n").unwrap();
        match read_label_file(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        fs::write(&path, "0 0.5 0.5 0.1\n").unwrap();
        assert!(matches!(
            read_label_file(&path),
            Err(Error::Parse { line: 1, .. })
        ));
        fs::write(&path, "x 0.5 0.5 0.1 0.1\n").unwrap();
        assert!(read_label_file(&path).is_err());
    }

    #[test]
    fn empty_label_list_writes_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.txt");
        write_label_file(&[], &path).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 0);
        assert!(read_label_file(&path).unwrap().is_empty());
    }

    #[test]
    fn label_file_round_trip_1000_random_labels() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        let labels: Vec<YoloLabel> = (0..1000)
            .map(|_| {
                let w = rng.gen_range(0.001..1.0);
                let h = rng.gen_range(0.001..1.0);
                let cx = rng.gen_range(w / 2.0..=1.0 - w / 2.0);
                let cy = rng.gen_range(h / 2.0..=1.0 - h / 2.0);
                YoloLabel::new(rng.gen_range(0..5), NormalizedBox { cx, cy, w, h }).unwrap()
            })
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("l.txt");
        write_label_file(&labels, &path).unwrap();
        let back = read_label_file(&path).unwrap();
        assert_eq!(back.len(), labels.len());
        for (a, b) in labels.iter().zip(&back) {
            assert_eq!(a.class_id, b.class_id);
            for (x, y) in [(a.cx, b.cx), (a.cy, b.cy), (a.w, b.w), (a.h, b.h)] {
                assert!((x - y).abs() <= 1e-6);
            }
        }
    }

    proptest! {
        #[test]
        fn boxes_are_tight_and_contain_every_pixel(
            rects in proptest::collection::vec((0u32..30, 0u32..20, 1u32..10, 1u32..10), 0..8)
        ) {
            let rects: Vec<_> = rects
                .iter()
                .enumerate()
                .map(|(i, &(x, y, w, h))| {
                    (i as u16 + 1, VEHICLE, x, y, (x + w).min(40), (y + h).min(30))
                })
                .collect();
            let f = frame(40, 30, &rects);
            let recs = extract_instances(&f, 1).unwrap();
            let total: u64 = recs.iter().map(|r| r.pixel_area).sum();
            prop_assert!(total <= 40 * 30);
            for r in &recs {
                prop_assert!(r.pixel_area <= r.bbox.area());
                let mut touches = [false; 4];
                for y in 0..30 {
                    for x in 0..40 {
                        if f.instance.get(x, y) == r.instance_id {
                            prop_assert!(r.bbox.contains(x, y));
                            touches[0] |= x == r.bbox.x_min;
                            touches[1] |= x + 1 == r.bbox.x_max;
                            touches[2] |= y == r.bbox.y_min;
                            touches[3] |= y + 1 == r.bbox.y_max;
                        }
                    }
                }
                prop_assert!(touches.iter().all(|&t| t));
                let labels = to_yolo_labels(
                    std::slice::from_ref(r), 40, 30, &ExportClassMap::default()).unwrap();
                prop_assert_eq!(yolo_to_pixel_box(&labels[0].geometry(), 40, 30).unwrap(), r.bbox);
            }
        }
    }
}
