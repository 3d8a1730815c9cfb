//! On-disk frame format: one subdirectory per frame key containing
//!
//! * `points.bin` — little-endian u32 point count, then per point x, y, z,
//!   intensity as f64 and the ring index as u16;
//! * `cam{i}.bin` — flat channel-major f64 semantic image, one per camera,
//!   dimensions given by the calibration entry (channel count inferred from
//!   the file size);
//! * `calib.txt` — the camera rig in the geometry crate's calibration format;
//! * `boxes.txt` — one ground-truth box per line, eight whitespace-separated
//!   fields: center x y z, length, width, height, yaw, class id.

use std::path::{Path, PathBuf};

use bevbench_geom::{read_calibration, write_calibration, Box3D, CameraModel};
use nalgebra::Vector3;

use crate::{LidarPoint, PointCloud, SemanticImage, SimError};

#[derive(Debug, Clone, PartialEq)]
pub struct FrameData {
    pub key: String,
    pub cloud: PointCloud,
    pub images: Vec<SemanticImage>,
    pub cameras: Vec<CameraModel>,
    pub boxes: Vec<Box3D>,
}

pub fn write_frame(root: &Path, frame: &FrameData) -> Result<PathBuf, SimError> {
    if frame.images.len() != frame.cameras.len() {
        return Err(SimError::InvalidConfig(format!(
            "{} images for {} cameras",
            frame.images.len(),
            frame.cameras.len()
        )));
    }
    let dir = root.join(&frame.key);
    std::fs::create_dir_all(&dir)?;

    let mut buf = Vec::with_capacity(4 + frame.cloud.len() * 34);
    buf.extend_from_slice(&(frame.cloud.len() as u32).to_le_bytes());
    for p in &frame.cloud.points {
        buf.extend_from_slice(&p.x.to_le_bytes());
        buf.extend_from_slice(&p.y.to_le_bytes());
        buf.extend_from_slice(&p.z.to_le_bytes());
        buf.extend_from_slice(&p.intensity.to_le_bytes());
        buf.extend_from_slice(&p.ring.to_le_bytes());
    }
    std::fs::write(dir.join("points.bin"), buf)?;

    for (i, (img, cam)) in frame.images.iter().zip(&frame.cameras).enumerate() {
        if img.width != cam.width || img.height != cam.height {
            return Err(SimError::InvalidConfig(format!(
                "image {i} is {}x{} but its camera is {}x{}",
                img.width, img.height, cam.width, cam.height
            )));
        }
        let mut buf = Vec::with_capacity(img.data.len() * 8);
        for v in &img.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(dir.join(format!("cam{i}.bin")), buf)?;
    }

    write_calibration(&dir.join("calib.txt"), &frame.cameras)?;

    let mut text = String::new();
    for b in &frame.boxes {
        text.push_str(&format!(
            "{} {} {} {} {} {} {} {}\n",
            b.center.x, b.center.y, b.center.z, b.size[0], b.size[1], b.size[2], b.yaw, b.class_id
        ));
    }
    std::fs::write(dir.join("boxes.txt"), text)?;
    Ok(dir)
}

pub fn read_frame(root: &Path, key: &str) -> Result<FrameData, SimError> {
    let dir = root.join(key);
    let cameras = read_calibration(&dir.join("calib.txt"))?;

    let points_path = dir.join("points.bin");
    let bytes = std::fs::read(&points_path)?;
    let malformed = |message: String| SimError::Malformed {
        path: points_path.display().to_string(),
        message,
    };
    if bytes.len() < 4 {
        return Err(malformed("missing point count header".into()));
    }
    let count = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    const STRIDE: usize = 34;
    if bytes.len() != 4 + count * STRIDE {
        return Err(malformed(format!(
            "expected {} bytes for {count} points, found {}",
            4 + count * STRIDE,
            bytes.len()
        )));
    }
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let at = 4 + i * STRIDE;
        let field = |j: usize| {
            f64::from_le_bytes(bytes[at + j * 8..at + (j + 1) * 8].try_into().expect("8 bytes"))
        };
        points.push(LidarPoint {
            x: field(0),
            y: field(1),
            z: field(2),
            intensity: field(3),
            ring: u16::from_le_bytes(bytes[at + 32..at + 34].try_into().expect("2 bytes")),
        });
    }

    let mut images = Vec::with_capacity(cameras.len());
    for (i, cam) in cameras.iter().enumerate() {
        let path = dir.join(format!("cam{i}.bin"));
        let bytes = std::fs::read(&path)?;
        let plane = cam.width * cam.height * 8;
        if plane == 0 || bytes.len() % plane != 0 || bytes.is_empty() {
            return Err(SimError::Malformed {
                path: path.display().to_string(),
                message: format!(
                    "size {} is not a whole number of {}x{} f64 planes",
                    bytes.len(),
                    cam.width,
                    cam.height
                ),
            });
        }
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        images.push(SemanticImage {
            channels: bytes.len() / plane,
            height: cam.height,
            width: cam.width,
            data,
        });
    }

    let boxes_path = dir.join("boxes.txt");
    let text = std::fs::read_to_string(&boxes_path)?;
    let mut boxes = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let malformed = |message: String| SimError::Malformed {
            path: boxes_path.display().to_string(),
            message: format!("line {}: {message}", lineno + 1),
        };
        if fields.len() != 8 {
            return Err(malformed(format!("expected 8 fields, found {}", fields.len())));
        }
        let mut nums = [0.0f64; 7];
        for (slot, field) in nums.iter_mut().zip(&fields[..7]) {
            *slot = field
                .parse()
                .map_err(|_| malformed(format!("invalid float `{field}`")))?;
        }
        let class_id: u32 = fields[7]
            .parse()
            .map_err(|_| malformed(format!("invalid class id `{}`", fields[7])))?;
        boxes.push(Box3D::ground_truth(
            Vector3::new(nums[0], nums[1], nums[2]),
            [nums[3], nums[4], nums[5]],
            nums[6],
            class_id,
        )?);
    }

    Ok(FrameData {
        key: key.to_owned(),
        cloud: PointCloud { points },
        images,
        cameras,
        boxes,
    })
}

/// Frame keys under a dataset root, sorted by name.
pub fn list_frames(root: &Path) -> Result<Vec<String>, SimError> {
    let mut keys = Vec::new();
    for entry in std::fs::read_dir(root)? {
        let entry = entry?;
        if entry.file_type()?.is_dir() {
            if let Some(name) = entry.file_name().to_str() {
                keys.push(name.to_owned());
            }
        }
    }
    keys.sort();
    Ok(keys)
}
