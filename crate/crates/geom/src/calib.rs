//! Plain-text camera calibration files.
//!
//! Layout, one block per camera after a `cameras N` header; `#` starts a
//! comment and blank lines are ignored:
//!
//! ```text
//! cameras 2
//! camera 0
//! image_size 128 96
//! intrinsics 100 100 64 48
//! extrinsic_rpy 0 0 0
//! extrinsic_xyz 0.5 -0.4 1.6
//! camera 1
//! ...
//! ```
//!
//! `intrinsics` is fx fy cx cy in pixels; the extrinsic maps camera-frame
//! points into the reference frame, stored as roll/pitch/yaw radians plus a
//! translation in meters. Floats are written in shortest round-trip form.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use crate::{rpy_from_rotation, CameraModel, GeomError, RigidTransform};

pub fn write_calibration(path: &Path, cameras: &[CameraModel]) -> Result<(), GeomError> {
    let mut out = String::new();
    let _ = writeln!(out, "cameras {}", cameras.len());
    for (i, cam) in cameras.iter().enumerate() {
        let (roll, pitch, yaw) = rpy_from_rotation(&cam.extrinsic.rotation);
        let t = cam.extrinsic.translation;
        let _ = writeln!(out, "camera {i}");
        let _ = writeln!(out, "image_size {} {}", cam.width, cam.height);
        let _ = writeln!(out, "intrinsics {} {} {} {}", cam.fx, cam.fy, cam.cx, cam.cy);
        let _ = writeln!(out, "extrinsic_rpy {roll} {pitch} {yaw}");
        let _ = writeln!(out, "extrinsic_xyz {} {} {}", t.x, t.y, t.z);
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_calibration(path: &Path) -> Result<Vec<CameraModel>, GeomError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let mut next = |keyword: &str, values: usize| -> Result<(usize, Vec<String>), GeomError> {
        let (line, text) = lines.next().ok_or_else(|| GeomError::Parse {
            line: 0,
            message: format!("unexpected end of file, expected `{keyword}`"),
        })?;
        let mut parts = text.split_whitespace();
        let head = parts.next().unwrap_or_default();
        if head != keyword {
            return Err(GeomError::Parse {
                line,
                message: format!("expected `{keyword}`, found `{head}`"),
            });
        }
        let rest: Vec<String> = parts.map(str::to_owned).collect();
        if rest.len() != values {
            return Err(GeomError::Parse {
                line,
                message: format!(
                    "`{keyword}` takes {values} values, found {}",
                    rest.len()
                ),
            });
        }
        Ok((line, rest))
    };

    let parse_f64 = |line: usize, s: &str| -> Result<f64, GeomError> {
        s.parse().map_err(|_| GeomError::Parse {
            line,
            message: format!("invalid float `{s}`"),
        })
    };
    let parse_usize = |line: usize, s: &str| -> Result<usize, GeomError> {
        s.parse().map_err(|_| GeomError::Parse {
            line,
            message: format!("invalid integer `{s}`"),
        })
    };

    let (line, header) = next("cameras", 1)?;
    let count = parse_usize(line, &header[0])?;
    let mut cameras = Vec::with_capacity(count);
    for expect_index in 0..count {
        let (line, idx) = next("camera", 1)?;
        let idx = parse_usize(line, &idx[0])?;
        if idx != expect_index {
            return Err(GeomError::Parse {
                line,
                message: format!("expected camera {expect_index}, found {idx}"),
            });
        }
        let (line, size) = next("image_size", 2)?;
        let width = parse_usize(line, &size[0])?;
        let height = parse_usize(line, &size[1])?;
        let (line, intr) = next("intrinsics", 4)?;
        let fx = parse_f64(line, &intr[0])?;
        let fy = parse_f64(line, &intr[1])?;
        let cx = parse_f64(line, &intr[2])?;
        let cy = parse_f64(line, &intr[3])?;
        let (line, rpy) = next("extrinsic_rpy", 3)?;
        let roll = parse_f64(line, &rpy[0])?;
        let pitch = parse_f64(line, &rpy[1])?;
        let yaw = parse_f64(line, &rpy[2])?;
        let (line, xyz) = next("extrinsic_xyz", 3)?;
        let t = Vector3::new(
            parse_f64(line, &xyz[0])?,
            parse_f64(line, &xyz[1])?,
            parse_f64(line, &xyz[2])?,
        );
        let extrinsic = RigidTransform::from_rpy_translation(roll, pitch, yaw, t);
        cameras.push(CameraModel::new(fx, fy, cx, cy, width, height, extrinsic)?);
    }
    Ok(cameras)
}
