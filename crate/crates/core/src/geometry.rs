//! Frame conventions, the pinhole camera model and bearing angles.
//!
//! Three frames are used throughout the crate:
//!
//! - world: room coordinates in meters, `z` pointing up;
//! - camera: origin at the optical center, `z` along the optical axis,
//!   `x`/`y` parallel to the image `u`/`v` axes;
//! - pixel: `(u, v)` with the origin in the upper-left image corner.
//!
//! The image-plane frame never has to be materialized: the focal length and
//! the pixel pitch only appear through the focal ratios `fu` and `fv`.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

/// Tolerance used when validating that a rotation matrix is proper.
pub const ROTATION_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum GeometryError {
    #[error("point lies behind the camera (z_c = {0})")]
    BehindCamera(f64),
    #[error("bearing vector has zero length")]
    ZeroBearing,
    #[error("invalid camera intrinsics: fu = {fu}, fv = {fv}")]
    InvalidIntrinsics { fu: f64, fv: f64 },
    #[error("rotation is not proper orthonormal (deviation {0:e})")]
    InvalidRotation(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

impl PixelCoord {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Intrinsic parameters of a distortion-free pinhole camera.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    pub fu: f64,
    pub fv: f64,
    pub u0: f64,
    pub v0: f64,
}

impl CameraIntrinsics {
    pub fn new(fu: f64, fv: f64, u0: f64, v0: f64) -> Result<Self, GeometryError> {
        if !(fu > 0.0 && fv > 0.0) || !fu.is_finite() || !fv.is_finite() {
            return Err(GeometryError::InvalidIntrinsics { fu, fv });
        }
        Ok(Self { fu, fv, u0, v0 })
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fu, 0.0, self.u0, 0.0, self.fv, self.v0, 0.0, 0.0, 1.0)
    }
}

/// Camera pose: `rotation` maps world directions into the camera frame and
/// `camera_center` is the optical center in world coordinates, so that
/// `p_c = rotation * (p_w - camera_center)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    rotation: Matrix3<f64>,
    camera_center: Vec3,
}

impl RigidPose {
    pub fn new(rotation: Matrix3<f64>, camera_center: Vec3) -> Result<Self, GeometryError> {
        let ortho = (rotation * rotation.transpose() - Matrix3::identity()).abs().max();
        let det = (rotation.determinant() - 1.0).abs();
        let deviation = ortho.max(det);
        if !(deviation <= ROTATION_TOLERANCE) {
            return Err(GeometryError::InvalidRotation(deviation));
        }
        Ok(Self {
            rotation,
            camera_center,
        })
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn camera_center(&self) -> Vec3 {
        self.camera_center
    }

    /// Optical axis expressed in the world frame.
    pub fn optical_axis(&self) -> Vec3 {
        self.rotation.transpose() * Vec3::z()
    }

    pub fn world_to_camera(&self, point: &Vec3) -> Vec3 {
        self.rotation * (point - self.camera_center)
    }

    /// Maps a camera-frame offset (e.g. a rig lever arm) into world coordinates.
    pub fn camera_to_world_offset(&self, offset: &Vec3) -> Vec3 {
        self.rotation.transpose() * offset
    }
}

pub fn project_world_to_pixel(
    point: &Vec3,
    pose: &RigidPose,
    k: &CameraIntrinsics,
) -> Result<PixelCoord, GeometryError> {
    let pc = pose.world_to_camera(point);
    if !(pc.z > 0.0) {
        return Err(GeometryError::BehindCamera(pc.z));
    }
    Ok(PixelCoord {
        u: k.fu * (pc.x / pc.z) + k.u0,
        v: k.fv * (pc.y / pc.z) + k.v0,
    })
}

/// Unit bearing from the optical center through `pixel`, in the camera frame.
pub fn back_project_bearing(pixel: &PixelCoord, k: &CameraIntrinsics) -> Vec3 {
    Vec3::new((pixel.u - k.u0) / k.fu, (pixel.v - k.v0) / k.fv, 1.0).normalize()
}

/// Angle between `a` and `b`; neither needs to be normalized. Returns `None`
/// when either vector has zero length.
pub fn angle_between(a: &Vec3, b: &Vec3) -> Option<f64> {
    let na = a.norm();
    let nb = b.norm();
    if na == 0.0 || nb == 0.0 || !na.is_finite() || !nb.is_finite() {
        return None;
    }
    Some((a.dot(b) / (na * nb)).clamp(-1.0, 1.0).acos())
}

/// Incidence angle of a camera-frame bearing with respect to the optical
/// axis, which is also the photodiode normal.
pub fn incidence_angle(bearing: &Vec3) -> f64 {
    (bearing.z / bearing.norm()).clamp(-1.0, 1.0).acos()
}

pub fn inter_bearing_angle(b_i: &Vec3, b_j: &Vec3) -> Result<f64, GeometryError> {
    angle_between(b_i, b_j).ok_or(GeometryError::ZeroBearing)
}

/// Rotation taking world directions into a camera frame whose optical axis
/// points along `axis` (world frame). The camera `x` axis is kept as close
/// as possible to `hint_x`.
pub fn look_along(axis: &Vec3, hint_x: &Vec3) -> Matrix3<f64> {
    let z = axis.normalize();
    let mut x = hint_x - z * hint_x.dot(&z);
    if x.norm() < 1e-9 {
        let alt = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        x = alt - z * alt.dot(&z);
    }
    let x = x.normalize();
    let y = z.cross(&x);
    Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()])
}
