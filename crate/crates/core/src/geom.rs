//! Spatial-math primitives.
//!
//! Orientation convention used throughout the crate: intrinsic Z-Y-X
//! (yaw, then pitch, then roll about the moving axes), so that
//!
//! ```text
//! R = Rz(yaw) * Ry(pitch) * Rx(roll)
//! ```
//!
//! The world frame has `z` pointing up and `x` along the walking direction.
//! The body frame of the box has `x` along its long side (front = `+x`),
//! `y` to its left and `z` up when the box rests flat.
//!
//! Angular velocities entering [`euler_rate_matrix`] are expressed in the
//! body frame; [`velocity_transform`] works with world-frame twists.

use nalgebra::{Matrix3, Matrix6, Rotation3, Vector3};
#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};

/// Default half-width (rad) of the exclusion band around `pitch = ±π/2`.
pub const DEFAULT_SINGULARITY_BAND: f64 = 0.05;

/// Roll-pitch-yaw angles. Stored in the order used by the state vector.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EulerAngles {
    pub roll: f64,
    pub pitch: f64,
    pub yaw: f64,
}

impl EulerAngles {
    pub const fn new(roll: f64, pitch: f64, yaw: f64) -> Self {
        Self { roll, pitch, yaw }
    }

    pub fn from_vector(v: &Vector3<f64>) -> Self {
        Self::new(v.x, v.y, v.z)
    }

    /// `[roll, pitch, yaw]`.
    pub fn to_vector(self) -> Vector3<f64> {
        Vector3::new(self.roll, self.pitch, self.yaw)
    }

    pub fn rotation(self) -> Matrix3<f64> {
        Rotation3::from_euler_angles(self.roll, self.pitch, self.yaw).into_inner()
    }

    /// Inverse of [`EulerAngles::rotation`] on the principal branch
    /// (`|pitch| ≤ π/2`).
    pub fn from_rotation(r: &Matrix3<f64>) -> Self {
        let pitch = (-r[(2, 0)]).max(-1.0).min(1.0).asin();
        let roll = r[(2, 1)].atan2(r[(2, 2)]);
        let yaw = r[(1, 0)].atan2(r[(0, 0)]);
        Self::new(roll, pitch, yaw)
    }
}

/// Position plus orientation of a frame with respect to the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub angles: EulerAngles,
}

impl Pose {
    pub fn new(position: Vector3<f64>, angles: EulerAngles) -> Self {
        Self { position, angles }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        self.angles.rotation()
    }

    /// Maps a body-frame point into the world frame.
    pub fn transform_point(&self, p_body: &Vector3<f64>) -> Vector3<f64> {
        self.position + self.rotation() * p_body
    }
}

/// Cross-product matrix: `skew(v) * w == v × w`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Matrix `W` with `Ψ̇ = W ω`, `Ψ = [roll, pitch, yaw]`, `ω` in the body
/// frame.
pub fn euler_rate_matrix(angles: EulerAngles, band: f64) -> Result<Matrix3<f64>> {
    check_singularity(angles, band)?;
    let (sphi, cphi) = angles.roll.sin_cos();
    let (tth, cth) = (angles.pitch.tan(), angles.pitch.cos());
    Ok(Matrix3::new(
        1.0,
        sphi * tth,
        cphi * tth,
        0.0,
        cphi,
        -sphi,
        0.0,
        sphi / cth,
        cphi / cth,
    ))
}

/// Closed-form inverse of [`euler_rate_matrix`]: `ω = W⁻¹ Ψ̇`.
pub fn euler_rate_matrix_inverse(angles: EulerAngles, band: f64) -> Result<Matrix3<f64>> {
    check_singularity(angles, band)?;
    let (sphi, cphi) = angles.roll.sin_cos();
    let (sth, cth) = angles.pitch.sin_cos();
    Ok(Matrix3::new(
        1.0,
        0.0,
        -sth,
        0.0,
        cphi,
        sphi * cth,
        0.0,
        -sphi,
        cphi * cth,
    ))
}

fn check_singularity(angles: EulerAngles, band: f64) -> Result<()> {
    if angles.pitch.abs() >= core::f64::consts::FRAC_PI_2 - band {
        return Err(Error::SingularConfiguration {
            pitch: angles.pitch,
        });
    }
    Ok(())
}

/// 6×6 map from the object twist `[ṗ_B; ω]` (world frame) to the twist of
/// a rigidly attached point at body offset `p_body`.
pub fn velocity_transform(r_b: &Matrix3<f64>, p_body: &Vector3<f64>) -> Matrix6<f64> {
    let mut d = Matrix6::identity();
    d.fixed_view_mut::<3, 3>(0, 3)
        .copy_from(&(-skew(&(r_b * p_body))));
    d
}
