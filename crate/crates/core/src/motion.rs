//! Dense `T x J x C` tensors for motion labels.

use crate::error::{Error, Result};
use crate::rotmath::{r6d_to_rotmat, R6d, RotationMatrix};

/// Channels per joint in the R6D representation.
pub const R6D_CHANNELS: usize = 6;

/// Per-joint R6D rotations over time, stored frame-major
/// (`data[(t * joints + j) * 6 + c]`).
///
/// Construction checks shape and finiteness only. Smoothed labels are
/// regression targets and need not decode to rotations; call
/// [`MotionSequence::validate_rotations`] where decodability matters.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    data: Vec<f64>,
    frames: usize,
    joints: usize,
    fps: f64,
}

impl MotionSequence {
    pub fn new(data: Vec<f64>, frames: usize, joints: usize, fps: f64) -> Result<Self> {
        if frames == 0 || joints == 0 {
            return Err(Error::ShapeMismatch(
                "motion needs at least one frame and joint".into(),
            ));
        }
        if data.len() != frames * joints * R6D_CHANNELS {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {frames}x{joints}x{R6D_CHANNELS}, got {}",
                frames * joints * R6D_CHANNELS,
                data.len()
            )));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidParam(format!(
                "frame rate must be positive, got {fps}"
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("motion data"));
        }
        Ok(Self {
            data,
            frames,
            joints,
            fps,
        })
    }

    /// Every joint at the identity rotation.
    pub fn t_pose(frames: usize, joints: usize, fps: f64) -> Result<Self> {
        let data = R6d::IDENTITY.0.repeat(frames * joints);
        Self::new(data, frames, joints, fps)
    }

    /// Builds a sequence from per-frame, per-joint rotation matrices.
    pub fn from_rotations(rots: &[Vec<RotationMatrix>], fps: f64) -> Result<Self> {
        let frames = rots.len();
        let joints = rots.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(frames * joints * R6D_CHANNELS);
        for frame in rots {
            if frame.len() != joints {
                return Err(Error::ShapeMismatch("ragged rotation frames".into()));
            }
            for r in frame {
                data.extend_from_slice(&crate::rotmath::rotmat_to_r6d(r)?.0);
            }
        }
        Self::new(data, frames, joints, fps)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn channels(&self) -> usize {
        R6D_CHANNELS
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let w = self.joints * R6D_CHANNELS;
        &self.data[t * w..(t + 1) * w]
    }

    pub fn joint(&self, t: usize, j: usize) -> &[f64] {
        let i = (t * self.joints + j) * R6D_CHANNELS;
        &self.data[i..i + R6D_CHANNELS]
    }

    pub fn r6d(&self, t: usize, j: usize) -> R6d {
        R6d(self.joint(t, j).try_into().expect("six channels"))
    }

    pub fn rotation(&self, t: usize, j: usize) -> Result<RotationMatrix> {
        r6d_to_rotmat(&self.r6d(t, j))
    }

    /// Checks that every per-joint 6-vector decodes to a rotation.
    pub fn validate_rotations(&self) -> Result<()> {
        for t in 0..self.frames {
            for j in 0..self.joints {
                self.rotation(t, j)?;
            }
        }
        Ok(())
    }

    /// Same shape and frame rate, new values.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(data, self.frames, self.joints, self.fps)
    }

    pub(crate) fn check_same_shape(&self, other: &MotionSequence) -> Result<()> {
        if self.frames != other.frames || self.joints != other.joints {
            return Err(Error::ShapeMismatch(format!(
                "{}x{} vs {}x{}",
                self.frames, self.joints, other.frames, other.joints
            )));
        }
        if self.fps != other.fps {
            return Err(Error::ShapeMismatch(format!(
                "frame rate {} vs {}",
                self.fps, other.fps
            )));
        }
        Ok(())
    }
}
