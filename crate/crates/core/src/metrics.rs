//! Pose-accuracy metrics on FK-composed global rotations and positions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::MotionSequence;
use crate::rotmath::geodesic_angle;
use crate::skeleton::{forward_kinematics, FkResult, SkeletonConfig};

/// Means over joints and frames; `*_std` is the population standard
/// deviation of the per-frame means.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricResult {
    pub sip_deg: f64,
    pub sip_std: f64,
    pub angular_deg: f64,
    pub angular_std: f64,
    pub positional_cm: f64,
    pub positional_std: f64,
}

impl MetricResult {
    pub fn to_csv(&self) -> String {
        format!(
            "sip_err_deg,sip_std,ang_err_deg,ang_std,joint_err_cm,joint_std\n{},{},{},{},{},{}\n",
            self.sip_deg,
            self.sip_std,
            self.angular_deg,
            self.angular_std,
            self.positional_cm,
            self.positional_std
        )
    }

    /// `SIP Err | Ang Err | Joint Err` with `mean±std` cells.
    pub fn table_row(&self) -> String {
        format!(
            "SIP Err {:.2}±{:.2} | Ang Err {:.2}±{:.2} | Joint Err {:.2}±{:.2}",
            self.sip_deg,
            self.sip_std,
            self.angular_deg,
            self.angular_std,
            self.positional_cm,
            self.positional_std
        )
    }
}

fn mean_std(per_frame: &[f64]) -> (f64, f64) {
    let n = per_frame.len() as f64;
    let mean = per_frame.iter().sum::<f64>() / n;
    let var = per_frame
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        / n;
    (mean, var.sqrt())
}

fn per_frame_angles(a: &FkResult, b: &FkResult, joints: &[usize]) -> Vec<f64> {
    (0..a.frames)
        .map(|t| {
            joints
                .iter()
                .map(|&j| geodesic_angle(a.global(t, j), b.global(t, j)))
                .sum::<f64>()
                / joints.len() as f64
        })
        .collect()
}

/// Per-frame mean joint distance between two FK results, centimeters.
fn per_frame_distances(a: &FkResult, b: &FkResult) -> Result<Vec<f64>> {
    if a.frames != b.frames || a.joints != b.joints {
        return Err(Error::ShapeMismatch(format!(
            "FK results {}x{} vs {}x{}",
            a.frames, a.joints, b.frames, b.joints
        )));
    }
    Ok((0..a.frames)
        .map(|t| {
            (0..a.joints)
                .map(|j| {
                    let (p, q) = (a.pos(t, j), b.pos(t, j));
                    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt()
                })
                .sum::<f64>()
                * 100.0
                / a.joints as f64
        })
        .collect())
}

fn posed_pair(
    pred: &MotionSequence,
    gt: &MotionSequence,
    sk: &SkeletonConfig,
) -> Result<(FkResult, FkResult)> {
    pred.check_same_shape(gt)?;
    Ok((forward_kinematics(pred, sk)?, forward_kinematics(gt, sk)?))
}

/// Mean global rotation error over the skeleton's SIP joints (hips and
/// shoulders), degrees.
pub fn sip_error(pred: &MotionSequence, gt: &MotionSequence, sk: &SkeletonConfig) -> Result<f64> {
    if sk.sip_joints().is_empty() {
        return Err(Error::InvalidParam("skeleton defines no SIP joints".into()));
    }
    let (a, b) = posed_pair(pred, gt, sk)?;
    Ok(mean_std(&per_frame_angles(&a, &b, sk.sip_joints())).0)
}

/// Mean global rotation error over all joints, degrees.
pub fn angular_error(
    pred: &MotionSequence,
    gt: &MotionSequence,
    sk: &SkeletonConfig,
) -> Result<f64> {
    let (a, b) = posed_pair(pred, gt, sk)?;
    let all: Vec<usize> = (0..sk.joint_count()).collect();
    Ok(mean_std(&per_frame_angles(&a, &b, &all)).0)
}

/// Mean joint position error, centimeters.
pub fn positional_error(
    pred: &MotionSequence,
    gt: &MotionSequence,
    sk: &SkeletonConfig,
) -> Result<f64> {
    let (a, b) = posed_pair(pred, gt, sk)?;
    Ok(mean_std(&per_frame_distances(&a, &b)?).0)
}

/// Position error between already-posed skeletons, which may differ in
/// bone lengths. Centimeters.
pub fn positional_error_fk(pred: &FkResult, gt: &FkResult) -> Result<f64> {
    Ok(mean_std(&per_frame_distances(pred, gt)?).0)
}

/// All three metrics with per-frame standard deviations, from one FK pass
/// per sequence.
pub fn evaluate(
    pred: &MotionSequence,
    gt: &MotionSequence,
    sk: &SkeletonConfig,
) -> Result<MetricResult> {
    if sk.sip_joints().is_empty() {
        return Err(Error::InvalidParam("skeleton defines no SIP joints".into()));
    }
    let (a, b) = posed_pair(pred, gt, sk)?;
    let all: Vec<usize> = (0..sk.joint_count()).collect();
    let (sip_deg, sip_std) = mean_std(&per_frame_angles(&a, &b, sk.sip_joints()));
    let (angular_deg, angular_std) = mean_std(&per_frame_angles(&a, &b, &all));
    let (positional_cm, positional_std) = mean_std(&per_frame_distances(&a, &b)?);
    Ok(MetricResult {
        sip_deg,
        sip_std,
        angular_deg,
        angular_std,
        positional_cm,
        positional_std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::synth_motion;
    use crate::rotmath::RotationMatrix;
    use crate::skeleton::{Chain, Joint};

    fn single_frame(perturb: &[(usize, RotationMatrix)]) -> MotionSequence {
        let mut frame = vec![RotationMatrix::IDENTITY; 24];
        for &(j, r) in perturb {
            frame[j] = r;
        }
        MotionSequence::from_rotations(&[frame], 60.0).unwrap()
    }

    fn rx(deg: f64) -> RotationMatrix {
        RotationMatrix::from_axis_angle([1.0, 0.0, 0.0], deg.to_radians())
    }

    #[test]
    fn identical_inputs_give_zero() {
        let sk = SkeletonConfig::smpl();
        let m = synth_motion(30, 24, 60.0, 7, 2.0, 0.5).unwrap();
        let r = evaluate(&m, &m, &sk).unwrap();
        assert_eq!(r.sip_deg, 0.0);
        assert_eq!(r.angular_deg, 0.0);
        assert_eq!(r.positional_cm, 0.0);
    }

    #[test]
    fn left_hip_perturbation_sip() {
        let sk = SkeletonConfig::smpl();
        let gt = single_frame(&[]);
        let pred = single_frame(&[(1, rx(10.0))]);
        // Of the SIP joints {1, 2, 16, 17}, only the hip itself changes.
        let sip = sip_error(&pred, &gt, &sk).unwrap();
        assert!((sip - 2.5).abs() < 1e-9, "{sip}");
    }

    #[test]
    fn shared_root_rotation_cancels() {
        let sk = SkeletonConfig::smpl();
        let rz = RotationMatrix::from_axis_angle([0.0, 0.0, 1.0], 90f64.to_radians());
        let a = single_frame(&[(0, rz)]);
        let b = single_frame(&[(0, rz)]);
        assert_eq!(sip_error(&a, &b, &sk).unwrap(), 0.0);
    }

    #[test]
    fn leaf_and_root_angular() {
        let sk = SkeletonConfig::smpl();
        let gt = single_frame(&[]);
        let leaf = single_frame(&[(23, rx(12.0))]);
        assert!((angular_error(&leaf, &gt, &sk).unwrap() - 0.5).abs() < 1e-9);
        let root = single_frame(&[(0, rx(12.0))]);
        assert!((angular_error(&root, &gt, &sk).unwrap() - 12.0).abs() < 1e-9);
    }

    #[test]
    fn scaled_skeleton_position_error_equals_mean_rest_distance() {
        let sk = SkeletonConfig::smpl();
        let big = sk.scaled(2.0);
        let m = MotionSequence::t_pose(1, 24, 60.0).unwrap();
        let a = forward_kinematics(&m, &big).unwrap();
        let b = forward_kinematics(&m, &sk).unwrap();
        // Doubling every offset doubles every rest position.
        let expected = (0..24)
            .map(|j| {
                let p = b.pos(0, j);
                (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
            })
            .sum::<f64>()
            * 100.0
            / 24.0;
        assert!((positional_error_fk(&a, &b).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn half_turn_on_planar_skeleton() {
        let offsets = [
            [0.0, 0.0, 0.0],
            [0.3, 0.1, 0.0],
            [0.0, 0.4, 0.0],
            [-0.2, 0.0, 0.0],
            [0.1, -0.5, 0.0],
            [0.25, 0.25, 0.0],
        ];
        let joints = offsets
            .iter()
            .zip(Chain::ALL)
            .enumerate()
            .map(|(i, (&offset, chain))| Joint {
                name: format!("j{i}"),
                parent: if i == 0 { None } else { Some(i - 1) },
                offset,
                chain,
            })
            .collect();
        let sk = SkeletonConfig::new(joints, vec![0]).unwrap();
        let half = RotationMatrix::from_axis_angle([0.0, 0.0, 1.0], std::f64::consts::PI);
        let mut frame = vec![RotationMatrix::IDENTITY; 6];
        frame[0] = half;
        let pred = MotionSequence::from_rotations(&[frame], 60.0).unwrap();
        let gt = MotionSequence::t_pose(1, 6, 60.0).unwrap();
        let mut rest = [0.0f64; 2];
        let mut expected = 0.0;
        for o in offsets {
            rest = [rest[0] + o[0], rest[1] + o[1]];
            expected += 2.0 * (rest[0] * rest[0] + rest[1] * rest[1]).sqrt();
        }
        expected *= 100.0 / 6.0;
        assert!((positional_error(&pred, &gt, &sk).unwrap() - expected).abs() < 1e-9);
    }

    #[test]
    fn metrics_are_symmetric_and_reject_mismatch() {
        let sk = SkeletonConfig::smpl();
        let a = synth_motion(10, 24, 60.0, 1, 2.0, 0.6).unwrap();
        let b = synth_motion(10, 24, 60.0, 2, 2.0, 0.6).unwrap();
        let ab = evaluate(&a, &b, &sk).unwrap();
        let ba = evaluate(&b, &a, &sk).unwrap();
        assert!((ab.sip_deg - ba.sip_deg).abs() < 1e-9);
        assert!((ab.angular_deg - ba.angular_deg).abs() < 1e-9);
        assert!((ab.positional_cm - ba.positional_cm).abs() < 1e-9);
        let c = synth_motion(10, 24, 30.0, 2, 2.0, 0.6).unwrap();
        assert!(matches!(
            evaluate(&a, &c, &sk),
            Err(Error::ShapeMismatch(_))
        ));
        let d = synth_motion(9, 24, 60.0, 2, 2.0, 0.6).unwrap();
        assert!(evaluate(&a, &d, &sk).is_err());
    }
}
