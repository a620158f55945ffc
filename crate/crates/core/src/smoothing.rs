//! Label smoothing `R' = (1 - ε)·R + ε·u` and the comparison strategies:
//! i.i.d. Gaussian and uniform noise, static T-pose / dataset-mean blends
//! and temporal Gaussian filtering.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::{MotionSequence, R6D_CHANNELS};
use crate::noise::{sk_perlin, FieldSource, NoiseField, PerlinParams};
use crate::rotmath::{r6d_to_rotmat, rotmat_to_r6d};
use crate::skeleton::SkeletonConfig;

pub const DEFAULT_EPSILON: f64 = 0.1;
/// Default temporal filter width, frames.
pub const DEFAULT_SIGMA_FRAMES: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum SmoothingStrategy {
    SkPerlin(PerlinParams),
    Gaussian {
        sigma: f64,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    TPose,
    /// Per-joint mean pose, `J * 6` values.
    DatasetMean {
        pose: Vec<f64>,
    },
    TemporalGaussian {
        sigma_frames: f64,
    },
}

impl SmoothingStrategy {
    pub fn validate(&self) -> Result<()> {
        match self {
            SmoothingStrategy::SkPerlin(pp) => pp.validate(),
            SmoothingStrategy::Gaussian { sigma } if !(*sigma > 0.0 && sigma.is_finite()) => Err(
                Error::InvalidParam(format!("sigma must be > 0, got {sigma}")),
            ),
            SmoothingStrategy::Uniform { low, high } if !(low < high) => Err(Error::InvalidParam(
                format!("uniform bounds need low < high, got [{low}, {high}]"),
            )),
            SmoothingStrategy::TemporalGaussian { sigma_frames } if !(*sigma_frames > 0.0) => Err(
                Error::InvalidParam(format!("sigma_frames must be > 0, got {sigma_frames}")),
            ),
            SmoothingStrategy::DatasetMean { pose } if pose.len() % R6D_CHANNELS != 0 => Err(
                Error::ShapeMismatch(format!("mean pose has {} values", pose.len())),
            ),
            _ => Ok(()),
        }
    }
}

/// A strategy with its blend weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Smoothing {
    #[serde(flatten)]
    pub strategy: SmoothingStrategy,
    pub epsilon: f64,
    /// Map every output 6-vector back onto a rotation.
    #[serde(default)]
    pub reproject: bool,
}

impl Smoothing {
    pub fn new(strategy: SmoothingStrategy, epsilon: f64) -> Self {
        Self {
            strategy,
            epsilon,
            reproject: false,
        }
    }

    /// Applies the strategy to `seq`. `seed` drives every random draw; for
    /// sk-Perlin it replaces the seed stored in the parameters.
    pub fn apply(
        &self,
        seq: &MotionSequence,
        sk: &SkeletonConfig,
        seed: u64,
    ) -> Result<MotionSequence> {
        self.strategy.validate()?;
        check_epsilon(self.epsilon)?;
        let eps = self.epsilon;
        let out = match &self.strategy {
            SmoothingStrategy::SkPerlin(pp) => {
                if seq.joints() != sk.joint_count() {
                    return Err(Error::ShapeMismatch(format!(
                        "motion has {} joints, skeleton has {}",
                        seq.joints(),
                        sk.joint_count()
                    )));
                }
                let u = sk_perlin(&pp.with_seed(seed), sk, seq.frames().max(2), seq.fps())?;
                let u = truncate_frames(u, seq.frames())?;
                smooth_labels(seq, &u, eps)?
            }
            SmoothingStrategy::Gaussian { .. } | SmoothingStrategy::Uniform { .. } => {
                let u = make_baseline_field(
                    &self.strategy,
                    seq.frames(),
                    seq.joints(),
                    seq.fps(),
                    seed,
                )?;
                smooth_labels(seq, &u, eps)?
            }
            SmoothingStrategy::TPose => static_blend(
                seq,
                &crate::rotmath::R6d::IDENTITY.0.repeat(seq.joints()),
                eps,
            )?,
            SmoothingStrategy::DatasetMean { pose } => static_blend(seq, pose, eps)?,
            SmoothingStrategy::TemporalGaussian { sigma_frames } => {
                let filtered = temporal_gaussian_smooth(seq, *sigma_frames)?;
                blend(seq, filtered.data(), eps)?
            }
        };
        if self.reproject {
            reproject(&out)
        } else {
            Ok(out)
        }
    }
}

fn truncate_frames(u: NoiseField, frames: usize) -> Result<NoiseField> {
    if u.frames() == frames {
        return Ok(u);
    }
    let w = u.joints() * u.channels();
    NoiseField::new(
        u.values()[..frames * w].to_vec(),
        frames,
        u.joints(),
        u.channels(),
        u.fps(),
        *u.source(),
    )
}

fn check_epsilon(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "epsilon must be in [0, 1], got {eps}"
        )))
    }
}

/// Elementwise `(1 - ε)·r + ε·u`, returning exact copies at the endpoints.
fn blend(r: &MotionSequence, u: &[f64], eps: f64) -> Result<MotionSequence> {
    check_epsilon(eps)?;
    let data = if eps == 0.0 {
        r.data().to_vec()
    } else if eps == 1.0 {
        u.to_vec()
    } else {
        r.data()
            .iter()
            .zip(u)
            .map(|(&a, &b)| a + eps * (b - a))
            .collect()
    };
    r.with_data(data)
}

/// Label smoothing with a noise field of the same shape.
pub fn smooth_labels(r: &MotionSequence, u: &NoiseField, eps: f64) -> Result<MotionSequence> {
    if u.frames() != r.frames() || u.joints() != r.joints() || u.channels() != R6D_CHANNELS {
        return Err(Error::ShapeMismatch(format!(
            "labels {}x{}x{} vs noise {}x{}x{}",
            r.frames(),
            r.joints(),
            R6D_CHANNELS,
            u.frames(),
            u.joints(),
            u.channels()
        )));
    }
    blend(r, u.values(), eps)
}

/// Seeded i.i.d. Gaussian or uniform field with six channels.
pub fn make_baseline_field(
    strategy: &SmoothingStrategy,
    frames: usize,
    joints: usize,
    fps: f64,
    seed: u64,
) -> Result<NoiseField> {
    strategy.validate()?;
    let n = frames * joints * R6D_CHANNELS;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (values, source): (Vec<f64>, FieldSource) = match *strategy {
        SmoothingStrategy::Gaussian { sigma } => {
            let dist = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParam(e.to_string()))?;
            (
                (0..n).map(|_| dist.sample(&mut rng)).collect(),
                FieldSource::Gaussian { sigma, seed },
            )
        }
        SmoothingStrategy::Uniform { low, high } => (
            (0..n).map(|_| rng.random_range(low..high)).collect(),
            FieldSource::Uniform { low, high, seed },
        ),
        _ => {
            return Err(Error::InvalidParam(
                "baseline fields are only defined for gaussian and uniform strategies".into(),
            ))
        }
    };
    NoiseField::new(values, frames, joints, R6D_CHANNELS, fps, source)
}

/// Blends every frame toward one fixed pose (`J * 6` values).
pub fn static_blend(r: &MotionSequence, pose: &[f64], eps: f64) -> Result<MotionSequence> {
    let w = r.joints() * R6D_CHANNELS;
    if pose.len() != w {
        return Err(Error::ShapeMismatch(format!(
            "pose has {} values, motion frames have {w}",
            pose.len()
        )));
    }
    let tiled = pose.repeat(r.frames());
    blend(r, &tiled, eps)
}

/// Normalized Gaussian weights on `[-⌈3σ⌉, ⌈3σ⌉]`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-radius..=radius)
        .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect(i: i64, n: usize) -> usize {
    let period = 2 * n as i64;
    let m = i.rem_euclid(period);
    if m < n as i64 {
        m as usize
    } else {
        (period - 1 - m) as usize
    }
}

pub const MIN_TEMPORAL_FRAMES: usize = 3;

/// Filters every joint channel along time with [`gaussian_kernel`], using
/// reflected boundaries. Channel sums (and means) are preserved.
pub fn temporal_gaussian_smooth(r: &MotionSequence, sigma_frames: f64) -> Result<MotionSequence> {
    if !(sigma_frames > 0.0 && sigma_frames.is_finite()) {
        return Err(Error::InvalidParam(format!(
            "sigma_frames must be > 0, got {sigma_frames}"
        )));
    }
    let frames = r.frames();
    if frames < MIN_TEMPORAL_FRAMES {
        return Err(Error::TooShort {
            needed: MIN_TEMPORAL_FRAMES,
            got: frames,
        });
    }
    let kernel = gaussian_kernel(sigma_frames);
    let radius = (kernel.len() / 2) as i64;
    let w = r.joints() * R6D_CHANNELS;
    let src = r.data();
    let mut out = vec![0.0; src.len()];
    for t in 0..frames {
        let row = &mut out[t * w..(t + 1) * w];
        for (k, &kw) in kernel.iter().enumerate() {
            let s = reflect(t as i64 + k as i64 - radius, frames);
            for (o, &v) in row.iter_mut().zip(&src[s * w..(s + 1) * w]) {
                *o += kw * v;
            }
        }
    }
    r.with_data(out)
}

/// Per-joint, per-channel mean over all frames of all sequences.
pub fn mean_pose(seqs: &[MotionSequence]) -> Result<Vec<f64>> {
    let first = seqs
        .first()
        .ok_or_else(|| Error::InvalidParam("no motion sequences given".into()))?;
    let w = first.joints() * R6D_CHANNELS;
    let mut sum = vec![0.0; w];
    let mut count = 0usize;
    for s in seqs {
        if s.joints() != first.joints() {
            return Err(Error::ShapeMismatch(format!(
                "joint count {} vs {}",
                s.joints(),
                first.joints()
            )));
        }
        for frame in s.data().chunks_exact(w) {
            for (acc, v) in sum.iter_mut().zip(frame) {
                *acc += v;
            }
        }
        count += s.frames();
    }
    Ok(sum.into_iter().map(|v| v / count as f64).collect())
}

/// [`mean_pose`] over motion files (tensor format, or CSV fixtures at
/// `csv_fps`).
pub fn dataset_mean_pose<P: AsRef<Path>>(files: &[P], csv_fps: f64) -> Result<Vec<f64>> {
    if files.is_empty() {
        return Err(Error::InvalidParam("no motion files given".into()));
    }
    let seqs = files
        .iter()
        .map(|p| crate::io::read_motion_any(p, csv_fps))
        .collect::<Result<Vec<_>>>()?;
    mean_pose(&seqs)
}

/// Replaces each 6-vector by the R6D of its Gram-Schmidt rotation.
pub fn reproject(seq: &MotionSequence) -> Result<MotionSequence> {
    let mut data = Vec::with_capacity(seq.data().len());
    for t in 0..seq.frames() {
        for j in 0..seq.joints() {
            let r = r6d_to_rotmat(&seq.r6d(t, j))?;
            data.extend_from_slice(&rotmat_to_r6d(&r)?.0);
        }
    }
    seq.with_data(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::synth_motion;

    fn field_like(seq: &MotionSequence, values: Vec<f64>) -> NoiseField {
        NoiseField::new(
            values,
            seq.frames(),
            seq.joints(),
            6,
            seq.fps(),
            FieldSource::Gaussian {
                sigma: 1.0,
                seed: 0,
            },
        )
        .unwrap()
    }

    #[test]
    fn endpoints_are_exact_copies() {
        let r = synth_motion(20, 3, 60.0, 1, 2.0, 0.4).unwrap();
        let u = make_baseline_field(&SmoothingStrategy::Gaussian { sigma: 0.3 }, 20, 3, 60.0, 2)
            .unwrap();
        assert_eq!(smooth_labels(&r, &u, 0.0).unwrap(), r);
        assert_eq!(smooth_labels(&r, &u, 1.0).unwrap().data(), u.values());
    }

    #[test]
    fn half_blend_arithmetic() {
        let mut data = vec![0.0; 6];
        data[0] = 0.4;
        let r = MotionSequence::new(data, 1, 1, 60.0).unwrap();
        let mut u = vec![0.0; 6];
        u[0] = 0.2;
        let out = smooth_labels(&r, &field_like(&r, u), 0.5).unwrap();
        assert!((out.data()[0] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_epsilon_and_shapes() {
        let r = MotionSequence::t_pose(4, 2, 60.0).unwrap();
        let u = field_like(&r, vec![0.0; 48]);
        assert!(smooth_labels(&r, &u, 1.5).is_err());
        assert!(smooth_labels(&r, &u, -0.1).is_err());
        let short = MotionSequence::t_pose(3, 2, 60.0).unwrap();
        assert!(matches!(
            smooth_labels(&short, &u, 0.1),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn static_blend_cases() {
        let tpose = MotionSequence::t_pose(5, 24, 60.0).unwrap();
        let pose = crate::rotmath::R6d::IDENTITY.0.repeat(24);
        assert_eq!(static_blend(&tpose, &pose, 0.1).unwrap(), tpose);
        let r = synth_motion(5, 24, 60.0, 3, 1.0, 0.5).unwrap();
        assert_eq!(static_blend(&r, &pose, 0.0).unwrap(), r);
        assert!(static_blend(&r, &pose[..6], 0.1).is_err());
    }

    #[test]
    fn baseline_fields() {
        let u = make_baseline_field(
            &SmoothingStrategy::Uniform {
                low: -0.1,
                high: 0.1,
            },
            100,
            24,
            60.0,
            5,
        )
        .unwrap();
        assert!(u.values().iter().all(|v| (-0.1..=0.1).contains(v)));
        let again = make_baseline_field(
            &SmoothingStrategy::Uniform {
                low: -0.1,
                high: 0.1,
            },
            100,
            24,
            60.0,
            5,
        )
        .unwrap();
        assert_eq!(u, again);
        assert!(make_baseline_field(&SmoothingStrategy::TPose, 10, 24, 60.0, 0).is_err());
        assert!(
            make_baseline_field(&SmoothingStrategy::Gaussian { sigma: 0.0 }, 10, 24, 60.0, 0)
                .is_err()
        );
    }

    #[test]
    fn gaussian_field_mean_within_three_standard_errors() {
        // 10^6 samples (6945 x 24 x 6 = 1_000_080).
        let sigma = 0.07;
        let u = make_baseline_field(&SmoothingStrategy::Gaussian { sigma }, 6945, 24, 60.0, 11)
            .unwrap();
        let n = u.values().len() as f64;
        let mean = u.values().iter().sum::<f64>() / n;
        assert!(mean.abs() <= 3.0 * sigma / n.sqrt(), "mean {mean}");
    }

    #[test]
    fn kernel_table() {
        let k = gaussian_kernel(1.0);
        assert_eq!(k.len(), 7);
        let raw = [(-4.5f64).exp(), (-2.0f64).exp(), (-0.5f64).exp(), 1.0];
        let total = 2.0 * (raw[0] + raw[1] + raw[2]) + raw[3];
        let expected = [raw[0], raw[1], raw[2], raw[3], raw[2], raw[1], raw[0]].map(|v| v / total);
        for (a, b) in k.iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn impulse_response_is_kernel() {
        let mut data = vec![0.0; 30 * 6];
        data[15 * 6] = 1.0;
        let r = MotionSequence::new(data, 30, 1, 60.0).unwrap();
        let out = temporal_gaussian_smooth(&r, 1.0).unwrap();
        let k = gaussian_kernel(1.0);
        for t in 0..30 {
            let expected = if (12..=18).contains(&t) {
                k[t - 12]
            } else {
                0.0
            };
            assert!((out.data()[t * 6] - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_sequence_unchanged_and_means_preserved() {
        let r = MotionSequence::t_pose(20, 3, 60.0).unwrap();
        let out = temporal_gaussian_smooth(&r, 2.0).unwrap();
        for (a, b) in out.data().iter().zip(r.data()) {
            assert!((a - b).abs() < 1e-12);
        }
        // Kernel wider than the sequence exercises repeated reflection.
        for (frames, sigma) in [(200, 3.0), (5, 4.0)] {
            let m = synth_motion(frames, 2, 60.0, 4, 5.0, 1.0).unwrap();
            let s = temporal_gaussian_smooth(&m, sigma).unwrap();
            for k in 0..12 {
                let a: f64 = (0..frames).map(|t| m.data()[t * 12 + k]).sum();
                let b: f64 = (0..frames).map(|t| s.data()[t * 12 + k]).sum();
                assert!((a - b).abs() / frames as f64 <= 1e-9);
            }
        }
        assert!(
            temporal_gaussian_smooth(&MotionSequence::t_pose(2, 1, 60.0).unwrap(), 1.0).is_err()
        );
    }

    #[test]
    fn mean_pose_cases() {
        let tpose = MotionSequence::t_pose(7, 2, 60.0).unwrap();
        assert_eq!(
            mean_pose(std::slice::from_ref(&tpose)).unwrap(),
            tpose.frame(0)
        );
        let mut a = vec![0.0; 6];
        a[0] = 0.2;
        let mut b = vec![0.0; 6];
        b[0] = 0.4;
        let mut data = a;
        data.extend(b);
        let two = MotionSequence::new(data, 2, 1, 60.0).unwrap();
        assert!((mean_pose(&[two]).unwrap()[0] - 0.3).abs() < 1e-15);
        assert!(mean_pose(&[]).is_err());
        let other = MotionSequence::t_pose(3, 3, 60.0).unwrap();
        assert!(mean_pose(&[tpose, other]).is_err());
    }

    #[test]
    fn reprojection_yields_rotations() {
        let r = synth_motion(10, 4, 60.0, 2, 1.0, 0.5).unwrap();
        let u = make_baseline_field(&SmoothingStrategy::Gaussian { sigma: 0.2 }, 10, 4, 60.0, 1)
            .unwrap();
        let noisy = smooth_labels(&r, &u, 0.5).unwrap();
        let fixed = reproject(&noisy).unwrap();
        for t in 0..10 {
            for j in 0..4 {
                let m = fixed.rotation(t, j).unwrap();
                assert!(m.is_valid());
                let back = rotmat_to_r6d(&m).unwrap();
                for (x, y) in back.0.iter().zip(fixed.joint(t, j)) {
                    assert!((x - y).abs() < 1e-12);
                }
            }
        }
    }
}
