//! Seeded 3D gradient noise, octave synthesis and the skeleton-structured
//! noise field, plus closed-form bounds on its amplitude and slope.
//!
//! Field coordinates are `(time, joint, channel)`. Time is measured in
//! seconds and multiplied by the time scale, so `time_scale` is the base
//! lattice frequency in cycles per second. The joint axis is scaled by
//! `space_scale` per joint (or chain) index, the channel axis by 1.0.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::skeleton::SkeletonConfig;

/// Noise parameters. Defaults are the tuned set `S_b=0.07, S_t=0.5,
/// S_s=0.7, p=0.5, oct=5, l=1.5` with per-joint offset weight 0.5.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerlinParams {
    /// Amplitude of the first octave, in R6D units.
    pub base_scale: f64,
    /// Base lattice frequency along time, cycles per second.
    pub time_scale: f64,
    /// Lattice cells per joint index.
    pub space_scale: f64,
    pub persistence: f64,
    pub octaves: u32,
    pub lacunarity: f64,
    /// Weight of the per-joint single-octave offset relative to `base_scale`.
    pub offset_weight: f64,
    pub seed: u64,
}

impl Default for PerlinParams {
    fn default() -> Self {
        Self {
            base_scale: 0.07,
            time_scale: 0.5,
            space_scale: 0.7,
            persistence: 0.5,
            octaves: 5,
            lacunarity: 1.5,
            offset_weight: 0.5,
            seed: 0,
        }
    }
}

impl PerlinParams {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Rejects out-of-domain values. A zero `base_scale` is accepted and
    /// yields an all-zero field.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParam(m));
        if !(self.base_scale.is_finite() && self.base_scale >= 0.0) {
            return bad(format!("base_scale must be >= 0, got {}", self.base_scale));
        }
        if !(self.time_scale.is_finite() && self.time_scale > 0.0) {
            return bad(format!("time_scale must be > 0, got {}", self.time_scale));
        }
        if !(self.space_scale.is_finite() && self.space_scale > 0.0) {
            return bad(format!("space_scale must be > 0, got {}", self.space_scale));
        }
        if !(self.persistence > 0.0 && self.persistence <= 1.0) {
            return bad(format!(
                "persistence must be in (0, 1], got {}",
                self.persistence
            ));
        }
        if self.octaves < 1 {
            return bad("octaves must be >= 1".to_string());
        }
        if !(self.lacunarity.is_finite() && self.lacunarity >= 1.0) {
            return bad(format!("lacunarity must be >= 1, got {}", self.lacunarity));
        }
        if !(self.offset_weight.is_finite() && self.offset_weight >= 0.0) {
            return bad(format!(
                "offset_weight must be >= 0, got {}",
                self.offset_weight
            ));
        }
        Ok(())
    }

    /// `Σ_{k<oct} p^k`, the octave amplitude sum per unit `base_scale`.
    pub fn amplitude_sum(&self) -> f64 {
        geometric_sum(self.persistence, self.octaves)
    }
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const OFFSET_SALT: u64 = 0x6a09_e667_f3bc_c909;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn lattice_hash(ix: i64, iy: i64, iz: i64, seed: u64) -> u64 {
    let mut h = mix64(seed.wrapping_add(GOLDEN));
    h = mix64(h ^ (ix as u64).wrapping_mul(0xd1b5_4a32_d192_ed03));
    h = mix64(h ^ (iy as u64).wrapping_mul(0xaef1_7502_108e_f2d9));
    mix64(h ^ (iz as u64).wrapping_mul(0xdb4f_0b91_75ae_2165))
}

/// Uniform in (0, 1].
fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 1.0) * (1.0 / (1u64 << 53) as f64)
}

/// Unit gradient attached to lattice point `(ix, iy, iz)`: a normalized
/// 3D standard normal draw seeded by the lattice hash.
pub fn lattice_gradient(ix: i64, iy: i64, iz: i64, seed: u64) -> [f64; 3] {
    let h = lattice_hash(ix, iy, iz, seed);
    let mut k = 0u64;
    loop {
        let mut next = || {
            k += 1;
            unit_open(mix64(h.wrapping_add(k.wrapping_mul(GOLDEN))))
        };
        let (u1, u2, u3, u4) = (next(), next(), next(), next());
        let r1 = (-2.0 * u1.ln()).sqrt();
        let r2 = (-2.0 * u3.ln()).sqrt();
        let (s1, c1) = (std::f64::consts::TAU * u2).sin_cos();
        let s2 = (std::f64::consts::TAU * u4).sin();
        let g = [r1 * c1, r1 * s1, r2 * s2];
        let n = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
        if n > 1e-12 {
            return [g[0] / n, g[1] / n, g[2] / n];
        }
    }
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + t * (b - a)
}

/// Classic lattice gradient noise with the quintic fade. Exactly zero on
/// integer lattice points.
pub fn perlin3(x: f64, y: f64, z: f64, seed: u64) -> f64 {
    let (xf, yf, zf) = (x.floor(), y.floor(), z.floor());
    let (ix, iy, iz) = (xf as i64, yf as i64, zf as i64);
    let (fx, fy, fz) = (x - xf, y - yf, z - zf);
    let corner = |dx: i64, dy: i64, dz: i64| {
        let g = lattice_gradient(ix + dx, iy + dy, iz + dz, seed);
        g[0] * (fx - dx as f64) + g[1] * (fy - dy as f64) + g[2] * (fz - dz as f64)
    };
    let (u, v, w) = (fade(fx), fade(fy), fade(fz));
    let x00 = lerp(corner(0, 0, 0), corner(1, 0, 0), u);
    let x10 = lerp(corner(0, 1, 0), corner(1, 1, 0), u);
    let x01 = lerp(corner(0, 0, 1), corner(1, 0, 1), u);
    let x11 = lerp(corner(0, 1, 1), corner(1, 1, 1), u);
    lerp(lerp(x00, x10, v), lerp(x01, x11, v), w)
}

/// Octave sum `Σ_k S_b p^k · perlin3(l^k x, l^k y, l^k z, seed ^ k)` over
/// caller-scaled coordinates.
pub fn fbm(x: f64, y: f64, z: f64, pp: &PerlinParams) -> f64 {
    let mut amp = pp.base_scale;
    let mut freq = 1.0;
    let mut sum = 0.0;
    for k in 0..pp.octaves {
        sum += amp * perlin3(freq * x, freq * y, freq * z, pp.seed ^ u64::from(k));
        amp *= pp.persistence;
        freq *= pp.lacunarity;
    }
    sum
}

/// Where a field's values came from; serialized into file headers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FieldSource {
    SkPerlin(PerlinParams),
    Gaussian { sigma: f64, seed: u64 },
    Uniform { low: f64, high: f64, seed: u64 },
}

/// A `T x J x C` noise field, frame-major like
/// [`crate::motion::MotionSequence`].
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseField {
    values: Vec<f64>,
    frames: usize,
    joints: usize,
    channels: usize,
    fps: f64,
    source: FieldSource,
}

impl NoiseField {
    pub fn new(
        values: Vec<f64>,
        frames: usize,
        joints: usize,
        channels: usize,
        fps: f64,
        source: FieldSource,
    ) -> Result<Self> {
        if values.len() != frames * joints * channels {
            return Err(Error::ShapeMismatch(format!(
                "expected {} values for {frames}x{joints}x{channels}, got {}",
                frames * joints * channels,
                values.len()
            )));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::InvalidParam(format!(
                "frame rate must be positive, got {fps}"
            )));
        }
        Ok(Self {
            values,
            frames,
            joints,
            channels,
            fps,
            source,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn joints(&self) -> usize {
        self.joints
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn source(&self) -> &FieldSource {
        &self.source
    }

    pub fn get(&self, t: usize, j: usize, c: usize) -> f64 {
        self.values[(t * self.joints + j) * self.channels + c]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Largest per-joint L2 norm over channels, across all frames.
    pub fn max_joint_norm(&self) -> f64 {
        self.values
            .chunks_exact(self.channels)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// Skeleton-structured noise: each joint carries the octave noise of its
/// chain (sampled at the chain index on the joint axis, shared by every
/// joint of the chain) plus a single-octave offset sampled at its own
/// joint index. The sum is rescaled by `Σp^k / (Σp^k + w)` so the
/// per-channel amplitude stays within `S_b Σp^k`.
pub fn sk_perlin(
    pp: &PerlinParams,
    sk: &SkeletonConfig,
    frames: usize,
    fps: f64,
) -> Result<NoiseField> {
    pp.validate()?;
    if frames < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: frames,
        });
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::InvalidParam(format!(
            "frame rate must be positive, got {fps}"
        )));
    }
    let joints = sk.joint_count();
    let channels = crate::motion::R6D_CHANNELS;
    let amp_sum = pp.amplitude_sum();
    let norm = if amp_sum + pp.offset_weight > 0.0 {
        amp_sum / (amp_sum + pp.offset_weight)
    } else {
        1.0
    };
    let offset_amp = pp.offset_weight * pp.base_scale;
    let offset_seed = pp.seed ^ OFFSET_SALT;
    let chain_idx: Vec<f64> = (0..joints).map(|j| sk.chain_of(j).index() as f64).collect();
    let n_chains = crate::skeleton::Chain::ALL.len();

    let mut values = vec![0.0; frames * joints * channels];
    values
        .par_chunks_mut(joints * channels)
        .enumerate()
        .for_each(|(t, frame)| {
            let x = pp.time_scale * t as f64 / fps;
            let mut chain_noise = vec![[0.0; 6]; n_chains];
            for (ci, row) in chain_noise.iter_mut().enumerate() {
                let y = pp.space_scale * ci as f64;
                for (c, v) in row.iter_mut().enumerate() {
                    *v = fbm(x, y, c as f64, pp);
                }
            }
            for j in 0..joints {
                let base = &chain_noise[chain_idx[j] as usize];
                let y = pp.space_scale * j as f64;
                for c in 0..channels {
                    let offset = if offset_amp > 0.0 {
                        offset_amp * perlin3(x, y, c as f64, offset_seed)
                    } else {
                        0.0
                    };
                    frame[j * channels + c] = norm * (base[c] + offset);
                }
            }
        });
    NoiseField::new(
        values,
        frames,
        joints,
        channels,
        fps,
        FieldSource::SkPerlin(*pp),
    )
}

/// `Σ_{k<n} r^k`: `(1 - r^n)/(1 - r)`, or `n` when `r = 1`.
pub fn geometric_sum(r: f64, n: u32) -> f64 {
    if r == 1.0 {
        f64::from(n)
    } else {
        (1.0 - r.powi(n as i32)) / (1.0 - r)
    }
}

/// Upper bound on the temporal slope of the octave noise, in units per
/// second: `g_max · S_b · S_t · S(p·l, oct)`.
pub fn gradient_bound(pp: &PerlinParams, g_max: f64) -> f64 {
    g_max
        * pp.base_scale
        * pp.time_scale
        * geometric_sum(pp.persistence * pp.lacunarity, pp.octaves)
}

/// Global amplitude bound `S_b · Σp^i · √d` for a `d`-channel joint vector.
pub fn amplitude_bound(pp: &PerlinParams, d: usize) -> f64 {
    pp.base_scale * pp.amplitude_sum() * (d as f64).sqrt()
}

/// Inter-joint variation bound `k_g · ‖d‖ · w / (S_s · f)`.
pub fn interjoint_bound(
    pp: &PerlinParams,
    bone_length: f64,
    spatial_freq: f64,
    k_g: f64,
) -> Result<f64> {
    let denom = pp.space_scale * spatial_freq;
    if !(denom > 0.0) {
        return Err(Error::InvalidParam(format!(
            "space_scale * spatial_freq must be > 0, got {denom}"
        )));
    }
    Ok(k_g * bone_length * pp.offset_weight / denom)
}

/// Empirical maximum slope of [`perlin3`] along the first axis, per unit
/// coordinate, from `samples` forward differences of step `h` at
/// pseudo-random points.
pub fn measure_gradient_constant(samples: usize, h: f64, seed: u64) -> f64 {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let s = mix64(seed ^ (i as u64).wrapping_mul(GOLDEN));
            let coord = |k: u64| unit_open(mix64(s.wrapping_add(k))) * 64.0 - 32.0;
            let (x, y, z) = (coord(1), coord(2), coord(3));
            ((perlin3(x + h, y, z, seed) - perlin3(x, y, z, seed)) / h).abs()
        })
        .reduce(|| 0.0, f64::max)
}
