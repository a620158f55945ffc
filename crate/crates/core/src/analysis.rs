//! Empirical checks on motion labels and noise fields: periodogram,
//! low-frequency dominance, spectral slope, temporal rate, chain
//! correlation and histogram entropy.

use rayon::prelude::*;
use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::MotionSequence;
use crate::noise::NoiseField;
use crate::skeleton::SkeletonConfig;

/// Read access to a frame-major `T x J x C` tensor sampled at `fps`.
pub trait Tensor3 {
    fn frames(&self) -> usize;
    fn joints(&self) -> usize;
    fn channels(&self) -> usize;
    fn fps(&self) -> f64;
    fn values(&self) -> &[f64];

    fn at(&self, t: usize, j: usize, c: usize) -> f64 {
        self.values()[(t * self.joints() + j) * self.channels() + c]
    }

    /// One time series per `(joint, channel)`, joint-major.
    fn traces(&self) -> Vec<Vec<f64>> {
        let (jn, cn) = (self.joints(), self.channels());
        (0..jn * cn)
            .map(|k| {
                (0..self.frames())
                    .map(|t| self.at(t, k / cn, k % cn))
                    .collect()
            })
            .collect()
    }
}

impl Tensor3 for MotionSequence {
    fn frames(&self) -> usize {
        MotionSequence::frames(self)
    }
    fn joints(&self) -> usize {
        MotionSequence::joints(self)
    }
    fn channels(&self) -> usize {
        MotionSequence::channels(self)
    }
    fn fps(&self) -> f64 {
        MotionSequence::fps(self)
    }
    fn values(&self) -> &[f64] {
        self.data()
    }
}

impl Tensor3 for NoiseField {
    fn frames(&self) -> usize {
        NoiseField::frames(self)
    }
    fn joints(&self) -> usize {
        NoiseField::joints(self)
    }
    fn channels(&self) -> usize {
        NoiseField::channels(self)
    }
    fn fps(&self) -> f64 {
        NoiseField::fps(self)
    }
    fn values(&self) -> &[f64] {
        NoiseField::values(self)
    }
}

pub const MIN_PSD_FRAMES: usize = 8;

/// One-sided periodogram. `power[ch][k]` is the power of channel `ch` at
/// `freqs[k] = k * fps / T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdResult {
    pub freqs: Vec<f64>,
    pub power: Vec<Vec<f64>>,
    pub fps: f64,
}

impl PsdResult {
    /// Power averaged over channels.
    pub fn mean_power(&self) -> Vec<f64> {
        let n = self.power.len().max(1) as f64;
        (0..self.freqs.len())
            .map(|k| self.power.iter().map(|p| p[k]).sum::<f64>() / n)
            .collect()
    }
}

/// Rectangular-window periodogram: `|X_k|²` with the mirrored bins folded
/// into `1 <= k < T/2` (DC and, for even `T`, Nyquist are not doubled).
/// The folded total equals `T · Σ x²`.
pub fn psd(channels: &[Vec<f64>], fps: f64) -> Result<PsdResult> {
    let n = channels.first().map_or(0, Vec::len);
    if n < MIN_PSD_FRAMES {
        return Err(Error::TooShort {
            needed: MIN_PSD_FRAMES,
            got: n,
        });
    }
    if channels.iter().any(|c| c.len() != n) {
        return Err(Error::ShapeMismatch("channels differ in length".into()));
    }
    if channels.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("signal"));
    }
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::InvalidParam(format!(
            "frame rate must be positive, got {fps}"
        )));
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let half = n / 2;
    let power = channels
        .par_iter()
        .map(|ch| {
            let mut buf: Vec<Complex<f64>> = ch.iter().map(|&v| Complex::new(v, 0.0)).collect();
            fft.process(&mut buf);
            (0..=half)
                .map(|k| {
                    let p = buf[k].norm_sqr();
                    if k == 0 || (n.is_multiple_of(2) && k == half) {
                        p
                    } else {
                        p + buf[n - k].norm_sqr()
                    }
                })
                .collect()
        })
        .collect();
    let freqs = (0..=half).map(|k| k as f64 * fps / n as f64).collect();
    Ok(PsdResult { freqs, power, fps })
}

pub fn psd_of<X: Tensor3 + ?Sized>(x: &X) -> Result<PsdResult> {
    psd(&x.traces(), x.fps())
}

/// Share of non-DC power at or below `f_c`, aggregated over channels.
pub fn low_freq_ratio(p: &PsdResult, f_c: f64) -> Result<f64> {
    let nyquist = p.fps / 2.0;
    if !(f_c > 0.0 && f_c <= nyquist) {
        return Err(Error::InvalidParam(format!(
            "cutoff {f_c} Hz outside (0, {nyquist}]"
        )));
    }
    let (mut low, mut total, mut dc) = (0.0, 0.0, 0.0);
    for ch in &p.power {
        dc += ch[0];
        for (k, &pw) in ch.iter().enumerate().skip(1) {
            total += pw;
            if p.freqs[k] <= f_c {
                low += pw;
            }
        }
    }
    // FFT round-off leaves ~1e-30 relative power in the bins of a constant
    // signal; treat that as no variation at all.
    if total <= 1e-20 * (total + dc) {
        return Err(Error::UndefinedRatio);
    }
    Ok(low / total)
}

pub const MIN_SLOPE_BINS: usize = 5;

/// Least-squares `β` in `P(f) ∝ 1/f^β` over bins in `[f_lo, f_hi]`, using
/// channel-averaged power.
pub fn spectral_slope(p: &PsdResult, f_lo: f64, f_hi: f64) -> Result<f64> {
    if !(f_lo > 0.0 && f_lo < f_hi && f_hi <= p.fps / 2.0) {
        return Err(Error::InvalidParam(format!(
            "slope band [{f_lo}, {f_hi}] must satisfy 0 < lo < hi <= Nyquist"
        )));
    }
    let mean = p.mean_power();
    let pts: Vec<(f64, f64)> = p
        .freqs
        .iter()
        .zip(&mean)
        .filter(|(&f, _)| f >= f_lo && f <= f_hi)
        .map(|(&f, &pw)| (f, pw))
        .collect();
    if pts.len() < MIN_SLOPE_BINS {
        return Err(Error::InsufficientBins {
            needed: MIN_SLOPE_BINS,
            got: pts.len(),
        });
    }
    if pts.iter().any(|&(_, pw)| pw <= 0.0) {
        return Err(Error::InvalidParam("zero power inside slope band".into()));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = pts.iter().map(|&(f, pw)| (f.ln(), pw.ln())).unzip();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(-sxy / sxx)
}

/// Per-joint rates `‖x[t+1] - x[t]‖₂ · fps` for every `(t, j)`.
pub fn rate_samples<X: Tensor3 + ?Sized>(x: &X) -> Vec<f64> {
    let (jn, cn, fps) = (x.joints(), x.channels(), x.fps());
    let v = x.values();
    let w = jn * cn;
    (0..x.frames().saturating_sub(1))
        .flat_map(|t| {
            (0..jn).map(move |j| {
                let a = &v[t * w + j * cn..t * w + (j + 1) * cn];
                let b = &v[(t + 1) * w + j * cn..(t + 1) * w + (j + 1) * cn];
                a.iter()
                    .zip(b)
                    .map(|(p, q)| (q - p) * (q - p))
                    .sum::<f64>()
                    .sqrt()
                    * fps
            })
        })
        .collect()
}

/// Largest per-joint rate of change, units per second.
pub fn max_rate<X: Tensor3 + ?Sized>(x: &X) -> Result<f64> {
    if x.frames() < 2 {
        return Err(Error::TooShort {
            needed: 2,
            got: x.frames(),
        });
    }
    Ok(rate_samples(x).into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainCorrelation {
    /// Mean Pearson correlation over joint pairs sharing a chain.
    pub intra: f64,
    /// Mean over pairs from different chains.
    pub inter: f64,
    pub intra_pairs: usize,
    pub inter_pairs: usize,
    /// Pairs skipped because one trace is constant.
    pub excluded_pairs: usize,
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

/// Mean Pearson correlation of per-joint traces (channels concatenated)
/// within and across chains.
pub fn chain_correlation<X: Tensor3 + ?Sized>(
    x: &X,
    sk: &SkeletonConfig,
) -> Result<ChainCorrelation> {
    let jn = x.joints();
    if jn != sk.joint_count() {
        return Err(Error::ShapeMismatch(format!(
            "input has {jn} joints, skeleton has {}",
            sk.joint_count()
        )));
    }
    let cn = x.channels();
    let per_joint: Vec<Vec<f64>> = (0..jn)
        .map(|j| {
            (0..cn)
                .flat_map(|c| (0..x.frames()).map(move |t| (t, c)))
                .map(|(t, c)| x.at(t, j, c))
                .collect()
        })
        .collect();
    let pairs: Vec<(usize, usize)> = (0..jn)
        .flat_map(|a| (a + 1..jn).map(move |b| (a, b)))
        .collect();
    let results: Vec<(bool, Option<f64>)> = pairs
        .par_iter()
        .map(|&(a, b)| {
            (
                sk.chain_of(a) == sk.chain_of(b),
                pearson(&per_joint[a], &per_joint[b]),
            )
        })
        .collect();
    let mut out = ChainCorrelation {
        intra: 0.0,
        inter: 0.0,
        intra_pairs: 0,
        inter_pairs: 0,
        excluded_pairs: 0,
    };
    for (same, r) in results {
        match (same, r) {
            (_, None) => out.excluded_pairs += 1,
            (true, Some(r)) => {
                out.intra += r;
                out.intra_pairs += 1;
            }
            (false, Some(r)) => {
                out.inter += r;
                out.inter_pairs += 1;
            }
        }
    }
    out.intra = if out.intra_pairs > 0 {
        out.intra / out.intra_pairs as f64
    } else {
        f64::NAN
    };
    out.inter = if out.inter_pairs > 0 {
        out.inter / out.inter_pairs as f64
    } else {
        f64::NAN
    };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyEstimate {
    /// Differential entropy in nats; `-inf` when `degenerate`.
    pub nats: f64,
    /// All samples were equal, so no histogram range exists.
    pub degenerate: bool,
}

pub const MIN_ENTROPY_SAMPLES: usize = 1000;
pub const MIN_ENTROPY_BINS: usize = 8;
pub const DEFAULT_ENTROPY_BINS: usize = 64;

/// Plug-in histogram estimate of differential entropy: equal-width bins on
/// `[min, max]`, `-Σ p log p + log(width)`.
pub fn entropy_estimate(values: &[f64], bins: usize) -> Result<EntropyEstimate> {
    if values.len() < MIN_ENTROPY_SAMPLES {
        return Err(Error::TooShort {
            needed: MIN_ENTROPY_SAMPLES,
            got: values.len(),
        });
    }
    if bins < MIN_ENTROPY_BINS {
        return Err(Error::InvalidParam(format!(
            "need at least {MIN_ENTROPY_BINS} bins, got {bins}"
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("entropy samples"));
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| {
            (l.min(v), h.max(v))
        });
    if hi <= lo {
        return Ok(EntropyEstimate {
            nats: f64::NEG_INFINITY,
            degenerate: true,
        });
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &v in values {
        let k = (((v - lo) / width) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let n = values.len() as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    Ok(EntropyEstimate {
        nats: h + width.ln(),
        degenerate: false,
    })
}

/// Mean per-`(joint, channel)` entropy, pooling each channel's samples over
/// all sequences. Every sequence must share the joint and channel layout.
pub fn channel_entropy<X: Tensor3>(seqs: &[X], bins: usize) -> Result<f64> {
    let first = seqs
        .first()
        .ok_or_else(|| Error::InvalidParam("no sequences".into()))?;
    let (jn, cn) = (first.joints(), first.channels());
    if seqs.iter().any(|s| s.joints() != jn || s.channels() != cn) {
        return Err(Error::ShapeMismatch(
            "sequences differ in joint layout".into(),
        ));
    }
    let mut total = 0.0;
    for k in 0..jn * cn {
        let pooled: Vec<f64> = seqs
            .iter()
            .flat_map(|s| (0..s.frames()).map(move |t| s.at(t, k / cn, k % cn)))
            .collect();
        total += entropy_estimate(&pooled, bins)?.nats;
    }
    Ok(total / (jn * cn) as f64)
}

/// Thresholds applied by [`property_report`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropertyThresholds {
    /// Bound `M` on the per-joint rate, R6D units per second.
    pub max_rate: f64,
    /// Low-frequency cutoff, Hz.
    pub f_c: f64,
    /// Required share of power at or below `f_c`.
    pub alpha: f64,
    /// Accepted range of the spectral exponent `β`.
    pub beta_range: [f64; 2],
    /// Band over which `β` is fitted, Hz.
    pub slope_band: [f64; 2],
    /// Required gap between intra- and inter-chain mean correlation.
    pub corr_margin: f64,
    pub entropy_bins: usize,
}

impl Default for PropertyThresholds {
    fn default() -> Self {
        Self {
            max_rate: crate::io::default_rate_bound(),
            f_c: 5.0,
            alpha: 0.7,
            beta_range: [1.5, 2.5],
            slope_band: [0.5, 5.0],
            corr_margin: 0.2,
            entropy_bins: DEFAULT_ENTROPY_BINS,
        }
    }
}

impl PropertyThresholds {
    pub fn validate(&self, fps: f64) -> Result<()> {
        if !(self.f_c > 0.0 && self.f_c < fps / 2.0) {
            return Err(Error::InvalidParam(format!(
                "f_c = {} must lie below Nyquist {}",
                self.f_c,
                fps / 2.0
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.max_rate >= 0.0) {
            return Err(Error::InvalidParam("max_rate must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Undefined(String),
}

impl Verdict {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self, Verdict::Pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyReport {
    pub thresholds: PropertyThresholds,
    pub frames: usize,
    pub joints: usize,
    pub fps: f64,
    pub max_rate: Option<f64>,
    pub temporal_smoothness: Verdict,
    pub intra_chain_corr: Option<f64>,
    pub inter_chain_corr: Option<f64>,
    pub joint_correlation: Verdict,
    pub low_freq_ratio: Option<f64>,
    pub low_freq_dominance: Verdict,
    pub spectral_beta: Option<f64>,
    pub spectral_slope: Verdict,
    pub entropy_nats: Option<f64>,
}

impl PropertyReport {
    pub fn all_pass(&self) -> bool {
        [
            &self.temporal_smoothness,
            &self.joint_correlation,
            &self.low_freq_dominance,
            &self.spectral_slope,
        ]
        .iter()
        .all(|v| v.is_pass())
    }

    /// Flat `key,value` rows.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        let verdict = |v: &Verdict| match v {
            Verdict::Pass => "pass".to_string(),
            Verdict::Fail => "fail".to_string(),
            Verdict::Undefined(r) => format!("undefined: {}", r.replace(',', ";")),
        };
        let th = &self.thresholds;
        let rows = [
            ("frames", self.frames.to_string()),
            ("joints", self.joints.to_string()),
            ("fps", self.fps.to_string()),
            ("threshold_max_rate", th.max_rate.to_string()),
            ("threshold_f_c", th.f_c.to_string()),
            ("threshold_alpha", th.alpha.to_string()),
            ("threshold_beta_low", th.beta_range[0].to_string()),
            ("threshold_beta_high", th.beta_range[1].to_string()),
            ("threshold_slope_band_low", th.slope_band[0].to_string()),
            ("threshold_slope_band_high", th.slope_band[1].to_string()),
            ("threshold_corr_margin", th.corr_margin.to_string()),
            ("threshold_entropy_bins", th.entropy_bins.to_string()),
            ("max_rate", opt(self.max_rate)),
            ("temporal_smoothness", verdict(&self.temporal_smoothness)),
            ("intra_chain_corr", opt(self.intra_chain_corr)),
            ("inter_chain_corr", opt(self.inter_chain_corr)),
            ("joint_correlation", verdict(&self.joint_correlation)),
            ("low_freq_ratio", opt(self.low_freq_ratio)),
            ("low_freq_dominance", verdict(&self.low_freq_dominance)),
            ("spectral_beta", opt(self.spectral_beta)),
            ("spectral_slope", verdict(&self.spectral_slope)),
            ("entropy_nats", opt(self.entropy_nats)),
        ];
        let mut out = String::from("key,value\n");
        for (k, v) in rows {
            out.push_str(k);
            out.push(',');
            out.push_str(&v);
            out.push('\n');
        }
        out
    }
}

/// Runs every property check. Sub-check failures that make a statistic
/// undefined (zero spectral power, constant traces) are recorded as
/// [`Verdict::Undefined`] rather than aborting the report.
pub fn property_report<X: Tensor3 + ?Sized>(
    x: &X,
    sk: &SkeletonConfig,
    th: &PropertyThresholds,
) -> Result<PropertyReport> {
    th.validate(x.fps())?;
    if x.joints() != sk.joint_count() {
        return Err(Error::ShapeMismatch(format!(
            "input has {} joints, skeleton has {}",
            x.joints(),
            sk.joint_count()
        )));
    }
    let rate = max_rate(x)?;
    let temporal_smoothness = Verdict::from_bool(rate <= th.max_rate);

    let corr = chain_correlation(x, sk)?;
    let (intra, inter) = (corr.intra, corr.inter);
    let joint_correlation = if intra.is_nan() || inter.is_nan() {
        Verdict::Undefined("constant joint traces".into())
    } else {
        Verdict::from_bool(intra >= inter + th.corr_margin)
    };

    let spectrum = psd_of(x)?;
    let (ratio, low_freq_dominance) = match low_freq_ratio(&spectrum, th.f_c) {
        Ok(r) => (Some(r), Verdict::from_bool(r >= th.alpha)),
        Err(e @ Error::UndefinedRatio) => (None, Verdict::Undefined(e.to_string())),
        Err(e) => return Err(e),
    };
    let (beta, spectral_slope_verdict) =
        match spectral_slope(&spectrum, th.slope_band[0], th.slope_band[1]) {
            Ok(b) => (
                Some(b),
                Verdict::from_bool(b >= th.beta_range[0] && b <= th.beta_range[1]),
            ),
            Err(e) => (None, Verdict::Undefined(e.to_string())),
        };

    let entropy = if x.values().len() >= MIN_ENTROPY_SAMPLES {
        entropy_estimate(x.values(), th.entropy_bins)
            .ok()
            .filter(|e| !e.degenerate)
            .map(|e| e.nats)
    } else {
        None
    };

    Ok(PropertyReport {
        thresholds: *th,
        frames: x.frames(),
        joints: x.joints(),
        fps: x.fps(),
        max_rate: Some(rate),
        temporal_smoothness,
        intra_chain_corr: (!intra.is_nan()).then_some(intra),
        inter_chain_corr: (!inter.is_nan()).then_some(inter),
        joint_correlation,
        low_freq_ratio: ratio,
        low_freq_dominance,
        spectral_beta: beta,
        spectral_slope: spectral_slope_verdict,
        entropy_nats: entropy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Uniform};
    use std::f64::consts::{PI, TAU};

    fn sine(freq: f64, fps: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|t| (TAU * freq * t as f64 / fps).sin())
            .collect()
    }

    fn direct_dft_power(x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let ang = -2.0 * PI * (k * t % n) as f64 / n as f64;
                    re += v * ang.cos();
                    im += v * ang.sin();
                }
                re * re + im * im
            })
            .collect()
    }

    #[test]
    fn constant_signal_is_dc_only() {
        let p = psd(&[vec![0.5; 64]], 60.0).unwrap();
        assert!((p.power[0][0] - (0.5f64 * 64.0).powi(2)).abs() < 1e-9);
        assert!(p.power[0][1..].iter().all(|&v| v < 1e-20));
        assert!(matches!(
            low_freq_ratio(&p, 5.0),
            Err(Error::UndefinedRatio)
        ));
    }

    #[test]
    fn sinusoid_peaks_at_its_frequency() {
        let p = psd(&[sine(3.0, 60.0, 600)], 60.0).unwrap();
        let peak = (0..p.freqs.len())
            .max_by(|&a, &b| p.power[0][a].total_cmp(&p.power[0][b]))
            .unwrap();
        assert!((p.freqs[peak] - 3.0).abs() < 1e-12);
        assert!(low_freq_ratio(&p, 5.0).unwrap() >= 0.99);
        let hi = psd(&[sine(20.0, 60.0, 600)], 60.0).unwrap();
        assert!(low_freq_ratio(&hi, 5.0).unwrap() <= 0.01);
    }

    #[test]
    fn matches_direct_dft_and_parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let normal = Normal::new(0.0, 1.0).unwrap();
        for n in [512usize, 101] {
            let x: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
            let p = psd(std::slice::from_ref(&x), 60.0).unwrap();
            let full = direct_dft_power(&x);
            for (k, &pk) in p.power[0].iter().enumerate() {
                let expect = if k == 0 || (n % 2 == 0 && k == n / 2) {
                    full[k]
                } else {
                    full[k] + full[n - k]
                };
                assert!((pk - expect).abs() <= 1e-9 * expect.max(1.0), "k={k}");
            }
            let energy: f64 = x.iter().map(|v| v * v).sum();
            let total: f64 = p.power[0].iter().sum();
            assert!((total - n as f64 * energy).abs() < 1e-9 * total);
        }
    }

    #[test]
    fn ratio_is_monotone_in_cutoff() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u = Uniform::new(-1.0, 1.0).unwrap();
        let x: Vec<f64> = (0..300).map(|_| u.sample(&mut rng)).collect();
        let p = psd(&[x], 60.0).unwrap();
        let mut prev = 0.0;
        for fc in [1.0, 2.0, 5.0, 10.0, 20.0, 30.0] {
            let r = low_freq_ratio(&p, fc).unwrap();
            assert!(r >= prev);
            prev = r;
        }
        assert!((prev - 1.0).abs() < 1e-12);
        assert!(low_freq_ratio(&p, 31.0).is_err());
        assert!(low_freq_ratio(&p, 0.0).is_err());
    }

    #[test]
    fn short_or_ragged_input_is_rejected() {
        assert!(matches!(
            psd(&[vec![0.0; 7]], 60.0),
            Err(Error::TooShort { .. })
        ));
        assert!(psd(&[vec![0.0; 8], vec![0.0; 9]], 60.0).is_err());
        assert!(psd(&[vec![f64::NAN; 8]], 60.0).is_err());
    }

    #[test]
    fn slope_recovers_power_law() {
        let fps = 60.0;
        let n = 600;
        let freqs: Vec<f64> = (0..=n / 2).map(|k| k as f64 * fps / n as f64).collect();
        let make = |beta: f64| PsdResult {
            power: vec![freqs
                .iter()
                .map(|&f| if f > 0.0 { f.powf(-beta) } else { 1.0 })
                .collect()],
            freqs: freqs.clone(),
            fps,
        };
        assert!((spectral_slope(&make(2.0), 0.5, 5.0).unwrap() - 2.0).abs() < 1e-9);
        assert!(spectral_slope(&make(0.0), 0.5, 5.0).unwrap().abs() < 1e-9);
        // 0.5 Hz to 0.7 Hz covers only three bins at 0.1 Hz spacing.
        assert!(matches!(
            spectral_slope(&make(2.0), 0.5, 0.7),
            Err(Error::InsufficientBins { needed: 5, got: 3 })
        ));
        assert!(spectral_slope(&make(2.0), 5.0, 0.5).is_err());
    }

    fn motion_from_fn(frames: usize, f: impl Fn(usize, usize, usize) -> f64) -> MotionSequence {
        let mut data = Vec::with_capacity(frames * 24 * 6);
        for t in 0..frames {
            for j in 0..24 {
                for c in 0..6 {
                    data.push(f(t, j, c));
                }
            }
        }
        MotionSequence::new(data, frames, 24, 60.0).unwrap()
    }

    #[test]
    fn rate_of_constant_and_step() {
        let flat = MotionSequence::t_pose(10, 24, 60.0).unwrap();
        assert_eq!(max_rate(&flat).unwrap(), 0.0);
        let step = motion_from_fn(
            10,
            |t, j, c| if t >= 5 && j == 3 && c == 2 { 0.1 } else { 0.0 },
        );
        assert!((max_rate(&step).unwrap() - 6.0).abs() < 1e-12);
        let one = MotionSequence::t_pose(1, 24, 60.0).unwrap();
        assert!(max_rate(&one).is_err());
    }

    #[test]
    fn chain_correlation_extremes() {
        let sk = SkeletonConfig::smpl();
        // Every joint in a chain carries the same trace; chains differ.
        let shared = motion_from_fn(200, |t, j, c| {
            let k = sk.chain_of(j).index() as f64 + 1.0;
            (0.05 * k * t as f64 + c as f64).sin() * k
        });
        let cc = chain_correlation(&shared, &sk).unwrap();
        assert_eq!(cc.intra, 1.0);
        assert_eq!(cc.intra_pairs + cc.inter_pairs, 24 * 23 / 2);

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let data: Vec<f64> = (0..6000 * 24 * 6)
            .map(|_| normal.sample(&mut rng))
            .collect();
        let iid = MotionSequence::new(data, 6000, 24, 60.0).unwrap();
        let cc = chain_correlation(&iid, &sk).unwrap();
        assert!(cc.intra.abs() <= 0.05 && cc.inter.abs() <= 0.05, "{cc:?}");
    }

    #[test]
    fn constant_traces_are_excluded() {
        let sk = SkeletonConfig::smpl();
        let flat = MotionSequence::new(vec![0.0; 20 * 24 * 6], 20, 24, 60.0).unwrap();
        let cc = chain_correlation(&flat, &sk).unwrap();
        assert!(cc.intra.is_nan() && cc.inter.is_nan());
        assert_eq!(cc.excluded_pairs, 24 * 23 / 2);
    }

    #[test]
    fn entropy_of_reference_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let u = Uniform::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..200_000).map(|_| u.sample(&mut rng)).collect();
        let h = entropy_estimate(&xs, 64).unwrap();
        assert!(h.nats.abs() < 0.02, "{h:?}");

        let normal = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..200_000).map(|_| normal.sample(&mut rng)).collect();
        let h = entropy_estimate(&xs, 64).unwrap().nats;
        let exact = 0.5 * (TAU * std::f64::consts::E).ln();
        assert!((h - exact).abs() < 0.05, "{h} vs {exact}");

        let shifted: Vec<f64> = xs.iter().map(|v| v + 3.0).collect();
        assert!((entropy_estimate(&shifted, 64).unwrap().nats - h).abs() < 1e-9);
    }

    #[test]
    fn entropy_edge_cases() {
        let same = vec![1.5; 2000];
        let h = entropy_estimate(&same, 64).unwrap();
        assert!(h.degenerate && h.nats == f64::NEG_INFINITY);
        assert!(matches!(
            entropy_estimate(&same[..999], 64),
            Err(Error::TooShort { .. })
        ));
        assert!(entropy_estimate(&same, 4).is_err());
    }

    #[test]
    fn report_on_constant_and_white_inputs() {
        let sk = SkeletonConfig::smpl();
        let th = PropertyThresholds {
            max_rate: 10.0,
            ..PropertyThresholds::default()
        };
        let flat = MotionSequence::t_pose(120, 24, 60.0).unwrap();
        let r = property_report(&flat, &sk, &th).unwrap();
        assert_eq!(r.temporal_smoothness, Verdict::Pass);
        assert!(matches!(r.low_freq_dominance, Verdict::Undefined(_)));
        // Identical joints correlate perfectly inside and across chains.
        assert_eq!(r.joint_correlation, Verdict::Fail);
        assert!(!r.all_pass());

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let normal = Normal::new(0.0, 0.07).unwrap();
        let data: Vec<f64> = (0..600 * 24 * 6).map(|_| normal.sample(&mut rng)).collect();
        let white = MotionSequence::new(data, 600, 24, 60.0).unwrap();
        let r = property_report(&white, &sk, &th).unwrap();
        assert_eq!(r.low_freq_dominance, Verdict::Fail);
        let ratio = r.low_freq_ratio.unwrap();
        assert!((ratio - 1.0 / 6.0).abs() < 0.03, "{ratio}");
        assert!(r.to_csv().lines().any(|l| l == "low_freq_dominance,fail"));
    }

    #[test]
    fn thresholds_reject_cutoff_above_nyquist() {
        let th = PropertyThresholds {
            f_c: 40.0,
            ..PropertyThresholds::default()
        };
        assert!(th.validate(60.0).is_err());
        assert!(PropertyThresholds::default().validate(60.0).is_ok());
    }
}
