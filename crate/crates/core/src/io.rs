//! Tensor files for motion sequences and noise fields, CSV import/export,
//! and the synthetic motion generator.
//!
//! # File layout
//!
//! A UTF-8 header of `key=value` lines, terminated by a line `end`,
//! followed immediately by the little-endian payload:
//!
//! ```text
//! MLSMOOTH
//! version=1
//! kind=motion            (or `noise`)
//! frames=<T>
//! joints=<J>
//! channels=<C>
//! fps=<Hz>
//! repr=r6d               (`noise` for noise fields)
//! dtype=f64              (or `f32`)
//! name=<text>            (optional)
//! source=<json>          (noise fields: generator, parameters and seed)
//! end
//! <T*J*C values, frame-major, t -> j -> c>
//! ```
//!
//! Numbers in the header use the shortest representation that parses back
//! to the same `f64`. With `dtype=f64` the round trip is bit-exact.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{rate_samples, PsdResult, Tensor3};
use crate::error::{Error, Result};
use crate::motion::{MotionSequence, R6D_CHANNELS};
use crate::noise::{FieldSource, NoiseField};
use crate::rotmath::{rotmat_to_r6d, RotationMatrix};

pub const MAGIC: &str = "MLSMOOTH";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dtype {
    F32,
    #[default]
    F64,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Dtype::F32 => "f32",
            Dtype::F64 => "f64",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Motion,
    Noise,
}

/// Parsed file header.
#[derive(Debug, Clone, PartialEq)]
pub struct Header {
    pub kind: FileKind,
    pub frames: usize,
    pub joints: usize,
    pub channels: usize,
    pub fps: f64,
    pub dtype: Dtype,
    pub name: Option<String>,
    pub source: Option<FieldSource>,
}

impl Header {
    fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC}");
        let _ = writeln!(s, "version={VERSION}");
        let (kind, repr) = match self.kind {
            FileKind::Motion => ("motion", "r6d"),
            FileKind::Noise => ("noise", "noise"),
        };
        let _ = writeln!(s, "kind={kind}");
        let _ = writeln!(s, "frames={}", self.frames);
        let _ = writeln!(s, "joints={}", self.joints);
        let _ = writeln!(s, "channels={}", self.channels);
        let _ = writeln!(s, "fps={}", self.fps);
        let _ = writeln!(s, "repr={repr}");
        let _ = writeln!(s, "dtype={}", self.dtype.as_str());
        if let Some(name) = &self.name {
            let _ = writeln!(s, "name={}", name.replace('\n', " "));
        }
        if let Some(src) = &self.source {
            let _ = writeln!(
                s,
                "source={}",
                serde_json::to_string(src).expect("source serializes")
            );
        }
        s.push_str("end\n");
        s
    }

    fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(MAGIC) {
            return Err(Error::Format("missing MLSMOOTH magic line".into()));
        }
        let mut kv = std::collections::HashMap::new();
        for line in lines {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("malformed header line `{line}`")))?;
            kv.insert(k, v);
        }
        let get = |k: &str| {
            kv.get(k)
                .copied()
                .ok_or_else(|| Error::Format(format!("header missing `{k}`")))
        };
        let num = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Format(format!("header `{k}` is not an integer")))
        };
        let version: u32 = get("version")?
            .parse()
            .map_err(|_| Error::Format("header `version` is not an integer".into()))?;
        if version != VERSION {
            return Err(Error::Version(version));
        }
        let kind = match get("kind")? {
            "motion" => FileKind::Motion,
            "noise" => FileKind::Noise,
            other => return Err(Error::Format(format!("unknown kind `{other}`"))),
        };
        let dtype = match get("dtype")? {
            "f32" => Dtype::F32,
            "f64" => Dtype::F64,
            other => return Err(Error::Format(format!("unknown dtype `{other}`"))),
        };
        let fps: f64 = get("fps")?
            .parse()
            .map_err(|_| Error::Format("header `fps` is not a number".into()))?;
        if !(fps.is_finite() && fps > 0.0) {
            return Err(Error::Format(format!("fps must be positive, got {fps}")));
        }
        let repr = get("repr")?;
        if kind == FileKind::Motion && repr != "r6d" {
            return Err(Error::Format(format!(
                "unsupported motion representation `{repr}`"
            )));
        }
        let source = match kv.get("source") {
            Some(s) => Some(
                serde_json::from_str(s)
                    .map_err(|e| Error::Format(format!("bad `source` header: {e}")))?,
            ),
            None => None,
        };
        Ok(Header {
            kind,
            frames: num("frames")?,
            joints: num("joints")?,
            channels: num("channels")?,
            fps,
            dtype,
            name: kv.get("name").map(|s| s.to_string()),
            source,
        })
    }
}

/// Header plus decoded payload.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorFile {
    pub header: Header,
    pub values: Vec<f64>,
}

pub fn encode(header: &Header, values: &[f64]) -> Vec<u8> {
    let mut out = header.render().into_bytes();
    out.reserve(values.len() * header.dtype.size());
    for &v in values {
        match header.dtype {
            Dtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<TensorFile> {
    const END: &[u8] = b"\nend\n";
    let split = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| Error::Format("header terminator `end` not found".into()))?;
    let header_text = std::str::from_utf8(&bytes[..split])
        .map_err(|_| Error::Format("header is not UTF-8".into()))?;
    let header = Header::parse(header_text)?;
    let payload = &bytes[split + END.len()..];
    let size = header.dtype.size();
    let frame_bytes = header.joints * header.channels * size;
    let expected = header.frames * frame_bytes;
    if payload.len() != expected {
        // A payload cut mid-frame is a truncation; a whole number of
        // frames that disagrees with the header is an inconsistency.
        let partial_frame = frame_bytes == 0 || !payload.len().is_multiple_of(frame_bytes);
        if payload.len() < expected && partial_frame {
            return Err(Error::Truncated {
                expected,
                got: payload.len(),
            });
        }
        return Err(Error::Inconsistent(format!(
            "header declares {} frames ({expected} bytes), payload holds {} bytes",
            header.frames,
            payload.len()
        )));
    }
    let values = match header.dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect(),
        Dtype::F64 => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    };
    Ok(TensorFile { header, values })
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<TensorFile> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}

pub fn motion_header(seq: &MotionSequence, dtype: Dtype, name: Option<String>) -> Header {
    Header {
        kind: FileKind::Motion,
        frames: seq.frames(),
        joints: seq.joints(),
        channels: R6D_CHANNELS,
        fps: seq.fps(),
        dtype,
        name,
        source: None,
    }
}

pub fn write_motion(path: impl AsRef<Path>, seq: &MotionSequence) -> Result<()> {
    write_motion_as(path, seq, Dtype::F64, None)
}

pub fn write_motion_as(
    path: impl AsRef<Path>,
    seq: &MotionSequence,
    dtype: Dtype,
    name: Option<String>,
) -> Result<()> {
    let header = motion_header(seq, dtype, name);
    write_bytes(path.as_ref(), &encode(&header, seq.data()))
}

impl TensorFile {
    pub fn into_motion(self) -> Result<MotionSequence> {
        if self.header.kind != FileKind::Motion {
            return Err(Error::Format(
                "expected a motion file, found a noise field".into(),
            ));
        }
        if self.header.channels != R6D_CHANNELS {
            return Err(Error::Inconsistent(format!(
                "motion files carry {R6D_CHANNELS} channels, header says {}",
                self.header.channels
            )));
        }
        MotionSequence::new(
            self.values,
            self.header.frames,
            self.header.joints,
            self.header.fps,
        )
    }

    pub fn into_noise(self) -> Result<NoiseField> {
        let h = self.header;
        let source = match (h.kind, h.source) {
            (FileKind::Noise, Some(s)) => s,
            (FileKind::Noise, None) => {
                return Err(Error::Format("noise file has no `source` header".into()))
            }
            (FileKind::Motion, _) => {
                return Err(Error::Format(
                    "expected a noise field, found a motion file".into(),
                ))
            }
        };
        NoiseField::new(self.values, h.frames, h.joints, h.channels, h.fps, source)
    }
}

pub fn read_motion(path: impl AsRef<Path>) -> Result<MotionSequence> {
    read_tensor(path)?.into_motion()
}

pub fn noise_bytes(field: &NoiseField, dtype: Dtype) -> Vec<u8> {
    let header = Header {
        kind: FileKind::Noise,
        frames: field.frames(),
        joints: field.joints(),
        channels: field.channels(),
        fps: field.fps(),
        dtype,
        name: None,
        source: Some(*field.source()),
    };
    encode(&header, field.values())
}

pub fn write_noise(path: impl AsRef<Path>, field: &NoiseField, dtype: Dtype) -> Result<()> {
    write_bytes(path.as_ref(), &noise_bytes(field, dtype))
}

pub fn read_noise(path: impl AsRef<Path>) -> Result<NoiseField> {
    read_tensor(path)?.into_noise()
}

/// Parses the CSV fixture format: one frame per line, `J * 6` numeric
/// columns. Blank lines and lines starting with `#` are skipped.
pub fn parse_motion_csv(text: &str, fps: f64) -> Result<MotionSequence> {
    let mut data = Vec::new();
    let mut width = None;
    let mut frames = 0;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|f| f.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Format(format!("line {}: {e}", lineno + 1)))?;
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::ShapeMismatch(format!(
                    "line {} has {} columns, expected {w}",
                    lineno + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        data.extend(row);
        frames += 1;
    }
    let width = width.ok_or_else(|| Error::Format("CSV has no frames".into()))?;
    if width % R6D_CHANNELS != 0 {
        return Err(Error::ShapeMismatch(format!(
            "{width} columns is not a multiple of {R6D_CHANNELS}"
        )));
    }
    MotionSequence::new(data, frames, width / R6D_CHANNELS, fps)
}

pub fn read_motion_csv(path: impl AsRef<Path>, fps: f64) -> Result<MotionSequence> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_motion_csv(&text, fps)
}

/// Reads a tensor file, or a CSV fixture when the extension is `.csv`.
pub fn read_motion_any(path: impl AsRef<Path>, csv_fps: f64) -> Result<MotionSequence> {
    let path = path.as_ref();
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        read_motion_csv(path, csv_fps)
    } else {
        read_motion(path)
    }
}

/// One frame per line, `J * C` columns.
pub fn tensor_to_csv<X: Tensor3 + ?Sized>(x: &X) -> String {
    let mut out = String::new();
    let w = x.joints() * x.channels();
    for row in x.values().chunks_exact(w) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Frame-by-joint grid of one channel, for terrain plots.
pub fn terrain_csv<X: Tensor3 + ?Sized>(x: &X, channel: usize) -> Result<String> {
    if channel >= x.channels() {
        return Err(Error::InvalidParam(format!(
            "channel {channel} out of range (have {})",
            x.channels()
        )));
    }
    let mut out = String::from("frame");
    for j in 0..x.joints() {
        let _ = write!(out, ",j{j}");
    }
    out.push('\n');
    for t in 0..x.frames() {
        let _ = write!(out, "{t}");
        for j in 0..x.joints() {
            let _ = write!(out, ",{}", x.at(t, j, channel));
        }
        out.push('\n');
    }
    Ok(out)
}

/// `freq` column followed by one power column per channel, plus the
/// channel mean.
pub fn psd_csv(p: &PsdResult) -> String {
    let mut out = String::from("freq_hz,mean");
    for c in 0..p.power.len() {
        let _ = write!(out, ",ch{c}");
    }
    out.push('\n');
    let mean = p.mean_power();
    for (k, f) in p.freqs.iter().enumerate() {
        let _ = write!(out, "{f},{}", mean[k]);
        for ch in &p.power {
            let _ = write!(out, ",{}", ch[k]);
        }
        out.push('\n');
    }
    out
}

const MAX_SINUSOIDS: usize = 4;

/// Band-limited synthetic motion. Each joint's rotation vector has three
/// components, each a sum of 1 to 4 sinusoids with frequencies in
/// `(0, max_freq]`, random phases and weights summing to `amp` radians.
pub fn synth_motion(
    frames: usize,
    joints: usize,
    fps: f64,
    seed: u64,
    max_freq: f64,
    amp: f64,
) -> Result<MotionSequence> {
    if !(fps.is_finite() && fps > 0.0) {
        return Err(Error::InvalidParam(format!(
            "fps must be positive, got {fps}"
        )));
    }
    if !(max_freq > 0.0 && max_freq < fps / 2.0) {
        return Err(Error::InvalidParam(format!(
            "max_freq must be in (0, {}), got {max_freq}",
            fps / 2.0
        )));
    }
    if !(0.0..=std::f64::consts::PI).contains(&amp) {
        return Err(Error::InvalidParam(format!(
            "amp must be in [0, pi], got {amp}"
        )));
    }
    if frames == 0 || joints == 0 {
        return Err(Error::InvalidParam(
            "frames and joints must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // (frequency Hz, phase, weight) per sinusoid, per axis, per joint.
    let mut waves: Vec<[Vec<(f64, f64, f64)>; 3]> = Vec::with_capacity(joints);
    for _ in 0..joints {
        let axis = || Vec::new();
        let mut per_joint = [axis(), axis(), axis()];
        for comp in per_joint.iter_mut() {
            let n = rng.random_range(1..=MAX_SINUSOIDS);
            let raw: Vec<(f64, f64, f64)> = (0..n)
                .map(|_| {
                    let f = max_freq * (1.0 - rng.random::<f64>());
                    let phase = rng.random::<f64>() * std::f64::consts::TAU;
                    let w = rng.random::<f64>() + 0.1;
                    (f, phase, w)
                })
                .collect();
            let total: f64 = raw.iter().map(|r| r.2).sum();
            *comp = raw
                .into_iter()
                .map(|(f, ph, w)| (f, ph, amp * w / total))
                .collect();
        }
        waves.push(per_joint);
    }
    let mut data = Vec::with_capacity(frames * joints * R6D_CHANNELS);
    for t in 0..frames {
        let time = t as f64 / fps;
        for joint in &waves {
            let rv = [0, 1, 2].map(|a| {
                joint[a]
                    .iter()
                    .map(|&(f, ph, w)| w * (std::f64::consts::TAU * f * time + ph).sin())
                    .sum::<f64>()
            });
            let r = RotationMatrix::from_rotation_vector(rv);
            data.extend_from_slice(&rotmat_to_r6d(&r)?.0);
        }
    }
    MotionSequence::new(data, frames, joints, fps)
}

/// Settings of the bundled synthetic corpus.
pub const CORPUS_SIZE: usize = 8;
pub const CORPUS_FRAMES: usize = 1200;
pub const CORPUS_FPS: f64 = 60.0;
pub const CORPUS_MAX_FREQ: f64 = 2.0;
pub const CORPUS_AMP: f64 = 0.5;

/// Deterministic corpus of SMPL-sized synthetic sequences (seeds `0..8`).
pub fn synthetic_corpus() -> Vec<MotionSequence> {
    (0..CORPUS_SIZE as u64)
        .map(|seed| {
            synth_motion(
                CORPUS_FRAMES,
                24,
                CORPUS_FPS,
                seed,
                CORPUS_MAX_FREQ,
                CORPUS_AMP,
            )
            .expect("corpus settings are valid")
        })
        .collect()
}

/// Default temporal-smoothness bound `M`: 1.5 times the 99.9th percentile
/// of per-joint rates over the synthetic corpus.
pub fn default_rate_bound() -> f64 {
    static BOUND: OnceLock<f64> = OnceLock::new();
    *BOUND.get_or_init(|| {
        let mut rates: Vec<f64> = synthetic_corpus().iter().flat_map(rate_samples).collect();
        rates.sort_by(f64::total_cmp);
        let idx = ((rates.len() as f64 - 1.0) * 0.999).round() as usize;
        1.5 * rates[idx]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{low_freq_ratio, psd_of};
    use crate::noise::PerlinParams;
    use crate::skeleton::SkeletonConfig;

    fn sample() -> MotionSequence {
        synth_motion(16, 24, 30.0, 4, 2.0, 0.5).unwrap()
    }

    #[test]
    fn motion_round_trip_is_bit_identical() {
        let m = sample();
        let bytes = encode(
            &motion_header(&m, Dtype::F64, Some("walk".into())),
            m.values(),
        );
        let f = decode(&bytes).unwrap();
        assert_eq!(f.header.name.as_deref(), Some("walk"));
        let back = f.into_motion().unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn noise_round_trip_keeps_source() {
        let sk = SkeletonConfig::smpl();
        let field =
            crate::noise::sk_perlin(&PerlinParams::default().with_seed(3), &sk, 20, 60.0).unwrap();
        let back = decode(&noise_bytes(&field, Dtype::F64))
            .unwrap()
            .into_noise()
            .unwrap();
        assert_eq!(back.values(), field.values());
        assert_eq!(back.source(), field.source());
        assert!(decode(&noise_bytes(&field, Dtype::F64))
            .unwrap()
            .into_motion()
            .is_err());
    }

    #[test]
    fn f32_payload_rounds_each_value() {
        let m = sample();
        let back = decode(&encode(&motion_header(&m, Dtype::F32, None), m.values())).unwrap();
        assert_eq!(back.header.dtype, Dtype::F32);
        for (a, b) in back.values.iter().zip(m.values()) {
            assert_eq!(*a, f64::from(*b as f32));
        }
    }

    #[test]
    fn short_payloads_are_reported() {
        let m = sample();
        let bytes = encode(&motion_header(&m, Dtype::F64, None), m.values());
        assert!(matches!(
            decode(&bytes[..bytes.len() - 3]),
            Err(Error::Truncated { .. })
        ));
        let frame = 24 * 6 * 8;
        assert!(matches!(
            decode(&bytes[..bytes.len() - frame]),
            Err(Error::Inconsistent(_))
        ));
        let mut long = bytes.clone();
        long.extend_from_slice(&[0u8; 8]);
        assert!(matches!(decode(&long), Err(Error::Inconsistent(_))));
    }

    #[test]
    fn header_errors() {
        let m = sample();
        let bytes = encode(&motion_header(&m, Dtype::F64, None), m.values());
        let text = String::from_utf8_lossy(&bytes).into_owned();
        let bumped = text.replacen("version=1", "version=2", 1);
        assert!(matches!(decode(bumped.as_bytes()), Err(Error::Version(2))));
        assert!(matches!(decode(b"NOTMAGIC\nend\n"), Err(Error::Format(_))));
        assert!(matches!(
            decode(b"MLSMOOTH\nversion=1"),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn synth_is_deterministic_and_band_limited() {
        assert_eq!(sample(), sample());
        assert_ne!(sample(), synth_motion(16, 24, 30.0, 5, 2.0, 0.5).unwrap());
        let still = synth_motion(10, 24, 60.0, 1, 2.0, 0.0).unwrap();
        assert_eq!(still, MotionSequence::t_pose(10, 24, 60.0).unwrap());
        let m = synth_motion(1200, 24, 60.0, 0, 2.0, 0.5).unwrap();
        assert!(low_freq_ratio(&psd_of(&m).unwrap(), 5.0).unwrap() >= 0.99);
        assert!(synth_motion(10, 24, 60.0, 0, 30.0, 0.5).is_err());
    }

    #[test]
    fn csv_parsing() {
        let m = sample();
        let text = format!("# header comment\n\n{}", tensor_to_csv(&m));
        let back = parse_motion_csv(&text, 30.0).unwrap();
        assert_eq!(back, m);
        assert!(matches!(
            parse_motion_csv("1,0,0,0,1,0\n1,0\n", 30.0),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            parse_motion_csv("1,0,0,0,1\n", 30.0),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(matches!(
            parse_motion_csv("1,x,0,0,1,0\n", 30.0),
            Err(Error::Format(_))
        ));
        assert!(parse_motion_csv("# nothing\n", 30.0).is_err());
    }

    #[test]
    fn default_rate_bound_covers_the_corpus() {
        let m = default_rate_bound();
        assert!(m.is_finite() && m > 0.0);
        for seq in synthetic_corpus() {
            assert!(crate::analysis::max_rate(&seq).unwrap() <= m);
        }
    }
}
