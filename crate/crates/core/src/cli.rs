//! Command-line front end. Every subcommand is deterministic given its
//! flags and `--seed`.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{property_report, psd_of, PropertyThresholds, Tensor3, DEFAULT_ENTROPY_BINS};
use crate::io::{self, Dtype, FileKind};
use crate::metrics;
use crate::noise::{
    amplitude_bound, geometric_sum, gradient_bound, interjoint_bound, sk_perlin, NoiseField,
    PerlinParams,
};
use crate::skeleton::{load_skeleton, SkeletonConfig};
use crate::smoothing::{self, Smoothing, SmoothingStrategy};

/// Environment variable naming the default skeleton file.
pub const SKELETON_ENV: &str = "MLSMOOTH_SKELETON";

#[derive(Debug, Parser)]
#[command(
    name = "mlsmooth",
    version,
    about = "Skeleton-based Perlin noise motion label smoothing"
)]
pub struct Cli {
    /// Worker threads (outputs do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a noise field file.
    GenNoise(GenNoiseArgs),
    /// Smooth a motion file with one of the label smoothing strategies.
    Smooth(SmoothArgs),
    /// Property report, PSD and terrain CSVs for a motion or noise file.
    Analyze(AnalyzeArgs),
    /// SIP, angular and positional error between two motion files.
    Metrics(MetricsArgs),
    /// Print the analytic slope, amplitude and inter-joint bounds.
    Bounds(BoundsArgs),
    /// Generate a band-limited synthetic motion file.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SkeletonArg {
    /// Skeleton TOML file; defaults to the bundled SMPL skeleton.
    #[arg(long, env = SKELETON_ENV)]
    pub skeleton: Option<PathBuf>,
}

impl SkeletonArg {
    fn load(&self) -> Result<SkeletonConfig> {
        match &self.skeleton {
            Some(p) => {
                load_skeleton(p).with_context(|| format!("loading skeleton {}", p.display()))
            }
            None => Ok(SkeletonConfig::smpl()),
        }
    }
}

/// Noise parameters. Precedence: flags, then `--config`, then defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ParamArgs {
    /// TOML file with any of the PerlinParams fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub base_scale: Option<f64>,
    /// Base lattice frequency along time, cycles per second.
    #[arg(long)]
    pub time_scale: Option<f64>,
    #[arg(long)]
    pub space_scale: Option<f64>,
    #[arg(long)]
    pub persistence: Option<f64>,
    #[arg(long)]
    pub octaves: Option<u32>,
    #[arg(long)]
    pub lacunarity: Option<f64>,
    #[arg(long)]
    pub offset_weight: Option<f64>,
}

impl ParamArgs {
    pub fn resolve(&self, seed: u64) -> Result<PerlinParams> {
        let mut pp = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str::<PerlinParams>(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
            None => PerlinParams::default(),
        };
        macro_rules! apply {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { pp.$f = v; } )* };
        }
        apply!(
            base_scale,
            time_scale,
            space_scale,
            persistence,
            octaves,
            lacunarity,
            offset_weight
        );
        pp.seed = seed;
        pp.validate()?;
        Ok(pp)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Bin,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

impl From<Precision> for Dtype {
    fn from(p: Precision) -> Self {
        match p {
            Precision::F32 => Dtype::F32,
            Precision::F64 => Dtype::F64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    SkPerlin,
    Gaussian,
    Uniform,
}

#[derive(Debug, Args)]
pub struct GenNoiseArgs {
    #[arg(long, default_value_t = 3600)]
    pub frames: usize,
    #[arg(long, default_value_t = 60.0)]
    pub fps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = NoiseKind::SkPerlin)]
    pub strategy: NoiseKind,
    /// Standard deviation of the Gaussian baseline.
    #[arg(long, default_value_t = 0.07)]
    pub sigma: f64,
    /// Uniform baseline support.
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    pub low: f64,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub high: f64,
    /// Joint count for the i.i.d. baselines; defaults to the skeleton's.
    #[arg(long)]
    pub joints: Option<usize>,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub skeleton: SkeletonArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Bin)]
    pub format: Format,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StrategyKind {
    SkPerlin,
    Gaussian,
    Uniform,
    TPose,
    DatasetMean,
    Temporal,
}

#[derive(Debug, Args)]
pub struct SmoothArgs {
    /// Motion file (tensor format, or `.csv` fixture).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = StrategyKind::SkPerlin)]
    pub strategy: StrategyKind,
    #[arg(long, default_value_t = smoothing::DEFAULT_EPSILON)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.07)]
    pub sigma: f64,
    #[arg(long, default_value_t = -0.1, allow_hyphen_values = true)]
    pub low: f64,
    #[arg(long, default_value_t = 0.1, allow_hyphen_values = true)]
    pub high: f64,
    /// Temporal filter width in frames.
    #[arg(long, default_value_t = smoothing::DEFAULT_SIGMA_FRAMES)]
    pub sigma_t: f64,
    /// Motion files whose mean pose the dataset-mean strategy blends toward.
    #[arg(long, num_args = 1..)]
    pub mean_from: Vec<PathBuf>,
    /// Map smoothed 6-vectors back onto rotations.
    #[arg(long)]
    pub reproject: bool,
    /// Frame rate assumed for CSV inputs.
    #[arg(long, default_value_t = 60.0)]
    pub fps: f64,
    #[command(flatten)]
    pub params: ParamArgs,
    #[command(flatten)]
    pub skeleton: SkeletonArg,
    #[arg(long, value_enum, default_value_t = Format::Bin)]
    pub format: Format,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Motion or noise file (tensor format, or `.csv` motion fixture).
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory for report.json, report.csv, psd.csv, terrain.csv.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5.0)]
    pub fc: f64,
    #[arg(long, default_value_t = 0.7)]
    pub alpha: f64,
    /// Rate bound M (R6D units per second); defaults to the corpus-derived value.
    #[arg(long)]
    pub max_rate: Option<f64>,
    #[arg(long, default_value_t = 1.5)]
    pub beta_low: f64,
    #[arg(long, default_value_t = 2.5)]
    pub beta_high: f64,
    #[arg(long, default_value_t = 0.5)]
    pub band_low: f64,
    #[arg(long, default_value_t = 5.0)]
    pub band_high: f64,
    #[arg(long, default_value_t = 0.2)]
    pub corr_margin: f64,
    #[arg(long, default_value_t = DEFAULT_ENTROPY_BINS)]
    pub bins: usize,
    /// Channel plotted in terrain.csv.
    #[arg(long, default_value_t = 0)]
    pub channel: usize,
    /// Exit non-zero unless every property check passes.
    #[arg(long)]
    pub strict: bool,
    #[arg(long, default_value_t = 60.0)]
    pub fps: f64,
    #[command(flatten)]
    pub skeleton: SkeletonArg,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[command(flatten)]
    pub skeleton: SkeletonArg,
    /// Report file; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, default_value_t = 60.0)]
    pub fps: f64,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Slope constant of the base noise.
    #[arg(long, default_value_t = 1.0)]
    pub gmax: f64,
    /// Channels per joint vector.
    #[arg(long, default_value_t = 6)]
    pub dims: usize,
    /// Inter-joint distance, meters.
    #[arg(long, default_value_t = 0.3)]
    pub bone_length: f64,
    #[arg(long, default_value_t = 1.0)]
    pub spatial_freq: f64,
    #[arg(long, default_value_t = 2.5)]
    pub kg: f64,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = io::CORPUS_FRAMES)]
    pub frames: usize,
    #[arg(long, default_value_t = 60.0)]
    pub fps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = io::CORPUS_MAX_FREQ)]
    pub max_freq: f64,
    #[arg(long, default_value_t = io::CORPUS_AMP)]
    pub amp: f64,
    /// Joint count; defaults to the skeleton's.
    #[arg(long)]
    pub joints: Option<usize>,
    #[command(flatten)]
    pub skeleton: SkeletonArg,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Bin)]
    pub format: Format,
    #[arg(long, value_enum, default_value_t = Precision::F64)]
    pub precision: Precision,
}

/// Parses `args` and runs the selected subcommand.
pub fn run_from<I, T>(args: I) -> Result<ExitCode>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    run(Cli::try_parse_from(args)?)
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    pool.install(|| match cli.command {
        Command::GenNoise(a) => gen_noise(a),
        Command::Smooth(a) => smooth(a),
        Command::Analyze(a) => analyze(a),
        Command::Metrics(a) => metrics_cmd(a),
        Command::Bounds(a) => bounds(a),
        Command::Synth(a) => synth(a),
    })
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_field(
    path: &Path,
    field: &NoiseField,
    format: Format,
    precision: Precision,
) -> Result<()> {
    match format {
        Format::Bin => write_file(path, io::noise_bytes(field, precision.into())),
        Format::Csv => write_file(path, io::tensor_to_csv(field)),
        Format::Json => bail!("noise fields are written as bin or csv"),
    }
}

fn write_motion(
    path: &Path,
    seq: &crate::MotionSequence,
    format: Format,
    precision: Precision,
) -> Result<()> {
    match format {
        Format::Bin => Ok(io::write_motion_as(path, seq, precision.into(), None)?),
        Format::Csv => write_file(path, io::tensor_to_csv(seq)),
        Format::Json => bail!("motion files are written as bin or csv"),
    }
}

fn gen_noise(a: GenNoiseArgs) -> Result<ExitCode> {
    let sk = a.skeleton.load()?;
    let pp = a.params.resolve(a.seed)?;
    let joints = a.joints.unwrap_or(sk.joint_count());
    let field = match a.strategy {
        NoiseKind::SkPerlin => {
            if joints != sk.joint_count() {
                bail!(
                    "sk-perlin fields always have the skeleton's {} joints",
                    sk.joint_count()
                );
            }
            sk_perlin(&pp, &sk, a.frames, a.fps)?
        }
        NoiseKind::Gaussian => smoothing::make_baseline_field(
            &SmoothingStrategy::Gaussian { sigma: a.sigma },
            a.frames,
            joints,
            a.fps,
            a.seed,
        )?,
        NoiseKind::Uniform => smoothing::make_baseline_field(
            &SmoothingStrategy::Uniform {
                low: a.low,
                high: a.high,
            },
            a.frames,
            joints,
            a.fps,
            a.seed,
        )?,
    };
    write_field(&a.out, &field, a.format, a.precision)?;
    println!(
        "wrote {} ({}x{}x{})",
        a.out.display(),
        field.frames(),
        field.joints(),
        field.channels()
    );
    if a.strategy == NoiseKind::SkPerlin {
        println!("gradient_bound(G_max=1) = {}", gradient_bound(&pp, 1.0));
        println!("amplitude_bound(d=6) = {}", amplitude_bound(&pp, 6));
    }
    println!("max |value| = {}", field.max_abs());
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SmoothMeta<'a> {
    input: String,
    seed: u64,
    #[serde(flatten)]
    smoothing: &'a Smoothing,
}

fn smooth(a: SmoothArgs) -> Result<ExitCode> {
    let sk = a.skeleton.load()?;
    let seq = io::read_motion_any(&a.input, a.fps)
        .with_context(|| format!("reading {}", a.input.display()))?;
    if seq.joints() != sk.joint_count() {
        bail!(
            "motion has {} joints but the skeleton has {}",
            seq.joints(),
            sk.joint_count()
        );
    }
    let strategy = match a.strategy {
        StrategyKind::SkPerlin => SmoothingStrategy::SkPerlin(a.params.resolve(a.seed)?),
        StrategyKind::Gaussian => SmoothingStrategy::Gaussian { sigma: a.sigma },
        StrategyKind::Uniform => SmoothingStrategy::Uniform {
            low: a.low,
            high: a.high,
        },
        StrategyKind::TPose => SmoothingStrategy::TPose,
        StrategyKind::DatasetMean => {
            if a.mean_from.is_empty() {
                bail!("--strategy dataset-mean needs --mean-from <files>");
            }
            SmoothingStrategy::DatasetMean {
                pose: smoothing::dataset_mean_pose(&a.mean_from, a.fps)?,
            }
        }
        StrategyKind::Temporal => SmoothingStrategy::TemporalGaussian {
            sigma_frames: a.sigma_t,
        },
    };
    let sm = Smoothing {
        strategy,
        epsilon: a.epsilon,
        reproject: a.reproject,
    };
    let out = sm.apply(&seq, &sk, a.seed)?;
    write_motion(&a.out, &out, a.format, a.precision)?;
    let meta = SmoothMeta {
        input: a.input.display().to_string(),
        seed: a.seed,
        smoothing: &sm,
    };
    let meta_path = sidecar_path(&a.out);
    write_file(&meta_path, serde_json::to_string_pretty(&meta)? + "\n")?;
    println!("wrote {} and {}", a.out.display(), meta_path.display());
    Ok(ExitCode::SUCCESS)
}

/// `<out>.meta.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

enum Loaded {
    Motion(crate::MotionSequence),
    Noise(NoiseField),
}

fn load_any(path: &Path, csv_fps: f64) -> Result<Loaded> {
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"))
    {
        return Ok(Loaded::Motion(io::read_motion_csv(path, csv_fps)?));
    }
    let file = io::read_tensor(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(match file.header.kind {
        FileKind::Motion => Loaded::Motion(file.into_motion()?),
        FileKind::Noise => Loaded::Noise(file.into_noise()?),
    })
}

fn analyze(a: AnalyzeArgs) -> Result<ExitCode> {
    let sk = a.skeleton.load()?;
    let th = PropertyThresholds {
        max_rate: a.max_rate.unwrap_or_else(io::default_rate_bound),
        f_c: a.fc,
        alpha: a.alpha,
        beta_range: [a.beta_low, a.beta_high],
        slope_band: [a.band_low, a.band_high],
        corr_margin: a.corr_margin,
        entropy_bins: a.bins,
    };
    match load_any(&a.input, a.fps)? {
        Loaded::Motion(m) => analyze_tensor(&m, &sk, &th, &a),
        Loaded::Noise(n) => analyze_tensor(&n, &sk, &th, &a),
    }
}

fn analyze_tensor<X: Tensor3>(
    x: &X,
    sk: &SkeletonConfig,
    th: &PropertyThresholds,
    a: &AnalyzeArgs,
) -> Result<ExitCode> {
    let report = property_report(x, sk, th)?;
    let spectrum = psd_of(x)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    write_file(
        &a.out.join("report.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    write_file(&a.out.join("report.csv"), report.to_csv())?;
    write_file(&a.out.join("psd.csv"), io::psd_csv(&spectrum))?;
    write_file(&a.out.join("terrain.csv"), io::terrain_csv(x, a.channel)?)?;

    let show = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"));
    println!(
        "max rate          {} (M = {})",
        show(report.max_rate),
        th.max_rate
    );
    println!(
        "chain correlation intra {} inter {}",
        show(report.intra_chain_corr),
        show(report.inter_chain_corr)
    );
    println!(
        "low-freq ratio    {} (f_c = {} Hz, alpha = {})",
        show(report.low_freq_ratio),
        th.f_c,
        th.alpha
    );
    println!("spectral beta     {}", show(report.spectral_beta));
    println!("entropy           {} nats", show(report.entropy_nats));
    for (name, v) in [
        ("temporal smoothness", &report.temporal_smoothness),
        ("joint correlation", &report.joint_correlation),
        ("low-frequency dominance", &report.low_freq_dominance),
        ("spectral slope", &report.spectral_slope),
    ] {
        println!("{name:<24} {v:?}");
    }
    if a.strict && !report.all_pass() {
        eprintln!("strict mode: not every property check passed");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn metrics_cmd(a: MetricsArgs) -> Result<ExitCode> {
    let sk = a.skeleton.load()?;
    let pred = io::read_motion_any(&a.pred, a.fps)
        .with_context(|| format!("reading {}", a.pred.display()))?;
    let gt =
        io::read_motion_any(&a.gt, a.fps).with_context(|| format!("reading {}", a.gt.display()))?;
    let r = metrics::evaluate(&pred, &gt, &sk)?;
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&r)? + "\n",
        Format::Csv => r.to_csv(),
        Format::Bin => bail!("metrics are reported as json or csv"),
    };
    match &a.out {
        Some(p) => {
            write_file(p, &text)?;
            println!("{}", r.table_row());
        }
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
pub struct BoundTable {
    pub ratio: f64,
    pub geometric_sum: f64,
    pub gradient_bound: f64,
    pub amplitude_bound: f64,
    pub interjoint_bound: f64,
}

pub fn bound_table(pp: &PerlinParams, a: &BoundsArgs) -> Result<BoundTable> {
    let ratio = pp.persistence * pp.lacunarity;
    Ok(BoundTable {
        ratio,
        geometric_sum: geometric_sum(ratio, pp.octaves),
        gradient_bound: gradient_bound(pp, a.gmax),
        amplitude_bound: amplitude_bound(pp, a.dims),
        interjoint_bound: interjoint_bound(pp, a.bone_length, a.spatial_freq, a.kg)?,
    })
}

fn bounds(a: BoundsArgs) -> Result<ExitCode> {
    let pp = a.params.resolve(0)?;
    let t = bound_table(&pp, &a)?;
    let text = match a.format {
        Format::Json => serde_json::to_string_pretty(&t)? + "\n",
        Format::Csv | Format::Bin => format!(
            "quantity,value\nr,{}\nS(r;oct),{}\ngradient_bound,{}\namplitude_bound,{}\ninterjoint_bound,{}\n",
            t.ratio, t.geometric_sum, t.gradient_bound, t.amplitude_bound, t.interjoint_bound
        ),
    };
    match &a.out {
        Some(p) => write_file(p, &text)?,
        None => print!("{text}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn synth(a: SynthArgs) -> Result<ExitCode> {
    let joints = match a.joints {
        Some(j) => j,
        None => a.skeleton.load()?.joint_count(),
    };
    let seq = io::synth_motion(a.frames, joints, a.fps, a.seed, a.max_freq, a.amp)?;
    write_motion(&a.out, &seq, a.format, a.precision)?;
    println!(
        "wrote {} ({}x{})",
        a.out.display(),
        seq.frames(),
        seq.joints()
    );
    Ok(ExitCode::SUCCESS)
}
