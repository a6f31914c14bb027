//! `hdradar`: simulate, process, train and evaluate from the command line.
//!
//! Exit codes: 0 success, 2 validation error, 3 I/O error, 4 numerical failure.
//! Failures print a single `hdradar: error[<kind>]: <message>` line on stderr.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hdradar::ablation::{ablate, write_ablation_csv};
use hdradar::complexity::{pipeline_reports, render_table};
use hdradar::dataset::{load_dataset, write_dataset};
use hdradar::dsp::{build_ra_map, extract_point_cloud, range_doppler_transform, write_point_cloud_csv, CalibrationMatrix, CfarParams, RdTensor, WindowKind};
use hdradar::format::{write_atomic, TensorData, TensorFile};
use hdradar::metrics::{evaluate_model, write_detections_csv, EvalParams};
use hdradar::mimo::{atrous_equivalence_weights, deinterleave, rd_to_channels};
use hdradar::nn::{load_checkpoint, save_checkpoint, train_model, Mode, ModelSpec, Module, Sample, SceneSampler, TrainConfig, Trainer};
use hdradar::sim::{synthesize_adc, AdcFrame, Scene};
use hdradar::{Error, ErrorKind, Preset, RadarConfig, Result, ValidatedConfig};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

const SEED_ENV: &str = "RDNET_SEED";

#[derive(Parser)]
#[command(name = "hdradar", version, about = "HD MIMO radar simulation, processing and range-Doppler detection")]
struct Cli {
    /// Worker threads. Processing is currently single-threaded; values above
    /// one are accepted and have no effect.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Radar configuration JSON.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Built-in configuration: toy or paper.
    #[arg(long, default_value = "toy")]
    preset: String,
}

impl ConfigArgs {
    fn load(&self) -> Result<ValidatedConfig> {
        match &self.config {
            Some(p) => RadarConfig::from_json_file(p)?.validate(),
            None => RadarConfig::preset(self.preset.parse::<Preset>()?).validate(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize one raw ADC frame from a scene description.
    Simulate {
        #[arg(long)]
        scene: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Range-Doppler transform, optionally with point cloud and RA map.
    Dsp {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "hann")]
        window: String,
        #[arg(long)]
        out: PathBuf,
        /// Write a CFAR point cloud as CSV.
        #[arg(long)]
        pointcloud: Option<PathBuf>,
        /// Write a (b_r, b_a) range-azimuth power map.
        #[arg(long)]
        ra: Option<PathBuf>,
    },
    /// Gather Tx replicas into aligned channels.
    Deinterleave {
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Also run the equivalent dilated convolution and compare.
        #[arg(long)]
        check_conv: bool,
    },
    /// Write a synthetic dataset of random single/two-target frames.
    Dataset {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value_t = 100)]
        frames: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Scene sampler JSON; defaults apply to omitted fields.
        #[arg(long)]
        sampler: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a dataset directory and write a checkpoint.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Model spec JSON (default: the toy spec).
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        train_config: Option<PathBuf>,
        /// Overrides the epoch count of the training config.
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on a dataset directory.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        detections: Option<PathBuf>,
        /// Detection score cut (default: the focal-loss break-even score).
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// FLOP and memory accounting of the processing pipelines.
    Flops {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Azimuth bins of the explicit AoA stages (default: the config's).
        #[arg(long)]
        b_a: Option<usize>,
        /// Elevation bins of the explicit AoA stages (default: the config's).
        #[arg(long)]
        b_e: Option<usize>,
        /// Model spec JSON to include the network cost.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also write the report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Sweep the number of pre-encoder output channels.
    Ablate {
        #[arg(long, value_delimiter = ',', default_value = "24,48,96,192,384")]
        channels: Vec<usize>,
        #[arg(long)]
        dataset: PathBuf,
        /// Held-out dataset for scoring (default: the training dataset).
        #[arg(long)]
        eval_dataset: Option<PathBuf>,
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        train_config: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        epochs: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn seed_override() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| Error::InvalidConfig(format!("{SEED_ENV} must be an unsigned integer, got `{v}`"))),
        Err(_) => Ok(None),
    }
}

fn read_rd(path: &Path, cfg: &ValidatedConfig) -> Result<RdTensor> {
    RdTensor::from_tensor_file(&TensorFile::read(path)?, cfg)
}

fn load_spec(path: Option<&Path>) -> Result<ModelSpec> {
    path.map_or_else(|| Ok(ModelSpec::toy()), ModelSpec::from_json_file)
}

fn load_train_config(path: Option<&Path>) -> Result<TrainConfig> {
    path.map_or_else(|| Ok(TrainConfig::default()), TrainConfig::from_json_file)
}

fn train(spec: &ModelSpec, cfg: &ValidatedConfig, tc: TrainConfig, data: &[Sample]) -> Result<Trainer<f32>> {
    train_model(spec, cfg, tc, data, |epoch, l| {
        eprintln!("epoch {epoch}: l_det {:.4} l_free {:.4} l_mtl {:.4}", l.l_det, l.l_free, l.l_mtl)
    })
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(Error::InvalidConfig("--threads must be at least 1".into()));
    }
    match cli.command {
        Command::Simulate { scene, cfg, out } => {
            let cfg = cfg.load()?;
            let mut scene = Scene::from_json_file(scene)?;
            if let Some(seed) = seed_override()? {
                scene.seed = seed;
            }
            synthesize_adc(&scene, &cfg)?.to_tensor_file().write(out)?;
        }
        Command::Dsp { input, cfg, window, out, pointcloud, ra } => {
            let cfg = cfg.load()?;
            let frame = AdcFrame::from_tensor_file(&TensorFile::read(input)?, &cfg)?;
            let rd = range_doppler_transform(&frame, window.parse::<WindowKind>()?)?;
            rd.to_tensor_file().write(out)?;
            if pointcloud.is_some() || ra.is_some() {
                let calib = CalibrationMatrix::new(&cfg);
                if let Some(path) = pointcloud {
                    write_point_cloud_csv(path, &extract_point_cloud(&rd, &calib, &CfarParams::default())?)?;
                }
                if let Some(path) = ra {
                    let map = build_ra_map(&rd, &calib)?;
                    TensorFile::new(vec![cfg.b_r, cfg.b_a], TensorData::F64(map))?.write(path)?;
                }
            }
        }
        Command::Deinterleave { input, cfg, out, check_conv } => {
            let cfg = cfg.load()?;
            let rd = read_rd(&input, &cfg)?;
            let din = deinterleave(&rd)?;
            din.to_tensor_file().write(out)?;
            if check_conv {
                let mut conv = atrous_equivalence_weights::<f64>(&cfg);
                let y = conv.forward(&rd_to_channels::<f64>(&rd), Mode::Eval)?;
                let worst = y.data().iter().zip(&din.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                let scale = din.data.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
                println!("conv-equivalence max_abs_diff={worst:.3e}");
                if worst > 1e-12 * scale {
                    return Err(Error::Numerical(format!("gather and convolution paths differ by {worst:.3e}")));
                }
            }
        }
        Command::Dataset { cfg, frames, seed, sampler, out } => {
            let cfg = cfg.load()?;
            let sampler: SceneSampler = match sampler {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)?,
                None => SceneSampler::default(),
            };
            let seed = seed_override()?.unwrap_or(seed);
            write_dataset(&out, &cfg, &sampler.scenes(&cfg, frames, seed))?;
        }
        Command::Train { dataset, spec, train_config, epochs, out } => {
            let (cfg, data) = load_dataset(&dataset)?;
            let spec = load_spec(spec.as_deref())?;
            let mut tc = load_train_config(train_config.as_deref())?;
            if let Some(e) = epochs {
                tc.epochs = e;
            }
            let mut trainer = train(&spec, &cfg, tc, &data)?;
            save_checkpoint(&mut trainer.model, &out)?;
            trainer.write_log(out.join("train_log.csv"))?;
        }
        Command::Eval { model, dataset, report, detections, threshold } => {
            let mut net = load_checkpoint::<f32>(&model)?;
            let (cfg, data) = load_dataset(&dataset)?;
            if cfg != net.config {
                return Err(Error::ConfigMismatch("dataset and checkpoint use different radar configs".into()));
            }
            let defaults = EvalParams::default();
            let params = EvalParams { threshold: threshold.unwrap_or(defaults.threshold), ..defaults };
            let (r, dets) = evaluate_model(&mut net, &data, &params)?;
            write_atomic(&report, serde_json::to_string_pretty(&r)?.as_bytes())?;
            if let Some(path) = detections {
                let mut buf = Vec::new();
                write_detections_csv(&dets, &mut buf)?;
                write_atomic(path, &buf)?;
            }
            println!("AP {:.2} AR {:.2} F1 {:.2} mIoU {:.2}", r.ap, r.ar, r.f1, r.miou);
        }
        Command::Flops { cfg, b_a, b_e, model, report } => {
            let cfg = cfg.load()?;
            let spec = model.as_deref().map(ModelSpec::from_json_file).transpose()?;
            let rows = pipeline_reports(&cfg, b_a.unwrap_or(cfg.b_a), b_e.unwrap_or(cfg.b_e), spec.as_ref())?;
            print!("{}", render_table(&rows));
            if let Some(path) = report {
                write_atomic(path, serde_json::to_string_pretty(&rows)?.as_bytes())?;
            }
        }
        Command::Ablate { channels, dataset, eval_dataset, spec, train_config, epochs, out } => {
            let (cfg, data) = load_dataset(&dataset)?;
            let held_out = match eval_dataset {
                Some(dir) => {
                    let (c, d) = load_dataset(dir)?;
                    if c != cfg {
                        return Err(Error::ConfigMismatch("training and evaluation datasets differ in config".into()));
                    }
                    Some(d)
                }
                None => None,
            };
            let base = load_spec(spec.as_deref())?;
            let tc = TrainConfig { epochs, ..load_train_config(train_config.as_deref())? };
            let rows = ablate(&cfg, &base, &tc, &data, held_out.as_deref().unwrap_or(&data), &channels, &EvalParams::default(), |r| {
                eprintln!("channels {}: F1 {:.2}, pre-encoder output {} B", r.channels, r.f1, r.pre_encoder_bytes)
            })?;
            let mut buf = Vec::new();
            write_ablation_csv(&rows, &mut buf)?;
            write_atomic(out, &buf)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (kind, code) = match e.kind() {
                ErrorKind::Validation => ("validation", 2),
                ErrorKind::Io => ("io", 3),
                ErrorKind::Numerical => ("numerical", 4),
            };
            eprintln!("hdradar: error[{kind}]: {}", e.to_string().replace('\n', " "));
            ExitCode::from(code)
        }
    }
}
