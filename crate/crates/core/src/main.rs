use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use labanmotion::encoder::ColumnsMode;
use labanmotion::keyframe::PeakMode;
use labanmotion::laban::serialize_score;
use labanmotion::pipeline::{self, PipelineConfig, StageError};
use labanmotion::skeleton::{save_sequence, synth_motion, SynthSpec};
use labanmotion::trajectory::{InterpMode, MotionDictionary};

#[derive(Parser)]
#[command(
    name = "labanmotion",
    version,
    about = "Skeleton motion to Labanotation and back onto robots"
)]
struct Cli {
    /// Per-stage timing and counts on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
    /// TOML file of pipeline settings; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct KeyframeArgs {
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    prominence: Option<f64>,
    #[arg(long = "min-sep")]
    min_sep: Option<f64>,
    #[arg(long = "merge-window")]
    merge_window: Option<f64>,
    #[arg(long = "stop-speed")]
    stop_speed: Option<f64>,
    /// Energy extrema taken as key frames: max or min.
    #[arg(long = "peak-mode")]
    peak_mode: Option<PeakMode>,
    /// Append the last frame as a key frame.
    #[arg(long = "force-final-keyframe")]
    force_final_keyframe: bool,
}

#[derive(Args, Default)]
struct TrajectoryArgs {
    #[arg(long)]
    interp: Option<InterpMode>,
    /// Trajectory sample rate, Hz.
    #[arg(long)]
    rate: Option<f64>,
    /// Motion dictionary to draw transitions from.
    #[arg(long)]
    dict: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic skeleton clip from a preset name or a JSON descriptor.
    Synth {
        /// static, move_hold_move, reach_sequence, or a descriptor path.
        pattern: String,
        #[arg(long, default_value_t = 30.0)]
        rate: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Detect key frames in a skeleton clip.
    Keyframes {
        skeleton: PathBuf,
        #[command(flatten)]
        kf: KeyframeArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Encode a skeleton clip as a Labanotation score.
    Encode {
        skeleton: PathBuf,
        #[command(flatten)]
        kf: KeyframeArgs,
        #[arg(long)]
        columns: Option<ColumnsMode>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Decode a score into a joint trajectory CSV for a robot.
    Decode {
        score: PathBuf,
        /// Robot description file or builtin name (7dof, 9dof).
        #[arg(long)]
        robot: Option<String>,
        #[command(flatten)]
        traj: TrajectoryArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Build or inspect motion dictionaries.
    Dict {
        #[command(subcommand)]
        action: DictCommand,
    },
    /// Decode a score and check that re-encoded segment directions agree.
    Roundtrip {
        score: PathBuf,
        #[arg(long)]
        robot: Option<String>,
        /// Also write the full report as JSON.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Key frames, score, trajectory and report for one clip.
    Pipeline {
        skeleton: PathBuf,
        #[arg(long)]
        robot: Option<String>,
        #[command(flatten)]
        kf: KeyframeArgs,
        #[arg(long)]
        columns: Option<ColumnsMode>,
        #[command(flatten)]
        traj: TrajectoryArgs,
        /// Output directory.
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum DictCommand {
    /// Record the key-pose transitions of skeleton clips.
    Build {
        #[arg(required = true)]
        skeletons: Vec<PathBuf>,
        #[arg(long)]
        robot: Option<String>,
        #[arg(long)]
        tau: Option<f64>,
        #[command(flatten)]
        kf: KeyframeArgs,
        #[arg(long)]
        columns: Option<ColumnsMode>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print entry counts and transition probabilities.
    Stats { dict: PathBuf },
}

fn apply_kf(cfg: &mut PipelineConfig, kf: &KeyframeArgs) {
    if let Some(v) = kf.sigma {
        cfg.sigma = v;
    }
    if let Some(v) = kf.prominence {
        cfg.prominence = v;
    }
    if let Some(v) = kf.min_sep {
        cfg.min_separation = v;
    }
    if let Some(v) = kf.merge_window {
        cfg.merge_window = v;
    }
    if let Some(v) = kf.stop_speed {
        cfg.stop_speed = v;
    }
    if let Some(v) = kf.peak_mode {
        cfg.peak_mode = v;
    }
    cfg.force_final_keyframe |= kf.force_final_keyframe;
}

fn apply_traj(cfg: &mut PipelineConfig, t: &TrajectoryArgs) {
    if let Some(v) = t.interp {
        cfg.interp = v;
    }
    if let Some(v) = t.rate {
        cfg.rate = v;
    }
    if let Some(v) = &t.dict {
        cfg.dict = Some(v.clone());
    }
}

fn robot_arg(cfg: &PipelineConfig, flag: &Option<String>) -> Result<String, StageError> {
    flag.clone().or_else(|| cfg.robot.clone()).ok_or_else(|| {
        StageError::input(
            "robot",
            anyhow::anyhow!("no robot given (use --robot or the config file)"),
        )
    })
}

fn emit(output: &Option<PathBuf>, text: &str, stage: &'static str) -> Result<(), StageError> {
    match output {
        Some(p) => pipeline::write(p, text, stage),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| StageError::input(stage, e)),
    }
}

fn synth(pattern: &str, rate: f64, output: &Path) -> Result<(), StageError> {
    let spec = if Path::new(pattern).is_file() {
        SynthSpec::from_file(pattern)
    } else {
        SynthSpec::preset(pattern, rate)
    }
    .map_err(|e| StageError::input("synth", e))?;
    let seq = synth_motion(&spec).map_err(|e| StageError::input("synth", e))?;
    log::info!("synth: {} frames at {} Hz", seq.len(), seq.sample_rate);
    save_sequence(&seq, output).map_err(|e| StageError::input("synth", e))
}

/// Ok(false) when the command ran but its check failed.
fn run(cli: Cli) -> Result<bool, StageError> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    match cli.command {
        Command::Synth {
            pattern,
            rate,
            output,
        } => synth(&pattern, rate, &output)?,
        Command::Keyframes {
            skeleton,
            kf,
            output,
        } => {
            apply_kf(&mut cfg, &kf);
            cfg.validate()?;
            let seq = pipeline::uniform(pipeline::load_skeleton(&skeleton)?)?;
            let kfs = pipeline::keyframes(&seq, &cfg)?;
            emit(&output, &pipeline::keyframes_json(&seq, &kfs), "output")?;
        }
        Command::Encode {
            skeleton,
            kf,
            columns,
            output,
        } => {
            apply_kf(&mut cfg, &kf);
            if let Some(c) = columns {
                cfg.columns = c;
            }
            cfg.validate()?;
            let seq = pipeline::uniform(pipeline::load_skeleton(&skeleton)?)?;
            let (_, score) = pipeline::encode(&seq, &cfg)?;
            let text = serialize_score(&score).map_err(|e| StageError::internal("output", e))?;
            emit(&output, &text, "output")?;
        }
        Command::Decode {
            score,
            robot,
            traj,
            output,
        } => {
            apply_traj(&mut cfg, &traj);
            cfg.validate()?;
            let robot = pipeline::load_robot(&robot_arg(&cfg, &robot)?)?;
            let score = pipeline::load_score(&score)?;
            let dict = pipeline::load_dict(&cfg)?;
            let t = pipeline::trajectory(&score, &robot, dict.as_ref(), &cfg)?;
            let csv = t.to_csv().map_err(|e| StageError::internal("output", e))?;
            emit(&output, &csv, "output")?;
        }
        Command::Dict { action } => match action {
            DictCommand::Build {
                skeletons,
                robot,
                tau,
                kf,
                columns,
                output,
            } => {
                apply_kf(&mut cfg, &kf);
                if let Some(v) = tau {
                    cfg.tau = v;
                }
                if let Some(c) = columns {
                    cfg.columns = c;
                }
                cfg.validate()?;
                let robot = pipeline::load_robot(&robot_arg(&cfg, &robot)?)?;
                let dict = pipeline::build_dictionary(&skeletons, &robot, &cfg)?;
                dict.save(&output)
                    .map_err(|e| StageError::input("output", e))?;
            }
            DictCommand::Stats { dict } => {
                let d = MotionDictionary::load(&dict).map_err(|e| StageError::input("dict", e))?;
                let mut text = serde_json::to_string_pretty(&d.stats())
                    .map_err(|e| StageError::internal("output", e))?;
                text.push('\n');
                emit(&None, &text, "output")?;
            }
        },
        Command::Roundtrip {
            score,
            robot,
            output,
        } => {
            let report = pipeline::cmd_roundtrip(&score, &robot_arg(&cfg, &robot)?)?;
            print!("{}", pipeline::roundtrip_text(&report));
            if output.is_some() {
                let mut json = serde_json::to_string_pretty(&report)
                    .map_err(|e| StageError::internal("output", e))?;
                json.push('\n');
                emit(&output, &json, "output")?;
            }
            return Ok(report.passed());
        }
        Command::Pipeline {
            skeleton,
            robot,
            kf,
            columns,
            traj,
            output,
        } => {
            apply_kf(&mut cfg, &kf);
            apply_traj(&mut cfg, &traj);
            if let Some(c) = columns {
                cfg.columns = c;
            }
            let robot = robot_arg(&cfg, &robot)?;
            let out = pipeline::cmd_pipeline(&skeleton, &robot, &cfg)?;
            pipeline::write_pipeline(&out, &output)?;
            print!("{}", pipeline::roundtrip_text(&out.report));
            return Ok(out.report.passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
