//! The `lednet` command line: dataset synthesis, gradient verification,
//! toy training, inference and dataset statistics.

pub mod config;
pub mod stats;
pub mod synth;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};

use lednet_core::colorcore::{load_image, save_image};
use lednet_core::kernels::gradcheck::{run_suite, REGISTERED_OPS};
use lednet_core::kernels::ParamStore;
use lednet_core::net::{infer, load_checkpoint, train_toy, LedNet};
use lednet_core::scenes::moving_shapes;
use lednet_core::{Error, Result};

use config::PipelineConfig;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "lednet", version, about = "Low-light blur synthesis and a hand-differentiated restoration network")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Turn sharp frame sequences into low-light blurry / sharp pairs.
    Synth {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Sequence root; overrides paths.input.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare every analytic backward pass with central differences.
    Gradcheck {
        /// Op-name glob, e.g. "fac*".
        #[arg(default_value = "*")]
        filter: String,
    },
    /// Train the network on a synthesized pair directory.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Pair root with low_blur/ and gt/; overrides paths.input.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue from the checkpoint under the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Restore one image with a trained checkpoint.
    Infer {
        image: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the curve parameter maps of every scale.
        #[arg(long)]
        dump_alpha: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Mean-luminance histogram of a directory (or a low_blur/gt tree).
    Stats {
        dir: PathBuf,
        /// Where to write histogram CSVs; printed only when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write procedural sharp sequences to use as synthesis input.
    Scenes {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, default_value_t = 7)]
        frames: usize,
        #[arg(long, default_value_t = 64)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Image { .. } | Error::Diverged { .. } | Error::UnreachableExposure { .. } => EXIT_RUNTIME,
        _ => EXIT_VALIDATION,
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.train.seed = cfg.seed;
    Ok(cfg)
}

fn required(p: Option<PathBuf>, what: &str) -> Result<PathBuf> {
    p.ok_or_else(|| Error::config(format!("no {what} given (flag or config)")))
}

fn cmd_synth(cfg: &PipelineConfig, input: PathBuf, out: PathBuf) -> Result<i32> {
    let start = Instant::now();
    let summary = synth::synth_dataset(&input, &out, &cfg.pair, cfg.seed)?;
    fs::write(out.join("config.txt"), cfg.to_text())?;
    eprintln!(
        "synth: {} pair(s) from {} sequence(s), {} skipped, {:.1?}",
        summary.pairs(),
        summary.sequences.len(),
        summary.failed(),
        start.elapsed()
    );
    Ok(if summary.pairs() == 0 { EXIT_RUNTIME } else { EXIT_OK })
}

fn cmd_gradcheck(filter: &str) -> Result<i32> {
    if !REGISTERED_OPS.iter().any(|op| lednet_core::kernels::gradcheck::glob_match(filter, op)) {
        eprintln!("gradcheck: no registered op matches {filter:?}");
        return Ok(EXIT_VALIDATION);
    }
    let start = Instant::now();
    let reports = run_suite(filter)?;
    for r in &reports {
        emit(&format!("{r}\n"));
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    emit(&format!(
        "{} check(s), {} failed, {:.1?}\n",
        reports.len(),
        failed,
        start.elapsed()
    ));
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VALIDATION })
}

fn cmd_train(cfg: &PipelineConfig, input: PathBuf, out: PathBuf, resume: bool) -> Result<i32> {
    let start = Instant::now();
    let records = train_toy(&input, &out, &cfg.net, &cfg.train, resume)?;
    fs::write(out.join("config.txt"), cfg.to_text())?;
    if let (Some(first), Some(last)) = (records.first(), records.last()) {
        eprintln!(
            "train: steps {}..={} loss {:.4} -> {:.4}, {:.1?}",
            first.step,
            last.step,
            first.total,
            last.total,
            start.elapsed()
        );
    } else {
        eprintln!("train: already at {} steps, nothing to do", cfg.train.steps);
    }
    Ok(EXIT_OK)
}

fn cmd_infer(cfg: &PipelineConfig, image: &Path, checkpoint: PathBuf, out: PathBuf, dump_alpha: bool) -> Result<i32> {
    let mut store = ParamStore::new();
    let net = LedNet::new(&cfg.net, &mut store, 0)?;
    load_checkpoint(&checkpoint, &mut store, &cfg.net)?;
    let img = load_image(image)?;
    let result = infer(&net, &store, &img)?;
    fs::create_dir_all(&out)?;
    let stem = image
        .file_stem()
        .map_or("image".into(), |s| s.to_string_lossy().into_owned());
    let dest = out.join(format!("{stem}_restored.png"));
    save_image(&dest, &result.image)?;
    eprintln!("infer: wrote {}", dest.display());
    if dump_alpha {
        let dir = out.join(format!("{stem}_alpha"));
        fs::create_dir_all(&dir)?;
        let mut count = 0;
        for (k, maps) in result.curve_maps.iter().enumerate() {
            for (i, m) in maps.iter().enumerate() {
                save_image(dir.join(format!("scale{}_a{}.png", k + 1, i + 1)), m)?;
                count += 1;
            }
        }
        eprintln!("infer: wrote {count} curve map(s) to {}", dir.display());
    }
    Ok(EXIT_OK)
}

// A closed pipe (e.g. `| head`) is not an error worth reporting.
fn emit(text: &str) {
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn cmd_stats(dir: &Path, out: Option<PathBuf>) -> Result<i32> {
    let hists = stats::dataset_histograms(dir)?;
    for (name, h) in &hists {
        emit(&format!("{name}: {} image(s), modal bin {:?}\n", h.total(), h.modal_bin()));
        emit(&h.to_ascii(40));
        match &out {
            Some(o) => {
                fs::create_dir_all(o)?;
                fs::write(o.join(format!("{name}_histogram.csv")), h.to_csv())?;
            }
            None => emit(&h.to_csv()),
        }
    }
    Ok(EXIT_OK)
}

fn cmd_scenes(out: &Path, count: usize, frames: usize, size: usize, seed: u64) -> Result<i32> {
    if count == 0 || frames == 0 || size == 0 {
        return Err(Error::validation("count, frames and size must be positive"));
    }
    for i in 0..count {
        let dir = out.join(format!("seq{i:03}"));
        fs::create_dir_all(&dir)?;
        let seq = moving_shapes(lednet_core::seed::derive_seed(seed, &[i as u64]), size, size, frames)?;
        for (f, frame) in seq.frames().iter().enumerate() {
            save_image(dir.join(format!("{f:05}.png")), frame)?;
        }
    }
    eprintln!("scenes: wrote {count} sequence(s) of {frames} frame(s) to {}", out.display());
    Ok(EXIT_OK)
}

pub fn execute(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Synth {
            config,
            seed,
            input,
            out,
        } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let input = required(input.or(cfg.paths.input.clone()), "input directory")?;
            let out = required(out.or(cfg.paths.output.clone()), "output directory")?;
            cmd_synth(&cfg, input, out)
        }
        Command::Gradcheck { filter } => cmd_gradcheck(&filter),
        Command::Train {
            config,
            seed,
            input,
            out,
            resume,
        } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let input = required(input.or(cfg.paths.input.clone()), "pair directory")?;
            let out = required(out.or(cfg.paths.output.clone()), "output directory")?;
            cmd_train(&cfg, input, out, resume)
        }
        Command::Infer {
            image,
            config,
            checkpoint,
            out,
            dump_alpha,
            seed,
        } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let checkpoint = checkpoint
                .or(cfg.paths.checkpoint.clone())
                .or(cfg.paths.output.as_ref().map(|o| o.join("checkpoint")));
            let checkpoint = required(checkpoint, "checkpoint")?;
            let out = out.or(cfg.paths.output.clone()).unwrap_or_else(|| PathBuf::from("."));
            cmd_infer(&cfg, &image, checkpoint, out, dump_alpha)
        }
        Command::Stats { dir, out } => cmd_stats(&dir, out),
        Command::Scenes {
            out,
            count,
            frames,
            size,
            seed,
        } => cmd_scenes(&out, count, frames, size, seed),
    }
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
