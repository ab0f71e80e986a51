//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails. Every tolerance used below is pinned here.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use lednet_core::blursynth::{make_pair, synth_blur_with_r, BlurConfig, FrameSequence, PairConfig};
use lednet_core::colorcore::{lab_lightness, mean_luminance, Domain, ImageF};
use lednet_core::darkener::{apply_darkening_curve, condition_on_exposure, generate_alpha_map, AlphaMap, ExposureSpec};
use lednet_core::kernels::gradcheck::{run_suite, REGISTERED_OPS};
use lednet_core::kernels::{curve_nlu_fwd, fac_fwd, CurveParams, FilterBank, Initializer, Tensor};
use lednet_core::net::infer::image_to_tensor;
use lednet_core::net::{LedNetConfig, LossRecord, SkipMode, TrainConfig, Trainer};
use lednet_core::scenes::{moving_shapes, DotScene};
use lednet_core::seed::derive_seed;
use lednet_core::Error;

const KERNEL_TOL: f64 = 1e-4;
const SLICE_TOL: f64 = 1e-3;
const SUITE_BUDGET: Duration = Duration::from_secs(120);
const BLUR_ORACLE: f64 = 0.4552;
const BLUR_ORACLE_TOL: f64 = 1e-4;
const CONSTANT_TOL: f64 = 1e-5;
const DOT_SEEDS: u64 = 20;
const L_STAR: f32 = 98.0;
const CURVE_SAMPLES: usize = 100_000;
const CURVE_SLACK: f64 = 1e-9;
const DARKEN_IMAGES: u64 = 50;
const DARKEN_TOL: f64 = 1e-3;
const TOY_PAIRS: usize = 16;
const TOY_SIZE: usize = 64;
const TOY_STEPS: u64 = 500;
const TOY_RATIO: f64 = 0.5;
const SMOOTH_WINDOW: usize = 25;
const OVERFIT_RATIO: f64 = 0.1;
const OVERFIT_MAX_STEPS: u64 = 2000;
const TRAIN_BUDGET: Duration = Duration::from_secs(600);
const ABLATION_STEPS: u64 = 200;
const FAC_FIXTURES: u64 = 50;
const FAC_TOL: f64 = 1e-6;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn gradient_suite() -> Outcome {
    let start = Instant::now();
    let reports = match run_suite("*") {
        Ok(r) => r,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let worst = |slice: bool| {
        reports
            .iter()
            .filter(|r| (r.op == "lednet_slice") == slice)
            .map(|r| r.max_rel_error)
            .fold(0.0, f64::max)
    };
    let (k, s) = (worst(false), worst(true));
    let complete = reports.len() == REGISTERED_OPS.len() * 3;
    outcome(
        complete && k < KERNEL_TOL && s < SLICE_TOL && elapsed < SUITE_BUDGET,
        format!(
            "{} checks, worst kernel {k:.2e} (< {KERNEL_TOL:e}), network slice {s:.2e} (< {SLICE_TOL:e}), {elapsed:.1?}",
            reports.len()
        ),
    )
}

fn gray_sequence(values: &[f32]) -> FrameSequence {
    let frames = values
        .iter()
        .map(|&v| ImageF::filled(2, 2, 3, Domain::Srgb, v).unwrap())
        .collect();
    FrameSequence::new(frames, 30.0).unwrap()
}

fn blur_oracle() -> Outcome {
    let oracle = ((0.2f64.powf(2.2) + 0.6f64.powf(2.2)) / 2.0).powf(1.0 / 2.2);
    // three frames, the shutter open for the first two
    let cfg = BlurConfig {
        window: 3,
        interp_factor: 1,
        duty_cycle: 0.6,
        clipping_reverse: false,
        ..BlurConfig::default()
    };
    let two = synth_blur_with_r(&gray_sequence(&[0.2, 0.6, 0.95]), &cfg, 0.0).unwrap();
    let got = two.image.data()[0] as f64;
    let constant = synth_blur_with_r(&gray_sequence(&[0.37; 7]), &BlurConfig::default(), 100.0).unwrap();
    let drift = constant
        .image
        .data()
        .iter()
        .map(|&v| (v as f64 - 0.37f32 as f64).abs())
        .fold(0.0, f64::max);
    outcome(
        two.averaged_frames == 2
            && (oracle - BLUR_ORACLE).abs() < BLUR_ORACLE_TOL
            && (got - BLUR_ORACLE).abs() < BLUR_ORACLE_TOL
            && drift < CONSTANT_TOL,
        format!("two-frame {got:.6} vs {BLUR_ORACLE} (calculator {oracle:.6}), constant drift {drift:.1e}"),
    )
}

fn bright_count(img: &ImageF) -> usize {
    lab_lightness(img).unwrap().iter().filter(|&&l| l > L_STAR).count()
}

fn clipping_reverse_effect() -> Outcome {
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..DOT_SEEDS {
        let draw = Initializer::new(derive_seed(0xd07, &[seed])).uniform(3, 0.0, 1.0);
        let seq = DotScene {
            height: 24,
            width: 64,
            frames: 7,
            radius: 3.0 + 2.0 * draw[0],
            cy: 10.0 + 4.0 * draw[1],
            cx: 28.0 + 8.0 * draw[1],
            speed: 0.3 + 1.2 * draw[2],
            background: 0.0,
        }
        .sequence()
        .unwrap();
        let on = BlurConfig::default();
        let off = BlurConfig {
            clipping_reverse: false,
            ..on.clone()
        };
        let a = bright_count(&synth_blur_with_r(&seq, &on, 100.0).unwrap().image);
        let b = bright_count(&synth_blur_with_r(&seq, &off, 100.0).unwrap().image);
        if a > b {
            wins += 1;
        }
        lines.push(format!("{a}>{b}"));
    }
    outcome(
        wins == DOT_SEEDS,
        format!("{wins}/{DOT_SEEDS} seeds with more L*>{L_STAR} pixels under CR ({})", lines.join(" ")),
    )
}

fn curve_properties() -> Outcome {
    let mut draw = Initializer::new(0xc0de);
    let mut violations = [0usize; 3];
    let h = 1e-3;
    for n in 1..=4 {
        let count = CURVE_SAMPLES / 4;
        let a = draw.uniform(count * n, 0.0, 1.0);
        let f = draw.uniform(count, -0.25, 1.25);
        let fc = draw.uniform(count, h, 1.0 - h);
        // per sample: F, then the concavity stencil Fc-h, Fc, Fc+h
        let mut fs = Vec::with_capacity(count * 4);
        for i in 0..count {
            fs.extend([f[i], fc[i] - h, fc[i], fc[i] + h]);
        }
        let ft = Tensor::new(1, count, 4, fs).unwrap();
        let at = CurveParams::new(Tensor::new(1, count, n, a).unwrap()).unwrap();
        let out = curve_nlu_fwd(&ft, &at, n).unwrap();
        for (i, o) in out.data().chunks_exact(4).enumerate() {
            if !(-CURVE_SLACK..=1.0 + CURVE_SLACK).contains(&o[0]) {
                violations[0] += 1;
            }
            if o[0] < f[i].clamp(0.0, 1.0) - CURVE_SLACK {
                violations[1] += 1;
            }
            if o[1] - 2.0 * o[2] + o[3] > CURVE_SLACK {
                violations[2] += 1;
            }
        }
    }
    outcome(
        violations == [0; 3],
        format!(
            "{CURVE_SAMPLES} samples, n in 1..=4: range {}, >= clamp(F) {}, concavity {} violations",
            violations[0], violations[1], violations[2]
        ),
    )
}

fn darkener_conditioning() -> Outcome {
    let mut met = 0;
    let mut unreachable = 0;
    let mut bad = Vec::new();
    for i in 0..DARKEN_IMAGES {
        let mut draw = Initializer::new(derive_seed(0xda7c, &[i]));
        let p = draw.uniform(2, 0.0, 1.0);
        let img = if i % 2 == 0 {
            moving_shapes(i, 32, 32, 1).unwrap().frames()[0].clone()
        } else {
            let lo = 0.6 * p[1];
            let data = draw.uniform(32 * 32 * 3, lo, 1.0).into_iter().map(|v| v as f32).collect();
            ImageF::new(32, 32, 3, Domain::Srgb, data).unwrap()
        };
        let target = 0.05 + 0.25 * p[0];
        let spec = ExposureSpec {
            target_mean_luminance: target,
            iterations: 1 + (i % 4) as usize,
        };
        let shape = generate_alpha_map(i, 32, 32, 8.0, -0.5, 0.3).unwrap();
        match condition_on_exposure(&img, &spec, &shape) {
            Ok((out, _)) => {
                let mean = mean_luminance(&out);
                if (mean - target).abs() <= DARKEN_TOL {
                    met += 1;
                } else {
                    bad.push(format!("#{i} {mean:.4} vs {target:.4}"));
                }
            }
            Err(Error::UnreachableExposure { minimum, .. }) => {
                // confirm independently that the darkest curve stays above target
                let floor = AlphaMap::constant(32, 32, -1.0).unwrap();
                let darkest = mean_luminance(&apply_darkening_curve(&img, &floor, spec.iterations).unwrap());
                if darkest > target + DARKEN_TOL && (darkest - minimum).abs() < 1e-9 {
                    unreachable += 1;
                } else {
                    bad.push(format!("#{i} claimed unreachable, floor {darkest:.4} target {target:.4}"));
                }
            }
            Err(e) => bad.push(format!("#{i} {e}")),
        }
    }
    outcome(
        bad.is_empty(),
        format!("{met} within {DARKEN_TOL:e}, {unreachable} correctly unreachable, {} wrong {bad:?}", bad.len()),
    )
}

fn toy_pairs() -> Vec<(Tensor, Tensor)> {
    let cfg = PairConfig::default();
    let mut pairs = Vec::new();
    let mut seed = 0;
    while pairs.len() < TOY_PAIRS {
        let seq = moving_shapes(seed, TOY_SIZE, TOY_SIZE, cfg.blur.window).unwrap();
        if let Ok(p) = make_pair(&seq, &cfg, seed) {
            pairs.push((image_to_tensor(&p.low_blur).unwrap(), image_to_tensor(&p.gt).unwrap()));
        }
        seed += 1;
    }
    pairs
}

fn window_mean(records: &[LossRecord]) -> f64 {
    records.iter().map(|r| r.total).sum::<f64>() / records.len() as f64
}

fn toy_training(pairs: &[(Tensor, Tensor)]) -> Outcome {
    let start = Instant::now();
    let cfg = TrainConfig {
        steps: TOY_STEPS,
        ..TrainConfig::default()
    };
    let toy = Trainer::new(&LedNetConfig::default(), &cfg, pairs.to_vec()).and_then(|mut t| t.run());
    let toy_time = start.elapsed();
    let toy = match toy {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("toy run failed: {e}")),
    };
    let first = window_mean(&toy[..SMOOTH_WINDOW]);
    let last = window_mean(&toy[toy.len() - SMOOTH_WINDOW..]);
    let ratio = last / first;

    let start = Instant::now();
    let single = TrainConfig {
        steps: OVERFIT_MAX_STEPS,
        batch_size: 1,
        augment: false,
        ..TrainConfig::default()
    };
    let mut trainer = match Trainer::new(&LedNetConfig::default(), &single, pairs[..1].to_vec()) {
        Ok(t) => t,
        Err(e) => return outcome(false, format!("overfit setup failed: {e}")),
    };
    let mut initial = None;
    let mut reached = None;
    while !trainer.is_done() {
        let r = match trainer.step() {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("overfit run failed: {e}")),
        };
        let init = *initial.get_or_insert(r.total);
        if r.total < OVERFIT_RATIO * init {
            reached = Some(r.step + 1);
            break;
        }
    }
    let overfit_time = start.elapsed();
    outcome(
        ratio < TOY_RATIO && reached.is_some() && toy_time < TRAIN_BUDGET && overfit_time < TRAIN_BUDGET,
        format!(
            "toy {TOY_STEPS} steps: {SMOOTH_WINDOW}-step mean {first:.4} -> {last:.4} (ratio {ratio:.3} < {TOY_RATIO}) in {toy_time:.1?}; \
             overfit below {OVERFIT_RATIO} x initial at step {} in {overfit_time:.1?}",
            reached.map_or("never".into(), |s| s.to_string())
        ),
    )
}

fn ablations(pairs: &[(Tensor, Tensor)]) -> Outcome {
    let base = LedNetConfig::default();
    let variants = [
        ("no-PPM", LedNetConfig { use_ppm: false, ..base.clone() }),
        ("no-CurveNLU", LedNetConfig { use_curve_nlu: false, ..base.clone() }),
        ("concat-skip", LedNetConfig { skip_mode: SkipMode::Concat, ..base.clone() }),
        ("no-L_en", LedNetConfig { use_enh_loss: false, ..base }),
    ];
    let cfg = TrainConfig {
        steps: ABLATION_STEPS,
        ..TrainConfig::default()
    };
    let mut finals = Vec::new();
    for (name, net) in &variants {
        match Trainer::new(net, &cfg, pairs.to_vec()).and_then(|mut t| t.run()) {
            Ok(r) => finals.push((*name, r.last().expect("steps > 0").total)),
            Err(e) => return outcome(false, format!("{name} failed: {e}")),
        }
    }
    let distinct = finals
        .iter()
        .enumerate()
        .all(|(i, a)| finals[i + 1..].iter().all(|b| a.1.to_bits() != b.1.to_bits()));
    let list: Vec<String> = finals.iter().map(|(n, l)| format!("{n} {l:.5}")).collect();
    outcome(distinct, format!("{ABLATION_STEPS} steps each, final losses {}", list.join(", ")))
}

fn lednet(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_lednet"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let p = |s: &str| tmp.path().join(s).to_string_lossy().into_owned();
    let cfg = tmp.path().join("cfg.txt");
    fs::write(&cfg, "train.steps = 10\n").unwrap();
    let cfg = cfg.to_string_lossy().into_owned();
    let mut ok = lednet(&["scenes", "--out", &p("seqs"), "--count", "3", "--frames", "7", "--size", "48"]);
    for run in ["s1", "s2"] {
        ok &= lednet(&["synth", "--input", &p("seqs"), "--out", &p(run), "--seed", "3"]);
    }
    for run in ["t1", "t2"] {
        ok &= lednet(&["train", "--config", &cfg, "--input", &p("s1"), "--out", &p(run), "--seed", "3"]);
    }
    if !ok {
        return outcome(false, "a command failed".into());
    }
    let (s1, s2) = (tree(&tmp.path().join("s1")), tree(&tmp.path().join("s2")));
    let (t1, t2) = (tree(&tmp.path().join("t1")), tree(&tmp.path().join("t2")));
    let pairs = s1.keys().filter(|k| k.starts_with("low_blur")).count();
    outcome(
        s1 == s2 && t1 == t2 && pairs > 0,
        format!(
            "synth {} files ({pairs} pairs) identical: {}; train {} files identical: {}",
            s1.len(),
            s1 == s2,
            t1.len(),
            t1 == t2
        ),
    )
}

fn fac_oracle() -> Outcome {
    let mut worst = 0.0f64;
    for seed in 0..FAC_FIXTURES {
        let mut draw = Initializer::new(derive_seed(0xfac, &[seed]));
        let dims = draw.uniform(4, 0.0, 1.0);
        let h = 1 + (dims[0] * 10.0) as usize;
        let w = 1 + (dims[1] * 10.0) as usize;
        let c = 1 + (dims[2] * 4.0) as usize;
        let d = [1, 3, 5, 7][(dims[3] * 4.0) as usize];
        let x = Tensor::new(h, w, c, draw.uniform(h * w * c, -1.0, 1.0)).unwrap();
        let k = Tensor::new(h, w, c * d * d, draw.uniform(h * w * c * d * d, -1.0, 1.0)).unwrap();
        let got = fac_fwd(&x, &FilterBank::new(k.clone(), d).unwrap()).unwrap();
        let r = (d / 2) as isize;
        for y in 0..h {
            for xx in 0..w {
                for ch in 0..c {
                    let mut acc = 0.0;
                    for u in 0..d {
                        for v in 0..d {
                            let (sy, sx) = (y as isize + u as isize - r, xx as isize + v as isize - r);
                            if sy >= 0 && sx >= 0 && (sy as usize) < h && (sx as usize) < w {
                                acc += k.get(y, xx, ch * d * d + u * d + v) * x.get(sy as usize, sx as usize, ch);
                            }
                        }
                    }
                    worst = worst.max((got.get(y, xx, ch) - acc).abs());
                }
            }
        }
    }
    outcome(
        worst <= FAC_TOL,
        format!("{FAC_FIXTURES} fixtures, max abs difference {worst:.2e} (<= {FAC_TOL:e})"),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let pairs = toy_pairs();
    let criteria: Vec<Criterion> = vec![
        ("gradient suite", Box::new(gradient_suite)),
        ("blur oracle", Box::new(blur_oracle)),
        ("clipping reverse", Box::new(clipping_reverse_effect)),
        ("curve properties", Box::new(curve_properties)),
        ("darkener conditioning", Box::new(darkener_conditioning)),
        ("toy training", Box::new(|| toy_training(&pairs))),
        ("ablations", Box::new(|| ablations(&pairs))),
        ("determinism", Box::new(determinism)),
        ("fac oracle", Box::new(fac_oracle)),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let o = run();
        if !o.pass {
            failed += 1;
        }
        println!(
            "{} {}. {name}: {} [{:.1?}]",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail,
            start.elapsed()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
