//! Acceptance suite: one pass/fail line per criterion.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use common::oracles::*;
use common::*;
use vpip::corpus::{load_clean_images, random_crop, synthesize_corpus, Corpus, CorpusConfig};
use vpip::eval::*;
use vpip::model::{GenLv, ModelConfig};
use vpip::pipeline::{cmd_eval, cmd_synth, cmd_train, Layout, ModelSource, RunConfig};
use vpip::synth::*;
use vpip::train::*;
use vpip::Image;

const BLUR_TOL: f64 = 1e-5;
const LAPLACE_TOL: f64 = 1e-6;
const PSNR_TOL: f64 = 1e-6;
const SSIM_TOL: f64 = 1e-6;
const MAE_TOL: f64 = 1e-9;
const SSIM_CONST_TOL: f64 = 1e-4;
const GRAD_TOL: f64 = 1e-3;
const GRAD_INSTANCES: u64 = 5;
const OVERFIT_STEPS: usize = 200;
const OVERFIT_FACTOR: f64 = 5.0;
const C6_STEPS: u64 = 6000;
const C6_LR: f64 = 3e-4;
const C6_BATCH: usize = 4;
const C6_MIN_PAIR_DIFF: f64 = 0.05;
const C6_MIN_GAIN_DB: f64 = 2.0;
const C6_MAX_CANNY_RATIO: f64 = 0.5;
const C6_NOISE_SIGMA: f64 = 0.1;
const STABILITY_MAX_STD: f64 = 1.0;
const FREEZE_STEPS: u64 = 10;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn c1_operators() -> Verdict {
    let mut blur_err: f64 = 0.0;
    for (seed, sigma, k) in [(1, 0.8, 5), (2, 1.5, 9), (3, 2.5, 15)] {
        let img = rand_image(16, 16, 3, seed);
        let fast = apply_gaussian_blur(&img, sigma, k).unwrap();
        for (a, b) in fast.data().iter().zip(brute_blur(&img, sigma, k)) {
            blur_err = blur_err.max((*a as f64 - b).abs());
        }
    }
    ensure(blur_err <= BLUR_TOL, || format!("blur error {blur_err:.2e}"))?;

    let mut lap_err: f64 = 0.0;
    for seed in 0..3 {
        let img = rand_image(16, 16, 3, 10 + seed);
        let out = edge_laplacian(&img);
        for (i, want) in brute_laplacian(&img).into_iter().enumerate() {
            lap_err = lap_err.max((out.data()[i * 3] as f64 - want).abs());
        }
    }
    ensure(lap_err <= LAPLACE_TOL, || format!("laplacian error {lap_err:.2e}"))?;

    let flat = Image::from_fn(128, 128, 3, |y, x, c| 0.2 + 0.6 * ((y * 3 + x * 5 + c) % 11) as f32 / 11.0).unwrap();
    let sp = apply_salt_pepper(&flat, 0.05, 1).unwrap();
    let changed = sp.data().chunks(3).zip(flat.data().chunks(3)).filter(|(a, b)| a != b).count();
    let frac = changed as f64 / (128.0 * 128.0);
    ensure((0.04..=0.06).contains(&frac), || format!("salt & pepper fraction {frac:.4}"))?;

    let photo = Image::load(fixtures().join("clean/astronaut_0.png")).unwrap();
    let jp: Vec<f64> = [10, 30, 50, 70, 90].iter().map(|&q| psnr(&apply_jpeg_like(&photo, q).unwrap(), &photo).unwrap()).collect();
    ensure(jp.windows(2).all(|w| w[1] >= w[0]), || format!("jpeg psnr not monotone {jp:?}"))?;

    let clean = Image::load(fixtures().join("clean/camera_0.png")).unwrap().crop(0, 0, 64, 64).unwrap();
    let blurred = gaussian_blur_auto(&clean, 1.5).unwrap();
    let psf = filter::gaussian_kernel(1.5, filter::ksize_for(1.5));
    let mut min_it = f64::INFINITY;
    let planes: Vec<Vec<f64>> = (0..3)
        .map(|c| {
            richardson_lucy(&blurred.plane(c), 64, 64, &psf, 30, |_, x| {
                min_it = x.iter().copied().fold(min_it, f64::min);
            })
        })
        .collect();
    let restored = Image::from_fn(64, 64, 3, |y, x, c| planes[c][y * 64 + x].clamp(0.0, 1.0) as f32).unwrap();
    let (p_rl, p_blur) = (psnr(&restored, &clean).unwrap(), psnr(&blurred, &clean).unwrap());
    ensure(min_it >= 0.0 && p_rl > p_blur, || format!("RL min {min_it:.3e}, psnr {p_rl:.2} vs {p_blur:.2}"))?;

    let mut range_checked = 0;
    for (ti, &task) in TaskId::ALL.iter().enumerate() {
        let entry = RosterEntry::with_defaults(task);
        for b in 0..entry.buckets.len() as u8 {
            let img = rand_image(24, 20, 3, ti as u64 * 7 + b as u64);
            let spec = entry.sample_spec(b, 3).unwrap();
            let out = spec.apply(&img, 5).unwrap();
            ensure(out.data().iter().all(|v| (0.0..=1.0).contains(v)), || format!("{task} out of range"))?;
            ensure(out == spec.apply(&img, 5).unwrap(), || format!("{task} not deterministic"))?;
            let s = make_sample(&spec, &img, 5, "b").unwrap();
            if task.category() == Category::Restoration {
                ensure(s.target == img, || format!("{task} target is not the clean base"))?;
            }
            range_checked += 1;
        }
    }
    Ok(format!(
        "blur err {blur_err:.1e}, laplacian err {lap_err:.1e}, s&p {frac:.4}, jpeg q10..90 {:.1}..{:.1} dB, RL {p_blur:.2}->{p_rl:.2} dB, {range_checked} task/bucket range checks",
        jp[0], jp[4]
    ))
}

fn c2_metrics() -> Verdict {
    let (mut ep, mut es, mut em) = (0f64, 0f64, 0f64);
    for seed in 0..50 {
        let (a, b) = random_pair(seed);
        ep = ep.max((psnr(&a, &b).unwrap() - brute_psnr(&a, &b)).abs());
        es = es.max((ssim(&a, &b).unwrap() - brute_ssim(&a, &b)).abs());
        em = em.max((mae(&a, &b).unwrap() - brute_mae(&a, &b)).abs());
    }
    ensure(ep <= PSNR_TOL && es <= SSIM_TOL && em <= MAE_TOL, || {
        format!("max errors psnr {ep:.1e} ssim {es:.1e} mae {em:.1e}")
    })?;
    let lo = Image::constant(16, 16, 3, 0.2).unwrap();
    let hi = Image::constant(16, 16, 3, 0.4).unwrap();
    let closed = (2.0 * 0.2 * 0.4 + 1e-4) / (0.2f64.powi(2) + 0.4f64.powi(2) + 1e-4);
    let s = ssim(&lo, &hi).unwrap();
    ensure((s - closed).abs() <= SSIM_CONST_TOL, || format!("constant ssim {s} vs closed form {closed}"))?;
    Ok(format!(
        "50 pairs: max err psnr {ep:.1e} dB, ssim {es:.1e}, mae {em:.1e}; ssim(0.2, 0.4) = {s:.6} (closed form {closed:.6})"
    ))
}

fn c3_gradients() -> Verdict {
    let mut worst = Vec::new();
    for (name, block) in [("TSAB", Block::Tsab), ("SSAB", Block::Ssab), ("PCAB", Block::Pcab)] {
        let mut m: f64 = 0.0;
        for seed in 0..GRAD_INSTANCES {
            let side = if seed % 2 == 0 { 2 } else { 4 };
            m = m.max(block_grad_error(block, side, seed));
        }
        worst.push((name, m));
    }
    let mut bb: f64 = 0.0;
    for seed in 0..GRAD_INSTANCES {
        bb = bb.max(backbone_grad_error(seed));
    }
    worst.push(("backbone", bb));
    let text: Vec<String> = worst.iter().map(|(n, e)| format!("{n} {e:.1e}")).collect();
    ensure(worst.iter().all(|(_, e)| *e < GRAD_TOL), || format!("max rel error {}", text.join(", ")))?;
    Ok(format!("{GRAD_INSTANCES} instances each, max rel error {}", text.join(", ")))
}

fn c4_identity() -> Verdict {
    let model = GenLv::new(ModelConfig::preset("tiny").unwrap(), 17).unwrap();
    for seed in 0..10 {
        let x = rand_image(32, 32, 3, 100 + seed);
        let task = TaskSpec::with(TaskId::Laplacian, &[], 0).unwrap();
        let prompt = PromptPair { source: rand_image(32, 32, 3, 200 + seed), target: rand_image(32, 32, 3, 300 + seed), task };
        let out = model.forward_full(&x, &prompt).unwrap();
        ensure(out == x, || format!("input {seed} altered"))?;
    }
    Ok("10 random inputs with random prompts returned bitwise unchanged".into())
}

fn c5_overfit() -> Verdict {
    let mut cfg = ModelConfig::preset("tiny").unwrap();
    cfg.image_size = 64;
    let mut model = GenLv::new(cfg, 0).unwrap();
    let clean = load_clean_images(&fixtures().join("clean")).unwrap().0;
    let specs = [
        TaskSpec::with(TaskId::LowLight, &[("gamma", 2.0)], 0).unwrap(),
        TaskSpec::with(TaskId::Pencil, &[("blur_sigma", 3.0)], 0).unwrap(),
    ];
    let samples: Vec<SamplePair> = (0..4)
        .map(|i| {
            let base = random_crop(&clean[i].1, 64, i as u64).unwrap();
            make_sample(&specs[i % 2], &base, i as u64, &clean[i].0).unwrap()
        })
        .collect();
    let batch: Vec<Example<'_>> = (0..4)
        .map(|i| {
            let p = &samples[(i + 2) % 4];
            Example { input: &samples[i].input, target: &samples[i].target, prompt_source: &p.input, prompt_target: &p.target }
        })
        .collect();
    let mut opt = AdamW::new(TrainConfig { learning_rate: 1e-3, ..TrainConfig::desk() }.adamw());
    let mut losses = Vec::with_capacity(OVERFIT_STEPS);
    for _ in 0..OVERFIT_STEPS {
        losses.push(train_step(&mut model, &batch, &mut opt, &|_| true).unwrap());
    }
    let last = *losses.last().unwrap();
    let ratio = losses[0] / last;
    ensure(ratio >= OVERFIT_FACTOR, || format!("L1 {:.4} -> {last:.4} ({ratio:.2}x)", losses[0]))?;
    Ok(format!("L1 {:.4} -> {last:.4} over {OVERFIT_STEPS} steps ({ratio:.1}x)", losses[0]))
}

/// State shared by the prompt-conditioning criteria.
struct Experiment {
    model: GenLv,
    corpus: Corpus,
    holdout: Vec<Image>,
    _dir: tempfile::TempDir,
}

const C6_TASKS: [TaskId; 4] = [TaskId::GaussianNoise, TaskId::LowLight, TaskId::Canny, TaskId::Pencil];

fn c6_roster() -> Vec<RosterEntry> {
    C6_TASKS
        .iter()
        .map(|&t| {
            let mut e = RosterEntry::with_defaults(t);
            match t {
                TaskId::GaussianNoise => e.buckets = vec![[("sigma".to_string(), [0.05, 0.15])].into()],
                TaskId::LowLight => e.buckets = vec![[("gamma".to_string(), [2.0, 2.0])].into()],
                _ => {}
            }
            e
        })
        .collect()
}

fn train_experiment() -> Experiment {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CorpusConfig { corpus_seed: 7, image_size: 32, samples_per_task: 60, roster: c6_roster() };
    synthesize_corpus(&cfg, &fixtures().join("clean"), &dir.path().join("corpus")).unwrap();
    let corpus = Corpus::open(&dir.path().join("corpus")).unwrap();
    let holdout = load_clean_images(&fixtures().join("holdout"))
        .unwrap()
        .0
        .iter()
        .enumerate()
        .map(|(i, (_, img))| random_crop(img, 32, 100 + i as u64).unwrap())
        .collect();
    let tc = TrainConfig { learning_rate: C6_LR, batch_size: C6_BATCH, seed: 3, ..TrainConfig::desk() };
    let mut mcfg = ModelConfig::preset("tiny").unwrap();
    mcfg.image_size = 32;
    let mut trainer = Trainer::new(GenLv::new(mcfg, 1).unwrap(), tc).unwrap();
    trainer.run(&corpus, C6_STEPS, |_, _| Ok(())).unwrap();
    Experiment { model: trainer.model, corpus, holdout, _dir: dir }
}

fn task_prompt(corpus: &Corpus, task: TaskId) -> PromptPair {
    corpus.samples[corpus.indices_for(task)[0]].clone().into()
}

fn noisy(img: &Image, i: usize) -> Image {
    apply_gaussian_noise(img, C6_NOISE_SIGMA, 900 + i as u64).unwrap().quantized()
}

fn c6_conditioning(exp: &Experiment) -> Verdict {
    let refs: Vec<&Image> = exp.holdout.iter().collect();
    let outs: Vec<Vec<Image>> =
        C6_TASKS.iter().map(|&t| exp.model.predict_many(&refs, &task_prompt(&exp.corpus, t)).unwrap()).collect();
    let mut min_diff = f64::INFINITY;
    for a in 0..4 {
        for b in a + 1..4 {
            let d = outs[a].iter().zip(&outs[b]).map(|(x, y)| mae(x, y).unwrap() / 255.0).sum::<f64>() / refs.len() as f64;
            min_diff = min_diff.min(d);
        }
    }
    let noisy_in: Vec<Image> = exp.holdout.iter().enumerate().map(|(i, c)| noisy(c, i)).collect();
    let nrefs: Vec<&Image> = noisy_in.iter().collect();
    let den = exp.model.predict_many(&nrefs, &task_prompt(&exp.corpus, TaskId::GaussianNoise)).unwrap();
    let gain = (0..refs.len())
        .map(|i| psnr(&den[i], &exp.holdout[i]).unwrap() - psnr(&noisy_in[i], &exp.holdout[i]).unwrap())
        .sum::<f64>()
        / refs.len() as f64;
    let (mut model_mae, mut ident_mae) = (0.0, 0.0);
    for (i, c) in exp.holdout.iter().enumerate() {
        let gt = edge_canny(c, 0.04, 0.1).unwrap();
        model_mae += mae(&outs[2][i], &gt).unwrap();
        ident_mae += mae(c, &gt).unwrap();
    }
    let ratio = model_mae / ident_mae;
    let detail = format!(
        "{C6_STEPS} steps: min pairwise |d| {min_diff:.3} (> {C6_MIN_PAIR_DIFF}), denoise gain {gain:.2} dB (>= {C6_MIN_GAIN_DB}), canny MAE ratio {ratio:.3} (<= {C6_MAX_CANNY_RATIO})"
    );
    ensure(min_diff > C6_MIN_PAIR_DIFF && gain >= C6_MIN_GAIN_DB && ratio <= C6_MAX_CANNY_RATIO, || detail.clone())?;
    Ok(detail)
}

fn c7_stability(exp: &Experiment) -> Verdict {
    let pool: Vec<PromptPair> = exp
        .corpus
        .indices_for(TaskId::GaussianNoise)
        .into_iter()
        .take(STABILITY_POOL)
        .map(|i| exp.corpus.samples[i].clone().into())
        .collect();
    let eval_set: Vec<SamplePair> = exp
        .holdout
        .iter()
        .enumerate()
        .map(|(i, c)| SamplePair {
            input: noisy(c, i),
            target: c.clone(),
            task: pool[0].task.clone(),
            seed: i as u64,
            base_id: format!("holdout{i}"),
        })
        .collect();
    let live = prompt_stability(&exp.model, &eval_set, &pool).unwrap();
    let blind = PromptBlind { inner: exp.model.clone(), fixed: pool[0].clone() };
    let stub = prompt_stability(&blind, &eval_set, &pool).unwrap();
    let detail = format!("trained std {:.4} dB (mean {:.2} dB), prompt-blind std {}", live.std, live.mean, stub.std);
    ensure(live.std < STABILITY_MAX_STD && stub.std == 0.0, || detail.clone())?;
    Ok(detail)
}

fn backbone_names(model: &GenLv) -> Vec<String> {
    let pe = select_trainable(&model.weights, FinetuneStrategy::PromptEncoderOnly);
    model.weights.names().filter(|n| !pe.contains(*n)).map(str::to_string).collect()
}

fn tone_pair(img: &Image, id: &str) -> SamplePair {
    let spec = TaskSpec::with(TaskId::ToneCurve, &[("strength", 0.7)], 0).unwrap();
    make_sample(&spec, img, 0, id).unwrap()
}

fn c8_finetune(exp: &Experiment) -> Verdict {
    let w = &exp.model.weights;
    let sets: Vec<_> = FinetuneStrategy::ALL.iter().map(|&s| select_trainable(w, s)).collect();
    let chain = sets[0].is_subset(&sets[1])
        && sets[1].is_subset(&sets[2])
        && sets[2].is_subset(&sets[3])
        && sets[0].len() < sets[1].len()
        && sets[1].len() < sets[2].len()
        && sets[2].len() < sets[3].len();
    ensure(chain, || "trainable sets are not a strict chain".into())?;

    let mut t = Trainer::new(exp.model.clone(), TrainConfig { learning_rate: C6_LR, batch_size: 4, seed: 11, ..TrainConfig::desk() })
        .unwrap();
    t.trainable = Some(sets[0].clone());
    t.run(&exp.corpus, FREEZE_STEPS, |_, _| Ok(())).unwrap();
    let names = backbone_names(&exp.model);
    let frozen = names.iter().all(|n| t.model.weights.get(n).unwrap().data() == w.get(n).unwrap().data());
    let moved = sets[0].iter().filter(|n| t.model.weights.get(n).unwrap().data() != w.get(n).unwrap().data()).count();
    ensure(frozen && moved > 0, || format!("backbone frozen: {frozen}, prompt tensors moved: {moved}"))?;

    let clean = load_clean_images(&fixtures().join("clean")).unwrap().0;
    let pairs: Vec<SamplePair> =
        (0..5).map(|i| tone_pair(&random_crop(&clean[i * 3].1, 32, 40 + i as u64).unwrap(), &clean[i * 3].0)).collect();
    let held = tone_pair(&exp.holdout[0], "holdout0");
    let prompt: PromptPair = pairs[0].clone().into();
    let l1 = |m: &GenLv| l1_loss(&m.forward_full(&held.input, &prompt).unwrap(), &held.target).unwrap();
    let before = l1(&exp.model);
    let mut tuned = exp.model.clone();
    let out = finetune(&mut tuned, &pairs, FinetuneStrategy::Full, &FinetuneConfig::default()).unwrap();
    let after = l1(&tuned);
    let detail = format!(
        "chain of {} < {} < {} < {} tensors; {FREEZE_STEPS} prompt-encoder steps left {} backbone tensors bitwise unchanged; tone-curve held-out L1 {before:.4} -> {after:.4} after {} epochs",
        sets[0].len(),
        sets[1].len(),
        sets[2].len(),
        sets[3].len(),
        names.len(),
        out.epoch_losses.len()
    );
    ensure(after < before, || detail.clone())?;
    Ok(detail)
}

fn run_pipeline(root: &Path) -> Vec<(String, Vec<u8>)> {
    let cfg_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/fixture.json");
    let clean = fixtures().join("clean");
    let cfg = RunConfig::load(Some(&cfg_path), &[format!("clean_dir={}", clean.display())]).unwrap();
    let layout = Layout::new(&cfg, Some(root));
    let synth = cmd_synth(&cfg, &layout).unwrap();
    let train = cmd_train(&cfg, &layout, |_| {}).unwrap();
    assert_eq!(train.final_step, 50);
    let eval = cmd_eval(&cfg, &layout, ModelSource::Checkpoint).unwrap();
    let read = |p: &Path| std::fs::read(p).unwrap();
    vec![
        ("manifest".into(), read(&synth.manifest)),
        ("loss log".into(), read(&layout.loss_log())),
        ("checkpoint".into(), read(&layout.last_checkpoint())),
        ("report.json".into(), read(&eval.json)),
        ("report.csv".into(), read(&eval.csv)),
    ]
}

fn c9_determinism() -> Verdict {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let ra = run_pipeline(a.path());
    let rb = run_pipeline(b.path());
    for ((name, x), (_, y)) in ra.iter().zip(&rb) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    let lines = String::from_utf8_lossy(&ra[1].1).lines().count();
    Ok(format!("synth -> train(50) -> eval twice: manifest, {lines}-line loss log, checkpoint and reports bitwise identical"))
}

fn run(id: &str, name: &str, f: impl FnOnce() -> Verdict) -> bool {
    let t0 = Instant::now();
    let verdict = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        Err(e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into()))
    });
    let secs = t0.elapsed().as_secs_f64();
    let (tag, detail) = match &verdict {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("[{tag}] {id} {name}: {detail} ({secs:.1}s)");
    verdict.is_ok()
}

fn main() {
    println!("acceptance: 9 criteria");
    let mut ok = true;
    ok &= run("C1", "operator oracles", c1_operators);
    ok &= run("C2", "metric oracles", c2_metrics);
    ok &= run("C3", "gradient checks", c3_gradients);
    ok &= run("C4", "identity at init", c4_identity);
    ok &= run("C5", "overfit smoke", c5_overfit);
    let t0 = Instant::now();
    let exp = catch_unwind(train_experiment);
    let train_secs = t0.elapsed().as_secs_f64();
    match &exp {
        Ok(e) => {
            println!("      trained tiny model for criteria 6-8 in {train_secs:.1}s");
            ok &= run("C6", "prompt conditioning", || c6_conditioning(e));
            ok &= run("C7", "prompt stability", || c7_stability(e));
            ok &= run("C8", "fine-tuning strategies", || c8_finetune(e));
        }
        Err(_) => {
            for (id, name) in [("C6", "prompt conditioning"), ("C7", "prompt stability"), ("C8", "fine-tuning strategies")] {
                println!("[FAIL] {id} {name}: training the experiment model panicked");
            }
            ok = false;
        }
    }
    ok &= run("C9", "end-to-end determinism", c9_determinism);
    println!("acceptance: {}", if ok { "all criteria passed" } else { "some criteria FAILED" });
    if !ok {
        std::process::exit(1);
    }
}
