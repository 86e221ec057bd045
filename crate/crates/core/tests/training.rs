mod common;

use std::collections::BTreeMap;

use common::{fixtures, rand_image};
use vpip::corpus::{synthesize_corpus, Corpus, CorpusConfig};
use vpip::model::{GenLv, ModelConfig, Weights};
use vpip::synth::{make_sample, RosterEntry, TaskId, TaskSpec};
use vpip::train::*;
use vpip::{Error, Image};
use vpip_autograd::Tensor;

fn small_corpus(dir: &std::path::Path, tasks: &[TaskId], n: usize) -> Corpus {
    let cfg = CorpusConfig {
        corpus_seed: 5,
        image_size: 32,
        samples_per_task: n,
        roster: tasks.iter().map(|&t| RosterEntry::with_defaults(t)).collect(),
    };
    synthesize_corpus(&cfg, &fixtures().join("clean"), &dir.join("c")).unwrap();
    Corpus::open(&dir.join("c")).unwrap()
}

fn tiny() -> GenLv {
    GenLv::new(ModelConfig::preset("tiny").unwrap(), 2).unwrap()
}

fn train_config(lr: f64, batch: usize) -> TrainConfig {
    TrainConfig { learning_rate: lr, batch_size: batch, seed: 9, ..TrainConfig::desk() }
}

#[test]
fn l1_loss_examples() {
    let a = rand_image(11, 9, 3, 1);
    assert_eq!(l1_loss(&a, &a).unwrap(), 0.0);
    let z = Image::constant(8, 8, 3, 0.0).unwrap();
    let q = Image::constant(8, 8, 3, 0.25).unwrap();
    assert_eq!(l1_loss(&z, &q).unwrap(), 0.25);
    let b = rand_image(11, 9, 3, 2);
    let mut brute = 0.0;
    for i in 0..a.len() {
        brute += (a.data()[i] as f64 - b.data()[i] as f64).abs();
    }
    assert!((l1_loss(&a, &b).unwrap() - brute / a.len() as f64).abs() < 1e-7);
    assert!(l1_loss(&a, &z).is_err());
}

#[test]
fn adamw_matches_hand_trace_on_a_quadratic() {
    let hp = AdamWParams { learning_rate: 0.1, beta1: 0.9, beta2: 0.99, eps: 1e-8, weight_decay: 0.01 };
    let (curv, center) = (2.0, 0.25);
    let grad = |x: f64| curv * (x - center);

    // Textbook decoupled-decay Adam, written out per step.
    let mut expected = Vec::new();
    let (mut x, mut m1, mut m2) = (1.0f64, 0.0f64, 0.0f64);
    for t in 1..=3 {
        let g = grad(x);
        m1 = 0.9 * m1 + 0.1 * g;
        m2 = 0.99 * m2 + 0.01 * g * g;
        let m_hat = m1 / (1.0 - 0.9f64.powi(t));
        let v_hat = m2 / (1.0 - 0.99f64.powi(t));
        x -= 0.1 * 0.01 * x;
        x -= 0.1 * m_hat / (v_hat.sqrt() + 1e-8);
        expected.push(x);
    }
    // First step by hand: g = 1.5, m̂ = 1.5, v̂ = 2.25, so x = 0.999 - 0.1.
    assert!((expected[0] - 0.899).abs() < 1e-8);

    let (mut theta, mut m, mut v) = ([1.0f64], [0.0f64], [0.0f64]);
    for (t, want) in (1..=3).zip(&expected) {
        let g = [grad(theta[0])];
        adamw_update(&mut theta, &g, &mut m, &mut v, &hp, t, true);
        assert!((theta[0] - want).abs() < 1e-10, "step {t}: {} vs {want}", theta[0]);
    }
}

#[test]
fn adamw_skips_decay_for_norms_and_biases() {
    let hp = AdamWParams { learning_rate: 0.1, beta1: 0.9, beta2: 0.99, eps: 1e-8, weight_decay: 0.5 };
    let mut w = Weights::default();
    w.insert("x.bias", Tensor::new(&[1], vec![1.0f32]));
    w.insert("x.weight", Tensor::new(&[1, 1, 1, 1], vec![1.0f32]));
    let zero: BTreeMap<String, Tensor<f32>> =
        w.iter().map(|(n, t)| (n.to_string(), Tensor::zeros(t.shape()))).collect();
    let mut opt = AdamW::new(hp);
    opt.apply(&mut w, &zero);
    assert_eq!(w.get("x.bias").unwrap().data()[0], 1.0);
    assert!((w.get("x.weight").unwrap().data()[0] - 0.95).abs() < 1e-7);
}

#[test]
fn make_batch_is_uniform_deterministic_and_excludes_the_query_base() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = [TaskId::GaussianNoise, TaskId::Canny, TaskId::LowLight, TaskId::Pixelation];
    let corpus = small_corpus(dir.path(), &tasks, 6);
    let mut counts: BTreeMap<TaskId, usize> = BTreeMap::new();
    let draws = 10_000;
    for step in 0..draws / 4 {
        let batch = make_batch(&corpus, 4, step as u64, TaskSampling::UniformTask).unwrap();
        for b in &batch {
            let (s, p) = (&corpus.samples[b.sample], &corpus.samples[b.prompt]);
            assert_ne!(s.base_id, p.base_id);
            assert_eq!(s.task.task_id(), p.task.task_id());
            assert_eq!(s.task.severity_bucket(), p.task.severity_bucket());
            *counts.entry(s.task.task_id()).or_default() += 1;
        }
    }
    for (t, c) in &counts {
        let f = *c as f64 / draws as f64;
        assert!((f - 0.25).abs() <= 0.05 * 0.25, "{t}: {f}");
    }
    assert_eq!(
        make_batch(&corpus, 8, 77, TaskSampling::UniformTask).unwrap(),
        make_batch(&corpus, 8, 77, TaskSampling::UniformTask).unwrap()
    );
}

#[test]
fn single_task_batches_use_other_bases() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), &[TaskId::Laplacian], 4);
    for seed in 0..50 {
        let b = make_batch(&corpus, 1, seed, TaskSampling::UniformSample).unwrap();
        assert_ne!(corpus.samples[b[0].sample].base_id, corpus.samples[b[0].prompt].base_id);
    }
    let lone = small_corpus(tempfile::tempdir().unwrap().path(), &[TaskId::Laplacian], 1);
    assert!(matches!(make_batch(&lone, 1, 0, TaskSampling::UniformTask), Err(Error::InsufficientPromptPool { .. })));
}

#[test]
fn zero_learning_rate_leaves_weights_and_reports_loss() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), &[TaskId::Canny, TaskId::Jpeg], 12);
    let model = tiny();
    let mut t = Trainer::new(model.clone(), train_config(0.0, 2)).unwrap();
    let rec = t.train_one(&corpus).unwrap();
    assert!(rec.loss.is_finite() && rec.loss > 0.0);
    assert_eq!(t.model.weights, model.weights);
    assert_eq!(t.step(), 1);
}

#[test]
fn loss_trace_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), &[TaskId::Canny, TaskId::Jpeg], 12);
    let trace = || {
        let mut t = Trainer::new(tiny(), train_config(1e-3, 2)).unwrap();
        let mut out = Vec::new();
        t.run(&corpus, 3, |r, _| {
            out.push(r.log_line());
            Ok(())
        })
        .unwrap();
        (out, t.model.weights)
    };
    let (a, wa) = trace();
    let (b, wb) = trace();
    assert_eq!(a, b);
    assert!(wa == wb);
    assert!(a[0].starts_with("step=1 loss="));
}

#[test]
fn non_finite_loss_names_the_batch_tasks() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), &[TaskId::Canny, TaskId::Jpeg], 12);
    let mut model = tiny();
    model.weights.get_mut("backbone.head.bias").unwrap().data_mut()[0] = f32::NAN;
    let mut t = Trainer::new(model, train_config(1e-3, 2)).unwrap();
    let err = t.train_one(&corpus).unwrap_err();
    match &err {
        Error::NonFiniteLoss { step, tasks, .. } => {
            assert_eq!(*step, 1);
            assert!(tasks.contains("canny") || tasks.contains("jpeg"), "{tasks}");
        }
        other => panic!("unexpected {other}"),
    }
}

#[test]
fn trainable_sets_form_the_inclusion_chain() {
    let w = tiny().weights;
    let sets: Vec<_> = FinetuneStrategy::ALL.iter().map(|&s| select_trainable(&w, s)).collect();
    let (pe, lat, inp, full, fb) = (&sets[0], &sets[1], &sets[2], &sets[3], &sets[4]);
    assert!(!pe.is_empty());
    for (a, b) in [(pe, lat), (lat, inp), (inp, full)] {
        assert!(a.is_subset(b) && a.len() < b.len());
    }
    assert_eq!(full.len(), w.len());
    assert!(pe.is_disjoint(fb));
    assert_eq!(pe.union(fb).cloned().collect::<std::collections::BTreeSet<_>>(), *full);
    assert!(lat.iter().any(|n| n.contains(".pcab.")));
    assert!(inp.contains("backbone.stem.weight") && !inp.contains("backbone.head.weight"));
    assert_eq!("plus_latent_blocks".parse::<FinetuneStrategy>().unwrap(), FinetuneStrategy::PlusLatentBlocks);
    assert!("everything".parse::<FinetuneStrategy>().is_err());
}

#[test]
fn frozen_parameters_never_change() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = small_corpus(dir.path(), &[TaskId::Canny, TaskId::GaussianNoise], 12);
    // Warm the zero head first so every parameter receives gradient.
    let mut warm = Trainer::new(tiny(), train_config(1e-2, 2)).unwrap();
    warm.run(&corpus, 2, |_, _| Ok(())).unwrap();
    let base = warm.model;
    for strategy in FinetuneStrategy::ALL {
        let set = select_trainable(&base.weights, strategy);
        let mut t = Trainer::new(base.clone(), train_config(1e-3, 2)).unwrap();
        t.trainable = Some(set.clone());
        t.run(&corpus, 3, |_, _| Ok(())).unwrap();
        let mut moved = 0;
        for (name, before) in base.weights.iter() {
            let after = t.model.weights.get(name).unwrap();
            if set.contains(name) {
                moved += usize::from(after.data() != before.data());
            } else {
                assert!(after.data() == before.data(), "{strategy}: frozen {name} changed");
            }
        }
        assert!(moved > 0, "{strategy}: nothing trained");
    }
}

fn tone_pairs(n: usize) -> Vec<vpip::synth::SamplePair> {
    let spec = TaskSpec::with(TaskId::ToneCurve, &[("strength", 0.6)], 0).unwrap();
    (0..n)
        .map(|i| make_sample(&spec, &common::smooth_image(32, 32, i as u64, 0.1, 0.9), 0, &format!("b{i}")).unwrap())
        .collect()
}

#[test]
fn finetune_edge_cases() {
    let pairs = tone_pairs(3);
    let mut model = tiny();
    let before = model.clone();
    let cfg = FinetuneConfig { epochs: 0, ..FinetuneConfig::default() };
    let out = finetune(&mut model, &pairs, FinetuneStrategy::Full, &cfg).unwrap();
    assert!(out.epoch_losses.is_empty());
    assert_eq!(model, before);
    assert!(finetune(&mut model, &pairs[..1], FinetuneStrategy::Full, &FinetuneConfig::default()).is_err());

    let cfg = FinetuneConfig { epochs: 2, ..FinetuneConfig::default() };
    let run = || {
        let mut m = tiny();
        let o = finetune(&mut m, &pairs, FinetuneStrategy::PlusLatentBlocks, &cfg).unwrap();
        (m, o)
    };
    let (m1, o1) = run();
    let (m2, o2) = run();
    assert_eq!(o1, o2);
    assert!(m1 == m2);
    assert_eq!(o1.epoch_losses.len(), 2);
}

#[test]
fn finetune_stops_when_loss_plateaus() {
    let pairs = tone_pairs(3);
    let mut model = tiny();
    let cfg = FinetuneConfig { epochs: 30, learning_rate: 0.0, patience: 3, ..FinetuneConfig::default() };
    let out = finetune(&mut model, &pairs, FinetuneStrategy::Full, &cfg).unwrap();
    assert!(out.stopped_early);
    assert_eq!(out.epoch_losses.len(), 4);
}

#[test]
fn train_config_profiles_and_validation() {
    assert_eq!(TrainConfig::paper().learning_rate, 1e-4);
    assert_eq!(TrainConfig::paper().batch_size, 64);
    assert_eq!((TrainConfig::desk().beta1, TrainConfig::desk().beta2), (0.9, 0.99));
    assert!(TrainConfig { batch_size: 0, ..TrainConfig::desk() }.validate().is_err());
    assert!(TrainConfig { beta2: 1.0, ..TrainConfig::desk() }.validate().is_err());
    assert_eq!(TrainConfig { epochs: 2, batch_size: 4, ..TrainConfig::desk() }.total_steps(10), 6);
    let json = serde_json::to_string(&TrainConfig::desk()).unwrap();
    assert_eq!(serde_json::from_str::<TrainConfig>(&json).unwrap(), TrainConfig::desk());
}
