mod common;

use std::collections::BTreeMap;
use std::fs;

use common::fixtures;
use vpip::corpus::*;
use vpip::synth::{RosterEntry, TaskId, TaskSpec};
use vpip::Error;

fn config(tasks: &[TaskId], n: usize) -> CorpusConfig {
    CorpusConfig {
        corpus_seed: 11,
        image_size: 32,
        samples_per_task: n,
        roster: tasks.iter().map(|&t| RosterEntry::with_defaults(t)).collect(),
    }
}

fn fixture_tasks() -> [TaskId; 3] {
    [TaskId::GaussianNoise, TaskId::LowLight, TaskId::Canny]
}

fn read_tree(root: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for e in walk(root) {
        out.insert(e.strip_prefix(root).unwrap().display().to_string(), fs::read(&e).unwrap());
    }
    out
}

fn walk(dir: &std::path::Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files.extend(walk(&p));
        } else {
            files.push(p);
        }
    }
    files
}

#[test]
fn three_tasks_of_ten_give_thirty_entries_that_reload() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("c");
    let (m, status) = synthesize_corpus(&config(&fixture_tasks(), 10), &fixtures().join("clean"), &root).unwrap();
    assert_eq!(status, SynthStatus::Created);
    assert_eq!(m.entries.len(), 30);
    assert_eq!(m.version, CORPUS_VERSION);
    assert_eq!(read_manifest(&root).unwrap(), m);
    let corpus = Corpus::open(&root).unwrap();
    for s in &corpus.samples {
        for img in [&s.input, &s.target] {
            assert_eq!((img.height(), img.width(), img.channels()), (32, 32, 3));
            assert!(img.data().iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
            assert_eq!(&img.quantized(), img);
        }
    }
    for e in &m.entries {
        let t = e.task.task_id().as_str();
        assert_eq!(e.input, format!("images/{t}/{:05}_input.png", e.index));
        assert!(e.task.severity_bucket() < RosterEntry::with_defaults(e.task.task_id()).buckets.len() as u8);
    }
    let json = m.to_json().unwrap();
    assert_eq!(CorpusManifest::from_json(&json).unwrap(), m);
}

#[test]
fn synthesis_is_bitwise_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config(&fixture_tasks(), 6);
    synthesize_corpus(&cfg, &fixtures().join("clean"), &a.path().join("c")).unwrap();
    synthesize_corpus(&cfg, &fixtures().join("clean"), &b.path().join("c")).unwrap();
    let ta = read_tree(&a.path().join("c"));
    assert_eq!(ta, read_tree(&b.path().join("c")));
    let (_, again) = synthesize_corpus(&cfg, &fixtures().join("clean"), &a.path().join("c")).unwrap();
    assert_eq!(again, SynthStatus::Unchanged);
    let changed = CorpusConfig { corpus_seed: 12, ..cfg };
    let (_, replaced) = synthesize_corpus(&changed, &fixtures().join("clean"), &a.path().join("c")).unwrap();
    assert_eq!(replaced, SynthStatus::Replaced);
}

#[test]
fn extending_the_roster_keeps_existing_samples() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    synthesize_corpus(&config(&[TaskId::Jpeg], 4), &fixtures().join("clean"), &a.path().join("c")).unwrap();
    synthesize_corpus(&config(&[TaskId::Jpeg, TaskId::Rain], 4), &fixtures().join("clean"), &b.path().join("c"))
        .unwrap();
    let (ta, tb) = (read_tree(&a.path().join("c")), read_tree(&b.path().join("c")));
    for (k, v) in ta.iter().filter(|(k, _)| k.starts_with("images/")) {
        assert_eq!(tb.get(k), Some(v), "{k}");
    }
}

#[test]
fn bad_clean_dirs_are_rejected_and_unreadable_files_counted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&[TaskId::Canny], 2);
    let missing = synthesize_corpus(&cfg, &dir.path().join("nope"), &dir.path().join("c"));
    assert!(matches!(missing, Err(Error::Corpus(_))));
    let empty = dir.path().join("empty");
    fs::create_dir(&empty).unwrap();
    assert!(synthesize_corpus(&cfg, &empty, &dir.path().join("c")).is_err());
    assert!(!dir.path().join("c").exists());

    let mixed = dir.path().join("mixed");
    fs::create_dir(&mixed).unwrap();
    fs::copy(fixtures().join("clean/brick_0.png"), mixed.join("brick.png")).unwrap();
    fs::write(mixed.join("junk.png"), b"not a png").unwrap();
    let (m, _) = synthesize_corpus(&cfg, &mixed, &dir.path().join("c")).unwrap();
    assert_eq!(m.skipped_files, 1);
}

fn manifest_with_pool(n: usize) -> CorpusManifest {
    let spec = TaskSpec::with(TaskId::GaussianNoise, &[("sigma", 0.1)], 1).unwrap();
    let other = TaskSpec::with(TaskId::GaussianNoise, &[("sigma", 0.06)], 0).unwrap();
    let mut entries: Vec<ManifestEntry> = (0..n)
        .map(|i| ManifestEntry {
            index: i,
            input: format!("i{i}"),
            target: format!("t{i}"),
            task: spec.clone(),
            seed: i as u64,
            base_id: format!("base{i}"),
        })
        .collect();
    entries.push(ManifestEntry {
        index: n,
        input: "x".into(),
        target: "y".into(),
        task: other,
        seed: 99,
        base_id: "elsewhere".into(),
    });
    CorpusManifest {
        version: CORPUS_VERSION.into(),
        corpus_seed: 0,
        image_size: 32,
        samples_per_task: n + 1,
        roster: vec![RosterEntry::with_defaults(TaskId::GaussianNoise)],
        skipped_files: 0,
        entries,
    }
}

#[test]
fn prompt_selection_is_uniform_over_the_matching_pool() {
    let m = manifest_with_pool(5);
    let query = &m.entries[0].task;
    let mut counts = [0usize; 6];
    for seed in 0..10_000 {
        let i = select_prompt_entry(&m, query, "base0", seed).unwrap();
        assert_eq!(m.entries[i].task.severity_bucket(), query.severity_bucket());
        counts[i] += 1;
    }
    assert_eq!(counts[0], 0);
    assert_eq!(counts[5], 0);
    for &c in &counts[1..5] {
        let f = c as f64 / 10_000.0;
        assert!((f - 0.25).abs() <= 0.05 * 0.25, "{counts:?}");
    }
    assert_eq!(select_prompt_entry(&m, query, "base0", 7).unwrap(), select_prompt_entry(&m, query, "base0", 7).unwrap());
}

#[test]
fn single_eligible_entry_and_empty_pool() {
    let m = manifest_with_pool(2);
    let q = &m.entries[0].task;
    for seed in 0..20 {
        assert_eq!(select_prompt_entry(&m, q, "base0", seed).unwrap(), 1);
    }
    let solo = manifest_with_pool(1);
    let err = select_prompt_entry(&solo, &solo.entries[0].task, "base0", 0).unwrap_err();
    assert!(matches!(err, Error::InsufficientPromptPool { .. }));
    assert!(err.to_string().contains("insufficient prompt pool"), "{err}");
}

#[test]
fn in_memory_prompts_match_severity_and_exclude_base() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path().join("c");
    synthesize_corpus(&config(&[TaskId::GaussianNoise, TaskId::Pixelation], 12), &fixtures().join("clean"), &root)
        .unwrap();
    let corpus = Corpus::open(&root).unwrap();
    for (qi, s) in corpus.samples.iter().enumerate() {
        for seed in 0..8 {
            let pi = corpus.select_prompt(&s.task, &s.base_id, seed).unwrap();
            let p = &corpus.samples[pi];
            assert_ne!(pi, qi);
            assert_ne!(p.base_id, s.base_id);
            assert_eq!(p.task.task_id(), s.task.task_id());
            assert_eq!(p.task.severity_bucket(), s.task.severity_bucket());
            let same = select_prompt_entry(&corpus.manifest, &s.task, &s.base_id, seed).unwrap();
            assert_eq!(same, pi);
        }
    }
}

#[test]
fn random_crop_is_seeded_and_sized() {
    let img = vpip::Image::load(fixtures().join("clean/rocket_0.png")).unwrap();
    let a = random_crop(&img, 32, 5).unwrap();
    assert_eq!((a.height(), a.width()), (32, 32));
    assert_eq!(a, random_crop(&img, 32, 5).unwrap());
    let up = random_crop(&img, 128, 1).unwrap();
    assert_eq!((up.height(), up.width()), (128, 128));
}

#[test]
fn bucket_assignment_cycles() {
    assert_eq!((0..6).map(|i| bucket_of(i, 3)).collect::<Vec<_>>(), vec![0, 1, 2, 0, 1, 2]);
    assert_eq!(bucket_of(5, 1), 0);
}
