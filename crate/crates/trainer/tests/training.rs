//! Optimization, sampling and end-to-end run behavior.

use std::fs;
use std::path::Path;

use lexphase_core::rng::stream_rng;
use lexphase_core::{label_stream, CorpusBundle, Label, RunManifest, StreamSource};
use lexphase_trainer::data::{TokenSplit, Tokenizer};
use lexphase_trainer::decode::{generate, KvDecoder, LogitSource};
use lexphase_trainer::experiment::{read_losses, sample_path};
use lexphase_trainer::{
    run_experiment, AdamW, DecodeMode, Model, ModelConfig, RunOptions, RunOutcome, TrainConfig,
    TrainState, Workspace,
};

const SHAKESPEARE: &str = include_str!("../../../data/shakespeare_excerpts.txt");

#[test]
fn periodic_corpus_is_memorized() {
    let text = "ab".repeat(2000);
    let tok = Tokenizer::new(text.chars());
    let cfg = ModelConfig {
        embed_dim: 32,
        n_layers: 1,
        n_heads: 2,
        context_len: 16,
        vocab_size: 2,
    };
    let split = TokenSplit::new("train", tok.encode(&text).unwrap(), 16).unwrap();
    let mut state = TrainState::new(Model::new(&cfg, 0).unwrap());
    let opt = AdamW::from_config(&TrainConfig::default());
    let mut ws = Workspace::new(&cfg, 8, 16);
    let mut last = f32::INFINITY;
    for u in 0..200 {
        last = state
            .step(&mut ws, &split.batch(8, 16, 0, "test/abab", u), &opt)
            .unwrap();
    }
    assert!(last < 0.1, "loss after 200 updates: {last}");
}

/// Expected share of corpus words among the segments of an i.i.d. uniform
/// character stream: segment lengths are geometric, and a segment of length
/// `k` is a corpus word with probability (case-variant spellings of
/// length-`k` words) / letters^k.
fn uniform_stream_correct_share(bundle: &CorpusBundle) -> f64 {
    let delim = |c: char| c.is_whitespace() || c.is_ascii_punctuation();
    let letters: Vec<char> = bundle
        .char_vocab()
        .iter()
        .copied()
        .filter(|&c| !delim(c))
        .collect();
    let n_all = bundle.char_vocab().len() as f64;
    let n_letters = letters.len() as f64;
    let q = n_letters / n_all;
    let spellings = |word: &str| -> f64 {
        word.chars()
            .map(|wc| {
                letters
                    .iter()
                    .filter(|c| c.to_lowercase().eq(std::iter::once(wc)))
                    .count() as f64
            })
            .product()
    };
    bundle
        .word_vocab()
        .iter()
        .map(|w| {
            let k = w.chars().count() as i32;
            q.powi(k - 1) * (1.0 - q) * spellings(w) / n_letters.powi(k)
        })
        .sum()
}

fn untrained_incorrect_share(bundle: &CorpusBundle, seed: u64) -> f64 {
    let tok = Tokenizer::from_bundle(bundle);
    let model = Model::new(&ModelConfig::desk(tok.vocab_size()), seed).unwrap();
    let mut rng = stream_rng(seed, "test/untrained", 0);
    let text = generate(
        &mut KvDecoder::new(&model),
        &tok,
        "\n",
        30_000,
        DecodeMode::default(),
        &mut rng,
    )
    .unwrap();
    assert_eq!(text.chars().count(), 30_000);
    let stream = label_stream(
        &text,
        bundle,
        StreamSource {
            seed,
            checkpoint: 0,
        },
    );
    stream.count(Label::Incorrect) as f64 / stream.len() as f64
}

#[test]
fn untrained_samples_match_the_uniform_stream_oracle() {
    let bundle = CorpusBundle::from_text(SHAKESPEARE, 0.1).unwrap();
    let expected = 1.0 - uniform_stream_correct_share(&bundle);
    let observed = untrained_incorrect_share(&bundle, 0);
    assert!(
        (observed - expected).abs() < 0.015,
        "observed {observed}, uniform oracle {expected}"
    );
    assert!(observed > 0.9);
}

/// Runs when `TINY_SHAKESPEARE_PATH` points at the full corpus.
#[test]
fn untrained_samples_are_mostly_incorrect_on_tiny_shakespeare() {
    let Ok(path) = std::env::var("TINY_SHAKESPEARE_PATH") else {
        eprintln!("TINY_SHAKESPEARE_PATH not set; skipping");
        return;
    };
    let bundle = lexphase_core::load_corpus(path, 0.1).unwrap();
    let share = untrained_incorrect_share(&bundle, 0);
    assert!(share >= 0.95, "incorrect share {share}");
}

/// Logits that always favor token 0.
struct Fixed {
    pos: usize,
    logits: Vec<f32>,
}

impl LogitSource for Fixed {
    fn context_len(&self) -> usize {
        8
    }
    fn reset(&mut self) {
        self.pos = 0;
    }
    fn push(&mut self, _: u32) -> &[f32] {
        assert!(self.pos < 8, "context overflow");
        self.pos += 1;
        &self.logits
    }
}

#[test]
fn greedy_repeats_the_favored_token() {
    let tok = Tokenizer::new("abc\n".chars());
    let mut src = Fixed {
        pos: 0,
        logits: vec![0.0, 5.0, 1.0, 2.0],
    };
    // Sorted ids: '\n' = 0, 'a' = 1.
    let mut rng = stream_rng(0, "test", 0);
    let out = generate(&mut src, &tok, "\n", 50, DecodeMode::Greedy, &mut rng).unwrap();
    assert_eq!(out, "a".repeat(50));
}

#[test]
fn seeded_sampling_is_reproducible() {
    let bundle = CorpusBundle::from_text(SHAKESPEARE, 0.1).unwrap();
    let tok = Tokenizer::from_bundle(&bundle);
    let model = Model::new(&ModelConfig::desk(tok.vocab_size()), 1).unwrap();
    let mode = DecodeMode::Multinomial { temperature: 0.8 };
    let draw = |seed| {
        let mut rng = stream_rng(seed, "test/sample", 0);
        generate(&mut KvDecoder::new(&model), &tok, "\n", 300, mode, &mut rng).unwrap()
    };
    assert_eq!(draw(3), draw(3));
    assert_ne!(draw(3), draw(4));
}

fn tiny_run() -> (ModelConfig, TrainConfig) {
    let model = ModelConfig {
        embed_dim: 16,
        n_layers: 1,
        n_heads: 2,
        context_len: 16,
        vocab_size: 0,
    };
    let train = TrainConfig {
        seeds: vec![0, 1],
        total_checkpoints: 3,
        updates_per_checkpoint: 4,
        batch_size: 4,
        eval_batches: 2,
        sample_tokens: 400,
        ..Default::default()
    };
    (model, train)
}

fn corpus_file(dir: &Path) -> CorpusBundle {
    let path = dir.join("corpus.txt");
    fs::write(&path, SHAKESPEARE).unwrap();
    lexphase_core::load_corpus(&path, 0.1).unwrap()
}

fn read(dir: &Path, rel: impl AsRef<Path>) -> Vec<u8> {
    fs::read(dir.join(rel)).unwrap()
}

#[test]
fn runs_are_complete_and_reproducible() {
    let root = tempfile::tempdir().unwrap();
    let corpus = corpus_file(root.path());
    let (model, train) = tiny_run();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    let opts = RunOptions::default();
    let RunOutcome::Complete(manifest) =
        run_experiment(&corpus, &model, &train, &a, &opts).unwrap()
    else {
        panic!("run stopped early");
    };
    assert_eq!(manifest.samples.len(), 8);
    assert_eq!(manifest.checkpoints, [0, 1, 2, 3]);
    manifest.verify(&a).unwrap();
    for s in &manifest.samples {
        assert_eq!(
            fs::read_to_string(a.join(&s.path)).unwrap().chars().count(),
            400
        );
        assert!(s.sample_seed.is_some());
    }
    let losses = read_losses(&a).unwrap();
    assert_eq!(losses.len(), 8);
    assert!(losses[3].train_loss < losses[0].train_loss);

    run_experiment(&corpus, &model, &train, &b, &RunOptions { jobs: 2, ..opts }).unwrap();
    assert_eq!(read(&a, "manifest.json"), read(&b, "manifest.json"));
    assert_eq!(read(&a, "loss.jsonl"), read(&b, "loss.jsonl"));
    assert_eq!(RunManifest::load(&b).unwrap(), *manifest);
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let root = tempfile::tempdir().unwrap();
    let corpus = corpus_file(root.path());
    let (model, train) = tiny_run();
    let (whole, split) = (root.path().join("whole"), root.path().join("split"));
    run_experiment(&corpus, &model, &train, &whole, &RunOptions::default()).unwrap();

    let killed = RunOptions {
        stop_after: Some(1),
        ..Default::default()
    };
    let out = run_experiment(&corpus, &model, &train, &split, &killed).unwrap();
    assert_eq!(
        out,
        RunOutcome::Stopped {
            after_checkpoint: 1
        }
    );
    assert!(!split.join(sample_path(0, 2)).exists());
    assert!(!split.join("manifest.json").exists());

    run_experiment(&corpus, &model, &train, &split, &RunOptions::default()).unwrap();
    for seed in [0, 1] {
        for c in 0..=3 {
            assert_eq!(
                read(&whole, sample_path(seed, c)),
                read(&split, sample_path(seed, c))
            );
        }
        let snap = format!("snapshots/seed{seed}.pscp");
        assert_eq!(read(&whole, &snap), read(&split, &snap));
    }
    assert_eq!(read(&whole, "loss.jsonl"), read(&split, "loss.jsonl"));
    assert_eq!(read(&whole, "manifest.json"), read(&split, "manifest.json"));
}

#[test]
fn changed_config_refuses_foreign_snapshot() {
    let root = tempfile::tempdir().unwrap();
    let corpus = corpus_file(root.path());
    let (model, train) = tiny_run();
    let dir = root.path().join("run");
    let stop = RunOptions {
        stop_after: Some(0),
        ..Default::default()
    };
    run_experiment(&corpus, &model, &train, &dir, &stop).unwrap();
    let other = TrainConfig {
        learning_rate: 1e-3,
        ..train
    };
    let err = run_experiment(&corpus, &model, &other, &dir, &RunOptions::default()).unwrap_err();
    assert!(
        matches!(err, lexphase_trainer::Error::Snapshot { .. }),
        "{err}"
    );
}

#[test]
fn vocabulary_mismatch_is_rejected() {
    let root = tempfile::tempdir().unwrap();
    let corpus = corpus_file(root.path());
    let (mut model, train) = tiny_run();
    model.vocab_size = 65;
    assert!(run_experiment(&corpus, &model, &train, root.path(), &RunOptions::default()).is_err());
}
