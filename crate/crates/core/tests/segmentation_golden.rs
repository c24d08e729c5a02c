//! Pinned segmentation and labeling outputs.

use lexphase_core::lexmetrics::{mean_correct_length, prefix_counts, top_words, unique_vocab};
use lexphase_core::segmenter::{normalize, segment};
use lexphase_core::{label_stream, load_corpus, CorpusBundle, Label, StreamSource};

const SOURCE: StreamSource = StreamSource {
    seed: 0,
    checkpoint: 0,
};

fn bundle() -> CorpusBundle {
    CorpusBundle::from_text(
        "First Citizen:\nBefore we proceed any further, hear me speak.\n\
         You are all resolved rather to die than to famish?\nYou, young sir, o'er-hang the sea.",
        0.1,
    )
    .unwrap()
}

/// Renders a labeled stream as `surface/normalized/C|I@position` tokens.
fn pin(text: &str) -> String {
    label_stream(text, &bundle(), SOURCE)
        .words()
        .iter()
        .map(|w| {
            let l = match w.label {
                Label::Correct => 'C',
                Label::Incorrect => 'I',
            };
            format!("{}/{}/{}@{}", w.surface, w.normalized, l, w.position)
        })
        .collect::<Vec<_>>()
        .join(" ")
}

#[test]
fn pinned_streams() {
    let cases = [
        ("to be, or not", "to/to/C@0 be/be/I@1 or/or/I@2 not/not/I@3"),
        (",,,  ", ""),
        ("", ""),
        ("O'er-hang", "O/o/C@0 er/er/C@1 hang/hang/C@2"),
        ("YOU are Young", "YOU/you/C@0 are/are/C@1 Young/young/C@2"),
        (
            "yo you youn young",
            "yo/yo/I@0 you/you/C@1 youn/youn/I@2 young/young/C@3",
        ),
        (
            "First\tcitizen:\nspeak!",
            "First/first/C@0 citizen/citizen/C@1 speak/speak/C@2",
        ),
        ("fa-mish?die...", "fa/fa/I@0 mish/mish/I@1 die/die/C@2"),
    ];
    for (input, want) in cases {
        assert_eq!(pin(input), want, "input {input:?}");
    }
}

#[test]
fn boundaries_and_normalization() {
    assert_eq!(segment("to be, or not"), ["to", "be", "or", "not"]);
    assert!(segment(",,,  ").is_empty());
    assert_eq!(segment("O'er-hang"), ["O", "er", "hang"]);
    assert_eq!(normalize("You"), "you");
    assert_eq!(normalize("THE"), "the");
    assert_eq!(normalize("y"), "y");
}

#[test]
fn young_is_not_a_prefix_hit() {
    let b = bundle();
    let young = label_stream("young", &b, SOURCE);
    let counts = prefix_counts(&young, &["y", "yo", "you"]).unwrap();
    assert_eq!(counts.values().copied().collect::<Vec<_>>(), [0, 0, 0]);

    let chain = label_stream("y yo you you", &b, SOURCE);
    let counts = prefix_counts(&chain, &["y", "yo", "you"]).unwrap();
    assert_eq!((counts["y"], counts["yo"], counts["you"]), (1, 1, 2));
}

#[test]
fn small_vocabulary_probes() {
    let b = CorpusBundle::from_text("to be to thee", 0.5).unwrap();
    let s = label_stream("to to xq zz zz", &b, SOURCE);
    assert_eq!(
        s.labels().collect::<Vec<_>>(),
        [
            Label::Correct,
            Label::Correct,
            Label::Incorrect,
            Label::Incorrect,
            Label::Incorrect
        ]
    );
    assert_eq!(unique_vocab(&s), (1, 2));
    assert_eq!(
        mean_correct_length(&label_stream("to thee", &b, SOURCE)),
        Some(3.0)
    );
    assert_eq!(mean_correct_length(&label_stream("xq", &b, SOURCE)), None);

    let top = top_words(&label_stream("to to be", &b, SOURCE), 2);
    let top: Vec<_> = top
        .iter()
        .map(|w| (w.word.as_str(), w.count, w.label))
        .collect();
    assert_eq!(top, [("to", 2, Label::Correct), ("be", 1, Label::Correct)]);
}

#[test]
fn corpus_basics() {
    let b = CorpusBundle::from_text("aaa", 0.5).unwrap();
    assert_eq!(b.char_vocab(), ['a']);
    assert_eq!(b.split_point(), 1);

    let b = CorpusBundle::from_text("to be to", 0.1).unwrap();
    let mut words: Vec<_> = b.word_vocab().iter().cloned().collect();
    words.sort();
    assert_eq!(words, ["be", "to"]);
    assert!(b.contains_word("be"));
    assert!(!b.contains_word("or"));
}

/// Runs against the real Tiny Shakespeare file when `TINY_SHAKESPEARE_PATH`
/// points at it; passes vacuously otherwise.
#[test]
fn tiny_shakespeare_inventory() {
    let Ok(path) = std::env::var("TINY_SHAKESPEARE_PATH") else {
        eprintln!("TINY_SHAKESPEARE_PATH not set; skipping");
        return;
    };
    let b = load_corpus(path, 0.1).unwrap();
    assert_eq!(b.char_vocab().len(), 65);
    let n = b.len_chars();
    assert!((1_000_000..1_200_000).contains(&n), "{n} chars");
    assert!(b.contains_word("you"));
}
