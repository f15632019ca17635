mod common;

use std::fs;

use common::*;
use discharge_prep::corpus_io::{
    corpus_stats, load_notes, read_prepared, shuffled_order, split_dataset, write_notes, write_prepared, CorpusError,
    DischargeNote, LengthStats, NoteFormat, PreparedExample, SplitSpec,
};
use discharge_prep::input_builder::TargetKind;
use discharge_prep::tokenizer::Tokenizer;
use proptest::prelude::*;
use tempfile::tempdir;

fn note(id: &str, text: &str) -> DischargeNote {
    DischargeNote { hadm_id: id.into(), note_id: format!("{id}-DS-1"), text: text.into() }
}

#[test]
fn csv_by_header_name() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("notes.csv");
    fs::write(&path, "text,subject_id,note_id,hadm_id\n\"Name: ___\nSex: M, more\",1,n1,100\nplain,2,n2,101\n").unwrap();
    let notes = load_notes(&path, NoteFormat::Csv).unwrap();
    assert_eq!(notes.len(), 2);
    assert_eq!((notes[0].hadm_id.as_str(), notes[0].note_id.as_str()), ("100", "n1"));
    assert_eq!(notes[0].text, "Name: ___\nSex: M, more");
    assert_eq!(notes[1], DischargeNote { note_id: "n2".into(), ..note("101", "plain") });
}

#[test]
fn csv_missing_column() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("notes.csv");
    fs::write(&path, "hadm_id,text\n1,x\n").unwrap();
    assert!(matches!(load_notes(&path, NoteFormat::Csv), Err(CorpusError::MissingColumn(c)) if c == "note_id"));
}

#[test]
fn empty_file_is_empty_corpus() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("notes.csv");
    fs::write(&path, "").unwrap();
    assert!(load_notes(&path, NoteFormat::Csv).unwrap().is_empty());
    let path = dir.path().join("notes.jsonl");
    fs::write(&path, "\n\n").unwrap();
    assert!(load_notes(&path, NoteFormat::Jsonl).unwrap().is_empty());
    assert!(matches!(split_dataset(&[], &SplitSpec::default()), Err(CorpusError::EmptyCorpus)));
}

#[test]
fn jsonl_numeric_ids_and_errors() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("notes.jsonl");
    fs::write(&path, "{\"hadm_id\": 7, \"note_id\": \"a\", \"text\": \"x\"}\n\n{\"hadm_id\": \"8\", \"note_id\": 9, \"text\": \"y\"}\n")
        .unwrap();
    let notes = load_notes(&path, NoteFormat::Jsonl).unwrap();
    assert_eq!(notes[0].hadm_id, "7");
    assert_eq!(notes[1].note_id, "9");

    fs::write(&path, "{\"hadm_id\": 1, \"note_id\": \"a\", \"text\": \"x\"}\n{\"hadm_id\": 1, \"note_id\": \"b\", \"text\": \"y\"}\n")
        .unwrap();
    assert!(matches!(load_notes(&path, NoteFormat::Jsonl), Err(CorpusError::DuplicateId { id, index: 1 }) if id == "1"));

    fs::write(&path, "{\"hadm_id\": 1, \"note_id\": \"a\", \"text\": \"  \"}\n").unwrap();
    assert!(matches!(load_notes(&path, NoteFormat::Jsonl), Err(CorpusError::MalformedRecord { index: 0, .. })));

    fs::write(&path, "not json\n").unwrap();
    assert!(matches!(load_notes(&path, NoteFormat::Jsonl), Err(CorpusError::MalformedRecord { index: 0, .. })));
}

#[test]
fn format_from_extension() {
    assert_eq!(NoteFormat::from_path("a/b.jsonl".as_ref()), NoteFormat::Jsonl);
    assert_eq!(NoteFormat::from_path("a/b.csv".as_ref()), NoteFormat::Csv);
}

#[test]
fn thousand_example_round_trip() {
    let dir = tempdir().unwrap();
    let path = dir.path().join("prepared.jsonl");
    let mut gen = NoteGen::new(11);
    let examples: Vec<PreparedExample> = (0..1000)
        .map(|i| PreparedExample {
            hadm_id: format!("{}", 30_000_000 + i),
            target: if i % 2 == 0 { TargetKind::BriefHospitalCourse } else { TargetKind::DischargeInstructions },
            input_text: format!("{}<sep>{} \"quoted\" \u{e9}", gen.sentence(12), gen.sentence(5)),
            target_text: format!("{}\n\n{}", gen.sentence(8), gen.sentence(8)),
        })
        .collect();
    write_prepared(&examples, &path).unwrap();
    assert_eq!(read_prepared(&path).unwrap(), examples);
    let line = fs::read_to_string(&path).unwrap().lines().next().unwrap().to_string();
    let keys: Vec<String> = serde_json::from_str::<serde_json::Map<String, serde_json::Value>>(&line)
        .unwrap()
        .keys()
        .cloned()
        .collect();
    assert_eq!(keys.len(), 4);
    assert!(line.contains("\"target\":\"bhc\""));
}

#[test]
fn split_matches_oracle_for_five_notes() {
    let notes: Vec<DischargeNote> = ["5", "3", "9", "1", "7"].iter().map(|id| note(id, "x")).collect();
    let (train, val) = split_dataset(&notes, &SplitSpec::default().with_seed(7)).unwrap();
    let ids: Vec<&str> = notes.iter().map(|n| n.hadm_id.as_str()).collect();
    let (exp_train, exp_val) = oracle_split(&ids, 7, 0.8);
    assert_eq!(train.iter().map(|n| n.hadm_id.clone()).collect::<Vec<_>>(), exp_train);
    assert_eq!(val.iter().map(|n| n.hadm_id.clone()).collect::<Vec<_>>(), exp_val);
    assert_eq!((train.len(), val.len()), (4, 1));
}

#[test]
fn split_fraction_parsing() {
    assert_eq!("4/5".parse::<SplitSpec>().unwrap().train_size(10), 8);
    assert_eq!("0.8".parse::<SplitSpec>().unwrap().train_size(10), 8);
    assert_eq!(SplitSpec::default().train_size(7), 6); // 5.6
    assert_eq!(SplitSpec::new(1, 2, 0).unwrap().train_size(5), 3); // 2.5 rounds up
    for bad in ["1", "0", "5/5", "0/5", "1.2", "x/y", "0."] {
        assert!(bad.parse::<SplitSpec>().is_err(), "{bad}");
    }
}

#[test]
fn length_stats() {
    let stats = LengthStats::from_lengths(&[0, 150, 99, 250], 100).unwrap();
    assert_eq!((stats.count, stats.min, stats.max, stats.total), (4, 0, 250, 499));
    assert_eq!(stats.histogram, [(0, 2), (100, 1), (200, 1)]);
    assert_eq!(stats.mean_rounded(), 125);
    let texts = ["a b c", "d e", "f"];
    assert_eq!(corpus_stats(&texts, &Tokenizer::Whitespace, 2).unwrap().histogram, [(0, 1), (2, 2)]);
}

fn notes_strategy() -> impl Strategy<Value = Vec<DischargeNote>> {
    prop::collection::btree_map("[0-9]{1,8}", "[^\u{0}]{1,60}", 1..40).prop_map(|m| {
        m.into_iter()
            .filter(|(_, t)| !t.trim().is_empty())
            .map(|(id, text)| DischargeNote { note_id: format!("n{id}"), hadm_id: id, text })
            .collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn notes_round_trip(notes in notes_strategy()) {
        let dir = tempdir().unwrap();
        let path = dir.path().join("notes.jsonl");
        write_notes(&notes, &path).unwrap();
        prop_assert_eq!(load_notes(&path, NoteFormat::Jsonl).unwrap(), notes);
    }

    #[test]
    fn split_ignores_input_order(notes in notes_strategy(), seed in any::<u64>(), rot in 0usize..40) {
        prop_assume!(!notes.is_empty());
        let spec = SplitSpec::default().with_seed(seed);
        let (a_train, a_val) = split_dataset(&notes, &spec).unwrap();
        let mut rotated = notes.clone();
        let k = rot % notes.len();
        rotated.rotate_left(k);
        let (b_train, b_val) = split_dataset(&rotated, &spec).unwrap();
        prop_assert_eq!(&a_train, &b_train);
        prop_assert_eq!(&a_val, &b_val);
        prop_assert_eq!(a_train.len() + a_val.len(), notes.len());
        prop_assert_eq!(a_train.len(), ((notes.len() * 4) as f64 / 5.0).round() as usize);

        let ids: Vec<&str> = notes.iter().map(|n| n.hadm_id.as_str()).collect();
        let (exp_train, _) = oracle_split(&ids, seed, 0.8);
        prop_assert_eq!(a_train.iter().map(|n| n.hadm_id.clone()).collect::<Vec<_>>(), exp_train);
        let mut order = shuffled_order(&ids, seed);
        order.sort_unstable();
        prop_assert_eq!(order, (0..ids.len()).collect::<Vec<_>>());
    }
}
