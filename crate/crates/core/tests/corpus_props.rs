use std::path::Path;

use lyrics_eval::corpus::{
    clean_text, compress_newlines, tokenize, CleaningRuleSet, Corpus, CorpusFormat, TokenScheme,
};
use proptest::prelude::*;

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn html_fixtures() -> Vec<String> {
    let mut paths: Vec<_> = std::fs::read_dir(fixture("cleaning"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "html"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| std::fs::read_to_string(p).unwrap())
        .collect()
}

#[test]
fn cleaning_is_idempotent_on_fixtures() {
    let rules = CleaningRuleSet::default();
    for raw in html_fixtures() {
        let once = clean_text(&raw, &rules);
        assert_eq!(clean_text(&once, &rules), once);
    }
}

#[test]
fn fixture_corpus_round_trips() {
    for name in ["classical_train.jsonl", "classical_heldout.jsonl"] {
        let corpus = Corpus::load(&fixture(name), CorpusFormat::Jsonl).unwrap();
        let again = Corpus::from_jsonl(corpus.name.clone(), &corpus.to_jsonl()).unwrap();
        assert_eq!(again, corpus);
    }
}

#[test]
fn plain_dir_round_trips_through_jsonl() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("b.txt"), "第二首\n歌").unwrap();
    std::fs::write(dir.path().join("a.txt"), "第一首").unwrap();
    let corpus = Corpus::load(dir.path(), CorpusFormat::PlainDir).unwrap();
    let ids: Vec<&str> = corpus.documents().iter().map(|d| d.id.as_str()).collect();
    assert_eq!(ids, ["a", "b"]);
    let again = Corpus::from_jsonl(corpus.name.clone(), &corpus.to_jsonl()).unwrap();
    assert_eq!(again, corpus);
}

fn text_with_markup() -> impl Strategy<Value = String> {
    let piece = prop_oneof![
        Just("<br>".to_string()),
        Just("<p>".to_string()),
        Just("</div>".to_string()),
        Just("&amp;".to_string()),
        Just("&nbsp;".to_string()),
        Just("\n".to_string()),
        Just("\r\n".to_string()),
        Just("*".to_string()),
        Just("※".to_string()),
        Just("-----".to_string()),
        Just("作词：某人".to_string()),
        Just("<!-- x -->".to_string()),
        Just(" ".to_string()),
        "[a-z<>&;#]{1,4}",
        "[月光星风雨]{1,6}",
    ];
    prop::collection::vec(piece, 0..30).prop_map(|v| v.concat())
}

proptest! {
    #[test]
    fn compress_newlines_keeps_other_chars(text in "[ab\n\r ]{0,60}", max in 0usize..4) {
        let out = compress_newlines(&text, max);
        let strip = |s: &str| s.chars().filter(|&c| c != '\n').collect::<String>();
        prop_assert_eq!(strip(&out), strip(&text));
        prop_assert!(!out.contains(&"\n".repeat(max.max(1) + 1)));
    }

    #[test]
    fn clean_is_idempotent(raw in text_with_markup()) {
        let rules = CleaningRuleSet::default();
        let once = clean_text(&raw, &rules);
        prop_assert_eq!(clean_text(&once, &rules), once);
    }

    #[test]
    fn scalar_tokens_match_char_count(text in "\\PC{0,40}") {
        prop_assert_eq!(tokenize(&text, TokenScheme::UnicodeScalar).tokens.len(), text.chars().count());
    }

    #[test]
    fn jsonl_round_trip(texts in prop::collection::vec("\\PC{0,20}", 1..8)) {
        let mut jsonl = String::new();
        for (i, t) in texts.iter().enumerate() {
            jsonl.push_str(&serde_json::json!({"id": format!("d{i}"), "text": t}).to_string());
            jsonl.push('\n');
        }
        let corpus = Corpus::from_jsonl("c", &jsonl).unwrap();
        let again = Corpus::from_jsonl("c", &corpus.to_jsonl()).unwrap();
        prop_assert_eq!(again, corpus);
    }
}
