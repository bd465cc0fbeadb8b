use lyrics_eval::ngram_metrics::{distinct_n, rep_n};
use proptest::prelude::*;

proptest! {
    #[test]
    fn distinct_is_bounded_by_window_count(seq in prop::collection::vec(0u8..5, 1..30), n in 1usize..5) {
        prop_assume!(seq.len() >= n);
        let bound = (seq.len() - n + 1) as f64 / seq.len() as f64;
        prop_assert!(distinct_n(&seq, n).unwrap() <= bound);
    }

    #[test]
    fn rep_is_invariant_to_relabeling(seq in prop::collection::vec(0u8..5, 0..30), shift in 1u8..5, n in 1usize..5) {
        // x -> (x + shift) mod 5 is a bijection on the alphabet.
        let relabeled: Vec<u8> = seq.iter().map(|x| (x + shift) % 5).collect();
        prop_assert_eq!(rep_n(&seq, n).unwrap(), rep_n(&relabeled, n).unwrap());
        let words: Vec<String> = seq.iter().map(|x| format!("w{x}")).collect();
        prop_assert_eq!(rep_n(&seq, n).unwrap(), rep_n(&words, n).unwrap());
    }

    #[test]
    fn new_token_never_raises_rep1(seq in prop::collection::vec(0u8..5, 0..30)) {
        let mut longer = seq.clone();
        longer.push(9);
        prop_assert!(rep_n(&longer, 1).unwrap() <= rep_n(&seq, 1).unwrap());
    }

    #[test]
    fn rep_and_distinct_stay_in_unit_range(seq in prop::collection::vec(0u8..5, 1..30), n in 1usize..6) {
        let r = rep_n(&seq, n).unwrap();
        let d = distinct_n(&seq, n).unwrap();
        prop_assert!((0.0..1.0).contains(&r));
        prop_assert!((0.0..=1.0).contains(&d));
    }
}
