mod support;

use support::lifecycle_oracle::{exhaustive, expected_sequence_count};

// length 6 runs in the acceptance suite
#[test]
fn sequences_up_to_five_match_transition_table() {
    for len in 0..=5 {
        let report = exhaustive(len);
        assert_eq!(report.sequences, expected_sequence_count(len));
        assert_eq!(report.divergences, 0, "{:?}", report.first_divergence);
    }
}
