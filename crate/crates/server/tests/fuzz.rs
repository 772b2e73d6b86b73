mod support {
    pub mod fuzz;
}

use support::fuzz;

#[test]
fn random_sequences_stay_in_vocabulary_and_match_the_registry() {
    let report = fuzz::run(1_000, 0x5eed);
    assert!(report.violations.is_empty(), "{:#?}", &report.violations[..report.violations.len().min(10)]);
    assert_eq!(report.sequences, 1_000);
    // the generator reaches every state and every status class
    for s in fuzz::VOCABULARY {
        assert!(report.states_seen.contains(s), "never saw {s}: {:?}", report.states_seen);
    }
    for code in [200, 400, 404, 409] {
        assert!(report.statuses_seen.contains(&code), "never saw {code}");
    }
}
