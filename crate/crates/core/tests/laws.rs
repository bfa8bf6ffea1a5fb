use strata::fixtures::laws_program;
use strata::laws::{check_laws, check_scheme_properties, GenConfig};

fn cfg(seed: u64) -> GenConfig {
    GenConfig { seed, cases: 200, ..GenConfig::default() }
}

#[test]
fn reports_are_reproducible_per_seed() {
    let p = laws_program();
    let a = check_laws(&p, &cfg(42)).unwrap().to_string();
    let b = check_laws(&p, &cfg(42)).unwrap().to_string();
    assert_eq!(a, b);
    let props = |seed| {
        check_scheme_properties(&p, &cfg(seed)).unwrap().iter().map(|r| r.to_string()).collect::<Vec<_>>()
    };
    assert_eq!(props(9), props(9));
}

#[test]
fn laws_hold_for_other_seeds_with_few_discards() {
    let p = laws_program();
    for seed in [1, 2] {
        let report = check_laws(&p, &cfg(seed)).unwrap();
        assert!(report.all_passed(), "seed {seed}:\n{report}");
        for r in &report.results {
            assert!(r.discarded * 10 < r.cases.max(1), "{}: {} of {} discarded", r.name, r.discarded, r.cases);
        }
    }
}
