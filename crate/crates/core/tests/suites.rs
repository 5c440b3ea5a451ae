use enlargement_core::verify::{verify_random, Suite};

#[test]
fn forty_instances_pass_every_suite() {
    let reports = verify_random(7, 40, Suite::All);
    for r in &reports {
        assert!(r.passed(), "{}: {:#?}", r.suite, &r.violations[..r.violations.len().min(5)]);
        assert_eq!(r.instances, 40);
    }
}

