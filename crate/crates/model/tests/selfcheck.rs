use evdvsr_model::selfcheck::{registry, run_all, Faults};

#[test]
fn every_property_passes_and_the_clamp_fault_is_isolated() {
    let clean = run_all(Faults::default());
    for line in &clean {
        println!("{}", line.render());
    }
    assert_eq!(clean.len(), registry().len());
    assert!(clean.iter().all(|l| l.passed()));

    let broken = run_all(Faults::parse("dcn-clamp").unwrap());
    let failed: Vec<_> = broken.iter().filter(|l| !l.passed()).map(|l| l.name).collect();
    assert_eq!(failed, vec!["model.dcn_offset_bound"]);
}

#[test]
fn unknown_fault_names_are_rejected() {
    assert!(Faults::parse("nothing").is_none());
}
