mod common;

#[test]
fn features_match_reference_implementation() {
    let r = common::dsp_conformance();
    assert_eq!(r.signals, 20);
    assert!(r.max_err < 1e-4, "{} over {} frames: {}", r.max_err, r.frames, r.worst);
}
