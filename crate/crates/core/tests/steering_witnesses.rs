use sabap::SteeringSequence;

#[test]
fn harmonic_divergence_and_summability_witnesses() {
    let k = 10_000u64;
    let s = SteeringSequence::power_law(1.0, 1.0).unwrap();
    let report = s.validate_prefix(k);
    assert!(report.passed(), "{report:?}");

    let sum: f64 = (0..k).map(|j| s.lambda(j)).sum();
    assert!(sum >= (k as f64).ln());
    assert_eq!(report.divergence.value, sum);

    let variation: f64 = (0..k - 1)
        .map(|j| (s.lambda(j + 1) - s.lambda(j)).abs())
        .sum();
    let closed_form = 1.0 - 1.0 / k as f64;
    assert!((variation - closed_form).abs() < 1e-12, "{variation}");
    assert!(variation <= 1.0);
    assert!((report.summability.value - closed_form).abs() < 1e-12);
}

#[test]
fn lambda_is_pure() {
    let s = SteeringSequence::power_law(0.7, 0.3).unwrap();
    for k in [0, 1, 17, 123_456] {
        assert_eq!(s.lambda(k).to_bits(), s.lambda(k).to_bits());
        assert!((0.0..=1.0).contains(&s.lambda(k)));
    }
}

#[test]
fn constant_sequences_are_rejected() {
    for c in [1.0, 0.5, 0.0] {
        assert!(SteeringSequence::power_law(c, 0.0).is_err());
    }
}
