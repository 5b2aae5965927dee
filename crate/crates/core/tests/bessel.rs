use coulomb_core::bessel::{besq_mean_var, sample_besq_em, sample_besq_exact, zero_hit_probability, BesselSpec};
use coulomb_core::stats::{ks_two_sample, mean_var};
use coulomb_core::NoiseStream;

#[test]
fn euler_matches_exact_law() {
    let (t, dt) = (0.5, 1e-4);
    for (k, &(delta, x)) in [(0.5, 1.0), (1.5, 0.0), (1.5, 1.0), (3.0, 0.0), (3.0, 1.0)].iter().enumerate() {
        let spec = BesselSpec::new(delta, x).unwrap();
        let mut rng = NoiseStream::new(20, k as u64).rng();
        let exact: Vec<f64> = (0..20_000).map(|_| sample_besq_exact(&spec, t, &mut rng).unwrap()).collect();
        let em: Vec<f64> = (0..3_000)
            .map(|_| *sample_besq_em(&spec, dt, t, &mut rng).unwrap().values.last().unwrap())
            .collect();
        let ks = ks_two_sample(&exact, &em);
        assert!(ks <= 0.035, "delta={delta} x={x}: KS {ks}");
    }
}

#[test]
fn exact_moments_at_zero_start() {
    let spec = BesselSpec::new(2.0, 0.0).unwrap();
    let mut rng = NoiseStream::new(21, 0).rng();
    let draws: Vec<f64> = (0..50_000).map(|_| sample_besq_exact(&spec, 1.5, &mut rng).unwrap()).collect();
    let (m, v) = mean_var(&draws);
    let (em, ev) = besq_mean_var(&spec, 1.5);
    // BESQ(2) from 0 is exponential with mean 2t
    assert!((m - em).abs() < 4.0 * (ev / draws.len() as f64).sqrt(), "{m} vs {em}");
    assert!((v - ev).abs() < 0.05 * ev, "{v} vs {ev}");
}

#[test]
fn hitting_is_monotone_in_start_and_dimension() {
    let noise = NoiseStream::new(22, 0);
    let p = |d: f64, x: f64| zero_hit_probability(&BesselSpec::new(d, x).unwrap(), 1.0, 1e-2, 1e-3, 3000, &noise).unwrap();
    let near = p(1.0, 0.1);
    let far = p(1.0, 1.0);
    assert!(near.value >= far.value, "{} < {}", near.value, far.value);
    let low = p(0.0, 0.5);
    let high = p(2.5, 0.5);
    assert!(low.value > high.value);
    assert_eq!(p(-1.0, 0.0).value, 1.0);
}
