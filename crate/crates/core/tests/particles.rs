use coulomb_core::estimators::InitialCondition;
use coulomb_core::model::rescale_params;
use coulomb_core::noise::INITIAL_LANE;
use coulomb_core::sde::{permute_and_rerun, simulate};
use coulomb_core::stats::mean_var;
use coulomb_core::{NoiseStream, Sign, SignedConfiguration, SystemParams, Vec2};
use proptest::prelude::*;

fn params(n: usize, gamma: f64) -> SystemParams {
    SystemParams { sigma: 1.0, gamma, n_particles: n, epsilon: 1e-2, ell: None, dt: 1e-3, horizon: 0.2 }
}

fn cross() -> SignedConfiguration {
    InitialCondition::CrossPattern4 { radius: 0.5 }.sample(&mut NoiseStream::new(0, 0).rng()).unwrap()
}

#[test]
fn sign_flip_leaves_paths_unchanged() {
    let c = cross();
    let flipped = SignedConfiguration::new(c.positions().to_vec(), c.signs().iter().map(|s| s.flipped()).collect()).unwrap();
    let noise = NoiseStream::new(11, 0);
    let a = simulate(&c, &params(4, 0.2), &noise, 1).unwrap();
    let b = simulate(&flipped, &params(4, 0.2), &noise, 1).unwrap();
    for (x, y) in a.states.iter().zip(&b.states) {
        assert_eq!(x.positions(), y.positions());
    }
}

#[test]
fn scaled_system_tracks_scaled_paths() {
    // Brownian scaling: x ↦ x/L, t ↦ t/L² maps increments onto increments
    let c = cross();
    let p = params(4, 0.2);
    let length = 2.0;
    let q = rescale_params(&p, length, 1.0 / (length * length)).unwrap();
    let noise = NoiseStream::new(12, 0);
    let a = simulate(&c, &p, &noise, 1).unwrap();
    let b = simulate(&c.scaled(1.0 / length), &q, &noise, 1).unwrap();
    for (x, y) in a.states.iter().zip(&b.states) {
        for (u, v) in x.positions().iter().zip(y.positions()) {
            assert!((u.x / length - v.x).abs() < 1e-12 && (u.y / length - v.y).abs() < 1e-12);
        }
    }
}

#[test]
fn centre_of_mass_is_brownian() {
    // pairwise drifts cancel, so the centre moves as σB/√N
    let n = 6;
    let mut p = params(n, 0.15);
    p.horizon = 0.5;
    let initial = InitialCondition::IidGaussianNeutral { n, std: 0.5, offset: 0.3 };
    let mut shifts = Vec::new();
    for path in 0..2000 {
        let noise = NoiseStream::new(13, path);
        let c = initial.sample(&mut noise.lane(INITIAL_LANE)).unwrap();
        let t = simulate(&c, &p, &noise, 50).unwrap();
        let centre = |s: &SignedConfiguration| {
            s.positions().iter().fold(Vec2::new(0.0, 0.0), |a, &b| a + b) * (1.0 / n as f64)
        };
        let d = centre(t.states.last().unwrap()) - centre(&t.states[0]);
        shifts.push(d.x);
        shifts.push(d.y);
    }
    let (mean, var) = mean_var(&shifts);
    let expected = p.horizon / n as f64;
    let se = expected * (2.0 / shifts.len() as f64).sqrt();
    assert!(mean.abs() < 4.0 * (expected / shifts.len() as f64).sqrt(), "{mean}");
    assert!((var - expected).abs() < 4.0 * se, "{var} vs {expected}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn relabelling_permutes_paths(seed in 0u64..1000, rot in 0usize..4) {
        let c = cross();
        let perm: Vec<usize> = (0..4).map(|i| (i + rot) % 4).collect();
        let (a, b) = permute_and_rerun(&c, &params(4, 0.3), &NoiseStream::new(seed, 0), &perm).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            for (i, &p) in perm.iter().enumerate() {
                prop_assert_eq!(y.positions()[i], x.positions()[p]);
            }
        }
    }

    #[test]
    fn translation_commutes_with_the_scheme(seed in 0u64..1000, dx in -5.0f64..5.0, dy in -5.0f64..5.0) {
        let c = cross();
        let shift = Vec2::new(dx, dy);
        let moved = SignedConfiguration::new(c.positions().iter().map(|&x| x + shift).collect(), c.signs().to_vec()).unwrap();
        let noise = NoiseStream::new(seed, 1);
        let a = simulate(&c, &params(4, 0.3), &noise, 10).unwrap();
        let b = simulate(&moved, &params(4, 0.3), &noise, 10).unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            for (u, v) in x.positions().iter().zip(y.positions()) {
                prop_assert!(((*u + shift) - *v).norm() < 1e-9);
            }
        }
    }
}

#[test]
fn signs_are_balanced_for_neutral_start() {
    let c = InitialCondition::IidGaussianNeutral { n: 8, std: 1.0, offset: 0.0 }.sample(&mut NoiseStream::new(1, 0).rng()).unwrap();
    assert_eq!(c.signs().iter().filter(|&&s| s == Sign::Plus).count(), 4);
}
