//! Path-level checks of the integrators and the skew-product assembly against
//! closed-form moments.

use multipd::sampling::{replicate, sample_mpd, Dirichlet, MpdSpec, PoissonDirichlet};
use multipd::sde::{simulate_wf, Projection, Scheme, WfSpec, WfStepper};
use multipd::timechange::{build_skew_product, integrate_clock, GridSpec, ProductInit};
use multipd::verify::stats::mean_se;
use multipd::verify::{moment_ode_check, OdeProcess};
use multipd::{SeedSpec, SimplexPoint, ThetaParams};

fn theta(v: &[f64]) -> ThetaParams {
    ThetaParams::new(v.to_vec()).unwrap()
}

/// `E phi2(X_t)` for the symmetric diffusion, from `n` paths.
fn phi2_at(theta: f64, types: usize, t: f64, step: f64, scheme: Scheme, n: usize, seed: SeedSpec) -> (f64, f64) {
    let spec = WfSpec::symmetric(theta, types, step, t).unwrap().with_scheme(scheme);
    let init = vec![1.0 / types as f64; types];
    let steps = (t / step).round() as usize;
    let values: Vec<f64> = replicate(seed, n, |_, rng| {
        let mut s = WfStepper::new(&spec, &init).unwrap();
        for _ in 0..steps {
            s.step(rng, step).unwrap();
        }
        s.state().iter().map(|v| v * v).sum::<f64>()
    });
    let m = mean_se(&values);
    (m.mean, m.se)
}

fn phi2_exact(theta: f64, types: usize, t: f64) -> f64 {
    let a = (1.0 + theta / types as f64) / (1.0 + theta);
    a + (1.0 / types as f64 - a) * (-(1.0 + theta) * t).exp()
}

#[test]
fn both_schemes_track_the_mark_mass_ode() {
    let p = OdeProcess::MarkMass {
        theta: theta(&[2.0, 3.0]),
        init: vec![0.2, 0.8],
    };
    for (k, scheme) in [Scheme::Euler, Scheme::BesselSplit].into_iter().enumerate() {
        let r = moment_ode_check(&p, &[0.1, 0.5, 1.0], 1e-3, scheme, 2000, 0.0, SeedSpec::new(31, k as u64)).unwrap();
        for rep in &r {
            // 3 SE only: the O(dt) bias is far below the noise here
            assert!(rep.pass, "{scheme:?}: {rep:?}");
        }
    }
}

#[test]
fn splitting_is_unbiased_at_small_mutation() {
    // theta / K = 1/32: most coordinates live near zero
    let (t, k, th) = (1.0, 32, 1.0);
    let exact = phi2_exact(th, k, t);
    let (mean, se) = phi2_at(th, k, t, 1e-3, Scheme::BesselSplit, 2000, SeedSpec::new(32, 0));
    assert!((mean - exact).abs() <= 3.0 * se + 0.01 * exact, "split {mean} vs {exact} (se {se})");
}

#[test]
fn projected_euler_is_biased_at_small_mutation() {
    // Clipping at the faces acts like an extra O(1) mutation rate, which flattens the frequencies.
    let (t, k, th) = (1.0, 32, 1.0);
    let exact = phi2_exact(th, k, t);
    let (mean, se) = phi2_at(th, k, t, 1e-3, Scheme::Euler, 2000, SeedSpec::new(33, 0));
    assert!(mean < exact - 10.0 * se, "Euler {mean} vs {exact} (se {se})");
}

#[test]
fn splitting_without_mutation_fixes_types() {
    // mu = 0: a coordinate at zero stays there exactly, and the state remains on the simplex
    let spec = WfSpec::symmetric(1e-300, 3, 1e-3, 1.0).unwrap().with_scheme(Scheme::BesselSplit);
    let path = simulate_wf(&spec, &[0.5, 0.5, 0.0], SeedSpec::new(34, 0)).unwrap();
    assert!(path.states.iter().all(|s| s[2] < 1e-200));
    assert!(path.states.iter().all(|s| (s.iter().sum::<f64>() - 1.0).abs() < 1e-12));
}

#[test]
fn reflected_mark_masses_stay_positive() {
    let spec = WfSpec::mark_mass(theta(&[1.0, 1.0]), 1e-3, 2.0).unwrap();
    assert_eq!(spec.projection, Projection::Reflect);
    for r in 0..50 {
        let p = simulate_wf(&spec, &[0.5, 0.5], SeedSpec::new(35, r)).unwrap();
        assert!(p.min_after_start() > 0.0);
    }
}

#[test]
fn skew_product_masses_follow_the_mark_mass_path() {
    let th = theta(&[2.0, 3.0]);
    let x = SimplexPoint::new(vec![0.4, 0.3, 0.2, 0.1]).unwrap();
    let init = ProductInit {
        w: SimplexPoint::new(vec![0.5, 0.5]).unwrap(),
        x: vec![x.clone(), x],
    };
    let grid = GridSpec::new(1e-3, 0.5);
    let seed = SeedSpec::new(36, 0);
    let states = build_skew_product(&th, 4, &init, seed, &grid).unwrap();
    // the mark masses are the mark-mass diffusion on stream child(0)
    let w_path = simulate_wf(&WfSpec::mark_mass(th.clone(), 1e-3, 0.5).unwrap(), &[0.5, 0.5], seed.child(0)).unwrap();
    let clocks = integrate_clock(&w_path).unwrap();
    assert_eq!(states.len(), w_path.len());
    for (k, s) in states.iter().enumerate() {
        for h in 0..2 {
            assert!((s.mark_mass(h) - w_path.states[k][h]).abs() < 1e-12);
            assert!((s.tau[h] - clocks.tau[h][k]).abs() < 1e-12);
            assert!(s.tau[h] >= s.t * (1.0 - 1e-12));
        }
        let total: f64 = s.z.iter().flatten().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

#[test]
fn dirichlet_and_pd_moments() {
    let d = Dirichlet::new(vec![0.5, 1.5, 3.0]).unwrap();
    let draws = replicate(SeedSpec::new(37, 0), 20_000, |_, rng| d.sample(rng)[0]);
    let m = mean_se(&draws);
    assert!((m.mean - 0.1).abs() < 4.0 * m.se, "{m:?}");

    // E phi2 under PD(theta) is 1 / (1 + theta)
    let pd = PoissonDirichlet::new(2.0, 500).unwrap();
    let phi2 = replicate(SeedSpec::new(37, 1), 20_000, |_, rng| pd.sample(rng).power_sum(2));
    let m = mean_se(&phi2);
    assert!((m.mean - 1.0 / 3.0).abs() < 4.0 * m.se, "{m:?}");
}

#[test]
fn mpd_mark_masses_are_dirichlet() {
    let spec = MpdSpec {
        theta: theta(&[1.0, 4.0]),
        truncation: 300,
    };
    let w1: Vec<f64> = (0..20_000)
        .map(|r| sample_mpd(&spec, SeedSpec::new(38, r)).unwrap().masses()[0])
        .collect();
    let m = mean_se(&w1);
    assert!((m.mean - 0.2).abs() < 4.0 * m.se, "{m:?}");
}
