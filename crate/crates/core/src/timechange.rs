//! Random clocks and the multiple skew-product construction.
//!
//! Given a mark-mass path `W`, each mark runs on its own clock
//! `tau_h(t) = int_0^t ds / W_h(s)`, and `Z_h(t) = W_h(t) X_h(tau_h(t))` where the
//! `X_h` are independent symmetric Wright–Fisher drivers. Because `tau_h(T)` is
//! random, drivers are streamed: each is advanced on its own uniform grid only
//! as far as the clock has reached, and read off at the left-nearest grid point.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, state, Error, Result};
use crate::sampling::SeedSpec;
use crate::sde::{Path, WfSpec, WfStepper};
use crate::simplex::{KingmanPoint, SimplexPoint, ThetaParams};

/// Integrated clocks on the grid of a mark-mass path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClockPath {
    pub times: Vec<f64>,
    /// `tau[h][k] = tau_h(times[k])`.
    pub tau: Vec<Vec<f64>>,
}

fn check_clock_step(t: f64, prev: f64, tau: f64, h: usize) -> Result<()> {
    if !(tau > prev) {
        return Err(state(format!("clock {} failed to increase at t = {t}", h + 1)));
    }
    if tau < t * (1.0 - 1e-12) {
        return Err(state(format!("clock {} fell below t at t = {t}", h + 1)));
    }
    Ok(())
}

/// Trapezoid rule on `1 / w_h` over the path grid.
pub fn integrate_clock(w_path: &Path) -> Result<ClockPath> {
    let first = w_path
        .states
        .first()
        .ok_or_else(|| param("cannot integrate a clock along an empty path"))?;
    let marks = first.len();
    let mut tau = vec![vec![0.0; w_path.len()]; marks];
    for (k, w) in w_path.states.iter().enumerate() {
        if let Some(h) = w.iter().position(|&v| v <= 0.0) {
            return Err(state(format!(
                "mark {} has zero mass at t = {}; clock undefined",
                h + 1,
                w_path.times[k]
            )));
        }
        if k == 0 {
            continue;
        }
        let dt = w_path.times[k] - w_path.times[k - 1];
        let prev = &w_path.states[k - 1];
        for h in 0..marks {
            let next = tau[h][k - 1] + 0.5 * dt * (1.0 / prev[h] + 1.0 / w[h]);
            check_clock_step(w_path.times[k], tau[h][k - 1], next, h)?;
            tau[h][k] = next;
        }
    }
    Ok(ClockPath {
        times: w_path.times.clone(),
        tau,
    })
}

/// A symmetric Wright–Fisher driver advanced on demand.
#[derive(Debug, Clone)]
pub struct LazyDriver {
    stepper: WfStepper,
    rng: ChaCha8Rng,
    step: f64,
    index: usize,
    max_horizon: f64,
}

impl LazyDriver {
    pub fn new(
        theta: f64,
        types: usize,
        init: &[f64],
        step: f64,
        max_horizon: f64,
        seed: SeedSpec,
    ) -> Result<Self> {
        let spec = WfSpec::symmetric(theta, types, step, max_horizon.max(step))?;
        Ok(Self {
            stepper: WfStepper::new(&spec, init)?,
            rng: seed.rng(),
            step,
            index: 0,
            max_horizon,
        })
    }

    /// Driver time of the current grid point.
    pub fn grid_time(&self) -> f64 {
        self.index as f64 * self.step
    }

    /// State at the left-nearest grid point to `tau`. Calls must be monotone in `tau`.
    pub fn at(&mut self, tau: f64) -> Result<&[f64]> {
        if tau > self.max_horizon {
            return Err(Error::DriverExhausted {
                needed: tau,
                horizon: self.max_horizon,
            });
        }
        // the small offset keeps grid-aligned clock values on their own grid point
        let target = (tau / self.step + 1e-9).floor() as usize;
        if target < self.index {
            return Err(state(format!(
                "driver queried backwards in time ({tau} < {})",
                self.grid_time()
            )));
        }
        while self.index < target {
            self.stepper.step(&mut self.rng, self.step)?;
            self.index += 1;
        }
        Ok(self.stepper.state())
    }
}

/// `t -> X(tau(t))` along a clock, reading the driver at left-nearest grid points.
pub fn time_changed_eval(driver: &mut LazyDriver, times: &[f64], tau: &[f64]) -> Result<Path> {
    if times.len() != tau.len() {
        return Err(Error::DimensionMismatch {
            expected: times.len(),
            found: tau.len(),
        });
    }
    let states = tau
        .iter()
        .map(|&s| driver.at(s).map(<[f64]>::to_vec))
        .collect::<Result<Vec<_>>>()?;
    Ok(Path {
        times: times.to_vec(),
        states,
    })
}

/// Time grid shared by the mark-mass path and its drivers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Euler step of the mark-mass process.
    pub step: f64,
    pub horizon: f64,
    /// Euler step of each driver on its own time axis.
    pub driver_step: f64,
    /// Drivers refuse clock values beyond this.
    pub driver_horizon: f64,
    /// Record every n-th step of the mark-mass grid (the final time is always kept).
    pub record_every: usize,
}

impl GridSpec {
    pub fn new(step: f64, horizon: f64) -> Self {
        Self {
            step,
            horizon,
            driver_step: step,
            driver_horizon: 1e4 * horizon,
            record_every: 1,
        }
    }

    pub fn with_record_every(mut self, every: usize) -> Self {
        self.record_every = every.max(1);
        self
    }

    pub fn with_driver_step(mut self, step: f64) -> Self {
        self.driver_step = step;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.driver_step > 0.0 && self.driver_horizon >= self.horizon) {
            return Err(param("driver step must be positive and driver horizon >= horizon"));
        }
        Ok(())
    }
}

/// Initial condition `(W(0), X_1(0), ..., X_H(0))` of a skew product.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProductInit {
    pub w: SimplexPoint,
    pub x: Vec<SimplexPoint>,
}

/// One recorded time of a skew-product trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkewProductState {
    pub t: f64,
    pub tau: Vec<f64>,
    pub w: Vec<f64>,
    /// Driver states `X_h(tau_h(t))`; ranked descending in the limit regime.
    pub x: Vec<Vec<f64>>,
    /// `z_h = w_h x_h`.
    pub z: Vec<Vec<f64>>,
}

impl SkewProductState {
    fn new(t: f64, tau: &[f64], w: &[f64], x: Vec<Vec<f64>>) -> Self {
        let z = x
            .iter()
            .zip(w)
            .map(|(xh, &wh)| xh.iter().map(|v| wh * v).collect())
            .collect();
        Self {
            t,
            tau: tau.to_vec(),
            w: w.to_vec(),
            x,
            z,
        }
    }

    pub fn mark_mass(&self, h: usize) -> f64 {
        self.z[h].iter().sum()
    }

    /// `phi_m(z_h) = sum_i z_hi^m`.
    pub fn power_sum(&self, h: usize, m: i32) -> f64 {
        self.z[h].iter().map(|v| v.powi(m)).sum()
    }
}

fn run_skew_product(
    theta: &ThetaParams,
    types: usize,
    w0: &[f64],
    x0: &[Vec<f64>],
    seed: SeedSpec,
    grid: &GridSpec,
    ranked: bool,
) -> Result<Vec<SkewProductState>> {
    theta.require_diffusion_valid()?;
    grid.validate()?;
    let marks = theta.marks();
    let w_spec = WfSpec::mark_mass(theta.clone(), grid.step, grid.horizon)?;
    let mut w_stepper = WfStepper::new(&w_spec, w0)?;
    let mut w_rng = seed.child(0).rng();
    let mut drivers = (0..marks)
        .map(|h| {
            LazyDriver::new(
                theta.get(h),
                types,
                &x0[h],
                grid.driver_step,
                grid.driver_horizon,
                seed.child(h as u64 + 1),
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut tau = vec![0.0; marks];
    let record = |t: f64, tau: &[f64], w: &[f64], drivers: &mut [LazyDriver]| {
        let x = drivers
            .iter_mut()
            .zip(tau)
            .map(|(d, &s)| {
                let mut v = d.at(s)?.to_vec();
                if ranked {
                    v.sort_by(|a, b| b.total_cmp(a));
                }
                Ok(v)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok::<_, Error>(SkewProductState::new(t, tau, w, x))
    };

    let n = w_spec.num_steps();
    let mut out = Vec::with_capacity(n / grid.record_every + 2);
    out.push(record(0.0, &tau, w0, &mut drivers)?);
    let mut prev = w0.to_vec();
    for k in 1..=n {
        let t = w_spec.time(k);
        let dt = w_spec.dt(k);
        w_stepper.step(&mut w_rng, dt)?;
        let w = w_stepper.state();
        for h in 0..marks {
            if w[h] <= 0.0 {
                return Err(state(format!(
                    "mark {} lost all mass at t = {t}; clock undefined",
                    h + 1
                )));
            }
            let next = tau[h] + 0.5 * dt * (1.0 / prev[h] + 1.0 / w[h]);
            check_clock_step(t, tau[h], next, h)?;
            tau[h] = next;
        }
        prev.copy_from_slice(w);
        if k % grid.record_every == 0 || k == n {
            out.push(record(t, &tau, &prev, &mut drivers)?);
        }
    }
    Ok(out)
}

/// `Z^K(t) = (W_h(t) X_h(tau_h(t)))_h` with independent drivers on disjoint streams:
/// `seed.child(0)` drives `W` and `seed.child(h + 1)` drives `X_h`.
pub fn build_skew_product(
    theta: &ThetaParams,
    types: usize,
    init: &ProductInit,
    seed: SeedSpec,
    grid: &GridSpec,
) -> Result<Vec<SkewProductState>> {
    if init.w.dim() != theta.marks() || init.x.len() != theta.marks() {
        return Err(Error::DimensionMismatch {
            expected: theta.marks(),
            found: init.x.len(),
        });
    }
    if !init.w.is_interior() {
        return Err(state("initial mark masses must be positive"));
    }
    if let Some(bad) = init.x.iter().find(|x| x.dim() != types) {
        return Err(Error::DimensionMismatch {
            expected: types,
            found: bad.dim(),
        });
    }
    let x0: Vec<Vec<f64>> = init.x.iter().map(|x| x.as_slice().to_vec()).collect();
    run_skew_product(theta, types, init.w.as_slice(), &x0, seed, grid, false)
}

/// Embeds a ranked frequency vector into `types` coordinates: coordinates past
/// the cut (and the tail) are lumped onto the largest atom, which keeps the
/// vector nonincreasing.
pub fn embed_ranked(atoms: &[f64], tail: f64, types: usize) -> Vec<f64> {
    let mut x = vec![0.0; types];
    let keep = atoms.len().min(types);
    x[..keep].copy_from_slice(&atoms[..keep]);
    x[0] += atoms[keep..].iter().sum::<f64>() + tail;
    let s: f64 = x.iter().sum();
    x.iter_mut().for_each(|v| *v /= s);
    x
}

/// Ranked finite-type surrogate of the limit diffusion started at `init`.
///
/// Each mark's Poisson–Dirichlet diffusion is replaced by a ranked symmetric
/// Wright–Fisher diffusion with `approx_types` types.
pub fn build_limit_process(
    theta: &ThetaParams,
    approx_types: usize,
    init: &KingmanPoint,
    seed: SeedSpec,
    grid: &GridSpec,
) -> Result<Vec<SkewProductState>> {
    if approx_types == 0 {
        return Err(param("approximation needs at least one type"));
    }
    if init.num_marks() != theta.marks() {
        return Err(Error::DimensionMismatch {
            expected: theta.marks(),
            found: init.num_marks(),
        });
    }
    let (w, x) = crate::simplex::decompose(init)?;
    let x0: Vec<Vec<f64>> = x
        .iter()
        .map(|xh| embed_ranked(xh.atoms(), xh.tail(), approx_types))
        .collect();
    run_skew_product(theta, approx_types, w.as_slice(), &x0, seed, grid, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sde::simulate_wf;

    fn theta(v: &[f64]) -> ThetaParams {
        ThetaParams::new(v.to_vec()).unwrap()
    }

    fn constant_path(w: Vec<f64>, n: usize, dt: f64) -> Path {
        Path {
            times: (0..=n).map(|k| k as f64 * dt).collect(),
            states: vec![w; n + 1],
        }
    }

    #[test]
    fn constant_clocks() {
        let c = integrate_clock(&constant_path(vec![0.5, 0.5], 100, 0.01)).unwrap();
        for (k, &t) in c.times.iter().enumerate() {
            assert!((c.tau[0][k] - 2.0 * t).abs() < 1e-13);
        }
        let c = integrate_clock(&constant_path(vec![1.0], 10, 0.1)).unwrap();
        assert!((c.tau[0][10] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn smooth_clock_is_second_order() {
        let w1 = |s: f64| (2.0 + s.sin()) / 4.0;
        let clock = |n: usize| {
            let dt = 1.0 / n as f64;
            let p = Path {
                times: (0..=n).map(|k| k as f64 * dt).collect(),
                states: (0..=n)
                    .map(|k| {
                        let a = w1(k as f64 * dt);
                        vec![a, 1.0 - a]
                    })
                    .collect(),
            };
            integrate_clock(&p).unwrap().tau[0][n]
        };
        let coarse = clock(100);
        let fine = clock(1000);
        let finer = clock(10_000);
        let e1 = (coarse - finer).abs();
        let e2 = (fine - finer).abs();
        assert!(e1 / e2 > 80.0, "ratio {}", e1 / e2);
    }

    #[test]
    fn zero_mass_rejected() {
        assert!(integrate_clock(&constant_path(vec![1.0, 0.0], 3, 0.1)).is_err());
    }

    #[test]
    fn identity_clock_reproduces_driver() {
        let spec = WfSpec::symmetric(2.0, 3, 0.01, 1.0).unwrap();
        let init = [0.2, 0.3, 0.5];
        let direct = simulate_wf(&spec, &init, SeedSpec::new(4, 0)).unwrap();
        let mut d = LazyDriver::new(2.0, 3, &init, 0.01, 10.0, SeedSpec::new(4, 0)).unwrap();
        let out = time_changed_eval(&mut d, &direct.times, &direct.times).unwrap();
        assert_eq!(out.states, direct.states);
    }

    #[test]
    fn doubled_clock_on_half_grid() {
        let spec = WfSpec::symmetric(2.0, 3, 0.005, 2.0).unwrap();
        let init = [0.2, 0.3, 0.5];
        let direct = simulate_wf(&spec, &init, SeedSpec::new(5, 0)).unwrap();
        let mut d = LazyDriver::new(2.0, 3, &init, 0.005, 10.0, SeedSpec::new(5, 0)).unwrap();
        let times: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let tau: Vec<f64> = times.iter().map(|t| 2.0 * t).collect();
        let out = time_changed_eval(&mut d, &times, &tau).unwrap();
        for (k, s) in out.states.iter().enumerate() {
            assert_eq!(s, &direct.states[4 * k]);
        }
    }

    #[test]
    fn exhausted_driver_errors() {
        let mut d = LazyDriver::new(1.0, 2, &[0.5, 0.5], 0.01, 1.0, SeedSpec::new(0, 0)).unwrap();
        assert!(matches!(d.at(2.0), Err(Error::DriverExhausted { .. })));
        d.at(0.5).unwrap();
        assert!(d.at(0.1).is_err());
    }

    #[test]
    fn single_mark_skew_product_is_driver() {
        let t = theta(&[2.0]);
        let init = ProductInit {
            w: SimplexPoint::new(vec![1.0]).unwrap(),
            x: vec![SimplexPoint::new(vec![0.25; 4]).unwrap()],
        };
        let grid = GridSpec::new(0.01, 0.5);
        let traj = build_skew_product(&t, 4, &init, SeedSpec::new(6, 0), &grid).unwrap();
        let spec = WfSpec::symmetric(2.0, 4, 0.01, 0.5).unwrap();
        let direct = simulate_wf(&spec, &[0.25; 4], SeedSpec::new(6, 0).child(1)).unwrap();
        for (s, x) in traj.iter().zip(&direct.states) {
            assert_eq!(s.w, vec![1.0]);
            assert_eq!(&s.z[0], x);
            assert!((s.tau[0] - s.t).abs() < 1e-12);
        }
    }

    #[test]
    fn skew_product_starts_at_composition() {
        let t = theta(&[2.0, 3.0]);
        let init = ProductInit {
            w: SimplexPoint::new(vec![0.4, 0.6]).unwrap(),
            x: vec![
                SimplexPoint::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap(),
                SimplexPoint::new(vec![0.25; 4]).unwrap(),
            ],
        };
        let grid = GridSpec::new(1e-3, 0.2).with_record_every(50);
        let traj = build_skew_product(&t, 4, &init, SeedSpec::new(7, 0), &grid).unwrap();
        let z0 = crate::simplex::compose_flat(&init.w, &init.x).unwrap();
        let flat0: Vec<f64> = traj[0].z.concat();
        assert_eq!(flat0.as_slice(), z0.as_slice());
        for s in &traj {
            let total: f64 = s.z.iter().flatten().sum();
            assert!((total - 1.0).abs() < 1e-12);
            for h in 0..2 {
                assert!(s.tau[h] >= s.t);
                for (zi, xi) in s.z[h].iter().zip(&s.x[h]) {
                    assert!((zi - s.w[h] * xi).abs() < 1e-12);
                }
            }
        }
        assert_eq!(traj.last().unwrap().t, 0.2);
    }

    #[test]
    fn low_theta_rejected() {
        let init = ProductInit {
            w: SimplexPoint::new(vec![0.5, 0.5]).unwrap(),
            x: vec![SimplexPoint::uniform(2), SimplexPoint::uniform(2)],
        };
        let r = build_skew_product(&theta(&[0.9, 2.0]), 2, &init, SeedSpec::new(0, 0), &GridSpec::new(0.01, 0.1));
        assert!(r.is_err());
    }

    #[test]
    fn limit_process_single_type_is_mark_mass() {
        let t = theta(&[2.0, 3.0]);
        let z = crate::sampling::sample_mpd(
            &crate::sampling::MpdSpec {
                theta: t.clone(),
                truncation: 100,
            },
            SeedSpec::new(1, 0),
        )
        .unwrap();
        let grid = GridSpec::new(1e-3, 0.1).with_record_every(10);
        let traj = build_limit_process(&t, 1, &z, SeedSpec::new(2, 0), &grid).unwrap();
        for s in &traj {
            assert_eq!(s.z[0], vec![s.w[0]]);
            assert_eq!(s.z[1], vec![s.w[1]]);
        }
    }

    #[test]
    fn embedding_lumps_onto_first_atom() {
        let x = embed_ranked(&[0.5, 0.25, 0.125, 0.0625], 0.0625, 2);
        assert_eq!(x, vec![0.75, 0.25]);
        let x = embed_ranked(&[0.5, 0.5], 0.0, 4);
        assert_eq!(x, vec![0.5, 0.5, 0.0, 0.0]);
    }
}
