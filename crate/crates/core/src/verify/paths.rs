//! Path-level checks: Monte-Carlo moments along simulated trajectories against
//! their moment ODEs, distributional equality of the skew product and the flat
//! diffusion, and positivity of the mark masses.

use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::sampling::{replicate, SeedSpec};
use crate::sde::{Projection, Scheme, WfSpec, WfStepper};
use crate::simplex::{compose_flat, KingmanPoint, ThetaParams};
use crate::timechange::{build_limit_process, build_skew_product, GridSpec, ProductInit};

use super::montecarlo::KS_ALPHA;
use super::stats::{ks_two_sample, mean_se};
use super::TestReport;

/// Process and functional of a moment-ODE check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum OdeProcess {
    /// `phi_2` of the symmetric `K`-type diffusion with total rate `theta`:
    /// `E phi_2(t) = a + (phi_2(0) - a) e^{-(1 + theta) t}`, `a = (1 + theta/K) / (1 + theta)`.
    SymmetricPhi2 { theta: f64, types: usize, init: Vec<f64> },
    /// First mark mass of the mark-mass diffusion:
    /// `E w_1(t) = theta_1/theta_bar + (w_1(0) - theta_1/theta_bar) e^{-theta_bar t / 2}`.
    MarkMass { theta: ThetaParams, init: Vec<f64> },
    /// `|z_1|` of the ranked limit surrogate; same ODE as `MarkMass`.
    LimitMass {
        theta: ThetaParams,
        approx_types: usize,
        init: KingmanPoint,
    },
}

impl OdeProcess {
    fn exact(&self, t: f64) -> f64 {
        match self {
            OdeProcess::SymmetricPhi2 { theta, types, init } => {
                let a = (1.0 + theta / *types as f64) / (1.0 + theta);
                let phi0: f64 = init.iter().map(|x| x * x).sum();
                a + (phi0 - a) * (-(1.0 + theta) * t).exp()
            }
            OdeProcess::MarkMass { theta, init } => mass_ode(theta, init[0], t),
            OdeProcess::LimitMass { theta, init, .. } => mass_ode(theta, init.marks()[0].mass(), t),
        }
    }

    fn label(&self) -> String {
        match self {
            OdeProcess::SymmetricPhi2 { theta, types, .. } => format!("ode phi2 theta={theta} K={types}"),
            OdeProcess::MarkMass { .. } => "ode w1".to_string(),
            OdeProcess::LimitMass { approx_types, .. } => format!("ode limit |z1| K'={approx_types}"),
        }
    }
}

fn mass_ode(theta: &ThetaParams, w0: f64, t: f64) -> f64 {
    let c = theta.get(0) / theta.theta_bar();
    c + (w0 - c) * (-0.5 * theta.theta_bar() * t).exp()
}

/// Grid indices `round(t / step)` of the requested times.
fn time_indices(times: &[f64], step: f64) -> Result<Vec<usize>> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(param("observation times must be nonnegative"));
    }
    Ok(times.iter().map(|t| (t / step).round() as usize).collect())
}

/// Runs one Euler path and records `functional(state)` at the grid indices.
fn observe_path(
    spec: &WfSpec,
    init: &[f64],
    indices: &[usize],
    seed: SeedSpec,
    functional: impl Fn(&[f64]) -> f64,
) -> Result<Vec<f64>> {
    let mut stepper = WfStepper::new(spec, init)?;
    let mut rng = seed.rng();
    let last = indices.iter().copied().max().unwrap_or(0);
    let mut values = vec![0.0; indices.len()];
    for k in 0..=last {
        if k > 0 {
            stepper.step(&mut rng, spec.step)?;
        }
        for (slot, &idx) in indices.iter().enumerate() {
            if idx == k {
                values[slot] = functional(stepper.state());
            }
        }
    }
    Ok(values)
}

/// Monte-Carlo `E f(X_t)` from `n` paths against the exact moment ODE, one
/// report per time. The threshold is `max(3 SE, rel_budget |exact|)`, where the
/// relative budget absorbs the `O(dt)` discretization bias. `scheme` applies to
/// the single-simplex processes. `LimitMass` always goes through the skew product.
pub fn moment_ode_check(
    process: &OdeProcess,
    times: &[f64],
    step: f64,
    scheme: Scheme,
    n: usize,
    rel_budget: f64,
    seed: SeedSpec,
) -> Result<Vec<TestReport>> {
    let indices = time_indices(times, step)?;
    let horizon = indices.iter().copied().max().unwrap_or(0).max(1) as f64 * step;
    let rows: Vec<Result<Vec<f64>>> = match process {
        OdeProcess::SymmetricPhi2 { theta, types, init } => {
            let spec = WfSpec::symmetric(*theta, *types, step, horizon)?.with_scheme(scheme);
            replicate(seed, n, |r, _| {
                observe_path(&spec, init, &indices, seed.child(r as u64), |x| x.iter().map(|v| v * v).sum())
            })
        }
        OdeProcess::MarkMass { theta, init } => {
            let spec = WfSpec::mark_mass(theta.clone(), step, horizon)?.with_scheme(scheme);
            replicate(seed, n, |r, _| observe_path(&spec, init, &indices, seed.child(r as u64), |w| w[0]))
        }
        OdeProcess::LimitMass {
            theta,
            approx_types,
            init,
        } => {
            let grid = GridSpec::new(step, horizon);
            replicate(seed, n, |r, _| {
                let traj = build_limit_process(theta, *approx_types, init, seed.child(r as u64), &grid)?;
                Ok(indices.iter().map(|&k| traj[k].mark_mass(0)).collect())
            })
        }
    };
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(times
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let values: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            let m = mean_se(&values);
            let exact = process.exact(indices[j] as f64 * step);
            let se = if m.se.is_finite() { m.se } else { 0.0 };
            let threshold = (3.0 * se).max(rel_budget * exact.abs());
            TestReport::new(format!("{} t={t}", process.label()), m.mean - exact, threshold)
                .with_se(se)
                .with_replicates(n, seed)
                .with_detail(format!(
                    "mean {:.6}, exact {:.6}, dt {step:e}, bias budget {rel_budget} relative",
                    m.mean, exact
                ))
        })
        .collect())
}

/// Two-sample KS tests between the flat `HK`-type diffusion started at
/// `S(init)` and the skew product `(W_h X_h(tau_h))_h` built from `init`, on
/// `|z_1|` and `phi_2(z_h)` for every mark, at each time.
pub fn skew_product_equality(
    theta: &ThetaParams,
    types: usize,
    init: &ProductInit,
    times: &[f64],
    step: f64,
    n: usize,
    seed: SeedSpec,
) -> Result<Vec<TestReport>> {
    let marks = theta.marks();
    let indices = time_indices(times, step)?;
    let last = indices.iter().copied().max().unwrap_or(0).max(1);
    let horizon = last as f64 * step;
    let z0 = compose_flat(&init.w, &init.x)?;
    let functionals = |z: &[f64]| -> Vec<f64> {
        let mut out = vec![z[..types].iter().sum()];
        out.extend((0..marks).map(|h| z[h * types..(h + 1) * types].iter().map(|v| v * v).sum::<f64>()));
        out
    };

    let flat_spec = WfSpec::flat(theta.clone(), types, step, horizon)?;
    let s_flat = seed.child(0);
    let flat: Vec<Result<Vec<Vec<f64>>>> = replicate(s_flat, n, |r, _| {
        let mut stepper = WfStepper::new(&flat_spec, z0.as_slice())?;
        let mut rng = s_flat.child(r as u64).rng();
        let mut rec = vec![Vec::new(); indices.len()];
        for k in 0..=last {
            if k > 0 {
                stepper.step(&mut rng, step)?;
            }
            for (slot, &idx) in indices.iter().enumerate() {
                if idx == k {
                    rec[slot] = functionals(stepper.state());
                }
            }
        }
        Ok(rec)
    });
    let flat = flat.into_iter().collect::<Result<Vec<_>>>()?;

    let s_skew = seed.child(1);
    let grid = GridSpec::new(step, horizon);
    let skew: Vec<Result<Vec<Vec<f64>>>> = replicate(s_skew, n, |r, _| {
        let traj = build_skew_product(theta, types, init, s_skew.child(r as u64), &grid)?;
        Ok(indices
            .iter()
            .map(|&k| {
                let z: Vec<f64> = traj[k].z.concat();
                functionals(&z)
            })
            .collect())
    });
    let skew = skew.into_iter().collect::<Result<Vec<_>>>()?;

    let mut names = vec!["|z1|".to_string()];
    names.extend((1..=marks).map(|h| format!("phi2(z{h})")));
    let mut out = Vec::new();
    for (j, &t) in times.iter().enumerate() {
        for (q, name) in names.iter().enumerate() {
            let a: Vec<f64> = flat.iter().map(|r| r[j][q]).collect();
            let b: Vec<f64> = skew.iter().map(|r| r[j][q]).collect();
            let ks = ks_two_sample(&a, &b, KS_ALPHA);
            out.push(
                TestReport::new(format!("skew-vs-flat {name} t={t}"), ks.d, ks.critical_d)
                    .with_p_value(ks.p_value)
                    .with_replicates(n, seed)
                    .with_detail(format!("p = {:.4}", ks.p_value)),
            );
        }
    }
    Ok(out)
}

/// Runs `n` mark-mass paths from `init` and counts those whose smallest mark
/// mass after any step is zero. The statistic is that count, the threshold zero.
pub fn entrance_boundary_check(
    theta: &ThetaParams,
    init: &[f64],
    step: f64,
    horizon: f64,
    projection: Projection,
    n: usize,
    seed: SeedSpec,
) -> Result<TestReport> {
    let spec = WfSpec::mark_mass(theta.clone(), step, horizon)?.with_projection(projection);
    let steps = spec.num_steps();
    let minima: Vec<Result<f64>> = replicate(seed, n, |r, _| {
        let mut stepper = WfStepper::new(&spec, init)?;
        let mut rng = seed.child(r as u64).rng();
        let mut lowest = f64::INFINITY;
        for k in 1..=steps {
            stepper.step(&mut rng, spec.dt(k))?;
            lowest = lowest.min(stepper.state().iter().copied().fold(f64::INFINITY, f64::min));
        }
        Ok(lowest)
    });
    let minima = minima.into_iter().collect::<Result<Vec<_>>>()?;
    let zeros = minima.iter().filter(|&&m| m <= 0.0).count();
    let overall = minima.iter().copied().fold(f64::INFINITY, f64::min);
    let label = match projection {
        Projection::Clip => "clip",
        Projection::Reflect => "reflect",
    };
    if n == 0 {
        return Err(Error::InvalidParameter("need at least one path".into()));
    }
    Ok(TestReport::new(format!("entrance {label} paths with zero mass"), zeros as f64, 0.0)
        .with_replicates(n, seed)
        .with_detail(format!("smallest post-step mark mass {overall:.3e}")))
}
