//! Subcommand bodies. Each returns the test reports it produced (empty for
//! pure data commands); `main` turns unexpected outcomes into exit code 1.

use multipd::generators::{check_convergence_bound, DriftSign, GeneratorKind, MarkFactor, TestFunction};
use multipd::sampling::{
    replicate, Dirichlet, GroupedDirichlet, MpdSpec, MultiplePd, PoissonDirichlet,
};
use multipd::sde::{simulate_wf, Scheme, WfSpec};
use multipd::timechange::{build_limit_process, build_skew_product, GridSpec, ProductInit, SkewProductState};
use multipd::verify::exact::summarize;
use multipd::verify::{
    boundary_demo, exact_stationarity_bk, intertwining_suite, kingman_limit_sweep, mc_stationarity_b,
    moment_ode_check, render_table, selfsimilarity_test, stationary_moments, OdeProcess, TestReport,
};
use multipd::{OrderedMassVector, SeedSpec, SimplexPoint, ThetaParams};

use crate::config::{KindArg, RunConfig, SchemeArg};
use crate::output::{col, num, numbered, write_reports, Column, CsvSink};
use crate::CliError;

/// Stream ids of the verification suites; `verify all` reuses them, so a suite
/// gives the same numbers alone or inside `all`.
mod stream {
    pub const INTERTWINE: u64 = 1;
    pub const STATIONARY_MC: u64 = 3;
    pub const MOMENTS: u64 = 4;
    pub const SELFSIM: u64 = 8;
    pub const SWEEP: u64 = 9;
}

fn theta(cfg: &RunConfig) -> Result<ThetaParams, CliError> {
    Ok(ThetaParams::new(cfg.theta.clone())?)
}

/// Top `top` atoms of a ranked vector, zero padded, plus the remaining mass.
fn top_atoms(v: &OrderedMassVector, top: usize) -> (Vec<String>, f64) {
    let atoms = v.atoms();
    let shown: Vec<String> = (0..top).map(|i| num(atoms.get(i).copied().unwrap_or(0.0))).collect();
    let rest = atoms.iter().skip(top).sum::<f64>() + v.tail();
    (shown, rest)
}

// ---------------------------------------------------------------- sample

pub fn sample_dirichlet(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let d = Dirichlet::new(cfg.theta.clone())?;
    let mut columns = vec![col("replicate", "draw index r; uses stream (seed, r)")];
    columns.extend(numbered("x", d.dim(), "coordinate of the Dir(alpha) draw, alpha = --theta"));
    let draws = replicate(SeedSpec::new(cfg.seed, 0), cfg.n, |_, rng| d.sample(rng));
    let mut out = CsvSink::create(cfg, &columns)?;
    for (r, x) in draws.iter().enumerate() {
        let mut row = vec![r.to_string()];
        row.extend(x.iter().map(|v| num(*v)));
        out.row(&row)?;
    }
    out.finish()?;
    Ok(Vec::new())
}

pub fn sample_pd(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let [t] = cfg.theta[..] else {
        return Err(CliError::Config("sample pd takes a single theta".into()));
    };
    let pd = PoissonDirichlet::new(t, cfg.truncation)?;
    let mut columns = vec![col("replicate", "draw index r; uses stream (seed, r)")];
    columns.extend(numbered("a", cfg.top, "ranked PD(theta) atom, zero padded"));
    columns.push(col("rest", "mass beyond the listed atoms, including the truncation tail"));
    let draws = replicate(SeedSpec::new(cfg.seed, 0), cfg.n, |_, rng| pd.sample(rng));
    let mut out = CsvSink::create(cfg, &columns)?;
    for (r, v) in draws.iter().enumerate() {
        let (atoms, rest) = top_atoms(v, cfg.top);
        let mut row = vec![r.to_string()];
        row.extend(atoms);
        row.push(num(rest));
        out.row(&row)?;
    }
    out.finish()?;
    Ok(Vec::new())
}

pub fn sample_mpd(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let sampler = MultiplePd::new(&MpdSpec {
        theta: theta(cfg)?,
        truncation: cfg.truncation,
    })?;
    let mut columns = vec![
        col("replicate", "draw index r; uses stream (seed, r)"),
        col("mark", "mark h (1-based)"),
        col("mass", "|z_h|, the mass of mark h"),
    ];
    columns.extend(numbered("a", cfg.top, "ranked atom z_hi of mark h (absolute scale), zero padded"));
    columns.push(col("rest", "mass of mark h beyond the listed atoms, including the truncation tail"));
    let draws = replicate(SeedSpec::new(cfg.seed, 0), cfg.n, |_, rng| sampler.sample(rng));
    let mut out = CsvSink::create(cfg, &columns)?;
    for (r, z) in draws.iter().enumerate() {
        for (h, mark) in z.marks().iter().enumerate() {
            let (atoms, rest) = top_atoms(mark, cfg.top);
            let mut row = vec![r.to_string(), (h + 1).to_string(), num(mark.mass())];
            row.extend(atoms);
            row.push(num(rest));
            out.row(&row)?;
        }
    }
    out.finish()?;
    Ok(Vec::new())
}

pub fn sample_grouped(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let k = cfg.first_k();
    if k < 2 {
        return Err(CliError::Config("sample grouped needs K >= 2".into()));
    }
    let g = GroupedDirichlet::new(&theta(cfg)?, k)?;
    let mut columns = vec![
        col("replicate", "draw index r; uses stream (seed, r)"),
        col("mark", "mark h (1-based)"),
        col("mass", "upsilon_h: total of block h of the flat Dir_HK draw"),
    ];
    columns.extend(numbered("xi", k, "block h renormalized to the simplex (unranked)"));
    let draws = replicate(SeedSpec::new(cfg.seed, 0), cfg.n, |_, rng| g.sample_grouped(rng));
    let mut out = CsvSink::create(cfg, &columns)?;
    for (r, s) in draws.into_iter().enumerate() {
        let s = s?;
        for (h, xi) in s.xi.iter().enumerate() {
            let mut row = vec![r.to_string(), (h + 1).to_string(), num(s.upsilon.as_slice()[h])];
            row.extend(xi.as_slice().iter().map(|v| num(*v)));
            out.row(&row)?;
        }
    }
    out.finish()?;
    Ok(Vec::new())
}

// ---------------------------------------------------------------- simulate

fn scheme(cfg: &RunConfig) -> Scheme {
    match cfg.scheme {
        SchemeArg::Euler => Scheme::Euler,
        SchemeArg::BesselSplit => Scheme::BesselSplit,
    }
}

fn init_or_uniform(cfg: &RunConfig, dim: usize) -> Result<Vec<f64>, CliError> {
    match &cfg.init {
        Some(v) if v.len() != dim => Err(CliError::Config(format!(
            "--init has {} coordinates, the state space needs {dim}",
            v.len()
        ))),
        Some(v) => Ok(SimplexPoint::new(v.clone())?.into_vec()),
        None => Ok(vec![1.0 / dim as f64; dim]),
    }
}

pub fn simulate_wf_cmd(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let th = theta(cfg)?;
    let spec = match cfg.kind {
        KindArg::Mass => {
            cfg.require_diffusion_theta()?;
            WfSpec::mark_mass(th, cfg.step, cfg.horizon)?
        }
        KindArg::Symmetric => {
            let [t] = cfg.theta[..] else {
                return Err(CliError::Config("the symmetric diffusion takes a single theta".into()));
            };
            WfSpec::symmetric(t, cfg.first_k(), cfg.step, cfg.horizon)?
        }
        KindArg::Flat => WfSpec::flat(th, cfg.first_k(), cfg.step, cfg.horizon)?,
    }
    .with_scheme(scheme(cfg));
    let init = init_or_uniform(cfg, spec.dims())?;
    let mut columns = vec![
        col("replicate", "path index r; uses stream (seed, r)"),
        col("t", "time"),
    ];
    columns.extend(numbered("x", spec.dims(), "state coordinate"));
    let seed = SeedSpec::new(cfg.seed, 0);
    let paths = replicate(seed, cfg.n, |r, _| simulate_wf(&spec, &init, seed.child(r as u64)));
    let mut out = CsvSink::create(cfg, &columns)?;
    for (r, p) in paths.into_iter().enumerate() {
        let p = p?;
        for (t, x) in p.times.iter().zip(&p.states) {
            let mut row = vec![r.to_string(), num(*t)];
            row.extend(x.iter().map(|v| num(*v)));
            out.row(&row)?;
        }
    }
    out.finish()?;
    Ok(Vec::new())
}

fn skew_columns(k: usize, ranked: bool) -> Vec<Column> {
    let mut columns = vec![
        col("replicate", "path index r"),
        col("t", "time"),
        col("mark", "mark h (1-based)"),
        col("w", "mark mass W_h(t)"),
        col("tau", "clock tau_h(t) = int_0^t ds / W_h(s)"),
    ];
    let what = if ranked {
        "ranked driver frequency X_hi(tau_h(t))"
    } else {
        "driver frequency X_hi(tau_h(t)); z_hi = w * x_hi"
    };
    columns.extend(numbered("x", k, what));
    columns
}

fn write_skew(cfg: &RunConfig, k: usize, ranked: bool, runs: Vec<multipd::Result<Vec<SkewProductState>>>) -> Result<(), CliError> {
    let mut out = CsvSink::create(cfg, &skew_columns(k, ranked))?;
    for (r, states) in runs.into_iter().enumerate() {
        for s in states? {
            for h in 0..s.w.len() {
                let mut row = vec![r.to_string(), num(s.t), (h + 1).to_string(), num(s.w[h]), num(s.tau[h])];
                row.extend(s.x[h].iter().map(|v| num(*v)));
                out.row(&row)?;
            }
        }
    }
    out.finish()
}

pub fn simulate_skew(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    cfg.require_diffusion_theta()?;
    let th = theta(cfg)?;
    let k = cfg.first_k();
    let init = ProductInit {
        w: SimplexPoint::new(init_or_uniform(cfg, th.marks())?)?,
        x: vec![SimplexPoint::uniform(k); th.marks()],
    };
    let grid = GridSpec::new(cfg.step, cfg.horizon);
    let seed = SeedSpec::new(cfg.seed, 0);
    let runs = replicate(seed, cfg.n, |r, _| build_skew_product(&th, k, &init, seed.child(r as u64), &grid));
    write_skew(cfg, k, false, runs)?;
    Ok(Vec::new())
}

pub fn simulate_limit(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    cfg.require_diffusion_theta()?;
    let th = theta(cfg)?;
    let k = cfg.first_k();
    let start = MultiplePd::new(&MpdSpec {
        theta: th.clone(),
        truncation: cfg.truncation,
    })?;
    let grid = GridSpec::new(cfg.step, cfg.horizon);
    let seed = SeedSpec::new(cfg.seed, 0);
    // path r starts from a stationary draw on stream child(r).child(0) and runs on child(r).child(1)
    let runs = replicate(seed, cfg.n, |r, _| {
        let own = seed.child(r as u64);
        let init = start.sample(&mut own.child(0).rng());
        build_limit_process(&th, k, &init, own.child(1), &grid)
    });
    write_skew(cfg, k, true, runs)?;
    Ok(Vec::new())
}

// ---------------------------------------------------------------- verify

fn finish_reports(cfg: &RunConfig, reports: Vec<TestReport>) -> Result<Vec<TestReport>, CliError> {
    print!("{}", render_table(&reports));
    if let Some(path) = &cfg.report {
        write_reports(path, &reports)?;
    }
    Ok(reports)
}

fn intertwine(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    Ok(intertwining_suite(
        &theta(cfg)?,
        &cfg.types,
        cfg.degree,
        cfg.points,
        SeedSpec::new(cfg.seed, stream::INTERTWINE),
    )?)
}

fn stationary_exact(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let th = theta(cfg)?;
    let mut out = Vec::new();
    for &k in &cfg.types {
        let plus = exact_stationarity_bk(&th, k, cfg.degree, DriftSign::Plus)?;
        let minus = exact_stationarity_bk(&th, k, cfg.degree, DriftSign::Minus)?;
        out.push(summarize(format!("stationarity B^K K={k} deg<={}", cfg.degree), &plus));
        out.push(summarize(format!("reversed drift sign K={k} deg<={}", cfg.degree), &minus).expecting_failure());
    }
    Ok(out)
}

/// `|z_h|` and `phi2(z_h)` per mark, and for two or more marks the products
/// `|z_1||z_2|` and `phi2(z_1) phi2(z_2)`.
fn limit_functions(marks: usize) -> Result<Vec<TestFunction>, CliError> {
    let mut fs = Vec::new();
    for h in 0..marks {
        fs.push(TestFunction::mass_power(h, 1, marks));
        fs.push(TestFunction::phi(h, 2, marks));
    }
    if marks >= 2 {
        let pair = |m0: i32, mv: Vec<u32>| -> multipd::Result<TestFunction> {
            let mut factors = vec![MarkFactor::new(m0, mv.clone())?, MarkFactor::new(m0, mv)?];
            factors.extend((2..marks).map(|_| MarkFactor::new(0, vec![]).expect("constant factor")));
            TestFunction::new(factors)
        };
        fs.push(pair(1, vec![])?);
        fs.push(pair(0, vec![2])?);
    }
    Ok(fs)
}

fn stationary_mc(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let th = theta(cfg)?;
    let seed = SeedSpec::new(cfg.seed, stream::STATIONARY_MC);
    let fs = limit_functions(th.marks())?;
    let mut out = mc_stationarity_b(&th, &fs, GeneratorKind::B, cfg.n, cfg.truncation, seed)?;
    // contrast: the uncorrected operator on |z_1| is expected to fail
    out.extend(mc_stationarity_b(&th, &fs[..1], GeneratorKind::BHat, cfg.n, cfg.truncation, seed)?);
    Ok(out)
}

fn moments(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let th = theta(cfg)?;
    let seed = SeedSpec::new(cfg.seed, stream::MOMENTS);
    let mut out = stationary_moments(&th, cfg.n, cfg.truncation, seed.child(0))?;
    if th.diffusion_valid() {
        let p = OdeProcess::MarkMass {
            theta: th.clone(),
            init: init_or_uniform(cfg, th.marks())?,
        };
        out.extend(moment_ode_check(&p, &cfg.times, cfg.step, scheme(cfg), cfg.paths, 0.0, seed.child(1))?);
    } else {
        eprintln!("note: moment-ODE path check skipped (needs every theta_h >= 1)");
    }
    Ok(out)
}

fn selfsim(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let th = theta(cfg)?;
    let seed = SeedSpec::new(cfg.seed, stream::SELFSIM);
    let mut out = Vec::new();
    for (i, &k) in cfg.types.iter().enumerate() {
        let mut r = selfsimilarity_test(&th, k, cfg.n, seed.child(i as u64))?;
        r.iter_mut().for_each(|rep| rep.name = format!("K={k} {}", rep.name));
        out.extend(r);
    }
    Ok(out)
}

fn sweep(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let th = theta(cfg)?;
    let seed = SeedSpec::new(cfg.seed, stream::SWEEP);
    let mut out = kingman_limit_sweep(&th, &cfg.types, cfg.n, seed.child(0))?;
    let f = TestFunction::phi(0, 2, th.marks());
    for row in check_convergence_bound(&th, &f, &cfg.types, cfg.points, seed.child(1))? {
        out.push(TestReport::new(
            format!("generator convergence phi2(z1) K={}", row.types),
            row.sup_deviation,
            row.bound,
        ));
    }
    Ok(out)
}

pub fn verify_intertwine(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let r = intertwine(cfg)?;
    finish_reports(cfg, r)
}

pub fn verify_stationary_exact(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let r = stationary_exact(cfg)?;
    finish_reports(cfg, r)
}

pub fn verify_stationary_mc(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let r = stationary_mc(cfg)?;
    finish_reports(cfg, r)
}

pub fn verify_moments(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let r = moments(cfg)?;
    finish_reports(cfg, r)
}

pub fn verify_selfsim(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let r = selfsim(cfg)?;
    finish_reports(cfg, r)
}

pub fn verify_sweep(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let r = sweep(cfg)?;
    finish_reports(cfg, r)
}

/// Every suite in turn, with the intertwining check at degree <= 4 and the
/// exact stationarity check at degree <= 3 unless `--degree` says otherwise.
pub fn verify_all(cfg: &RunConfig, degree_given: bool) -> Result<Vec<TestReport>, CliError> {
    let mut reports = Vec::new();
    let with_degree = |d: u32| RunConfig {
        degree: if degree_given { cfg.degree } else { d },
        ..cfg.clone()
    };
    reports.extend(intertwine(&with_degree(4))?);
    reports.extend(stationary_exact(&with_degree(3))?);
    reports.extend(stationary_mc(cfg)?);
    reports.extend(moments(cfg)?);
    reports.extend(selfsim(cfg)?);
    reports.extend(sweep(cfg)?);
    finish_reports(cfg, reports)
}

// ---------------------------------------------------------------- demo

pub fn demo_boundary(cfg: &RunConfig) -> Result<Vec<TestReport>, CliError> {
    let d = boundary_demo(cfg.depth, cfg.n_max)?;
    let mut columns = vec![
        col("n", "term index"),
        col("parity", "odd or even n"),
        col("mark", "mark h (1-based)"),
        col("w", "w_h = |z_h| of the term"),
    ];
    columns.extend(numbered("x", cfg.depth, "atom x_hi of S^-1 applied to the term"));
    columns.push(col("x_tail", "frequency mass beyond the listed atoms"));
    let mut out = CsvSink::create(cfg, &columns)?;
    for term in &d.terms {
        let parity = if term.n % 2 == 0 { "even" } else { "odd" };
        for (h, xh) in term.x.iter().enumerate() {
            let mut row = vec![term.n.to_string(), parity.to_string(), (h + 1).to_string(), num(term.w.as_slice()[h])];
            row.extend(xh.atoms().iter().map(|v| num(*v)));
            row.push(num(xh.tail()));
            out.row(&row)?;
        }
    }
    out.finish()?;
    for l in &d.limits {
        eprintln!(
            "{} n -> w = ({:.6}, {:.6}); extrapolated from n = {:?}; distance to the limit {:.3e}",
            l.parity, l.w[0], l.w[1], l.n_pair, l.error
        );
    }
    let reports = vec![d.report];
    if cfg.out.is_some() {
        print!("{}", render_table(&reports));
    } else {
        eprint!("{}", render_table(&reports));
    }
    if let Some(path) = &cfg.report {
        write_reports(path, &reports)?;
    }
    Ok(reports)
}
