//! Exact evaluation of the generators on their test-function algebras.
//!
//! | kind        | acts on                         | state                  |
//! |-------------|---------------------------------|------------------------|
//! | `A0`        | mark-mass monomials `w^p`       | masses / product point |
//! | `AhK`       | frequencies of mark `h`         | product point          |
//! | `AK`        | `A0 + sum_h w_h^{-1} A_h^K`      | product point          |
//! | `BK`        | flat `HK`-type operator         | flat point             |
//! | `B`         | limit operator with mass term   | Kingman / flat point   |
//! | `BHat`      | limit operator without it       | Kingman / flat point   |
//! | `BDecomposed` | `sum_h B_h - interaction`     | Kingman / flat point   |
//!
//! All values are closed forms (see [`powersum`]); [`partials`] provides an
//! independent route through explicit derivatives and finite differences.

pub mod partials;
pub mod poly;
pub mod powersum;

use rand::Rng;
use serde::Serialize;

use crate::error::{domain, param, Error, Result};
use crate::sampling::{Dirichlet, SeedSpec};
use crate::simplex::{rank_blocks, FlatSimplexPoint, KingmanPoint, ThetaParams};

pub use poly::{wf_operator, DriftSign, Exponents, Poly};
pub use powersum::{MarkFactor, MarkStats, TestFunction};

use powersum::{check_floor, eval_marks, stats_order, BlockOp, Mutation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GeneratorKind {
    A0,
    AhK { mark: usize, types: usize },
    AK { types: usize },
    BK { types: usize },
    B,
    BHat,
    BDecomposed,
}

/// A generator together with its mutation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub kind: GeneratorKind,
    pub theta: ThetaParams,
}

impl Generator {
    pub fn new(kind: GeneratorKind, theta: ThetaParams) -> Self {
        Self { kind, theta }
    }

    pub fn apply(&self, f: &TestFunction, point: &Point<'_>) -> Result<f64> {
        apply_generator(self, f, point)
    }
}

/// A state on which test functions and generators are evaluated.
#[derive(Debug, Clone, Copy)]
pub enum Point<'a> {
    /// Mark masses `w` only.
    Masses(&'a [f64]),
    /// Product point `(w, x_1, ..., x_H)`.
    Product { w: &'a [f64], x: &'a [Vec<f64>] },
    /// Flat `HK` point; its blocks are read as the atoms of each mark.
    Flat(&'a FlatSimplexPoint),
    Kingman(&'a KingmanPoint),
}

fn mark_stats(point: &Point<'_>, order: u32) -> Result<Vec<MarkStats>> {
    match *point {
        Point::Flat(z) => Ok((0..z.marks())
            .map(|h| MarkStats::new(z.block(h), 0.0, order))
            .collect()),
        Point::Kingman(z) => Ok(z
            .marks()
            .iter()
            .map(|m| MarkStats::new(m.atoms(), m.tail(), order))
            .collect()),
        Point::Product { x, .. } => Ok(x.iter().map(|xh| MarkStats::new(xh, 0.0, order)).collect()),
        Point::Masses(_) => Err(param("a mass-only point carries no frequencies")),
    }
}

fn masses<'a>(point: &Point<'a>) -> Result<&'a [f64]> {
    match *point {
        Point::Masses(w) | Point::Product { w, .. } => Ok(w),
        _ => Err(param("operator needs mark masses (a masses or product point)")),
    }
}

fn check_marks(f: &TestFunction, marks: usize) -> Result<()> {
    if f.num_marks() != marks {
        return Err(Error::DimensionMismatch {
            expected: marks,
            found: f.num_marks(),
        });
    }
    Ok(())
}

/// The mass monomial `prod w_h^{p_h}` of `f` as mark factors over singleton blocks.
fn mass_part(f: &TestFunction) -> TestFunction {
    TestFunction::new(
        (0..f.num_marks())
            .map(|h| MarkFactor {
                m0: f.mass_exponent(h),
                mvec: Vec::new(),
            })
            .collect(),
    )
    .expect("at least one mark")
}

fn frequency_part(f: &TestFunction) -> TestFunction {
    TestFunction::new(f.mark_factors().to_vec()).expect("at least one mark")
}

fn mass_stats(w: &[f64]) -> Vec<MarkStats> {
    w.iter().map(|&v| MarkStats::single(v)).collect()
}

fn a0_op(theta: &ThetaParams) -> BlockOp {
    BlockOp {
        group: vec![true; theta.marks()],
        mutation: theta
            .theta()
            .iter()
            .map(|&t| Mutation {
                rate: t,
                types: Some(1),
            })
            .collect(),
        total: theta.theta_bar(),
    }
}

fn ahk_op(theta: &ThetaParams, mark: usize, types: usize) -> BlockOp {
    let mut group = vec![false; theta.marks()];
    group[mark] = true;
    let mut mutation = vec![
        Mutation {
            rate: 0.0,
            types: None
        };
        theta.marks()
    ];
    mutation[mark] = Mutation {
        rate: theta.get(mark),
        types: Some(types),
    };
    BlockOp {
        group,
        mutation,
        total: theta.get(mark),
    }
}

fn limit_op(theta: &ThetaParams, group: Vec<bool>, corrected: bool) -> BlockOp {
    BlockOp {
        group,
        mutation: theta
            .theta()
            .iter()
            .map(|&t| Mutation {
                rate: if corrected { t } else { 0.0 },
                types: None,
            })
            .collect(),
        total: theta.theta_bar(),
    }
}

/// Value of `f` at `point` (mass monomial included on product points).
pub fn eval_testfunction(f: &TestFunction, point: &Point<'_>) -> Result<f64> {
    let w_value = |w: &[f64]| -> Result<f64> {
        check_marks(f, w.len())?;
        Ok(eval_marks(&mass_part(f), &mass_stats(w)))
    };
    match point {
        Point::Masses(w) => {
            if f.mark_factors().iter().any(|m| !m.is_trivial()) {
                return Err(param("a mass-only point cannot evaluate frequency factors"));
            }
            w_value(w)
        }
        _ => {
            let stats = mark_stats(point, f.max_order().max(2))?;
            check_marks(f, stats.len())?;
            check_floor(f, &stats)?;
            let x_value = eval_marks(f, &stats);
            match point {
                Point::Product { w, .. } => Ok(w_value(w)? * x_value),
                _ => {
                    if f.has_mass_part() {
                        return Err(domain("mass exponents need a product point"));
                    }
                    Ok(x_value)
                }
            }
        }
    }
}

/// Exact `(G f)(point)` for the generator `G`.
pub fn apply_generator(gen: &Generator, f: &TestFunction, point: &Point<'_>) -> Result<f64> {
    let theta = &gen.theta;
    check_marks(f, theta.marks())?;
    let order = stats_order(f);
    match gen.kind {
        GeneratorKind::A0 => {
            let w = masses(point)?;
            let a0 = a0_op(theta).apply(&mass_part(f), &mass_stats(w));
            let x_value = match point {
                Point::Masses(_) => {
                    if f.mark_factors().iter().any(|m| !m.is_trivial()) {
                        return Err(param("A0 on a masses point needs a pure mass monomial"));
                    }
                    1.0
                }
                _ => eval_marks(f, &mark_stats(point, order)?),
            };
            Ok(a0 * x_value)
        }
        GeneratorKind::AhK { .. } | GeneratorKind::AK { .. }
            if !matches!(point, Point::Product { .. }) =>
        {
            Err(param("A_h^K and A^K act on product points (w, x)"))
        }
        GeneratorKind::AhK { mark, types } => {
            if mark >= theta.marks() {
                return Err(param(format!("mark index {mark} out of range")));
            }
            let (w, x_stats) = product_parts(point, types, order)?;
            let w_value = eval_marks(&mass_part(f), &mass_stats(w));
            Ok(w_value * ahk_op(theta, mark, types).apply(&frequency_part(f), &x_stats))
        }
        GeneratorKind::AK { types } => {
            let (w, x_stats) = product_parts(point, types, order)?;
            if let Some(h) = w.iter().position(|&v| v <= 0.0) {
                return Err(domain(format!("w_{} = 0: A^K needs interior masses", h + 1)));
            }
            let wf = mass_part(f);
            let xf = frequency_part(f);
            let w_stats = mass_stats(w);
            let w_value = eval_marks(&wf, &w_stats);
            let x_value = eval_marks(&xf, &x_stats);
            let mut v = a0_op(theta).apply(&wf, &w_stats) * x_value;
            for (h, &wh) in w.iter().enumerate() {
                v += w_value / wh * ahk_op(theta, h, types).apply(&xf, &x_stats);
            }
            Ok(v)
        }
        GeneratorKind::BK { types } => {
            let Point::Flat(z) = point else {
                return Err(param("B^K acts on flat points"));
            };
            if z.types() != types {
                return Err(Error::DimensionMismatch {
                    expected: types,
                    found: z.types(),
                });
            }
            if f.has_mass_part() {
                return Err(domain("mass exponents need a product point"));
            }
            let stats = mark_stats(point, order)?;
            check_floor(f, &stats)?;
            let op = BlockOp {
                group: vec![true; theta.marks()],
                mutation: theta
                    .theta()
                    .iter()
                    .map(|&t| Mutation {
                        rate: t,
                        types: Some(types),
                    })
                    .collect(),
                total: theta.theta_bar(),
            };
            Ok(op.apply(f, &stats))
        }
        GeneratorKind::B | GeneratorKind::BHat => {
            let stats = limit_stats(f, point, order)?;
            let corrected = gen.kind == GeneratorKind::B;
            Ok(limit_op(theta, vec![true; theta.marks()], corrected).apply(f, &stats))
        }
        GeneratorKind::BDecomposed => {
            let d = decompose_b(theta, f, point)?;
            Ok(d.per_mark.iter().sum::<f64>() - d.interaction)
        }
    }
}

fn product_parts<'a>(
    point: &Point<'a>,
    types: usize,
    order: u32,
) -> Result<(&'a [f64], Vec<MarkStats>)> {
    let Point::Product { w, x } = *point else {
        return Err(param("operator acts on product points"));
    };
    if let Some(bad) = x.iter().find(|xh| xh.len() != types) {
        return Err(Error::DimensionMismatch {
            expected: types,
            found: bad.len(),
        });
    }
    if w.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            found: x.len(),
        });
    }
    Ok((w, mark_stats(point, order)?))
}

fn limit_stats(f: &TestFunction, point: &Point<'_>, order: u32) -> Result<Vec<MarkStats>> {
    if matches!(point, Point::Masses(_) | Point::Product { .. }) {
        return Err(param("the limit operators act on Kingman or flat points"));
    }
    f.require_limit_domain()?;
    let stats = mark_stats(point, order)?;
    check_floor(f, &stats)?;
    Ok(stats)
}

/// Mark-wise dynamics and cross-mark interaction of the limit operator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BDecomposition {
    /// `B_h f` for each mark.
    pub per_mark: Vec<f64>,
    /// `1/2 sum_{h != k} sum_ij z_hi z_kj d_hi d_kj f`.
    pub interaction: f64,
    /// `B f` computed directly.
    pub total: f64,
}

/// Splits `B f = sum_h B_h f - interaction` and checks the identity to 1e-10.
pub fn decompose_b(theta: &ThetaParams, f: &TestFunction, point: &Point<'_>) -> Result<BDecomposition> {
    check_marks(f, theta.marks())?;
    let order = stats_order(f);
    let stats = limit_stats(f, point, order)?;
    let marks = theta.marks();
    let per_mark: Vec<f64> = (0..marks)
        .map(|h| {
            let group = (0..marks).map(|k| k == h).collect();
            limit_op(theta, group, true).apply(f, &stats)
        })
        .collect();
    let value = eval_marks(f, &stats);
    let degrees: Vec<f64> = f.mark_factors().iter().map(|m| f64::from(m.degree())).collect();
    let mut interaction = 0.0;
    for h in 0..marks {
        for k in 0..marks {
            if h != k {
                interaction += 0.5 * degrees[h] * degrees[k] * value;
            }
        }
    }
    let total = limit_op(theta, vec![true; marks], true).apply(f, &stats);
    let recomposed = per_mark.iter().sum::<f64>() - interaction;
    if (recomposed - total).abs() > 1e-10 * total.abs().max(1.0) {
        return Err(Error::Diagnostic(format!(
            "decomposition mismatch: sum_h B_h f - interaction = {recomposed}, B f = {total}"
        )));
    }
    Ok(BDecomposition {
        per_mark,
        interaction,
        total,
    })
}

/// `B f(z)` through its implicit definition: `f = g o S^{-1}` with
/// `g(w, x) = prod_h w_h^{p_h} Phi_h(x_h)`, `p_h = m0_h + sum_q m_q`, and
/// `(A0 + sum_h w_h^{-1} A_h) g` evaluated at `S^{-1}(z)`, where `A_h` is the
/// infinitely-many-alleles operator with rate `theta_h`.
pub fn apply_implicit_b(theta: &ThetaParams, f: &TestFunction, z: &KingmanPoint) -> Result<f64> {
    check_marks(f, theta.marks())?;
    f.require_limit_domain()?;
    let (w, x) = crate::simplex::decompose(z)?;
    let w = w.as_slice();
    let order = stats_order(f);
    let x_stats: Vec<MarkStats> = x
        .iter()
        .map(|xh| MarkStats::new(xh.atoms(), xh.tail(), order))
        .collect();
    let p: Vec<i32> = f.mark_factors().iter().map(MarkFactor::degree).collect();
    let wf = TestFunction::mass_monomial(p);
    let xf = TestFunction::new(
        f.mark_factors()
            .iter()
            .map(|m| MarkFactor {
                m0: 0,
                mvec: m.mvec.clone(),
            })
            .collect(),
    )?;
    let w_stats = mass_stats(w);
    let w_value = eval_marks(&mass_part(&wf), &w_stats);
    let x_value = eval_marks(&xf, &x_stats);
    let mut v = a0_op(theta).apply(&mass_part(&wf), &w_stats) * x_value;
    for h in 0..theta.marks() {
        let mut group = vec![false; theta.marks()];
        group[h] = true;
        let op = BlockOp {
            group,
            mutation: vec![
                Mutation {
                    rate: 0.0,
                    types: None
                };
                theta.marks()
            ],
            total: theta.get(h),
        };
        v += w_value / w[h] * op.apply(&xf, &x_stats);
    }
    Ok(v)
}

fn lowered_product(e: &[(usize, i32)], y: &[f64], skip: usize) -> f64 {
    e.iter()
        .map(|&(v, k)| if v == skip { y[v].powi(k - 1) } else { y[v].powi(k) })
        .product()
}

/// Wright–Fisher operator on one monomial `prod y_v^{n_v}`, evaluated numerically:
/// `1/2 sum_v n_v (n_v - 1 + mu_v) y^{n - e_v} - 1/2 D (D - 1 + total) y^n`.
fn wf_monomial_value(e: &[(usize, i32)], y: &[f64], mu: impl Fn(usize) -> f64, total: f64) -> f64 {
    let d: f64 = e.iter().map(|&(_, k)| f64::from(k)).sum();
    let value: f64 = e.iter().map(|&(v, k)| y[v].powi(k)).product();
    let mut out = -0.5 * d * (d - 1.0 + total) * value;
    for &(v, k) in e {
        let k = f64::from(k);
        out += 0.5 * k * (k - 1.0 + mu(v)) * lowered_product(e, y, v);
    }
    out
}

/// `(B^K f)(z)` for a flat monomial, drift sign `+`.
pub fn bk_monomial(theta: &ThetaParams, types: usize, e: &[(usize, i32)], z: &[f64]) -> f64 {
    let k = types as f64;
    wf_monomial_value(e, z, |v| theta.get(v / types) / k, theta.theta_bar())
}

/// `A^K (f o S)` at `(w, x)` for a flat monomial `f`, with `x` flat (`x_(h,i)` at `h * K + i`).
pub fn ak_monomial(theta: &ThetaParams, types: usize, e: &[(usize, i32)], w: &[f64], x: &[f64]) -> f64 {
    let marks = theta.marks();
    let k = types as f64;
    let mut deg = vec![0i32; marks];
    for &(v, n) in e {
        deg[v / types] += n;
    }
    let w_exps: Exponents = deg
        .iter()
        .enumerate()
        .filter(|&(_, &d)| d != 0)
        .map(|(h, &d)| (h, d))
        .collect();
    let w_value: f64 = w_exps.iter().map(|&(h, d)| w[h].powi(d)).product();
    let blocks: Vec<Exponents> = (0..marks)
        .map(|h| e.iter().copied().filter(|&(v, _)| v / types == h).collect())
        .collect();
    let x_vals: Vec<f64> = blocks
        .iter()
        .map(|b| b.iter().map(|&(v, n)| x[v].powi(n)).product())
        .collect();
    let x_value: f64 = x_vals.iter().product();
    let mut out = wf_monomial_value(&w_exps, w, |h| theta.get(h), theta.theta_bar()) * x_value;
    for h in 0..marks {
        if blocks[h].is_empty() {
            continue;
        }
        let th = theta.get(h);
        let local = wf_monomial_value(&blocks[h], x, |_| th / k, th);
        let others: f64 = (0..marks).filter(|&g| g != h).map(|g| x_vals[g]).product();
        out += w_value / w[h] * local * others;
    }
    out
}

/// `max |A^K(f o S)(S^{-1} z) - (B^K f)(z)|` over `points`.
pub fn check_intertwining(
    theta: &ThetaParams,
    types: usize,
    f: &Poly,
    points: &[FlatSimplexPoint],
) -> Result<f64> {
    if f.nvars() != theta.marks() * types {
        return Err(Error::DimensionMismatch {
            expected: theta.marks() * types,
            found: f.nvars(),
        });
    }
    if f.terms().any(|(e, _)| e.iter().any(|&(_, k)| k < 0)) {
        return Err(domain("intertwining is checked on polynomials"));
    }
    let mut worst = 0.0f64;
    for z in points {
        let (w, x) = crate::simplex::decompose_flat(z)?;
        let x_flat: Vec<f64> = x.iter().flat_map(|xh| xh.as_slice().iter().copied()).collect();
        let (mut lhs, mut rhs) = (0.0, 0.0);
        for (e, c) in f.terms() {
            lhs += c * ak_monomial(theta, types, e, w.as_slice(), &x_flat);
            rhs += c * bk_monomial(theta, types, e, z.as_slice());
        }
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Uniformly distributed interior points of the flat `HK` simplex.
pub fn random_flat_points(
    marks: usize,
    types: usize,
    n: usize,
    seed: SeedSpec,
) -> Result<Vec<FlatSimplexPoint>> {
    let dir = Dirichlet::symmetric(1.0, marks * types)?;
    let mut rng = seed.rng();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let z = FlatSimplexPoint::new(dir.sample(&mut rng), marks, types)?;
        if z.is_interior() {
            out.push(z);
        }
    }
    Ok(out)
}

/// One row of the generator-convergence table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub types: usize,
    /// Sampled `sup_z |B^K (f o rho^K)(z) - B f(rho^K z)|`.
    pub sup_deviation: f64,
    /// `(1/K) sum_h theta_h sum_q m_q 1{m_q >= 2}`.
    pub bound: f64,
    pub within_bound: bool,
}

/// Largest polynomial expansion used for the flat side before falling back
/// to the closed form.
const MAX_EXPANSION_TERMS: usize = 200_000;

fn expansion_size(f: &TestFunction, types: usize) -> usize {
    f.mark_factors()
        .iter()
        .map(|m| types.saturating_pow((m.m0.max(0) as u32) + m.mvec.len() as u32))
        .fold(1usize, usize::saturating_mul)
}

/// Sampled generator-convergence table for `f` over `types_list`.
///
/// The flat side is computed by expanding `f` into monomials in the `HK`
/// coordinates and applying the flat Wright–Fisher operator symbolically; the
/// limit side uses the closed form at the ranked point.
pub fn check_convergence_bound(
    theta: &ThetaParams,
    f: &TestFunction,
    types_list: &[usize],
    sample_size: usize,
    seed: SeedSpec,
) -> Result<Vec<ConvergenceRow>> {
    f.require_limit_domain()?;
    check_marks(f, theta.marks())?;
    let b = Generator::new(GeneratorKind::B, theta.clone());
    let mut rows = Vec::with_capacity(types_list.len());
    for (r, &types) in types_list.iter().enumerate() {
        let points = random_flat_points(theta.marks(), types, sample_size, seed.child(r as u64))?;
        let flat_op = if !f.has_negative_power() && expansion_size(f, types) <= MAX_EXPANSION_TERMS {
            let p = Poly::from_test_function(f, types)?;
            let mu: Vec<f64> = (0..theta.marks() * types)
                .map(|v| theta.get(v / types) / types as f64)
                .collect();
            Some(wf_operator(&p, &mu, DriftSign::Plus))
        } else {
            None
        };
        let bk = Generator::new(GeneratorKind::BK { types }, theta.clone());
        let mut sup = 0.0f64;
        for z in &points {
            let flat = match &flat_op {
                Some(op) => op.eval(z.as_slice()),
                None => bk.apply(f, &Point::Flat(z))?,
            };
            let ranked = rank_blocks(z)?;
            let limit = b.apply(f, &Point::Kingman(&ranked))?;
            sup = sup.max((flat - limit).abs());
        }
        let bound = theta
            .theta()
            .iter()
            .zip(f.mark_factors())
            .map(|(t, m)| t * m.mvec.iter().sum::<u32>() as f64)
            .sum::<f64>()
            / types as f64;
        rows.push(ConvergenceRow {
            types,
            sup_deviation: sup,
            bound,
            within_bound: sup <= bound,
        });
    }
    Ok(rows)
}

/// Random point with small but not tiny block masses, for tests and demos.
pub fn random_kingman_point<R: Rng + ?Sized>(marks: usize, atoms: usize, rng: &mut R) -> KingmanPoint {
    let dir = Dirichlet::symmetric(1.0, marks * atoms).expect("positive");
    let z = FlatSimplexPoint::new(dir.sample(rng), marks, atoms).expect("normalized");
    rank_blocks(&z).expect("uniform draws have positive block mass")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::OrderedMassVector;

    fn theta23() -> ThetaParams {
        ThetaParams::new(vec![2.0, 3.0]).unwrap()
    }

    fn kp(blocks: &[&[f64]]) -> KingmanPoint {
        KingmanPoint::new(
            blocks
                .iter()
                .map(|b| crate::simplex::rank(b).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn b_on_mass_is_linear() {
        let b = Generator::new(GeneratorKind::B, theta23());
        let f = TestFunction::mass_power(0, 1, 2);
        let z = kp(&[&[0.2, 0.1], &[0.3, 0.4]]);
        let v = b.apply(&f, &Point::Kingman(&z)).unwrap();
        assert!((v - (1.0 - 2.5 * 0.3)).abs() < 1e-14);
    }

    #[test]
    fn b_on_phi2() {
        let b = Generator::new(GeneratorKind::B, theta23());
        let bh = Generator::new(GeneratorKind::BHat, theta23());
        let f = TestFunction::phi(0, 2, 2);
        let z = kp(&[&[0.2, 0.1], &[0.3, 0.4]]);
        let v = b.apply(&f, &Point::Kingman(&z)).unwrap();
        let phi2 = 0.04 + 0.01;
        assert!((v - (0.3 - 6.0 * phi2)).abs() < 1e-14);
        assert_eq!(v, bh.apply(&f, &Point::Kingman(&z)).unwrap());
    }

    #[test]
    fn a0_example() {
        let a0 = Generator::new(GeneratorKind::A0, theta23());
        let f = TestFunction::mass_monomial(vec![1, 0]);
        let v = a0.apply(&f, &Point::Masses(&[0.5, 0.5])).unwrap();
        assert!((v + 0.25).abs() < 1e-15);
    }

    #[test]
    fn eval_examples() {
        let f = TestFunction::phi(0, 2, 1);
        let z = KingmanPoint::new(vec![OrderedMassVector::new(vec![0.5, 0.5], 0.0).unwrap()]).unwrap();
        assert_eq!(eval_testfunction(&f, &Point::Kingman(&z)).unwrap(), 0.5);
        let g = TestFunction::mass_power(0, -1, 2);
        let bad = kp(&[&[1.0], &[0.0]]);
        let g2 = TestFunction::mass_power(1, -1, 2);
        assert!(eval_testfunction(&g, &Point::Kingman(&bad)).is_ok());
        assert!(matches!(
            eval_testfunction(&g2, &Point::Kingman(&bad)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn domain_violation_rejected() {
        let b = Generator::new(GeneratorKind::B, theta23());
        let f = TestFunction::new(vec![MarkFactor::new(-2, vec![2]).unwrap(), MarkFactor::one()]).unwrap();
        let z = kp(&[&[0.2, 0.1], &[0.3, 0.4]]);
        assert!(matches!(b.apply(&f, &Point::Kingman(&z)), Err(Error::Domain(_))));
    }

    #[test]
    fn intertwining_small_cases() {
        let t = theta23();
        let pts = random_flat_points(2, 2, 50, SeedSpec::new(1, 0)).unwrap();
        let single = Poly::monomial(4, vec![(0, 1)], 1.0);
        assert!(check_intertwining(&t, 2, &single, &pts).unwrap() < 1e-12);
        let cross = Poly::monomial(4, vec![(0, 1), (3, 1)], 1.0);
        assert!(check_intertwining(&t, 2, &cross, &pts).unwrap() < 1e-12);
        let constant = Poly::constant(4, 1.0);
        assert_eq!(check_intertwining(&t, 2, &constant, &pts).unwrap(), 0.0);
    }

    #[test]
    fn convergence_zero_for_mass() {
        let rows = check_convergence_bound(&theta23(), &TestFunction::mass_power(0, 1, 2), &[4, 16], 50, SeedSpec::new(2, 0)).unwrap();
        assert!(rows.iter().all(|r| r.sup_deviation < 1e-13 && r.bound == 0.0));
    }
}
