//! Exact checks: Dirichlet moments, stationarity of the flat `HK`-type
//! operator under its Dirichlet law, and the intertwining of the skew-product
//! generator with the flat one.

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::generators::{ak_monomial, bk_monomial, random_flat_points, wf_operator, DriftSign, Poly};
use crate::sampling::SeedSpec;
use crate::simplex::{decompose_flat, FlatSimplexPoint, ThetaParams};

use super::TestReport;

/// Mixed moment `E prod z_i^{n_i}` of `Dir(alpha)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentSpec {
    pub exponents: Vec<u32>,
    pub alpha: Vec<f64>,
}

/// `prod_i (alpha_i)_{n_i} / (alpha_bar)_{n_bar}` with rising factorials, in log space.
pub fn dirichlet_moment(spec: &MomentSpec) -> Result<f64> {
    if spec.exponents.len() != spec.alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: spec.alpha.len(),
            found: spec.exponents.len(),
        });
    }
    if spec.alpha.is_empty() || spec.alpha.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
        return Err(param("Dirichlet parameters must be positive"));
    }
    let sparse: Vec<(usize, i32)> = spec
        .exponents
        .iter()
        .enumerate()
        .filter(|&(_, &n)| n > 0)
        .map(|(v, &n)| (v, n as i32))
        .collect();
    Ok(moment_sparse(&sparse, &spec.alpha, spec.alpha.iter().sum()))
}

fn ln_rising(a: f64, n: i32) -> f64 {
    (0..n).map(|j| (a + f64::from(j)).ln()).sum()
}

fn moment_sparse(e: &[(usize, i32)], alpha: &[f64], alpha_bar: f64) -> f64 {
    let total: i32 = e.iter().map(|&(_, n)| n).sum();
    let ln: f64 = e.iter().map(|&(v, n)| ln_rising(alpha[v], n)).sum::<f64>() - ln_rising(alpha_bar, total);
    ln.exp()
}

/// `int p d Dir(alpha)` for a polynomial with nonnegative exponents.
pub fn integrate_polynomial(p: &Poly, alpha: &[f64]) -> Result<f64> {
    if p.nvars() != alpha.len() {
        return Err(Error::DimensionMismatch {
            expected: alpha.len(),
            found: p.nvars(),
        });
    }
    let alpha_bar: f64 = alpha.iter().sum();
    let mut s = super::stats::CompensatedSum::new();
    for (e, c) in p.terms() {
        if e.iter().any(|&(_, n)| n < 0) {
            return Err(param("Dirichlet moments need nonnegative exponents"));
        }
        s.add(c * moment_sparse(e, alpha, alpha_bar));
    }
    Ok(s.value())
}

/// Tolerance of the exact checks.
pub const EXACT_TOLERANCE: f64 = 1e-10;

fn monomial_label(e: &[(usize, i32)], types: usize) -> String {
    e.iter()
        .map(|&(v, n)| {
            let base = format!("z{}.{}", v / types + 1, v % types + 1);
            if n == 1 {
                base
            } else {
                format!("{base}^{n}")
            }
        })
        .collect::<Vec<_>>()
        .join("*")
}

/// `int B^K f d Dir_HK(theta_h / K)` for every monomial of degree `1..=max_degree`,
/// with the drift sign of the flat operator as given. One report per monomial
/// (the constant is omitted: `B^K 1 = 0` identically).
pub fn exact_stationarity_bk(
    theta: &ThetaParams,
    types: usize,
    max_degree: u32,
    sign: DriftSign,
) -> Result<Vec<TestReport>> {
    if types == 0 {
        return Err(param("number of types must be positive"));
    }
    let k = types as f64;
    let alpha: Vec<f64> = theta
        .theta()
        .iter()
        .flat_map(|&t| std::iter::repeat_n(t / k, types))
        .collect();
    let sign_label = match sign {
        DriftSign::Plus => "+",
        DriftSign::Minus => "-",
    };
    Poly::all_monomials(alpha.len(), max_degree)
        .into_iter()
        .map(|e| {
            let p = Poly::monomial(alpha.len(), e.clone(), 1.0);
            let q = wf_operator(&p, &alpha, sign);
            let residual = integrate_polynomial(&q, &alpha)?;
            Ok(TestReport::new(
                format!("stationary-exact K={types} sign={sign_label} f={}", monomial_label(&e, types)),
                residual,
                EXACT_TOLERANCE,
            ))
        })
        .collect()
}

/// Collapses a family of reports into one: the largest `|statistic|` against the
/// smallest threshold.
pub fn summarize(name: impl Into<String>, reports: &[TestReport]) -> TestReport {
    let worst = reports
        .iter()
        .map(|r| r.statistic.abs())
        .fold(0.0f64, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) });
    let threshold = reports
        .iter()
        .map(|r| r.threshold)
        .fold(f64::INFINITY, f64::min);
    let replicates = reports.len();
    let mut r = TestReport::new(name, worst, threshold)
        .with_detail(format!("{replicates} cases, statistic = max |residual|"));
    r.replicates = replicates;
    r
}

const MAX_FAST_ENTRIES: usize = 16;

/// Per-point power tables `y^0..y^max_degree`.
fn power_table(y: &[f64], max_degree: usize) -> Vec<f64> {
    let mut t = Vec::with_capacity(y.len() * (max_degree + 1));
    for &v in y {
        let mut p = 1.0;
        for _ in 0..=max_degree {
            t.push(p);
            p *= v;
        }
    }
    t
}

struct Powers<'a> {
    table: &'a [f64],
    stride: usize,
}

impl Powers<'_> {
    #[inline]
    fn get(&self, v: usize, n: i32) -> f64 {
        self.table[v * self.stride + n as usize]
    }
}

/// Flat Wright–Fisher operator on `prod y^n` from power tables; `mu(v)` is the
/// per-coordinate rate and `total` the first-order total.
#[inline]
fn wf_fast(e: &[(usize, i32)], y: &Powers<'_>, mu: impl Fn(usize) -> f64, total: f64) -> f64 {
    let mut vals = [0.0; MAX_FAST_ENTRIES];
    let mut d = 0i32;
    let mut value = 1.0;
    for (j, &(v, n)) in e.iter().enumerate() {
        vals[j] = y.get(v, n);
        value *= vals[j];
        d += n;
    }
    let df = f64::from(d);
    let mut out = -0.5 * df * (df - 1.0 + total) * value;
    for (j, &(v, n)) in e.iter().enumerate() {
        let mut lowered = y.get(v, n - 1);
        for (l, val) in vals.iter().enumerate().take(e.len()) {
            if l != j {
                lowered *= val;
            }
        }
        let nf = f64::from(n);
        out += 0.5 * nf * (nf - 1.0 + mu(v)) * lowered;
    }
    out
}

struct PointTables {
    z: Vec<f64>,
    x: Vec<f64>,
    w: Vec<f64>,
    stride: usize,
}

/// `A^K (f o S)` and `B^K f` for one monomial, from power tables.
fn both_sides_fast(
    theta: &ThetaParams,
    types: usize,
    e: &[(usize, i32)],
    t: &PointTables,
) -> (f64, f64) {
    let k = types as f64;
    let zp = Powers { table: &t.z, stride: t.stride };
    let xp = Powers { table: &t.x, stride: t.stride };
    let wp = Powers { table: &t.w, stride: t.stride };
    let rhs = wf_fast(e, &zp, |v| theta.get(v / types) / k, theta.theta_bar());

    // entries are sorted by variable, hence grouped by mark in contiguous runs
    let mut runs = [(0usize, 0usize, 0usize, 0i32); MAX_FAST_ENTRIES];
    let mut nruns = 0;
    let mut start = 0;
    while start < e.len() {
        let h = e[start].0 / types;
        let mut end = start;
        let mut d = 0;
        while end < e.len() && e[end].0 / types == h {
            d += e[end].1;
            end += 1;
        }
        runs[nruns] = (h, start, end, d);
        nruns += 1;
        start = end;
    }
    let runs = &runs[..nruns];
    let mut x_vals = [0.0; MAX_FAST_ENTRIES];
    let mut w_exps = [(0usize, 0i32); MAX_FAST_ENTRIES];
    for (r, &(h, a, b, d)) in runs.iter().enumerate() {
        x_vals[r] = e[a..b].iter().map(|&(v, n)| xp.get(v, n)).product();
        w_exps[r] = (h, d);
    }
    let x_value: f64 = x_vals[..nruns].iter().product();
    let mut lhs = wf_fast(&w_exps[..nruns], &wp, |h| theta.get(h), theta.theta_bar()) * x_value;
    for (r, &(h, a, b, _)) in runs.iter().enumerate() {
        let th = theta.get(h);
        let local = wf_fast(&e[a..b], &xp, |_| th / k, th);
        let mut rest = 1.0;
        for (g, &(hg, _, _, dg)) in runs.iter().enumerate() {
            rest *= if g == r { wp.get(hg, dg - 1) } else { wp.get(hg, dg) * x_vals[g] };
        }
        lhs += rest * local;
    }
    (lhs, rhs)
}

/// `max |A^K(f o S)(S^-1 z) - B^K f(z)|` over `points` for a polynomial `f`;
/// evaluated monomial by monomial from per-point power tables.
pub fn intertwining_deviation(
    theta: &ThetaParams,
    types: usize,
    f: &Poly,
    points: &[FlatSimplexPoint],
) -> Result<f64> {
    let marks = theta.marks();
    if f.nvars() != marks * types {
        return Err(Error::DimensionMismatch {
            expected: marks * types,
            found: f.nvars(),
        });
    }
    if f.terms().any(|(e, _)| e.iter().any(|&(_, n)| n < 0)) {
        return Err(param("intertwining is checked on polynomials"));
    }
    let deg = f.degree().max(0) as usize;
    let fast = f.terms().all(|(e, _)| e.len() <= MAX_FAST_ENTRIES);
    let mut worst = 0.0f64;
    for z in points {
        let (w, x) = decompose_flat(z)?;
        let x_flat: Vec<f64> = x.iter().flat_map(|xh| xh.as_slice().iter().copied()).collect();
        let (mut lhs, mut rhs) = (0.0, 0.0);
        if fast {
            let tables = PointTables {
                z: power_table(z.as_slice(), deg),
                x: power_table(&x_flat, deg),
                w: power_table(w.as_slice(), deg),
                stride: deg + 1,
            };
            for (e, c) in f.terms() {
                let (l, r) = both_sides_fast(theta, types, e, &tables);
                lhs += c * l;
                rhs += c * r;
            }
        } else {
            for (e, c) in f.terms() {
                lhs += c * ak_monomial(theta, types, e, w.as_slice(), &x_flat);
                rhs += c * bk_monomial(theta, types, e, z.as_slice());
            }
        }
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

/// Intertwining over every monomial of degree `1..=max_degree` (and therefore,
/// by linearity, every polynomial of that degree up to a factor of its
/// coefficient norm), at `n_points` random interior points. One report per `(H, K)`.
pub fn intertwining_suite(
    theta: &ThetaParams,
    types_list: &[usize],
    max_degree: u32,
    n_points: usize,
    seed: SeedSpec,
) -> Result<Vec<TestReport>> {
    let marks = theta.marks();
    types_list
        .iter()
        .enumerate()
        .map(|(r, &types)| {
            let s = seed.child(r as u64);
            let points = random_flat_points(marks, types, n_points, s)?;
            let nvars = marks * types;
            let mut worst = 0.0f64;
            let monomials = Poly::all_monomials(nvars, max_degree);
            for e in &monomials {
                let p = Poly::monomial(nvars, e.clone(), 1.0);
                worst = worst.max(intertwining_deviation(theta, types, &p, &points)?);
            }
            Ok(TestReport::new(
                format!("intertwine H={marks} K={types} deg<={max_degree}"),
                worst,
                EXACT_TOLERANCE,
            )
            .with_replicates(n_points, s)
            .with_detail(format!("{} monomials", monomials.len())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::check_intertwining;

    #[test]
    fn moment_examples() {
        let m = |n: Vec<u32>, a: Vec<f64>| dirichlet_moment(&MomentSpec { exponents: n, alpha: a }).unwrap();
        assert!((m(vec![1, 0], vec![1.0, 1.0]) - 0.5).abs() < 1e-15);
        assert!((m(vec![2, 0], vec![2.0, 3.0]) - 0.2).abs() < 1e-15);
        assert_eq!(m(vec![0, 0, 0], vec![0.3, 2.0, 5.0]), 1.0);
        assert!(dirichlet_moment(&MomentSpec { exponents: vec![1], alpha: vec![0.0] }).is_err());
        // large exponents stay finite in log space
        let big = m(vec![300, 300], vec![0.5, 0.5]);
        assert!(big > 0.0 && big.is_finite());
    }

    #[test]
    fn fast_path_matches_generic_monomial_operators() {
        let theta = ThetaParams::new(vec![2.0, 1.5, 3.0]).unwrap();
        let types = 2;
        let pts = random_flat_points(3, types, 20, SeedSpec::new(3, 0)).unwrap();
        for z in &pts {
            let (w, x) = decompose_flat(z).unwrap();
            let x_flat: Vec<f64> = x.iter().flat_map(|xh| xh.as_slice().iter().copied()).collect();
            let tables = PointTables {
                z: power_table(z.as_slice(), 4),
                x: power_table(&x_flat, 4),
                w: power_table(w.as_slice(), 4),
                stride: 5,
            };
            for e in Poly::all_monomials(6, 4) {
                let (l, r) = both_sides_fast(&theta, types, &e, &tables);
                let l2 = ak_monomial(&theta, types, &e, w.as_slice(), &x_flat);
                let r2 = bk_monomial(&theta, types, &e, z.as_slice());
                assert!((l - l2).abs() < 1e-13 && (r - r2).abs() < 1e-13);
            }
        }
        let mut f = Poly::zero(6);
        for (i, e) in Poly::all_monomials(6, 3).into_iter().enumerate() {
            f.add_term(e, 1.0 + i as f64 * 0.01);
        }
        assert!(check_intertwining(&theta, types, &f, &pts).unwrap() < 1e-10);
        assert!(intertwining_deviation(&theta, types, &f, &pts).unwrap() < 1e-10);
    }

    #[test]
    fn linear_monomial_is_stationary_for_both_signs() {
        let theta = ThetaParams::new(vec![2.0, 3.0]).unwrap();
        for sign in [DriftSign::Plus, DriftSign::Minus] {
            let r = exact_stationarity_bk(&theta, 2, 1, sign).unwrap();
            assert!(r.iter().all(|r| r.statistic.abs() < 1e-12));
        }
    }
}
