//! Explicit first and second partial derivatives of power-sum test functions in
//! flat coordinates, a central-difference oracle for them, and operators
//! assembled literally from those partials.
//!
//! Nothing here shares code with the closed forms in `powersum`; the two routes
//! are compared against each other in the tests.

use crate::error::{domain, Error, Result};

use super::powersum::{MarkFactor, TestFunction};

fn phi(y: &[f64], m: u32) -> f64 {
    y.iter().map(|v| v.powi(m as i32)).sum()
}

/// Direct evaluation on blocks of coordinates.
pub fn eval_direct(f: &TestFunction, blocks: &[&[f64]]) -> f64 {
    f.mark_factors()
        .iter()
        .zip(blocks)
        .map(|(mf, y)| {
            let s: f64 = y.iter().sum();
            let p: f64 = mf.mvec.iter().map(|&m| phi(y, m)).product();
            if mf.m0 == 0 {
                p
            } else {
                s.powi(mf.m0) * p
            }
        })
        .product()
}

struct FactorDerivs {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<Vec<f64>>,
}

fn factor_derivs(mf: &MarkFactor, y: &[f64]) -> FactorDerivs {
    let k = y.len();
    let a = f64::from(mf.m0);
    let s: f64 = y.iter().sum();
    let ms = &mf.mvec;
    let phis: Vec<f64> = ms.iter().map(|&m| phi(y, m)).collect();
    let prod_except = |skip: &[usize]| -> f64 {
        phis.iter()
            .enumerate()
            .filter(|(l, _)| !skip.contains(l))
            .map(|(_, v)| v)
            .product()
    };
    let p = prod_except(&[]);
    let sp = |e: f64| if e == 0.0 { 1.0 } else { s.powf(e) };

    let dp: Vec<f64> = (0..k)
        .map(|i| {
            (0..ms.len())
                .map(|q| f64::from(ms[q]) * y[i].powi(ms[q] as i32 - 1) * prod_except(&[q]))
                .sum()
        })
        .collect();
    let grad = (0..k).map(|i| a * sp(a - 1.0) * p + sp(a) * dp[i]).collect();
    let mut hess = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in 0..k {
            let mut d2p = 0.0;
            for q in 0..ms.len() {
                let mq = ms[q] as i32;
                if i == j {
                    d2p += f64::from(mq * (mq - 1)) * y[i].powi(mq - 2) * prod_except(&[q]);
                }
                for l in 0..ms.len() {
                    if l != q {
                        let ml = ms[l] as i32;
                        d2p += f64::from(mq * ml)
                            * y[i].powi(mq - 1)
                            * y[j].powi(ml - 1)
                            * prod_except(&[q, l]);
                    }
                }
            }
            hess[i][j] = a * (a - 1.0) * sp(a - 2.0) * p
                + a * sp(a - 1.0) * (dp[i] + dp[j])
                + sp(a) * d2p;
        }
    }
    FactorDerivs {
        value: sp(a) * p,
        grad,
        hess,
    }
}

/// Gradient and Hessian of `f` in the flat coordinates of `blocks`
/// (coordinate `(h, i)` at index `h * K + i`).
pub fn analytic_partials(f: &TestFunction, blocks: &[&[f64]]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let k = blocks[0].len();
    let marks = blocks.len();
    let n = marks * k;
    let d: Vec<FactorDerivs> = f
        .mark_factors()
        .iter()
        .zip(blocks)
        .map(|(mf, y)| factor_derivs(mf, y))
        .collect();
    let others = |skip: &[usize]| -> f64 {
        d.iter()
            .enumerate()
            .filter(|(h, _)| !skip.contains(h))
            .map(|(_, fd)| fd.value)
            .product()
    };
    let mut grad = vec![0.0; n];
    let mut hess = vec![vec![0.0; n]; n];
    for h in 0..marks {
        let oh = others(&[h]);
        for i in 0..k {
            grad[h * k + i] = d[h].grad[i] * oh;
            for j in 0..k {
                hess[h * k + i][h * k + j] = d[h].hess[i][j] * oh;
            }
        }
        for g in 0..marks {
            if g == h {
                continue;
            }
            let ohg = others(&[h, g]);
            for i in 0..k {
                for j in 0..k {
                    hess[h * k + i][g * k + j] = d[h].grad[i] * d[g].grad[j] * ohg;
                }
            }
        }
    }
    (grad, hess)
}

/// Central-difference partials `d_i f`, `d_j f` and `d_i d_j f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdPartials {
    pub first_i: f64,
    pub first_j: f64,
    pub second_ij: f64,
}

pub const FD_FIRST_STEP: f64 = 1e-5;
pub const FD_SECOND_STEP: f64 = 1e-3;

/// Central differences around `z` (flat, `K` types per mark), each refined by one
/// Richardson step (`h` and `h/2`), so the truncation error is `O(h^4)`.
/// The only singularity of a power-sum function is a vanishing block mass, so
/// bumps are `step * |z_h|` for the block `h` containing the coordinate, capped at
/// `z_v / 2` to keep every evaluation interior; a zero coordinate is refused.
pub fn finite_difference_oracle(
    f: &TestFunction,
    z: &[f64],
    types: usize,
    i: usize,
    j: usize,
) -> Result<FdPartials> {
    if z.len() != f.num_marks() * types {
        return Err(Error::DimensionMismatch {
            expected: f.num_marks() * types,
            found: z.len(),
        });
    }
    for v in [i, j] {
        if z.get(v).is_none_or(|&c| c <= 0.0) {
            return Err(domain(format!("coordinate {v} is not an interior coordinate")));
        }
    }
    let block_mass = |v: usize| -> f64 { z[(v / types) * types..(v / types + 1) * types].iter().sum() };
    let bump = |v: usize, step: f64| (step * block_mass(v)).min(0.5 * z[v]);
    let eval = |shifts: &[(usize, f64)]| {
        let mut y = z.to_vec();
        for &(v, d) in shifts {
            y[v] += d;
        }
        let blocks: Vec<&[f64]> = y.chunks(types).collect();
        eval_direct(f, &blocks)
    };
    let first_at = |v: usize, d: f64| (eval(&[(v, d)]) - eval(&[(v, -d)])) / (2.0 * d);
    let first = |v: usize| {
        let d = bump(v, FD_FIRST_STEP);
        (4.0 * first_at(v, 0.5 * d) - first_at(v, d)) / 3.0
    };
    let second_at = |di: f64, dj: f64| {
        if i == j {
            (eval(&[(i, di)]) - 2.0 * eval(&[]) + eval(&[(i, -di)])) / (di * di)
        } else {
            (eval(&[(i, di), (j, dj)]) - eval(&[(i, di), (j, -dj)]) - eval(&[(i, -di), (j, dj)])
                + eval(&[(i, -di), (j, -dj)]))
                / (4.0 * di * dj)
        }
    };
    let (di, dj) = (bump(i, FD_SECOND_STEP), bump(j, FD_SECOND_STEP));
    let second_ij = (4.0 * second_at(0.5 * di, 0.5 * dj) - second_at(di, dj)) / 3.0;
    Ok(FdPartials {
        first_i: first(i),
        first_j: first(j),
        second_ij,
    })
}

/// Which operator to assemble from partials.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartialsOperator {
    /// Finite-`K` flat operator with mutation `theta_h / K` per coordinate.
    FlatK,
    /// Limit operator: no per-coordinate mutation, plus `1/2 sum_h theta_h m0_h |z_h|^{-1} f`.
    Limit,
    /// Limit operator without the mass correction.
    LimitUncorrected,
}

/// `1/2 sum_ij z_i (delta_ij - z_j) d_ij f + 1/2 sum_i (mu_i - theta_bar z_i) d_i f (+ correction)`
/// evaluated from explicit partial derivatives.
pub fn apply_via_partials(
    op: PartialsOperator,
    theta: &[f64],
    f: &TestFunction,
    blocks: &[&[f64]],
) -> f64 {
    let k = blocks[0].len();
    let z: Vec<f64> = blocks.concat();
    let (g, hm) = analytic_partials(f, blocks);
    let theta_bar: f64 = theta.iter().sum();
    let mut v = 0.0;
    for i in 0..z.len() {
        v += 0.5 * z[i] * hm[i][i];
        for j in 0..z.len() {
            v -= 0.5 * z[i] * z[j] * hm[i][j];
        }
        let mu = match op {
            PartialsOperator::FlatK => theta[i / k] / k as f64,
            _ => 0.0,
        };
        v += 0.5 * (mu - theta_bar * z[i]) * g[i];
    }
    if op == PartialsOperator::Limit {
        let fv = eval_direct(f, blocks);
        for (h, mf) in f.mark_factors().iter().enumerate() {
            let s: f64 = blocks[h].iter().sum();
            v += 0.5 * theta[h] * f64::from(mf.m0) * fv / s;
        }
    }
    v
}
