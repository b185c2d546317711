//! Sparse (Laurent) polynomials in the flat coordinates `z_1..z_n` and the
//! Wright–Fisher operator acting on them symbolically.

use std::collections::BTreeMap;

use crate::error::{domain, Result};

use super::powersum::TestFunction;

/// Sorted `(variable, exponent)` pairs with nonzero exponents.
pub type Exponents = Vec<(usize, i32)>;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Exponents, f64>,
}

/// Sign of the first-order (mutation and drift) part of a Wright–Fisher operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftSign {
    /// `+1/2 (mu_i - |mu| z_i)`: mutation pulls toward the centre.
    Plus,
    /// `-1/2 (mu_i - |mu| z_i)`: the reversed convention, kept for contrast tests.
    Minus,
}

impl DriftSign {
    pub fn factor(self) -> f64 {
        match self {
            DriftSign::Plus => 1.0,
            DriftSign::Minus => -1.0,
        }
    }
}

fn normalize(mut e: Exponents) -> Exponents {
    e.sort_unstable_by_key(|&(v, _)| v);
    let mut out: Exponents = Vec::with_capacity(e.len());
    for (v, k) in e {
        match out.last_mut() {
            Some(last) if last.0 == v => last.1 += k,
            _ => out.push((v, k)),
        }
    }
    out.retain(|&(_, k)| k != 0);
    out
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Vec::new(), c);
        p
    }

    /// `coef * prod z_v^k` from arbitrary (unsorted, possibly repeated) pairs.
    pub fn monomial(nvars: usize, exps: Exponents, coef: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(exps, coef);
        p
    }

    /// Monomial from a dense exponent vector.
    pub fn from_dense(exps: &[u32]) -> Self {
        let e = exps
            .iter()
            .enumerate()
            .filter(|&(_, &k)| k > 0)
            .map(|(v, &k)| (v, k as i32))
            .collect();
        Self::monomial(exps.len(), e, 1.0)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn add_term(&mut self, exps: Exponents, coef: f64) {
        if coef == 0.0 {
            return;
        }
        let key = normalize(exps);
        debug_assert!(key.iter().all(|&(v, _)| v < self.nvars));
        let entry = self.terms.entry(key).or_insert(0.0);
        *entry += coef;
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, f64)> {
        self.terms.iter().map(|(e, &c)| (e, c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest total degree over terms (zero for the zero polynomial).
    pub fn degree(&self) -> i32 {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&(_, k)| k).sum())
            .max()
            .unwrap_or(0)
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut p = self.clone();
        for (e, c) in other.terms() {
            p.add_term(e.clone(), c);
        }
        p
    }

    pub fn scale(&self, c: f64) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, v) in self.terms() {
            p.add_term(e.clone(), c * v);
        }
        p
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut p = Poly::zero(self.nvars.max(other.nvars));
        for (a, ca) in self.terms() {
            for (b, cb) in other.terms() {
                let mut e = a.clone();
                e.extend_from_slice(b);
                p.add_term(e, ca * cb);
            }
        }
        p
    }

    pub fn pow(&self, k: u32) -> Poly {
        (0..k).fold(Poly::constant(self.nvars, 1.0), |acc, _| acc.mul(self))
    }

    /// `z_var^k * p`.
    pub fn mul_var(&self, var: usize, k: i32) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, c) in self.terms() {
            let mut e = e.clone();
            e.push((var, k));
            p.add_term(e, c);
        }
        p
    }

    pub fn derivative(&self, var: usize) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, c) in self.terms() {
            if let Some(&(_, k)) = e.iter().find(|&&(v, _)| v == var) {
                let mut e = e.clone();
                e.push((var, -1));
                p.add_term(e, c * f64::from(k));
            }
        }
        p
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        self.terms()
            .map(|(e, c)| c * e.iter().map(|&(v, k)| z[v].powi(k)).product::<f64>())
            .sum()
    }

    /// All exponent patterns of total degree `1..=max_degree` in `nvars` variables.
    pub fn all_monomials(nvars: usize, max_degree: u32) -> Vec<Exponents> {
        fn rec(start: usize, nvars: usize, left: u32, cur: &mut Exponents, out: &mut Vec<Exponents>) {
            for v in start..nvars {
                let bump = matches!(cur.last(), Some(&(lv, _)) if lv == v);
                if bump {
                    cur.last_mut().unwrap().1 += 1;
                } else {
                    cur.push((v, 1));
                }
                out.push(cur.clone());
                if left > 1 {
                    rec(v, nvars, left - 1, cur, out);
                }
                if bump {
                    cur.last_mut().unwrap().1 -= 1;
                } else {
                    cur.pop();
                }
            }
        }
        let mut out = Vec::new();
        if max_degree > 0 {
            rec(0, nvars, max_degree, &mut Vec::new(), &mut out);
        }
        out
    }

    /// Expansion of a power-sum test function over `types` coordinates per mark
    /// (coordinate `(h, i)` is variable `h * types + i`). Requires `m0 >= 0`.
    pub fn from_test_function(f: &TestFunction, types: usize) -> Result<Poly> {
        let nvars = f.num_marks() * types;
        let mut out = Poly::constant(nvars, 1.0);
        for (h, mf) in f.mark_factors().iter().enumerate() {
            if mf.m0 < 0 {
                return Err(domain("negative mass powers are not polynomials"));
            }
            let power_sum = |m: i32| {
                let mut p = Poly::zero(nvars);
                for i in 0..types {
                    p.add_term(vec![(h * types + i, m)], 1.0);
                }
                p
            };
            out = out.mul(&power_sum(1).pow(mf.m0 as u32));
            for &m in &mf.mvec {
                out = out.mul(&power_sum(m as i32));
            }
        }
        Ok(out)
    }
}

/// Wright–Fisher operator with per-coordinate mutation `mu` on a polynomial:
/// on `z^n` it gives
/// `1/2 sum_i n_i (n_i - 1 + s mu_i) z^{n - e_i} - 1/2 D (D - 1 + s |mu|) z^n`
/// with `D = |n|` and `s = ±1` the drift sign.
pub fn wf_operator(p: &Poly, mutation: &[f64], sign: DriftSign) -> Poly {
    let s = sign.factor();
    let total: f64 = mutation.iter().sum();
    let mut out = Poly::zero(p.nvars());
    for (e, c) in p.terms() {
        let d: f64 = e.iter().map(|&(_, k)| f64::from(k)).sum();
        out.add_term(e.clone(), -0.5 * c * d * (d - 1.0 + s * total));
        for &(v, k) in e {
            let k = f64::from(k);
            let mut lowered = e.clone();
            lowered.push((v, -1));
            out.add_term(lowered, 0.5 * c * k * (k - 1.0 + s * mutation[v]));
        }
    }
    out
}

/// The same operator assembled literally from partial derivatives:
/// `1/2 sum_ij z_i (delta_ij - z_j) d_i d_j p + s/2 sum_i (mu_i - |mu| z_i) d_i p`.
/// Quadratic in the number of variables; used to check [`wf_operator`].
pub fn wf_operator_by_partials(p: &Poly, mutation: &[f64], sign: DriftSign) -> Poly {
    let n = p.nvars();
    let s = sign.factor();
    let total: f64 = mutation.iter().sum();
    let mut out = Poly::zero(n);
    for i in 0..n {
        let di = p.derivative(i);
        if di.is_empty() {
            continue;
        }
        out = out.add(&di.scale(0.5 * s * mutation[i]));
        out = out.add(&di.mul_var(i, 1).scale(-0.5 * s * total));
        for j in 0..n {
            let dij = di.derivative(j);
            if dij.is_empty() {
                continue;
            }
            if i == j {
                out = out.add(&dij.mul_var(i, 1).scale(0.5));
            }
            out = out.add(&dij.mul_var(i, 1).mul_var(j, 1).scale(-0.5));
        }
    }
    out
}
