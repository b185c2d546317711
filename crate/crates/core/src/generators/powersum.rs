//! Power-sum test functions and the closed-form action of block Wright–Fisher
//! operators on them.
//!
//! A test function is a product over marks of `|z_h|^{m0} prod_q phi_{m_q}(z_h)`
//! with `phi_m(z_h) = sum_i z_{h,i}^m`. Every operator in this crate is a block
//! Wright–Fisher operator
//!
//! ```text
//! G = 1/2 sum_{i,j in V} y_i (delta_ij - y_j) d_i d_j
//!   + 1/2 sum_h sum_{i in h} mu_{h,i} d_i  -  theta_tot / 2 sum_{i in V} y_i d_i
//! ```
//!
//! over a group of marks `V`, with per-coordinate mutation `mu_{h,i} = rate_h / n_h`
//! spread over `n_h` coordinates (possibly infinitely many, in which case only the
//! `d/d|z_h|` part survives). On these products `G` acts in closed form because
//! `sum_{i,j} y_i y_j d_i d_j` and `sum_i y_i d_i` reduce to the homogeneous degree.

use serde::{Deserialize, Serialize};

use crate::error::{domain, param, Result};
use crate::simplex::TOLERANCES;

/// `|z_h|^{m0} prod_q phi_{m_q}(z_h)` for one mark.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawMarkFactor")]
pub struct MarkFactor {
    pub m0: i32,
    /// Nonincreasing power-sum orders, all `>= 2` (`phi_1 = |z_h|` is folded into `m0`).
    pub mvec: Vec<u32>,
}

#[derive(Deserialize)]
struct RawMarkFactor {
    m0: i32,
    #[serde(default)]
    mvec: Vec<u32>,
}

impl TryFrom<RawMarkFactor> for MarkFactor {
    type Error = crate::Error;
    fn try_from(raw: RawMarkFactor) -> Result<Self> {
        MarkFactor::new(raw.m0, raw.mvec)
    }
}

impl MarkFactor {
    /// Normalizes `mvec`: entries equal to one are dropped (`phi_1` is the mass,
    /// which under the multiset convention is the trailing filler), the rest sorted
    /// nonincreasing.
    pub fn new(m0: i32, mut mvec: Vec<u32>) -> Result<Self> {
        if mvec.contains(&0) {
            return Err(param("power-sum orders must be at least 1"));
        }
        mvec.retain(|&m| m >= 2);
        mvec.sort_unstable_by(|a, b| b.cmp(a));
        Ok(Self { m0, mvec })
    }

    pub fn one() -> Self {
        Self {
            m0: 0,
            mvec: Vec::new(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.m0 == 0 && self.mvec.is_empty()
    }

    /// Homogeneous degree `m0 + sum_q m_q`.
    pub fn degree(&self) -> i32 {
        self.m0 + self.mvec.iter().sum::<u32>() as i32
    }

    /// `m0 >= 1 - sum_q m_q 1{m_q >= 2}`, i.e. degree at least one.
    pub fn in_domain(&self) -> bool {
        self.degree() >= 1
    }

    pub fn max_order(&self) -> u32 {
        self.mvec.first().copied().unwrap_or(0)
    }
}

/// Product of per-mark factors, optionally times a monomial `prod_h w_h^{p_h}`
/// in mark masses (used by operators acting on `(w, x)` product points).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "TestFunctionRepr", into = "TestFunctionRepr")]
pub struct TestFunction {
    marks: Vec<MarkFactor>,
    w_exps: Vec<i32>,
}

/// Serialized as a bare list of `{m0, mvec}` unless mass exponents are present.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TestFunctionRepr {
    Marks(Vec<MarkFactor>),
    Full {
        marks: Vec<MarkFactor>,
        w_exps: Vec<i32>,
    },
}

impl TryFrom<TestFunctionRepr> for TestFunction {
    type Error = crate::Error;
    fn try_from(r: TestFunctionRepr) -> Result<Self> {
        match r {
            TestFunctionRepr::Marks(m) => TestFunction::new(m),
            TestFunctionRepr::Full { marks, w_exps } => {
                TestFunction::new(marks)?.with_mass_exponents(w_exps)
            }
        }
    }
}

impl From<TestFunction> for TestFunctionRepr {
    fn from(f: TestFunction) -> Self {
        if f.w_exps.is_empty() {
            TestFunctionRepr::Marks(f.marks)
        } else {
            TestFunctionRepr::Full {
                marks: f.marks,
                w_exps: f.w_exps,
            }
        }
    }
}

impl std::fmt::Display for TestFunction {
    /// `|z1|^-1*phi2(z1)*w2^3`; the constant prints as `1`.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mut parts = Vec::new();
        for (h, m) in self.marks.iter().enumerate() {
            match m.m0 {
                0 => {}
                1 => parts.push(format!("|z{}|", h + 1)),
                a => parts.push(format!("|z{}|^{a}", h + 1)),
            }
            parts.extend(m.mvec.iter().map(|q| format!("phi{q}(z{})", h + 1)));
        }
        for (h, &p) in self.w_exps.iter().enumerate() {
            match p {
                0 => {}
                1 => parts.push(format!("w{}", h + 1)),
                p => parts.push(format!("w{}^{p}", h + 1)),
            }
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join("*"))
        }
    }
}

impl TestFunction {
    pub fn new(marks: Vec<MarkFactor>) -> Result<Self> {
        if marks.is_empty() {
            return Err(param("test function needs at least one mark"));
        }
        Ok(Self {
            marks,
            w_exps: Vec::new(),
        })
    }

    /// The constant function one on `marks` marks.
    pub fn constant(marks: usize) -> Self {
        Self {
            marks: vec![MarkFactor::one(); marks],
            w_exps: Vec::new(),
        }
    }

    /// `|z_h|^power`.
    pub fn mass_power(h: usize, power: i32, marks: usize) -> Self {
        let mut f = Self::constant(marks);
        f.marks[h].m0 = power;
        f
    }

    /// `phi_m(z_h)`.
    pub fn phi(h: usize, m: u32, marks: usize) -> Self {
        let mut f = Self::constant(marks);
        f.marks[h] = MarkFactor::new(0, vec![m]).expect("positive order");
        f
    }

    /// Pure mark-mass monomial `prod_h w_h^{p_h}`.
    pub fn mass_monomial(p: Vec<i32>) -> Self {
        Self {
            marks: vec![MarkFactor::one(); p.len()],
            w_exps: p,
        }
    }

    pub fn with_mass_exponents(mut self, p: Vec<i32>) -> Result<Self> {
        if !p.is_empty() && p.len() != self.marks.len() {
            return Err(crate::Error::DimensionMismatch {
                expected: self.marks.len(),
                found: p.len(),
            });
        }
        self.w_exps = p;
        Ok(self)
    }

    /// Pointwise product.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if self.marks.len() != other.marks.len() {
            return Err(crate::Error::DimensionMismatch {
                expected: self.marks.len(),
                found: other.marks.len(),
            });
        }
        let marks = self
            .marks
            .iter()
            .zip(&other.marks)
            .map(|(a, b)| {
                let mut mvec = a.mvec.clone();
                mvec.extend(&b.mvec);
                MarkFactor::new(a.m0 + b.m0, mvec)
            })
            .collect::<Result<Vec<_>>>()?;
        let w_exps = match (self.w_exps.is_empty(), other.w_exps.is_empty()) {
            (true, true) => Vec::new(),
            _ => (0..self.marks.len())
                .map(|h| {
                    self.w_exps.get(h).copied().unwrap_or(0)
                        + other.w_exps.get(h).copied().unwrap_or(0)
                })
                .collect(),
        };
        Ok(Self { marks, w_exps })
    }

    pub fn num_marks(&self) -> usize {
        self.marks.len()
    }

    pub fn mark(&self, h: usize) -> &MarkFactor {
        &self.marks[h]
    }

    pub fn mark_factors(&self) -> &[MarkFactor] {
        &self.marks
    }

    /// Mass exponents `p_h` (zero when absent).
    pub fn mass_exponent(&self, h: usize) -> i32 {
        self.w_exps.get(h).copied().unwrap_or(0)
    }

    pub fn has_mass_part(&self) -> bool {
        self.w_exps.iter().any(|&p| p != 0)
    }

    pub fn max_order(&self) -> u32 {
        self.marks.iter().map(MarkFactor::max_order).max().unwrap_or(0)
    }

    /// Domain of the limit operator: every mark that appears has degree at least one.
    /// Marks absent from `f` are the constant one and impose nothing.
    pub fn require_limit_domain(&self) -> Result<()> {
        if self.has_mass_part() {
            return Err(domain("mark-mass monomials are not functions on the Kingman simplex"));
        }
        match self
            .marks
            .iter()
            .position(|m| !m.is_trivial() && !m.in_domain())
        {
            None => Ok(()),
            Some(h) => Err(domain(format!(
                "mark {}: m0 = {} is below 1 - sum of orders",
                h + 1,
                self.marks[h].m0
            ))),
        }
    }

    pub fn has_negative_power(&self) -> bool {
        self.marks.iter().any(|m| m.m0 < 0)
    }
}

/// Mass and power sums of one block of coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkStats {
    pub s: f64,
    /// `phi[m] = sum_i y_i^m` for `2 <= m < phi.len()`; lower entries unused.
    phi: Vec<f64>,
}

impl MarkStats {
    /// Stats of atoms `y` plus dust `tail` (which enters the mass only).
    pub fn new(y: &[f64], tail: f64, max_order: u32) -> Self {
        let top = max_order.max(1) as usize;
        let mut phi = vec![0.0; top + 1];
        let mut s = tail;
        for &v in y {
            s += v;
            let mut p = v;
            for slot in phi.iter_mut().take(top + 1).skip(2) {
                p *= v;
                *slot += p;
            }
        }
        phi[1] = s;
        Self { s, phi }
    }

    /// A block consisting of a single coordinate (used for mark masses).
    pub fn single(v: f64) -> Self {
        Self::new(&[v], 0.0, 1)
    }

    /// Scales every coordinate by `c`: `phi_m -> c^m phi_m`.
    pub fn scaled(&self, c: f64) -> Self {
        let phi = self
            .phi
            .iter()
            .enumerate()
            .map(|(m, v)| v * c.powi(m as i32))
            .collect();
        Self { s: self.s * c, phi }
    }

    pub fn phi(&self, m: u32) -> f64 {
        match m {
            1 => self.s,
            m => self.phi[m as usize],
        }
    }

    /// `s^a prod_{m in ms} phi_m`, folding `phi_1` into the power of `s`.
    pub(crate) fn mono(&self, a: i32, ms: impl IntoIterator<Item = u32>) -> f64 {
        let mut a = a;
        let mut v = 1.0;
        for m in ms {
            if m == 1 {
                a += 1;
            } else {
                v *= self.phi(m);
            }
        }
        if a == 0 {
            v
        } else {
            v * self.s.powi(a)
        }
    }
}

/// Largest power-sum order an operator output can reference for `f`.
pub(crate) fn stats_order(f: &TestFunction) -> u32 {
    (2 * f.max_order()).max(2)
}

/// Value of one mark factor.
pub(crate) fn factor_value(mf: &MarkFactor, st: &MarkStats) -> f64 {
    st.mono(mf.m0, mf.mvec.iter().copied())
}

/// Refuses negative powers of a block mass below the evaluation floor.
pub(crate) fn check_floor(f: &TestFunction, stats: &[MarkStats]) -> Result<()> {
    for (h, (mf, st)) in f.mark_factors().iter().zip(stats).enumerate() {
        if mf.m0 < 0 && st.s < TOLERANCES.mass_floor {
            return Err(domain(format!(
                "|z_{}| = {:e} is below the floor {:e} for a negative power",
                h + 1,
                st.s,
                TOLERANCES.mass_floor
            )));
        }
    }
    Ok(())
}

pub(crate) fn eval_marks(f: &TestFunction, stats: &[MarkStats]) -> f64 {
    f.mark_factors()
        .iter()
        .zip(stats)
        .map(|(mf, st)| factor_value(mf, st))
        .product()
}

/// Mutation acting on one block: total rate spread over `types` coordinates
/// (`None` for infinitely many, which leaves only the derivative in the mass).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Mutation {
    pub rate: f64,
    pub types: Option<usize>,
}

/// A block Wright–Fisher operator over the marks flagged in `group`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct BlockOp {
    pub group: Vec<bool>,
    pub mutation: Vec<Mutation>,
    pub total: f64,
}

/// `sum_i y_i d_i^2` applied to `s^a prod_q phi_{m_q}`.
fn diagonal(mf: &MarkFactor, st: &MarkStats) -> f64 {
    let a = mf.m0;
    let ms = &mf.mvec;
    let sum_m: i32 = ms.iter().sum::<u32>() as i32;
    let mut v = 0.0;
    if a != 0 {
        v += f64::from(a * (a - 1) + 2 * a * sum_m) * st.mono(a - 1, ms.iter().copied());
    }
    for q in 0..ms.len() {
        let mq = ms[q];
        let rest = ms.iter().enumerate().filter(|&(l, _)| l != q).map(|(_, &m)| m);
        v += f64::from(mq * (mq - 1)) * st.mono(a, rest.chain(std::iter::once(mq - 1)));
        for l in 0..ms.len() {
            if l == q {
                continue;
            }
            let ml = ms[l];
            let rest = ms
                .iter()
                .enumerate()
                .filter(|&(r, _)| r != q && r != l)
                .map(|(_, &m)| m);
            v += f64::from(mq * ml) * st.mono(a, rest.chain(std::iter::once(mq + ml - 1)));
        }
    }
    v
}

/// `sum_q m_q s^a phi_{m_q - 1} prod_{l != q} phi_{m_l}`: the sum over coordinates
/// of the non-mass part of the first derivative.
pub(crate) fn lowered_sum(mf: &MarkFactor, st: &MarkStats) -> f64 {
    let ms = &mf.mvec;
    (0..ms.len())
        .map(|q| {
            let rest = ms.iter().enumerate().filter(|&(l, _)| l != q).map(|(_, &m)| m);
            f64::from(ms[q]) * st.mono(mf.m0, rest.chain(std::iter::once(ms[q] - 1)))
        })
        .sum()
}

/// `sum_i mu_i d_i` applied to one mark factor.
fn mutation_term(mf: &MarkFactor, st: &MarkStats, mu: Mutation) -> f64 {
    if mu.rate == 0.0 {
        return 0.0;
    }
    let mut v = 0.0;
    if mf.m0 != 0 {
        v += f64::from(mf.m0) * st.mono(mf.m0 - 1, mf.mvec.iter().copied());
    }
    if let Some(n) = mu.types {
        v += lowered_sum(mf, st) / n as f64;
    }
    mu.rate * v
}

impl BlockOp {
    pub fn apply(&self, f: &TestFunction, stats: &[MarkStats]) -> f64 {
        let factors = f.mark_factors();
        let values: Vec<f64> = factors
            .iter()
            .zip(stats)
            .map(|(mf, st)| factor_value(mf, st))
            .collect();
        let total_value: f64 = values.iter().product();
        let mut first = 0.0;
        let mut degree = 0i64;
        for h in (0..factors.len()).filter(|&h| self.group[h]) {
            let mf = &factors[h];
            degree += i64::from(mf.degree());
            let local = diagonal(mf, &stats[h]) + mutation_term(mf, &stats[h], self.mutation[h]);
            if local != 0.0 {
                let others: f64 = values
                    .iter()
                    .enumerate()
                    .filter(|&(k, _)| k != h)
                    .map(|(_, v)| v)
                    .product();
                first += local * others;
            }
        }
        let d = degree as f64;
        0.5 * first - 0.5 * d * (d - 1.0) * total_value - 0.5 * self.total * d * total_value
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_drops_ones() {
        let m = MarkFactor::new(1, vec![1, 3, 2, 1]).unwrap();
        assert_eq!(m.mvec, vec![3, 2]);
        assert_eq!(m.degree(), 6);
        assert!(MarkFactor::new(0, vec![0]).is_err());
    }

    #[test]
    fn domain_condition() {
        assert!(MarkFactor::new(-1, vec![2]).unwrap().in_domain());
        assert!(!MarkFactor::new(-2, vec![2]).unwrap().in_domain());
        assert!(!MarkFactor::new(0, vec![]).unwrap().in_domain());
        let f = TestFunction::mass_power(0, 1, 2);
        assert!(f.require_limit_domain().is_ok());
        let g = TestFunction::new(vec![MarkFactor::new(-3, vec![2]).unwrap(), MarkFactor::one()]).unwrap();
        assert!(g.require_limit_domain().is_err());
    }

    #[test]
    fn stats_and_values() {
        let st = MarkStats::new(&[0.5, 0.5], 0.0, 4);
        assert_eq!(st.phi(2), 0.5);
        assert_eq!(st.phi(1), 1.0);
        let f = TestFunction::phi(0, 2, 1);
        assert_eq!(eval_marks(&f, &[st]), 0.5);
    }

    #[test]
    fn serde_round_trip() {
        let f = TestFunction::new(vec![
            MarkFactor::new(-1, vec![3, 2]).unwrap(),
            MarkFactor::new(2, vec![]).unwrap(),
        ])
        .unwrap();
        let json = serde_json::to_string(&f).unwrap();
        assert_eq!(json, r#"[{"m0":-1,"mvec":[3,2]},{"m0":2,"mvec":[]}]"#);
        let back: TestFunction = serde_json::from_str(&json).unwrap();
        assert_eq!(back, f);
        let raw: TestFunction = serde_json::from_str(r#"[{"m0":0,"mvec":[1,2]},{"m0":1}]"#).unwrap();
        assert_eq!(raw.mark(0).mvec, vec![2]);
        let g = TestFunction::mass_monomial(vec![1, 2]);
        let back: TestFunction = serde_json::from_str(&serde_json::to_string(&g).unwrap()).unwrap();
        assert_eq!(back, g);
    }
}
