//! State spaces and the deterministic maps between them.
//!
//! * [`SimplexPoint`]: a point of the `H`-simplex (mark masses).
//! * [`FlatSimplexPoint`]: a point of the `HK`-simplex, blocked by mark.
//! * [`OrderedMassVector`]: a truncated point of the closed Kingman simplex, i.e. a
//!   nonincreasing prefix of atoms plus the mass carried by all later coordinates.
//! * [`KingmanPoint`]: one ordered vector per mark with total mass at most one.
//!
//! The skew-product map `S(w, x) = (w_1 x_1, ..., w_H x_H)` and its inverse live
//! here, together with the ranking map that sorts frequencies within each mark.

use serde::{Deserialize, Serialize};

use crate::error::{domain, param, state, Error, Result};

/// Numerical tolerances shared by every validator in the crate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute tolerance on simplex sums (Euler steps drift off by O(step)).
    pub simplex_sum: f64,
    /// Smallest block mass at which negative powers of `|z_h|` are evaluated.
    pub mass_floor: f64,
}

pub const TOLERANCES: Tolerances = Tolerances {
    simplex_sum: 1e-9,
    mass_floor: 1e-8,
};

/// Mutation intensities `theta_1..theta_H` and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThetaParams {
    theta: Vec<f64>,
    theta_bar: f64,
}

impl ThetaParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(param("theta must have at least one entry"));
        }
        if let Some(bad) = theta.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(param(format!("theta entries must be positive and finite, got {bad}")));
        }
        let theta_bar = theta.iter().sum();
        Ok(Self { theta, theta_bar })
    }

    pub fn marks(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn get(&self, h: usize) -> f64 {
        self.theta[h]
    }

    pub fn theta_bar(&self) -> f64 {
        self.theta_bar
    }

    /// `theta_h >= 1` for every mark: the boundary of the mark simplex is then an
    /// entrance boundary and the mark-mass diffusion never leaves the interior.
    pub fn diffusion_valid(&self) -> bool {
        self.theta.iter().all(|&t| t >= 1.0)
    }

    pub fn require_diffusion_valid(&self) -> Result<()> {
        match self.theta.iter().position(|&t| t < 1.0) {
            None => Ok(()),
            Some(h) => Err(param(format!(
                "diffusion requires theta_h >= 1 for every mark; theta_{} = {}",
                h + 1,
                self.theta[h]
            ))),
        }
    }
}

impl TryFrom<Vec<f64>> for ThetaParams {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ThetaParams> for Vec<f64> {
    fn from(t: ThetaParams) -> Self {
        t.theta
    }
}

fn check_entries(v: &[f64], what: &str) -> Result<()> {
    for (i, &x) in v.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(state(format!("{what}: entry {i} is {x}")));
        }
    }
    Ok(())
}

fn check_unit_sum(v: &[f64], what: &str) -> Result<()> {
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > TOLERANCES.simplex_sum {
        return Err(state(format!("{what}: entries sum to {s}, expected 1")));
    }
    Ok(())
}

/// A point of the `H`-simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplexPoint {
    w: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.is_empty() {
            return Err(state("simplex point must have at least one coordinate"));
        }
        check_entries(&w, "simplex point")?;
        check_unit_sum(&w, "simplex point")?;
        Ok(Self { w })
    }

    /// Normalizes a nonnegative vector with positive sum.
    pub fn normalized(mut v: Vec<f64>) -> Result<Self> {
        check_entries(&v, "simplex point")?;
        let s: f64 = v.iter().sum();
        if s <= 0.0 {
            return Err(state("cannot normalize a zero vector"));
        }
        v.iter_mut().for_each(|x| *x /= s);
        Self::new(v)
    }

    pub fn uniform(dim: usize) -> Self {
        Self {
            w: vec![1.0 / dim as f64; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    pub fn is_interior(&self) -> bool {
        self.w.iter().all(|&x| x > 0.0)
    }
}

/// Truncated point of the closed Kingman simplex: descending atoms plus the
/// total mass of every coordinate past the truncation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderedMassVector {
    atoms: Vec<f64>,
    tail: f64,
}

impl OrderedMassVector {
    pub fn new(atoms: Vec<f64>, tail: f64) -> Result<Self> {
        check_entries(&atoms, "ordered mass vector")?;
        if !tail.is_finite() || tail < 0.0 {
            return Err(state(format!("tail mass must be nonnegative, got {tail}")));
        }
        if let Some(i) = atoms.windows(2).position(|p| p[1] > p[0]) {
            return Err(state(format!("atoms must be nonincreasing (index {})", i + 1)));
        }
        let v = Self { atoms, tail };
        if v.mass() > 1.0 + TOLERANCES.simplex_sum {
            return Err(state(format!("mass {} exceeds one", v.mass())));
        }
        Ok(v)
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// Total mass `|x| = sum(atoms) + tail`.
    pub fn mass(&self) -> f64 {
        self.atoms.iter().sum::<f64>() + self.tail
    }

    /// Power sum over the atoms. The tail is treated as dust and only enters `m = 1`.
    pub fn power_sum(&self, m: u32) -> f64 {
        match m {
            0 => self.atoms.len() as f64,
            1 => self.mass(),
            _ => self.atoms.iter().map(|x| x.powi(m as i32)).sum(),
        }
    }

    pub(crate) fn scaled(&self, c: f64) -> Self {
        Self {
            atoms: self.atoms.iter().map(|x| x * c).collect(),
            tail: self.tail * c,
        }
    }

    pub(crate) fn from_parts_unchecked(atoms: Vec<f64>, tail: f64) -> Self {
        Self { atoms, tail }
    }
}

/// Point of the generalized Kingman simplex: one ordered vector per mark.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KingmanPoint {
    marks: Vec<OrderedMassVector>,
}

impl KingmanPoint {
    pub fn new(marks: Vec<OrderedMassVector>) -> Result<Self> {
        if marks.is_empty() {
            return Err(state("Kingman point needs at least one mark"));
        }
        let p = Self { marks };
        if p.total_mass() > 1.0 + TOLERANCES.simplex_sum {
            return Err(state(format!("total mass {} exceeds one", p.total_mass())));
        }
        Ok(p)
    }

    pub fn marks(&self) -> &[OrderedMassVector] {
        &self.marks
    }

    pub fn num_marks(&self) -> usize {
        self.marks.len()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.marks.iter().map(OrderedMassVector::mass).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.marks.iter().map(OrderedMassVector::mass).sum()
    }

    /// Total mass one and every mark carrying positive mass.
    pub fn is_interior(&self) -> bool {
        (self.total_mass() - 1.0).abs() <= TOLERANCES.simplex_sum
            && self.marks.iter().all(|m| m.mass() > 0.0)
    }
}

/// Point of the `HK`-simplex with coordinate `(h, i)` stored at `h * K + i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatSimplexPoint {
    z: Vec<f64>,
    marks: usize,
    types: usize,
}

impl FlatSimplexPoint {
    pub fn new(z: Vec<f64>, marks: usize, types: usize) -> Result<Self> {
        if marks == 0 || types == 0 {
            return Err(param("need at least one mark and one type"));
        }
        if z.len() != marks * types {
            return Err(Error::DimensionMismatch {
                expected: marks * types,
                found: z.len(),
            });
        }
        check_entries(&z, "flat simplex point")?;
        check_unit_sum(&z, "flat simplex point")?;
        Ok(Self { z, marks, types })
    }

    pub fn marks(&self) -> usize {
        self.marks
    }

    pub fn types(&self) -> usize {
        self.types
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.z
    }

    pub fn block(&self, h: usize) -> &[f64] {
        &self.z[h * self.types..(h + 1) * self.types]
    }

    pub fn block_mass(&self, h: usize) -> f64 {
        self.block(h).iter().sum()
    }

    pub fn block_masses(&self) -> Vec<f64> {
        (0..self.marks).map(|h| self.block_mass(h)).collect()
    }

    /// Every block carries positive mass.
    pub fn is_interior(&self) -> bool {
        (0..self.marks).all(|h| self.block_mass(h) > 0.0)
    }
}

fn check_marks(w: &SimplexPoint, n: usize) -> Result<()> {
    if w.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: w.dim(),
            found: n,
        });
    }
    Ok(())
}

/// `S(w, x)` on the Kingman side: mark `h` becomes `w_h * x_h`.
pub fn compose(w: &SimplexPoint, x: &[OrderedMassVector]) -> Result<KingmanPoint> {
    check_marks(w, x.len())?;
    for (h, xh) in x.iter().enumerate() {
        if (xh.mass() - 1.0).abs() > TOLERANCES.simplex_sum {
            return Err(state(format!("frequency vector {} has mass {}", h + 1, xh.mass())));
        }
    }
    let marks = x
        .iter()
        .zip(w.as_slice())
        .map(|(xh, &wh)| xh.scaled(wh))
        .collect();
    KingmanPoint::new(marks)
}

/// `S(w, x)` on the finite side: block `h` becomes `w_h * x_h`.
pub fn compose_flat(w: &SimplexPoint, x: &[SimplexPoint]) -> Result<FlatSimplexPoint> {
    check_marks(w, x.len())?;
    let k = x[0].dim();
    if let Some(bad) = x.iter().find(|xh| xh.dim() != k) {
        return Err(Error::DimensionMismatch {
            expected: k,
            found: bad.dim(),
        });
    }
    let z = x
        .iter()
        .zip(w.as_slice())
        .flat_map(|(xh, &wh)| xh.as_slice().iter().map(move |v| wh * v))
        .collect();
    FlatSimplexPoint::new(z, w.dim(), k)
}

/// `S^{-1}` on the interior of the generalized Kingman simplex.
pub fn decompose(z: &KingmanPoint) -> Result<(SimplexPoint, Vec<OrderedMassVector>)> {
    if !z.is_interior() {
        return Err(domain(
            "S^-1 is only defined when total mass is one and every mark has positive mass",
        ));
    }
    let masses = z.masses();
    let x = z
        .marks()
        .iter()
        .zip(&masses)
        .map(|(m, &s)| m.scaled(1.0 / s))
        .collect();
    Ok((SimplexPoint::new(masses)?, x))
}

/// `S^{-1}` on flat points with every block mass positive.
pub fn decompose_flat(z: &FlatSimplexPoint) -> Result<(SimplexPoint, Vec<SimplexPoint>)> {
    let masses = z.block_masses();
    if let Some(h) = masses.iter().position(|&m| m <= 0.0) {
        return Err(domain(format!("block {} has zero mass", h + 1)));
    }
    let x = (0..z.marks())
        .map(|h| {
            let s = masses[h];
            SimplexPoint::new(z.block(h).iter().map(|v| v / s).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((SimplexPoint::new(masses)?, x))
}

/// Descending order statistics, zero tail. Ties keep their input order.
pub fn rank(x: &[f64]) -> Result<OrderedMassVector> {
    if let Some(bad) = x.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(state(format!("cannot rank negative or non-finite entry {bad}")));
    }
    let mut atoms = x.to_vec();
    atoms.sort_by(|a, b| b.total_cmp(a));
    OrderedMassVector::new(atoms, 0.0)
}

/// Per-block ranking of a flat point.
pub fn rank_blocks(z: &FlatSimplexPoint) -> Result<KingmanPoint> {
    if let Some(h) = (0..z.marks()).position(|h| z.block_mass(h) <= 0.0) {
        return Err(domain(format!("block {} has zero mass", h + 1)));
    }
    let marks = (0..z.marks())
        .map(|h| rank(z.block(h)))
        .collect::<Result<Vec<_>>>()?;
    KingmanPoint::new(marks)
}

/// Ranking on the product side: masses untouched, each frequency vector sorted.
pub fn rank_product(
    w: &SimplexPoint,
    x: &[SimplexPoint],
) -> Result<(SimplexPoint, Vec<OrderedMassVector>)> {
    check_marks(w, x.len())?;
    let ranked = x
        .iter()
        .map(|xh| rank(xh.as_slice()))
        .collect::<Result<Vec<_>>>()?;
    Ok((w.clone(), ranked))
}

/// One term of the two-mark sequence that converges in the product topology to a
/// boundary point of the Kingman simplex while `S^{-1}` oscillates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryTerm {
    pub n: usize,
    pub z: KingmanPoint,
    pub w: SimplexPoint,
    pub x: Vec<OrderedMassVector>,
}

/// Term `n` truncated after `depth` coordinates per mark.
///
/// Mark 1 has coordinates `2^-(i+2) + [1 + (-1)^n] / (8n)` for `i <= n`, mark 2
/// has `2^-(i+1) + [1 + (-1)^(n+1)] / (8n)`; past `n` only the geometric part remains.
pub fn boundary_sequence(n: usize, depth: usize) -> Result<BoundaryTerm> {
    if n == 0 || depth == 0 {
        return Err(param("boundary sequence needs n >= 1 and depth >= 1"));
    }
    let bump = 1.0 / (8.0 * n as f64);
    let (bump1, bump2) = if n % 2 == 0 { (2.0 * bump, 0.0) } else { (0.0, 2.0 * bump) };
    let build = |offset: i32, b: f64| -> Result<OrderedMassVector> {
        let atoms = (1..=depth)
            .map(|i| 2f64.powi(-(i as i32 + offset)) + if i <= n { b } else { 0.0 })
            .collect();
        // geometric remainder plus the bumps that fall past the truncation
        let tail = 2f64.powi(-(depth as i32 + offset)) + n.saturating_sub(depth) as f64 * b;
        OrderedMassVector::new(atoms, tail)
    };
    let z = KingmanPoint::new(vec![build(2, bump1)?, build(1, bump2)?])?;
    let (w, x) = decompose(&z)?;
    Ok(BoundaryTerm { n, z, w, x })
}

/// The two subsequential limits of `S^{-1}(z^n)`, truncated after `depth`
/// coordinates: `[odd n, even n]`.
///
/// Odd `n`: `w = (1/4, 3/4)`, `x_1i = 2^-i`, `x_2i = (2/3) 2^-i`.
/// Even `n`: `w = (1/2, 1/2)`, `x_1i = 2^-(i+1)`, `x_2i = 2^-i`.
pub fn boundary_limit_points(depth: usize) -> [(SimplexPoint, Vec<OrderedMassVector>); 2] {
    let geometric = |scale: f64, offset: i32| {
        let atoms = (1..=depth)
            .map(|i| scale * 2f64.powi(-(i as i32 + offset)))
            .collect();
        OrderedMassVector::from_parts_unchecked(atoms, scale * 2f64.powi(-(depth as i32 + offset)))
    };
    [
        (
            SimplexPoint { w: vec![0.25, 0.75] },
            vec![geometric(1.0, 0), geometric(2.0 / 3.0, 0)],
        ),
        (
            SimplexPoint { w: vec![0.5, 0.5] },
            vec![geometric(1.0, 1), geometric(1.0, 0)],
        ),
    ]
}
