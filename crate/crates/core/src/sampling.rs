//! Samplers for the stationary laws: Dirichlet (via log-gamma normalization),
//! Poisson–Dirichlet (GEM stick-breaking, then ranked), the multiple
//! Poisson–Dirichlet law, and the grouped flat Dirichlet used for
//! self-similarity checks.
//!
//! Every random object is driven by a [`SeedSpec`]: a master seed plus a stream
//! id, mapped onto a ChaCha8 key and stream. Replicate `r` of a batch always uses
//! `seed.child(r)`, so results do not depend on how rayon schedules the work.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{param, state, Result};
use crate::simplex::{
    compose_flat, FlatSimplexPoint, KingmanPoint, OrderedMassVector, SimplexPoint, ThetaParams,
};

/// Reproducible random stream identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub master_seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

impl SeedSpec {
    pub const fn new(master_seed: u64, stream_id: u64) -> Self {
        Self {
            master_seed,
            stream_id,
        }
    }

    /// Generator for this stream. Same spec, same bytes.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// Nested stream `k` below this one. The child key is a hash of the
    /// parent's (master, stream) pair, so children of distinct parents use
    /// distinct keys, and siblings share a key but never a stream.
    pub fn child(&self, k: u64) -> SeedSpec {
        SeedSpec {
            master_seed: splitmix64(self.master_seed ^ splitmix64(self.stream_id.wrapping_add(1))),
            stream_id: k,
        }
    }
}

/// Runs `f` for replicates `0..n` in parallel, each on `seed.child(r)`.
/// Output order is replicate order regardless of the thread pool.
pub fn replicate<T, F>(seed: SeedSpec, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, &mut ChaCha8Rng) -> T + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|r| f(r, &mut seed.child(r as u64).rng()))
        .collect()
}

/// Natural log of a Gamma(shape, 1) variate.
///
/// For shape < 1 the variate is `G(shape + 1) * U^(1/shape)`, kept in log space:
/// with shapes around 1e-3 the power `U^(1/shape)` underflows to zero in linear
/// space long before it becomes irrelevant after normalization.
#[derive(Debug, Clone, Copy)]
pub struct LogGamma {
    gamma: Gamma<f64>,
    inv_shape: Option<f64>,
}

impl LogGamma {
    pub fn new(shape: f64) -> Result<Self> {
        if !(shape.is_finite() && shape > 0.0) {
            return Err(param(format!("gamma shape must be positive, got {shape}")));
        }
        let (boosted, inv_shape) = if shape < 1.0 {
            (shape + 1.0, Some(1.0 / shape))
        } else {
            (shape, None)
        };
        let gamma = Gamma::new(boosted, 1.0).map_err(|e| param(e.to_string()))?;
        Ok(Self { gamma, inv_shape })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let g: f64 = self.gamma.sample(rng);
        match self.inv_shape {
            None => g.ln(),
            Some(inv) => {
                // open interval (0, 1]
                let u: f64 = 1.0 - rng.random::<f64>();
                g.ln() + u.ln() * inv
            }
        }
    }
}

/// Dir(alpha) by gamma normalization.
#[derive(Debug, Clone)]
pub struct Dirichlet {
    alpha: Vec<f64>,
    gammas: Vec<LogGamma>,
}

impl Dirichlet {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(param("Dirichlet needs at least one parameter"));
        }
        let gammas = alpha
            .iter()
            .map(|&a| LogGamma::new(a))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { alpha, gammas })
    }

    /// Symmetric `Dir(a, ..., a)` in dimension `dim`.
    pub fn symmetric(a: f64, dim: usize) -> Result<Self> {
        Self::new(vec![a; dim])
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn dim(&self) -> usize {
        self.alpha.len()
    }

    /// Writes a draw into `out`, which must have length `dim()`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.alpha.len());
        let mut max = f64::NEG_INFINITY;
        for (o, g) in out.iter_mut().zip(&self.gammas) {
            *o = g.sample(rng);
            max = max.max(*o);
        }
        let mut sum = 0.0;
        for o in out.iter_mut() {
            *o = (*o - max).exp();
            sum += *o;
        }
        // the maximal coordinate contributes exactly 1, so sum >= 1
        out.iter_mut().for_each(|o| *o /= sum);
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.alpha.len()];
        self.sample_into(rng, &mut out);
        out
    }

    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> SimplexPoint {
        SimplexPoint::new(self.sample(rng)).expect("normalized gamma draw is a simplex point")
    }
}

/// Kingman's PD(theta), truncated after `truncation` stick-breaking atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonDirichlet {
    theta: f64,
    truncation: usize,
}

pub const DEFAULT_TRUNCATION: usize = 1000;

impl PoissonDirichlet {
    pub fn new(theta: f64, truncation: usize) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(param(format!("PD parameter must be positive, got {theta}")));
        }
        if truncation == 0 {
            return Err(param("PD truncation must be at least one atom"));
        }
        Ok(Self { theta, truncation })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// GEM(theta) atoms, ranked, with the unbroken remainder as tail.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> OrderedMassVector {
        let inv = 1.0 / self.theta;
        let mut ln_rest = 0.0f64;
        let mut atoms = Vec::with_capacity(self.truncation);
        for _ in 0..self.truncation {
            // 1 - V = U^(1/theta) with V ~ Beta(1, theta)
            let ln_keep = (1.0 - rng.random::<f64>()).ln() * inv;
            atoms.push(ln_rest.exp() * -ln_keep.exp_m1());
            ln_rest += ln_keep;
        }
        atoms.sort_by(|a, b| b.total_cmp(a));
        OrderedMassVector::from_parts_unchecked(atoms, ln_rest.exp())
    }
}

/// The multiple Poisson–Dirichlet law: `z_h = v_h * xi_h` with `v ~ Dir(theta)`
/// and independent `xi_h ~ PD(theta_h)`.
#[derive(Debug, Clone)]
pub struct MultiplePd {
    theta: ThetaParams,
    truncation: usize,
    masses: Dirichlet,
    marks: Vec<PoissonDirichlet>,
}

/// Specification of a multiple Poisson–Dirichlet draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpdSpec {
    pub theta: ThetaParams,
    pub truncation: usize,
}

impl MultiplePd {
    pub fn new(spec: &MpdSpec) -> Result<Self> {
        let marks = spec
            .theta
            .theta()
            .iter()
            .map(|&t| PoissonDirichlet::new(t, spec.truncation))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            masses: Dirichlet::new(spec.theta.theta().to_vec())?,
            theta: spec.theta.clone(),
            truncation: spec.truncation,
            marks,
        })
    }

    pub fn theta(&self) -> &ThetaParams {
        &self.theta
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> KingmanPoint {
        let v = self.masses.sample(rng);
        let marks = self
            .marks
            .iter()
            .zip(&v)
            .map(|(pd, &vh)| pd.sample(rng).scaled(vh))
            .collect();
        KingmanPoint::new(marks).expect("scaled PD draws have total mass one")
    }
}

/// A flat Dirichlet draw together with its grouping into masses and frequencies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupedSample {
    pub z: FlatSimplexPoint,
    pub upsilon: SimplexPoint,
    pub xi: Vec<SimplexPoint>,
}

/// `Dir_HK` with `theta_h / K` repeated `K` times per mark, and the equivalent
/// product construction `Dir_H(theta) x Dir_K(theta_1/K) x ... x Dir_K(theta_H/K)`.
#[derive(Debug, Clone)]
pub struct GroupedDirichlet {
    types: usize,
    flat: Dirichlet,
    masses: Dirichlet,
    blocks: Vec<Dirichlet>,
}

impl GroupedDirichlet {
    pub fn new(theta: &ThetaParams, types: usize) -> Result<Self> {
        if types == 0 {
            return Err(param("number of types must be at least one"));
        }
        let k = types as f64;
        let alpha = theta
            .theta()
            .iter()
            .flat_map(|&t| std::iter::repeat_n(t / k, types))
            .collect();
        Ok(Self {
            types,
            flat: Dirichlet::new(alpha)?,
            masses: Dirichlet::new(theta.theta().to_vec())?,
            blocks: theta
                .theta()
                .iter()
                .map(|&t| Dirichlet::symmetric(t / k, types))
                .collect::<Result<Vec<_>>>()?,
        })
    }

    pub fn types(&self) -> usize {
        self.types
    }

    pub fn marks(&self) -> usize {
        self.blocks.len()
    }

    /// Draws the flat vector and groups it: `v_h = |z_h|`, `xi_h = z_h / |z_h|`.
    pub fn sample_grouped<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GroupedSample> {
        let z = FlatSimplexPoint::new(self.flat.sample(rng), self.marks(), self.types)?;
        let (upsilon, xi) = crate::simplex::decompose_flat(&z)
            .map_err(|e| state(format!("flat Dirichlet draw with an empty block: {e}")))?;
        Ok(GroupedSample { z, upsilon, xi })
    }

    /// Draws independent masses and frequencies and composes them.
    pub fn sample_product<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<GroupedSample> {
        let upsilon = self.masses.sample_point(rng);
        let xi: Vec<_> = self.blocks.iter().map(|d| d.sample_point(rng)).collect();
        let z = compose_flat(&upsilon, &xi)?;
        Ok(GroupedSample { z, upsilon, xi })
    }
}

pub fn sample_dirichlet(alpha: &[f64], seed: SeedSpec) -> Result<SimplexPoint> {
    Ok(Dirichlet::new(alpha.to_vec())?.sample_point(&mut seed.rng()))
}

pub fn sample_pd(theta: f64, truncation: usize, seed: SeedSpec) -> Result<OrderedMassVector> {
    Ok(PoissonDirichlet::new(theta, truncation)?.sample(&mut seed.rng()))
}

pub fn sample_mpd(spec: &MpdSpec, seed: SeedSpec) -> Result<KingmanPoint> {
    Ok(MultiplePd::new(spec)?.sample(&mut seed.rng()))
}

pub fn sample_grouped_dirichlet(
    theta: &ThetaParams,
    types: usize,
    seed: SeedSpec,
) -> Result<GroupedSample> {
    if types < 2 {
        return Err(param("grouped Dirichlet needs K >= 2"));
    }
    GroupedDirichlet::new(theta, types)?.sample_grouped(&mut seed.rng())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_se(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    #[test]
    fn same_seed_same_bytes() {
        let s = SeedSpec::new(7, 3);
        let a = sample_dirichlet(&[0.5, 1.0, 2.0], s).unwrap();
        let b = sample_dirichlet(&[0.5, 1.0, 2.0], s).unwrap();
        assert_eq!(a, b);
        let c = sample_dirichlet(&[0.5, 1.0, 2.0], SeedSpec::new(7, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn children_are_distinct() {
        let s = SeedSpec::new(1, 0);
        assert_ne!(s.child(0), s.child(1));
        assert_ne!(s.child(0), SeedSpec::new(1, 1).child(0));
        let x: f64 = s.child(0).rng().random();
        let y: f64 = s.child(1).rng().random();
        assert_ne!(x, y);
    }

    #[test]
    fn replicate_is_ordered_and_reproducible() {
        let s = SeedSpec::new(11, 0);
        let a = replicate(s, 64, |_, rng| rng.random::<u64>());
        let b: Vec<u64> = (0..64).map(|r| s.child(r).rng().random()).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn tiny_shape_dirichlet_stays_finite() {
        let d = Dirichlet::symmetric(1e-3, 50).unwrap();
        let mut rng = SeedSpec::new(5, 0).rng();
        for _ in 0..200 {
            let x = d.sample(&mut rng);
            assert!(x.iter().all(|v| v.is_finite() && *v >= 0.0));
            assert!((x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dirichlet_mean_and_second_moment() {
        let d = Dirichlet::new(vec![2.0, 3.0]).unwrap();
        let draws = replicate(SeedSpec::new(3, 0), 100_000, |_, rng| d.sample(rng)[0]);
        let (m, se) = mean_se(&draws);
        assert!((m - 0.4).abs() < 3.0 * se, "{m} +- {se}");
        let sq: Vec<f64> = draws.iter().map(|x| x * x).collect();
        let (m2, se2) = mean_se(&sq);
        assert!((m2 - 0.2).abs() < 3.0 * se2, "{m2} +- {se2}");
    }

    #[test]
    fn uniform_beta_mean() {
        let d = Dirichlet::new(vec![1.0, 1.0]).unwrap();
        let draws = replicate(SeedSpec::new(4, 0), 100_000, |_, rng| d.sample(rng)[0]);
        let (m, se) = mean_se(&draws);
        assert!((m - 0.5).abs() < 3.0 * se);
    }

    #[test]
    fn pd_draw_is_ranked_and_complete() {
        let pd = PoissonDirichlet::new(1.0, 1000).unwrap();
        let x = pd.sample(&mut SeedSpec::new(1, 1).rng());
        assert!(x.atoms().windows(2).all(|p| p[0] >= p[1]));
        assert!((x.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pd_tail_is_negligible() {
        let pd = PoissonDirichlet::new(2.0, 1000).unwrap();
        let tails = replicate(SeedSpec::new(2, 0), 1000, |_, rng| pd.sample(rng).tail());
        assert!(tails.iter().all(|&t| t < 1e-100));
    }

    #[test]
    fn pd_second_moment() {
        let pd = PoissonDirichlet::new(1.0, 1000).unwrap();
        let phi2 = replicate(SeedSpec::new(9, 0), 20_000, |_, rng| pd.sample(rng).power_sum(2));
        let (m, se) = mean_se(&phi2);
        assert!((m - 0.5).abs() < 3.0 * se, "{m} +- {se}");
    }

    #[test]
    fn mpd_single_mark_total_mass_one() {
        let spec = MpdSpec {
            theta: ThetaParams::new(vec![1.5]).unwrap(),
            truncation: 200,
        };
        let z = sample_mpd(&spec, SeedSpec::new(0, 0)).unwrap();
        assert_eq!(z.num_marks(), 1);
        assert!((z.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grouped_and_product_agree_structurally() {
        let theta = ThetaParams::new(vec![2.0, 3.0]).unwrap();
        let g = GroupedDirichlet::new(&theta, 8).unwrap();
        let mut rng = SeedSpec::new(8, 0).rng();
        let a = g.sample_grouped(&mut rng).unwrap();
        let b = g.sample_product(&mut rng).unwrap();
        for s in [a, b] {
            assert_eq!(s.z.as_slice().len(), 16);
            for h in 0..2 {
                let m = s.upsilon.as_slice()[h];
                for (i, v) in s.xi[h].as_slice().iter().enumerate() {
                    assert!((m * v - s.z.block(h)[i]).abs() < 1e-15);
                }
            }
        }
        assert!(sample_grouped_dirichlet(&theta, 1, SeedSpec::new(0, 0)).is_err());
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(Dirichlet::new(vec![1.0, 0.0]).is_err());
        assert!(PoissonDirichlet::new(-1.0, 10).is_err());
        assert!(PoissonDirichlet::new(1.0, 0).is_err());
    }
}
