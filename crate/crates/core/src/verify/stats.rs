//! Compensated sums, sample moments, correlation and the two-sample
//! Kolmogorov–Smirnov test.
//!
//! Reductions run sequentially over replicate-ordered data, so a fixed seed
//! gives bitwise identical statistics whatever the thread count.

use serde::Serialize;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = CompensatedSum::new();
    values.into_iter().for_each(|x| s.add(x));
    s.value()
}

/// Sample mean and its standard error (two-pass, compensated).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

pub fn mean_se(values: &[f64]) -> MeanSe {
    let n = values.len();
    if n == 0 {
        return MeanSe {
            mean: f64::NAN,
            se: f64::NAN,
            n,
        };
    }
    let mean = compensated_sum(values.iter().copied()) / n as f64;
    let se = if n > 1 {
        let ss = compensated_sum(values.iter().map(|x| (x - mean).powi(2)));
        (ss / (n - 1) as f64 / n as f64).sqrt()
    } else {
        f64::INFINITY
    };
    MeanSe { mean, se, n }
}

/// Sample correlation of `x` and `y` together with the standard error of the
/// mean of the standardized products (which estimates the correlation).
pub fn correlation(x: &[f64], y: &[f64]) -> MeanSe {
    assert_eq!(x.len(), y.len(), "correlation of unequal samples");
    let (mx, my) = (mean_se(x), mean_se(y));
    let n = x.len() as f64;
    let sx = (compensated_sum(x.iter().map(|v| (v - mx.mean).powi(2))) / n).sqrt();
    let sy = (compensated_sum(y.iter().map(|v| (v - my.mean).powi(2))) / n).sqrt();
    let prods: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mx.mean) / sx * (b - my.mean) / sy)
        .collect();
    mean_se(&prods)
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = f64::from(k);
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-300 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

fn effective_scale(n1: usize, n2: usize) -> f64 {
    let ne = (n1 as f64 * n2 as f64) / (n1 + n2) as f64;
    let r = ne.sqrt();
    r + 0.12 + 0.11 / r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    /// `sup |F1 - F2|`.
    pub d: f64,
    pub p_value: f64,
    /// Largest `d` accepted at the requested level.
    pub critical_d: f64,
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic distribution and
/// Stephens' effective-size correction.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> KsResult {
    assert!(!a.is_empty() && !b.is_empty(), "KS needs two nonempty samples");
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let scale = effective_scale(a.len(), b.len());
    // invert the survival function by bisection
    let (mut lo, mut hi) = (0.2, 10.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_sf(mid) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    KsResult {
        d,
        p_value: kolmogorov_sf(scale * d),
        critical_d: hi / scale,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensation_recovers_small_terms() {
        let mut v = vec![1.0];
        v.extend(std::iter::repeat_n(1e-16, 10_000));
        v.push(-1.0);
        assert!((compensated_sum(v.iter().copied()) - 1e-12).abs() < 1e-20);
        let naive: f64 = v.iter().sum();
        assert!((naive - 1e-12).abs() > 1e-14);
    }

    #[test]
    fn mean_and_se() {
        let m = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m.mean, 2.5);
        assert!((m.se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_quantiles() {
        // classical critical values: 1.358 at 5%, 1.628 at 1%
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a: Vec<f64> = (0..100).map(f64::from).collect();
        let r = ks_two_sample(&a, &a, 0.01);
        assert_eq!(r.d, 0.0);
        assert_eq!(r.p_value, 1.0);
        let b: Vec<f64> = (200..300).map(f64::from).collect();
        let r = ks_two_sample(&a, &b, 0.01);
        assert_eq!(r.d, 1.0);
        assert!(r.p_value < 1e-10 && r.d > r.critical_d);
    }

    #[test]
    fn ks_handles_ties() {
        let a = [0.0, 0.0, 1.0, 1.0];
        let b = [0.0, 1.0, 1.0, 1.0];
        assert!((ks_two_sample(&a, &b, 0.01).d - 0.25).abs() < 1e-15);
    }

    #[test]
    fn perfect_correlation() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let c = correlation(&x, &x);
        assert!((c.mean - 1.0).abs() < 1e-14);
    }
}
