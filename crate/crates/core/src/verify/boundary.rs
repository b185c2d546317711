//! The two-mark sequence converging in `K_H` to a point with an empty mark
//! structure while its decomposition `S^-1` oscillates between two limits.
//!
//! On each parity subsequence the masses `w` are constant and every frequency
//! atom is `limit + c / n` exactly, so two terms of equal parity determine the
//! limit by Richardson extrapolation: `(n2 a(n2) - n1 a(n1)) / (n2 - n1)`.

use serde::Serialize;

use crate::error::{param, Result};
use crate::simplex::{boundary_limit_points, boundary_sequence, BoundaryTerm};

use super::TestReport;

/// One parity class: the terms used, the extrapolated decomposition and its
/// distance to the stated limit point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParityLimit {
    pub parity: &'static str,
    pub n_pair: (usize, usize),
    pub w: Vec<f64>,
    /// Extrapolated atoms `x_h1..x_h,depth` per mark.
    pub x: Vec<Vec<f64>>,
    pub expected_w: Vec<f64>,
    pub expected_x: Vec<Vec<f64>>,
    /// Componentwise sup distance over `w` and the first `depth` atoms.
    pub error: f64,
    /// Same distance for the raw term `n2`, before extrapolation.
    pub raw_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryDemo {
    pub depth: usize,
    pub terms: Vec<BoundaryTerm>,
    /// `[odd, even]`.
    pub limits: Vec<ParityLimit>,
    pub report: TestReport,
}

fn sup_distance(w: &[f64], x: &[Vec<f64>], ew: &[f64], ex: &[Vec<f64>]) -> f64 {
    let dw = w.iter().zip(ew).map(|(a, b)| (a - b).abs());
    let dx = x
        .iter()
        .zip(ex)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(p, q)| (p - q).abs()));
    dw.chain(dx).fold(0.0, f64::max)
}

/// Terms `1..=n_max` truncated at `depth`, and both subsequential limits.
/// Needs two terms of each parity with `n >= depth`.
pub fn boundary_demo(depth: usize, n_max: usize) -> Result<BoundaryDemo> {
    if depth == 0 || n_max < depth + 3 {
        return Err(param("boundary demo needs depth >= 1 and n_max >= depth + 3"));
    }
    let terms = (1..=n_max)
        .map(|n| boundary_sequence(n, depth))
        .collect::<Result<Vec<_>>>()?;
    let expected = boundary_limit_points(depth);
    let mut limits = Vec::with_capacity(2);
    for (parity, (ew, ex)) in ["odd", "even"].into_iter().zip(expected.iter()) {
        let want = usize::from(parity == "odd");
        let mut ns = (depth..=n_max).rev().filter(|n| n % 2 == want);
        let (n2, n1) = (ns.next().expect("checked"), ns.next().expect("checked"));
        let (t1, t2) = (&terms[n1 - 1], &terms[n2 - 1]);
        let (f1, f2) = (n1 as f64, n2 as f64);
        let x: Vec<Vec<f64>> = t1
            .x
            .iter()
            .zip(&t2.x)
            .map(|(a, b)| {
                a.atoms()
                    .iter()
                    .zip(b.atoms())
                    .map(|(p, q)| (f2 * q - f1 * p) / (f2 - f1))
                    .collect()
            })
            .collect();
        let w = t2.w.as_slice().to_vec();
        let expected_w = ew.as_slice().to_vec();
        let expected_x: Vec<Vec<f64>> = ex.iter().map(|m| m.atoms().to_vec()).collect();
        let raw_x: Vec<Vec<f64>> = t2.x.iter().map(|m| m.atoms().to_vec()).collect();
        limits.push(ParityLimit {
            parity,
            n_pair: (n1, n2),
            error: sup_distance(&w, &x, &expected_w, &expected_x),
            raw_error: sup_distance(&w, &raw_x, &expected_w, &expected_x),
            w,
            x,
            expected_w,
            expected_x,
        });
    }
    let worst = limits.iter().map(|l| l.error).fold(0.0, f64::max);
    let report = TestReport::new(
        format!("boundary limits depth={depth}"),
        worst,
        2f64.powi(-(depth as i32)),
    )
    .with_detail(format!(
        "odd n -> w=(1/4,3/4), even n -> w=(1/2,1/2); raw distances at n_max: {:.3e}, {:.3e}",
        limits[0].raw_error, limits[1].raw_error
    ));
    Ok(BoundaryDemo {
        depth,
        terms,
        limits,
        report,
    })
}
