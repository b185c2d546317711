use multipd::generators::partials::{
    analytic_partials, apply_via_partials, finite_difference_oracle, PartialsOperator,
};
use multipd::generators::{
    apply_implicit_b, decompose_b, eval_testfunction, random_flat_points, Generator, GeneratorKind,
    MarkFactor, Point, TestFunction,
};
use multipd::simplex::{compose_flat, decompose_flat, rank_blocks, OrderedMassVector};
use multipd::{KingmanPoint, SeedSpec, SimplexPoint, ThetaParams};

fn tf(marks: Vec<(i32, Vec<u32>)>) -> TestFunction {
    TestFunction::new(
        marks
            .into_iter()
            .map(|(m0, mv)| MarkFactor::new(m0, mv).unwrap())
            .collect(),
    )
    .unwrap()
}

/// Elements of the limit domain for two marks, including negative mass powers.
fn limit_functions() -> Vec<TestFunction> {
    vec![
        tf(vec![(1, vec![]), (0, vec![])]),
        tf(vec![(0, vec![2]), (0, vec![])]),
        tf(vec![(0, vec![2, 3]), (1, vec![])]),
        tf(vec![(-1, vec![2]), (0, vec![])]),
        tf(vec![(-1, vec![2]), (0, vec![3])]),
        tf(vec![(-2, vec![3]), (2, vec![])]),
        tf(vec![(-3, vec![2, 2, 2]), (-1, vec![2])]),
        tf(vec![(2, vec![4]), (1, vec![2, 2])]),
    ]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn limit_closed_forms_match_explicit_partials() {
    let theta = ThetaParams::new(vec![1.5, 2.5]).unwrap();
    let b = Generator::new(GeneratorKind::B, theta.clone());
    let bhat = Generator::new(GeneratorKind::BHat, theta.clone());
    let points = random_flat_points(2, 5, 200, SeedSpec::new(11, 0)).unwrap();
    for f in limit_functions() {
        for z in &points {
            let blocks = [z.block(0), z.block(1)];
            let ranked = rank_blocks(z).unwrap();
            let closed = b.apply(&f, &Point::Kingman(&ranked)).unwrap();
            let literal = apply_via_partials(PartialsOperator::Limit, theta.theta(), &f, &blocks);
            assert!(close(closed, literal, 1e-9), "{f:?}: {closed} vs {literal}");
            let closed_hat = bhat.apply(&f, &Point::Flat(z)).unwrap();
            let literal_hat =
                apply_via_partials(PartialsOperator::LimitUncorrected, theta.theta(), &f, &blocks);
            assert!(close(closed_hat, literal_hat, 1e-9));
        }
    }
}

#[test]
fn flat_closed_form_matches_explicit_partials() {
    let theta = ThetaParams::new(vec![1.0, 3.0]).unwrap();
    let points = random_flat_points(2, 4, 200, SeedSpec::new(12, 0)).unwrap();
    let bk = Generator::new(GeneratorKind::BK { types: 4 }, theta.clone());
    let mut fs = limit_functions();
    fs.push(tf(vec![(3, vec![]), (-2, vec![])]));
    for f in fs {
        for z in &points {
            let blocks = [z.block(0), z.block(1)];
            let closed = bk.apply(&f, &Point::Flat(z)).unwrap();
            let literal = apply_via_partials(PartialsOperator::FlatK, theta.theta(), &f, &blocks);
            assert!(close(closed, literal, 1e-9), "{f:?}: {closed} vs {literal}");
        }
    }
}

#[test]
fn analytic_partials_match_finite_differences() {
    let points = random_flat_points(2, 3, 1000, SeedSpec::new(13, 0)).unwrap();
    for f in limit_functions() {
        for z in &points {
            let blocks = [z.block(0), z.block(1)];
            let (g, h) = analytic_partials(&f, &blocks);
            for i in 0..6 {
                for j in 0..6 {
                    let fd = finite_difference_oracle(&f, z.as_slice(), 3, i, j).unwrap();
                    assert!((fd.first_i - g[i]).abs() <= 1e-5 * g[i].abs().max(1.0));
                    assert!(
                        (fd.second_ij - h[i][j]).abs() <= 1e-5 * h[i][j].abs().max(1.0),
                        "{f:?} ({i},{j}): {} vs {}",
                        fd.second_ij,
                        h[i][j]
                    );
                }
            }
        }
    }
}

#[test]
fn mass_correction_is_the_difference() {
    let theta = ThetaParams::new(vec![2.0, 1.25]).unwrap();
    let b = Generator::new(GeneratorKind::B, theta.clone());
    let bhat = Generator::new(GeneratorKind::BHat, theta.clone());
    let points = random_flat_points(2, 6, 100, SeedSpec::new(14, 0)).unwrap();
    for f in limit_functions() {
        for z in &points {
            let p = Point::Flat(z);
            let value = eval_testfunction(&f, &p).unwrap();
            let correction: f64 = (0..2)
                .map(|h| 0.5 * theta.get(h) * f64::from(f.mark(h).m0) * value / z.block_mass(h))
                .sum();
            let diff = b.apply(&f, &p).unwrap() - bhat.apply(&f, &p).unwrap();
            assert!(close(diff, correction, 1e-11));
        }
    }
}

#[test]
fn implicit_route_agrees_with_direct_on_tailed_points() {
    let theta = ThetaParams::new(vec![1.0, 2.0, 4.0]).unwrap();
    let b = Generator::new(GeneratorKind::B, theta.clone());
    let z = KingmanPoint::new(vec![
        OrderedMassVector::new(vec![0.12, 0.05, 0.01], 0.02).unwrap(),
        OrderedMassVector::new(vec![0.3, 0.1], 0.0).unwrap(),
        OrderedMassVector::new(vec![0.2, 0.15, 0.04], 0.01).unwrap(),
    ])
    .unwrap();
    let fs = [
        tf(vec![(1, vec![]), (0, vec![]), (0, vec![])]),
        tf(vec![(0, vec![2]), (0, vec![]), (-1, vec![3])]),
        tf(vec![(-2, vec![2, 3]), (1, vec![2]), (0, vec![4])]),
    ];
    for f in fs {
        let direct = b.apply(&f, &Point::Kingman(&z)).unwrap();
        let implicit = apply_implicit_b(&theta, &f, &z).unwrap();
        assert!(close(direct, implicit, 1e-12), "{direct} vs {implicit}");
        let d = decompose_b(&theta, &f, &Point::Kingman(&z)).unwrap();
        assert!(close(d.total, direct, 1e-14));
        let via = Generator::new(GeneratorKind::BDecomposed, theta.clone())
            .apply(&f, &Point::Kingman(&z))
            .unwrap();
        assert!(close(via, direct, 1e-10));
    }
}

#[test]
fn skew_generator_intertwines_power_sums() {
    // A^K(f o S)(w, x) = B^K f(S(w, x)) for f = prod |z_h|^{m0} prod phi(z_h);
    // f o S(w, x) = prod w_h^{deg_h} prod phi(x_h) on the product of simplices.
    let theta = ThetaParams::new(vec![1.5, 2.0]).unwrap();
    let types = 3;
    let ak = Generator::new(GeneratorKind::AK { types }, theta.clone());
    let bk = Generator::new(GeneratorKind::BK { types }, theta.clone());
    let points = random_flat_points(2, types, 100, SeedSpec::new(15, 0)).unwrap();
    let fs = [
        tf(vec![(1, vec![]), (0, vec![])]),
        tf(vec![(0, vec![2]), (1, vec![3])]),
        tf(vec![(2, vec![2, 2]), (0, vec![4])]),
    ];
    for f in fs {
        let degrees: Vec<i32> = f.mark_factors().iter().map(MarkFactor::degree).collect();
        let g = TestFunction::new(
            f.mark_factors()
                .iter()
                .map(|m| MarkFactor::new(0, m.mvec.clone()).unwrap())
                .collect(),
        )
        .unwrap()
        .with_mass_exponents(degrees)
        .unwrap();
        for z in &points {
            let (w, x) = decompose_flat(z).unwrap();
            let xs: Vec<Vec<f64>> = x.iter().map(|p| p.as_slice().to_vec()).collect();
            let lhs = ak
                .apply(
                    &g,
                    &Point::Product {
                        w: w.as_slice(),
                        x: &xs,
                    },
                )
                .unwrap();
            let rhs = bk.apply(&f, &Point::Flat(z)).unwrap();
            assert!(close(lhs, rhs, 1e-12), "{lhs} vs {rhs}");
        }
    }
}

#[test]
fn product_point_roundtrip_evaluation() {
    let w = SimplexPoint::new(vec![0.4, 0.6]).unwrap();
    let x = vec![
        SimplexPoint::new(vec![0.5, 0.5]).unwrap(),
        SimplexPoint::new(vec![0.9, 0.1]).unwrap(),
    ];
    let z = compose_flat(&w, &x).unwrap();
    let f = TestFunction::phi(1, 2, 2);
    let v = eval_testfunction(&f, &Point::Flat(&z)).unwrap();
    assert!((v - 0.36 * 0.82).abs() < 1e-15);
}
