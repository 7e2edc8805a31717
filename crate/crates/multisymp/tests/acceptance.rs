//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Tolerances are pinned in the constants next to each criterion.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use multisymp::exterior::{multi_indices, ExteriorElement, MultiIndex, Variance};
use multisymp::grassmann::{
    annihilator, is_decomposable_2, pseudofiber_generator_22, tangent_basis_full,
    tangent_basis_omega, ProblemShape, VelocityMatrix,
};
use multisymp::hamilton::{
    deform_along_pseudofiber, euler_lagrange_residual, hamilton_residual, legendre_lift,
    order_estimate, ClosedFormHamiltonian, Grid, GridField, Hamiltonian,
};
use multisymp::lagrangian::{Density, LagrangianDensity};
use multisymp::legendre::{
    dedecker_transform, degeneracy_report, hamiltonian_eval, MomentumLayout, SubmanifoldChoice,
};
use multisymp::linalg;
use multisymp::observables::{
    generalized_pseudofiber_directions, is_regular, ObservableFunction, RegularityCondition,
};

fn pass(criterion: usize, label: &str) {
    println!("criterion {criterion:02} [PASS] {label}");
}

/// The three full-Dedecker examples with their closed forms and singular
/// loci in the `r` coordinate.
fn full_examples() -> Vec<(LagrangianDensity, ClosedFormHamiltonian, Vec<f64>)> {
    let mut cases = vec![
        (
            LagrangianDensity::Trivial,
            ClosedFormHamiltonian::Trivial,
            vec![0.0],
        ),
        (
            LagrangianDensity::Maxwell2D,
            ClosedFormHamiltonian::Maxwell2D,
            vec![0.0, -2.0],
        ),
    ];
    for b in [0.0, 0.5, 2.0] {
        cases.push((
            LagrangianDensity::Dirichlet { b },
            ClosedFormHamiltonian::Dirichlet { b },
            vec![b - 1.0, b + 1.0],
        ));
    }
    cases
}

const SINGULAR_MARGIN: f64 = 0.1;

fn sample_r(rng: &mut ChaCha8Rng, singular: &[f64]) -> f64 {
    loop {
        let r: f64 = rng.gen_range(-3.0..3.0);
        if singular.iter().all(|s| (r - s).abs() >= SINGULAR_MARGIN) {
            return r;
        }
    }
}

fn sample_momentum(
    shape: ProblemShape,
    rng: &mut ChaCha8Rng,
    singular: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let layout = MomentumLayout::new(shape);
    let x: Vec<f64> = (0..shape.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..shape.k).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut p: Vec<f64> = (0..layout.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
    for pos in layout.higher_positions() {
        p[pos] = sample_r(rng, singular);
    }
    (x, y, p)
}

#[test]
fn criterion_01_hamiltonian_oracle_equivalence() {
    const TOL: f64 = 1e-9;
    const POINTS: usize = 200;
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst = 0.0f64;
    for (density, oracle, singular) in full_examples() {
        let shape = density.shape();
        let layout = MomentumLayout::new(shape);
        for _ in 0..POINTS {
            let (x, y, p) = sample_momentum(shape, &mut rng, &singular);
            let element = layout.element(&p);
            let numeric = hamiltonian_eval(&density, &x, &y, &element, None)
                .expect("sampled away from singular loci");
            let q: Vec<f64> = x.iter().chain(y.iter()).copied().collect();
            let expected = oracle.eval(&q, &p).unwrap();
            let rel = (numeric.value - expected).abs() / expected.abs().max(1.0);
            worst = worst.max(rel);
            assert!(
                rel <= TOL,
                "{}: relative error {rel} at p = {p:?}",
                density.name()
            );
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed <= 10.0, "runtime {elapsed:.1}s over budget");
    pass(
        1,
        &format!("Hamiltonian oracle equivalence: worst relative error {worst:.2e} over 5 examples x {POINTS} points ({elapsed:.1}s)"),
    );
}

#[test]
fn criterion_02_legendre_round_trip() {
    const TOL: f64 = 1e-8;
    const POINTS: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut worst = 0.0f64;
    for (density, _, singular) in full_examples() {
        let shape = density.shape();
        for _ in 0..POINTS {
            let x: Vec<f64> = (0..shape.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..shape.k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v = VelocityMatrix::from_fn(shape, |_, _| rng.gen_range(-2.0..2.0));
            let higher = vec![sample_r(&mut rng, &singular)];
            let (point, report) = dedecker_transform(&density, &x, &y, &v, &higher).unwrap();
            assert!(report.solvable);
            let recovered = hamiltonian_eval(&density, &x, &y, &point.p, None).unwrap();
            for (a, b) in recovered.velocity.entries().iter().zip(v.entries()) {
                worst = worst.max((a - b).abs());
                assert!((a - b).abs() <= TOL, "{}: {a} vs {b}", density.name());
            }
        }
    }
    pass(
        2,
        &format!("Legendre round trip v -> p -> v: worst velocity error {worst:.2e} over {POINTS} points per example"),
    );
}

#[test]
fn criterion_03_momentum_gradient_is_lifted_velocity() {
    const TOL_DP: f64 = 1e-6;
    const TOL_DE: f64 = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut worst_dp = 0.0f64;
    let mut worst_de = 0.0f64;
    for (density, _, singular) in full_examples() {
        let shape = density.shape();
        let layout = MomentumLayout::new(shape);
        for _ in 0..20 {
            let x: Vec<f64> = (0..shape.n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..shape.k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let v = VelocityMatrix::from_fn(shape, |_, _| rng.gen_range(-1.5..1.5));
            let higher = vec![sample_r(&mut rng, &singular)];
            let (point, _) = dedecker_transform(&density, &x, &y, &v, &higher).unwrap();
            let z = multisymp::grassmann::lift(&v);
            let step = 1e-6;
            for pos in 0..layout.len() {
                let mut dir_coeffs = vec![0.0; layout.len()];
                dir_coeffs[pos] = 1.0;
                let dir = layout.element(&dir_coeffs);
                let plus = point.p.add(&dir.scaled(step)).unwrap();
                let minus = point.p.add(&dir.scaled(-step)).unwrap();
                let h_plus = hamiltonian_eval(&density, &x, &y, &plus, Some(&v)).unwrap().value;
                let h_minus = hamiltonian_eval(&density, &x, &y, &minus, Some(&v)).unwrap().value;
                let fd = (h_plus - h_minus) / (2.0 * step);
                let expected = z.coefficient(layout.multi_index(pos));
                let err = (fd - expected).abs() / expected.abs().max(1.0);
                worst_dp = worst_dp.max(err);
                assert!(err <= TOL_DP, "{} ∂H/∂p mismatch {err}", density.name());
            }
            // exact linearity in e: H(p + λω) - H(p) = λ
            let omega = shape.omega();
            let lambda = 0.5;
            let shifted = point.p.add(&omega.scaled(lambda)).unwrap();
            let h0 = hamiltonian_eval(&density, &x, &y, &point.p, Some(&v)).unwrap().value;
            let h1 = hamiltonian_eval(&density, &x, &y, &shifted, Some(&v)).unwrap().value;
            let de = ((h1 - h0) / lambda - 1.0).abs();
            worst_de = worst_de.max(de);
            assert!(de <= TOL_DE, "{} ∂H/∂e deviates by {de}", density.name());
        }
    }
    pass(
        3,
        &format!("∂H/∂p equals the lifted velocity components (worst {worst_dp:.2e}), ∂H/∂e = 1 (worst {worst_de:.2e})"),
    );
}

#[test]
fn criterion_04_level_shift_identity() {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let mut worst = 0.0f64;
    for (density, _, singular) in full_examples() {
        let shape = density.shape();
        for _ in 0..40 {
            let (x, y, p) = sample_momentum(shape, &mut rng, &singular);
            let layout = MomentumLayout::new(shape);
            let element = layout.element(&p);
            let h0 = match hamiltonian_eval(&density, &x, &y, &element, None) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let lambda: f64 = rng.gen_range(-10.0..10.0);
            let shifted = element.add(&shape.omega().scaled(lambda)).unwrap();
            let h1 = hamiltonian_eval(&density, &x, &y, &shifted, Some(&h0.velocity)).unwrap();
            let err = (h1.value - h0.value - lambda).abs()
                / h0.value.abs().max(lambda.abs()).max(1.0);
            worst = worst.max(err);
            assert!(err <= TOL, "{}: level shift error {err}", density.name());
        }
    }
    pass(
        4,
        &format!("level shift H(q, p + λω) = H(q, p) + λ to {worst:.2e} for λ in [-10, 10]"),
    );
}

#[test]
fn criterion_05_pseudofiber_geometry() {
    const SHAPES: [(usize, usize); 6] = [(1, 1), (2, 1), (1, 2), (2, 2), (2, 3), (3, 2)];
    const GENERATOR_TOL: f64 = 1e-10;
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    for (n, k) in SHAPES {
        let shape = ProblemShape::new(n, k);
        for _ in 0..25 {
            let v = VelocityMatrix::from_fn(shape, |_, _| rng.gen_range(-2.0..2.0));
            let enlarged = annihilator(&tangent_basis_omega(&v).unwrap()).unwrap();
            let level = annihilator(&tangent_basis_full(&v).unwrap()).unwrap();
            assert_eq!(enlarged.len(), shape.lambda_dim() - n * k, "shape ({n},{k})");
            assert_eq!(level.len(), shape.lambda_dim() - n * k - 1, "shape ({n},{k})");
        }
    }
    // the (2, 2) closed forms
    let shape = ProblemShape::new(2, 2);
    let cols = multi_indices(4, 2);
    for _ in 0..25 {
        let v = VelocityMatrix::from_fn(shape, |_, _| rng.gen_range(-2.0..2.0));
        let level = annihilator(&tangent_basis_full(&v).unwrap()).unwrap();
        let level_dense: Vec<Vec<f64>> = level
            .iter()
            .map(|p| cols.iter().map(|mi| p.coefficient(mi)).collect())
            .collect();
        let generator: Vec<f64> = {
            let g = pseudofiber_generator_22(&v);
            cols.iter().map(|mi| g.coefficient(mi)).collect()
        };
        assert!(linalg::projection_residual(&generator, &level_dense) <= GENERATOR_TOL);

        let enlarged = annihilator(&tangent_basis_omega(&v).unwrap()).unwrap();
        let enlarged_dense: Vec<Vec<f64>> = enlarged
            .iter()
            .map(|p| cols.iter().map(|mi| p.coefficient(mi)).collect())
            .collect();
        let omega_vec: Vec<f64> = cols
            .iter()
            .map(|mi| shape.omega().coefficient(mi))
            .collect();
        assert!(linalg::projection_residual(&generator, &enlarged_dense) <= GENERATOR_TOL);
        assert!(linalg::projection_residual(&omega_vec, &enlarged_dense) <= GENERATOR_TOL);
    }
    pass(
        5,
        "annihilator dimensions C(n+k,n)-nk and C(n+k,n)-nk-1 across 6 shapes; (2,2) generators match the closed forms",
    );
}

fn example4_curve(nodes: usize, h: f64) -> multisymp::hamilton::DiscreteCurve {
    let density = LagrangianDensity::Trivial;
    let grid = Grid::uniform_box(2, -1.0, 1.0, nodes);
    let u = GridField::from_fn(grid.clone(), 2, |x| {
        vec![x[0].sin() * x[1].cos(), x[0] * x[1] + 0.3 * x[1] * x[1]]
    });
    let r_field = GridField::from_fn(grid.clone(), 1, |x| vec![1.5 + 0.3 * (x[0] * x[1]).sin()]);
    legendre_lift(&density, &grid, &u, SubmanifoldChoice::Full, Some(&r_field), h).unwrap()
}

#[test]
fn criterion_06_residual_convergence_on_exact_solutions() {
    const MIN_ORDER: f64 = 1.8;
    const NON_SOLUTION_FLOOR: f64 = 1e-2;
    let start = Instant::now();

    // Example-4 family curves are exact solutions
    let ham4 = ClosedFormHamiltonian::Trivial;
    let coarse = hamilton_residual(&example4_curve(17, 0.4), &ham4).unwrap().max_norm;
    let fine = hamilton_residual(&example4_curve(33, 0.4), &ham4).unwrap().max_norm;
    let order4 = order_estimate(coarse, fine);
    assert!(order4 >= MIN_ORDER, "family order {order4} ({coarse} -> {fine})");

    // the mechanics oscillator
    let ham_osc = ClosedFormHamiltonian::Mechanics { potential: vec![1.0] };
    let osc = |nodes: usize| {
        let grid = Grid::uniform_box(1, 0.0, 2.0 * std::f64::consts::PI, nodes);
        let u = GridField::from_fn(grid.clone(), 1, |x| vec![x[0].cos()]);
        let layout = MomentumLayout::new(ProblemShape::new(1, 1));
        let p = GridField::from_fn(grid.clone(), layout.len(), |x| {
            let (y, pp) = (x[0].cos(), -x[0].sin());
            vec![-0.5 * (pp * pp + y * y), pp]
        });
        multisymp::hamilton::DiscreteCurve::from_fields(
            ProblemShape::new(1, 1),
            SubmanifoldChoice::Ddw,
            grid,
            u,
            p,
            None,
        )
        .unwrap()
    };
    let coarse_osc = hamilton_residual(&osc(65), &ham_osc).unwrap().max_norm;
    let fine_osc = hamilton_residual(&osc(129), &ham_osc).unwrap().max_norm;
    let order_osc = order_estimate(coarse_osc, fine_osc);
    assert!(order_osc >= MIN_ORDER, "oscillator order {order_osc}");

    // a non-solution shows no convergence and a bounded-below residual
    let density = LagrangianDensity::ScalarField { n: 2 };
    let ham_sf = ClosedFormHamiltonian::ScalarField { n: 2 };
    let bad = |nodes: usize| {
        let grid = Grid::uniform_box(2, -1.0, 1.0, nodes);
        let u = GridField::from_fn(grid.clone(), 1, |x| vec![x[0] * x[0]]);
        let curve = legendre_lift(&density, &grid, &u, SubmanifoldChoice::Ddw, None, 0.0).unwrap();
        hamilton_residual(&curve, &ham_sf).unwrap().max_norm
    };
    let bad_coarse = bad(17);
    let bad_fine = bad(33);
    assert!(bad_coarse >= NON_SOLUTION_FLOOR && bad_fine >= NON_SOLUTION_FLOOR);
    let bad_order = order_estimate(bad_coarse, bad_fine);
    assert!(bad_order.abs() <= 0.5, "non-solution order {bad_order}");

    let elapsed = start.elapsed().as_secs_f64();
    assert!(elapsed <= 30.0, "runtime {elapsed:.1}s over budget");
    pass(
        6,
        &format!("Hamilton residual orders: family {order4:.2}, oscillator {order_osc:.2}; non-solution order {bad_order:.2} with residual >= {NON_SOLUTION_FLOOR} ({elapsed:.1}s)"),
    );
}

#[test]
fn criterion_07_lagrangian_hamiltonian_verdicts_agree() {
    // verdict threshold: residual below C h² counts as "solves"
    const C: f64 = 50.0;
    let nodes = 33;

    type FieldFn = Box<dyn Fn(&[f64]) -> Vec<f64>>;
    struct Pair {
        label: &'static str,
        density: LagrangianDensity,
        ham: ClosedFormHamiltonian,
        choice: SubmanifoldChoice,
        field: FieldFn,
        expect_solution: bool,
    }
    let pairs: Vec<Pair> = vec![
        Pair {
            label: "scalar field, u = x1 x2",
            density: LagrangianDensity::ScalarField { n: 2 },
            ham: ClosedFormHamiltonian::ScalarField { n: 2 },
            choice: SubmanifoldChoice::Ddw,
            field: Box::new(|x| vec![x[0] * x[1]]),
            expect_solution: true,
        },
        Pair {
            label: "scalar field, u = x1^2 - x2^2",
            density: LagrangianDensity::ScalarField { n: 2 },
            ham: ClosedFormHamiltonian::ScalarField { n: 2 },
            choice: SubmanifoldChoice::Ddw,
            field: Box::new(|x| vec![x[0] * x[0] - x[1] * x[1]]),
            expect_solution: true,
        },
        Pair {
            label: "scalar field, u = x1^2",
            density: LagrangianDensity::ScalarField { n: 2 },
            ham: ClosedFormHamiltonian::ScalarField { n: 2 },
            choice: SubmanifoldChoice::Ddw,
            field: Box::new(|x| vec![x[0] * x[0]]),
            expect_solution: false,
        },
        Pair {
            label: "mechanics, u = cos t",
            density: LagrangianDensity::Mechanics { potential: vec![1.0] },
            ham: ClosedFormHamiltonian::Mechanics { potential: vec![1.0] },
            choice: SubmanifoldChoice::Ddw,
            field: Box::new(|x| vec![x[0].cos()]),
            expect_solution: true,
        },
        Pair {
            label: "mechanics, u = t^2",
            density: LagrangianDensity::Mechanics { potential: vec![1.0] },
            ham: ClosedFormHamiltonian::Mechanics { potential: vec![1.0] },
            choice: SubmanifoldChoice::Ddw,
            field: Box::new(|x| vec![x[0] * x[0]]),
            expect_solution: false,
        },
        Pair {
            label: "trivial density, arbitrary smooth u",
            density: LagrangianDensity::Trivial,
            ham: ClosedFormHamiltonian::Trivial,
            choice: SubmanifoldChoice::Full,
            field: Box::new(|x| vec![(2.0 * x[0]).sin() * x[1], x[0] * x[0] * x[1]]),
            expect_solution: true,
        },
        Pair {
            label: "dirichlet B = 0.5, harmonic pair",
            density: LagrangianDensity::Dirichlet { b: 0.5 },
            ham: ClosedFormHamiltonian::Dirichlet { b: 0.5 },
            choice: SubmanifoldChoice::Full,
            field: Box::new(|x| vec![x[0] * x[1], x[0] * x[0] - x[1] * x[1]]),
            expect_solution: true,
        },
        Pair {
            label: "dirichlet B = 0.5, u1 = x1^2",
            density: LagrangianDensity::Dirichlet { b: 0.5 },
            ham: ClosedFormHamiltonian::Dirichlet { b: 0.5 },
            choice: SubmanifoldChoice::Full,
            field: Box::new(|x| vec![x[0] * x[0], 0.0]),
            expect_solution: false,
        },
    ];

    let mut agreements = 0;
    for pair in &pairs {
        let shape = pair.density.shape();
        let (lo, hi) = if shape.n == 1 { (0.0, 2.0 * std::f64::consts::PI) } else { (-1.0, 1.0) };
        let grid = Grid::uniform_box(shape.n, lo, hi, nodes);
        let h = grid.spacing[0];
        let u = GridField::from_fn(grid.clone(), shape.k, |x| (pair.field)(x));
        let layout = MomentumLayout::new(shape);
        let higher = if pair.choice == SubmanifoldChoice::Full {
            Some(GridField::from_fn(
                grid.clone(),
                layout.higher_positions().len(),
                |_| vec![2.0],
            ))
        } else {
            None
        };
        let curve =
            legendre_lift(&pair.density, &grid, &u, pair.choice, higher.as_ref(), 0.0).unwrap();
        let hamilton_max = hamilton_residual(&curve, &pair.ham).unwrap().max_norm;
        let el_field = euler_lagrange_residual(&pair.density, &grid, &u).unwrap();
        let (el_max, _) = multisymp::hamilton::curve::field_stats(&el_field, 2);

        let threshold = C * h * h;
        let hamilton_verdict = hamilton_max <= threshold;
        let el_verdict = el_max <= threshold;
        assert_eq!(
            hamilton_verdict, el_verdict,
            "{}: hamilton {hamilton_max:.3e} vs EL {el_max:.3e} at threshold {threshold:.3e}",
            pair.label
        );
        assert_eq!(
            hamilton_verdict, pair.expect_solution,
            "{}: verdict disagrees with construction",
            pair.label
        );
        agreements += 1;
    }
    pass(
        7,
        &format!("Hamilton-side and Euler-Lagrange-side verdicts agree on {agreements} (density, field) pairs"),
    );
}

#[test]
fn criterion_08_deformation_invariance() {
    const FACTOR: f64 = 2.0;
    let ham = ClosedFormHamiltonian::Trivial;
    let layout = MomentumLayout::new(ProblemShape::new(2, 2));
    for nodes in [17, 33] {
        let curve = example4_curve(nodes, 0.4);
        let base = hamilton_residual(&curve, &ham).unwrap().max_norm;

        let mut pi = GridField::zeros(curve.grid.clone(), layout.len());
        for multi in curve.grid.nodes() {
            let x = curve.grid.coords(&multi);
            let scale = 0.3 * x[0].cos();
            let v = curve.velocity_at(&multi);
            let dense = layout.dense(&pseudofiber_generator_22(&v).scaled(scale));
            for (c, &value) in dense.iter().enumerate() {
                pi.set(&multi, c, value);
            }
        }
        let deformed = deform_along_pseudofiber(&curve, &pi).unwrap();
        assert_eq!(deformed.u, curve.u, "base projection must be untouched");
        let after = hamilton_residual(&deformed, &ham).unwrap().max_norm;
        assert!(
            after <= FACTOR * base,
            "nodes {nodes}: residual grew {base:.3e} -> {after:.3e}"
        );
    }
    pass(
        8,
        "pseudofiber deformation keeps the Hamilton residual within a factor 2 at matched grids; base projection unchanged exactly",
    );
}

#[test]
fn criterion_09_nonexistence_obstruction() {
    // H = p_12 + p_34 demands dx^mu∧dx^nu(X1, X2) = δ over the two blocks
    let mut x = ExteriorElement::zero(4, 2, Variance::Vector);
    x.add_term(MultiIndex::new(&[1, 2]).unwrap(), 1.0);
    x.add_term(MultiIndex::new(&[3, 4]).unwrap(), 1.0);
    let report = is_decomposable_2(&x).unwrap();
    assert!(!report.decomposable);
    assert_eq!(report.max_residual, 1.0);
    pass(
        9,
        "the 2-vector required by H = p_12 + p_34 fails the Pluecker test with raw residual exactly 1",
    );
}

#[test]
fn criterion_10_regularity_verdicts() {
    const POINTS: usize = 50;
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let hams: Vec<(ClosedFormHamiltonian, Vec<f64>)> = vec![
        (ClosedFormHamiltonian::Trivial, vec![0.0]),
        (ClosedFormHamiltonian::Dirichlet { b: 0.5 }, vec![-0.5, 1.5]),
        (ClosedFormHamiltonian::Maxwell2D, vec![0.0, -2.0]),
        (ClosedFormHamiltonian::Mechanics { potential: vec![1.0] }, vec![]),
        (ClosedFormHamiltonian::ScalarField { n: 2 }, vec![]),
    ];
    for (ham, singular) in &hams {
        let shape = ham.shape();
        let layout = MomentumLayout::new(shape);
        let samples: Vec<(Vec<f64>, Vec<f64>)> = (0..POINTS)
            .map(|idx| {
                let q: Vec<f64> = (0..shape.total_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut p: Vec<f64> = (0..layout.len()).map(|_| rng.gen_range(-1.5..1.5)).collect();
                for pos in layout.higher_positions() {
                    p[pos] = sample_r(&mut rng, singular);
                }
                // include adapted points, where the bracket structure thins out
                if idx % 4 == 0 {
                    for (i, mu) in VelocityMatrix::index_pairs(shape) {
                        let (pos, _) = layout.mixed_position(i, mu);
                        p[pos] = 0.0;
                    }
                }
                (q, p)
            })
            .collect();

        for mu in 1..=shape.n {
            let f = ObservableFunction::coordinate(mu);
            let report = is_regular(ham, &f, &samples).unwrap();
            assert!(report.regular, "{ham:?}: x^{mu} must be 1-regular: {report:?}");
        }
        if shape.n >= 2 {
            let f = ObservableFunction::coordinates(&[1, 2]);
            let report = is_regular(ham, &f, &samples).unwrap();
            assert!(report.regular, "{ham:?}: (x1, x2) must be 2-regular");
        }
        let y1 = ObservableFunction::coordinate(shape.n + 1);
        let report = is_regular(ham, &y1, &samples).unwrap();
        assert!(!report.regular, "{ham:?}: y^1 must fail");
        assert_eq!(
            report.failing_condition,
            Some(RegularityCondition::Factorization),
            "{ham:?}: y^1 failure must be the factorization condition"
        );
    }
    pass(
        10,
        &format!("x^mu 1-regular and (x1,x2) 2-regular at {POINTS} samples per Hamiltonian; y^1 fails the factorization condition"),
    );
}

#[test]
fn criterion_11_pseudofiber_direction_equivalence() {
    const ANGLE_TOL: f64 = 1e-8;
    const DQ_TOL: f64 = 1e-10;
    const POINTS: usize = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(1011);
    for (density, ham, singular) in [
        (LagrangianDensity::Trivial, ClosedFormHamiltonian::Trivial, vec![0.0]),
        (
            LagrangianDensity::Dirichlet { b: 0.5 },
            ClosedFormHamiltonian::Dirichlet { b: 0.5 },
            vec![-0.5, 1.5],
        ),
        (LagrangianDensity::Maxwell2D, ClosedFormHamiltonian::Maxwell2D, vec![0.0, -2.0]),
    ] {
        let shape = density.shape();
        let layout = MomentumLayout::new(shape);
        let mut worst_angle = 0.0f64;
        for _ in 0..POINTS {
            // adapted points: mixed momenta zero, higher components generic
            let q: Vec<f64> = (0..shape.total_dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut p = vec![0.0; layout.len()];
            p[layout.volume_position()] = rng.gen_range(-1.0..1.0);
            for pos in layout.higher_positions() {
                p[pos] = sample_r(&mut rng, &singular);
            }
            let dirs = generalized_pseudofiber_directions(&ham, &q, &p, &mut rng).unwrap();
            assert_eq!(dirs.basis.len(), shape.lambda_dim() - shape.n * shape.k - 1);
            assert!(dirs.max_dq_component(shape.total_dim()) <= DQ_TOL);

            let solved = hamiltonian_eval(
                &density,
                &q[..shape.n],
                &q[shape.n..],
                &layout.element(&p),
                None,
            )
            .unwrap();
            let ann = annihilator(&tangent_basis_full(&solved.velocity).unwrap()).unwrap();
            let expected: Vec<Vec<f64>> = ann.iter().map(|d| layout.dense(d)).collect();
            let got = dirs.vertical_parts(shape.total_dim());
            let angles = linalg::principal_angles(&got, &expected).expect("equal dimensions");
            let max_angle = angles.iter().fold(0.0f64, |m, &a| m.max(a));
            worst_angle = worst_angle.max(max_angle);
            assert!(max_angle <= ANGLE_TOL, "{}: angle {max_angle}", density.name());
        }
        println!(
            "  criterion 11 detail: {} worst principal angle {worst_angle:.2e}",
            density.name()
        );
    }
    pass(
        11,
        &format!("Ω-sampled pseudofiber directions coincide with (T_z D^n)^⊥ at {POINTS} points per example; all directions vertical"),
    );
}

#[test]
fn criterion_12_degeneracy_detection() {
    let q2 = (vec![0.0; 2], vec![0.0; 2]);
    let v22 = VelocityMatrix::zeros(ProblemShape::new(2, 2));

    // Maxwell dDW: Hessian rank 1
    let report = degeneracy_report(
        &LagrangianDensity::Maxwell2D,
        &q2.0,
        &q2.1,
        &v22,
        SubmanifoldChoice::Ddw,
        &[],
    )
    .unwrap();
    assert!(!report.solvable);
    assert_eq!(report.rank, 1);

    // Maxwell full Dedecker solvable iff r outside {0, -2}
    for r in [-3.0, -1.0, 0.5, 1.0, 2.5] {
        let report = degeneracy_report(
            &LagrangianDensity::Maxwell2D,
            &q2.0,
            &q2.1,
            &v22,
            SubmanifoldChoice::Full,
            &[r],
        )
        .unwrap();
        assert!(report.solvable, "r = {r}");
    }
    for r in [0.0, -2.0] {
        let report = degeneracy_report(
            &LagrangianDensity::Maxwell2D,
            &q2.0,
            &q2.1,
            &v22,
            SubmanifoldChoice::Full,
            &[r],
        )
        .unwrap();
        assert!(!report.solvable, "r = {r}");
    }

    // Dirichlet dDW: full rank unless B = ±1 (condition threshold 1e12)
    for b in [0.0, 0.5, 2.0, -0.99] {
        let report = degeneracy_report(
            &LagrangianDensity::Dirichlet { b },
            &q2.0,
            &q2.1,
            &v22,
            SubmanifoldChoice::Ddw,
            &[],
        )
        .unwrap();
        assert!(report.solvable && report.rank == 4, "B = {b}");
        assert!(report.condition < 1e12);
    }
    for b in [1.0, -1.0] {
        let report = degeneracy_report(
            &LagrangianDensity::Dirichlet { b },
            &q2.0,
            &q2.1,
            &v22,
            SubmanifoldChoice::Ddw,
            &[],
        )
        .unwrap();
        assert!(!report.solvable, "B = {b}");
        assert!(report.rank < 4);
        assert!(!report.kernel_basis.is_empty());
    }
    pass(
        12,
        "Maxwell dDW Hessian rank 1; full Dedecker solvable away from r in {0, -2}; Dirichlet degenerates exactly at B = ±1",
    );
}
