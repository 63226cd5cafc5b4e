use clifford_l2::convergence::{
    default_bump_grid, weitzenbock_study, BumpSpec, DEFAULT_BASE_COUNT,
};
use clifford_l2::field::{dirac, monogenic_defect, CliffordField, GridSpec};
use clifford_l2::solver::{
    assemble_dirac, necessity_check, ramp_amplitude, random_compact_field, riesz_alpha,
    solve_min_norm, weighted_adjoint, weighted_dot, DiscreteWeights, OperatorMatrix,
};
use clifford_l2::weight::WeightSpec;
use clifford_l2::{Blade, Multivector};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn canonical_n1(count: usize) -> (GridSpec, WeightSpec) {
    (
        GridSpec::cube(2, 0.0, 1.0, count, 1).unwrap(),
        WeightSpec::x0_squared(1),
    )
}

/// Minimum `W`-norm solution by a dense pseudo-inverse:
/// `u = W^{-1/2} (A W^{-1/2})⁺ f`.
fn dense_min_norm(op: &OperatorMatrix, weights: &DiscreteWeights, f: &[f64]) -> Vec<f64> {
    let dense = op.matrix().to_dense();
    let (r, c) = (dense.len(), dense[0].len());
    let inv_sqrt: Vec<f64> = weights.col().iter().map(|w| 1.0 / w.sqrt()).collect();
    let a = DMatrix::from_fn(r, c, |i, j| dense[i][j] * inv_sqrt[j]);
    let pinv = a.pseudo_inverse(1e-12).unwrap();
    let y = pinv * DVector::from_column_slice(f);
    y.iter().zip(&inv_sqrt).map(|(v, s)| v * s).collect()
}

#[test]
fn iterative_solution_matches_dense_pseudo_inverse() {
    for (n, w, blade) in [
        (1, WeightSpec::x0_squared(1), Blade::SCALAR),
        (
            2,
            WeightSpec::anisotropic(2),
            Blade::from_generators(&[1, 2], 2).unwrap(),
        ),
    ] {
        let count = if n == 1 { 9 } else { 6 };
        let grid = GridSpec::cube(n + 1, 0.0, 1.0, count, 1).unwrap();
        let op = assemble_dirac(&grid, n).unwrap();
        let weights = DiscreteWeights::from_weight(&op, &w).unwrap();
        let f = CliffordField::scalar_times_blade(&grid, n, blade, |_| 1.0)
            .unwrap()
            .restrict_to_interior();
        let sol = solve_min_norm(&op, &weights, &f, 1e-12, w.name()).unwrap();
        assert!(sol.report.converged);
        let oracle = dense_min_norm(&op, &weights, &op.rows_of(&f).unwrap());
        let diff: Vec<f64> = sol
            .u
            .data()
            .iter()
            .zip(&oracle)
            .map(|(a, b)| a - b)
            .collect();
        let rel = norm(&diff) / norm(&oracle);
        assert!(rel <= 1e-8, "n={n}: relative difference {rel}");
    }
}

#[test]
fn null_space_perturbations_do_not_shrink_the_norm() {
    let (grid, w) = canonical_n1(9);
    let op = assemble_dirac(&grid, 1).unwrap();
    let weights = DiscreteWeights::from_weight(&op, &w).unwrap();
    let f = CliffordField::scalar_times_blade(&grid, 1, Blade::SCALAR, |_| 1.0)
        .unwrap()
        .restrict_to_interior();
    let sol = solve_min_norm(&op, &weights, &f, 1e-12, w.name()).unwrap();
    let u_norm = weighted_dot(sol.u.data(), sol.u.data(), weights.col()).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let r: Vec<f64> = (0..sol.u.data().len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        // Project r onto the null space: subtract its own minimum-norm part.
        let ar = op.matrix().apply(&r).unwrap();
        let g = op.field_from_rows(&ar).unwrap();
        let part = solve_min_norm(&op, &weights, &g, 1e-13, w.name()).unwrap();
        let delta: Vec<f64> = r.iter().zip(part.u.data()).map(|(a, b)| a - b).collect();
        assert!(norm(&op.matrix().apply(&delta).unwrap()) <= 1e-8 * norm(&r));
        let moved: Vec<f64> = sol
            .u
            .data()
            .iter()
            .zip(&delta)
            .map(|(a, b)| a + b)
            .collect();
        let moved_norm = weighted_dot(&moved, &moved, weights.col()).sqrt();
        assert!(moved_norm >= u_norm - 1e-9, "{moved_norm} < {u_norm}");
    }
}

#[test]
fn adding_a_monogenic_function_keeps_the_residual_and_grows_the_norm() {
    let (grid, w) = canonical_n1(17);
    let op = assemble_dirac(&grid, 1).unwrap();
    let weights = DiscreteWeights::from_weight(&op, &w).unwrap();
    let f = CliffordField::scalar_times_blade(&grid, 1, Blade::SCALAR, |_| 1.0)
        .unwrap()
        .restrict_to_interior();
    let sol = solve_min_norm(&op, &weights, &f, 1e-12, w.name()).unwrap();
    // x0 + x1 e1 is monogenic, and central differences are exact on it.
    let mono = CliffordField::from_coeff_fn(&grid, 1, |x, out| {
        out[0] = x[0];
        out[1] = x[1];
    })
    .unwrap();
    assert!(monogenic_defect(&mono) < 1e-12);
    let shifted = sol.u.add(&mono.scale(0.1)).unwrap();
    let before = op.apply_field(&sol.u).unwrap();
    let after = op.apply_field(&shifted).unwrap();
    let diff: Vec<f64> = before.iter().zip(&after).map(|(a, b)| a - b).collect();
    assert!(norm(&diff) < 1e-12);
    let n0 = weighted_dot(sol.u.data(), sol.u.data(), weights.col());
    let n1 = weighted_dot(shifted.data(), shifted.data(), weights.col());
    assert!(n1 > n0);
}

#[test]
fn matrix_reproduces_dirac_on_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for n in 1..=3 {
        let grid = GridSpec::cube(n + 1, -1.0, 1.0, 6, 1).unwrap();
        let op = assemble_dirac(&grid, n).unwrap();
        for _ in 0..100 / n {
            let data = (0..grid.node_count() << n)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let u = CliffordField::from_data(&grid, n, data).unwrap();
            let via_matrix = op.apply_field(&u).unwrap();
            let via_stencil = op.rows_of(&dirac(&u).restrict_to_interior()).unwrap();
            assert_eq!(via_matrix, via_stencil);
        }
    }
}

#[test]
fn weighted_adjoint_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for (n, w) in [
        (1, WeightSpec::x0_squared(1)),
        (2, WeightSpec::anisotropic(2)),
    ] {
        let grid = GridSpec::cube(n + 1, -1.0, 1.0, 7, 1).unwrap();
        let op = assemble_dirac(&grid, n).unwrap();
        let weights = DiscreteWeights::from_weight(&op, &w).unwrap();
        let adj = weighted_adjoint(&op, &weights).unwrap();
        for _ in 0..100 {
            let u: Vec<f64> = (0..op.matrix().ncols())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let a: Vec<f64> = (0..op.matrix().nrows())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let left = weighted_dot(&op.matrix().apply(&u).unwrap(), &a, weights.row());
            let right = weighted_dot(&u, &adj.apply(&a).unwrap(), weights.col());
            assert!(
                (left - right).abs() <= 1e-12 * left.abs().max(right.abs()),
                "{left} vs {right}"
            );
        }
    }
}

#[test]
fn riesz_direction_reaches_the_algebra_limit() {
    // For n ≤ 2 the coefficient norm is multiplicative, so |(u,u)|²₀ equals
    // 2^{-n} ‖u‖⁴ and no α can do better than 2^{-n}.
    for (n, w) in [
        (1, WeightSpec::x0_squared(1)),
        (2, WeightSpec::anisotropic(2)),
    ] {
        let grid = GridSpec::cube(n + 1, 0.0, 1.0, 7, 1).unwrap();
        let op = assemble_dirac(&grid, n).unwrap();
        let weights = DiscreteWeights::from_weight(&op, &w).unwrap();
        let f = CliffordField::scalar_times_blade(&grid, n, Blade::SCALAR, |x| 1.0 + x[0])
            .unwrap()
            .restrict_to_interior();
        let sol = solve_min_norm(&op, &weights, &f, 1e-13, w.name()).unwrap();
        let alpha = riesz_alpha(&weights, &sol.multiplier);
        let rep = necessity_check(&op, &weights, &f, &sol.u, &[alpha], 1e-8).unwrap();
        let limit = 0.5f64.powi(n as i32);
        assert!(
            (rep.max_ratio - limit).abs() < 1e-8,
            "n={n}: {}",
            rep.max_ratio
        );
    }
}

#[test]
fn random_alphas_respect_cauchy_schwarz() {
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let (grid, w) = canonical_n1(11);
    let op = assemble_dirac(&grid, 1).unwrap();
    let weights = DiscreteWeights::from_weight(&op, &w).unwrap();
    let f = CliffordField::scalar_times_blade(&grid, 1, Blade::SCALAR, |_| 1.0)
        .unwrap()
        .restrict_to_interior();
    let sol = solve_min_norm(&op, &weights, &f, 1e-12, w.name()).unwrap();
    let alphas: Vec<Vec<f64>> = (0..50)
        .map(|_| {
            let a = random_compact_field(&grid, 1, &mut rng).unwrap();
            op.rows_of(&a).unwrap()
        })
        .collect();
    let rep = necessity_check(&op, &weights, &f, &sol.u, &alphas, 1e-8).unwrap();
    assert!(rep.max_ratio <= 1.0 + 1e-9);
    assert_eq!(rep.ratios.len() + rep.skipped, 50);
}

#[test]
fn anisotropic_weitzenbock_closes_without_the_curvature_term() {
    let n = 2;
    let w = WeightSpec::anisotropic(n);
    let base = default_bump_grid(n, DEFAULT_BASE_COUNT).unwrap();
    let amp: Multivector = ramp_amplitude(n);
    let without = weitzenbock_study(&base, n, &w, &amp, BumpSpec::default(), false, 3).unwrap();
    assert!(without.order.unwrap() > 1.8, "{:?}", without.values());
    let with = weitzenbock_study(&base, n, &w, &amp, BumpSpec::default(), true, 3).unwrap();
    let last = with.values()[2];
    assert!(
        last > 1.0,
        "curvature term unexpectedly closes the gap: {last}"
    );
}
