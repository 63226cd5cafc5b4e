use clifford_l2::convergence::fit_order;
use clifford_l2::field::{
    conj_dirac, dirac, dirac_product_expansion, dirac_product_rule_rhs, laplacian, polynomial_bump,
    right_conj_dirac, right_dirac, weighted_inner, weighted_norm_sq, CliffordField, GridSpec,
};
use clifford_l2::solver::analytic_adjointness_gap;
use clifford_l2::weight::WeightSpec;
use clifford_l2::Multivector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_field(grid: &GridSpec, n: usize, rng: &mut ChaCha8Rng) -> CliffordField {
    let data = (0..grid.node_count() << n)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    CliffordField::from_data(grid, n, data).unwrap()
}

fn cube(n: usize, count: usize, margin: usize) -> GridSpec {
    GridSpec::cube(n + 1, -1.0, 1.0, count, margin).unwrap()
}

fn max_abs(f: &CliffordField) -> f64 {
    f.data().iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[test]
fn dirac_factorizes_the_laplacian() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 1..=3 {
        let grid = cube(n, if n == 3 { 7 } else { 9 }, 2);
        for _ in 0..5 {
            let f = random_field(&grid, n, &mut rng);
            let lap = laplacian(&f).unwrap();
            let scale = max_abs(&lap);
            for composed in [dirac(&conj_dirac(&f)), conj_dirac(&dirac(&f))] {
                let err = composed.max_abs_diff_where(&lap, |v| grid.node_margin(v) >= 2);
                assert!(err <= 1e-13 * scale, "n={n}: {err} vs {scale}");
            }
        }
    }
}

#[test]
fn conjugation_turns_left_dirac_into_right_conj_dirac() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for n in 1..=3 {
        let grid = cube(n, 7, 1);
        let u = random_field(&grid, n, &mut rng);
        let left = dirac(&u).conjugation();
        let right = right_conj_dirac(&u.conjugation());
        assert_eq!(left.max_abs_diff_where(&right, |_| true), 0.0, "n={n}");
    }
}

#[test]
fn averaged_product_rule_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for n in 1..=3 {
        let grid = cube(n, 7, 1);
        let u = random_field(&grid, n, &mut rng);
        let v = random_field(&grid, n, &mut rng);
        let lhs = dirac(&u.mul_nodewise(&v).unwrap());
        let rhs = dirac_product_expansion(&u, &v).unwrap();
        let err = lhs.max_abs_diff_where(&rhs, |_| true);
        assert!(err <= 1e-12 * max_abs(&lhs), "n={n}: {err}");
    }
}

/// Smooth vector-valued `v = Σ e_i v_i` and multivector-valued `u`, both
/// polynomial-trigonometric so every derivative is bounded.
fn smooth_pair(grid: &GridSpec, n: usize) -> (CliffordField, CliffordField) {
    let u = CliffordField::from_coeff_fn(grid, n, |x, out| {
        for (b, o) in out.iter_mut().enumerate() {
            *o = ((b + 1) as f64 * x[0] + x[x.len() - 1]).sin() + 0.3 * x[0] * x[0];
        }
    })
    .unwrap();
    let v = CliffordField::from_coeff_fn(grid, n, |x, out| {
        out[0] = (x[0] - 0.5 * x[1]).cos();
        for i in 1..=n {
            out[1 << (i - 1)] = (i as f64 * x[i] + x[0]).sin();
        }
    })
    .unwrap();
    (u, v)
}

#[test]
fn literal_product_rule_holds_to_second_order() {
    for n in 1..=2 {
        let base = cube(n, 9, 1);
        let mut hs = Vec::new();
        let mut errs = Vec::new();
        for k in 0..4 {
            let grid = base.refined(k).unwrap();
            let (u, v) = smooth_pair(&grid, n);
            let lhs = dirac(&u.mul_nodewise(&v).unwrap());
            let rhs = dirac_product_rule_rhs(&u, &v).unwrap();
            hs.push(grid.max_spacing());
            errs.push(lhs.max_abs_diff_where(&rhs, |node| grid.node_margin(node) >= 1));
        }
        let order = fit_order(&hs, &errs).unwrap();
        assert!(order > 1.9, "n={n}: order {order}, errors {errs:?}");
    }
}

#[test]
fn central_differences_sum_by_parts() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for n in 1..=3 {
        let grid = cube(n, 7, 1);
        let f = random_field(&grid, n, &mut rng).restrict_to_interior();
        let g = random_field(&grid, n, &mut rng).restrict_to_interior();
        let a = right_dirac(&f).mul_nodewise(&g).unwrap();
        let b = f.mul_nodewise(&dirac(&g)).unwrap();
        let total = a.add(&b).unwrap();
        let width = 1 << n;
        let mut sum = vec![0.0; width];
        for (i, v) in total.data().iter().enumerate() {
            sum[i % width] += v * grid.cell_volume();
        }
        let scale: f64 = a.data().iter().map(|v| v.abs()).sum::<f64>() * grid.cell_volume();
        for s in sum {
            assert!(s.abs() <= 1e-13 * scale, "n={n}: {s}");
        }
    }
}

#[test]
fn weighted_inner_obeys_cauchy_schwarz() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for n in 1..=3 {
        let grid = cube(n, 7, 1);
        let w = WeightSpec::anisotropic(n);
        for _ in 0..20 {
            let f = random_field(&grid, n, &mut rng);
            let g = random_field(&grid, n, &mut rng);
            let lhs = weighted_inner(&f, &g, &w).unwrap().norm0();
            let rhs =
                (weighted_norm_sq(&f, &w).unwrap() * weighted_norm_sq(&g, &w).unwrap()).sqrt();
            assert!(lhs <= rhs * (1.0 + 1e-12), "n={n}: {lhs} > {rhs}");
        }
    }
}

#[test]
fn analytic_dual_is_adjoint_to_second_order() {
    for (n, w) in [
        (1, WeightSpec::x0_squared(1)),
        (2, WeightSpec::anisotropic(2)),
    ] {
        let base = cube(n, 9, 2);
        let amp = Multivector::from_coeffs(n, (0..1 << n).map(|b| 1.0 - 0.3 * b as f64).collect())
            .unwrap();
        let mut hs = Vec::new();
        let mut gaps = Vec::new();
        for k in 0..4 {
            let grid = base.refined(k).unwrap();
            let center = vec![0.0; n + 1];
            let alpha = CliffordField::from_coeff_fn(&grid, n, |x, out| {
                let s = polynomial_bump(&center, 0.7, 4, x);
                for (o, a) in out.iter_mut().zip(amp.coeffs()) {
                    *o = s * a;
                }
            })
            .unwrap();
            let u = CliffordField::from_coeff_fn(&grid, n, |x, out| {
                for (b, o) in out.iter_mut().enumerate() {
                    *o = (x[0] + 0.5 * b as f64).sin() * (1.0 + x[n] * x[n]);
                }
            })
            .unwrap();
            hs.push(grid.max_spacing());
            gaps.push(analytic_adjointness_gap(&alpha, &u, &w).unwrap());
        }
        let order = fit_order(&hs, &gaps).unwrap();
        assert!(order > 1.8, "n={n}: order {order}, gaps {gaps:?}");
    }
}

#[test]
fn constant_fields_are_annihilated() {
    let grid = cube(2, 7, 2);
    let c = CliffordField::from_coeff_fn(&grid, 2, |_, out| {
        out.copy_from_slice(&[1.0, -2.0, 0.5, 3.0])
    })
    .unwrap();
    assert_eq!(max_abs(&dirac(&c)), 0.0);
    assert_eq!(max_abs(&conj_dirac(&c)), 0.0);
    assert_eq!(max_abs(&laplacian(&c).unwrap()), 0.0);
}
