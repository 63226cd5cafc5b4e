//! Finite-difference Dirac calculus checks on random and smooth fields.

use anyhow::Result;
use clifford_l2::convergence::{cauchy_kernel_study, fit_order, strictly_decreasing, KERNEL_BOX};
use clifford_l2::field::{
    conj_dirac, dirac, dirac_product_expansion, dirac_product_rule_rhs, laplacian,
    right_conj_dirac, right_dirac, weighted_inner, weighted_norm_sq, CliffordField, GridSpec,
};
use clifford_l2::weight::WeightSpec;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{rng_for, ORDER_THRESHOLD};
use crate::report::Record;

/// Cap on `nodes · 2^n` for the random-field grid.
const FIELD_BUDGET: usize = 1 << 21;
/// Cap on `nodes · 2^n` for the finest kernel rung.
const KERNEL_BUDGET: usize = 1 << 25;

pub const FACTORIZATION_TOL: f64 = 1e-13;
pub const EXACT_RULE_TOL: f64 = 1e-12;

fn random_field(grid: &GridSpec, n: usize, rng: &mut ChaCha8Rng) -> Result<CliffordField> {
    let data = (0..grid.node_count() << n)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    Ok(CliffordField::from_data(grid, n, data)?)
}

fn max_abs(f: &CliffordField) -> f64 {
    f.data().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// The configured grid with margin raised to 2 and the point count capped
/// so a field holds at most [`FIELD_BUDGET`] values.
pub fn operator_grid(grid: &GridSpec, n: usize) -> Result<GridSpec> {
    let width = 1usize << n;
    let dim = n + 1;
    let mut counts = grid.counts().to_vec();
    while counts.iter().product::<usize>() * width > FIELD_BUDGET {
        let k = (0..dim).max_by_key(|&k| counts[k]).expect("dim >= 2");
        if counts[k] <= 7 {
            break;
        }
        counts[k] -= 1;
    }
    Ok(GridSpec::new(
        grid.lower().to_vec(),
        grid.upper().to_vec(),
        counts,
        grid.margin().max(2),
    )?)
}

pub fn records(
    n: usize,
    grid: &GridSpec,
    w: &WeightSpec,
    trials: usize,
    seed: u64,
) -> Result<Vec<Record>> {
    let grid = operator_grid(grid, n)?;
    let fields = trials.min(100);
    let mut rng = rng_for(seed, "operators");
    let mut out = Vec::new();
    let counts: Vec<usize> = grid.counts().to_vec();

    let mut worst_fact: f64 = 0.0;
    let mut conj_worst: f64 = 0.0;
    let mut rule_worst: f64 = 0.0;
    let mut parts_worst: f64 = 0.0;
    let mut cs_worst: f64 = 0.0;
    for _ in 0..fields {
        let f = random_field(&grid, n, &mut rng)?;
        let lap = laplacian(&f)?;
        let scale = max_abs(&lap);
        for composed in [dirac(&conj_dirac(&f)), conj_dirac(&dirac(&f))] {
            let err = composed.max_abs_diff_where(&lap, |v| grid.node_margin(v) >= 2);
            worst_fact = worst_fact.max(err / scale);
        }

        let left = dirac(&f).conjugation();
        let right = right_conj_dirac(&f.conjugation());
        conj_worst = conj_worst.max(left.max_abs_diff_where(&right, |_| true));

        let g = random_field(&grid, n, &mut rng)?;
        let lhs = dirac(&f.mul_nodewise(&g)?);
        let rhs = dirac_product_expansion(&f, &g)?;
        rule_worst = rule_worst.max(lhs.max_abs_diff_where(&rhs, |_| true) / max_abs(&lhs));

        let (fc, gc) = (f.restrict_to_interior(), g.restrict_to_interior());
        let a = right_dirac(&fc).mul_nodewise(&gc)?;
        let b = fc.mul_nodewise(&dirac(&gc))?;
        let width = 1usize << n;
        let mut sum = vec![0.0; width];
        for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
            sum[i % width] += x + y;
        }
        let size: f64 = a.data().iter().map(|v| v.abs()).sum();
        let defect = sum.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        parts_worst = parts_worst.max(defect / size);

        let ip = weighted_inner(&f, &g, w)?.norm0();
        let bound = (weighted_norm_sq(&f, w)? * weighted_norm_sq(&g, w)?).sqrt();
        cs_worst = cs_worst.max(ip / bound);
    }
    let scope = format!("{fields} random fields");
    out.push(
        Record::new(
            "factorization",
            "D_bar D = D D_bar = Laplacian, exact for the same-stencil Laplacian",
            worst_fact <= FACTORIZATION_TOL,
        )
        .param("n", n)
        .param("counts", counts.clone())
        .param("scope", scope.clone())
        .num("max_relative_defect", worst_fact)
        .num("tolerance", FACTORIZATION_TOL),
    );
    out.push(
        Record::new(
            "conjugation_lemma",
            "conj(D_bar u) = conj(u) D",
            conj_worst == 0.0,
        )
        .param("n", n)
        .param("scope", scope.clone())
        .num("max_abs_defect", conj_worst),
    );
    out.push(
        Record::new(
            "product_rule_averaged",
            "discrete product rule with neighbour averages is exact",
            rule_worst <= EXACT_RULE_TOL,
        )
        .param("n", n)
        .param("scope", scope.clone())
        .num("max_relative_defect", rule_worst)
        .num("tolerance", EXACT_RULE_TOL),
    );
    out.push(
        Record::new(
            "summation_by_parts",
            "Stokes-Green for compactly supported fields: sum (F D_bar) G + F (D_bar G) = 0",
            parts_worst <= FACTORIZATION_TOL,
        )
        .param("n", n)
        .param("scope", scope.clone())
        .num("max_relative_defect", parts_worst)
        .num("tolerance", FACTORIZATION_TOL),
    );
    out.push(
        Record::new(
            "cauchy_schwarz",
            "|(F, G)_phi|_0 <= ||F|| ||G||",
            cs_worst <= 1.0 + 1e-12,
        )
        .param("n", n)
        .param("weight", w.name())
        .param("scope", scope)
        .num("max_ratio", cs_worst),
    );
    out.push(literal_product_rule(n)?);
    out.push(constant_field(n, &grid)?);
    out.push(kernel_defect(n)?);
    Ok(out)
}

/// Smooth `u` and vector-valued `v`. Frequencies stay in `[1, 2)` for every
/// `n` so the coarse rungs are already asymptotic.
fn smooth_pair(grid: &GridSpec, n: usize) -> Result<(CliffordField, CliffordField)> {
    let width = (1usize << n) as f64;
    let u = CliffordField::from_coeff_fn(grid, n, |x, out| {
        for (b, o) in out.iter_mut().enumerate() {
            let freq = 1.0 + b as f64 / width;
            *o = (freq * x[0] + x[x.len() - 1]).sin() + 0.3 * x[0] * x[0];
        }
    })?;
    let v = CliffordField::from_coeff_fn(grid, n, |x, out| {
        out[0] = (x[0] - 0.5 * x[1]).cos();
        for i in 1..=n {
            let freq = 1.0 + i as f64 / (n + 1) as f64;
            out[1 << (i - 1)] = (freq * x[i] + x[0]).sin();
        }
    })?;
    Ok((u, v))
}

fn literal_product_rule(n: usize) -> Result<Record> {
    // Higher n trades box size for rungs to stay within memory.
    let (half_width, base_count, rungs) = match n {
        1 | 2 => (1.0, 9, 4),
        3 => (0.5, 7, 3),
        _ => (0.5, 7, 2),
    };
    let base = GridSpec::cube(n + 1, -half_width, half_width, base_count, 1)?;
    let mut hs = Vec::new();
    let mut errs = Vec::new();
    for k in 0..rungs as u32 {
        let grid = base.refined(k)?;
        let (u, v) = smooth_pair(&grid, n)?;
        let lhs = dirac(&u.mul_nodewise(&v)?);
        let rhs = dirac_product_rule_rhs(&u, &v)?;
        hs.push(grid.max_spacing());
        errs.push(lhs.max_abs_diff_where(&rhs, |node| grid.node_margin(node) >= 1));
    }
    let order = fit_order(&hs, &errs);
    let ok = strictly_decreasing(&errs) && order.is_some_and(|p| p >= ORDER_THRESHOLD);
    Ok(Record::new(
        "product_rule_literal",
        "product rule with commutator terms (e_j u - u e_j) d_j v, second-order accurate",
        ok,
    )
    .param("n", n)
    .param("box", vec![-half_width, half_width])
    .param("base_count", base_count)
    .param("rungs", rungs)
    .num("h", hs)
    .num("max_defect", errs)
    .num("order", order)
    .num("order_threshold", ORDER_THRESHOLD))
}

fn constant_field(n: usize, grid: &GridSpec) -> Result<Record> {
    let c = CliffordField::from_coeff_fn(grid, n, |_, out| {
        for (b, o) in out.iter_mut().enumerate() {
            *o = 1.0 + b as f64;
        }
    })?;
    let worst = [dirac(&c), conj_dirac(&c), right_dirac(&c), laplacian(&c)?]
        .iter()
        .map(max_abs)
        .fold(0.0, f64::max);
    Ok(Record::new(
        "constant_field",
        "operators annihilate constants",
        worst == 0.0,
    )
    .param("n", n)
    .num("max_abs_output", worst))
}

/// Rungs of the kernel ladder that fit in [`KERNEL_BUDGET`], at most 4.
pub fn kernel_rungs(n: usize) -> usize {
    let cells = KERNEL_BOX.2;
    let mut rungs = 0;
    while rungs < 4 {
        let count = cells * (1 << rungs) + 1;
        if count.pow(n as u32 + 1) << n > KERNEL_BUDGET {
            break;
        }
        rungs += 1;
    }
    rungs.max(2)
}

pub fn kernel_defect(n: usize) -> Result<Record> {
    let rungs = kernel_rungs(n);
    let study = cauchy_kernel_study(n, rungs)?;
    let values = study.values();
    let ok = strictly_decreasing(&values) && study.order.is_some_and(|p| p >= ORDER_THRESHOLD);
    let hs: Vec<f64> = study.rungs.iter().map(|r| r.h).collect();
    Ok(Record::new(
        "cauchy_kernel_defect",
        "the generalized Cauchy kernel is monogenic away from 0",
        ok,
    )
    .param("n", n)
    .param("annulus", vec![0.5, 1.0])
    .param("rungs", rungs)
    .num("h", hs)
    .num("defect", values)
    .num("order", study.order)
    .num("order_threshold", ORDER_THRESHOLD))
}
