//! Exact certificates for the curvature-term identities.

use clifford_l2::identity::{
    certify_cross_sweep, certify_cross_terms, certify_i4, certify_i4_nonneg, certify_i5,
    certify_i7, certify_n1_vanishing, mutation_self_test, random_alpha, random_hessian,
    random_hypothesis_hessian, single_blade_alphas, sweep_cross_terms_sampled, two_blade_alphas,
    CaseFormula, Certificate, ExactMultivector, HessianStencil,
};

use super::rng_for;
use crate::report::Record;

/// Blade-level families are enumerated exhaustively up to this `n`.
pub const EXHAUSTIVE_MAX_N: usize = 4;
/// The cross-term sweep over all `(A, B, i, j)` runs up to this `n`.
pub const CROSS_EXHAUSTIVE_MAX_N: usize = 5;
/// Random inputs per randomized identity.
pub const MIN_RANDOM: usize = 1000;
/// Random `(α, H)` pairs for the nonnegativity check when `n ≤ 4`.
pub const NONNEG_PAIRS: usize = 10_000;

pub fn certificates(n: usize, trials: usize, seed: u64) -> Vec<Certificate> {
    let mut rng = rng_for(seed, "identities");
    let samples = trials.max(MIN_RANDOM);
    let randoms: Vec<ExactMultivector> =
        (0..samples).map(|_| random_alpha(n, 9, &mut rng)).collect();
    let mut out = Vec::new();

    if n <= EXHAUSTIVE_MAX_N {
        let singles = single_blade_alphas(n);
        let pairs = two_blade_alphas(n);
        out.push(certify_i5(n, &singles, "all single blades"));
        out.push(certify_i5(n, &pairs, "all e_A +- e_B"));
        out.push(certify_i7(n, &singles, "all single blades"));
        out.push(certify_i7(n, &pairs, "all e_A +- e_B"));
    }
    let scope = format!("{samples} random integer alpha");
    out.push(certify_i5(n, &randoms, &scope));
    out.push(certify_i7(n, &randoms, &scope));

    if n >= 2 {
        if n <= CROSS_EXHAUSTIVE_MAX_N {
            out.extend(certify_cross_terms(n));
        } else {
            let count = 100 * samples;
            let s = sweep_cross_terms_sampled(n, CaseFormula::Corrected, count, &mut rng);
            out.extend(certify_cross_sweep(
                n,
                &format!("{count} random A,B,i!=j"),
                &s,
            ));
        }
    }

    let assembled: Vec<(ExactMultivector, HessianStencil)> = randoms
        .iter()
        .map(|a| (a.clone(), random_hessian(n, &mut rng)))
        .collect();
    out.push(certify_i4(
        n,
        &assembled,
        &format!("{samples} random alpha, random symmetric H"),
    ));
    if n <= EXHAUSTIVE_MAX_N {
        let singles: Vec<(ExactMultivector, HessianStencil)> = single_blade_alphas(n)
            .into_iter()
            .map(|a| (a, random_hessian(n, &mut rng)))
            .collect();
        out.push(certify_i4(
            n,
            &singles,
            "all single blades, random symmetric H",
        ));
    }

    let nonneg_count = if n <= EXHAUSTIVE_MAX_N {
        NONNEG_PAIRS.max(samples)
    } else {
        samples
    };
    let hyp: Vec<(ExactMultivector, HessianStencil)> = (0..nonneg_count)
        .map(|_| {
            (
                random_alpha(n, 9, &mut rng),
                random_hypothesis_hessian(n, &mut rng),
            )
        })
        .collect();
    out.push(certify_i4_nonneg(
        n,
        &hyp,
        &format!("{nonneg_count} random alpha, random H meeting the hypotheses"),
    ));

    let n1: Vec<(ExactMultivector, HessianStencil)> = (0..samples)
        .map(|_| (random_alpha(1, 9, &mut rng), random_hessian(1, &mut rng)))
        .collect();
    out.push(certify_n1_vanishing(&n1));

    out.push(mutation_self_test(n.clamp(2, 3)));
    out
}

pub fn anchor(identity: &str) -> &'static str {
    match identity {
        "i5_diagonal" => "diagonal curvature terms: closed form with prefactor -2^(n+1)",
        "i7_vanishing" => "x0-mixed curvature terms vanish",
        "cross_case_sign" => "cross-term signs in cases c1-c4",
        "cross_no_case_is_zero" => "cross terms outside cases c1-c4 vanish",
        "cross_cases_exclusive" => "cases c1-c4 are mutually exclusive",
        "cross_r_convention" => "r convention in cases c3 and c4",
        "cross_literal_domain" => "domain where the uncorrected case exponents hold",
        "i4_assembled" => "assembled curvature term: direct = diagonal + cross + mixed",
        "i4_nonnegative" => "curvature term is nonnegative under the weight hypotheses",
        "i3_vanishes_n1" => "curvature term vanishes for n = 1",
        "mutant_sign_flip" => "self-test: flipped case signs are detected",
        _ => "identity certificate",
    }
}

pub fn records(certs: &[Certificate]) -> Vec<Record> {
    certs
        .iter()
        .map(|c| Record::from_certificate(c, anchor(&c.identity)))
        .collect()
}
