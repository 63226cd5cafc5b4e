//! Exact invariant checks for the Clifford algebra.

use clifford_l2::algebra::{blade_product, pow2, Multivector};
use clifford_l2::identity::{random_alpha, ExactMultivector};
use clifford_l2::Blade;
use num_bigint::BigInt;
use rand::Rng;

use super::rng_for;
use crate::report::Record;

/// Random multivectors per randomized check; at least this many for `n ≤ 6`.
pub const MIN_RANDOM: usize = 1000;

/// Blade triples checked exhaustively up to this `n`, sampled above it.
const EXHAUSTIVE_TRIPLES_MAX_N: usize = 6;

pub fn records(n: usize, trials: usize, seed: u64) -> Vec<Record> {
    let samples = if n <= 6 {
        trials.max(MIN_RANDOM)
    } else {
        trials
    };
    let mut rng = rng_for(seed, "algebra");
    let randoms: Vec<(ExactMultivector, ExactMultivector, ExactMultivector)> = (0..samples)
        .map(|_| {
            (
                random_alpha(n, 9, &mut rng),
                random_alpha(n, 9, &mut rng),
                random_alpha(n, 9, &mut rng),
            )
        })
        .collect();

    let mut out = vec![blade_units(n), blade_norms(n), clifford_relation(n)];
    out.push(blade_associativity(n, &mut rng));

    let mut assoc_fail = 0;
    let mut anti_fail = 0;
    let mut inv_fail = 0;
    let mut inner_fail = 0;
    for (a, b, c) in &randoms {
        let ab = a * b;
        if ab.product(c).unwrap() != a.product(&(b * c)).unwrap() {
            assoc_fail += 1;
        }
        let conj_ok = ab.conjugation() == &b.conjugation() * &a.conjugation();
        let rev_ok = ab.reversion() == &b.reversion() * &a.reversion();
        let inv_ok = ab.inversion() == &a.inversion() * &b.inversion();
        if !(conj_ok && rev_ok && inv_ok) {
            anti_fail += 1;
        }
        if a.inversion().reversion() != a.conjugation() || a.conjugation().conjugation() != *a {
            inv_fail += 1;
        }
        let direct = a.inner0(b).unwrap();
        if direct != a.inner0_via_product(b).unwrap() || a.inner0(a).unwrap() != a.norm0_sq() {
            inner_fail += 1;
        }
    }
    let scope = format!("{samples} random integer multivectors");
    for (id, anchor, fails) in [
        ("associativity_random", "(ab)c = a(bc)", assoc_fail),
        (
            "anti_homomorphism",
            "conj(ab) = conj(b) conj(a), rev(ab) = rev(b) rev(a)",
            anti_fail,
        ),
        (
            "involution_composition",
            "conj = inversion after reversion, involutive",
            inv_fail,
        ),
        (
            "inner_product_routes",
            "<tau_e0, conj(a) b> = 2^n sum a_A b_A",
            inner_fail,
        ),
    ] {
        out.push(
            Record::new(id, anchor, fails == 0)
                .param("n", n)
                .param("scope", scope.clone())
                .num("checked", samples)
                .num("failures", fails),
        );
    }
    out
}

fn blade_units(n: usize) -> Record {
    let one = Multivector::<BigInt>::scalar(n, BigInt::from(1));
    let mut fails = 0;
    let mut count = 0;
    for blade in Blade::all(n) {
        count += 1;
        let e = Multivector::<BigInt>::basis(n, blade);
        if &e * &e.conjugation() != one || &e.conjugation() * &e != one {
            fails += 1;
        }
    }
    Record::new(
        "blade_times_conjugate",
        "e_A conj(e_A) = conj(e_A) e_A = 1",
        fails == 0,
    )
    .param("n", n)
    .param("scope", "all blades")
    .num("checked", count)
    .num("failures", fails)
}

fn blade_norms(n: usize) -> Record {
    let expected = pow2::<BigInt>(n);
    let fails = Blade::all(n)
        .filter(|b| Multivector::<BigInt>::basis(n, *b).norm0_sq() != expected)
        .count();
    Record::new("blade_norm", "|e_A|_0^2 = 2^n", fails == 0)
        .param("n", n)
        .param("scope", "all blades")
        .num("checked", 1usize << n)
        .num("failures", fails)
        .num("expected_norm_sq", 1u64 << n)
}

fn clifford_relation(n: usize) -> Record {
    let gen = |i: usize| -> Multivector<BigInt> {
        if i == 0 {
            Multivector::scalar(n, BigInt::from(1))
        } else {
            Multivector::basis(n, Blade::generator(i))
        }
    };
    let mut fails = 0;
    for i in 0..=n {
        for j in 0..=n {
            let (ei, ej) = (gen(i), gen(j));
            let lhs = &(&ei * &ej.conjugation()) + &(&ej * &ei.conjugation());
            let rhs = Multivector::scalar(n, BigInt::from(if i == j { 2 } else { 0 }));
            if lhs != rhs {
                fails += 1;
            }
        }
    }
    Record::new(
        "clifford_relation",
        "e_i conj(e_j) + e_j conj(e_i) = 2 delta_ij",
        fails == 0,
    )
    .param("n", n)
    .param("scope", "all generator pairs including e_0")
    .num("checked", (n + 1) * (n + 1))
    .num("failures", fails)
}

fn blade_associativity<R: Rng>(n: usize, rng: &mut R) -> Record {
    let blades: Vec<Blade> = Blade::all(n).collect();
    let mut fails = 0u64;
    let mut checked = 0u64;
    let mut check = |a: Blade, b: Blade, c: Blade| {
        checked += 1;
        let (s1, ab) = blade_product(n, a, b).unwrap();
        let (s2, abc) = blade_product(n, ab, c).unwrap();
        let (s3, bc) = blade_product(n, b, c).unwrap();
        let (s4, abc2) = blade_product(n, a, bc).unwrap();
        if abc != abc2 || s1 * s2 != s3 * s4 {
            fails += 1;
        }
    };
    let scope = if n <= EXHAUSTIVE_TRIPLES_MAX_N {
        for &a in &blades {
            for &b in &blades {
                for &c in &blades {
                    check(a, b, c);
                }
            }
        }
        "all blade triples".to_string()
    } else {
        let samples = 200_000;
        for _ in 0..samples {
            let pick = |r: &mut R| blades[r.random_range(0..blades.len())];
            let (a, b, c) = (pick(rng), pick(rng), pick(rng));
            check(a, b, c);
        }
        format!("{samples} random blade triples")
    };
    Record::new(
        "associativity_blades",
        "(e_A e_B) e_C = e_A (e_B e_C)",
        fails == 0,
    )
    .param("n", n)
    .param("scope", scope)
    .num("checked", checked)
    .num("failures", fails)
}
