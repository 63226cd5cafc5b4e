use clifford_l2::algebra::{blade_product, pow2, Blade, Multivector};
use proptest::prelude::*;

fn mv(n: usize) -> impl Strategy<Value = Multivector<i64>> {
    prop::collection::vec(-9i64..=9, 1usize << n)
        .prop_map(move |c| Multivector::from_coeffs(n, c).unwrap())
}

fn triple() -> impl Strategy<Value = (Multivector<i64>, Multivector<i64>, Multivector<i64>)> {
    (1usize..=5).prop_flat_map(|n| (mv(n), mv(n), mv(n)))
}

fn generator(n: usize, i: usize) -> Multivector<i64> {
    if i == 0 {
        Multivector::scalar(n, 1)
    } else {
        Multivector::basis(n, Blade::generator(i))
    }
}

proptest! {
    #[test]
    fn product_is_associative((a, b, c) in triple()) {
        let left = (&a * &b).product(&c).unwrap();
        let right = a.product(&(&b * &c)).unwrap();
        prop_assert_eq!(left, right);
    }

    #[test]
    fn conjugation_and_reversion_reverse_products((a, b, _c) in triple()) {
        let ab = &a * &b;
        prop_assert_eq!(ab.conjugation(), &b.conjugation() * &a.conjugation());
        prop_assert_eq!(ab.reversion(), &b.reversion() * &a.reversion());
        prop_assert_eq!(ab.inversion(), &a.inversion() * &b.inversion());
    }

    #[test]
    fn involutions_are_involutive((a, _b, _c) in triple()) {
        prop_assert_eq!(a.conjugation().conjugation(), a.clone());
        prop_assert_eq!(a.reversion().reversion(), a.clone());
        prop_assert_eq!(a.inversion().inversion(), a.clone());
        prop_assert_eq!(a.inversion().reversion(), a.conjugation());
    }

    #[test]
    fn inner_product_routes_agree((a, b, _c) in triple()) {
        let direct = a.inner0(&b).unwrap();
        prop_assert_eq!(direct, a.inner0_via_product(&b).unwrap());
        prop_assert_eq!(direct, b.inner0(&a).unwrap());
        prop_assert_eq!(a.inner0(&a).unwrap(), a.norm0_sq());
    }

    #[test]
    fn scalar_part_of_product_matches_full_product((a, b, _c) in triple()) {
        prop_assert_eq!(a.scalar_part_of_product(&b).unwrap(), (&a * &b).scalar_part());
    }

    #[test]
    fn product_is_bilinear((a, b, c) in triple()) {
        let sum = &b + &c;
        prop_assert_eq!(&a * &sum, &(&a * &b) + &(&a * &c));
    }
}

#[test]
fn blades_times_conjugates_are_unit() {
    for n in 1..=6 {
        let one = Multivector::<i64>::scalar(n, 1);
        for blade in Blade::all(n) {
            let e = Multivector::<i64>::basis(n, blade);
            assert_eq!(&e * &e.conjugation(), one, "n={n} {blade}");
            assert_eq!(&e.conjugation() * &e, one, "n={n} {blade}");
            assert_eq!(e.norm0_sq(), pow2::<i64>(n));
        }
    }
}

#[test]
fn generators_satisfy_clifford_relation() {
    for n in 1..=6 {
        for i in 0..=n {
            for j in 0..=n {
                let ei = generator(n, i);
                let ej = generator(n, j);
                let lhs = &(&ei * &ej.conjugation()) + &(&ej * &ei.conjugation());
                let expected = if i == j { 2 } else { 0 };
                assert_eq!(lhs, Multivector::scalar(n, expected), "n={n} i={i} j={j}");
            }
        }
    }
}

#[test]
fn blade_products_agree_with_multivector_products() {
    for n in 1..=5 {
        for a in Blade::all(n) {
            for b in Blade::all(n) {
                let (sign, c) = blade_product(n, a, b).unwrap();
                let expected = Multivector::<i64>::basis(n, c).scale(&sign.to_i64());
                let got = &Multivector::basis(n, a) * &Multivector::basis(n, b);
                assert_eq!(got, expected);
                assert_eq!(c.bits(), a.bits() ^ b.bits());
            }
        }
    }
}
