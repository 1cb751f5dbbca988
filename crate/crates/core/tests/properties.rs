use proptest::prelude::*;

use phigamma::cyclo::{theta_map, Theta};
use phigamma::herr::{herr_complex, HerrParams};
use phigamma::laurent::{frobenius_series, gamma_series, psi_series, GammaElement, TruncatedLaurent};
use phigamma::module::twist_module;
use phigamma::padic::{Modulus, PAdic};
use phigamma::par::Exec;
use phigamma::perf::{Exp, PerfLaurent};
use phigamma::snf::{smith_normal_form, Matrix};
use phigamma::witt::{gauss_valuation, seeded_witt_samples, WittVector};

const P: u64 = 3;

fn md(n: u32) -> Modulus {
    Modulus::new(P, n).unwrap()
}

fn series(lo: i64) -> impl Strategy<Value = TruncatedLaurent> {
    prop::collection::vec(-200i64..200, 1..12).prop_map(move |c| TruncatedLaurent::from_coeffs(&md(10), lo, &c))
}

fn gamma() -> impl Strategy<Value = GammaElement> {
    (1..P, -5i64..=5).prop_map(|(a, s)| GammaElement::new(P, a, s).unwrap())
}

fn witt_triple() -> impl Strategy<Value = (WittVector, WittVector, WittVector)> {
    any::<u64>().prop_map(|seed| {
        let mut v = seeded_witt_samples(P, 3, seed, 3).into_iter();
        (v.next().unwrap(), v.next().unwrap(), v.next().unwrap())
    })
}

fn perf() -> impl Strategy<Value = PerfLaurent> {
    prop::collection::vec((0i64..8, 0u32..3, 1i64..P as i64), 1..4).prop_map(|terms| {
        let terms = terms.into_iter().map(|(a, j, c)| (Exp::new(a, P.pow(j) as i64), c));
        PerfLaurent::from_terms(P, terms, None).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn psi_is_left_inverse_to_phi(f in series(-3)) {
        let back = psi_series(&frobenius_series(&f).unwrap()).unwrap();
        prop_assert!(back.eq_at_precision(&f));
    }

    #[test]
    fn psi_is_linear_over_phi(r in series(-2), s in series(0)) {
        let lhs = psi_series(&r.mul(&frobenius_series(&s).unwrap()).unwrap()).unwrap();
        let rhs = psi_series(&r).unwrap().mul(&s).unwrap();
        prop_assert!(lhs.eq_at_precision(&rhs));
    }

    #[test]
    fn phi_commutes_with_gamma(f in series(-2), c in gamma()) {
        let cap = 30;
        let a = frobenius_series(&gamma_series(&f, &c, cap).unwrap()).unwrap();
        let b = gamma_series(&frobenius_series(&f).unwrap(), &c, cap).unwrap();
        prop_assert!(a.eq_at_precision(&b));
    }

    #[test]
    fn gamma_is_a_group_action(f in series(0), c in gamma(), d in gamma()) {
        let cap = 20;
        let a = gamma_series(&gamma_series(&f, &d, cap).unwrap(), &c, cap).unwrap();
        let b = gamma_series(&f, &c.compose(&d), cap).unwrap();
        prop_assert!(a.eq_at_precision(&b));
    }

    #[test]
    fn witt_ring_axioms((x, y, z) in witt_triple()) {
        prop_assert_eq!(x.add(&y).unwrap().add(&z).unwrap(), x.add(&y.add(&z).unwrap()).unwrap());
        prop_assert_eq!(x.mul(&y).unwrap(), y.mul(&x).unwrap());
        let lhs = x.mul(&y.add(&z).unwrap()).unwrap();
        let rhs = x.mul(&y).unwrap().add(&x.mul(&z).unwrap()).unwrap();
        prop_assert_eq!(lhs, rhs);
        prop_assert_eq!(x.sub(&x).unwrap(), WittVector::zero(P, 3));
    }

    #[test]
    fn witt_frobenius_is_a_ring_map((x, y, _z) in witt_triple()) {
        let f = |w: &WittVector| w.frobenius().unwrap();
        prop_assert_eq!(f(&x.mul(&y).unwrap()), f(&x).mul(&f(&y)).unwrap());
        prop_assert_eq!(f(&x.add(&y).unwrap()), f(&x).add(&f(&y)).unwrap());
    }

    #[test]
    fn frobenius_roots_exist(x in perf()) {
        prop_assert_eq!(x.root().unwrap().frobenius().unwrap(), x.clone());
        prop_assert_eq!(x.frobenius().unwrap().root().unwrap(), x);
    }

    #[test]
    fn teichmuller_norm_is_multiplicative(a in perf(), b in perf()) {
        let r = Exp::new(3, 2);
        let ta = WittVector::teichmuller(&a, 3);
        let tb = WittVector::teichmuller(&b, 3);
        let prod = gauss_valuation(&ta.mul(&tb).unwrap(), r);
        let sum = gauss_valuation(&ta, r).zip(gauss_valuation(&tb, r)).map(|(u, v)| u + v);
        prop_assert_eq!(prod, sum);
    }

    #[test]
    fn theta_is_additive_and_multiplicative((x, y, _z) in witt_triple()) {
        let m = 1;
        let (tx, ty) = (theta_map(&x, m, None).unwrap(), theta_map(&y, m, None).unwrap());
        let level = tx.value.level.max(ty.value.level);
        let (ax, ay) = (tx.value.lift_to(level).unwrap(), ty.value.lift_to(level).unwrap());
        let sum = Theta { value: ax.add(&ay).unwrap(), ..tx.clone() };
        let prod = Theta { value: ax.mul(&ay).unwrap(), ..tx.clone() };
        prop_assert!(theta_map(&x.add(&y).unwrap(), m, None).unwrap().residual(&sum).unwrap().is_zero());
        prop_assert!(theta_map(&x.mul(&y).unwrap(), m, None).unwrap().residual(&prod).unwrap().is_zero());
    }

    #[test]
    fn padic_field_operations(a in 1i64..10_000, b in 1i64..10_000) {
        let m = md(8);
        let (x, y) = (PAdic::from_int(&m, a), PAdic::from_int(&m, b));
        let q = x.mul(&y.inv().unwrap()).unwrap();
        prop_assert!(q.mul(&y).unwrap().eq_at_precision(&x));
        prop_assert!(x.add(&y).unwrap().sub(&y).unwrap().eq_at_precision(&x));
    }

    #[test]
    fn smith_form_is_parallel_invariant(rows in prop::collection::vec(prop::collection::vec(-50i64..50, 5), 4)) {
        let m = md(6);
        let a = Matrix::from_rows(&m, &rows);
        let s = smith_normal_form(&a, true);
        let (u, v) = (s.u.clone().unwrap(), s.v.clone().unwrap());
        let d = u.mul(&a, Exec::Parallel).mul(&v, Exec::Sequential);
        // U A V is diagonal
        for i in 0..d.rows {
            for j in 0..d.cols {
                if i != j {
                    prop_assert_eq!(d.get(i, j), 0);
                }
            }
        }
        prop_assert_eq!(u.mul(&a, Exec::Parallel), u.mul(&a, Exec::Sequential));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn rank_one_euler_characteristic(n in -2i64..=2) {
        let params = HerrParams::new(P, 8, 30, 3).unwrap();
        let r = herr_complex(&twist_module(&md(11), n), &params, Exec::default()).unwrap();
        prop_assert!(r.all_converged());
        let chi = r.dims[0] as i64 - r.dims[1] as i64 + r.dims[2] as i64;
        prop_assert_eq!(chi, -1);
    }
}
