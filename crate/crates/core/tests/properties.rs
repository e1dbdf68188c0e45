use hermtheta::enumeration::{enumerate, vectors_by_norm};
use hermtheta::linalg::{self, IntMatrix};
use hermtheta::maass::{check_krieg, check_sugano, KriegForm};
use hermtheta::modgroup::{build_vd, vd_act};
use hermtheta::qfield::{divisors, Ideal};
use hermtheta::reduction::{minimize_index, reduce_index};
use hermtheta::theta::{divisor_power_sum, CoefficientTable, HermIndex};
use hermtheta::{BigRational, FieldCtx, KElem};
use num_bigint::BigInt;
use proptest::prelude::*;

const FIELDS: [i64; 10] = [1, 2, 3, 5, 6, 7, 15, 23, 30, 47];

fn field() -> impl Strategy<Value = FieldCtx> {
    prop::sample::select(FIELDS.to_vec()).prop_map(|m| FieldCtx::new(m).unwrap())
}

fn elem() -> impl Strategy<Value = KElem> {
    (-40i64..40, -40i64..40).prop_map(|(a, b)| KElem::from_ints(a, b))
}

fn index() -> impl Strategy<Value = HermIndex> {
    (-20i64..50, -20i64..50, -60i64..60, -60i64..60).prop_map(|(k, l, a, b)| HermIndex::new(k, l, a, b))
}

/// A positive semidefinite index with `k >= 1`.
fn psd(ctx: &FieldCtx, t: HermIndex) -> HermIndex {
    let k = t.k.rem_euclid(12) + 1;
    let l = t.l.rem_euclid(12) + 1;
    let mut out = HermIndex::new(k, l, t.tau[0] % 20, t.tau[1] % 20);
    while !out.is_psd(ctx) {
        out.l += 7;
    }
    out
}

fn rat(p: i64) -> BigRational {
    BigRational::from_integer(p.into())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_multiplicative(ctx in field(), x in elem(), y in elem()) {
        prop_assert_eq!(ctx.norm(&ctx.mul(&x, &y)), ctx.norm(&x) * ctx.norm(&y));
        prop_assert_eq!(ctx.conj(&ctx.conj(&x)), x.clone());
        if !y.is_zero() {
            prop_assert_eq!(ctx.mul(&ctx.div(&x, &y).unwrap(), &y), x);
        }
    }

    #[test]
    fn ideal_norms_multiply(ctx in field(), x in elem(), y in elem(), z in elem()) {
        prop_assume!(!x.is_zero() && !y.is_zero() && !z.is_zero());
        let p = Ideal::principal(&ctx, &x).unwrap();
        prop_assert_eq!(BigRational::from_integer(p.norm.into()), ctx.norm(&x));
        let a = Ideal::from_gens(&ctx, &[y.clone(), z.clone()]).unwrap();
        let b = Ideal::from_gens(&ctx, &[x.clone(), z]).unwrap();
        prop_assert_eq!(a.product(&ctx, &b).unwrap().norm, a.norm * b.norm);
        prop_assert!(a.contains(&y));
    }

    #[test]
    fn vd_action_keeps_det_and_eps(ctx in field(), t in index(), pick in 0usize..16) {
        prop_assume!(!t.is_zero());
        let ds = ctx.squarefree_disc_divisors();
        let v = build_vd(&ctx, ds[pick % ds.len()]).unwrap();
        let u = vd_act(&ctx, &t, &v, false).unwrap();
        prop_assert_eq!(u.det_d(&ctx), t.det_d(&ctx));
        prop_assert_eq!(u.epsilon(), t.epsilon());
        prop_assert_eq!(vd_act(&ctx, &u, &v, true).unwrap(), t);
    }

    #[test]
    fn reduction_is_canonical(ctx in field(), t in index()) {
        let t = psd(&ctx, t);
        let r = reduce_index(&ctx, &t).unwrap();
        prop_assert_eq!(r.det_d(&ctx), t.det_d(&ctx));
        prop_assert_eq!(r.epsilon(), t.epsilon());
        prop_assert!(r.k <= r.l);
        prop_assert_eq!(reduce_index(&ctx, &r).unwrap(), r);
        prop_assert_eq!(reduce_index(&ctx, &t.swapped(&ctx)).unwrap(), r);
        if t.det_d(&ctx) > 0 {
            let s = minimize_index(&ctx, &t).unwrap();
            prop_assert_eq!(s.det_d(&ctx), t.det_d(&ctx));
            prop_assert_eq!(s.epsilon(), t.epsilon());
            prop_assert!(s.k <= r.k);
        }
    }

    #[test]
    fn matrix_encoding_round_trips(ctx in field(), t in index()) {
        prop_assert_eq!(HermIndex::from_matrix(&ctx, &t.to_matrix(&ctx)).unwrap(), t);
    }

    #[test]
    fn r_s_match_real_and_imaginary_parts(ctx in field(), t in index()) {
        // t = p + q omega: Re t = p + q tr/2, Im(omega) = sqrt(m) or sqrt(m)/2
        let x = t.t(&ctx);
        let tr = rat(ctx.omega_trace());
        let two = rat(2);
        let re2 = &two * (&x.a + &x.b * &tr / &two);
        let im = if ctx.omega_trace() == 1 { &x.b * rat(ctx.m()) } else { &two * &x.b * rat(ctx.m()) };
        let (r, s) = t.r_s(&ctx);
        prop_assert_eq!(re2, rat(r));
        prop_assert_eq!(im, rat(s));
    }

    #[test]
    fn divisor_sums_match_naive(n in 1i64..500, e in 0u32..6) {
        let naive: BigInt = divisors(n).iter().map(|&d| BigInt::from(d).pow(e)).sum();
        prop_assert_eq!(divisor_power_sum(n, e), naive);
        prop_assert!((1..=n).filter(|d| n % d == 0).eq(divisors(n)));
    }

    #[test]
    fn float_and_exact_enumeration_agree(seed in prop::collection::vec(-3i64..=3, 16), bound in 1i64..12) {
        // S = B B^t + I is positive definite
        let b: IntMatrix = seed.chunks(4).map(|r| r.to_vec()).collect();
        let mut s = linalg::int_mul(&b, &linalg::transpose(&b));
        for (i, row) in s.iter_mut().enumerate() {
            row[i] += 1;
        }
        let fast: usize = vectors_by_norm(&s, bound).unwrap().values().map(|v| v.len()).sum();
        let mut exact = 0usize;
        enumerate(&linalg::int_to_rat(&s), &rat(bound), |_| exact += 1).unwrap();
        prop_assert_eq!(2 * fast, exact);
    }

    #[test]
    fn krieg_tables_are_sugano_tables(ctx in field(), r in prop::sample::select(vec![4i64, 8, 10]), c in -20i64..20) {
        let form = KriegForm::new(ctx.clone(), r, |d| Some(rat(c + (d as i64 % 7))));
        let table = form.table(40, 5).unwrap();
        prop_assert!(check_krieg(&table).ok);
        prop_assert!(check_sugano(&table, Some(&form)).unwrap().ok());
        let json = serde_json::to_string(&table).unwrap();
        let back: CoefficientTable = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, table);
    }
}
