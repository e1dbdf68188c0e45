use std::collections::BTreeMap;

use hermtheta::maass::*;
use hermtheta::theta::{CoefficientTable, HermIndex, ThetaEngine};
use hermtheta::{ExampleReading, FieldCtx, HermLattice};
use num_rational::BigRational;
use num_traits::{One, Zero};

fn q(n: i64) -> BigRational {
    BigRational::from_integer(n.into())
}

fn krieg_table(m: i64, r: i64, bound: i64, cap: i64) -> CoefficientTable {
    let ctx = FieldCtx::new(m).unwrap();
    gen_krieg_table(&ctx, r, |d| Some(q(d as i64 * d as i64 + 3)), bound, cap).unwrap()
}

#[test]
fn constant_alpha_star_gives_nine_at_eps_two() {
    let ctx = FieldCtx::new(5).unwrap();
    let form = KriegForm::new(ctx.clone(), 4, |_| Some(BigRational::one()));
    let t = HermIndex::new(2, 2, 0, 0);
    assert_eq!(t.epsilon(), 2);
    assert_eq!(form.value(&t).unwrap(), q(9));
    let primitive = HermIndex::new(1, 2, 0, 0);
    assert_eq!(form.value(&primitive).unwrap(), q(1));
}

#[test]
fn zero_alpha_star_gives_zero_table() {
    let ctx = FieldCtx::new(6).unwrap();
    let t = gen_krieg_table(&ctx, 4, |_| Some(BigRational::zero()), 40, 6).unwrap();
    assert!(!t.entries.is_empty());
    assert!(t.entries.values().all(Zero::is_zero));
}

#[test]
fn missing_alpha_star_is_an_error() {
    let ctx = FieldCtx::new(5).unwrap();
    assert!(gen_krieg_table(&ctx, 4, |d| (d < 10).then(BigRational::one), 40, 6).is_err());
}

#[test]
fn krieg_tables_pass_everything_and_recover_alpha_star() {
    for m in [5, 6, 7, 30] {
        let table = krieg_table(m, 4, 60, 6);
        let check = check_krieg(&table);
        assert!(check.ok, "m={m} {:?}", check.witnesses);
        for t in table.entries.keys().filter(|t| t.epsilon() == 1) {
            let dd = t.det_d(&table.ctx);
            assert_eq!(check.alpha_star[&dd], q(dd as i64 * dd as i64 + 3));
        }
        let ctx = table.ctx.clone();
        let form = KriegForm::new(ctx.clone(), 4, |d| Some(q(d as i64 * d as i64 + 3)));
        let report = theorem3_verify(&table, Some(&form)).unwrap();
        assert!(report.sugano_ok && report.krieg_ok && report.all_invariant(), "m={m} {report:?}");
        assert!(report.consistent);
        assert!(report.lemma2iii.values().all(|&b| b));
    }
}

#[test]
fn perturbed_entry_is_reported() {
    let mut table = krieg_table(7, 4, 40, 6);
    let t = *table.entries.keys().find(|t| t.k == 2 && t.epsilon() == 1).unwrap();
    *table.entries.get_mut(&t).unwrap() += BigRational::one();
    let check = check_krieg(&table);
    assert!(!check.ok);
    assert!(check.witnesses.iter().any(|w| w.index == t || w.other == Some(t)));
    let sugano = check_sugano(&table, None).unwrap();
    assert_eq!(sugano.status, Status::Fails);
    assert_eq!(sugano.witnesses[0].index, t);
}

#[test]
fn only_zero_index_is_vacuous() {
    let mut table = krieg_table(5, 4, 10, 2);
    table.entries.clear();
    table.entries.insert(HermIndex::zero(), q(1));
    assert!(check_krieg(&table).ok);
    assert!(check_sugano(&table, None).unwrap().ok());
}

/// First-row data that also depends on `R mod 2`, which separates reduced
/// `k = 1` indices of equal `detD` for `m = 5`.
fn parity_form(ctx: &FieldCtx) -> impl Fn(&HermIndex) -> Option<BigRational> + Sync + '_ {
    move |t: &HermIndex| {
        let dd = t.det_d(ctx) as i64;
        let (r, _) = t.r_s(ctx);
        Some(q(dd + 1000 * r.rem_euclid(2)))
    }
}

#[test]
fn sugano_tables_with_conflicts_fail_krieg() {
    let ctx = FieldCtx::new(5).unwrap();
    let form = SuganoForm::new(ctx.clone(), 4, parity_form(&ctx));
    let table = form.table(60, 6).unwrap();
    let sugano = check_sugano(&table, Some(&form)).unwrap();
    assert!(sugano.ok(), "{sugano:?}");
    let krieg = check_krieg(&table);
    assert!(!krieg.ok);
    let w = &krieg.witnesses[0];
    let other = w.other.unwrap();
    assert_eq!(w.index.det_d(&ctx), other.det_d(&ctx));
    assert_ne!(table.entries[&w.index], table.entries[&other]);
    let report = theorem3_verify(&table, Some(&form)).unwrap();
    assert!(!report.asserted);
    assert!(!report.krieg_ok);
}

#[test]
fn detd_only_first_row_matches_alpha_star_form() {
    let ctx = FieldCtx::new(6).unwrap();
    let a = gen_sugano_table(&ctx, 8, |t: &HermIndex| Some(q(t.det_d(&ctx) as i64 * 2 + 1)), 50, 6).unwrap();
    let b = gen_krieg_table(&ctx, 8, |d| Some(q(d as i64 * 2 + 1)), 50, 6).unwrap();
    assert_eq!(a.entries, b.entries);
}

#[test]
fn congruence_check_rejects_bad_divisors() {
    let table = krieg_table(5, 4, 20, 4);
    assert!(check_lemma2_iii(&table, 2).is_err());
    let table = krieg_table(30, 4, 20, 4);
    assert!(check_lemma2_iii(&table, 7).is_err());
    assert!(check_lemma2_iii(&table, 15).unwrap().0);
}

#[test]
fn congruence_check_catches_a_broken_pair() {
    let ctx = FieldCtx::new(6).unwrap();
    let mut table = krieg_table(6, 4, 80, 12);
    let ones: Vec<HermIndex> = table.entries.keys().filter(|t| t.k == 1).copied().collect();
    let mut target = None;
    'outer: for (i, t) in ones.iter().enumerate() {
        for u in &ones[i + 1..] {
            let (r, s) = t.r_s(&ctx);
            let (r2, s2) = u.r_s(&ctx);
            if t.det_d(&ctx) == u.det_d(&ctx) && (r - r2) % 2 == 0 && (s2 - s) % 6 == 0 && (s2 + s) % 4 == 0 {
                target = Some(*u);
                break 'outer;
            }
        }
    }
    let u = target.expect("related pair for d = 2");
    *table.entries.get_mut(&u).unwrap() += BigRational::one();
    let (ok, w) = check_lemma2_iii(&table, 2).unwrap();
    assert!(!ok);
    let w = w.unwrap();
    assert!(w.index == u || w.other == Some(u));
}

#[test]
fn checks_parse() {
    let c = Checks::parse("sugano, krieg").unwrap();
    assert!(c.sugano && c.krieg && !c.invariance && !c.lemma2iii);
    assert_eq!(Checks::parse("all").unwrap(), Checks::default());
    assert!(Checks::parse("bogus").is_err());
}

#[test]
fn report_serializes_alpha_star_as_strings() {
    let table = krieg_table(7, 4, 20, 4);
    let report = theorem3_verify(&table, None).unwrap();
    let json = serde_json::to_value(&report).unwrap();
    let (_, v) = json["alpha_star"].as_object().unwrap().iter().next().unwrap();
    assert!(v.is_string());
    let _: BTreeMap<String, String> = serde_json::from_value(json["alpha_star"].clone()).unwrap();
}

#[test]
fn theta_table_invariance_follows_the_classification() {
    for (m, invariant) in [(5, true), (30, false)] {
        let ctx = FieldCtx::new(m).unwrap();
        let (l, _) = HermLattice::example(ctx, ExampleReading::SqrtM).unwrap();
        let e = ThetaEngine::new(&l).unwrap();
        let table = e.table(2).unwrap();
        let checks = Checks {
            sugano: false,
            krieg: false,
            invariance: true,
            lemma2iii: false,
        };
        let report = theorem3_verify_with(&table, Some(&e), checks).unwrap();
        assert_eq!(report.all_invariant(), invariant, "m={m} {:?}", report.witnesses);
    }
}
