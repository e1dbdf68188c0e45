//! Coefficient-level Maass-space checks: Sugano's first-row relation,
//! Krieg's `alpha*` relation, Atkin-Lehner invariance, the congruence
//! criterion for `d | m`, and the Sugano/Krieg/invariance consistency
//! predicate. Also builds synthetic tables from either relation.

use std::collections::BTreeMap;
use std::sync::Mutex;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::modgroup::{build_vd, vd_act};
use crate::qfield::{divisors, FieldCtx};
use crate::reduction::{minimize_index, reduce_index};
use crate::theta::{indices_up_to_trace, BoundKind, CoefficientSource, CoefficientTable, HermIndex, TableSource};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Sugano,
    Krieg,
    Invariance,
    Lemma2iii,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Witness {
    pub check: Check,
    /// Divisor `d` for the per-`d` checks.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<i64>,
    pub index: HermIndex,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub other: Option<HermIndex>,
    pub details: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Holds,
    Fails,
    /// No violation seen, but some referenced coefficients were unavailable.
    Undetermined,
}

/// `eta^e` for a possibly negative exponent.
fn eta_pow(eta: i64, e: i64) -> BigRational {
    let base = BigInt::from(eta);
    if e >= 0 {
        BigRational::from_integer(Pow::pow(&base, e as u64))
    } else {
        BigRational::new(BigInt::one(), Pow::pow(&base, e.unsigned_abs()))
    }
}

/// Coefficient lookup: the table first (exactly, then through the
/// translation/swap representative, then through a unimodular minimum),
/// then the optional oracle. Indices inside the table bound that are
/// absent from it count as zero.
pub struct Resolver<'a> {
    table: &'a CoefficientTable,
    oracle: Option<&'a dyn CoefficientSource>,
    fetched: Mutex<BTreeMap<HermIndex, BigRational>>,
}

impl<'a> Resolver<'a> {
    pub fn new(table: &'a CoefficientTable, oracle: Option<&'a dyn CoefficientSource>) -> Self {
        Resolver {
            table,
            oracle,
            fetched: Mutex::new(BTreeMap::new()),
        }
    }

    pub fn table(&self) -> &CoefficientTable {
        self.table
    }

    pub fn value(&self, t: &HermIndex) -> Result<Option<BigRational>> {
        if let Some(v) = self.table.get(t) {
            return Ok(Some(v.clone()));
        }
        let ctx = &self.table.ctx;
        let mut reps = vec![*t];
        if let Ok(r) = reduce_index(ctx, t) {
            reps.push(r);
        }
        if t.det_d(ctx) > 0 {
            reps.push(minimize_index(ctx, t)?);
        }
        let found = reps[1..]
            .iter()
            .find_map(|r| self.table.get(r).cloned())
            .or_else(|| reps.iter().any(|r| self.table.in_bounds(r)).then(BigRational::zero));
        if let Some(v) = found {
            self.record(t, &v);
            return Ok(Some(v));
        }
        if let Some(v) = self.fetched.lock().expect("resolver cache poisoned").get(t) {
            return Ok(Some(v.clone()));
        }
        let Some(oracle) = self.oracle else {
            return Ok(None);
        };
        let v = oracle.coefficient(t)?;
        if let Some(v) = &v {
            self.record(t, v);
        }
        Ok(v)
    }

    fn record(&self, t: &HermIndex, v: &BigRational) {
        self.fetched
            .lock()
            .expect("resolver cache poisoned")
            .insert(*t, v.clone());
    }

    /// Values resolved outside the stored entries so far.
    pub fn fetched(&self) -> BTreeMap<HermIndex, BigRational> {
        self.fetched.lock().expect("resolver cache poisoned").clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuganoOutcome {
    pub status: Status,
    pub unresolved: Vec<HermIndex>,
    pub witnesses: Vec<Witness>,
}

impl SuganoOutcome {
    pub fn ok(&self) -> bool {
        self.status == Status::Holds
    }
}

/// `alpha(T) = sum_{eta | eps(T)} eta^{r-1} alpha(1, t/eta, kl/eta^2)` for
/// every nonzero entry.
pub fn check_sugano(table: &CoefficientTable, oracle: Option<&dyn CoefficientSource>) -> Result<SuganoOutcome> {
    sugano_with(&Resolver::new(table, oracle))
}

fn sugano_with(res: &Resolver<'_>) -> Result<SuganoOutcome> {
    let table = res.table();
    let r = table.weight;
    let rows: Vec<(HermIndex, Option<Witness>, Vec<HermIndex>)> = table
        .entries
        .par_iter()
        .filter(|(t, _)| !t.is_zero())
        .map(|(t, v)| -> Result<_> {
            let mut sum = BigRational::zero();
            let mut missing = Vec::new();
            for eta in divisors(t.epsilon()) {
                let reference = t.first_row_reference(eta);
                match res.value(&reference)? {
                    Some(x) => sum += eta_pow(eta, r - 1) * x,
                    None => missing.push(reference),
                }
            }
            let witness = (missing.is_empty() && &sum != v).then(|| Witness {
                check: Check::Sugano,
                d: None,
                index: *t,
                other: None,
                details: format!("coefficient {v}, first-row sum {sum}"),
            });
            Ok((*t, witness, missing))
        })
        .collect::<Result<_>>()?;
    let mut witnesses: Vec<Witness> = rows.iter().filter_map(|(_, w, _)| w.clone()).collect();
    witnesses.sort();
    let mut unresolved: Vec<HermIndex> = rows.into_iter().flat_map(|(_, _, m)| m).collect();
    unresolved.sort();
    unresolved.dedup();
    let status = if !witnesses.is_empty() {
        Status::Fails
    } else if !unresolved.is_empty() {
        Status::Undetermined
    } else {
        Status::Holds
    };
    Ok(SuganoOutcome {
        status,
        unresolved,
        witnesses,
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KriegOutcome {
    pub ok: bool,
    pub alpha_star: BTreeMap<i128, BigRational>,
    /// Entries whose smaller-`detD` terms were never fixed.
    pub undetermined: Vec<HermIndex>,
    pub witnesses: Vec<Witness>,
}

/// Reconstructs `alpha*` by ascending `detD` and checks
/// `alpha(T) = sum_{eta | eps(T)} eta^{r-1} alpha*(detD(T)/eta^2)`.
pub fn check_krieg(table: &CoefficientTable) -> KriegOutcome {
    krieg_on(&table.ctx, table.weight, table.entries.iter())
}

fn krieg_on<'a>(
    ctx: &FieldCtx,
    r: i64,
    entries: impl Iterator<Item = (&'a HermIndex, &'a BigRational)>,
) -> KriegOutcome {
    let mut by_det: BTreeMap<i128, (Vec<(HermIndex, &BigRational)>, Vec<(HermIndex, &BigRational)>)> = BTreeMap::new();
    for (t, v) in entries {
        if t.is_zero() {
            continue;
        }
        let slot = by_det.entry(t.det_d(ctx)).or_default();
        if t.epsilon() == 1 {
            slot.0.push((*t, v));
        } else {
            slot.1.push((*t, v));
        }
    }
    let mut alpha: BTreeMap<i128, BigRational> = BTreeMap::new();
    let mut source: BTreeMap<i128, HermIndex> = BTreeMap::new();
    let mut undetermined = Vec::new();
    let mut witnesses = Vec::new();
    for (dd, (primitive, rest)) in by_det {
        for (t, v) in primitive {
            match alpha.get(&dd) {
                None => {
                    alpha.insert(dd, v.clone());
                    source.insert(dd, t);
                }
                Some(a) if a != v => witnesses.push(Witness {
                    check: Check::Krieg,
                    d: None,
                    index: t,
                    other: source.get(&dd).copied(),
                    details: format!("primitive coefficients {v} and {a} at detD = {dd}"),
                }),
                Some(_) => {}
            }
        }
        for (t, v) in rest {
            // alpha(T) = own * alpha*(dd) + tail
            let mut own = BigRational::zero();
            let mut tail = BigRational::zero();
            let mut complete = true;
            for eta in divisors(t.epsilon()) {
                let e2 = i128::from(eta) * i128::from(eta);
                let key = dd / e2;
                let w = eta_pow(eta, r - 1);
                if key == dd {
                    own += w;
                } else if let Some(a) = alpha.get(&key) {
                    tail += w * a;
                } else {
                    complete = false;
                }
            }
            if !complete {
                undetermined.push(t);
                continue;
            }
            match alpha.get(&dd) {
                Some(a) => {
                    let expect = &own * a + &tail;
                    if &expect != v {
                        witnesses.push(Witness {
                            check: Check::Krieg,
                            d: None,
                            index: t,
                            other: source.get(&dd).copied(),
                            details: format!("coefficient {v}, alpha* sum {expect}"),
                        });
                    }
                }
                None => {
                    alpha.insert(dd, (v - &tail) / &own);
                    source.insert(dd, t);
                }
            }
        }
    }
    witnesses.sort();
    KriegOutcome {
        ok: witnesses.is_empty(),
        alpha_star: alpha,
        undetermined,
        witnesses,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InvarianceOutcome {
    pub d: i64,
    pub ok: bool,
    pub compared: usize,
    pub skipped: usize,
    pub witness: Option<Witness>,
}

/// `alpha(T[V_d^{-1}]) = alpha(T)` wherever both sides resolve. Stops at the
/// first violation in index order.
pub fn check_invariance(
    table: &CoefficientTable,
    d: i64,
    oracle: Option<&dyn CoefficientSource>,
) -> Result<InvarianceOutcome> {
    invariance_with(&Resolver::new(table, oracle), d)
}

fn invariance_with(res: &Resolver<'_>, d: i64) -> Result<InvarianceOutcome> {
    let table = res.table();
    let ctx = &table.ctx;
    let v = build_vd(ctx, d)?;
    let mut out = InvarianceOutcome {
        d,
        ok: true,
        compared: 0,
        skipped: 0,
        witness: None,
    };
    if d == 1 {
        return Ok(out);
    }
    for (t, x) in &table.entries {
        if t.is_zero() {
            continue;
        }
        let image = vd_act(ctx, t, &v, true)?;
        match res.value(&image)? {
            None => out.skipped += 1,
            Some(y) => {
                out.compared += 1;
                if &y != x {
                    out.ok = false;
                    out.witness = Some(Witness {
                        check: Check::Invariance,
                        d: Some(d),
                        index: *t,
                        other: Some(image),
                        details: format!("coefficient {x}, image coefficient {y}"),
                    });
                    return Ok(out);
                }
            }
        }
    }
    Ok(out)
}

/// Whether the congruence criterion applies to `d`: `d | m`, and not
/// `2 | d` when `m = 1 (mod 4)`.
pub fn lemma2_iii_applies(ctx: &FieldCtx, d: i64) -> bool {
    d > 0 && ctx.m() % d == 0 && !(ctx.m() % 4 == 1 && d % 2 == 0)
}

/// Equal coefficients for `k = 1` entries of equal `detD` whose `R`
/// agree mod 2 and whose `S` satisfy `S' = S (mod 2m/d)` and
/// `S' = -S (mod 2d)`.
pub fn check_lemma2_iii(table: &CoefficientTable, d: i64) -> Result<(bool, Option<Witness>)> {
    let ctx = &table.ctx;
    let m = ctx.m();
    if d <= 0 || m % d != 0 {
        return Err(Error::NotDividingM { d, m });
    }
    if !lemma2_iii_applies(ctx, d) {
        return Err(Error::Invalid(format!("d = {d} is even and m = {m} = 1 (mod 4)")));
    }
    let mut groups: BTreeMap<i128, Vec<(HermIndex, &BigRational)>> = BTreeMap::new();
    for (t, v) in &table.entries {
        if t.k == 1 {
            groups.entry(t.det_d(ctx)).or_default().push((*t, v));
        }
    }
    let (m1, m2) = (2 * m / d, 2 * d);
    for items in groups.values() {
        for (i, (t, x)) in items.iter().enumerate() {
            let (r, s) = t.r_s(ctx);
            for (u, y) in &items[i + 1..] {
                let (r2, s2) = u.r_s(ctx);
                let related = (r - r2) % 2 == 0 && (s2 - s) % m1 == 0 && (s2 + s) % m2 == 0;
                if related && x != y {
                    let w = Witness {
                        check: Check::Lemma2iii,
                        d: Some(d),
                        index: *t,
                        other: Some(*u),
                        details: format!("coefficients {x} and {y}"),
                    };
                    return Ok((false, Some(w)));
                }
            }
        }
    }
    Ok((true, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Checks {
    pub sugano: bool,
    pub krieg: bool,
    pub invariance: bool,
    pub lemma2iii: bool,
}

impl Default for Checks {
    fn default() -> Self {
        Checks {
            sugano: true,
            krieg: true,
            invariance: true,
            lemma2iii: true,
        }
    }
}

impl Checks {
    /// Parses a comma-separated list such as `sugano,krieg`.
    pub fn parse(list: &str) -> Result<Self> {
        let mut c = Checks {
            sugano: false,
            krieg: false,
            invariance: false,
            lemma2iii: false,
        };
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "sugano" => c.sugano = true,
                "krieg" => c.krieg = true,
                "invariance" => c.invariance = true,
                "lemma2iii" => c.lemma2iii = true,
                "all" => c = Checks::default(),
                other => return Err(Error::Invalid(format!("unknown check {other}"))),
            }
        }
        Ok(c)
    }
}

fn rational_map<S: Serializer>(map: &BTreeMap<i128, BigRational>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_map(map.iter().map(|(k, v)| (k.to_string(), v.to_string())))
}

#[derive(Debug, Clone, Serialize)]
pub struct MaassReport {
    pub m: i64,
    pub weight: i64,
    pub source: TableSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sugano: Option<Status>,
    pub sugano_ok: bool,
    pub sugano_unresolved: Vec<HermIndex>,
    pub krieg_ok: bool,
    #[serde(serialize_with = "rational_map")]
    pub alpha_star: BTreeMap<i128, BigRational>,
    pub krieg_undetermined: Vec<HermIndex>,
    pub invariance: BTreeMap<i64, bool>,
    pub lemma2iii: BTreeMap<i64, bool>,
    /// `sugano_ok => (krieg_ok <=> every d invariant)`.
    pub consistent: bool,
    /// Whether `consistent` is expected to hold: theta or Krieg data.
    pub asserted: bool,
    pub witnesses: Vec<Witness>,
}

impl MaassReport {
    pub fn all_invariant(&self) -> bool {
        self.invariance.values().all(|&b| b)
    }
}

pub fn theorem3_verify(table: &CoefficientTable, oracle: Option<&dyn CoefficientSource>) -> Result<MaassReport> {
    theorem3_verify_with(table, oracle, Checks::default())
}

/// Runs the selected checks. Krieg reconstruction also sees every
/// coefficient the other checks resolved outside the table.
pub fn theorem3_verify_with(
    table: &CoefficientTable,
    oracle: Option<&dyn CoefficientSource>,
    checks: Checks,
) -> Result<MaassReport> {
    let ctx = &table.ctx;
    let res = Resolver::new(table, oracle);
    let mut witnesses = Vec::new();
    let sugano = if checks.sugano { Some(sugano_with(&res)?) } else { None };
    let mut invariance = BTreeMap::new();
    if checks.invariance {
        for d in ctx.squarefree_disc_divisors() {
            let out = invariance_with(&res, d)?;
            invariance.insert(d, out.ok);
            witnesses.extend(out.witness);
        }
    }
    let krieg = if checks.krieg {
        let fetched = res.fetched();
        let merged: BTreeMap<&HermIndex, &BigRational> = fetched.iter().chain(table.entries.iter()).collect();
        Some(krieg_on(ctx, table.weight, merged.into_iter()))
    } else {
        None
    };
    let mut lemma2iii = BTreeMap::new();
    if checks.lemma2iii {
        for d in crate::qfield::squarefree_divisors(ctx.m()) {
            if lemma2_iii_applies(ctx, d) {
                let (ok, w) = check_lemma2_iii(table, d)?;
                lemma2iii.insert(d, ok);
                witnesses.extend(w);
            }
        }
    }
    let sugano_ok = sugano.as_ref().is_some_and(SuganoOutcome::ok);
    let krieg_ok = krieg.as_ref().is_some_and(|k| k.ok);
    if let Some(s) = &sugano {
        witnesses.extend(s.witnesses.iter().cloned());
    }
    if let Some(k) = &krieg {
        witnesses.extend(k.witnesses.iter().cloned());
    }
    witnesses.sort();
    let all_invariant = invariance.values().all(|&b| b);
    let consistent = !(checks.sugano && checks.krieg && checks.invariance) || !sugano_ok || krieg_ok == all_invariant;
    Ok(MaassReport {
        m: ctx.m(),
        weight: table.weight,
        source: table.source,
        sugano: sugano.as_ref().map(|s| s.status),
        sugano_ok,
        sugano_unresolved: sugano.map(|s| s.unresolved).unwrap_or_default(),
        krieg_ok,
        krieg_undetermined: krieg.as_ref().map(|k| k.undetermined.clone()).unwrap_or_default(),
        alpha_star: krieg.map(|k| k.alpha_star).unwrap_or_default(),
        invariance,
        lemma2iii,
        consistent,
        asserted: matches!(table.source, TableSource::Theta | TableSource::Krieg),
        witnesses,
    })
}

/// Nonzero indices fixed by `reduce_index` with `detD <= detd_bound` and
/// `k + l <= trace_cap`.
pub fn reduced_indices(ctx: &FieldCtx, detd_bound: i64, trace_cap: i64) -> Result<Vec<HermIndex>> {
    let mut out = Vec::new();
    for t in indices_up_to_trace(ctx, trace_cap) {
        if t.is_zero() || t.det_d(ctx) > i128::from(detd_bound) {
            continue;
        }
        if reduce_index(ctx, &t)? == t {
            out.push(t);
        }
    }
    Ok(out)
}

/// Coefficients given by a Krieg-type `alpha*`.
pub struct KriegForm<F> {
    ctx: FieldCtx,
    weight: i64,
    alpha_star: F,
}

impl<F: Fn(i128) -> Option<BigRational> + Sync> KriegForm<F> {
    pub fn new(ctx: FieldCtx, weight: i64, alpha_star: F) -> Self {
        KriegForm { ctx, weight, alpha_star }
    }

    pub fn value(&self, t: &HermIndex) -> Result<BigRational> {
        if t.is_zero() {
            return Err(Error::Invalid("the zero index has no Krieg expansion".into()));
        }
        let dd = t.det_d(&self.ctx);
        let mut sum = BigRational::zero();
        for eta in divisors(t.epsilon()) {
            let key = dd / (i128::from(eta) * i128::from(eta));
            let a = (self.alpha_star)(key).ok_or_else(|| Error::MissingValue(format!("alpha*({key})")))?;
            sum += eta_pow(eta, self.weight - 1) * a;
        }
        Ok(sum)
    }

    pub fn table(&self, detd_bound: i64, trace_cap: i64) -> Result<CoefficientTable> {
        let entries = reduced_indices(&self.ctx, detd_bound, trace_cap)?
            .into_iter()
            .map(|t| Ok((t, self.value(&t)?)))
            .collect::<Result<_>>()?;
        Ok(CoefficientTable {
            ctx: self.ctx.clone(),
            weight: self.weight,
            bound_kind: BoundKind::DetD,
            bound: detd_bound,
            trace_cap: Some(trace_cap),
            source: TableSource::Krieg,
            entries,
        })
    }
}

impl<F: Fn(i128) -> Option<BigRational> + Sync> CoefficientSource for KriegForm<F> {
    fn coefficient(&self, t: &HermIndex) -> Result<Option<BigRational>> {
        if t.is_zero() {
            return Ok(None);
        }
        self.value(t).map(Some)
    }
}

pub fn gen_krieg_table<F: Fn(i128) -> Option<BigRational> + Sync>(
    ctx: &FieldCtx,
    weight: i64,
    alpha_star: F,
    detd_bound: i64,
    trace_cap: i64,
) -> Result<CoefficientTable> {
    KriegForm::new(ctx.clone(), weight, alpha_star).table(detd_bound, trace_cap)
}

/// Coefficients given by first-row data on reduced `k = 1` indices.
pub struct SuganoForm<F> {
    ctx: FieldCtx,
    weight: i64,
    first_row: F,
}

impl<F: Fn(&HermIndex) -> Option<BigRational> + Sync> SuganoForm<F> {
    pub fn new(ctx: FieldCtx, weight: i64, first_row: F) -> Self {
        SuganoForm { ctx, weight, first_row }
    }

    pub fn value(&self, t: &HermIndex) -> Result<BigRational> {
        if t.is_zero() {
            return Err(Error::Invalid("the zero index has no first-row expansion".into()));
        }
        let mut sum = BigRational::zero();
        for eta in divisors(t.epsilon()) {
            let key = reduce_index(&self.ctx, &t.first_row_reference(eta))?;
            let a = (self.first_row)(&key).ok_or_else(|| Error::MissingValue(key.to_string()))?;
            sum += eta_pow(eta, self.weight - 1) * a;
        }
        Ok(sum)
    }

    pub fn table(&self, detd_bound: i64, trace_cap: i64) -> Result<CoefficientTable> {
        let entries = reduced_indices(&self.ctx, detd_bound, trace_cap)?
            .into_iter()
            .map(|t| Ok((t, self.value(&t)?)))
            .collect::<Result<_>>()?;
        Ok(CoefficientTable {
            ctx: self.ctx.clone(),
            weight: self.weight,
            bound_kind: BoundKind::DetD,
            bound: detd_bound,
            trace_cap: Some(trace_cap),
            source: TableSource::Sugano,
            entries,
        })
    }
}

impl<F: Fn(&HermIndex) -> Option<BigRational> + Sync> CoefficientSource for SuganoForm<F> {
    fn coefficient(&self, t: &HermIndex) -> Result<Option<BigRational>> {
        if t.is_zero() {
            return Ok(None);
        }
        self.value(t).map(Some)
    }
}

pub fn gen_sugano_table<F: Fn(&HermIndex) -> Option<BigRational> + Sync>(
    ctx: &FieldCtx,
    weight: i64,
    first_row: F,
    detd_bound: i64,
    trace_cap: i64,
) -> Result<CoefficientTable> {
    SuganoForm::new(ctx.clone(), weight, first_row).table(detd_bound, trace_cap)
}
