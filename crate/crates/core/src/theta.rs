//! Half-integral Hermitian indices, degree-1/2 theta coefficients and
//! coefficient tables.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex, RwLock};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enumeration::{vectors_by_norm, NearEnumerator, PackedVectors};
use crate::error::{Error, Result};
use crate::hlattice::{hermitian_from_trace, HermLattice};
use crate::linalg::{self, IntMatrix};
use crate::qfield::{rat, FieldCtx, Ideal, KElem};
use crate::reduction::minimize_index;

/// `T = [[k, t], [conj(t), l]]` with `t = tau / sqrt(d_K)` and
/// `tau = tau[0] + tau[1] * omega`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HermIndex {
    pub k: i64,
    pub l: i64,
    pub tau: [i64; 2],
}

pub(crate) fn norm_i128(ctx: &FieldCtx, a: i128, b: i128) -> i128 {
    a * a + i128::from(ctx.omega_trace()) * a * b + i128::from(ctx.omega_norm()) * b * b
}

impl HermIndex {
    pub fn new(k: i64, l: i64, a: i64, b: i64) -> Self {
        HermIndex { k, l, tau: [a, b] }
    }

    pub fn zero() -> Self {
        HermIndex::new(0, 0, 0, 0)
    }

    pub fn is_zero(&self) -> bool {
        *self == HermIndex::zero()
    }

    pub fn trace(&self) -> i64 {
        self.k + self.l
    }

    pub fn tau_norm(&self, ctx: &FieldCtx) -> i128 {
        norm_i128(ctx, self.tau[0].into(), self.tau[1].into())
    }

    /// `-d_K det(T) = |d_K| k l - N(tau)`.
    pub fn det_d(&self, ctx: &FieldCtx) -> i128 {
        i128::from(ctx.abs_disc()) * i128::from(self.k) * i128::from(self.l) - self.tau_norm(ctx)
    }

    /// Largest `q` with `T / q` still half-integral; 0 for `T = 0`.
    pub fn epsilon(&self) -> i64 {
        self.k.gcd(&self.l).gcd(&self.tau[0]).gcd(&self.tau[1])
    }

    pub fn is_psd(&self, ctx: &FieldCtx) -> bool {
        self.k >= 0 && self.l >= 0 && self.det_d(ctx) >= 0
    }

    /// `(2 Re t, 2 sqrt(m) Im t)`.
    pub fn r_s(&self, ctx: &FieldCtx) -> (i64, i64) {
        let [a, b] = self.tau;
        if ctx.omega_trace() == 1 {
            (b, -(2 * a + b))
        } else {
            (b, -a)
        }
    }

    /// The off-diagonal entry `t`.
    pub fn t(&self, ctx: &FieldCtx) -> KElem {
        let tau = KElem::from_ints(self.tau[0], self.tau[1]);
        ctx.div(&tau, &ctx.sqrt_disc()).expect("sqrt(d_K) is nonzero")
    }

    pub fn to_matrix(&self, ctx: &FieldCtx) -> [[KElem; 2]; 2] {
        let t = self.t(ctx);
        [
            [KElem::from_ints(self.k, 0), t.clone()],
            [ctx.conj(&t), KElem::from_ints(self.l, 0)],
        ]
    }

    /// Encodes a Hermitian matrix, failing unless it lies in `Lambda(2, O_K)`.
    pub fn from_matrix(ctx: &FieldCtx, t: &[[KElem; 2]; 2]) -> Result<Self> {
        let diag = |x: &KElem| -> Result<i64> {
            if !x.is_rational() || !x.a.is_integer() {
                return Err(Error::NotHermIndex(format!("diagonal entry {x} is not an integer")));
            }
            x.a.to_integer().to_i64().ok_or(Error::Overflow("index diagonal"))
        };
        if ctx.conj(&t[0][1]) != t[1][0] {
            return Err(Error::NotHermIndex("matrix is not Hermitian".into()));
        }
        let k = diag(&t[0][0])?;
        let l = diag(&t[1][1])?;
        let tau = ctx.mul(&t[0][1], &ctx.sqrt_disc());
        if !tau.is_integral() {
            return Err(Error::NotHermIndex(format!("off-diagonal entry {} is not in the inverse different", t[0][1])));
        }
        let (a, b) = tau.to_ints().ok_or(Error::Overflow("index off-diagonal"))?;
        Ok(HermIndex::new(k, l, a, b))
    }

    /// `[[l, conj t], [t, k]]`.
    pub fn swapped(&self, ctx: &FieldCtx) -> Self {
        let [a, b] = self.tau;
        HermIndex::new(self.l, self.k, -a - ctx.omega_trace() * b, b)
    }

    /// The index `(1, t / eta, k l / eta^2)` referenced by the divisor-sum
    /// relations; `eta` must divide `epsilon(T)`.
    pub fn first_row_reference(&self, eta: i64) -> Self {
        HermIndex::new(
            1,
            self.k / eta * (self.l / eta),
            self.tau[0] / eta,
            self.tau[1] / eta,
        )
    }
}

impl fmt::Display for HermIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(k={}, l={}, tau={}+{}w)", self.k, self.l, self.tau[0], self.tau[1])
    }
}

/// Index `G / 2` for the Hermitian Gram matrix `G` of a pair of vectors.
pub fn index_from_gram(ctx: &FieldCtx, g: &[[KElem; 2]; 2]) -> Result<HermIndex> {
    let half = BigRational::new(1.into(), 2.into());
    let t = [
        [g[0][0].scale(&half), g[0][1].scale(&half)],
        [g[1][0].scale(&half), g[1][1].scale(&half)],
    ];
    HermIndex::from_matrix(ctx, &t)
}

/// All `T >= 0` with the given diagonal, in ascending `tau` order.
pub fn indices_with_diagonal(ctx: &FieldCtx, k: i64, l: i64) -> Vec<HermIndex> {
    if k < 0 || l < 0 {
        return Vec::new();
    }
    let cap = i128::from(ctx.abs_disc()) * i128::from(k) * i128::from(l);
    let t = i128::from(ctx.omega_trace());
    let n = i128::from(ctx.omega_norm());
    // N(a + b w) = (a + t b / 2)^2 + (n - t^2 / 4) b^2 and 4n - t^2 = |d_K|
    let disc = 4 * n - t * t;
    let bmax = ((4 * cap) as f64 / disc as f64).sqrt() as i128 + 1;
    let mut out = Vec::new();
    for b in -bmax..=bmax {
        let rest = 4 * cap - disc * b * b;
        if rest < 0 {
            continue;
        }
        // (2a + t b)^2 <= rest
        let s = (rest as f64).sqrt() as i128 + 1;
        let lo = Integer::div_floor(&(-s - t * b), &2) - 1;
        let hi = Integer::div_floor(&(s - t * b), &2) + 1;
        for a in lo..=hi {
            if norm_i128(ctx, a, b) <= cap {
                out.push(HermIndex::new(k, l, a as i64, b as i64));
            }
        }
    }
    out.sort();
    out
}

/// All `T >= 0` with `k + l <= bound`.
pub fn indices_up_to_trace(ctx: &FieldCtx, bound: i64) -> Vec<HermIndex> {
    let mut out = Vec::new();
    for k in 0..=bound {
        for l in 0..=bound - k {
            out.extend(indices_with_diagonal(ctx, k, l));
        }
    }
    out.sort();
    out
}

/// Counts of pairs `(lambda_1, lambda_2)` keyed by `tau`.
type Row = HashMap<[i64; 2], u64>;

/// Theta-coefficient engine with cached short vectors and per-diagonal
/// pair counts.
pub struct ThetaEngine {
    lattice: HermLattice,
    gram: IntMatrix,
    gram_omega: IntMatrix,
    omega: IntMatrix,
    near: NearEnumerator,
    vectors: RwLock<(i64, BTreeMap<i64, Arc<PackedVectors>>)>,
    rows: Mutex<HashMap<(i64, i64), Arc<Row>>>,
    singles: Mutex<HashMap<HermIndex, u64>>,
}

impl ThetaEngine {
    pub fn new(lattice: &HermLattice) -> Result<Self> {
        if !lattice.is_theta_lattice() {
            return Err(Error::NotThetaLattice(lattice.theta_report().failures().join(", ")));
        }
        let gram = lattice.int_gram().ok_or_else(|| Error::NotThetaLattice("non-integral Gram".into()))?;
        let gram_omega = linalg::int_mul(&gram, &lattice.trace_data().omega);
        Ok(ThetaEngine {
            lattice: lattice.clone(),
            near: NearEnumerator::new(&gram)?,
            omega: lattice.trace_data().omega.clone(),
            gram,
            gram_omega,
            vectors: RwLock::new((0, BTreeMap::new())),
            rows: Mutex::new(HashMap::new()),
            singles: Mutex::new(HashMap::new()),
        })
    }

    pub fn lattice(&self) -> &HermLattice {
        &self.lattice
    }

    pub fn ctx(&self) -> &FieldCtx {
        self.lattice.ctx()
    }

    fn vectors(&self, norm: i64) -> Result<Arc<PackedVectors>> {
        {
            let guard = self.vectors.read().expect("vector cache poisoned");
            if norm <= guard.0 {
                return Ok(guard.1.get(&norm).cloned().unwrap_or_default());
            }
        }
        let mut guard = self.vectors.write().expect("vector cache poisoned");
        if norm > guard.0 {
            let reach = norm.max(guard.0 + guard.0 / 2).max(12);
            let found = vectors_by_norm(&self.gram, reach)?;
            guard.1 = found.into_iter().map(|(k, v)| (k, Arc::new(v))).collect();
            guard.0 = reach;
        }
        Ok(guard.1.get(&norm).cloned().unwrap_or_default())
    }

    /// Number of lattice vectors with `h(x, x) = 2k`.
    pub fn degree1(&self, k: i64) -> Result<u64> {
        match k {
            k if k < 0 => Ok(0),
            0 => Ok(1),
            k => Ok(2 * self.vectors(2 * k)?.len() as u64),
        }
    }

    pub fn degree1_counts(&self, bound: i64) -> Result<Vec<u64>> {
        (0..=bound).map(|k| self.degree1(k)).collect()
    }

    fn row(&self, k: i64, l: i64) -> Result<Arc<Row>> {
        if let Some(r) = self.rows.lock().expect("row cache poisoned").get(&(k, l)) {
            return Ok(r.clone());
        }
        let row = Arc::new(self.compute_row(k, l)?);
        self.rows
            .lock()
            .expect("row cache poisoned")
            .insert((k, l), row.clone());
        Ok(row)
    }

    fn compute_row(&self, k: i64, l: i64) -> Result<Row> {
        let mut row = Row::new();
        if k == 0 || l == 0 {
            row.insert([0, 0], self.degree1(k)? * self.degree1(l)?);
            return Ok(row);
        }
        let v1 = self.vectors(2 * k)?;
        let v2 = self.vectors(2 * l)?;
        let dim = self.gram.len();
        // images S lambda_2 and S Omega lambda_2, interleaved per vector
        let mut images: Vec<i64> = Vec::with_capacity(v2.len() * 2 * dim);
        for y in v2.iter() {
            for mat in [&self.gram, &self.gram_omega] {
                for r in mat {
                    images.push(r.iter().zip(y).map(|(s, &c)| s * i64::from(c)).sum());
                }
            }
        }
        let pairs: HashMap<(i64, i64), u64> = (0..v1.len())
            .into_par_iter()
            .fold(HashMap::new, |mut acc: HashMap<(i64, i64), u64>, i| {
                let x = v1.get(i);
                for img in images.chunks_exact(2 * dim) {
                    let (s, so) = img.split_at(dim);
                    let mut f1 = 0i64;
                    let mut f2 = 0i64;
                    for j in 0..dim {
                        let c = i64::from(x[j]);
                        f1 += c * s[j];
                        f2 += c * so[j];
                    }
                    *acc.entry((f1, f2)).or_insert(0) += 2;
                    *acc.entry((-f1, -f2)).or_insert(0) += 2;
                }
                acc
            })
            .reduce(HashMap::new, |mut a, b| {
                for (key, c) in b {
                    *a.entry(key).or_insert(0) += c;
                }
                a
            });
        let ctx = self.ctx();
        let root = ctx.sqrt_disc();
        let half = BigRational::new(1.into(), 2.into());
        for ((f1, f2), c) in pairs {
            let h = hermitian_from_trace(ctx, &rat(f1), &rat(f2));
            let tau = ctx.mul(&h, &root).scale(&half);
            let key = tau
                .to_ints()
                .ok_or_else(|| Error::NotHermIndex(format!("pair Gram with off-diagonal {h}")))?;
            *row.entry([key.0, key.1]).or_insert(0) += c;
        }
        Ok(row)
    }

    fn lookup(&self, t: &HermIndex) -> Result<u64> {
        if t.k <= t.l {
            let cached = self.rows.lock().expect("row cache poisoned").contains_key(&(t.k, t.l));
            if !cached && t.k > 0 {
                let large = t.l > ROW_MAX_L
                    || self.vectors(2 * t.k)?.len() as u64 * self.vectors(2 * t.l)?.len() as u64 > DIRECT_THRESHOLD;
                if large {
                    if let Some(&c) = self.singles.lock().expect("count cache poisoned").get(t) {
                        return Ok(c);
                    }
                    let c = self.direct(t)?;
                    self.singles.lock().expect("count cache poisoned").insert(*t, c);
                    return Ok(c);
                }
            }
            Ok(self.row(t.k, t.l)?.get(&t.tau).copied().unwrap_or(0))
        } else {
            let s = t.swapped(self.ctx());
            Ok(self.row(s.k, s.l)?.get(&s.tau).copied().unwrap_or(0))
        }
    }

    /// `#(Lambda, T)`: pairs of lattice vectors with Hermitian Gram `2T`.
    pub fn degree2(&self, t: &HermIndex) -> Result<u64> {
        let ctx = self.ctx();
        if !t.is_psd(ctx) {
            return Err(Error::NotSemidefinite(t.to_string()));
        }
        if t.det_d(ctx) == 0 {
            return self.singular(t);
        }
        // coefficients are invariant under T -> T[U], U in GL_2(O_K)
        let r = minimize_index(ctx, t)?;
        self.lookup(&r)
    }

    /// Count for one positive definite `T` without building its row: for
    /// each `lambda_1` of norm `2k` the partner `lambda_2` lies close to the
    /// projection of the target onto the `K`-line of `lambda_1`.
    fn direct(&self, t: &HermIndex) -> Result<u64> {
        let ctx = self.ctx();
        let (f1, f2) = trace_pair(ctx, t)?;
        let (f1, f2) = match (f1, f2) {
            (Some(a), Some(b)) => (a, b),
            _ => return Ok(0),
        };
        let tr = ctx.omega_trace();
        let g = tr * f1 - f2;
        let v1 = self.vectors(2 * t.k)?;
        let dim = self.gram.len();
        let total: u64 = (0..v1.len())
            .into_par_iter()
            .map(|i| {
                let x: Vec<i64> = v1.get(i).iter().map(|&c| i64::from(c)).collect();
                let ox = linalg::int_mat_vec(&self.omega, &x);
                let s_x = linalg::int_mat_vec(&self.gram, &x);
                let s_ox = linalg::int_mat_vec(&self.gram, &ox);
                let a11 = (2 * t.k) as f64;
                let a12: f64 = s_x.iter().zip(&ox).map(|(p, q)| (p * q) as f64).sum();
                let a22: f64 = s_ox.iter().zip(&ox).map(|(p, q)| (p * q) as f64).sum();
                let det = a11 * a22 - a12 * a12;
                let alpha = (a22 * f1 as f64 - a12 * g as f64) / det;
                let beta = (a11 * g as f64 - a12 * f1 as f64) / det;
                let radius = (2 * t.l) as f64 - alpha * f1 as f64 - beta * g as f64;
                let center: Vec<f64> = (0..dim).map(|j| alpha * x[j] as f64 + beta * ox[j] as f64).collect();
                // x^t S_omega = (S x)^t Omega
                let so_x: Vec<i64> = (0..dim).map(|j| (0..dim).map(|r| s_x[r] * self.omega[r][j]).sum()).collect();
                let mut hits = 0u64;
                self.near.run(&center, radius, |y| {
                    let p: i64 = s_x.iter().zip(y).map(|(a, b)| a * b).sum();
                    if p != f1 {
                        return;
                    }
                    let q: i64 = so_x.iter().zip(y).map(|(a, b)| a * b).sum();
                    if q != f2 {
                        return;
                    }
                    let n: i64 = (0..dim).map(|r| y[r] * (0..dim).map(|c| self.gram[r][c] * y[c]).sum::<i64>()).sum();
                    if n == 2 * t.l {
                        hits += 1;
                    }
                });
                hits
            })
            .sum();
        Ok(2 * total)
    }

    /// Singular `T`: the pairs are `(mu, (t / k) mu)` with `mu` running
    /// through the vectors of norm `2k` in `c^{-1} Lambda`,
    /// `c = O_K + (t / k) O_K`.
    fn singular(&self, t: &HermIndex) -> Result<u64> {
        let ctx = self.ctx();
        let t = if t.k == 0 { t.swapped(ctx) } else { *t };
        if t.k == 0 {
            return Ok(1);
        }
        let c = t.t(ctx).scale(&BigRational::new(1.into(), t.k.into()));
        let den = c.a.denom().lcm(c.b.denom());
        let dr = BigRational::from_integer(den.clone());
        let j = Ideal::from_gens(ctx, &[KElem::from_rational(dr.clone()), c.scale(&dr)])?;
        // c^{-1} = den * conj(j) / N(j)
        let f = dr / BigRational::from_integer(j.norm.into());
        let inv_gens: Vec<KElem> = j.basis().iter().map(|g| ctx.conj(g).scale(&f)).collect();
        let inv = Ideal::from_gens(ctx, &inv_gens)?;
        if (2 * t.k) % inv.norm != 0 {
            return Ok(0);
        }
        let target = 2 * t.k / inv.norm;
        let sub = self.lattice.scale_by_ideal(&inv)?;
        let gram = sub
            .int_gram()
            .ok_or_else(|| Error::NotThetaLattice("ideal multiple has a non-integral Gram".into()))?;
        let found = vectors_by_norm(&gram, target)?;
        Ok(2 * found.get(&target).map_or(0, |v| v.len()) as u64)
    }

    /// Degree-2 table over all `T >= 0` with `k + l <= bound`.
    pub fn table(&self, bound: i64) -> Result<CoefficientTable> {
        let ctx = self.ctx().clone();
        let mut entries = BTreeMap::new();
        for t in indices_up_to_trace(&ctx, bound) {
            entries.insert(t, BigRational::from_integer(self.lookup(&t)?.into()));
        }
        Ok(CoefficientTable {
            ctx,
            weight: self.lattice.rank() as i64,
            bound_kind: BoundKind::Trace,
            bound,
            trace_cap: None,
            source: TableSource::Theta,
            entries,
        })
    }
}

/// On-demand coefficients for indices outside a stored table.
const DIRECT_THRESHOLD: u64 = 20_000_000;
const ROW_MAX_L: i64 = 8;

/// The integers `(F(lambda_1, lambda_2), F(lambda_1, omega lambda_2))` that
/// a pair with Gram `2T` must have; `None` where no pair can.
fn trace_pair(ctx: &FieldCtx, t: &HermIndex) -> Result<(Option<i64>, Option<i64>)> {
    // inverse of the map used when tabulating rows
    let root = ctx.sqrt_disc();
    let tau = KElem::from_ints(t.tau[0], t.tau[1]);
    let h = ctx.div(&tau, &root)?.scale(&BigRational::from_integer(2.into()));
    let half = BigRational::new(1.into(), 2.into());
    let tr = BigRational::from_integer(ctx.omega_trace().into());
    let dk = BigRational::from_integer(ctx.disc().into());
    let f1 = &h.a + &h.b * &tr * &half;
    let f2 = &h.b * &dk / BigRational::from_integer(4.into()) + &tr * &f1 * &half;
    let int = |x: &BigRational| if x.is_integer() { x.to_integer().to_i64() } else { None };
    Ok((int(&f1), int(&f2)))
}

pub trait CoefficientSource: Sync {
    fn coefficient(&self, t: &HermIndex) -> Result<Option<BigRational>>;
}

impl CoefficientSource for ThetaEngine {
    fn coefficient(&self, t: &HermIndex) -> Result<Option<BigRational>> {
        Ok(Some(BigRational::from_integer(self.degree2(t)?.into())))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    #[serde(rename = "trace")]
    Trace,
    #[serde(rename = "detD")]
    DetD,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableSource {
    Theta,
    /// Built from a Krieg-type `alpha*`.
    Krieg,
    /// Built from first-row data; not claimed modular.
    Sugano,
    Synthetic,
}

/// Finite table of Fourier coefficients.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoefficientTable {
    pub ctx: FieldCtx,
    pub weight: i64,
    pub bound_kind: BoundKind,
    pub bound: i64,
    /// Additional `k + l` cap for tables bounded by `detD`.
    pub trace_cap: Option<i64>,
    pub source: TableSource,
    pub entries: BTreeMap<HermIndex, BigRational>,
}

impl CoefficientTable {
    pub fn in_bounds(&self, t: &HermIndex) -> bool {
        let within = match self.bound_kind {
            BoundKind::Trace => t.trace() <= self.bound,
            BoundKind::DetD => t.det_d(&self.ctx) <= i128::from(self.bound),
        };
        within && self.trace_cap.map_or(true, |c| t.trace() <= c)
    }

    pub fn validate(&self) -> Result<()> {
        for (t, v) in &self.entries {
            if !t.is_psd(&self.ctx) {
                return Err(Error::NotSemidefinite(t.to_string()));
            }
            if !self.in_bounds(t) {
                return Err(Error::Invalid(format!("index {t} exceeds the table bound")));
            }
            if self.source == TableSource::Theta && (!v.is_integer() || v < &BigRational::zero()) {
                return Err(Error::Invalid(format!("theta coefficient {v} at {t}")));
            }
        }
        Ok(())
    }

    pub fn get(&self, t: &HermIndex) -> Option<&BigRational> {
        self.entries.get(t)
    }
}

#[derive(Serialize, Deserialize)]
struct EntryJson {
    k: i64,
    l: i64,
    tau: [i64; 2],
    value: String,
}

#[derive(Serialize, Deserialize)]
struct TableJson {
    m: i64,
    weight: i64,
    bound_kind: BoundKind,
    bound: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    trace_cap: Option<i64>,
    #[serde(default = "default_source")]
    source: TableSource,
    entries: Vec<EntryJson>,
}

fn default_source() -> TableSource {
    TableSource::Synthetic
}

impl Serialize for CoefficientTable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        TableJson {
            m: self.ctx.m(),
            weight: self.weight,
            bound_kind: self.bound_kind,
            bound: self.bound,
            trace_cap: self.trace_cap,
            source: self.source,
            entries: self
                .entries
                .iter()
                .map(|(t, v)| EntryJson {
                    k: t.k,
                    l: t.l,
                    tau: t.tau,
                    value: v.to_string(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for CoefficientTable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = TableJson::deserialize(d)?;
        let ctx = FieldCtx::new(j.m).map_err(D::Error::custom)?;
        let mut entries = BTreeMap::new();
        for e in j.entries {
            let v: BigRational = e
                .value
                .parse()
                .map_err(|_| D::Error::custom(format!("bad coefficient value {:?}", e.value)))?;
            let t = HermIndex { k: e.k, l: e.l, tau: e.tau };
            if entries.insert(t, v).is_some() {
                return Err(D::Error::custom(format!("duplicate index {t}")));
            }
        }
        let table = CoefficientTable {
            ctx,
            weight: j.weight,
            bound_kind: j.bound_kind,
            bound: j.bound,
            trace_cap: j.trace_cap,
            source: j.source,
            entries,
        };
        table.validate().map_err(D::Error::custom)?;
        Ok(table)
    }
}

/// First index (in ascending order) where the tables differ; absent entries
/// count as zero.
pub fn table_first_mismatch(
    a: &CoefficientTable,
    b: &CoefficientTable,
) -> Result<Option<(HermIndex, BigRational, BigRational)>> {
    if a.ctx != b.ctx || a.weight != b.weight || a.bound_kind != b.bound_kind || a.bound != b.bound {
        return Err(Error::IncompatibleTables(format!(
            "(m={}, r={}, {:?} {}) vs (m={}, r={}, {:?} {})",
            a.ctx.m(),
            a.weight,
            a.bound_kind,
            a.bound,
            b.ctx.m(),
            b.weight,
            b.bound_kind,
            b.bound
        )));
    }
    let zero = BigRational::zero();
    let keys: std::collections::BTreeSet<&HermIndex> = a.entries.keys().chain(b.entries.keys()).collect();
    for t in keys {
        let x = a.entries.get(t).unwrap_or(&zero);
        let y = b.entries.get(t).unwrap_or(&zero);
        if x != y {
            return Ok(Some((*t, x.clone(), y.clone())));
        }
    }
    Ok(None)
}

/// `sum_{eta | n} eta^e`, exact.
pub fn divisor_power_sum(n: i64, e: u32) -> BigInt {
    let mut acc = BigInt::zero();
    for q in 1..=n {
        if n % q == 0 {
            acc += BigInt::from(q).pow(e);
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hlattice::ExampleReading;

    fn engine(m: i64) -> ThetaEngine {
        let ctx = FieldCtx::new(m).unwrap();
        let (l, _) = HermLattice::example(ctx, ExampleReading::SqrtM).unwrap();
        ThetaEngine::new(&l).unwrap()
    }

    #[test]
    fn singular_counts_match_pair_counts() {
        for m in [5, 6, 7] {
            let e = engine(m);
            let ctx = e.ctx().clone();
            for t in indices_up_to_trace(&ctx, 4) {
                if t.det_d(&ctx) == 0 && !t.is_zero() {
                    assert_eq!(e.singular(&t).unwrap(), e.lookup(&t).unwrap(), "m={m} {t}");
                }
            }
        }
    }

    #[test]
    fn reduced_lookup_matches_direct() {
        let e = engine(5);
        let ctx = e.ctx().clone();
        for t in indices_up_to_trace(&ctx, 4) {
            assert_eq!(e.degree2(&t).unwrap(), e.lookup(&t).unwrap(), "{t}");
        }
    }

    #[test]
    fn near_count_matches_rows() {
        for m in [5, 6, 7, 15] {
            let e = engine(m);
            let ctx = e.ctx().clone();
            for t in indices_up_to_trace(&ctx, 4) {
                if t.k > 0 && t.k <= t.l && t.det_d(&ctx) > 0 {
                    assert_eq!(e.direct(&t).unwrap(), e.row(t.k, t.l).unwrap().get(&t.tau).copied().unwrap_or(0), "m={m} {t}");
                }
            }
        }
    }
}
