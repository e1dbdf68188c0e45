//! Hermitian isometry of `O_K`-lattices, decided as Z-isometry of the trace
//! lattices that commutes with multiplication by `omega`.
//!
//! The search picks vectors `x_1, .., x_s` of the first lattice whose
//! `O_K`-span has full rank, and backtracks over images `y_i` among vectors
//! of the same norm in the second lattice. Since the image of `omega x_i` is
//! forced to be `omega y_i`, a partial assignment is consistent iff the
//! Hermitian products `h(y_i, y_j)` match `h(x_i, x_j)`, which in trace data
//! is the pair `(F(y_i, y_j), F(y_i, omega y_j))`.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::enumeration;
use crate::error::{Error, Result};
use crate::hlattice::HermLattice;
use crate::linalg::{self, IntMatrix};
use crate::qfield::ideal_a_d;

/// Integer matrix whose column `j` holds the coordinates (in the basis of
/// the target lattice) of the image of basis vector `j` of the source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsometryWitness {
    pub u: IntMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IsometrySearch {
    pub witness: Option<IsometryWitness>,
    /// Number of partial assignments visited.
    pub nodes: u64,
    /// `true` when a `None` result comes from exhausting the search tree.
    pub exhaustive: bool,
}

type HermPair = (i64, i64);

struct SideData {
    gram: IntMatrix,
    /// `S * Omega`, so that `F(x, omega y) = x^t (S Omega) y`.
    gram_omega: IntMatrix,
    omega: IntMatrix,
    vectors: Vec<Vec<i64>>,
    norms: Vec<i64>,
    fingerprints: Vec<Vec<(HermPair, u32)>>,
}

impl SideData {
    fn new(lat: &HermLattice, scale: &BigInt, bound: i64) -> Result<Self> {
        let gram_rat = &lat.trace_data().gram;
        let scaled: Vec<Vec<_>> = gram_rat
            .iter()
            .map(|r| r.iter().map(|x| x * num_rational::BigRational::from_integer(scale.clone())).collect())
            .collect();
        let gram = linalg::rat_to_int(&scaled)
            .ok_or_else(|| Error::MalformedLattice("trace Gram does not scale to integers".into()))?;
        let omega = lat.trace_data().omega.clone();
        let gram_omega = linalg::int_mul(&gram, &omega);
        let mut vectors = Vec::new();
        enumeration::enumerate(&linalg::int_to_rat(&gram), &crate::qfield::rat(bound), |x| vectors.push(x.to_vec()))?;
        vectors.sort();
        let norms = vectors.iter().map(|v| enumeration::int_quadratic_form(&gram, v)).collect();
        let mut side = SideData {
            gram,
            gram_omega,
            omega,
            vectors,
            norms,
            fingerprints: Vec::new(),
        };
        side.fingerprints = (0..side.vectors.len())
            .map(|i| {
                let mut hist: BTreeMap<HermPair, u32> = BTreeMap::new();
                for j in 0..side.vectors.len() {
                    *hist.entry(side.herm(&side.vectors[i], &side.vectors[j])).or_insert(0) += 1;
                }
                hist.into_iter().collect()
            })
            .collect();
        Ok(side)
    }

    fn herm(&self, x: &[i64], y: &[i64]) -> HermPair {
        let sy = linalg::int_mat_vec(&self.gram, y);
        let wy = linalg::int_mat_vec(&self.gram_omega, y);
        let f: i64 = x.iter().zip(&sy).map(|(a, b)| a * b).sum();
        let fw: i64 = x.iter().zip(&wy).map(|(a, b)| a * b).sum();
        (f, fw)
    }
}

/// Smallest norm bound whose vectors span the lattice over Q.
fn spanning_bound(gram: &IntMatrix) -> Result<i64> {
    let n = gram.len();
    let max_diag = (0..n).map(|i| gram[i][i]).max().unwrap_or(1);
    let mut bound = (0..n).map(|i| gram[i][i]).min().unwrap_or(1);
    loop {
        let mut rows: Vec<Vec<BigInt>> = Vec::new();
        enumeration::enumerate(&linalg::int_to_rat(gram), &crate::qfield::rat(bound), |x| {
            if enumeration::is_sign_normalized(x) {
                rows.push(x.iter().map(|&c| BigInt::from(c)).collect());
            }
        })?;
        if linalg::hnf_rows(&rows).len() == n || bound >= max_diag {
            return Ok(bound);
        }
        bound += 1;
    }
}

fn rank_of(vectors: &[Vec<i64>]) -> usize {
    let rows: Vec<Vec<BigInt>> = vectors
        .iter()
        .map(|v| v.iter().map(|&c| BigInt::from(c)).collect())
        .collect();
    linalg::hnf_rows(&rows).len()
}

fn common_scale(a: &HermLattice, b: &HermLattice) -> BigInt {
    a.scale_den().lcm(&b.scale_den())
}

/// Decides whether two Hermitian lattices are isometric.
pub fn hermitian_isometric(l1: &HermLattice, l2: &HermLattice) -> Result<IsometrySearch> {
    if l1.ctx() != l2.ctx() || l1.rank() != l2.rank() {
        return Err(Error::Shape("lattices must share field and rank".into()));
    }
    let none = |nodes| IsometrySearch {
        witness: None,
        nodes,
        exhaustive: true,
    };
    if linalg::rat_det(&l1.trace_data().gram) != linalg::rat_det(&l2.trace_data().gram) {
        return Ok(none(0));
    }
    let scale = common_scale(l1, l2);
    let g1 = SideData::new(l1, &scale, 0)?.gram;
    let bound = spanning_bound(&g1)?;
    let a = SideData::new(l1, &scale, bound)?;
    let b = SideData::new(l2, &scale, bound)?;
    let n = a.gram.len();

    // per-norm fingerprint multisets must agree
    let mut fa: Vec<_> = a.fingerprints.iter().zip(&a.norms).collect();
    let mut fb: Vec<_> = b.fingerprints.iter().zip(&b.norms).collect();
    fa.sort();
    fb.sort();
    if fa != fb {
        return Ok(none(0));
    }

    let chosen = choose_frame(&a)?;
    let x_pairs: Vec<Vec<HermPair>> = chosen
        .iter()
        .map(|&i| chosen.iter().map(|&j| a.herm(&a.vectors[j], &a.vectors[i])).collect())
        .collect();

    // frame matrix X with columns x_1, omega x_1, ...
    let mut x_cols = Vec::with_capacity(n);
    for &i in &chosen {
        x_cols.push(a.vectors[i].clone());
        x_cols.push(linalg::int_mat_vec(&a.omega, &a.vectors[i]));
    }
    let x_mat = linalg::transpose(&x_cols);
    let x_inv = linalg::rat_inverse(&linalg::int_to_rat(&x_mat))?;
    let den = x_inv.iter().flatten().fold(BigInt::one(), |acc, v| acc.lcm(v.denom()));
    let adj: Vec<Vec<i128>> = x_inv
        .iter()
        .map(|r| {
            r.iter()
                .map(|v| {
                    (v * num_rational::BigRational::from_integer(den.clone()))
                        .to_integer()
                        .to_i128()
                        .ok_or(Error::Overflow("isometry frame"))
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;
    let den = den.to_i128().ok_or(Error::Overflow("isometry frame"))?;

    let units = unit_matrices(l2);
    let mut search = Search {
        a: &a,
        b: &b,
        chosen: &chosen,
        x_pairs: &x_pairs,
        adj: &adj,
        den,
        units: &units,
        images: Vec::new(),
        nodes: 0,
    };
    let found = search.descend()?;
    let nodes = search.nodes;
    match found {
        Some(u) => {
            let w = IsometryWitness { u };
            if !verify_isometry(&w, l1, l2) {
                return Err(Error::Invalid("isometry search produced an invalid witness".into()));
            }
            Ok(IsometrySearch {
                witness: Some(w),
                nodes,
                exhaustive: false,
            })
        }
        None => Ok(none(nodes)),
    }
}

/// Greedy frame: each new vector raises the rank of the omega-closed span
/// and, among those, has the rarest Hermitian profile against the frame so far.
fn choose_frame(a: &SideData) -> Result<Vec<usize>> {
    let n = a.gram.len();
    let mut chosen: Vec<usize> = Vec::new();
    let mut span: Vec<Vec<i64>> = Vec::new();
    while span.len() < n {
        let current = rank_of(&span);
        let profile = |z: usize, chosen: &[usize]| -> (i64, Vec<HermPair>, &Vec<(HermPair, u32)>) {
            (
                a.norms[z],
                chosen.iter().map(|&c| a.herm(&a.vectors[c], &a.vectors[z])).collect(),
                &a.fingerprints[z],
            )
        };
        let mut classes: HashMap<(i64, Vec<HermPair>, &Vec<(HermPair, u32)>), usize> = HashMap::new();
        for z in 0..a.vectors.len() {
            *classes.entry(profile(z, &chosen)).or_insert(0) += 1;
        }
        let mut best: Option<(usize, i64, usize)> = None;
        for z in 0..a.vectors.len() {
            let mut trial = span.clone();
            trial.push(a.vectors[z].clone());
            trial.push(linalg::int_mat_vec(&a.omega, &a.vectors[z]));
            if rank_of(&trial) != current + 2 {
                continue;
            }
            let size = classes[&profile(z, &chosen)];
            let key = (size, a.norms[z], z);
            if best.map_or(true, |b| key < b) {
                best = Some(key);
            }
        }
        let (_, _, z) = best.ok_or_else(|| Error::Invalid("short vectors do not span".into()))?;
        chosen.push(z);
        span.push(a.vectors[z].clone());
        span.push(linalg::int_mat_vec(&a.omega, &a.vectors[z]));
    }
    Ok(chosen)
}

/// Matrices of multiplication by the units of `O_K` on lattice coordinates.
fn unit_matrices(l: &HermLattice) -> Vec<IntMatrix> {
    let ctx = l.ctx();
    let om = &l.trace_data().omega;
    let n = om.len();
    let mut out = Vec::new();
    for a in -1i64..=1 {
        for b in -1i64..=1 {
            if ctx.norm_int(a, b) == 1 {
                out.push(
                    (0..n)
                        .map(|i| (0..n).map(|j| a * i64::from(i == j) + b * om[i][j]).collect())
                        .collect(),
                );
            }
        }
    }
    out
}

struct Search<'a> {
    a: &'a SideData,
    b: &'a SideData,
    chosen: &'a [usize],
    x_pairs: &'a [Vec<HermPair>],
    adj: &'a [Vec<i128>],
    den: i128,
    units: &'a [IntMatrix],
    images: Vec<usize>,
    nodes: u64,
}

impl Search<'_> {
    fn descend(&mut self) -> Result<Option<IntMatrix>> {
        let depth = self.images.len();
        if depth == self.chosen.len() {
            return Ok(self.complete());
        }
        let xi = self.chosen[depth];
        for w in 0..self.b.vectors.len() {
            if self.b.norms[w] != self.a.norms[xi] || self.b.fingerprints[w] != self.a.fingerprints[xi] {
                continue;
            }
            // units of O_K act on the target, so the first image only needs
            // to range over unit orbits
            if depth == 0 && !self.is_orbit_minimum(w) {
                continue;
            }
            let wv = &self.b.vectors[w];
            let consistent = self.images.iter().enumerate().all(|(j, &yj)| {
                self.b.herm(&self.b.vectors[yj], wv) == self.x_pairs[depth][j]
            });
            if !consistent {
                continue;
            }
            self.nodes += 1;
            self.images.push(w);
            if let Some(u) = self.descend()? {
                return Ok(Some(u));
            }
            self.images.pop();
        }
        Ok(None)
    }

    fn is_orbit_minimum(&self, w: usize) -> bool {
        let v = &self.b.vectors[w];
        self.units.iter().all(|u| linalg::int_mat_vec(u, v) >= *v)
    }

    fn complete(&self) -> Option<IntMatrix> {
        let n = self.a.gram.len();
        let mut y_cols = Vec::with_capacity(n);
        for &w in &self.images {
            let y = &self.b.vectors[w];
            y_cols.push(y.clone());
            y_cols.push(linalg::int_mat_vec(&self.b.omega, y));
        }
        // U = Y X^{-1} = (Y adj) / den
        let mut u = vec![vec![0i64; n]; n];
        for i in 0..n {
            for j in 0..n {
                let mut acc: i128 = 0;
                for k in 0..n {
                    acc += i128::from(y_cols[k][i]) * self.adj[k][j];
                }
                if acc % self.den != 0 {
                    return None;
                }
                u[i][j] = i64::try_from(acc / self.den).ok()?;
            }
        }
        Some(u)
    }
}

/// Checks `U^t S_2 U = S_1`, `U Omega_1 = Omega_2 U` and `det U = +-1`.
pub fn verify_isometry(w: &IsometryWitness, l1: &HermLattice, l2: &HermLattice) -> bool {
    let n = 2 * l1.rank();
    if l2.rank() != l1.rank() || w.u.len() != n || w.u.iter().any(|r| r.len() != n) {
        return false;
    }
    let u = linalg::int_to_rat(&w.u);
    let s1 = &l1.trace_data().gram;
    let s2 = &l2.trace_data().gram;
    let pulled = linalg::rat_mul(&linalg::transpose(&u), &linalg::rat_mul(s2, &u));
    if &pulled != s1 {
        return false;
    }
    let lhs = linalg::int_mul(&w.u, &l1.trace_data().omega);
    let rhs = linalg::int_mul(&l2.trace_data().omega, &w.u);
    if lhs != rhs {
        return false;
    }
    linalg::int_det(&w.u).abs().is_one()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DVerdict {
    pub d: i64,
    pub isometric: bool,
    pub witness: Option<IntMatrix>,
    pub nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrongModularityReport {
    pub m: i64,
    pub verdicts: Vec<DVerdict>,
    pub overall: bool,
}

/// Isometry test against `(1/sqrt(d)) A_d Lambda` for one divisor `d`.
pub fn ideal_class_verdict(lattice: &HermLattice, d: i64) -> Result<DVerdict> {
    let ctx = lattice.ctx();
    let ideal = ideal_a_d(ctx, d)?;
    if d == 1 {
        return Ok(DVerdict {
            d,
            isometric: true,
            witness: Some(linalg::int_identity(2 * lattice.rank())),
            nodes: 0,
        });
    }
    let scaled = lattice.scale_by_ideal(&ideal)?;
    let search = hermitian_isometric(lattice, &scaled)?;
    Ok(DVerdict {
        d,
        isometric: search.witness.is_some(),
        witness: search.witness.map(|w| w.u),
        nodes: search.nodes,
    })
}

/// Isometry against every `(1/sqrt(d)) A_d Lambda`, `d` a squarefree divisor
/// of `|d_K|`; at degree two these are all the ideal classes that matter.
pub fn strongly_modular_2(lattice: &HermLattice) -> Result<StrongModularityReport> {
    let report = lattice.theta_report();
    if !report.is_theta {
        return Err(Error::NotThetaLattice(report.failures().join(", ")));
    }
    let verdicts = lattice
        .ctx()
        .squarefree_disc_divisors()
        .into_iter()
        .map(|d| ideal_class_verdict(lattice, d))
        .collect::<Result<Vec<_>>>()?;
    let overall = verdicts.iter().all(|v| v.isometric);
    Ok(StrongModularityReport {
        m: lattice.ctx().m(),
        verdicts,
        overall,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hlattice::ExampleReading;
    use crate::qfield::{FieldCtx, Ideal, KElem};

    fn example(m: i64) -> HermLattice {
        HermLattice::example(FieldCtx::new(m).unwrap(), ExampleReading::SqrtM).unwrap().0
    }

    #[test]
    fn self_isometry() {
        let l = example(5);
        let id = IsometryWitness {
            u: linalg::int_identity(8),
        };
        assert!(verify_isometry(&id, &l, &l));
        let s = hermitian_isometric(&l, &l).unwrap();
        assert!(verify_isometry(s.witness.as_ref().unwrap(), &l, &l));
    }

    #[test]
    fn swapped_rows_rejected() {
        let l = example(5);
        let mut u = linalg::int_identity(8);
        u.swap(0, 2);
        assert!(!verify_isometry(&IsometryWitness { u }, &l, &l));
    }

    #[test]
    fn principal_scaling_is_isometric() {
        let k = FieldCtx::new(6).unwrap();
        let l = example(6);
        for (a, b) in [(1, 1), (2, -1), (3, 0)] {
            let ideal = Ideal::principal(&k, &KElem::from_ints(a, b)).unwrap();
            let s = l.scale_by_ideal(&ideal).unwrap();
            let r = hermitian_isometric(&l, &s).unwrap();
            assert!(r.witness.is_some(), "({a},{b})");
        }
    }

    #[test]
    fn good_and_bad_examples() {
        let r5 = strongly_modular_2(&example(5)).unwrap();
        assert!(r5.overall);
        assert!(r5.verdicts[0].isometric);
        let r30 = strongly_modular_2(&example(30)).unwrap();
        assert!(!r30.overall);
        assert!(r30.verdicts.iter().find(|v| v.d == 1).unwrap().isometric);
    }

    #[test]
    fn rejects_non_theta_input() {
        let l = HermLattice::standard(FieldCtx::new(5).unwrap(), 2);
        assert!(strongly_modular_2(&l).is_err());
    }
}
