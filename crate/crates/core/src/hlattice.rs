//! Hermitian `O_K`-lattices `(Lambda, h)` with `h(x, y) = conj(x)^t y`,
//! stored through a Z-basis of rank `2r`, together with the trace form
//! `F_h = Re h` and the matrix of multiplication by `omega`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, IntMatrix, RatMatrix};
use crate::qfield::{FieldCtx, Ideal, KElem};

/// Trace Gram and omega-action of a lattice basis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceData {
    /// `S_ij = Re h(b_i, b_j)`.
    pub gram: RatMatrix,
    /// `omega * b_j = sum_i omega[i][j] b_i`.
    pub omega: IntMatrix,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HermLattice {
    ctx: FieldCtx,
    rank: usize,
    basis: Vec<Vec<KElem>>,
    form_den: BigInt,
    trace: TraceData,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ThetaReport {
    pub integral: bool,
    pub even: bool,
    pub det: String,
    pub unimodular: bool,
    pub is_theta: bool,
}

impl ThetaReport {
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.integral {
            out.push("trace form not integral");
        }
        if !self.even {
            out.push("trace form not even");
        }
        if !self.unimodular {
            out.push("trace form not unimodular");
        }
        out
    }
}

/// Which reading of the free rank-4 example construction to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExampleReading {
    /// `u = alpha + beta + sqrt(-m)`, `v = alpha - beta + sqrt(-m)` with
    /// `m + 1 + alpha^2 + beta^2 = 0 mod |d_K|`.
    SqrtM,
    /// `u = alpha + beta + sqrt(-d)` with `d + 1 + alpha^2 + beta^2 = 0 mod |d_K|`;
    /// only meaningful when `sqrt(-d)` lies in `K`.
    Literal { d: i64 },
}

impl HermLattice {
    /// Builds a lattice from a Z-basis of `2r` vectors in `K^r`, with the
    /// Hermitian form `h / form_den`. Validates independence and omega-closure.
    pub fn from_basis(ctx: FieldCtx, basis: Vec<Vec<KElem>>, form_den: BigInt) -> Result<Self> {
        let n = basis.len();
        if n == 0 || n % 2 != 0 {
            return Err(Error::MalformedLattice(format!(
                "need an even, nonzero number of basis vectors, got {n}"
            )));
        }
        let rank = n / 2;
        if basis.iter().any(|v| v.len() != rank) {
            return Err(Error::MalformedLattice("basis vectors must have length r".into()));
        }
        if !form_den.is_positive() {
            return Err(Error::MalformedLattice("form denominator must be positive".into()));
        }
        // columns = rational coordinates of the basis vectors
        let coords: RatMatrix = basis
            .iter()
            .map(|v| v.iter().flat_map(|x| [x.a.clone(), x.b.clone()]).collect())
            .collect();
        let bmat = linalg::transpose(&coords);
        let binv = linalg::rat_inverse(&bmat)
            .map_err(|_| Error::MalformedLattice("basis is not Z-linearly independent".into()))?;
        let t = BigRational::from_integer(ctx.omega_trace().into());
        let nn = BigRational::from_integer(ctx.omega_norm().into());
        // omega acting on the coordinates of K^r
        let mut w = vec![vec![BigRational::zero(); n]; n];
        for c in 0..rank {
            w[2 * c][2 * c + 1] = -nn.clone();
            w[2 * c + 1][2 * c] = BigRational::one();
            w[2 * c + 1][2 * c + 1] = t.clone();
        }
        let omega_rat = linalg::rat_mul(&binv, &linalg::rat_mul(&w, &bmat));
        let omega = linalg::rat_to_int(&omega_rat).ok_or_else(|| {
            Error::MalformedLattice("Z-span is not closed under multiplication by omega".into())
        })?;
        let den = BigRational::from_integer(form_den.clone());
        let mut gram = vec![vec![BigRational::zero(); n]; n];
        for i in 0..n {
            for j in i..n {
                let h = hermitian(&ctx, &basis[i], &basis[j]);
                let v = ctx.re(&h) / &den;
                gram[i][j] = v.clone();
                gram[j][i] = v;
            }
        }
        Ok(HermLattice {
            ctx,
            rank,
            basis,
            form_den,
            trace: TraceData { gram, omega },
        })
    }

    /// `O_K^r` with the standard form.
    pub fn standard(ctx: FieldCtx, rank: usize) -> Self {
        let mut basis = Vec::with_capacity(2 * rank);
        for c in 0..rank {
            for gen in [KElem::one(), ctx.omega()] {
                let mut v = vec![KElem::zero(); rank];
                v[c] = gen;
                basis.push(v);
            }
        }
        Self::from_basis(ctx, basis, BigInt::one()).expect("O_K^r is a lattice")
    }

    pub fn ctx(&self) -> &FieldCtx {
        &self.ctx
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn basis(&self) -> &[Vec<KElem>] {
        &self.basis
    }

    pub fn form_den(&self) -> &BigInt {
        &self.form_den
    }

    pub fn trace_data(&self) -> &TraceData {
        &self.trace
    }

    /// Integer trace Gram, if integral.
    pub fn int_gram(&self) -> Option<IntMatrix> {
        linalg::rat_to_int(&self.trace.gram)
    }

    /// Smallest `D` such that `D * F_h` is integral on the basis.
    pub fn scale_den(&self) -> BigInt {
        use num_integer::Integer;
        self.trace
            .gram
            .iter()
            .flatten()
            .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()))
    }

    /// Exact `h(b_i, b_j)` (already divided by the form denominator).
    pub fn hermitian_basis(&self, i: usize, j: usize) -> KElem {
        let den = BigRational::from_integer(self.form_den.clone());
        let h = hermitian(&self.ctx, &self.basis[i], &self.basis[j]);
        KElem::new(h.a / &den, h.b / &den)
    }

    /// Recovers `h(x, y)` from `F_h(x, y)` and `F_h(x, omega y)`.
    pub fn hermitian_from_trace(&self, f: &BigRational, f_omega: &BigRational) -> KElem {
        hermitian_from_trace(&self.ctx, f, f_omega)
    }

    /// Ambient vector of a lattice element given by integer coordinates.
    pub fn vector(&self, coords: &[i64]) -> Vec<KElem> {
        let mut out = vec![KElem::zero(); self.rank];
        for (c, b) in coords.iter().zip(&self.basis) {
            if *c == 0 {
                continue;
            }
            let s = BigRational::from_integer((*c).into());
            for (o, x) in out.iter_mut().zip(b) {
                *o = &*o + &x.scale(&s);
            }
        }
        out
    }

    pub fn theta_report(&self) -> ThetaReport {
        let int = self.int_gram();
        let integral = int.is_some();
        let even = int
            .as_ref()
            .map(|g| (0..g.len()).all(|i| g[i][i] % 2 == 0))
            .unwrap_or(false);
        let det = linalg::rat_det(&self.trace.gram);
        let unimodular = det.is_one();
        ThetaReport {
            integral,
            even,
            det: det.to_string(),
            unimodular,
            is_theta: integral && even && unimodular,
        }
    }

    pub fn is_theta_lattice(&self) -> bool {
        self.theta_report().is_theta
    }

    /// The free rank-4 example lattice for the given `(alpha, beta)`.
    pub fn example_with(ctx: FieldCtx, reading: ExampleReading, alpha: i64, beta: i64) -> Result<Self> {
        let root = match reading {
            ExampleReading::SqrtM => ctx.sqrt_neg_m(),
            ExampleReading::Literal { d } => sqrt_neg_in_field(&ctx, d)?,
        };
        let u = &KElem::from_ints(alpha + beta, 0) + &root;
        let v = &KElem::from_ints(alpha - beta, 0) + &root;
        let sd = ctx.sqrt_disc();
        // 1 / sqrt(d_K) = sqrt(d_K) / d_K
        let inv_sd = sd.scale(&BigRational::new(1.into(), ctx.disc().into()));
        let one = KElem::one();
        let zero = KElem::zero();
        let s = |x: &KElem| ctx.mul(x, &inv_sd);
        let gens: [Vec<KElem>; 4] = [
            vec![one.clone(), one.clone(), zero.clone(), zero.clone()],
            vec![-&one, one.clone(), zero.clone(), zero.clone()],
            vec![s(&u), s(&v), s(&one), s(&one)],
            vec![s(&-ctx.conj(&v)), s(&ctx.conj(&u)), s(&-&one), s(&one)],
        ];
        let mut basis = Vec::with_capacity(8);
        for g in gens {
            let wg: Vec<KElem> = g.iter().map(|x| ctx.mul(&ctx.omega(), x)).collect();
            basis.push(g);
            basis.push(wg);
        }
        Self::from_basis(ctx, basis, BigInt::one())
    }

    /// Candidate `(alpha, beta)` pairs in search order.
    pub fn example_parameters(ctx: &FieldCtx, reading: ExampleReading) -> Vec<(i64, i64)> {
        let n = ctx.abs_disc();
        let c = match reading {
            ExampleReading::SqrtM => ctx.m() + 1,
            ExampleReading::Literal { d } => d + 1,
        };
        let mut out = Vec::new();
        for alpha in 0..n {
            for beta in 0..n {
                if (c + alpha * alpha + beta * beta) % n == 0 {
                    out.push((alpha, beta));
                }
            }
        }
        out
    }

    /// The free rank-4 example theta lattice: the first admissible
    /// `(alpha, beta)` whose lattice validates as a theta lattice.
    pub fn example(ctx: FieldCtx, reading: ExampleReading) -> Result<(Self, (i64, i64))> {
        for (alpha, beta) in Self::example_parameters(&ctx, reading) {
            let Ok(lat) = Self::example_with(ctx, reading, alpha, beta) else {
                continue;
            };
            if lat.is_theta_lattice() {
                return Ok((lat, (alpha, beta)));
            }
        }
        Err(Error::NoConstruction(ctx.m()))
    }

    /// `I * Lambda` with form `h / N(I)`, i.e. the lattice
    /// `(1 / sqrt(N(I))) I Lambda` represented without square roots.
    pub fn scale_by_ideal(&self, ideal: &Ideal) -> Result<Self> {
        let n = 2 * self.rank;
        let mut gens: Vec<Vec<BigInt>> = Vec::with_capacity(2 * n);
        for (x, y) in ideal.int_basis() {
            // g = x + y omega acts as x I + y Omega on lattice coordinates
            for j in 0..n {
                let col: Vec<BigInt> = (0..n)
                    .map(|i| {
                        let id = if i == j { x } else { 0 };
                        BigInt::from(id + y * self.trace.omega[i][j])
                    })
                    .collect();
                gens.push(col);
            }
        }
        let rows = linalg::hnf_rows(&gens);
        if rows.len() != n {
            return Err(Error::ZeroIdeal);
        }
        let mut basis = Vec::with_capacity(n);
        for row in &rows {
            let coords: Vec<i64> = row
                .iter()
                .map(|c| c.to_i64().ok_or(Error::Overflow("ideal scaling")))
                .collect::<Result<_>>()?;
            basis.push(self.vector(&coords));
        }
        Self::from_basis(self.ctx, basis, &self.form_den * BigInt::from(ideal.norm))
    }

    /// Coordinates (w.r.t. this basis) of the vectors of `other`, if every
    /// basis vector of `other` lies in the Q-span; `None` otherwise.
    pub fn coordinates_of(&self, other: &HermLattice) -> Option<RatMatrix> {
        let coords: RatMatrix = self
            .basis
            .iter()
            .map(|v| v.iter().flat_map(|x| [x.a.clone(), x.b.clone()]).collect())
            .collect();
        let bmat = linalg::transpose(&coords);
        let binv = linalg::rat_inverse(&bmat).ok()?;
        let ocoords: RatMatrix = other
            .basis
            .iter()
            .map(|v| v.iter().flat_map(|x| [x.a.clone(), x.b.clone()]).collect())
            .collect();
        let omat = linalg::transpose(&ocoords);
        Some(linalg::rat_mul(&binv, &omat))
    }
}

/// `h(x, y) = sum conj(x_i) y_i`.
pub fn hermitian(ctx: &FieldCtx, x: &[KElem], y: &[KElem]) -> KElem {
    let mut acc = KElem::zero();
    for (a, b) in x.iter().zip(y) {
        if a.is_zero() || b.is_zero() {
            continue;
        }
        acc = &acc + &ctx.mul(&ctx.conj(a), b);
    }
    acc
}

/// `h = p + q omega` from `Re h` and `Re(omega h)`.
pub fn hermitian_from_trace(ctx: &FieldCtx, f: &BigRational, f_omega: &BigRational) -> KElem {
    let t = BigRational::from_integer(ctx.omega_trace().into());
    let two = BigRational::from_integer(2.into());
    let four = BigRational::from_integer(4.into());
    let dk = BigRational::from_integer(ctx.disc().into());
    // Re(omega h) - (t/2) Re h = q d_K / 4
    let q = (f_omega - &t * f / &two) * four / dk;
    let p = f - &q * &t / &two;
    KElem::new(p, q)
}

fn sqrt_neg_in_field(ctx: &FieldCtx, d: i64) -> Result<KElem> {
    // sqrt(-d) lies in K iff d / m is a rational square; for squarefree d
    // that forces d = m
    if d == ctx.m() {
        Ok(ctx.sqrt_neg_m())
    } else {
        Err(Error::MalformedLattice(format!(
            "sqrt(-{d}) does not lie in Q(sqrt(-{}))",
            ctx.m()
        )))
    }
}

#[derive(Serialize, Deserialize)]
struct LatticeJson {
    m: i64,
    rank: usize,
    basis: Vec<Vec<KElem>>,
    form_den: i64,
}

impl Serialize for HermLattice {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        LatticeJson {
            m: self.ctx.m(),
            rank: self.rank,
            basis: self.basis.clone(),
            form_den: self
                .form_den
                .to_i64()
                .ok_or_else(|| serde::ser::Error::custom("form_den out of range"))?,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for HermLattice {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = LatticeJson::deserialize(d)?;
        let ctx = FieldCtx::new(j.m).map_err(serde::de::Error::custom)?;
        let lat = HermLattice::from_basis(ctx, j.basis, j.form_den.into())
            .map_err(serde::de::Error::custom)?;
        if lat.rank != j.rank {
            return Err(serde::de::Error::custom("rank does not match basis"));
        }
        Ok(lat)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qfield::{ideal_a_d, is_squarefree, rat};

    #[test]
    fn standard_lattice_trace_data() {
        let k = FieldCtx::new(5).unwrap();
        let l = HermLattice::standard(k, 1);
        assert_eq!(l.trace_data().omega, vec![vec![0, -5], vec![1, 0]]);
        assert_eq!(l.trace_data().gram, vec![vec![rat(1), rat(0)], vec![rat(0), rat(5)]]);
        let l2 = HermLattice::standard(FieldCtx::new(1).unwrap(), 2);
        let rep = l2.theta_report();
        assert!(!rep.even);
        assert!(!rep.is_theta);
    }

    #[test]
    fn omega_relations_hold() {
        for m in [1, 2, 3, 5, 7, 15, 30] {
            let k = FieldCtx::new(m).unwrap();
            let (l, _) = HermLattice::example(k, ExampleReading::SqrtM).unwrap();
            let om = &l.trace_data().omega;
            let n = om.len();
            let om2 = linalg::int_mul(om, om);
            for i in 0..n {
                for j in 0..n {
                    let id = i64::from(i == j);
                    assert_eq!(om2[i][j] - k.omega_trace() * om[i][j] + k.omega_norm() * id, 0);
                }
            }
            let s = &l.trace_data().gram;
            let oms = linalg::int_to_rat(om);
            let lhs = linalg::rat_mul(&linalg::transpose(&oms), &linalg::rat_mul(s, &oms));
            let nn = rat(k.omega_norm());
            for i in 0..n {
                for j in 0..n {
                    assert_eq!(lhs[i][j], &nn * &s[i][j]);
                }
            }
        }
    }

    #[test]
    fn example_validates_for_m1() {
        let k = FieldCtx::new(1).unwrap();
        let (l, ab) = HermLattice::example(k, ExampleReading::SqrtM).unwrap();
        assert_eq!(ab, (1, 1));
        assert_eq!(l.rank(), 4);
        let rep = l.theta_report();
        assert!(rep.is_theta, "{rep:?}");
        assert_eq!(rep.det, "1");
    }

    #[test]
    fn literal_reading_is_rejected_off_diagonal() {
        let k = FieldCtx::new(5).unwrap();
        assert!(HermLattice::example_with(k, ExampleReading::Literal { d: 2 }, 1, 1).is_err());
        assert!(HermLattice::example(k, ExampleReading::Literal { d: 2 }).is_err());
        // d = m coincides with the default reading
        let (a, _) = HermLattice::example(k, ExampleReading::Literal { d: 5 }).unwrap();
        let (b, _) = HermLattice::example(k, ExampleReading::SqrtM).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn scaling_preserves_theta_property() {
        for m in (1..=40).filter(|&m| is_squarefree(m)) {
            let k = FieldCtx::new(m).unwrap();
            let (l, _) = HermLattice::example(k, ExampleReading::SqrtM).unwrap();
            for d in k.squarefree_disc_divisors() {
                let s = l.scale_by_ideal(&ideal_a_d(&k, d).unwrap()).unwrap();
                assert!(s.is_theta_lattice(), "m={m} d={d}");
            }
        }
    }

    #[test]
    fn scaling_sandwich_index() {
        let k = FieldCtx::new(30).unwrap();
        let (l, _) = HermLattice::example(k, ExampleReading::SqrtM).unwrap();
        for d in [2, 3, 5, 6] {
            let ideal = ideal_a_d(&k, d).unwrap();
            let s = l.scale_by_ideal(&ideal).unwrap();
            let c = l.coordinates_of(&s).unwrap();
            // I Lambda inside Lambda with index N(I)^r
            assert!(c.iter().flatten().all(|x| x.is_integer()));
            assert_eq!(linalg::rat_det(&c).abs(), rat(d.pow(4)));
            // N(I) Lambda inside I Lambda
            let back = s.coordinates_of(&l).unwrap();
            assert!(back.iter().flatten().all(|x| (x * rat(d)).is_integer()));
        }
    }

    #[test]
    fn hermitian_recovered_from_trace() {
        let k = FieldCtx::new(7).unwrap();
        let l = HermLattice::standard(k, 2);
        let x = l.vector(&[1, 2, -1, 3]);
        let y = l.vector(&[0, 1, 2, -2]);
        let h = hermitian(&k, &x, &y);
        let wy: Vec<KElem> = y.iter().map(|e| k.mul(&k.omega(), e)).collect();
        let f = k.re(&h);
        let fw = k.re(&hermitian(&k, &x, &wy));
        assert_eq!(hermitian_from_trace(&k, &f, &fw), h);
    }

    #[test]
    fn lattice_json_roundtrip() {
        let k = FieldCtx::new(3).unwrap();
        let (l, _) = HermLattice::example(k, ExampleReading::SqrtM).unwrap();
        let s = serde_json::to_string(&l).unwrap();
        let back: HermLattice = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
    }
}
