//! Reduction of half-integral Hermitian indices under `T -> T[U]`.
//!
//! [`reduce_index`] only uses translations `t -> t + k u` (`u` in `O_K`) and
//! the swap of the diagonal. [`minimize_index`] moves to a representative of
//! the full `GL_2(O_K)`-orbit whose upper-left entry is the least value of
//! `T` on unimodular vectors.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};

use crate::enumeration::enumerate;
use crate::error::{Error, Result};
use crate::linalg::{self, RatMatrix};
use crate::qfield::{FieldCtx, Ideal, KElem};
use crate::theta::{norm_i128, HermIndex};

type V2 = (i128, i128);

fn cross(x: V2, y: V2) -> i128 {
    x.0 * y.1 - x.1 * y.0
}

fn bilinear2(ctx: &FieldCtx, x: V2, y: V2) -> i128 {
    norm_i128(ctx, x.0 + y.0, x.1 + y.1) - norm_i128(ctx, x.0, x.1) - norm_i128(ctx, y.0, y.1)
}

/// Lagrange reduction of a basis of a rank-2 sublattice of `O_K`.
fn gauss_reduce(ctx: &FieldCtx, mut u: V2, mut v: V2) -> (V2, V2) {
    loop {
        if norm_i128(ctx, u.0, u.1) > norm_i128(ctx, v.0, v.1) {
            std::mem::swap(&mut u, &mut v);
        }
        let nu = norm_i128(ctx, u.0, u.1);
        let b2 = bilinear2(ctx, u, v);
        // round(b2 / (2 nu))
        let mu = Integer::div_floor(&(b2 + nu), &(2 * nu));
        if mu == 0 {
            return (u, v);
        }
        v = (v.0 - mu * u.0, v.1 - mu * u.1);
    }
}

fn to_i64(x: i128, what: &'static str) -> Result<i64> {
    i64::try_from(x).map_err(|_| Error::Overflow(what))
}

/// Moves `tau` to the representative of `tau + k sqrt(d_K) O_K` of least
/// norm (ties broken by coordinates).
fn translate(ctx: &FieldCtx, t: &HermIndex) -> Result<HermIndex> {
    let (sa, sb) = ctx.sqrt_disc().to_ints().expect("sqrt(d_K) is integral");
    let k = i128::from(t.k);
    let w1 = (k * i128::from(sa), k * i128::from(sb));
    let (oa, ob) = ctx.omega_times(sa, sb);
    let w2 = (k * i128::from(oa), k * i128::from(ob));
    let (w1, w2) = gauss_reduce(ctx, w1, w2);
    let tau = (i128::from(t.tau[0]), i128::from(t.tau[1]));
    let det = cross(w1, w2);
    let x0 = Integer::div_floor(&cross(tau, w2), &det);
    let y0 = Integer::div_floor(&cross(w1, tau), &det);
    let mut best: Option<(i128, i128, i128)> = None;
    for i in x0 - 2..=x0 + 3 {
        for j in y0 - 2..=y0 + 3 {
            let a = tau.0 - i * w1.0 - j * w2.0;
            let b = tau.1 - i * w1.1 - j * w2.1;
            let key = (norm_i128(ctx, a, b), a, b);
            if best.map_or(true, |cur| key < cur) {
                best = Some(key);
            }
        }
    }
    let (n, a, b) = best.expect("candidate window is nonempty");
    let dk = t.det_d(ctx);
    let den = i128::from(ctx.abs_disc()) * k;
    let num = dk + n;
    if num % den != 0 {
        return Err(Error::NotHermIndex(format!("translation of {t} left Lambda(2, O_K)")));
    }
    Ok(HermIndex::new(
        t.k,
        to_i64(num / den, "reduced index")?,
        to_i64(a, "reduced index")?,
        to_i64(b, "reduced index")?,
    ))
}

/// Canonical representative under translations and the diagonal swap.
///
/// Indices with `k = 0` are returned unchanged.
pub fn reduce_index(ctx: &FieldCtx, t: &HermIndex) -> Result<HermIndex> {
    if !t.is_psd(ctx) {
        return Err(Error::NotSemidefinite(t.to_string()));
    }
    let mut cur = *t;
    if cur.l < cur.k || (cur.l == cur.k && cur.swapped(ctx) < cur) {
        cur = cur.swapped(ctx);
    }
    loop {
        if cur.k == 0 {
            return Ok(cur);
        }
        cur = translate(ctx, &cur)?;
        if cur.l < cur.k {
            cur = cur.swapped(ctx);
            continue;
        }
        if cur.l == cur.k {
            let s = translate(ctx, &cur.swapped(ctx))?;
            if s < cur {
                cur = s;
            }
        }
        return Ok(cur);
    }
}

/// `conj(U)^t M U / den` for 2x2 matrices over `K`.
pub fn act_matrix(ctx: &FieldCtx, m: &[[KElem; 2]; 2], u: &[[KElem; 2]; 2], den: &BigRational) -> [[KElem; 2]; 2] {
    let mut out = [[KElem::zero(), KElem::zero()], [KElem::zero(), KElem::zero()]];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            let mut acc = KElem::zero();
            for p in 0..2 {
                for q in 0..2 {
                    if u[p][i].is_zero() || u[q][j].is_zero() || m[p][q].is_zero() {
                        continue;
                    }
                    let x = ctx.mul(&ctx.mul(&ctx.conj(&u[p][i]), &m[p][q]), &u[q][j]);
                    acc = &acc + &x;
                }
            }
            *cell = KElem::new(acc.a / den, acc.b / den);
        }
    }
    out
}

/// `conj(U)^t T U / den`, re-encoded as an index.
pub fn act(ctx: &FieldCtx, t: &HermIndex, u: &[[KElem; 2]; 2], den: &BigRational) -> Result<HermIndex> {
    HermIndex::from_matrix(ctx, &act_matrix(ctx, &t.to_matrix(ctx), u, den))
}

/// `(y1, y2)` in `O_K` with `x1 y2 - x2 y1 = 1`, if `x1 O_K + x2 O_K = O_K`.
pub fn complete_unimodular(ctx: &FieldCtx, x1: (i64, i64), x2: (i64, i64)) -> Option<((i64, i64), (i64, i64))> {
    let neg = |(a, b): (i64, i64)| (-a, -b);
    // images of the Z-basis 1, omega of y1 and of y2
    let images = [
        neg(x2),
        neg(ctx.omega_times(x2.0, x2.1)),
        x1,
        ctx.omega_times(x1.0, x1.1),
    ];
    let rows: Vec<Vec<BigInt>> = images
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| {
            let mut r = vec![BigInt::from(a), BigInt::from(b)];
            r.extend((0..4).map(|j| BigInt::from(i64::from(i == j))));
            r
        })
        .collect();
    let h = linalg::hnf_rows(&rows);
    if h.is_empty() || !h[0][0].is_one() {
        return None;
    }
    // target (1, 0) = row0 + c * row1
    let c = if h[0][1].is_zero() {
        BigInt::zero()
    } else {
        if h.len() < 2 || !h[1][0].is_zero() || h[1][1].is_zero() || !(&h[0][1] % &h[1][1]).is_zero() {
            return None;
        }
        -(&h[0][1] / &h[1][1])
    };
    let z: Vec<i64> = (0..4)
        .map(|j| (&h[0][2 + j] + &c * &h[1][2 + j]).to_i64())
        .collect::<Option<_>>()?;
    let y1 = (z[0], z[1]);
    let y2 = (z[2], z[3]);
    let (p, q) = (ctx.mul(&kint(x1), &kint(y2)), ctx.mul(&kint(x2), &kint(y1)));
    if &p - &q != KElem::one() {
        return None;
    }
    Some((y1, y2))
}

fn kint((a, b): (i64, i64)) -> KElem {
    KElem::from_ints(a, b)
}

/// A generator of a principal ideal.
pub fn principal_generator(ctx: &FieldCtx, ideal: &Ideal) -> Option<(i64, i64)> {
    let [b1, b2] = ideal.int_basis();
    let (u, _) = gauss_reduce(
        ctx,
        (i128::from(b1.0), i128::from(b1.1)),
        (i128::from(b2.0), i128::from(b2.1)),
    );
    (norm_i128(ctx, u.0, u.1) == i128::from(ideal.norm)).then(|| (u.0 as i64, u.1 as i64))
}

fn column_matrix(x: ((i64, i64), (i64, i64)), y: ((i64, i64), (i64, i64))) -> [[KElem; 2]; 2] {
    [[kint(x.0), kint(y.0)], [kint(x.1), kint(y.1)]]
}

/// Representative of the `GL_2(O_K)`-orbit of a positive definite `T` with
/// least upper-left entry, followed by [`reduce_index`].
///
/// Singular indices only get [`reduce_index`].
pub fn minimize_index(ctx: &FieldCtx, t: &HermIndex) -> Result<HermIndex> {
    let cur = reduce_index(ctx, t)?;
    if cur.k == 0 {
        return Ok(cur);
    }
    if cur.det_d(ctx) == 0 {
        return Ok(cur);
    }
    let one = BigRational::one();
    let m = cur.to_matrix(ctx);
    let basis = [
        (KElem::one(), KElem::zero()),
        (ctx.omega(), KElem::zero()),
        (KElem::zero(), KElem::one()),
        (KElem::zero(), ctx.omega()),
    ];
    let q = |x: &(KElem, KElem), y: &(KElem, KElem)| -> BigRational {
        let v = [&x.0, &x.1];
        let w = [&y.0, &y.1];
        let mut acc = KElem::zero();
        for p in 0..2 {
            for r in 0..2 {
                acc = &acc + &ctx.mul(&ctx.mul(&ctx.conj(v[p]), &m[p][r]), w[r]);
            }
        }
        ctx.re(&acc)
    };
    let gram: RatMatrix = basis
        .iter()
        .map(|x| basis.iter().map(|y| q(x, y)).collect())
        .collect();
    let b = linalg::lll_gram(&gram);
    let brat: RatMatrix = b
        .iter()
        .map(|r| r.iter().map(|x| BigRational::from_integer(x.clone())).collect())
        .collect();
    let red = linalg::rat_mul(&linalg::rat_mul(&brat, &gram), &linalg::transpose(&brat));
    let limit = BigRational::from_integer((cur.k - 1).into());
    let mut bound = red.iter().enumerate().map(|(i, r)| r[i].clone()).min().expect("rank 4");
    loop {
        if bound > limit {
            bound = limit.clone();
        }
        let mut best: Option<(BigRational, Vec<i64>)> = None;
        let mut failure = None;
        enumerate(&red, &bound, |c| {
            let mut x = vec![0i64; 4];
            for (ci, row) in c.iter().zip(&b) {
                for (xj, bij) in x.iter_mut().zip(row) {
                    match bij.to_i64().and_then(|v| v.checked_mul(*ci)).and_then(|v| xj.checked_add(v)) {
                        Some(v) => *xj = v,
                        None => failure = Some(Error::Overflow("unimodular search")),
                    }
                }
            }
            let val = crate::enumeration::quadratic_form(&red, c);
            let better = best.as_ref().map_or(true, |(bv, bx)| (&val, &x) < (bv, bx));
            if better && Ideal::from_int_gens(ctx, &[(x[0], x[1]), (x[2], x[3])]).map_or(false, |i| i.is_unit_ideal()) {
                best = Some((val, x));
            }
        })?;
        if let Some(e) = failure {
            return Err(e);
        }
        if let Some((_, x)) = best {
            let (x1, x2) = ((x[0], x[1]), (x[2], x[3]));
            let (y1, y2) = complete_unimodular(ctx, x1, x2)
                .ok_or_else(|| Error::Invalid("unit ideal without completion".into()))?;
            let r = act(ctx, &cur, &column_matrix((x1, x2), (y1, y2)), &one)?;
            return reduce_index(ctx, &r);
        }
        if bound >= limit {
            return Ok(cur);
        }
        bound = &bound * BigRational::from_integer(2.into());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translation_keeps_det() {
        let ctx = FieldCtx::new(5).unwrap();
        let t = HermIndex::new(1, 7, 2, 0);
        assert!(t.is_psd(&ctx));
        let r = reduce_index(&ctx, &t).unwrap();
        assert_eq!(r.det_d(&ctx), t.det_d(&ctx));
        assert_eq!(r.epsilon(), t.epsilon());
        assert_eq!(reduce_index(&ctx, &r).unwrap(), r);
    }

    #[test]
    fn swap_orders_diagonal() {
        let ctx = FieldCtx::new(5).unwrap();
        let t = HermIndex::new(3, 2, 0, 0);
        let r = reduce_index(&ctx, &t).unwrap();
        assert_eq!((r.k, r.l), (2, 3));
    }

    #[test]
    fn completion_is_unimodular() {
        let ctx = FieldCtx::new(5).unwrap();
        // 1 + omega and 2 generate the non-principal ideal of norm 2
        assert!(complete_unimodular(&ctx, (1, 1), (2, 0)).is_none());
        let (y1, y2) = complete_unimodular(&ctx, (2, 1), (2, 0)).unwrap();
        let det = &ctx.mul(&kint((2, 1)), &kint(y2)) - &ctx.mul(&kint((2, 0)), &kint(y1));
        assert_eq!(det, KElem::one());
    }

    #[test]
    fn minimize_large_translate() {
        let ctx = FieldCtx::new(30).unwrap();
        let (y1, y2) = complete_unimodular(&ctx, (7, 2), (3, 1)).unwrap();
        let big = column_matrix(((7, 2), (3, 1)), (y1, y2));
        let t = HermIndex::new(2, 3, 1, 0);
        let moved = act(&ctx, &t, &big, &BigRational::one()).unwrap();
        assert!(moved.trace() > 50);
        let a = minimize_index(&ctx, &t).unwrap();
        let b = minimize_index(&ctx, &moved).unwrap();
        assert_eq!(a.k, b.k);
        assert_eq!(a.det_d(&ctx), b.det_d(&ctx));
    }
}
