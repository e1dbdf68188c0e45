//! Small dense exact linear algebra: integer Hermite normal form, rational
//! elimination and the `R^t D R` decomposition used by the enumerator.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

pub type RatMatrix = Vec<Vec<BigRational>>;
pub type IntMatrix = Vec<Vec<i64>>;

pub fn rat_identity(n: usize) -> RatMatrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                .collect()
        })
        .collect()
}

pub fn int_identity(n: usize) -> IntMatrix {
    (0..n)
        .map(|i| (0..n).map(|j| i64::from(i == j)).collect())
        .collect()
}

pub fn int_to_rat(m: &IntMatrix) -> RatMatrix {
    m.iter()
        .map(|row| row.iter().map(|&x| BigRational::from_integer(x.into())).collect())
        .collect()
}

/// Converts a rational matrix to `i64` entries if all entries are integers.
pub fn rat_to_int(m: &RatMatrix) -> Option<IntMatrix> {
    m.iter()
        .map(|row| {
            row.iter()
                .map(|x| if x.is_integer() { x.to_integer().to_i64() } else { None })
                .collect()
        })
        .collect()
}

pub fn transpose<T: Clone>(m: &[Vec<T>]) -> Vec<Vec<T>> {
    if m.is_empty() {
        return Vec::new();
    }
    (0..m[0].len())
        .map(|j| m.iter().map(|row| row[j].clone()).collect())
        .collect()
}

pub fn rat_mul(a: &RatMatrix, b: &RatMatrix) -> RatMatrix {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| {
                    let mut acc = BigRational::zero();
                    for k in 0..inner {
                        if !row[k].is_zero() && !b[k][j].is_zero() {
                            acc += &row[k] * &b[k][j];
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

pub fn int_mul(a: &IntMatrix, b: &IntMatrix) -> IntMatrix {
    let inner = b.len();
    let cols = if inner == 0 { 0 } else { b[0].len() };
    a.iter()
        .map(|row| {
            (0..cols)
                .map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum())
                .collect()
        })
        .collect()
}

pub fn int_mat_vec(a: &IntMatrix, v: &[i64]) -> Vec<i64> {
    a.iter()
        .map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

/// Determinant by fraction-free (Bareiss) elimination.
pub fn int_det(m: &IntMatrix) -> BigInt {
    let n = m.len();
    let mut a: Vec<Vec<BigInt>> = m
        .iter()
        .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
        .collect();
    let mut sign = BigInt::one();
    let mut prev = BigInt::one();
    for k in 0..n {
        if a[k][k].is_zero() {
            let Some(p) = (k + 1..n).find(|&i| !a[i][k].is_zero()) else {
                return BigInt::zero();
            };
            a.swap(k, p);
            sign = -sign;
        }
        for i in k + 1..n {
            for j in k + 1..n {
                let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                a[i][j] = v / &prev;
            }
        }
        prev = a[k][k].clone();
    }
    if n == 0 {
        return BigInt::one();
    }
    sign * &a[n - 1][n - 1]
}

pub fn rat_det(m: &RatMatrix) -> BigRational {
    let n = m.len();
    let mut a = m.clone();
    let mut det = BigRational::one();
    for k in 0..n {
        let Some(p) = (k..n).find(|&i| !a[i][k].is_zero()) else {
            return BigRational::zero();
        };
        if p != k {
            a.swap(k, p);
            det = -det;
        }
        det *= &a[k][k];
        for i in k + 1..n {
            if a[i][k].is_zero() {
                continue;
            }
            let f = &a[i][k] / &a[k][k];
            for j in k..n {
                let v = &f * &a[k][j];
                a[i][j] -= v;
            }
        }
    }
    det
}

pub fn rat_inverse(m: &RatMatrix) -> Result<RatMatrix> {
    let n = m.len();
    let mut a = m.clone();
    let mut inv = rat_identity(n);
    for k in 0..n {
        let p = (k..n).find(|&i| !a[i][k].is_zero()).ok_or(Error::Singular)?;
        a.swap(k, p);
        inv.swap(k, p);
        let piv = a[k][k].clone();
        for j in 0..n {
            a[k][j] /= &piv;
            inv[k][j] /= &piv;
        }
        for i in 0..n {
            if i == k || a[i][k].is_zero() {
                continue;
            }
            let f = a[i][k].clone();
            for j in 0..n {
                let v = &f * &a[k][j];
                a[i][j] -= v;
                let w = &f * &inv[k][j];
                inv[i][j] -= w;
            }
        }
    }
    Ok(inv)
}

/// Row-style Hermite normal form of the Z-span of `rows`.
///
/// Returns the nonzero rows in upper echelon form: pivots positive, entries
/// above each pivot reduced into `[0, pivot)`.
pub fn hnf_rows(rows: &[Vec<BigInt>]) -> Vec<Vec<BigInt>> {
    let mut a: Vec<Vec<BigInt>> = rows.to_vec();
    if a.is_empty() {
        return a;
    }
    let cols = a[0].len();
    let mut r = 0;
    for c in 0..cols {
        if r == a.len() {
            break;
        }
        // gcd-combine all rows below r into row r on column c
        loop {
            let nonzero: Vec<usize> = (r..a.len()).filter(|&i| !a[i][c].is_zero()).collect();
            if nonzero.is_empty() {
                break;
            }
            let best = *nonzero
                .iter()
                .min_by(|&&i, &&j| a[i][c].abs().cmp(&a[j][c].abs()))
                .unwrap();
            a.swap(r, best);
            let mut done = true;
            for i in r + 1..a.len() {
                if a[i][c].is_zero() {
                    continue;
                }
                let q = a[i][c].div_floor(&a[r][c]);
                for j in c..cols {
                    let v = &q * &a[r][j];
                    a[i][j] -= v;
                }
                if !a[i][c].is_zero() {
                    done = false;
                }
            }
            if done {
                break;
            }
        }
        if a[r][c].is_zero() {
            continue;
        }
        if a[r][c].is_negative() {
            for j in c..cols {
                a[r][j] = -a[r][j].clone();
            }
        }
        for i in 0..r {
            let q = a[i][c].div_floor(&a[r][c]);
            if q.is_zero() {
                continue;
            }
            for j in c..cols {
                let v = &q * &a[r][j];
                a[i][j] -= v;
            }
        }
        r += 1;
    }
    a.truncate(r);
    a
}

/// Decomposition `S = R^t D R` with `R` unit upper triangular, so that
/// `x^t S x = sum_i q_i (x_i + sum_{j>i} mu_ij x_j)^2`.
///
/// Fails unless every pivot `q_i` is positive.
pub fn ldl(s: &RatMatrix) -> Result<(RatMatrix, Vec<BigRational>)> {
    let n = s.len();
    let mut mu = vec![vec![BigRational::zero(); n]; n];
    let mut q = vec![BigRational::zero(); n];
    for i in 0..n {
        let mut d = s[i][i].clone();
        for k in 0..i {
            d -= &mu[k][i] * &mu[k][i] * &q[k];
        }
        if !d.is_positive() {
            return Err(Error::NotPositiveDefinite {
                index: i,
                pivot: d.to_string(),
            });
        }
        q[i] = d;
        mu[i][i] = BigRational::one();
        for j in i + 1..n {
            let mut v = s[i][j].clone();
            for k in 0..i {
                v -= &mu[k][i] * &mu[k][j] * &q[k];
            }
            mu[i][j] = v / &q[i];
        }
    }
    Ok((mu, q))
}

/// LLL reduction (`delta = 3/4`) of the lattice with Gram matrix `g`.
///
/// Returns the reduced basis as rows of integer coordinates with respect to
/// the original basis. `g` must be positive definite.
pub fn lll_gram(g: &RatMatrix) -> Vec<Vec<BigInt>> {
    let n = g.len();
    let mut b: Vec<Vec<BigInt>> = (0..n)
        .map(|i| (0..n).map(|j| BigInt::from(i64::from(i == j))).collect())
        .collect();
    if n < 2 {
        return b;
    }
    let gram_of = |b: &[Vec<BigInt>]| -> RatMatrix {
        let br: RatMatrix = b
            .iter()
            .map(|r| r.iter().map(|x| BigRational::from_integer(x.clone())).collect())
            .collect();
        rat_mul(&rat_mul(&br, g), &transpose(&br))
    };
    let three_quarters = BigRational::new(3.into(), 4.into());
    let mut k = 1;
    while k < n {
        let mut cur = gram_of(&b);
        for j in (0..k).rev() {
            let (mu, _) = gram_schmidt(&cur);
            let q = mu[k][j].round().to_integer();
            if q.is_zero() {
                continue;
            }
            let bj = b[j].clone();
            for (x, y) in b[k].iter_mut().zip(&bj) {
                *x -= &q * y;
            }
            cur = gram_of(&b);
        }
        let (mu, bstar) = gram_schmidt(&cur);
        let lhs = &bstar[k];
        let rhs = (&three_quarters - &mu[k][k - 1] * &mu[k][k - 1]) * &bstar[k - 1];
        if *lhs >= rhs {
            k += 1;
        } else {
            b.swap(k, k - 1);
            k = (k - 1).max(1);
        }
    }
    b
}

/// Gram-Schmidt coefficients and squared lengths from a Gram matrix.
fn gram_schmidt(g: &RatMatrix) -> (RatMatrix, Vec<BigRational>) {
    let n = g.len();
    let mut mu = vec![vec![BigRational::zero(); n]; n];
    let mut bstar = vec![BigRational::zero(); n];
    for i in 0..n {
        for j in 0..i {
            let mut v = g[i][j].clone();
            for l in 0..j {
                v -= &mu[j][l] * &mu[i][l] * &bstar[l];
            }
            mu[i][j] = if bstar[j].is_zero() { BigRational::zero() } else { v / &bstar[j] };
        }
        let mut v = g[i][i].clone();
        for l in 0..i {
            v -= &mu[i][l] * &mu[i][l] * &bstar[l];
        }
        mu[i][i] = BigRational::one();
        bstar[i] = v;
    }
    (mu, bstar)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn big(rows: &[&[i64]]) -> Vec<Vec<BigInt>> {
        rows.iter()
            .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
            .collect()
    }

    #[test]
    fn hnf_basic() {
        let h = hnf_rows(&big(&[&[4, 6], &[6, 9], &[2, 3]]));
        assert_eq!(h, big(&[&[2, 3]]));
        let h = hnf_rows(&big(&[&[2, 1], &[0, 3], &[4, 5]]));
        assert_eq!(h, big(&[&[2, 1], &[0, 3]]));
        let h = hnf_rows(&big(&[&[-3, 0], &[0, -2]]));
        assert_eq!(h, big(&[&[3, 0], &[0, 2]]));
    }

    #[test]
    fn determinants_agree() {
        let m: IntMatrix = vec![vec![2, -1, 0], vec![-1, 2, -1], vec![0, -1, 2]];
        assert_eq!(int_det(&m), BigInt::from(4));
        assert_eq!(rat_det(&int_to_rat(&m)), BigRational::from_integer(4.into()));
        let inv = rat_inverse(&int_to_rat(&m)).unwrap();
        assert_eq!(rat_mul(&inv, &int_to_rat(&m)), rat_identity(3));
        let sing: IntMatrix = vec![vec![1, 2], vec![2, 4]];
        assert_eq!(int_det(&sing), BigInt::zero());
        assert!(rat_inverse(&int_to_rat(&sing)).is_err());
    }

    #[test]
    fn ldl_reconstructs() {
        let m: IntMatrix = vec![vec![4, 2, 1], vec![2, 3, 0], vec![1, 0, 2]];
        let (mu, q) = ldl(&int_to_rat(&m)).unwrap();
        let n = 3;
        for i in 0..n {
            for j in 0..n {
                let mut v = BigRational::zero();
                for k in 0..n {
                    v += &mu[k][i] * &mu[k][j] * &q[k];
                }
                assert_eq!(v, BigRational::from_integer(m[i][j].into()));
            }
        }
        let bad: IntMatrix = vec![vec![1, 2], vec![2, 1]];
        assert!(ldl(&int_to_rat(&bad)).is_err());
    }

    #[test]
    fn lll_shortens_skewed_basis() {
        // basis (1, 0), (1000, 1) of Z^2 under the standard form
        let g: IntMatrix = vec![vec![1, 1000], vec![1000, 1_000_001]];
        let b = lll_gram(&int_to_rat(&g));
        let red: IntMatrix = b
            .iter()
            .map(|r| r.iter().map(|x| x.to_i64().unwrap()).collect())
            .collect();
        assert_eq!(int_det(&red).abs(), BigInt::one());
        let rg = int_mul(&int_mul(&red, &g), &transpose(&red));
        assert_eq!(rg, vec![vec![1, 0], vec![0, 1]]);
    }
}
