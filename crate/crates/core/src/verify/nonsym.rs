//! General (nonsymmetric) square root and logarithm, used to check the
//! product forms of `S` and `F` without going through any eigensolver.
//!
//! The products `W2 W1⁻¹` and `W1 S⁻¹` are as ill-conditioned as the inputs
//! combined, so the iterations run in double-double arithmetic and round to
//! `f64` only at the end.

use std::ops::{Add, AddAssign, Div, DivAssign, Mul, Sub, SubAssign};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const MAX_ITER: usize = 100;
const DD_EPS: f64 = 1e-30;

/// Unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`, about 32 digits.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TwoFloat {
    hi: f64,
    lo: f64,
}

fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

impl TwoFloat {
    pub fn hi(self) -> f64 {
        self.hi
    }
}

impl From<f64> for TwoFloat {
    fn from(hi: f64) -> Self {
        Self { hi, lo: 0.0 }
    }
}

impl Add for TwoFloat {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Self { hi, lo }
    }
}

impl Sub for TwoFloat {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        self + Self {
            hi: -o.hi,
            lo: -o.lo,
        }
    }
}

impl Mul for TwoFloat {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi));
        Self { hi, lo }
    }
}

impl Div for TwoFloat {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        // two correction steps of long division
        let q1 = self.hi / o.hi;
        let r = self - o * Self::from(q1);
        let q2 = r.hi / o.hi;
        let r = r - o * Self::from(q2);
        let q3 = r.hi / o.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Self { hi, lo } + Self::from(q3)
    }
}

impl AddAssign for TwoFloat {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl SubAssign for TwoFloat {
    fn sub_assign(&mut self, o: Self) {
        *self = *self - o;
    }
}

impl DivAssign for TwoFloat {
    fn div_assign(&mut self, o: Self) {
        *self = *self / o;
    }
}

/// Dense row-major double-double matrix.
#[derive(Clone, Debug)]
pub struct DdMatrix {
    n: usize,
    a: Vec<TwoFloat>,
}

fn dd(x: f64) -> TwoFloat {
    TwoFloat::from(x)
}

impl DdMatrix {
    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = dd(1.0);
        }
        m
    }

    fn zeros(n: usize) -> Self {
        Self {
            n,
            a: vec![dd(0.0); n * n],
        }
    }

    pub fn from_f64(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let n = m.nrows();
        Ok(Self {
            n,
            a: (0..n * n).map(|k| dd(m[(k / n, k % n)])).collect(),
        })
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.a[i * self.n + j].hi())
    }

    fn at(&self, i: usize, j: usize) -> TwoFloat {
        self.a[i * self.n + j]
    }

    pub fn mul(&self, o: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let x = self.at(i, k);
                if x.hi() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.a[i * n + j] += x * o.a[k * n + j];
                }
            }
        }
        out
    }

    fn zip(&self, o: &Self, f: impl Fn(TwoFloat, TwoFloat) -> TwoFloat) -> Self {
        Self {
            n: self.n,
            a: self.a.iter().zip(&o.a).map(|(x, y)| f(*x, *y)).collect(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |x, y| x + y)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |x, y| x - y)
    }

    pub fn scale(&self, s: TwoFloat) -> Self {
        Self {
            n: self.n,
            a: self.a.iter().map(|x| *x * s).collect(),
        }
    }

    /// Frobenius norm, to `f64` accuracy.
    pub fn norm(&self) -> f64 {
        self.a.iter().map(|x| x.hi() * x.hi()).sum::<f64>().sqrt()
    }

    /// Gauss–Jordan with partial pivoting.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.n;
        let mut m = self.clone();
        let mut inv = Self::identity(n);
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| m.at(x, c).hi().abs().total_cmp(&m.at(y, c).hi().abs()))
                .expect("non-empty");
            if m.at(p, c).hi() == 0.0 {
                return Err(Error::InvalidParameter("singular matrix in nonsymmetric iteration".into()));
            }
            if p != c {
                for j in 0..n {
                    m.a.swap(p * n + j, c * n + j);
                    inv.a.swap(p * n + j, c * n + j);
                }
            }
            let d = m.at(c, c);
            for j in 0..n {
                m.a[c * n + j] /= d;
                inv.a[c * n + j] /= d;
            }
            for r in 0..n {
                if r == c {
                    continue;
                }
                let f = m.at(r, c);
                if f.hi() == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let (mc, ic) = (m.a[c * n + j], inv.a[c * n + j]);
                    m.a[r * n + j] -= f * mc;
                    inv.a[r * n + j] -= f * ic;
                }
            }
        }
        Ok(inv)
    }
}

fn log_abs_det(m: &DMatrix<f64>) -> f64 {
    let lu = m.clone().lu();
    lu.u().diagonal().iter().map(|d| d.abs().ln()).sum()
}

/// Principal square root by the determinant-scaled Denman–Beavers
/// iteration. The spectrum must avoid the closed negative real axis.
pub fn sqrtm_db_dd(a: &DdMatrix) -> Result<DdMatrix> {
    let n = a.n;
    let mut y = a.clone();
    let mut z = DdMatrix::identity(n);
    let mut scaled = true;
    for _ in 0..MAX_ITER {
        let (yi, zi) = (y.inverse()?, z.inverse()?);
        // scaling only steers convergence, f64 is enough
        let mu = if scaled {
            (-(log_abs_det(&y.to_f64()) + log_abs_det(&z.to_f64())) / (2.0 * n as f64)).exp()
        } else {
            1.0
        };
        let (m, mi) = (dd(mu), dd(1.0) / dd(mu));
        let y_next = y.scale(m).add(&zi.scale(mi)).scale(dd(0.5));
        let z_next = z.scale(m).add(&yi.scale(mi)).scale(dd(0.5));
        let change = y_next.sub(&y).norm() / y_next.norm();
        y = y_next;
        z = z_next;
        if change < 1e-2 {
            scaled = false;
        }
        if change < DD_EPS {
            return Ok(y);
        }
    }
    let residual = y.mul(&y).sub(a).norm() / a.norm();
    if residual < 1e-24 {
        Ok(y)
    } else {
        Err(Error::InvalidParameter(format!(
            "square-root iteration stalled (relative residual {residual:e})"
        )))
    }
}

/// Principal logarithm by inverse scaling and squaring: repeated square
/// roots until `‖X − I‖ < 1/4`, then the series `2 atanh((X−I)(X+I)⁻¹)`.
pub fn logm_iss_dd(a: &DdMatrix) -> Result<DdMatrix> {
    let ident = DdMatrix::identity(a.n);
    let mut x = a.clone();
    let mut k = 0i32;
    while x.sub(&ident).norm() >= 0.25 {
        x = sqrtm_db_dd(&x)?;
        k += 1;
        if k > 64 {
            return Err(Error::InvalidParameter("logarithm scaling did not converge".into()));
        }
    }
    let z = x.sub(&ident).mul(&x.add(&ident).inverse()?);
    let z2 = z.mul(&z);
    let mut term = z.clone();
    let mut sum = z;
    for m in 1..80 {
        term = term.mul(&z2);
        let add = term.scale(dd(1.0) / dd((2 * m + 1) as f64));
        sum = sum.add(&add);
        if add.norm() < 1e-34 * sum.norm().max(1e-300) {
            break;
        }
    }
    Ok(sum.scale(dd(2f64.powi(k + 1))))
}

pub fn sqrtm_db(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(sqrtm_db_dd(&DdMatrix::from_f64(a)?)?.to_f64())
}

pub fn logm_iss(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(logm_iss_dd(&DdMatrix::from_f64(a)?)?.to_f64())
}

/// `S = (W2 W1⁻¹)^{1/2} W1` and `F = log(W1 S⁻¹) S`, every product and
/// inverse in double-double.
pub fn product_forms(w1: &DMatrix<f64>, w2: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let a = DdMatrix::from_f64(w1)?;
    let b = DdMatrix::from_f64(w2)?;
    if a.n != b.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            found: b.n,
        });
    }
    let s = sqrtm_db_dd(&b.mul(&a.inverse()?))?.mul(&a);
    let f = logm_iss_dd(&a.mul(&s.inverse()?))?.mul(&s);
    Ok((s.to_f64(), f.to_f64()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_of_nonsymmetric() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 0.0, 9.0]);
        let r = sqrtm_db(&a).unwrap();
        assert!((&r * &r - &a).amax() < 1e-14);
        assert!((r[(0, 0)] - 2.0).abs() < 1e-15 && (r[(1, 1)] - 3.0).abs() < 1e-15);
        assert!((r[(0, 1)] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn log_of_diagonal_and_identity() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&[1e-3, 1.0, 50.0]));
        let l = logm_iss(&a).unwrap();
        for (i, v) in [1e-3f64, 1.0, 50.0].iter().enumerate() {
            assert!((l[(i, i)] - v.ln()).abs() < 1e-15 * v.ln().abs().max(1.0));
        }
        assert!(logm_iss(&DMatrix::identity(3, 3)).unwrap().amax() == 0.0);
    }

    #[test]
    fn double_double_arithmetic() {
        let t = TwoFloat::from;
        let third = t(1.0) / t(3.0);
        assert!((third * t(3.0) - t(1.0)).hi().abs() < 1e-31);
        let a = t(7.0) / t(3.0);
        let b = t(11.0) / t(13.0);
        assert!((a * b - t(77.0) / t(39.0)).hi().abs() < 1e-31);
        assert_eq!((t(1.0) + t(1e-20) - t(1.0)).hi(), 1e-20);
    }

    #[test]
    fn inverse_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let d = DdMatrix::from_f64(&m).unwrap();
        let e = d.mul(&d.inverse().unwrap()).sub(&DdMatrix::identity(3));
        assert!(e.norm() < 1e-30);
    }

    #[test]
    fn scalar_product_forms() {
        let (s, f) = product_forms(&DMatrix::from_element(1, 1, 4.0), &DMatrix::from_element(1, 1, 9.0)).unwrap();
        assert!((s[(0, 0)] - 6.0).abs() < 1e-15);
        assert!((f[(0, 0)] - 6.0 * (2.0f64 / 3.0).ln()).abs() < 1e-15);
    }
}
