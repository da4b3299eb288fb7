//! Small dense complex matrices: products, Hermitian eigendecomposition by
//! cyclic Jacobi rotations, and the Padé matrix exponential.

use crate::scalar::{c, Real, C};
use std::ops::{Add, Index, IndexMut, Mul, Sub};

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix<T> {
    n: usize,
    data: Vec<C<T>>,
}

impl<T: Real> CMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        CMatrix {
            n,
            data: vec![c(T::zero(), T::zero()); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = c(T::one(), T::zero());
        }
        m
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> C<T>) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn diagonal(d: &[C<T>]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, x) in d.iter().enumerate() {
            m[(i, i)] = *x;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C<T>) -> Self {
        CMatrix {
            n: self.n,
            data: self.data.iter().map(|x| *x * s).collect(),
        }
    }

    pub fn matvec(&self, v: &[C<T>]) -> Vec<C<T>> {
        (0..self.n)
            .map(|i| {
                let row = &self.data[i * self.n..(i + 1) * self.n];
                row.iter()
                    .zip(v)
                    .fold(c(T::zero(), T::zero()), |acc, (a, b)| acc + *a * *b)
            })
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, x| m.max(x.norm()))
    }

    pub fn norm1(&self) -> T {
        (0..self.n)
            .map(|j| (0..self.n).fold(T::zero(), |s, i| s + self[(i, j)].norm()))
            .fold(T::zero(), T::max)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.n, other.n);
        Self::from_fn(a * b, |i, j| self[(i / b, j / b)] * other[(i % b, j % b)])
    }

    /// Solves `self * X = rhs` by LU with partial pivoting.
    pub fn solve(&self, rhs: &Self) -> Option<Self> {
        let n = self.n;
        let mut a = self.clone();
        let mut x = rhs.clone();
        for col in 0..n {
            let piv = (col..n).max_by(|&p, &q| {
                a[(p, col)]
                    .norm()
                    .partial_cmp(&a[(q, col)].norm())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })?;
            if a[(piv, col)].norm() == T::zero() {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(piv * n + j, col * n + j);
                    x.data.swap(piv * n + j, col * n + j);
                }
            }
            let d = a[(col, col)];
            for r in col + 1..n {
                let f = a[(r, col)] / d;
                if f.norm() == T::zero() {
                    continue;
                }
                for j in col..n {
                    let v = a[(col, j)];
                    a[(r, j)] -= f * v;
                }
                for j in 0..n {
                    let v = x[(col, j)];
                    x[(r, j)] -= f * v;
                }
            }
        }
        for col in (0..n).rev() {
            let d = a[(col, col)];
            for j in 0..n {
                let mut s = x[(col, j)];
                for k in col + 1..n {
                    s -= a[(col, k)] * x[(k, j)];
                }
                x[(col, j)] = s / d;
            }
        }
        Some(x)
    }

    /// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
    pub fn eigh(&self) -> (Vec<T>, Self) {
        let n = self.n;
        let mut a = self.clone();
        let mut v = Self::identity(n);
        let scale = self.max_abs().max(T::min_positive_value());
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for p in 0..n {
                for q in p + 1..n {
                    off += a[(p, q)].norm_sqr();
                }
            }
            if off.sqrt() <= eps * eps.sqrt() * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    let m = apq.norm();
                    if m <= eps * eps * scale {
                        continue;
                    }
                    let ph = apq / m;
                    let theta = (a[(q, q)].re - a[(p, p)].re) / (m + m);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let t = if theta == T::zero() { T::one() } else { t };
                    let cs = T::one() / (t * t + T::one()).sqrt();
                    let sn = t * cs;
                    let cph = ph.conj();
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = akp * cs - akq * cph * sn;
                        a[(k, q)] = akp * sn + akq * cph * cs;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = apk * cs - aqk * ph * sn;
                        a[(q, k)] = apk * sn + aqk * ph * cs;
                    }
                    a[(p, q)] = c(T::zero(), T::zero());
                    a[(q, p)] = c(T::zero(), T::zero());
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = vkp * cs - vkq * cph * sn;
                        v[(k, q)] = vkp * sn + vkq * cph * cs;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| {
            a[(i, i)]
                .re
                .partial_cmp(&a[(j, j)].re)
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        let vals = order.iter().map(|&i| a[(i, i)].re).collect();
        let vecs = Self::from_fn(n, |i, j| v[(i, order[j])]);
        (vals, vecs)
    }

    /// `exp(self)` by Padé(13) scaling and squaring.
    pub fn expm(&self) -> Self {
        const B: [f64; 14] = [
            64764752532480000.0,
            32382376266240000.0,
            7771770303897600.0,
            1187353796428800.0,
            129060195264000.0,
            10559470521600.0,
            670442572800.0,
            33522128640.0,
            1323241920.0,
            40840800.0,
            960960.0,
            16380.0,
            182.0,
            1.0,
        ];
        let n = self.n;
        let norm = self.norm1().as_f64();
        let s = if norm > 5.371920351148152 {
            (norm / 5.371920351148152).log2().ceil() as i32
        } else {
            0
        };
        let a = self.scale(c(T::lit(0.5f64.powi(s)), T::zero()));
        let id = Self::identity(n);
        let a2 = &a * &a;
        let a4 = &a2 * &a2;
        let a6 = &a4 * &a2;
        let b = |k: usize| c(T::lit(B[k]), T::zero());
        let lin = |m: &Self, x: C<T>| m.scale(x);
        let inner_u = &(&lin(&a6, b(13)) + &lin(&a4, b(11))) + &lin(&a2, b(9));
        let u = &a
            * &(&(&(&(&a6 * &inner_u) + &lin(&a6, b(7))) + &lin(&a4, b(5)))
                + &(&lin(&a2, b(3)) + &lin(&id, b(1))));
        let inner_v = &(&lin(&a6, b(12)) + &lin(&a4, b(10))) + &lin(&a2, b(8));
        let v = &(&(&(&a6 * &inner_v) + &lin(&a6, b(6))) + &lin(&a4, b(4)))
            + &(&lin(&a2, b(2)) + &lin(&id, b(0)));
        let mut r = (&v - &u).solve(&(&v + &u)).expect("Padé denominator is invertible");
        for _ in 0..s {
            r = &r * &r;
        }
        r
    }
}

impl<T> Index<(usize, usize)> for CMatrix<T> {
    type Output = C<T>;
    fn index(&self, (i, j): (usize, usize)) -> &C<T> {
        &self.data[i * self.n + j]
    }
}

impl<T> IndexMut<(usize, usize)> for CMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C<T> {
        &mut self.data[i * self.n + j]
    }
}

impl<T: Real> Mul for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn mul(self, rhs: Self) -> CMatrix<T> {
        let n = self.n;
        let mut out = CMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == T::zero() && a.im == T::zero() {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl<T: Real> Add for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn add(self, rhs: Self) -> CMatrix<T> {
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a + *b).collect(),
        }
    }
}

impl<T: Real> Sub for &CMatrix<T> {
    type Output = CMatrix<T>;
    fn sub(self, rhs: Self) -> CMatrix<T> {
        CMatrix {
            n: self.n,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| *a - *b).collect(),
        }
    }
}

pub fn vdot<T: Real>(a: &[C<T>], b: &[C<T>]) -> C<T> {
    a.iter()
        .zip(b)
        .fold(c(T::zero(), T::zero()), |acc, (x, y)| acc + x.conj() * *y)
}

pub fn vnorm<T: Real>(a: &[C<T>]) -> T {
    a.iter().fold(T::zero(), |s, x| s + x.norm_sqr()).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_hermitian(n: usize) -> CMatrix<f64> {
        let m = CMatrix::from_fn(n, |i, j| {
            c(
                ((i * 7 + j * 3) % 5) as f64 - 1.7,
                ((i * 2 + j * 5) % 7) as f64 * 0.3 - 0.4,
            )
        });
        (&m + &m.adjoint()).scale(c(0.5, 0.0))
    }

    #[test]
    fn eigh_reconstructs_hermitian_matrix() {
        let h = sample_hermitian(7);
        let (vals, v) = h.eigh();
        let d = CMatrix::diagonal(&vals.iter().map(|x| c(*x, 0.0)).collect::<Vec<_>>());
        let rec = &(&v * &d) * &v.adjoint();
        assert!((&rec - &h).max_abs() < 1e-12);
        let gram = &v.adjoint() * &v;
        assert!((&gram - &CMatrix::identity(7)).max_abs() < 1e-12);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn expm_matches_eigendecomposition_for_hermitian_generator() {
        let h = sample_hermitian(5);
        let (vals, v) = h.eigh();
        let d = CMatrix::diagonal(
            &vals
                .iter()
                .map(|x| (c(0.0, -1.3) * *x).exp())
                .collect::<Vec<_>>(),
        );
        let spectral = &(&v * &d) * &v.adjoint();
        let pade = h.scale(c(0.0, -1.3)).expm();
        assert!((&pade - &spectral).max_abs() < 1e-12);
    }

    #[test]
    fn expm_of_nilpotent_is_finite_taylor() {
        let mut n = CMatrix::<f64>::zeros(3);
        n[(1, 0)] = c(2.0, 1.0);
        n[(2, 1)] = c(-1.0, 0.5);
        let e = n.expm();
        let n2 = &n * &n;
        let exact = &(&CMatrix::identity(3) + &n) + &n2.scale(c(0.5, 0.0));
        assert!((&e - &exact).max_abs() < 1e-13);
    }

    #[test]
    fn solve_inverts() {
        let a = &sample_hermitian(4) + &CMatrix::identity(4).scale(c(0.3, 2.0));
        let x = a.solve(&CMatrix::identity(4)).unwrap();
        assert!((&(&a * &x) - &CMatrix::identity(4)).max_abs() < 1e-12);
    }
}
