//! Dense and banded linear algebra shared by the analysis modules.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;

pub type C64 = Complex64;

/// Field operations needed by the banded solver.
pub trait Field:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + PartialEq
    + std::fmt::Debug
{
    fn zero() -> Self;
    fn modulus(self) -> f64;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl Field for C64 {
    fn zero() -> Self {
        C64::new(0.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Square banded matrix with `kl` sub- and `ku` super-diagonals, factorized
/// in place by Gaussian elimination with partial pivoting.
///
/// Row `i` stores columns `i - kl ..= i + kl + ku`; the extra `kl` columns
/// hold fill-in created by row interchanges.
#[derive(Clone, Debug)]
pub struct Banded<T: Field> {
    pub n: usize,
    pub kl: usize,
    pub ku: usize,
    width: usize,
    data: Vec<T>,
    perm: Vec<usize>,
    factored: bool,
}

/// Failure to factorize: a zero pivot at the reported row.
#[derive(Clone, Debug, PartialEq)]
pub struct SingularPivot(pub usize);

impl<T: Field> Banded<T> {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Banded {
            n,
            kl,
            ku,
            width,
            data: vec![T::zero(); n * width],
            perm: vec![0; n],
            factored: false,
        }
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    /// True when `(i, j)` lies inside the declared band.
    pub fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku && i < self.n && j < self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        if j + self.kl < i || j > i + self.kl + self.ku {
            return T::zero();
        }
        self.data[self.idx(i, j)]
    }

    /// Adds `v` to entry `(i, j)`; panics outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = self.data[k] + v;
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside band");
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Matrix-vector product with the unfactorized matrix.
    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert!(!self.factored);
        let mut y = vec![T::zero(); self.n];
        for (i, yi) in y.iter_mut().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            let mut s = T::zero();
            for (j, xj) in x.iter().enumerate().take(hi + 1).skip(lo) {
                s = s + self.data[self.idx(i, j)] * *xj;
            }
            *yi = s;
        }
        y
    }

    /// Transposed product with the unfactorized matrix.
    pub fn matvec_t(&self, x: &[T]) -> Vec<T> {
        assert!(!self.factored);
        let mut y = vec![T::zero(); self.n];
        for (i, xi) in x.iter().enumerate() {
            let lo = i.saturating_sub(self.kl);
            let hi = (i + self.ku).min(self.n - 1);
            for (j, yj) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yj = *yj + self.data[self.idx(i, j)] * *xi;
            }
        }
        y
    }

    /// Largest absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.get(i, j).modulus()).sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// LU factorization with partial pivoting.
    pub fn factor(&mut self) -> Result<(), SingularPivot> {
        assert!(!self.factored);
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.data[self.idx(k, k)].modulus();
            for i in k + 1..=last {
                let v = self.data[self.idx(i, k)].modulus();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            self.perm[k] = p;
            if best == 0.0 || !best.is_finite() {
                return Err(SingularPivot(k));
            }
            let jmax = (k + kl + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in k + 1..=last {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == T::zero() {
                    continue;
                }
                let row_k = k * self.width + kl - k;
                let row_i = i * self.width + kl - i;
                for j in k + 1..=jmax {
                    let u = self.data[row_k + j];
                    self.data[row_i + j] = self.data[row_i + j] - l * u;
                }
            }
        }
        self.factored = true;
        Ok(())
    }

    /// Solves `A x = b` in place using the factorization.
    pub fn solve_in_place(&self, b: &mut [T]) {
        assert!(self.factored);
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        for k in 0..n {
            let p = self.perm[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                b[i] = b[i] - self.data[self.idx(i, k)] * bk;
            }
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + kl + ku).min(n - 1) {
                s = s - self.data[self.idx(i, j)] * b[j];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
    }

    /// Solves `Aᵀ x = b` in place (plain transpose, no conjugation).
    pub fn solve_t_in_place(&self, b: &mut [T]) {
        assert!(self.factored);
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        for i in 0..n {
            let mut s = b[i];
            for j in i.saturating_sub(kl + ku)..i {
                s = s - self.data[self.idx(j, i)] * b[j];
            }
            b[i] = s / self.data[self.idx(i, i)];
        }
        for k in (0..n).rev() {
            let mut s = b[k];
            for i in k + 1..=(k + kl).min(n - 1) {
                s = s - self.data[self.idx(i, k)] * b[i];
            }
            b[k] = s;
            let p = self.perm[k];
            if p != k {
                b.swap(k, p);
            }
        }
    }
}

/// Banded matrix bordered by `m` dense rows and columns:
/// `[[A, B], [C, E]]` with `A` banded.
pub struct Bordered<T: Field> {
    pub a: Banded<T>,
    pub b: Vec<Vec<T>>,
    pub c: Vec<Vec<T>>,
    pub e: Vec<Vec<T>>,
    ainv_b: Vec<Vec<T>>,
    schur: Vec<Vec<T>>,
}

impl<T: Field> Bordered<T> {
    pub fn new(a: Banded<T>, m: usize) -> Self {
        let n = a.n;
        Bordered {
            a,
            b: vec![vec![T::zero(); n]; m],
            c: vec![vec![T::zero(); n]; m],
            e: vec![vec![T::zero(); m]; m],
            ainv_b: Vec::new(),
            schur: Vec::new(),
        }
    }

    pub fn factor(&mut self) -> Result<(), SingularPivot> {
        self.a.factor()?;
        let m = self.b.len();
        self.ainv_b = self
            .b
            .iter()
            .map(|col| {
                let mut x = col.clone();
                self.a.solve_in_place(&mut x);
                x
            })
            .collect();
        self.schur = vec![vec![T::zero(); m]; m];
        for r in 0..m {
            for s in 0..m {
                let mut v = self.e[r][s];
                for (ci, xi) in self.c[r].iter().zip(&self.ainv_b[s]) {
                    v = v - *ci * *xi;
                }
                self.schur[r][s] = v;
            }
        }
        Ok(())
    }

    /// Solves for `(x, y)` given right-hand sides `(f, g)`.
    pub fn solve(&self, f: &[T], g: &[T]) -> Result<(Vec<T>, Vec<T>), SingularPivot> {
        let m = self.b.len();
        let mut x = f.to_vec();
        self.a.solve_in_place(&mut x);
        let mut rhs: Vec<T> = (0..m)
            .map(|r| {
                let mut v = g[r];
                for (ci, xi) in self.c[r].iter().zip(&x) {
                    v = v - *ci * *xi;
                }
                v
            })
            .collect();
        let y = dense_solve(self.schur.clone(), &mut rhs)?;
        for (s, ys) in y.iter().enumerate() {
            for (xi, zi) in x.iter_mut().zip(&self.ainv_b[s]) {
                *xi = *xi - *ys * *zi;
            }
        }
        Ok((x, y))
    }
}

fn dense_solve<T: Field>(mut a: Vec<Vec<T>>, b: &mut [T]) -> Result<Vec<T>, SingularPivot> {
    let m = b.len();
    for k in 0..m {
        let p = (k..m)
            .max_by(|&i, &j| a[i][k].modulus().total_cmp(&a[j][k].modulus()))
            .unwrap();
        if a[p][k].modulus() == 0.0 {
            return Err(SingularPivot(k));
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..m {
            let l = a[i][k] / a[k][k];
            for j in k..m {
                let v = a[k][j];
                a[i][j] = a[i][j] - l * v;
            }
            let bk = b[k];
            b[i] = b[i] - l * bk;
        }
    }
    let mut x = vec![T::zero(); m];
    for i in (0..m).rev() {
        let mut s = b[i];
        for j in i + 1..m {
            s = s - a[i][j] * x[j];
        }
        x[i] = s / a[i][i];
    }
    Ok(x)
}

/// Promotes a real matrix to complex.
pub fn to_complex(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

/// Eigenvalues of a complex matrix via the complex Schur form.
pub fn eigenvalues(m: &DMatrix<C64>) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    Schur::new(m.clone())
        .eigenvalues()
        .expect("complex Schur form is triangular")
        .iter()
        .copied()
        .collect()
}

/// Eigenvalues and unit right eigenvectors of a complex matrix.
///
/// Eigenvectors come from back substitution on the Schur form; for
/// defective eigenvalues the returned vectors are nearly parallel.
pub fn eigen(m: &DMatrix<C64>) -> (Vec<C64>, DMatrix<C64>) {
    let n = m.nrows();
    let (q, t) = Schur::new(m.clone()).unpack();
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let mut vecs = DMatrix::<C64>::zeros(n, n);
    let vals: Vec<C64> = (0..n).map(|k| t[(k, k)]).collect();
    for k in 0..n {
        let lam = vals[k];
        let mut y = DVector::<C64>::zeros(n);
        y[k] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for l in j + 1..=k {
                s += t[(j, l)] * y[l];
            }
            let mut den = t[(j, j)] - lam;
            if den.norm() < 1e-14 * scale {
                den = C64::new(1e-14 * scale, 0.0);
            }
            y[j] = -s / den;
        }
        let x = &q * y;
        let nx = x.norm();
        vecs.set_column(k, &(x / C64::new(nx, 0.0)));
    }
    (vals, vecs)
}

/// Roots of `sum_k c[k] z^k` via the companion matrix.
///
/// Leading coefficients below `1e-14` times the largest are discarded.
pub fn poly_roots(c: &[C64]) -> Vec<C64> {
    let cmax = c.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let mut deg = c.len().saturating_sub(1);
    while deg > 0 && c[deg].norm() <= 1e-14 * cmax {
        deg -= 1;
    }
    if deg == 0 {
        return Vec::new();
    }
    let lead = c[deg];
    let mut comp = DMatrix::<C64>::zeros(deg, deg);
    for i in 1..deg {
        comp[(i, i - 1)] = C64::new(1.0, 0.0);
    }
    for i in 0..deg {
        comp[(i, deg - 1)] = -c[i] / lead;
    }
    eigenvalues(&comp)
}

/// Orthonormal basis of the orthogonal complement of the columns of `v`
/// inside `ℝⁿ`, obtained from the SVD of the projector complement.
pub fn orthonormal_complement(v: &DMatrix<f64>) -> DMatrix<f64> {
    let n = v.nrows();
    let k = v.ncols();
    if k == 0 {
        return DMatrix::identity(n, n);
    }
    let q = v.clone().qr().q();
    let proj = DMatrix::<f64>::identity(n, n) - &q * q.transpose();
    let svd = proj.svd(true, false);
    let u = svd.u.expect("left vectors requested");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let cols: Vec<DVector<f64>> = order
        .iter()
        .take(n - k)
        .map(|&i| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    DMatrix::from_columns(&cols)
}

/// Right and left singular vectors for the smallest singular value, plus all
/// singular values sorted increasingly.
pub fn smallest_singular(a: &DMatrix<f64>) -> (DVector<f64>, DVector<f64>, Vec<f64>) {
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let n = svd.singular_values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    let i = order[0];
    let sv: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    (vt.row(i).transpose(), u.column(i).into_owned(), sv)
}

/// Determinant of a complex matrix by LU.
pub fn det(m: &DMatrix<C64>) -> C64 {
    if m.nrows() == 0 {
        return C64::new(1.0, 0.0);
    }
    m.clone().lu().determinant()
}

/// Serde helpers writing matrices as arrays of rows and vectors as arrays.
pub mod ser {
    use nalgebra::{DMatrix, DVector};
    use serde::ser::{SerializeMap, Serializer};
    use std::collections::BTreeMap;

    pub fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| m.row(i).iter().copied().collect())
            .collect()
    }

    pub fn mat<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(rows(m))
    }

    pub fn vec<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter())
    }

    pub fn mat_map<S: Serializer>(
        m: &BTreeMap<String, DMatrix<f64>>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(m.len()))?;
        for (k, v) in m {
            map.serialize_entry(k, &rows(v))?;
        }
        map.end()
    }
}
