//! Dense complex linear algebra: column-major matrices, products, blocked LU
//! with partial pivoting, and a Hager–Higham 1-norm condition estimator.
//!
//! Complex products are carried out as real `dgemm` calls on strided views of
//! the interleaved (re, im) storage, which supports transposed and conjugated
//! operands without copies.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::vector::C0;

/// Magic bytes of the matrix dump format.
pub const MATRIX_MAGIC: &[u8; 8] = b"SPHMAT01";

/// Dense complex matrix in column-major order.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

/// Operand modifier for matrix products.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Op {
    /// A
    None,
    /// Aᵀ
    Trans,
    /// A† = conj(A)ᵀ
    Adjoint,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![C0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i + i * n] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Matrix with entries f(i, j).
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Matrix from row-major nested rows (convenient for small literals).
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(Error::DimensionMismatch { expected: c, actual: bad.len() });
        }
        Ok(Self::from_fn(r, c, |i, j| rows[i][j]))
    }

    /// Wrap column-major data.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, actual: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i + j * self.rows] = v;
    }

    #[inline]
    pub fn add_at(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i + j * self.rows] += v;
    }

    /// Column-major storage.
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    pub fn col(&self, j: usize) -> &[Complex64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [Complex64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Conjugate transpose as a new matrix.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }

    /// y = A x.
    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, actual: x.len() });
        }
        let mut y = vec![C0; self.rows];
        for (j, xj) in x.iter().enumerate() {
            if *xj == C0 {
                continue;
            }
            for (yi, a) in y.iter_mut().zip(self.col(j)) {
                *yi += a * xj;
            }
        }
        Ok(y)
    }

    /// y = A† x.
    pub fn adjoint_matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch { expected: self.rows, actual: x.len() });
        }
        Ok((0..self.cols).map(|j| self.col(j).iter().zip(x).map(|(a, b)| a.conj() * b).sum()).collect())
    }

    /// Product op(A)·op(B) as a new matrix.
    pub fn product(a: &Self, op_a: Op, b: &Self, op_b: Op) -> Result<Self> {
        let (m, _) = op_dims(a, op_a);
        let (_, n) = op_dims(b, op_b);
        let mut c = Self::zeros(m, n);
        gemm(1.0, a, op_a, b, op_b, 0.0, &mut c)?;
        Ok(c)
    }

    /// Gram matrix A†A, formed with three real products and exactly Hermitian.
    pub fn gram(&self) -> Self {
        let n = self.cols;
        let mut c = Self::zeros(n, n);
        let (ar, ai) = (self.real_view(Op::Trans), self.imag_view(Op::Trans));
        let (br, bi) = (self.real_view(Op::None), self.imag_view(Op::None));
        let (cr, ci) = c.out_views();
        // SAFETY: views stay inside the respective buffers; c does not alias self.
        unsafe {
            real_gemm(1.0, ar, br, 0.0, cr);
            real_gemm(1.0, ai, bi, 1.0, cr);
            real_gemm(1.0, ar, bi, 0.0, ci);
        }
        // Im(A†A) = BᵀC − (BᵀC)ᵀ with B = Re A, C = Im A.
        for j in 0..n {
            for i in 0..j {
                let t = c.data[i + j * n].im - c.data[j + i * n].im;
                c.data[i + j * n].im = t;
                c.data[j + i * n].im = -t;
            }
            c.data[j + j * n].im = 0.0;
        }
        c
    }

    /// Maximum absolute column sum ‖A‖₁.
    pub fn norm1(&self) -> f64 {
        (0..self.cols).map(|j| self.col(j).iter().map(|v| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// max |A − A†| for a square matrix.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Replace A by (A + A†)/2.
    pub fn hermitize(&mut self) {
        let n = self.rows;
        for j in 0..n {
            for i in 0..j {
                let v = (self.get(i, j) + self.get(j, i).conj()) * 0.5;
                self.set(i, j, v);
                self.set(j, i, v.conj());
            }
            let d = self.get(j, j);
            self.set(j, j, Complex64::new(d.re, 0.0));
        }
    }

    /// A ← A + s·I.
    pub fn add_diagonal(&mut self, s: Complex64) {
        for i in 0..self.rows.min(self.cols) {
            self.add_at(i, i, s);
        }
    }

    /// A ← A + s·B.
    pub fn add_scaled(&mut self, s: Complex64, b: &Self) -> Result<()> {
        if self.rows != b.rows || self.cols != b.cols {
            return Err(Error::DimensionMismatch { expected: self.data.len(), actual: b.data.len() });
        }
        for (x, y) in self.data.iter_mut().zip(&b.data) {
            *x += s * y;
        }
        Ok(())
    }

    /// A ← A + B + B† for a square B of equal size.
    pub fn add_hermitian_part(&mut self, b: &Self) -> Result<()> {
        if self.rows != b.rows || self.cols != b.cols || !b.is_square() {
            return Err(Error::DimensionMismatch { expected: self.data.len(), actual: b.data.len() });
        }
        let n = self.rows;
        for j in 0..n {
            for i in 0..n {
                self.data[i + j * n] += b.data[i + j * n] + b.data[j + i * n].conj();
            }
        }
        Ok(())
    }

    /// Write the matrix as magic, u64 rows, u64 cols, then column-major (re, im) f64 pairs (little endian).
    pub fn dump(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(MATRIX_MAGIC)?;
        w.write_all(&(self.rows as u64).to_le_bytes())?;
        w.write_all(&(self.cols as u64).to_le_bytes())?;
        for v in &self.data {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read a matrix written by [`DenseMatrix::dump`].
    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MATRIX_MAGIC {
            return Err(Error::CoefficientFormat { reason: "bad matrix magic".into() });
        }
        let mut word = [0u8; 8];
        r.read_exact(&mut word)?;
        let rows = u64::from_le_bytes(word) as usize;
        r.read_exact(&mut word)?;
        let cols = u64::from_le_bytes(word) as usize;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            r.read_exact(&mut word)?;
            let re = f64::from_le_bytes(word);
            r.read_exact(&mut word)?;
            data.push(Complex64::new(re, f64::from_le_bytes(word)));
        }
        Self::from_column_major(rows, cols, data)
    }

    fn real_view(&self, op: Op) -> RealView {
        RealView::of(self.data.as_ptr() as *const f64, self.rows, self.cols, self.rows, op)
    }

    fn imag_view(&self, op: Op) -> RealView {
        let mut v = self.real_view(op);
        // SAFETY: offset by one f64 stays within the interleaved buffer.
        v.ptr = unsafe { v.ptr.add(1) };
        v
    }

    fn out_views(&mut self) -> (RealViewMut, RealViewMut) {
        let p = self.data.as_mut_ptr() as *mut f64;
        let re = RealViewMut { ptr: p, rows: self.rows, cols: self.cols, rs: 2, cs: 2 * self.rows as isize };
        // SAFETY: offset by one f64 stays within the interleaved buffer.
        let im = RealViewMut { ptr: unsafe { p.add(1) }, ..re };
        (re, im)
    }
}

fn op_dims(a: &DenseMatrix, op: Op) -> (usize, usize) {
    match op {
        Op::None => (a.rows, a.cols),
        Op::Trans | Op::Adjoint => (a.cols, a.rows),
    }
}

/// Strided real view (rows × cols after the operand modifier).
#[derive(Clone, Copy)]
struct RealView {
    ptr: *const f64,
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

impl RealView {
    /// View of the real parts of a column-major complex block with leading dimension `ld`.
    fn of(ptr: *const f64, rows: usize, cols: usize, ld: usize, op: Op) -> Self {
        match op {
            Op::None => Self { ptr, rows, cols, rs: 2, cs: 2 * ld as isize },
            Op::Trans | Op::Adjoint => Self { ptr, rows: cols, cols: rows, rs: 2 * ld as isize, cs: 2 },
        }
    }
}

#[derive(Clone, Copy)]
struct RealViewMut {
    ptr: *mut f64,
    rows: usize,
    cols: usize,
    rs: isize,
    cs: isize,
}

/// C ← α A B + β C on real strided views.
///
/// # Safety
/// All views must describe valid memory; C must not overlap A or B.
unsafe fn real_gemm(alpha: f64, a: RealView, b: RealView, beta: f64, c: RealViewMut) {
    debug_assert!(a.rows == c.rows && b.cols == c.cols && a.cols == b.rows);
    if c.rows == 0 || c.cols == 0 {
        return;
    }
    matrixmultiply::dgemm(
        c.rows, a.cols, c.cols, alpha, a.ptr, a.rs, a.cs, b.ptr, b.rs, b.cs, beta, c.ptr, c.rs, c.cs,
    );
}

/// Complex block product C ← α op(A) op(B) + β C for real α, β on raw column-major blocks.
///
/// # Safety
/// Pointers must address complete blocks with the given leading dimensions;
/// C must not overlap A or B.
#[allow(clippy::too_many_arguments)]
unsafe fn complex_gemm_raw(
    alpha: f64,
    a: (*const Complex64, usize, usize, usize, Op),
    b: (*const Complex64, usize, usize, usize, Op),
    beta: f64,
    c: (*mut Complex64, usize, usize, usize),
) {
    let (ap, ar, ac, ald, aop) = a;
    let (bp, br, bc, bld, bop) = b;
    let (cp, cr, cc, cld) = c;
    let sa = if aop == Op::Adjoint { -1.0 } else { 1.0 };
    let sb = if bop == Op::Adjoint { -1.0 } else { 1.0 };
    let a_re = RealView::of(ap as *const f64, ar, ac, ald, aop);
    let a_im = RealView { ptr: (ap as *const f64).add(1), ..a_re };
    let b_re = RealView::of(bp as *const f64, br, bc, bld, bop);
    let b_im = RealView { ptr: (bp as *const f64).add(1), ..b_re };
    let c_re = RealViewMut { ptr: cp as *mut f64, rows: cr, cols: cc, rs: 2, cs: 2 * cld as isize };
    let c_im = RealViewMut { ptr: (cp as *mut f64).add(1), ..c_re };
    real_gemm(alpha, a_re, b_re, beta, c_re);
    real_gemm(-alpha * sa * sb, a_im, b_im, 1.0, c_re);
    real_gemm(alpha * sb, a_re, b_im, beta, c_im);
    real_gemm(alpha * sa, a_im, b_re, 1.0, c_im);
}

/// C ← α op(A) op(B) + β C (real scalars).
pub fn gemm(alpha: f64, a: &DenseMatrix, op_a: Op, b: &DenseMatrix, op_b: Op, beta: f64, c: &mut DenseMatrix) -> Result<()> {
    let (m, k) = op_dims(a, op_a);
    let (k2, n) = op_dims(b, op_b);
    if k != k2 {
        return Err(Error::DimensionMismatch { expected: k, actual: k2 });
    }
    if c.rows != m || c.cols != n {
        return Err(Error::DimensionMismatch { expected: m * n, actual: c.rows * c.cols });
    }
    // SAFETY: shapes checked above; `c` is uniquely borrowed so it cannot alias `a` or `b`.
    unsafe {
        complex_gemm_raw(
            alpha,
            (a.data.as_ptr(), a.rows, a.cols, a.rows, op_a),
            (b.data.as_ptr(), b.rows, b.cols, b.rows, op_b),
            beta,
            (c.data.as_mut_ptr(), c.rows, c.cols, c.rows),
        );
    }
    Ok(())
}

/// LU factorization P·A = L·U with partial pivoting.
#[derive(Clone, Debug)]
pub struct Factorization {
    lu: DenseMatrix,
    /// Row i was interchanged with row `pivots[i]` at step i.
    pivots: Vec<usize>,
    /// max|U| / max|A|, the pivot-growth diagnostic.
    pub pivot_growth: f64,
}

const LU_BLOCK: usize = 64;

/// Factor a square matrix in place (the matrix is consumed).
pub fn factor(mut a: DenseMatrix) -> Result<Factorization> {
    if !a.is_square() {
        return Err(Error::NonSquareMatrix { rows: a.rows, cols: a.cols });
    }
    let n = a.rows;
    let amax = a.max_abs();
    let mut pivots = vec![0usize; n];
    let mut k = 0;
    while k < n {
        let nb = LU_BLOCK.min(n - k);
        // Unblocked panel factorization of columns k..k+nb.
        for j in k..k + nb {
            let col = a.col(j);
            let (mut p, mut best) = (j, -1.0);
            for (i, v) in col.iter().enumerate().skip(j) {
                let m = v.norm();
                if m > best {
                    best = m;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(Error::SingularMatrix { column: j });
            }
            pivots[j] = p;
            if p != j {
                for c in 0..n {
                    a.data.swap(j + c * n, p + c * n);
                }
            }
            let inv = Complex64::new(1.0, 0.0) / a.get(j, j);
            for i in j + 1..n {
                a.data[i + j * n] *= inv;
            }
            for c in j + 1..k + nb {
                let ujc = a.get(j, c);
                if ujc == C0 {
                    continue;
                }
                let (left, right) = a.data.split_at_mut(c * n);
                let lcol = &left[j * n..(j + 1) * n];
                let ccol = &mut right[..n];
                for i in j + 1..n {
                    ccol[i] -= lcol[i] * ujc;
                }
            }
        }
        let rest = n - k - nb;
        if rest > 0 {
            // U12 ← L11⁻¹ A12.
            for c in k + nb..n {
                for j in k..k + nb {
                    let ujc = a.get(j, c);
                    if ujc == C0 {
                        continue;
                    }
                    for i in j + 1..k + nb {
                        let l = a.get(i, j);
                        a.data[i + c * n] -= l * ujc;
                    }
                }
            }
            // A22 ← A22 − L21 U12.
            let base = a.data.as_mut_ptr();
            // SAFETY: L21 (rows k+nb.., cols k..k+nb), U12 (rows k..k+nb, cols k+nb..)
            // and A22 (rows k+nb.., cols k+nb..) are disjoint blocks of the buffer.
            unsafe {
                complex_gemm_raw(
                    -1.0,
                    (base.add(k + nb + k * n) as *const Complex64, rest, nb, n, Op::None),
                    (base.add(k + (k + nb) * n) as *const Complex64, nb, rest, n, Op::None),
                    1.0,
                    (base.add(k + nb + (k + nb) * n), rest, rest, n),
                );
            }
        }
        k += nb;
    }
    let mut umax: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            umax = umax.max(a.get(i, j).norm());
        }
    }
    let pivot_growth = if amax > 0.0 { umax / amax } else { 1.0 };
    Ok(Factorization { lu: a, pivots, pivot_growth })
}

impl Factorization {
    pub fn dim(&self) -> usize {
        self.lu.rows
    }

    /// Pivot record: row i was swapped with row `pivots()[i]` at step i.
    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Unit lower-triangular factor L.
    pub fn lower(&self) -> DenseMatrix {
        let n = self.dim();
        DenseMatrix::from_fn(n, n, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Greater => self.lu.get(i, j),
            std::cmp::Ordering::Equal => Complex64::new(1.0, 0.0),
            std::cmp::Ordering::Less => C0,
        })
    }

    /// Upper-triangular factor U.
    pub fn upper(&self) -> DenseMatrix {
        let n = self.dim();
        DenseMatrix::from_fn(n, n, |i, j| if i <= j { self.lu.get(i, j) } else { C0 })
    }

    /// Diagonal of U (the pivots).
    pub fn pivot_values(&self) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.lu.get(i, i)).collect()
    }

    /// Apply the row interchanges P to a vector.
    pub fn permute(&self, b: &mut [Complex64]) {
        for (i, &p) in self.pivots.iter().enumerate() {
            b.swap(i, p);
        }
    }

    /// det A.
    pub fn determinant(&self) -> Complex64 {
        let swaps = self.pivots.iter().enumerate().filter(|(i, p)| i != *p).count();
        let sign = if swaps % 2 == 0 { 1.0 } else { -1.0 };
        self.pivot_values().iter().product::<Complex64>() * sign
    }

    /// Solve A x = b in place.
    pub fn solve_in_place(&self, b: &mut [Complex64]) -> Result<()> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: b.len() });
        }
        self.permute(b);
        for j in 0..n {
            let bj = b[j];
            if bj != C0 {
                let col = self.lu.col(j);
                for i in j + 1..n {
                    b[i] -= col[i] * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let col = self.lu.col(j);
            b[j] /= col[j];
            let bj = b[j];
            if bj != C0 {
                for i in 0..j {
                    b[i] -= col[i] * bj;
                }
            }
        }
        Ok(())
    }

    /// Solve A x = b.
    pub fn solve(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x)?;
        Ok(x)
    }

    /// Solve A X = B for every column of B.
    pub fn solve_many(&self, b: &DenseMatrix) -> Result<DenseMatrix> {
        if b.rows != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: b.rows });
        }
        let mut x = b.clone();
        let rows = x.rows.max(1);
        x.data.par_chunks_mut(rows).try_for_each(|col| self.solve_in_place(col))?;
        Ok(x)
    }

    /// Solve A† x = b.
    pub fn solve_adjoint(&self, b: &[Complex64]) -> Result<Vec<Complex64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: b.len() });
        }
        let mut x = b.to_vec();
        // A† = U† L† P, so solve U† z = b, L† w = z, then x = Pᵀ w.
        for j in 0..n {
            let col = self.lu.col(j);
            let s: Complex64 = (0..j).map(|i| col[i].conj() * x[i]).sum();
            x[j] = (x[j] - s) / col[j].conj();
        }
        for j in (0..n).rev() {
            let col = self.lu.col(j);
            let s: Complex64 = (j + 1..n).map(|i| col[i].conj() * x[i]).sum();
            x[j] -= s;
        }
        for (i, &p) in self.pivots.iter().enumerate().rev() {
            x.swap(i, p);
        }
        Ok(x)
    }
}

fn norm1_vec(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm()).sum()
}

/// Hager–Higham estimate of ‖A⁻¹‖₁ from a factorization (at most five iterations,
/// deterministic start vector, final alternating-sign test vector).
pub fn inverse_norm1_estimate(fac: &Factorization) -> Result<f64> {
    let n = fac.dim();
    if n == 0 {
        return Ok(0.0);
    }
    let mut x = vec![Complex64::new(1.0 / n as f64, 0.0); n];
    let mut y = fac.solve(&x)?;
    let mut est = norm1_vec(&y);
    let mut last_j = usize::MAX;
    for _ in 0..5 {
        let xi: Vec<Complex64> =
            y.iter().map(|v| if v.norm() > 0.0 { v / v.norm() } else { Complex64::new(1.0, 0.0) }).collect();
        let z = fac.solve_adjoint(&xi)?;
        let (j, zmax) = z.iter().enumerate().map(|(i, v)| (i, v.norm())).fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        let ztx: f64 = z.iter().zip(&x).map(|(a, b)| (a.conj() * b).re).sum();
        if zmax <= ztx || j == last_j {
            break;
        }
        last_j = j;
        x = vec![C0; n];
        x[j] = Complex64::new(1.0, 0.0);
        y = fac.solve(&x)?;
        let new_est = norm1_vec(&y);
        if new_est <= est {
            break;
        }
        est = new_est;
    }
    let alt: Vec<Complex64> = (0..n)
        .map(|i| {
            let s = if i % 2 == 0 { 1.0 } else { -1.0 };
            let frac = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
            Complex64::new(s * (1.0 + frac), 0.0)
        })
        .collect();
    let alt_est = 2.0 * norm1_vec(&fac.solve(&alt)?) / (3.0 * n as f64);
    Ok(est.max(alt_est))
}

/// 1-norm condition estimate κ₁ ≈ ‖A‖₁‖A⁻¹‖₁; +∞ when the factorization meets an exact zero pivot.
pub fn cond1_estimate(matrix: &DenseMatrix) -> Result<f64> {
    if !matrix.is_square() {
        return Err(Error::NonSquareMatrix { rows: matrix.rows, cols: matrix.cols });
    }
    let norm = matrix.norm1();
    match factor(matrix.clone()) {
        Ok(fac) => Ok(norm * inverse_norm1_estimate(&fac)?),
        Err(Error::SingularMatrix { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// Determinant of a small square matrix (zero when singular).
pub fn determinant(matrix: &DenseMatrix) -> Result<Complex64> {
    match factor(matrix.clone()) {
        Ok(fac) => Ok(fac.determinant()),
        Err(Error::SingularMatrix { .. }) => Ok(C0),
        Err(e) => Err(e),
    }
}

/// Numerical rank by Gaussian elimination with complete pivoting; pivots below
/// `rel_tol`·max|A| count as zero.
pub fn numerical_rank(matrix: &DenseMatrix, rel_tol: f64) -> usize {
    let mut a = matrix.clone();
    let (r, c) = (a.rows, a.cols);
    let tol = rel_tol * a.max_abs();
    let mut rank = 0;
    for step in 0..r.min(c) {
        let (mut pi, mut pj, mut best) = (step, step, -1.0);
        for j in step..c {
            for i in step..r {
                let v = a.get(i, j).norm();
                if v > best {
                    best = v;
                    pi = i;
                    pj = j;
                }
            }
        }
        if best <= tol {
            break;
        }
        rank += 1;
        for j in 0..c {
            a.data.swap(step + j * r, pi + j * r);
        }
        for i in 0..r {
            a.data.swap(i + step * r, i + pj * r);
        }
        let p = a.get(step, step);
        for i in step + 1..r {
            let f = a.get(i, step) / p;
            for j in step..c {
                let v = a.get(step, j);
                a.add_at(i, j, -f * v);
            }
        }
    }
    rank
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_matrix(rng: &mut StdRng, r: usize, c: usize) -> DenseMatrix {
        DenseMatrix::from_fn(r, c, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn naive_product(a: &DenseMatrix, op_a: Op, b: &DenseMatrix, op_b: Op) -> DenseMatrix {
        let fetch = |m: &DenseMatrix, op: Op, i: usize, j: usize| match op {
            Op::None => m.get(i, j),
            Op::Trans => m.get(j, i),
            Op::Adjoint => m.get(j, i).conj(),
        };
        let (m, k) = op_dims(a, op_a);
        let (_, n) = op_dims(b, op_b);
        DenseMatrix::from_fn(m, n, |i, j| (0..k).map(|p| fetch(a, op_a, i, p) * fetch(b, op_b, p, j)).sum())
    }

    #[test]
    fn products_match_naive() {
        let mut rng = StdRng::seed_from_u64(7);
        let a = random_matrix(&mut rng, 9, 5);
        let b = random_matrix(&mut rng, 5, 7);
        let bt = random_matrix(&mut rng, 7, 5);
        let at = random_matrix(&mut rng, 5, 9);
        for (x, ox, y, oy) in [
            (&a, Op::None, &b, Op::None),
            (&a, Op::None, &bt, Op::Adjoint),
            (&at, Op::Adjoint, &b, Op::None),
            (&at, Op::Trans, &bt, Op::Trans),
        ] {
            let fast = DenseMatrix::product(x, ox, y, oy).unwrap();
            let slow = naive_product(x, ox, y, oy);
            for (u, v) in fast.data().iter().zip(slow.data()) {
                assert!((u - v).norm() < 1e-13);
            }
        }
        let g = a.gram();
        let slow = naive_product(&a, Op::Adjoint, &a, Op::None);
        for (u, v) in g.data().iter().zip(slow.data()) {
            assert!((u - v).norm() < 1e-13);
        }
        assert_eq!(g.hermitian_defect(), 0.0);
    }

    #[test]
    fn lu_reconstructs_and_solves() {
        let mut rng = StdRng::seed_from_u64(11);
        for n in [1, 50, 100, 150] {
            let a = random_matrix(&mut rng, n, n);
            let fac = factor(a.clone()).unwrap();
            // P A = L U
            let lu = DenseMatrix::product(&fac.lower(), Op::None, &fac.upper(), Op::None).unwrap();
            let mut pa = a.clone();
            for j in 0..n {
                fac.permute(pa.col_mut(j));
            }
            let err = pa.data().iter().zip(lu.data()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(err <= 1e-12 * a.norm1(), "n={n}: {err}");
            let b: Vec<Complex64> = (0..n).map(|i| Complex64::new(i as f64, 1.0)).collect();
            let x = fac.solve(&b).unwrap();
            let r = a.matvec(&x).unwrap();
            let res: f64 = r.iter().zip(&b).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
            let bn: f64 = b.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            assert!(res / bn < 1e-12);
            let y = fac.solve_adjoint(&b).unwrap();
            let r = a.adjoint_matvec(&y).unwrap();
            let res: f64 = r.iter().zip(&b).map(|(u, v)| (u - v).norm_sqr()).sum::<f64>().sqrt();
            assert!(res / bn < 1e-12);
        }
    }

    #[test]
    fn pivoted_two_by_two() {
        let o = Complex64::new(1.0, 0.0);
        let a = DenseMatrix::from_rows(&[vec![C0, o], vec![o, C0]]).unwrap();
        let fac = factor(a).unwrap();
        let x = fac.solve(&[o, 2.0 * o]).unwrap();
        assert_eq!(x, vec![2.0 * o, o]);
        let id = factor(DenseMatrix::identity(4)).unwrap();
        assert_eq!(id.lower(), DenseMatrix::identity(4));
        assert_eq!(id.upper(), DenseMatrix::identity(4));
        assert_eq!(id.solve(&[C0; 4]).unwrap(), vec![C0; 4]);
    }

    #[test]
    fn singular_pivot_is_reported() {
        let a = DenseMatrix::zeros(3, 3);
        assert!(matches!(factor(a.clone()), Err(Error::SingularMatrix { column: 0 })));
        assert_eq!(cond1_estimate(&a).unwrap(), f64::INFINITY);
    }

    #[test]
    fn condition_estimates() {
        assert!((cond1_estimate(&DenseMatrix::identity(5)).unwrap() - 1.0).abs() < 1e-15);
        let mut d = DenseMatrix::identity(2);
        d.set(1, 1, Complex64::new(1e6, 0.0));
        assert!((cond1_estimate(&d).unwrap() - 1e6).abs() < 1e-6);
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..10 {
            let a = random_matrix(&mut rng, 20, 20);
            let fac = factor(a.clone()).unwrap();
            let inv = fac.solve_many(&DenseMatrix::identity(20)).unwrap();
            let exact = a.norm1() * inv.norm1();
            let est = cond1_estimate(&a).unwrap();
            assert!(est <= exact * (1.0 + 1e-10) && est >= exact / 10.0, "{est} vs {exact}");
        }
    }

    #[test]
    fn determinant_and_rank() {
        let o = Complex64::new(1.0, 0.0);
        let a = DenseMatrix::from_rows(&[vec![2.0 * o, o], vec![o, o]]).unwrap();
        assert!((determinant(&a).unwrap() - o).norm() < 1e-15);
        let s = DenseMatrix::from_rows(&[vec![o, 2.0 * o], vec![2.0 * o, 4.0 * o]]).unwrap();
        assert_eq!(numerical_rank(&s, 1e-12), 1);
        assert_eq!(numerical_rank(&a, 1e-12), 2);
    }

    #[test]
    fn dump_round_trip() {
        let mut rng = StdRng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 4, 3);
        let path = std::env::temp_dir().join(format!("spectral-maxwell-dump-{}.bin", std::process::id()));
        a.dump(&path).unwrap();
        let b = DenseMatrix::load(&path).unwrap();
        std::fs::remove_file(&path).ok();
        assert_eq!(a, b);
    }
}
