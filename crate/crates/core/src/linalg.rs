//! Dense exact linear algebra over the rationals.
//!
//! Rank and determinant use fraction-free (Bareiss) elimination on an
//! integer-scaled copy of the matrix. Solving and reduced row echelon form
//! work directly over `Q`. Pivots are always taken from the lowest available
//! row index, so every result is deterministic for a given input.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::rational::{self, Q};

#[derive(Clone, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Q>,
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = self.row(i).iter().map(|x| x.to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Q::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Q::one();
        }
        m
    }

    /// Builds a matrix from rows; all rows must have `cols` entries.
    pub fn from_rows(rows: Vec<Vec<Q>>, cols: usize) -> Self {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged matrix rows");
            data.extend(row);
        }
        Matrix {
            rows: n,
            cols,
            data,
        }
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

    pub fn row(&self, i: usize) -> &[Q] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<Q> {
        (0..self.rows).map(|i| self[(i, j)].clone()).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<Q>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)].clone();
            }
        }
        t
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matrix product shape mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other[(k, j)];
                    if !b.is_zero() {
                        out[(i, j)] += a * b;
                    }
                }
            }
        }
        out
    }

    /// Reorders columns: column `j` of the result is column `perm[j]` of `self`.
    pub fn permute_columns(&self, perm: &[usize]) -> Matrix {
        assert_eq!(perm.len(), self.cols);
        let mut out = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, &src) in perm.iter().enumerate() {
                out[(i, j)] = self[(i, src)].clone();
            }
        }
        out
    }

    /// Sub-matrix of the given row and column ranges.
    pub fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Matrix {
        let picked: Vec<Vec<Q>> = rows
            .map(|i| cols.clone().map(|j| self[(i, j)].clone()).collect())
            .collect();
        let width = picked.first().map_or(0, Vec::len);
        Matrix::from_rows(picked, width)
    }

    pub fn scale_row(&mut self, i: usize, factor: &Q) {
        for j in 0..self.cols {
            let v = &self[(i, j)] * factor;
            self[(i, j)] = v;
        }
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    let v = &self[(i, j)];
                    if i == j {
                        v.is_one()
                    } else {
                        v.is_zero()
                    }
                })
            })
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Zero::is_zero)
    }

    pub fn zero_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .filter(|&i| rational::is_zero_vector(self.row(i)))
            .collect()
    }

    /// Integer copy with each row multiplied by the lcm of its denominators.
    /// Returns the copy and the product of the row scale factors.
    fn integer_rows(&self) -> (Vec<Vec<BigInt>>, BigInt) {
        let mut scale_product = BigInt::one();
        let rows = (0..self.rows)
            .map(|i| {
                let row = self.row(i);
                let lcm = row
                    .iter()
                    .fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
                scale_product *= &lcm;
                row.iter()
                    .map(|x| x.numer() * (&lcm / x.denom()))
                    .collect()
            })
            .collect();
        (rows, scale_product)
    }

    /// Fraction-free elimination; returns the number of pivots found and the
    /// last pivot (which equals the determinant when the matrix is square and
    /// of full rank), together with the sign of the row swaps.
    fn bareiss(&self) -> (usize, BigInt, bool) {
        let (mut a, _) = self.integer_rows();
        let (rows, cols) = (self.rows, self.cols);
        let mut prev = BigInt::one();
        let mut rank = 0;
        let mut negate = false;
        for col in 0..cols {
            if rank == rows {
                break;
            }
            let Some(pivot_row) = (rank..rows).find(|&r| !a[r][col].is_zero()) else {
                continue;
            };
            if pivot_row != rank {
                a.swap(pivot_row, rank);
                negate = !negate;
            }
            let pivot = a[rank][col].clone();
            for r in rank + 1..rows {
                let factor = a[r][col].clone();
                for c in col + 1..cols {
                    let num = &pivot * &a[r][c] - &factor * &a[rank][c];
                    let (quot, rem) = num.div_rem(&prev);
                    debug_assert!(rem.is_zero(), "bareiss division must be exact");
                    a[r][c] = quot;
                }
                a[r][col] = BigInt::zero();
            }
            prev = pivot;
            rank += 1;
        }
        (rank, prev, negate)
    }

    pub fn rank(&self) -> usize {
        if self.rows == 0 || self.cols == 0 {
            return 0;
        }
        self.bareiss().0
    }

    pub fn determinant(&self) -> Q {
        assert!(self.is_square(), "determinant of a non-square matrix");
        if self.rows == 0 {
            return Q::one();
        }
        let (rank, last, negate) = self.bareiss();
        if rank < self.rows {
            return Q::zero();
        }
        let (_, scale) = self.integer_rows();
        let det = Q::new(last, scale);
        if negate {
            -det
        } else {
            det
        }
    }

    /// Reduced row echelon form over `Q`.
    pub fn rref(&self) -> Rref {
        let (rows, cols) = (self.rows, self.cols);
        let mut reduced = self.clone();
        let mut transform = Matrix::identity(rows);
        let mut pivots = Vec::new();
        for col in 0..cols {
            let r = pivots.len();
            if r == rows {
                break;
            }
            let Some(pivot_row) = (r..rows).find(|&i| !reduced[(i, col)].is_zero()) else {
                continue;
            };
            reduced.swap_rows(r, pivot_row);
            transform.swap_rows(r, pivot_row);
            let inv = reduced[(r, col)].recip();
            reduced.scale_row(r, &inv);
            transform.scale_row(r, &inv);
            for i in 0..rows {
                if i == r {
                    continue;
                }
                let factor = reduced[(i, col)].clone();
                if factor.is_zero() {
                    continue;
                }
                reduced.add_row_multiple(i, r, &-&factor);
                transform.add_row_multiple(i, r, &-&factor);
            }
            pivots.push(col);
        }
        Rref {
            reduced,
            transform,
            pivots,
        }
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    /// `row[target] += factor * row[source]`.
    fn add_row_multiple(&mut self, target: usize, source: usize, factor: &Q) {
        for j in 0..self.cols {
            let v = &self[(source, j)] * factor;
            if !v.is_zero() {
                self[(target, j)] += v;
            }
        }
    }

    pub fn inverse(&self) -> Option<Matrix> {
        if !self.is_square() {
            return None;
        }
        let rref = self.rref();
        (rref.pivots.len() == self.rows).then_some(rref.transform)
    }

    /// One solution `x` of `self · x = rhs`, free variables set to zero.
    pub fn solve(&self, rhs: &[Q]) -> Option<Vec<Q>> {
        assert_eq!(rhs.len(), self.rows);
        let mut augmented = Matrix::zeros(self.rows, self.cols + 1);
        for i in 0..self.rows {
            for j in 0..self.cols {
                augmented[(i, j)] = self[(i, j)].clone();
            }
            augmented[(i, self.cols)] = rhs[i].clone();
        }
        let rref = augmented.rref();
        if rref.pivots.last() == Some(&self.cols) {
            return None;
        }
        let mut x = vec![Q::zero(); self.cols];
        for (r, &c) in rref.pivots.iter().enumerate() {
            x[c] = rref.reduced[(r, self.cols)].clone();
        }
        Some(x)
    }

    /// Coefficients `c` with `Σ_i c_i · row_i = target`, if `target` lies in
    /// the row space.
    pub fn row_combination(&self, target: &[Q]) -> Option<Vec<Q>> {
        assert_eq!(target.len(), self.cols);
        if self.rows == 0 {
            return rational::is_zero_vector(target).then(Vec::new);
        }
        self.transpose().solve(target)
    }

    /// Indices of rows that are linearly independent of all earlier rows.
    pub fn independent_rows(&self) -> Vec<usize> {
        let mut basis: Vec<(usize, Vec<Q>)> = Vec::new();
        let mut picked = Vec::new();
        for i in 0..self.rows {
            let mut v = self.row(i).to_vec();
            for (pivot_col, b) in &basis {
                let factor = v[*pivot_col].clone();
                if !factor.is_zero() {
                    for (x, y) in v.iter_mut().zip(b) {
                        *x -= &factor * y;
                    }
                }
            }
            if let Some(pivot_col) = v.iter().position(|x| !x.is_zero()) {
                let inv = v[pivot_col].recip();
                for x in v.iter_mut() {
                    *x *= &inv;
                }
                for (_, b) in basis.iter_mut() {
                    let factor = b[pivot_col].clone();
                    if !factor.is_zero() {
                        for (x, y) in b.iter_mut().zip(&v) {
                            *x -= &factor * y;
                        }
                    }
                }
                basis.push((pivot_col, v));
                picked.push(i);
            }
        }
        picked
    }

    pub fn max_abs(&self) -> Q {
        self.data.iter().map(Signed::abs).max().unwrap_or_else(Q::zero)
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = Q;
    fn index(&self, (i, j): (usize, usize)) -> &Q {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Q {
        &mut self.data[i * self.cols + j]
    }
}

/// Result of [`Matrix::rref`]: `transform · original = reduced`.
#[derive(Clone, Debug)]
pub struct Rref {
    pub reduced: Matrix,
    pub transform: Matrix,
    pub pivots: Vec<usize>,
}

impl Rref {
    /// Column order placing pivot columns first, remaining columns after, both
    /// in increasing order.
    pub fn pivot_first_permutation(&self) -> Vec<usize> {
        let cols = self.reduced.cols();
        let mut perm = self.pivots.clone();
        perm.extend((0..cols).filter(|c| !self.pivots.contains(c)));
        perm
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[&[i64]]) -> Matrix {
        let cols = rows[0].len();
        Matrix::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| int(x)).collect())
                .collect(),
            cols,
        )
    }

    // Laplace expansion, used as an independent determinant oracle.
    fn laplace(a: &Matrix) -> Q {
        let n = a.rows();
        if n == 0 {
            return Q::one();
        }
        if n == 1 {
            return a[(0, 0)].clone();
        }
        let mut det = Q::zero();
        for j in 0..n {
            let minor_rows: Vec<Vec<Q>> = (1..n)
                .map(|i| (0..n).filter(|&c| c != j).map(|c| a[(i, c)].clone()).collect())
                .collect();
            let minor = Matrix::from_rows(minor_rows, n - 1);
            let term = &a[(0, j)] * laplace(&minor);
            if j % 2 == 0 {
                det += term;
            } else {
                det -= term;
            }
        }
        det
    }

    #[test]
    fn determinant_small() {
        assert_eq!(m(&[&[2, 1], &[1, 3]]).determinant(), int(5));
        assert_eq!(m(&[&[0, 1], &[1, 0]]).determinant(), int(-1));
        assert_eq!(m(&[&[1, 2], &[2, 4]]).determinant(), int(0));
        let half = Matrix::from_rows(vec![vec![frac(1, 2), int(0)], vec![int(0), frac(2, 3)]], 2);
        assert_eq!(half.determinant(), frac(1, 3));
    }

    #[test]
    fn determinant_matches_laplace_on_random_rationals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=5 {
            for _ in 0..20 {
                let rows = (0..n)
                    .map(|_| rational::random_vector(&mut rng, n))
                    .collect();
                let a = Matrix::from_rows(rows, n);
                assert_eq!(a.determinant(), laplace(&a));
            }
        }
    }

    #[test]
    fn rank_of_rectangular() {
        assert_eq!(m(&[&[1, 2, 3], &[2, 4, 6]]).rank(), 1);
        assert_eq!(m(&[&[0, 0, 1], &[0, 1, 0]]).rank(), 2);
        assert_eq!(Matrix::zeros(3, 4).rank(), 0);
        assert_eq!(m(&[&[1, 0], &[0, 1], &[1, 1]]).rank(), 2);
    }

    #[test]
    fn inverse_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let rows = (0..4).map(|_| rational::random_vector(&mut rng, 4)).collect();
            let a = Matrix::from_rows(rows, 4);
            match a.inverse() {
                Some(inv) => assert!(a.mul(&inv).is_identity()),
                None => assert!(a.determinant().is_zero()),
            }
        }
    }

    #[test]
    fn rref_transform_and_block_form() {
        let a = m(&[&[0, 2, 4, 1], &[0, 1, 2, 3]]);
        let rref = a.rref();
        assert_eq!(rref.transform.mul(&a), rref.reduced);
        assert_eq!(rref.pivots, vec![1, 3]);
        let perm = rref.pivot_first_permutation();
        assert_eq!(perm, vec![1, 3, 0, 2]);
        let g1 = rref.reduced.permute_columns(&perm);
        assert!(g1.block(0..2, 0..2).is_identity());
    }

    #[test]
    fn solve_and_row_combination() {
        let a = m(&[&[1, 1], &[1, -1]]);
        assert_eq!(a.solve(&[int(3), int(1)]).unwrap(), vec![int(2), int(1)]);
        let rows = m(&[&[1, 0, 1], &[0, 1, 1]]);
        assert_eq!(
            rows.row_combination(&[int(2), int(3), int(5)]).unwrap(),
            vec![int(2), int(3)]
        );
        assert!(rows.row_combination(&[int(1), int(0), int(0)]).is_none());
    }

    #[test]
    fn independent_rows_greedy() {
        let a = m(&[&[1, 0], &[2, 0], &[0, 1], &[1, 1]]);
        assert_eq!(a.independent_rows(), vec![0, 2]);
    }
}
