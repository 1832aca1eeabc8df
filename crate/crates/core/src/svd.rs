//! Deterministic singular value decomposition by one-sided (Hestenes) Jacobi
//! rotations.
//!
//! The routine orthogonalizes the columns of the taller orientation of `W`
//! with cyclic sweeps of plane rotations. A pair `(p, q)` is left alone once
//! `|b_p·b_q| ≤ 1e-12 · ‖b_p‖‖b_q‖`; the sweep loop stops when a full sweep
//! performs no rotation. Singular values are the final column norms.
//!
//! Output conventions:
//! - `k = min(rows, cols)`, trailing zero singular values are kept;
//! - singular values are sorted non-increasing with a stable sort, so ties
//!   keep the order in which the sweeps left them;
//! - in every pair the largest-magnitude entry of `u_i` (lowest index on ties)
//!   is nonnegative.

use crate::error::{Error, Result};
use crate::matrix::{dot, DenseMatrix};

const ROTATION_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 80;

/// `W = U · diag(S) · Vᵀ` with `U: N×k`, `V: M×k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

impl SvdResult {
    /// Retained rank.
    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Leading-`r` slice of the factors.
    pub fn truncate(&self, r: usize) -> Result<SvdResult> {
        let k = self.rank();
        if r == 0 || r > k {
            return Err(Error::RankOutOfRange { rank: r, max: k });
        }
        Ok(SvdResult {
            u: leading_columns(&self.u, r),
            s: self.s[..r].to_vec(),
            v: leading_columns(&self.v, r),
        })
    }

    /// `U · diag(S) · Vᵀ`.
    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(&self.s)
    }

    /// Reconstruction with the singular values replaced by `s`, e.g. with a
    /// group of them zeroed.
    pub fn reconstruct_with(&self, s: &[f64]) -> DenseMatrix {
        assert_eq!(s.len(), self.rank());
        let us = DenseMatrix::from_fn(self.u.rows(), self.rank(), |i, j| self.u[(i, j)] * s[j]);
        us.matmul_t(&self.v)
    }
}

fn leading_columns(m: &DenseMatrix, r: usize) -> DenseMatrix {
    DenseMatrix::from_fn(m.rows(), r, |i, j| m[(i, j)])
}

/// Full decomposition of `w` with `k = min(rows, cols)`.
pub fn svd(w: &DenseMatrix) -> Result<SvdResult> {
    w.check_finite("svd input")?;
    let (n, m) = w.shape();
    if n >= m {
        // Columns of W are the rows of Wᵀ.
        let (u, s, v) = jacobi(w.transpose(), n, m);
        Ok(finish(u, s, v))
    } else {
        // Wᵀ = U' S V'ᵀ, so W = V' S U'ᵀ.
        let t = svd(&w.transpose())?;
        let mut f = SvdResult { u: t.v, s: t.s, v: t.u };
        fix_signs(&mut f);
        Ok(f)
    }
}

/// Orthogonalizes the `ncols` rows of `cols` (each of length `len`), i.e. the
/// columns of a `len × ncols` matrix with `len ≥ ncols`. Returns the
/// left vectors as rows, the norms, and the accumulated right rotation with
/// its columns stored as rows.
fn jacobi(mut cols: DenseMatrix, len: usize, ncols: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>) {
    debug_assert_eq!(cols.shape(), (ncols, len));
    let mut rot = DenseMatrix::identity(ncols);
    let mut norms: Vec<f64> = (0..ncols).map(|j| dot(cols.row(j), cols.row(j))).collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..ncols {
            for q in p + 1..ncols {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(cols.row(p), cols.row(q));
                if gamma.abs() <= ROTATION_TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut cols, p, q, c, s);
                rotate_rows(&mut rot, p, q, c, s);
                norms[p] = dot(cols.row(p), cols.row(p));
                norms[q] = dot(cols.row(q), cols.row(q));
            }
        }
        if !rotated {
            break;
        }
    }

    let sigma: Vec<f64> = norms.iter().map(|v| v.sqrt()).collect();
    let left = (0..ncols).map(|j| cols.row(j).to_vec()).collect();
    let right = (0..ncols).map(|j| rot.row(j).to_vec()).collect();
    (left, sigma, right)
}

/// Applies `(x_p, x_q) ← (c·x_p − s·x_q, s·x_p + c·x_q)` to rows `p < q`.
fn rotate_rows(m: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    let data = m.data_mut();
    let (head, tail) = data.split_at_mut(q * cols);
    let xp = &mut head[p * cols..(p + 1) * cols];
    let xq = &mut tail[..cols];
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let (x, y) = (*a, *b);
        *a = c * x - s * y;
        *b = s * x + c * y;
    }
}

/// Sorts, normalizes, completes and sign-fixes the raw Jacobi output.
/// `left[j]` is the unnormalized `σ_j u_j`, `right[j]` is `v_j`.
fn finish(left: Vec<Vec<f64>>, sigma: Vec<f64>, right: Vec<Vec<f64>>) -> SvdResult {
    let k = sigma.len();
    let n = left.first().map_or(0, Vec::len);
    let m = right.first().map_or(0, Vec::len);

    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

    let s: Vec<f64> = order.iter().map(|&j| sigma[j]).collect();
    let s_max = s.first().copied().unwrap_or(0.0);
    // Below this a column is rounding noise and its direction is re-derived
    // by orthogonalization; the effect on U·diag(S)·Vᵀ is at most σ.
    let noise_floor = s_max * f64::EPSILON * (n.max(m) as f64);

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut v_cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    for (rank, &j) in order.iter().enumerate() {
        let sj = s[rank];
        let u = if sj > noise_floor && sj > 0.0 {
            left[j].iter().map(|x| x / sj).collect()
        } else {
            complete_basis(&left[j], &u_cols, n)
        };
        u_cols.push(u);
        v_cols.push(right[j].clone());
    }

    let mut f = SvdResult {
        u: DenseMatrix::from_fn(n, k, |i, j| u_cols[j][i]),
        s,
        v: DenseMatrix::from_fn(m, k, |i, j| v_cols[j][i]),
    };
    fix_signs(&mut f);
    f
}

/// Flips each pair so the largest-magnitude entry of `u_j` (lowest index on
/// ties) is nonnegative.
fn fix_signs(f: &mut SvdResult) {
    for j in 0..f.rank() {
        let mut pivot = 0;
        for i in 0..f.u.rows() {
            if f.u[(i, j)].abs() > f.u[(pivot, j)].abs() {
                pivot = i;
            }
        }
        if f.u.rows() > 0 && f.u[(pivot, j)] < 0.0 {
            for i in 0..f.u.rows() {
                f.u[(i, j)] = -f.u[(i, j)];
            }
            for i in 0..f.v.rows() {
                f.v[(i, j)] = -f.v[(i, j)];
            }
        }
    }
}

/// A unit vector orthogonal to `basis`, preferring the direction of `hint`
/// and falling back to standard basis vectors in index order.
fn complete_basis(hint: &[f64], basis: &[Vec<f64>], n: usize) -> Vec<f64> {
    let candidates = std::iter::once(hint.to_vec()).chain((0..n).map(|i| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        e
    }));
    for mut c in candidates {
        let start = dot(&c, &c).sqrt();
        if start == 0.0 {
            continue;
        }
        c.iter_mut().for_each(|x| *x /= start);
        // Two passes of modified Gram-Schmidt.
        for _ in 0..2 {
            for b in basis {
                let proj = dot(&c, b);
                c.iter_mut().zip(b).for_each(|(x, y)| *x -= proj * y);
            }
        }
        let norm = dot(&c, &c).sqrt();
        if norm > 0.5 {
            c.iter_mut().for_each(|x| *x /= norm);
            return c;
        }
    }
    unreachable!("basis of size {} cannot span R^{n}", basis.len())
}

/// Free-function form of [`SvdResult::truncate`].
pub fn truncate(f: &SvdResult, r: usize) -> Result<SvdResult> {
    f.truncate(r)
}

/// Free-function form of [`SvdResult::reconstruct`].
pub fn reconstruct(f: &SvdResult) -> DenseMatrix {
    f.reconstruct()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::frobenius_error;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn max_orthonormality_defect(q: &DenseMatrix) -> f64 {
        let g = q.t_matmul(q);
        g.sub(&DenseMatrix::identity(q.cols())).max_abs()
    }

    #[test]
    fn diagonal_matrix() {
        let f = svd(&DenseMatrix::from_diag(&[3.0, 1.0])).unwrap();
        assert_eq!(f.s, vec![3.0, 1.0]);
        assert_eq!(f.u, DenseMatrix::identity(2));
        assert_eq!(f.v, DenseMatrix::identity(2));
    }

    #[test]
    fn zero_matrix() {
        let f = svd(&DenseMatrix::zeros(2, 2)).unwrap();
        assert_eq!(f.s, vec![0.0, 0.0]);
        assert!(max_orthonormality_defect(&f.u) < 1e-15);
        assert!(max_orthonormality_defect(&f.v) < 1e-15);
    }

    #[test]
    fn two_by_two_closed_form() {
        // σ² are the roots of λ² − 30λ + 4 (eigenvalues of WᵀW).
        let f = svd(&DenseMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]])).unwrap();
        let disc = 884f64.sqrt();
        let expected = [((30.0 + disc) / 2.0).sqrt(), ((30.0 - disc) / 2.0).sqrt()];
        assert!((expected[0] - 5.4650).abs() < 1e-4 && (expected[1] - 0.3660).abs() < 1e-4);
        for (got, want) in f.s.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12 * want.max(1.0), "{got} vs {want}");
        }
    }

    #[test]
    fn rejects_non_finite() {
        let mut w = DenseMatrix::zeros(3, 2);
        w[(2, 1)] = f64::NEG_INFINITY;
        assert!(matches!(svd(&w), Err(Error::NonFinite { row: 2, col: 1, .. })));
    }

    #[test]
    fn wide_and_tall_shapes() {
        for (n, m) in [(1, 1), (1, 7), (7, 1), (5, 9), (9, 5), (12, 12)] {
            let w = random(n, m, (n * 31 + m) as u64);
            let f = svd(&w).unwrap();
            assert_eq!(f.rank(), n.min(m));
            assert_eq!(f.u.shape(), (n, n.min(m)));
            assert_eq!(f.v.shape(), (m, n.min(m)));
            assert!(max_orthonormality_defect(&f.u) < 1e-12);
            assert!(max_orthonormality_defect(&f.v) < 1e-12);
            assert!(frobenius_error(&w, &f.reconstruct()).unwrap() <= 1e-12 * w.frobenius_norm());
        }
    }

    #[test]
    fn rank_deficient_input_keeps_orthonormal_factors() {
        // Rank 2 embedded in 6×5, plus an exactly zero row and column.
        let a = random(6, 2, 3);
        let b = random(2, 5, 4);
        let mut w = a.matmul(&b);
        for j in 0..5 {
            w[(5, j)] = 0.0;
        }
        for i in 0..6 {
            w[(i, 4)] = 0.0;
        }
        let f = svd(&w).unwrap();
        assert!(max_orthonormality_defect(&f.u) < 1e-12);
        assert!(max_orthonormality_defect(&f.v) < 1e-12);
        assert!(f.s[2] < 1e-13 * f.s[0]);
        assert!(frobenius_error(&w, &f.reconstruct()).unwrap() <= 1e-12 * w.frobenius_norm());
    }

    #[test]
    fn sign_convention() {
        let f = svd(&random(8, 6, 11)).unwrap();
        for j in 0..f.rank() {
            let col = f.u.column(j);
            let mut pivot = 0;
            for i in 0..col.len() {
                if col[i].abs() > col[pivot].abs() {
                    pivot = i;
                }
            }
            assert!(col[pivot] >= 0.0);
        }
    }

    #[test]
    fn truncate_bounds_and_zero_tail() {
        let f = svd(&DenseMatrix::from_diag(&[5.0, 3.0, 0.0])).unwrap();
        assert!(matches!(f.truncate(0), Err(Error::RankOutOfRange { .. })));
        assert!(matches!(f.truncate(4), Err(Error::RankOutOfRange { .. })));
        let t = f.truncate(2).unwrap();
        assert_eq!(t.u.cols(), 2);
        assert_eq!(t.v.cols(), 2);
        let err = frobenius_error(&t.reconstruct(), &DenseMatrix::from_diag(&[5.0, 3.0, 0.0])).unwrap();
        assert!(err <= 1e-10);
    }

    #[test]
    fn reconstruct_rank_one_outer_product() {
        let mut u = DenseMatrix::zeros(3, 1);
        u[(0, 0)] = 1.0;
        let mut v = DenseMatrix::zeros(3, 1);
        v[(1, 0)] = 1.0;
        let f = SvdResult { u, s: vec![2.0], v };
        let mut expected = DenseMatrix::zeros(3, 3);
        expected[(0, 1)] = 2.0;
        assert_eq!(f.reconstruct(), expected);

        let zeroed = SvdResult { s: vec![0.0], ..f };
        assert_eq!(zeroed.reconstruct(), DenseMatrix::zeros(3, 3));
    }

    #[test]
    fn tail_energy_identity_100x80() {
        let w = random(100, 80, 2024);
        let f = svd(&w).unwrap();
        let approx = f.truncate(40).unwrap().reconstruct();
        let err = frobenius_error(&w, &approx).unwrap();
        let tail: f64 = f.s[40..].iter().map(|s| s * s).sum::<f64>().sqrt();
        assert!((err - tail).abs() <= 1e-10 * tail, "{err} vs {tail}");
    }

    #[test]
    fn deterministic_bitwise() {
        let w = random(37, 23, 5);
        assert_eq!(svd(&w).unwrap(), svd(&w).unwrap());
    }
}
