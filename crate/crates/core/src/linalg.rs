//! Real dense linear algebra used by the constraint systems: rank, null
//! spaces, orthonormal spans and subspace comparison, all through the SVD.

use nalgebra::{DMatrix, DVector};

/// Singular values below `RANK_TOL · σ_max` count as zero.
pub const RANK_TOL: f64 = 1e-9;

struct Svd {
    s: Vec<f64>,
    vt: DMatrix<f64>,
}

/// Full right factor even for wide inputs (rows padded with zeros).
fn svd_full_right(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    let padded = if m < n {
        let mut p = DMatrix::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = nalgebra::SVD::new(padded, false, true);
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let vt = svd.v_t.unwrap();
    let s = idx.iter().map(|&i| svd.singular_values[i]).collect();
    let vt = DMatrix::from_fn(idx.len(), vt.ncols(), |r, c| vt[(idx[r], c)]);
    Svd { s, vt }
}

fn cutoff(s: &[f64], rel_tol: f64) -> f64 {
    s.first().copied().unwrap_or(0.0) * rel_tol
}

pub fn rank(a: &DMatrix<f64>, rel_tol: f64) -> usize {
    if a.is_empty() {
        return 0;
    }
    let s = nalgebra::SVD::new(a.clone(), false, false).singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    s.iter().filter(|&&x| x > smax * rel_tol).count()
}

/// Orthonormal basis of the column space, as columns.
pub fn column_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    if a.is_empty() {
        return DMatrix::zeros(a.nrows(), 0);
    }
    let svd = nalgebra::SVD::new(a.clone(), true, false);
    let u = svd.u.unwrap();
    let s = &svd.singular_values;
    let smax = s.iter().copied().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..s.len()).filter(|&i| smax > 0.0 && s[i] > smax * rel_tol).collect();
    DMatrix::from_fn(a.nrows(), keep.len(), |r, c| u[(r, keep[c])])
}

/// Orthonormal basis of the row space, as columns of an `n × k` matrix.
pub fn row_space(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    column_space(&a.transpose(), rel_tol)
}

/// Orthonormal basis of `{x : A x = 0}`, as columns.
pub fn nullspace(a: &DMatrix<f64>, rel_tol: f64) -> DMatrix<f64> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return DMatrix::identity(n, n);
    }
    let svd = svd_full_right(a);
    let tol = cutoff(&svd.s, rel_tol);
    let r = if svd.s[0] == 0.0 { 0 } else { svd.s.iter().filter(|&&x| x > tol).count() };
    DMatrix::from_fn(n, n - r, |row, c| svd.vt[(r + c, row)])
}

/// Minimum-norm least-squares solution of `A x ≈ b`.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, rel_tol: f64) -> DVector<f64> {
    if a.is_empty() {
        return DVector::zeros(a.ncols());
    }
    let svd = nalgebra::SVD::new(a.clone(), true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return DVector::zeros(a.ncols());
    }
    svd.solve(b, smax * rel_tol).expect("SVD factors were requested")
}

/// Largest distance of a unit vector in one span from the other span.
/// Both arguments are orthonormal column bases of the same ambient space.
pub fn subspace_distance(u: &DMatrix<f64>, v: &DMatrix<f64>) -> f64 {
    fn one_way(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        if a.ncols() == 0 {
            return 0.0;
        }
        let resid = a - b * (b.transpose() * a);
        (0..a.ncols()).map(|c| resid.column(c).norm()).fold(0.0, f64::max)
    }
    if u.ncols() != v.ncols() {
        return 1.0;
    }
    one_way(u, v).max(one_way(v, u))
}

/// Residual of projecting every column of `a` onto the orthonormal span `q`.
pub fn projection_residual(a: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 {
        return 0.0;
    }
    let resid = a - q * (q.transpose() * a);
    (0..a.ncols()).map(|c| resid.column(c).norm()).fold(0.0, f64::max)
}

/// Incremental Gram–Schmidt with reorthogonalization; rejects vectors whose
/// residual falls below `rel_tol` times their original norm.
#[derive(Clone, Debug, Default)]
pub struct IncrementalBasis {
    vectors: Vec<DVector<f64>>,
    rel_tol: f64,
}

impl IncrementalBasis {
    pub fn new(rel_tol: f64) -> Self {
        Self { vectors: Vec::new(), rel_tol }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[DVector<f64>] {
        &self.vectors
    }

    /// Component of `v` orthogonal to the current span.
    pub fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut r = v.clone();
        for _ in 0..2 {
            for q in &self.vectors {
                let p = q.dot(&r);
                r.axpy(-p, q, 1.0);
            }
        }
        r
    }

    /// Adds `v` if it enlarges the span; returns the new unit vector's index.
    pub fn try_push(&mut self, v: &DVector<f64>) -> Option<usize> {
        let norm = v.norm();
        if norm == 0.0 {
            return None;
        }
        let r = self.residual(v);
        let rn = r.norm();
        if rn <= self.rel_tol * norm {
            return None;
        }
        self.vectors.push(r / rn);
        Some(self.vectors.len() - 1)
    }
}
