//! Sparse linear algebra: CSR storage, Jacobi-preconditioned conjugate
//! gradients, and direct tridiagonal elimination for 1-D problems.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Compressed sparse row matrix (symmetric data is stored fully).
#[derive(Debug, Clone)]
pub struct Csr<R: Real> {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<R>,
}

impl<R: Real> Csr<R> {
    /// Assemble from unsorted triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &mut Vec<(usize, usize, R)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_counts = vec![0usize; n];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<R> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in triplets.iter() {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_counts[r] += 1;
                last = Some((r, c));
            }
        }
        let mut row_ptr = vec![0usize; n + 1];
        for i in 0..n {
            row_ptr[i + 1] = row_ptr[i] + row_counts[i];
        }
        Csr {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn matvec(&self, x: &[R], y: &mut [R]) {
        for r in 0..self.n {
            let mut acc = R::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<R> {
        let mut d = vec![R::zero(); self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[k] == r {
                    d[r] += self.vals[k];
                }
            }
        }
        d
    }
}

/// Outcome of a CG run.
pub struct CgOutcome<R: Real> {
    pub iterations: usize,
    pub residual: R,
    /// Set when p' A p <= 0 was met: the operator is not positive definite.
    pub indefinite: bool,
}

/// Jacobi-preconditioned conjugate gradients. When `project_zero_mean` is set
/// the iterates (and rhs) are projected onto the zero-mean subspace, which is
/// the consistent treatment of the periodic cell nullspace.
pub fn cg_jacobi<R: Real>(
    a: &Csr<R>,
    b: &[R],
    x: &mut [R],
    rel_tol: R,
    max_iter: usize,
    project_zero_mean: bool,
) -> CgOutcome<R> {
    let n = a.n;
    let inv_n = R::one() / R::from_usize_exact(n);
    let project = |v: &mut [R]| {
        if project_zero_mean {
            let m = v.iter().fold(R::zero(), |s, &t| s + t) * inv_n;
            for t in v.iter_mut() {
                *t -= m;
            }
        }
    };
    let diag = a.diagonal();
    let inv_diag: Vec<R> = diag
        .iter()
        .map(|&d| {
            if d.abs() > R::of(1e-300) {
                R::one() / d
            } else {
                R::one()
            }
        })
        .collect();

    let mut b = b.to_vec();
    project(&mut b);
    project(x);

    let mut r = vec![R::zero(); n];
    a.matvec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    project(&mut r);

    let norm_b = b.iter().fold(R::zero(), |s, &v| s + v * v).sqrt();
    let stop = rel_tol * if norm_b > R::zero() { norm_b } else { R::one() };

    let mut z: Vec<R> = r.iter().zip(&inv_diag).map(|(&ri, &di)| ri * di).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz = r.iter().zip(&z).fold(R::zero(), |s, (&a, &b)| s + a * b);
    let mut ap = vec![R::zero(); n];

    let mut res = r.iter().fold(R::zero(), |s, &v| s + v * v).sqrt();
    if res <= stop {
        return CgOutcome {
            iterations: 0,
            residual: res,
            indefinite: false,
        };
    }

    for it in 1..=max_iter {
        a.matvec(&p, &mut ap);
        project(&mut ap);
        let pap = p.iter().zip(&ap).fold(R::zero(), |s, (&a, &b)| s + a * b);
        if pap <= R::zero() {
            return CgOutcome {
                iterations: it,
                residual: res,
                indefinite: true,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = r.iter().fold(R::zero(), |s, &v| s + v * v).sqrt();
        if res <= stop {
            project(x);
            return CgOutcome {
                iterations: it,
                residual: res,
                indefinite: false,
            };
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        project(&mut z);
        let rz_new = r.iter().zip(&z).fold(R::zero(), |s, (&a, &b)| s + a * b);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    project(x);
    CgOutcome {
        iterations: max_iter,
        residual: res,
        indefinite: false,
    }
}

/// Direct solve of a tridiagonal system (Thomas algorithm).
/// `lower[0]` and `upper[n-1]` are unused.
pub fn solve_tridiagonal<R: Real>(
    lower: &[R],
    diag: &[R],
    upper: &[R],
    rhs: &[R],
) -> Result<Vec<R>> {
    let n = diag.len();
    if n == 0 {
        return Err(Error::Shape("empty tridiagonal system".into()));
    }
    let mut c = vec![R::zero(); n];
    let mut d = vec![R::zero(); n];
    let mut denom = diag[0];
    if denom.abs() < R::of(1e-300) {
        return Err(Error::Coercivity("singular tridiagonal pivot".into()));
    }
    c[0] = upper[0] / denom;
    d[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - lower[i] * c[i - 1];
        if denom.abs() < R::of(1e-300) {
            return Err(Error::Coercivity("singular tridiagonal pivot".into()));
        }
        if i < n - 1 {
            c[i] = upper[i] / denom;
        }
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / denom;
    }
    let mut x = vec![R::zero(); n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_solves_laplacian() {
        // 1-D Dirichlet Laplacian, n interior unknowns
        let n = 50;
        let mut trip: Vec<(usize, usize, f64)> = Vec::new();
        for i in 0..n {
            trip.push((i, i, 2.0));
            if i > 0 {
                trip.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                trip.push((i, i + 1, -1.0));
            }
        }
        let a = Csr::from_triplets(n, &mut trip);
        let b = vec![1.0; n];
        let mut x = vec![0.0; n];
        let out = cg_jacobi(&a, &b, &mut x, 1e-12, 10 * n, false);
        assert!(!out.indefinite);
        let mut ax = vec![0.0; n];
        a.matvec(&x, &mut ax);
        for i in 0..n {
            assert!((ax[i] - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn cg_detects_indefiniteness() {
        let mut trip = vec![(0, 0, -1.0), (1, 1, -1.0)];
        let a = Csr::from_triplets(2, &mut trip);
        let b = vec![1.0, 1.0];
        let mut x = vec![0.0, 0.0];
        let out = cg_jacobi(&a, &b, &mut x, 1e-12, 10, false);
        assert!(out.indefinite);
    }

    #[test]
    fn tridiagonal_matches_dense() {
        let lower: Vec<f64> = vec![0.0, -1.0, -1.0, -1.0];
        let diag: Vec<f64> = vec![2.0, 2.0, 2.0, 2.0];
        let upper: Vec<f64> = vec![-1.0, -1.0, -1.0, 0.0];
        let rhs: Vec<f64> = vec![1.0, 0.0, 0.0, 1.0];
        let x = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        // verify residual
        let n = 4;
        for i in 0..n {
            let mut acc = diag[i] * x[i];
            if i > 0 {
                acc += lower[i] * x[i - 1];
            }
            if i + 1 < n {
                acc += upper[i] * x[i + 1];
            }
            assert!((acc - rhs[i]).abs() < 1e-12);
        }
    }
}
