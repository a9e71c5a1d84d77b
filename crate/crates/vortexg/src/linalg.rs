//! Shared linear-algebra backends: a dense SPD solver with one step of
//! iterative refinement, and a Jacobi-preconditioned conjugate gradient
//! for instances too large to factor densely.

use nalgebra::{DMatrix, DVector};

/// Dense symmetric positive definite solver (Cholesky, kept together with
/// the original matrix so solves can be refined once in working precision).
pub(crate) struct SpdSolver {
    matrix: DMatrix<f64>,
    factor: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl SpdSolver {
    /// Returns `None` when the matrix is not numerically positive definite.
    pub fn new(matrix: DMatrix<f64>) -> Option<Self> {
        let factor = matrix.clone().cholesky()?;
        Some(Self { matrix, factor })
    }

    /// Solve `A x = b` with one iterative-refinement pass.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.factor.solve(b);
        let r = b - &self.matrix * &x;
        x += self.factor.solve(&r);
        x
    }
}

/// Jacobi-preconditioned conjugate gradient for SPD (or consistent positive
/// semidefinite) systems, matrix-free.
///
/// Stops when `||r||_2 <= rel_tol * ||b||_2`. Returns `Err` with a message
/// when the iteration budget is exhausted.
pub(crate) fn pcg<A>(
    apply: A,
    diag: &[f64],
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, String>
where
    A: Fn(&[f64]) -> Vec<f64>,
{
    let n = b.len();
    let norm_b = norm2(b);
    if norm_b == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let tol = rel_tol * norm_b;

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);

    for _ in 0..max_iter {
        if norm2(&r) <= tol {
            return Ok(x);
        }
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err("conjugate gradient hit a non-positive curvature direction".into());
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    if norm2(&r) <= tol {
        Ok(x)
    } else {
        Err(format!(
            "conjugate gradient did not reach relative residual {rel_tol:.1e} in {max_iter} iterations"
        ))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
