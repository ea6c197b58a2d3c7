//! Exact-cancellation minimal realization via staircase subspace
//! extraction: the controllable subspace is grown one orthogonal block at a
//! time (SVD rank decisions against `tol * scale`), then the observable
//! subspace is extracted from the dual system.

use nalgebra::{DMatrix, DVector};

use super::StateSpaceModel;
use crate::error::{Error, Result};

impl StateSpaceModel {
    /// Removes uncontrollable and unobservable state directions.
    ///
    /// The returned order never exceeds the original; Markov parameters are
    /// preserved to `tol` (the reduction is a restriction to invariant
    /// subspaces, exact up to the rank decisions). Applying the operation
    /// twice at the same `tol` leaves the order unchanged.
    pub fn minimal_realization(&self, tol: f64) -> Result<StateSpaceModel> {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(Error::InvalidTolerance(tol));
        }
        let (a1, b1, c1) = controllable_part(&self.a, &self.b, &self.c, tol);
        let (a2t, c2t, b2t) =
            controllable_part(&a1.transpose(), &c1.transpose(), &b1.transpose(), tol);
        let reduced = StateSpaceModel::new(
            a2t.transpose(),
            b2t.transpose(),
            c2t.transpose(),
            self.d.clone(),
        )?;
        let inputs: Vec<&str> = self.input_labels.iter().map(|s| s.as_str()).collect();
        let outputs: Vec<&str> = self.output_labels.iter().map(|s| s.as_str()).collect();
        reduced.with_labels(&inputs, &outputs)
    }
}

/// Restricts `(A, B, C)` to the controllable subspace. Returns the system
/// unchanged when it is already controllable at this tolerance.
fn controllable_part(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    tol: f64,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    if n == 0 {
        return (a.clone(), b.clone(), c.clone());
    }
    let threshold = tol * a.norm().max(b.norm()).max(1.0);

    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut frontier = new_directions(b.clone(), &basis, threshold);
    while !frontier.is_empty() && basis.len() < n {
        let frontier_mat = DMatrix::from_columns(&frontier);
        basis.extend(frontier);
        if basis.len() >= n {
            break;
        }
        frontier = new_directions(a * frontier_mat, &basis, threshold);
    }

    let nc = basis.len();
    if nc == n {
        return (a.clone(), b.clone(), c.clone());
    }
    if nc == 0 {
        return (
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, b.ncols()),
            DMatrix::zeros(c.nrows(), 0),
        );
    }
    let q = DMatrix::from_columns(&basis);
    (q.transpose() * a * &q, q.transpose() * b, c * &q)
}

/// Orthonormal basis of the part of `range(z)` not already captured by
/// `basis`. Directions with singular value at or below `threshold` are
/// dropped.
fn new_directions(
    mut z: DMatrix<f64>,
    basis: &[DVector<f64>],
    threshold: f64,
) -> Vec<DVector<f64>> {
    if z.ncols() == 0 {
        return Vec::new();
    }
    // Two projection sweeps keep the new block orthogonal to the existing
    // subspace even when the raw columns are nearly contained in it.
    for _ in 0..2 {
        for q in basis {
            let coeffs = q.transpose() * &z;
            z -= q * coeffs;
        }
    }
    let svd = z.svd(true, false);
    let u = match svd.u {
        Some(u) => u,
        None => return Vec::new(),
    };
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&i, &j| sv[j].partial_cmp(&sv[i]).unwrap());
    order
        .into_iter()
        .take_while(|&i| sv[i] > threshold)
        .map(|i| u.column(i).into_owned())
        .collect()
}
