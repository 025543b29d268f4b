//! Euclidean projection onto the probability simplex and its vector-Jacobian
//! product.
//!
//! The projection has the form `max(v + b(v), 0)` for a scalar shift `b(v)`
//! found by pruning. It is the activation of the unrolled encoder.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, check_finite, Error, Result};
use crate::SIMPLEX_TOL;

/// Reusable buffers for [`project_into`].
#[derive(Debug, Default, Clone)]
pub struct ProjectionScratch {
    order: Vec<usize>,
}

/// Projects `v` onto `{x : x >= 0, sum(x) = 1}`.
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::Empty("simplex projection input"));
    }
    check_finite("simplex projection input", v)?;
    let mut out = vec![0.0; v.len()];
    project_into(v, &mut out, &mut ProjectionScratch::default());
    Ok(out)
}

/// Unchecked projection into a caller-provided buffer; returns the shift `b`
/// so that `out = max(v + b, 0)`.
///
/// The threshold is found by Michelot's iteration: average the candidates,
/// drop those at or below the average, repeat until nothing is dropped.
/// Candidates are always visited in index order, so the result does not
/// depend on anything but `v`.
pub fn project_into(v: &[f64], out: &mut [f64], scratch: &mut ProjectionScratch) -> f64 {
    debug_assert_eq!(v.len(), out.len());
    // Work relative to the largest entry so that the running sums stay near
    // unit scale whatever the magnitude of v.
    let top = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    // The threshold is at least top - 1, so entries at or below it never
    // make the support. The largest entry always survives: tau < 0.
    let cand = &mut scratch.order;
    cand.clear();
    cand.extend((0..v.len()).filter(|&j| v[j] - top > -1.0));
    let tau = loop {
        let sum: f64 = cand.iter().map(|&j| v[j] - top).sum();
        let tau = (sum - 1.0) / cand.len() as f64;
        let before = cand.len();
        cand.retain(|&j| v[j] - top > tau);
        if cand.len() == before {
            break tau;
        }
    };
    for (o, &x) in out.iter_mut().zip(v) {
        *o = ((x - top) - tau).max(0.0);
    }
    -(top + tau)
}

/// `J^T g` for the projection Jacobian `J` at `v`.
///
/// With `A = {i : P(v)_i > 0}`, `J` is `I - 11^T/|A|` on `A` and zero
/// elsewhere. At points where some output coordinate is exactly zero this is
/// one element of the generalized Jacobian.
pub fn projection_vjp(v: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    check_dim("projection vjp cotangent", v.len(), g.len())?;
    let p = project_simplex(v)?;
    let active: Vec<bool> = p.iter().map(|&x| x > 0.0).collect();
    let mut out = vec![0.0; v.len()];
    active_set_vjp(&active, g, &mut out);
    Ok(out)
}

/// Applies the centering Jacobian of a known active set.
#[inline]
pub(crate) fn active_set_vjp(active: &[bool], g: &[f64], out: &mut [f64]) {
    let mut count = 0usize;
    let mut sum = 0.0;
    for (&a, &gi) in active.iter().zip(g) {
        if a {
            count += 1;
            sum += gi;
        }
    }
    let mean = if count > 0 { sum / count as f64 } else { 0.0 };
    for ((o, &a), &gi) in out.iter_mut().zip(active).zip(g) {
        *o = if a { gi - mean } else { 0.0 };
    }
}

/// True if `x` is nonnegative (to `-neg_tol`) and sums to one within
/// [`SIMPLEX_TOL`].
pub fn is_on_simplex(x: &[f64], neg_tol: f64) -> bool {
    !x.is_empty()
        && x.iter().all(|&v| v.is_finite() && v >= -neg_tol)
        && (x.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn point_on_simplex_is_fixed() {
        let p = project_simplex(&[0.2, 0.8]).unwrap();
        assert!(close(&p, &[0.2, 0.8], 1e-15));
    }

    #[test]
    fn symmetric_input_goes_to_barycenter() {
        let p = project_simplex(&[5.0, 5.0, 5.0]).unwrap();
        assert!(close(&p, &[1.0 / 3.0; 3], 1e-15));
    }

    #[test]
    fn boundary_example() {
        let p = project_simplex(&[0.5, 0.3, -0.1]).unwrap();
        assert!(close(&p, &[0.6, 0.4, 0.0], 1e-15), "{p:?}");
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(
            project_simplex(&[]),
            Err(Error::Empty("simplex projection input"))
        );
        assert!(matches!(
            project_simplex(&[1.0, f64::NAN]),
            Err(Error::InvalidInput(_))
        ));
        assert!(project_simplex(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn single_coordinate() {
        assert_eq!(project_simplex(&[-7.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn vjp_examples() {
        let r = projection_vjp(&[5.0, 5.0, 5.0], &[1.0, 0.0, 0.0]).unwrap();
        assert!(close(&r, &[2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0], 1e-15));
        let r = projection_vjp(&[0.5, 0.3, -0.1], &[1.0, 1.0, 1.0]).unwrap();
        assert!(close(&r, &[0.0, 0.0, 0.0], 1e-15));
        let r = projection_vjp(&[0.5, 0.3, -0.1], &[1.0, 0.0, 0.0]).unwrap();
        assert!(close(&r, &[0.5, -0.5, 0.0], 1e-15));
        assert!(projection_vjp(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn ties_do_not_depend_on_position() {
        let a = project_simplex(&[0.4, 0.4, 0.4, -3.0]).unwrap();
        let b = project_simplex(&[-3.0, 0.4, 0.4, 0.4]).unwrap();
        assert_eq!(a[..3], b[1..]);
        assert_eq!(a[3], 0.0);
    }
}
