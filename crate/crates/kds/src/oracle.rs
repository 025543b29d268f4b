//! Slow reference implementations for cross-checking the fast paths.
//!
//! Nothing here calls into the encoder, projection, or spectral code of
//! `kds-core`; only the `Matrix` and `CodeMatrix` containers are shared.
//! Dense linear algebra goes through nalgebra.

use kds_core::{CodeMatrix, Error, Matrix, Result};
use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Iteration cap of [`oracle_encode`].
pub const MAX_ITERATIONS: usize = 1_000_000;

/// Largest `n + m` accepted by [`naive_embedding`].
pub const NAIVE_SIZE_LIMIT: usize = 20_000;

/// Atoms whose degree is at most this are left out of the naive eigenproblem.
const NAIVE_ZERO_DEGREE: f64 = 1e-12;

/// Feasibility slack on the ball constraint of [`solve_program_13`].
pub const BALL_TOL: f64 = 1e-8;

fn to_dmatrix(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(a.rows(), a.cols(), a.as_slice())
}

/// Euclidean projection onto the simplex by bisection on the threshold.
fn bisect_simplex(v: &DVector<f64>) -> DVector<f64> {
    let top = v.max();
    let (mut lo, mut hi) = (top - 1.0, top);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s: f64 = v.iter().map(|x| (x - mid).max(0.0)).sum();
        if s > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    v.map(|x| (x - hi).max(0.0))
}

/// Projection onto the simplex, computed by bisection.
pub fn reference_projection(v: &[f64]) -> Vec<f64> {
    bisect_simplex(&DVector::from_column_slice(v)).as_slice().to_vec()
}

/// Norm of the projection of `-g` onto the tangent cone of the simplex at `x`.
///
/// The cone is `{d : sum(d) = 0, d_i >= 0 where x_i = 0}`; the projection is
/// `d_i = -g_i - mu` on the support and `max(-g_i - mu, 0)` off it, with `mu`
/// found by bisection.
fn tangent_residual(x: &DVector<f64>, g: &DVector<f64>) -> f64 {
    let free: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
    let d_of = |mu: f64| -> Vec<f64> {
        g.iter()
            .zip(&free)
            .map(|(&gi, &f)| if f { -gi - mu } else { (-gi - mu).max(0.0) })
            .collect()
    };
    let (mut lo, mut hi) = (-g.max() - 1.0, -g.min() + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if d_of(mid).iter().sum::<f64>() > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    d_of(0.5 * (lo + hi)).iter().map(|v| v * v).sum::<f64>().sqrt()
}

struct Problem {
    a: DMatrix<f64>,
    y: DVector<f64>,
    /// `lambda * |y - a_j|^2`.
    c: DVector<f64>,
}

impl Problem {
    fn new(a: &Matrix, y: &[f64], lambda: f64) -> Result<Self> {
        if y.len() != a.rows() {
            return Err(Error::DimensionMismatch {
                what: "oracle input",
                expected: a.rows(),
                found: y.len(),
            });
        }
        if a.cols() == 0 {
            return Err(Error::Empty("dictionary"));
        }
        let a = to_dmatrix(a);
        let y = DVector::from_column_slice(y);
        let c = DVector::from_iterator(a.ncols(), a.column_iter().map(|col| lambda * (&y - col).norm_squared()));
        Ok(Problem { a, y, c })
    }

    fn loss(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.y - &self.a * x).norm_squared() + self.c.dot(x)
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.tr_mul(&(&self.a * x - &self.y)) + &self.c
    }

    /// Plain projected gradient from the barycentre with step `sigma_max^-2`.
    fn solve(&self, tol: f64) -> Result<DVector<f64>> {
        let m = self.a.ncols();
        let sigma = self.a.singular_values().max();
        let step = if sigma > 0.0 { 1.0 / (sigma * sigma) } else { 1.0 };
        let mut x = DVector::from_element(m, 1.0 / m as f64);
        let mut f = self.loss(&x);
        for _ in 0..MAX_ITERATIONS {
            let g = self.grad(&x);
            let next = bisect_simplex(&(&x - step * &g));
            let f_next = self.loss(&next);
            // The step is always taken: near the minimum the loss is flat to
            // rounding while the iterates still converge.
            let decrease = f - f_next;
            x = next;
            f = f_next;
            if decrease < tol * f.abs().max(1.0) && tangent_residual(&x, &self.grad(&x)) < tol {
                return Ok(x);
            }
        }
        Err(Error::NotConverged(MAX_ITERATIONS))
    }
}

/// High-precision minimizer of `1/2|y - Ax|^2 + lambda sum_j x_j |y - a_j|^2`
/// over the simplex.
pub fn oracle_encode(a: &Matrix, y: &[f64], lambda: f64, tol: f64) -> Result<Vec<f64>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tol must be > 0, got {tol}")));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(Problem::new(a, y, lambda)?.solve(tol)?.as_slice().to_vec())
}

/// The objective [`oracle_encode`] minimizes, evaluated independently.
pub fn oracle_loss(a: &Matrix, y: &[f64], x: &[f64], lambda: f64) -> Result<f64> {
    let p = Problem::new(a, y, lambda)?;
    Ok(p.loss(&DVector::from_column_slice(x)))
}

/// Central differences, one coordinate at a time.
pub fn finite_diff_grad<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidParameter(format!("h must be > 0, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut out = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let up = f(&probe);
        probe[i] = x[i] - h;
        let dn = f(&probe);
        probe[i] = x[i];
        out.push((up - dn) / (2.0 * h));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct NaiveEmbedding {
    /// `k x m`; columns of zero-degree atoms are zero.
    pub atoms: Matrix,
    /// `k x n`.
    pub data: Matrix,
    pub eigenvalues: Vec<f64>,
    /// The reduced Laplacian on the kept atoms.
    pub reduced: Matrix,
    pub kept_atoms: Vec<usize>,
    /// `tr(Q L Q^T)` with the full `(n+m) x (n+m)` Laplacian, `Q = [Q_Y, Q_A]`.
    pub full_trace: f64,
}

/// The full bipartite Laplacian, points first then atoms.
pub fn full_laplacian(codes: &CodeMatrix) -> Result<DMatrix<f64>> {
    let (m, n) = (codes.rows(), codes.cols());
    if n + m > NAIVE_SIZE_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "naive embedding needs n + m <= {NAIVE_SIZE_LIMIT}, got {}",
            n + m
        )));
    }
    let mut w = DMatrix::zeros(n + m, n + m);
    for (j, i, v) in codes.triplets() {
        w[(i, n + j)] = v;
        w[(n + j, i)] = v;
    }
    let mut l = -w;
    for r in 0..n + m {
        let deg: f64 = -(0..n + m).map(|c| l[(r, c)]).sum::<f64>();
        l[(r, r)] = deg;
    }
    Ok(l)
}

/// `tr(Q L Q^T)` for the full Laplacian and `Q = [q_data, q_atoms]`.
pub fn full_energy(codes: &CodeMatrix, q_data: &Matrix, q_atoms: &Matrix) -> Result<f64> {
    let l = full_laplacian(codes)?;
    let q = to_dmatrix(&q_data.hstack(q_atoms)?);
    Ok((&q * l * q.transpose()).trace())
}

/// The harmonic embedding computed the long way: full Laplacian, explicit
/// Schur complement onto the atom block, dense eigensolve, harmonic extension.
pub fn naive_embedding(codes: &CodeMatrix, k: usize) -> Result<NaiveEmbedding> {
    let (m, n) = (codes.rows(), codes.cols());
    let l = full_laplacian(codes)?;
    let deg_y: Vec<f64> = (0..n).map(|i| l[(i, i)]).collect();
    if let Some(i) = deg_y.iter().position(|&d| d <= 0.0) {
        return Err(Error::Degenerate(format!("point {i} has no edges")));
    }
    let kept: Vec<usize> = (0..m).filter(|&j| l[(n + j, n + j)] > NAIVE_ZERO_DEGREE).collect();
    let mk = kept.len();
    if k == 0 || k > mk {
        return Err(Error::InvalidParameter(format!("k = {k} with {mk} atoms in the graph")));
    }
    // S = L_AA - L_AY L_YY^-1 L_YA on the kept atoms.
    let mut s = DMatrix::zeros(mk, mk);
    for (a, &ja) in kept.iter().enumerate() {
        for (b, &jb) in kept.iter().enumerate() {
            let mut v = l[(n + ja, n + jb)];
            for (i, d) in deg_y.iter().enumerate() {
                v -= l[(n + ja, i)] * l[(i, n + jb)] / d;
            }
            s[(a, b)] = v;
        }
    }
    let eig = SymmetricEigen::new(s.clone());
    let mut order: Vec<usize> = (0..mk).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut q_atoms = DMatrix::zeros(k, m);
    for (r, &c) in order.iter().take(k).enumerate() {
        for (a, &j) in kept.iter().enumerate() {
            q_atoms[(r, j)] = eig.eigenvectors[(a, c)];
        }
    }
    // Q_Y = -Q_A L_AY L_YY^-1.
    let mut q_data = DMatrix::zeros(k, n);
    for i in 0..n {
        for r in 0..k {
            q_data[(r, i)] = -(0..m).map(|j| q_atoms[(r, j)] * l[(n + j, i)]).sum::<f64>() / deg_y[i];
        }
    }
    let mut q = DMatrix::zeros(k, n + m);
    q.columns_mut(0, n).copy_from(&q_data);
    q.columns_mut(n, m).copy_from(&q_atoms);
    let full_trace = (&q * &l * q.transpose()).trace();
    let back = |d: &DMatrix<f64>| Matrix::from_col_major(d.nrows(), d.ncols(), d.as_slice().to_vec());
    Ok(NaiveEmbedding {
        atoms: back(&q_atoms)?,
        data: back(&q_data)?,
        eigenvalues: order.iter().take(k).map(|&c| eig.eigenvalues[c]).collect(),
        reduced: back(&s)?,
        kept_atoms: kept,
        full_trace,
    })
}

/// Groups columns that coincide to within `tol`; returns a group id per column,
/// numbered by first appearance.
pub fn coincidence_partition(points: &Matrix, tol: f64) -> Vec<usize> {
    let mut reps: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(points.cols());
    for i in 0..points.cols() {
        let p = points.col(i);
        let hit = reps.iter().position(|&r| {
            points.col(r).iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() <= tol
        });
        match hit {
            Some(g) => out.push(g),
            None => {
                reps.push(i);
                out.push(reps.len() - 1);
            }
        }
    }
    out
}

/// `(Delta1, Delta2) = (max_j |y - a_j|^2, min_j |y - a'_j|^2)`.
pub fn theorem2_deltas(a_part: &Matrix, a_prime: &Matrix, y: &[f64]) -> Result<(f64, f64)> {
    if a_part.cols() == 0 || a_prime.cols() == 0 {
        return Err(Error::Empty("dictionary part"));
    }
    for part in [a_part, a_prime] {
        if part.rows() != y.len() {
            return Err(Error::DimensionMismatch {
                what: "dictionary part",
                expected: y.len(),
                found: part.rows(),
            });
        }
    }
    let sq = |c: &[f64]| c.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let d1 = a_part.columns().map(sq).fold(f64::NEG_INFINITY, f64::max);
    let d2 = a_prime.columns().map(sq).fold(f64::INFINITY, f64::min);
    Ok((d1, d2))
}

/// Largest dictionary accepted by [`solve_program_13`].
pub const ENUMERATION_LIMIT: usize = 12;

/// `min 1/2 x^T H x + q^T x` over the simplex, by enumerating supports in
/// order of size and returning the first KKT point (the problem is convex).
///
/// On a support `S` the stationarity conditions `H_SS x_S + q_S = nu 1`,
/// `sum x_S = 1` are solved directly; the point is accepted when `x_S >= 0`
/// and every gradient entry off `S` is at least `nu`.
fn enumerate_simplex_qp(h: &DMatrix<f64>, q: &DVector<f64>) -> Result<DVector<f64>> {
    let m = q.len();
    let scale = 1.0 + h.amax() + q.amax();
    let mut masks: Vec<u32> = (1..(1u32 << m)).collect();
    masks.sort_by_key(|s| (s.count_ones(), *s));
    for mask in masks {
        let support: Vec<usize> = (0..m).filter(|&j| mask & (1 << j) != 0).collect();
        let s = support.len();
        let mut k = DMatrix::zeros(s + 1, s + 1);
        let mut rhs = DVector::zeros(s + 1);
        for (a, &ja) in support.iter().enumerate() {
            for (b, &jb) in support.iter().enumerate() {
                k[(a, b)] = h[(ja, jb)];
            }
            k[(a, s)] = -1.0;
            k[(s, a)] = 1.0;
            rhs[a] = -q[ja];
        }
        rhs[s] = 1.0;
        let Some(z) = k.clone().lu().solve(&rhs) else {
            continue;
        };
        if (&k * &z - &rhs).amax() > 1e-10 * scale || z.rows(0, s).iter().any(|&v| v < -1e-12) {
            continue;
        }
        let nu = z[s];
        let mut x = DVector::zeros(m);
        for (a, &j) in support.iter().enumerate() {
            x[j] = z[a].max(0.0);
        }
        x /= x.sum();
        let g = h * &x + q;
        if (0..m).all(|j| mask & (1 << j) != 0 || g[j] >= nu - 1e-9 * scale) {
            return Ok(x);
        }
    }
    Err(Error::Degenerate("no support satisfies the optimality conditions".into()))
}

/// `min sum_j x_j |y - d_j|^2` over the simplex subject to `|y - D x| <= epsilon`.
///
/// The first `parts.0` columns of `dict` are the `A` atoms and the remaining
/// `parts.1` the `A'` atoms; the split is only validated here. The program is
/// convex and is solved through its one-dimensional Lagrangian dual: for a
/// multiplier `mu` the inner problem `c.x + mu |y - Dx|^2` over the simplex is
/// solved exactly by support enumeration, and `mu` is bisected geometrically
/// until the ball constraint holds with equality to within the bracket.
pub fn solve_program_13(dict: &Matrix, y: &[f64], epsilon: f64, parts: (usize, usize)) -> Result<Vec<f64>> {
    if !(epsilon >= 0.0) {
        return Err(Error::InvalidParameter(format!("epsilon must be >= 0, got {epsilon}")));
    }
    if parts.0 + parts.1 != dict.cols() {
        return Err(Error::DimensionMismatch {
            what: "part sizes",
            expected: dict.cols(),
            found: parts.0 + parts.1,
        });
    }
    if dict.cols() > ENUMERATION_LIMIT {
        return Err(Error::InvalidParameter(format!(
            "support enumeration needs at most {ENUMERATION_LIMIT} atoms, got {}",
            dict.cols()
        )));
    }
    let base = Problem::new(dict, y, 1.0)?;
    let resid = |x: &DVector<f64>| (&base.y - &base.a * x).norm();
    let gram = base.a.tr_mul(&base.a);
    let aty = base.a.tr_mul(&base.y);
    let best = enumerate_simplex_qp(&gram, &(-&aty))?;
    if resid(&best) > epsilon + BALL_TOL {
        return Err(Error::Infeasible(format!(
            "closest simplex code is {} from y, epsilon = {epsilon}",
            resid(&best)
        )));
    }
    // Constraint inactive: all mass on the nearest atom.
    let nearest = (0..dict.cols()).fold(0, |b, j| if base.c[j] < base.c[b] { j } else { b });
    let mut vertex = DVector::zeros(dict.cols());
    vertex[nearest] = 1.0;
    if resid(&vertex) <= epsilon {
        return Ok(vertex.as_slice().to_vec());
    }
    // (c.x + mu |y - Dx|^2) / (2 mu) = 1/2 x^T D^T D x + (c / (2 mu) - D^T y).x + const.
    let inner = |mu: f64| enumerate_simplex_qp(&gram, &(&base.c / (2.0 * mu) - &aty));
    let mut hi = 1.0;
    let mut x_hi = inner(hi)?;
    let mut lo = 0.0;
    while resid(&x_hi) > epsilon {
        lo = hi;
        hi *= 4.0;
        if hi > 1e12 {
            return Ok(best.as_slice().to_vec());
        }
        x_hi = inner(hi)?;
    }
    for _ in 0..200 {
        let mid = if lo == 0.0 { 0.5 * hi } else { (lo * hi).sqrt() };
        if mid <= lo || mid >= hi || (hi - lo) <= 1e-12 * hi {
            break;
        }
        let x = inner(mid)?;
        if resid(&x) > epsilon {
            lo = mid;
        } else {
            hi = mid;
            x_hi = x;
        }
    }
    Ok(x_hi.as_slice().to_vec())
}

/// Objective of [`solve_program_13`] evaluated independently.
pub fn program_13_objective(dict: &Matrix, y: &[f64], x: &[f64]) -> Result<f64> {
    let p = Problem::new(dict, y, 1.0)?;
    Ok(p.c.dot(&DVector::from_column_slice(x)))
}
