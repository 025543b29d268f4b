//! The simplex-regularized loss, its gradient in the code, and the unrolled
//! accelerated projected-gradient encoder.
//!
//! For atoms `A = [a_1 .. a_m]`, a point `y` and a code `x` on the simplex the
//! loss is
//!
//! ```text
//! L(A, y, x) = 1/2 |y - A x|^2 + lambda * sum_j x_j |y - a_j|^2
//! ```
//!
//! and `+inf` off the simplex. The encoder starts from `x = x~ = 0` and runs
//! exactly `T` steps of
//!
//! ```text
//! x(t+1) = P(x~(t) - alpha * grad L(x~(t)))
//! x~(t+1) = x(t+1) + gamma(t) * (x(t+1) - x(t))
//! ```
//!
//! where `P` is the simplex projection and `gamma` follows the momentum
//! recurrence selected by [`Momentum`].

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, check_finite, Error, Result};
use crate::linalg::{axpy, dot, sq_dist, spectral_norm, Matrix};
use crate::simplex::{active_set_vjp, project_into, ProjectionScratch};
use crate::SIMPLEX_TOL;

/// Relative tolerance of the power iteration behind [`default_step_size`].
pub const STEP_SIZE_REL_TOL: f64 = 1e-8;

/// Momentum recurrence for the accelerated iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Momentum {
    /// `eta(t+1) = (1 + sqrt(1 + 4 eta(t)^2)) / 2`, the usual accelerated
    /// gradient sequence.
    #[default]
    Standard,
    /// `eta(t+1) = (1 + sqrt(1 + 4 eta(t))) / 2`. Kept for comparison runs;
    /// `gamma` then tends to 1/2 instead of 1.
    Printed,
}

/// Encoder step size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    /// `sigma_max(A)^-2`, recomputed whenever the atoms change.
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderParams {
    pub lambda: f64,
    /// Number of unrolled iterations `T`.
    pub iterations: usize,
    pub step: StepSize,
    /// Train the step size alongside the atoms.
    pub learn_alpha: bool,
    pub momentum: Momentum,
}

impl Default for EncoderParams {
    fn default() -> Self {
        EncoderParams {
            lambda: 5.0,
            iterations: 15,
            step: StepSize::Auto,
            learn_alpha: false,
            momentum: Momentum::Standard,
        }
    }
}

impl EncoderParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "lambda must be finite and >= 0, got {}",
                self.lambda
            )));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidParameter("T must be at least 1".into()));
        }
        if let StepSize::Fixed(a) = self.step {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter(alloc::format!(
                    "step size must be finite and > 0, got {a}"
                )));
            }
        }
        Ok(())
    }
}

/// `eta(0..=T)` and `gamma(0..T)` of the momentum recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumSchedule {
    pub eta: Vec<f64>,
    pub gamma: Vec<f64>,
}

pub fn momentum_schedule(iterations: usize, kind: Momentum) -> MomentumSchedule {
    let mut eta = Vec::with_capacity(iterations + 1);
    eta.push(0.0);
    for t in 0..iterations {
        let e = eta[t];
        let inner = match kind {
            Momentum::Standard => 1.0 + 4.0 * e * e,
            Momentum::Printed => 1.0 + 4.0 * e,
        };
        eta.push((1.0 + libm::sqrt(inner)) / 2.0);
    }
    let gamma = (0..iterations).map(|t| (eta[t] - 1.0) / eta[t + 1]).collect();
    MomentumSchedule { eta, gamma }
}

fn check_problem(atoms: &Matrix, y: &[f64], x: Option<&[f64]>) -> Result<()> {
    if atoms.cols() == 0 || atoms.rows() == 0 {
        return Err(Error::Empty("dictionary"));
    }
    check_dim("data point dimension", atoms.rows(), y.len())?;
    if let Some(x) = x {
        check_dim("code length", atoms.cols(), x.len())?;
    }
    Ok(())
}

/// Squared distances `|y - a_j|^2` for every atom.
pub fn atom_distances(atoms: &Matrix, y: &[f64]) -> Vec<f64> {
    atoms.columns().map(|a| sq_dist(a, y)).collect()
}

/// The loss at `x`, or `+inf` when `x` is off the simplex (tolerance 1e-9).
pub fn loss(atoms: &Matrix, y: &[f64], x: &[f64], lambda: f64) -> Result<f64> {
    check_problem(atoms, y, Some(x))?;
    let on_simplex = x.iter().all(|&v| v >= -SIMPLEX_TOL)
        && (x.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL;
    if !on_simplex {
        return Ok(f64::INFINITY);
    }
    Ok(smooth_loss(atoms, y, x, lambda))
}

/// The loss formula without the simplex indicator.
pub fn smooth_loss(atoms: &Matrix, y: &[f64], x: &[f64], lambda: f64) -> f64 {
    let mut r = vec![0.0; y.len()];
    atoms.mul_vec_into(x, &mut r);
    let rec: f64 = r.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    let reg: f64 = x
        .iter()
        .zip(atoms.columns())
        .map(|(&xj, a)| if xj != 0.0 { xj * sq_dist(a, y) } else { 0.0 })
        .sum();
    0.5 * rec + lambda * reg
}

/// `A^T (A x - y) + lambda * (|y - a_j|^2)_j`; `x` need not be on the simplex.
pub fn loss_grad_x(atoms: &Matrix, y: &[f64], x: &[f64], lambda: f64) -> Result<Vec<f64>> {
    check_problem(atoms, y, Some(x))?;
    let mut r = vec![0.0; y.len()];
    atoms.mul_vec_into(x, &mut r);
    r.iter_mut().zip(y).for_each(|(ri, yi)| *ri -= yi);
    Ok(atoms
        .columns()
        .map(|a| dot(a, &r) + lambda * sq_dist(a, y))
        .collect())
}

/// `sigma_max(A)^-2`.
pub fn default_step_size(atoms: &Matrix) -> Result<f64> {
    let s = spectral_norm(atoms, STEP_SIZE_REL_TOL)?;
    Ok(1.0 / (s * s))
}

/// Pairs of atoms closer than `1e-12`.
pub fn duplicate_atoms(atoms: &Matrix) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for i in 0..atoms.cols() {
        for j in (i + 1)..atoms.cols() {
            if libm::sqrt(sq_dist(atoms.col(i), atoms.col(j))) < 1e-12 {
                out.push((i, j));
            }
        }
    }
    out
}

/// Recorded state of one unrolled encoder pass.
///
/// Iteration `t` (0-based) stores `x(t)`, `x~(t)`, the pre-projection vector
/// `z(t) = x~(t) - alpha * grad`, and the active set of `P(z(t)) = x(t+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderTape {
    dim: usize,
    atoms: usize,
    lambda: f64,
    alpha: f64,
    gamma: Vec<f64>,
    /// `x(0..=T)`, row-major by iteration.
    xs: Vec<f64>,
    /// `x~(0..T)`.
    x_tildes: Vec<f64>,
    /// `z(0..T)`.
    pre: Vec<f64>,
    /// Active sets of `x(1..=T)`.
    active: Vec<bool>,
}

impl EncoderTape {
    /// Number of recorded iterations, `T`.
    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    /// `(d, m)` of the problem the tape was recorded on.
    pub fn shape(&self) -> (usize, usize) {
        (self.dim, self.atoms)
    }

    /// `x(t)` for `t` in `0..=T`.
    pub fn x(&self, t: usize) -> &[f64] {
        &self.xs[t * self.atoms..(t + 1) * self.atoms]
    }

    /// `x~(t)` for `t` in `0..T`.
    pub fn x_tilde(&self, t: usize) -> &[f64] {
        &self.x_tildes[t * self.atoms..(t + 1) * self.atoms]
    }

    /// Pre-projection input of iteration `t`.
    pub fn pre_projection(&self, t: usize) -> &[f64] {
        &self.pre[t * self.atoms..(t + 1) * self.atoms]
    }

    pub fn active_set(&self, t: usize) -> &[bool] {
        &self.active[t * self.atoms..(t + 1) * self.atoms]
    }

    /// The encoder output `x(T)`.
    pub fn output(&self) -> &[f64] {
        self.x(self.len())
    }
}

/// Scratch buffers reused across points.
#[derive(Debug, Default, Clone)]
pub struct Workspace {
    r: Vec<f64>,
    z: Vec<f64>,
    x_prev: Vec<f64>,
    x_next: Vec<f64>,
    x_tilde: Vec<f64>,
    dist: Vec<f64>,
    u: Vec<f64>,
    au: Vec<f64>,
    bar_x: Vec<f64>,
    bar_x_tilde: Vec<f64>,
    carry: Vec<f64>,
    bar_w: Vec<f64>,
    g: Vec<f64>,
    /// Gradient contribution of one point, `d x m` row-major.
    grad_t: Vec<f64>,
    proj: ProjectionScratch,
}

impl Workspace {
    fn prepare(&mut self, d: usize, m: usize) {
        for v in [
            &mut self.z,
            &mut self.x_prev,
            &mut self.x_next,
            &mut self.x_tilde,
            &mut self.dist,
            &mut self.u,
            &mut self.bar_x,
            &mut self.bar_x_tilde,
            &mut self.carry,
            &mut self.bar_w,
            &mut self.g,
        ] {
            v.clear();
            v.resize(m, 0.0);
        }
        for v in [&mut self.r, &mut self.au] {
            v.clear();
            v.resize(d, 0.0);
        }
        self.grad_t.clear();
        self.grad_t.resize(d * m, 0.0);
    }
}

/// An encoder bound to a fixed dictionary, step size and momentum schedule.
#[derive(Debug, Clone)]
pub struct Encoder<'a> {
    atoms: &'a Matrix,
    /// The atoms again, row-major, so inner loops run over `m` rather than `d`.
    rows: Vec<f64>,
    lambda: f64,
    alpha: f64,
    gamma: Vec<f64>,
}

/// Loss and step-size derivative produced by a backward pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BackwardStats {
    pub loss: f64,
    pub d_alpha: f64,
}

impl<'a> Encoder<'a> {
    pub fn new(atoms: &'a Matrix, params: &EncoderParams) -> Result<Self> {
        params.validate()?;
        if atoms.cols() == 0 || atoms.rows() == 0 {
            return Err(Error::Empty("dictionary"));
        }
        atoms.check_finite("dictionary")?;
        let alpha = match params.step {
            StepSize::Auto => default_step_size(atoms)?,
            StepSize::Fixed(a) => a,
        };
        Ok(Self::with_alpha(atoms, params, alpha))
    }

    /// Like [`Encoder::new`] with an explicit step size, skipping validation.
    pub(crate) fn with_alpha(atoms: &'a Matrix, params: &EncoderParams, alpha: f64) -> Self {
        Encoder {
            atoms,
            rows: atoms.transpose().as_slice().to_vec(),
            lambda: params.lambda,
            alpha,
            gamma: momentum_schedule(params.iterations, params.momentum).gamma,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.cols()
    }

    pub fn iterations(&self) -> usize {
        self.gamma.len()
    }

    /// `out = A x`.
    fn mul(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in out.iter_mut().zip(self.rows.chunks_exact(x.len())) {
            *o = dot(row, x);
        }
    }

    /// `out = A^T v`.
    fn tr_mul(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (&vi, row) in v.iter().zip(self.rows.chunks_exact(out.len())) {
            axpy(vi, row, out);
        }
    }

    /// `out = A x - y`.
    fn residual(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.mul(x, out);
        out.iter_mut().zip(y).for_each(|(o, yi)| *o -= yi);
    }

    /// `dist_j = |y - a_j|^2`.
    fn distances(&self, y: &[f64], dist: &mut [f64]) {
        dist.iter_mut().for_each(|w| *w = 0.0);
        for (&yi, row) in y.iter().zip(self.rows.chunks_exact(dist.len())) {
            for (w, &a) in dist.iter_mut().zip(row) {
                *w += (a - yi) * (a - yi);
            }
        }
    }

    fn check_point(&self, y: &[f64]) -> Result<()> {
        check_dim("data point dimension", self.atoms.rows(), y.len())?;
        check_finite("data point", y)
    }

    /// Runs the encoder and records a tape.
    pub fn encode(&self, y: &[f64], ws: &mut Workspace) -> Result<EncoderTape> {
        self.check_point(y)?;
        Ok(self.run(y, ws, true).expect("tape requested"))
    }

    /// Runs the encoder without recording; the code is written to `out`.
    pub fn encode_code(&self, y: &[f64], ws: &mut Workspace, out: &mut [f64]) -> Result<()> {
        self.check_point(y)?;
        check_dim("code length", self.atoms.cols(), out.len())?;
        self.run(y, ws, false);
        out.copy_from_slice(&ws.x_prev);
        Ok(())
    }

    fn run(&self, y: &[f64], ws: &mut Workspace, record: bool) -> Option<EncoderTape> {
        let a = self.atoms;
        let (d, m) = (a.rows(), a.cols());
        let steps = self.gamma.len();
        ws.prepare(d, m);
        self.distances(y, &mut ws.dist);

        let mut tape = record.then(|| EncoderTape {
            dim: d,
            atoms: m,
            lambda: self.lambda,
            alpha: self.alpha,
            gamma: self.gamma.clone(),
            xs: Vec::with_capacity((steps + 1) * m),
            x_tildes: Vec::with_capacity(steps * m),
            pre: Vec::with_capacity(steps * m),
            active: Vec::with_capacity(steps * m),
        });
        if let Some(tape) = tape.as_mut() {
            tape.xs.extend_from_slice(&ws.x_prev);
        }

        for t in 0..steps {
            self.residual(&ws.x_tilde, y, &mut ws.r);
            self.tr_mul(&ws.r, &mut ws.g);
            for j in 0..m {
                let g = ws.g[j] + self.lambda * ws.dist[j];
                ws.z[j] = ws.x_tilde[j] - self.alpha * g;
            }
            project_into(&ws.z, &mut ws.x_next, &mut ws.proj);

            if let Some(tape) = tape.as_mut() {
                tape.x_tildes.extend_from_slice(&ws.x_tilde);
                tape.pre.extend_from_slice(&ws.z);
                tape.active.extend(ws.x_next.iter().map(|&v| v > 0.0));
                tape.xs.extend_from_slice(&ws.x_next);
            }

            let gamma = self.gamma[t];
            for j in 0..m {
                ws.x_tilde[j] = ws.x_next[j] + gamma * (ws.x_next[j] - ws.x_prev[j]);
            }
            core::mem::swap(&mut ws.x_prev, &mut ws.x_next);
        }
        tape
    }

    /// Adds `dL(A, y, x(T)(A, y)) / dA` to `grad` and returns the loss at
    /// `x(T)` together with `dL/dalpha`.
    ///
    /// The derivative runs through the decoder and every unrolled iteration,
    /// including the `|y - a_j|^2` weights. The step size is held constant.
    pub fn backward(
        &self,
        y: &[f64],
        tape: &EncoderTape,
        grad: &mut Matrix,
        ws: &mut Workspace,
    ) -> Result<BackwardStats> {
        let a = self.atoms;
        let (d, m) = (a.rows(), a.cols());
        if tape.shape() != (d, m) {
            return Err(Error::InvalidInput(alloc::format!(
                "tape recorded for a {:?} problem, dictionary is {d}x{m}",
                tape.shape()
            )));
        }
        check_dim("unrolled iterations", self.gamma.len(), tape.len())?;
        check_dim("data point dimension", d, y.len())?;
        check_dim("gradient rows", d, grad.rows())?;
        check_dim("gradient columns", m, grad.cols())?;

        let lambda = self.lambda;
        let alpha = tape.alpha;
        ws.prepare(d, m);
        self.distances(y, &mut ws.dist);

        // Decoder and loss terms at x(T).
        let xt = tape.output();
        self.residual(xt, y, &mut ws.r);
        self.tr_mul(&ws.r, &mut ws.g);
        let mut loss = 0.5 * dot(&ws.r, &ws.r);
        for j in 0..m {
            loss += lambda * xt[j] * ws.dist[j];
            ws.bar_x[j] = ws.g[j] + lambda * ws.dist[j];
            ws.bar_w[j] = lambda * xt[j];
        }
        for (&ri, row) in ws.r.iter().zip(ws.grad_t.chunks_exact_mut(m)) {
            axpy(ri, xt, row);
        }

        let mut d_alpha = 0.0;
        ws.bar_x_tilde.iter_mut().for_each(|v| *v = 0.0);
        for t in (0..tape.len()).rev() {
            let gamma = tape.gamma[t];
            // x~(t+1) = (1 + gamma) x(t+1) - gamma x(t)
            for j in 0..m {
                ws.bar_x[j] += (1.0 + gamma) * ws.bar_x_tilde[j];
                ws.carry[j] = -gamma * ws.bar_x_tilde[j];
            }
            // x(t+1) = P(z(t))
            active_set_vjp(tape.active_set(t), &ws.bar_x, &mut ws.u);

            // z(t) = x~(t) - alpha * (A^T (A x~(t) - y) + lambda w)
            let x_tilde = tape.x_tilde(t);
            self.mul(&ws.u, &mut ws.au);
            self.tr_mul(&ws.au, &mut ws.g);
            for j in 0..m {
                ws.bar_x_tilde[j] = ws.u[j] - alpha * ws.g[j];
            }
            self.residual(x_tilde, y, &mut ws.r);
            self.tr_mul(&ws.r, &mut ws.g);
            for j in 0..m {
                let uj = ws.u[j];
                if uj != 0.0 {
                    d_alpha -= (ws.g[j] + lambda * ws.dist[j]) * uj;
                    ws.bar_w[j] -= lambda * alpha * uj;
                }
            }
            // bar_g = -alpha u:  dA += r bar_g^T + (A bar_g) x~^T
            for ((&ri, &aui), row) in ws.r.iter().zip(&ws.au).zip(ws.grad_t.chunks_exact_mut(m)) {
                let (cr, ca) = (-alpha * ri, -alpha * aui);
                for ((gij, &uj), &xj) in row.iter_mut().zip(&ws.u).zip(x_tilde) {
                    *gij += cr * uj + ca * xj;
                }
            }
            core::mem::swap(&mut ws.bar_x, &mut ws.carry);
        }

        // w_j = |y - a_j|^2
        for ((&yi, arow), grow) in y.iter().zip(self.rows.chunks_exact(m)).zip(ws.grad_t.chunks_exact_mut(m)) {
            for ((gij, &aij), &bw) in grow.iter_mut().zip(arow).zip(&ws.bar_w) {
                *gij += 2.0 * bw * (aij - yi);
            }
        }
        for j in 0..m {
            for (i, gij) in grad.col_mut(j).iter_mut().enumerate() {
                *gij += ws.grad_t[i * m + j];
            }
        }
        Ok(BackwardStats { loss, d_alpha })
    }
}

/// Encodes one point: returns `x(T)` and the tape for the backward pass.
pub fn encode(atoms: &Matrix, y: &[f64], params: &EncoderParams) -> Result<(Vec<f64>, EncoderTape)> {
    let enc = Encoder::new(atoms, params)?;
    let tape = enc.encode(y, &mut Workspace::default())?;
    Ok((tape.output().to_vec(), tape))
}

/// Encodes every column of `data`, returning the `m x n` code matrix as
/// dense columns.
pub fn encode_all(atoms: &Matrix, data: &Matrix, params: &EncoderParams) -> Result<Matrix> {
    let enc = Encoder::new(atoms, params)?;
    check_dim("data dimension", atoms.rows(), data.rows())?;
    let mut codes = Matrix::zeros(atoms.cols(), data.cols());
    let mut ws = Workspace::default();
    for i in 0..data.cols() {
        enc.encode_code(data.col(i), &mut ws, codes.col_mut(i))?;
    }
    Ok(codes)
}

/// Gradient of `L(A, y, x(T)(A, y))` with respect to the atoms, using a tape
/// recorded by [`encode`] on the same problem.
pub fn grad_dictionary(
    atoms: &Matrix,
    y: &[f64],
    tape: &EncoderTape,
    params: &EncoderParams,
) -> Result<Matrix> {
    params.validate()?;
    if (tape.lambda - params.lambda).abs() > 0.0 {
        return Err(Error::InvalidInput(
            "tape was recorded with a different lambda".into(),
        ));
    }
    let enc = Encoder::with_alpha(atoms, params, tape.alpha);
    let mut grad = Matrix::zeros(atoms.rows(), atoms.cols());
    enc.backward(y, tape, &mut grad, &mut Workspace::default())?;
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_atoms() -> Matrix {
        Matrix::from_row_major(1, 2, &[0.0, 1.0]).unwrap()
    }

    #[test]
    fn loss_examples() {
        let a = line_atoms();
        assert_eq!(loss(&a, &[0.25], &[0.75, 0.25], 0.0).unwrap(), 0.0);
        let l = loss(&a, &[0.25], &[0.75, 0.25], 1.0).unwrap();
        assert!((l - 0.1875).abs() < 1e-15);
        assert_eq!(loss(&a, &[0.25], &[0.6, 0.6], 1.0).unwrap(), f64::INFINITY);
        assert!(loss(&a, &[0.25, 1.0], &[0.5, 0.5], 1.0).is_err());
    }

    #[test]
    fn gradient_examples() {
        let a = line_atoms();
        assert_eq!(loss_grad_x(&a, &[0.25], &[0.75, 0.25], 0.0).unwrap(), vec![0.0, 0.0]);
        let g = loss_grad_x(&a, &[0.25], &[0.75, 0.25], 1.0).unwrap();
        assert!((g[0] - 0.0625).abs() < 1e-15 && (g[1] - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn step_size_examples() {
        assert!((default_step_size(&Matrix::identity(2)).unwrap() - 1.0).abs() < 1e-12);
        let mut a = Matrix::identity(2);
        a.scale(2.0);
        assert!((default_step_size(&a).unwrap() - 0.25).abs() < 1e-12);
        assert!(default_step_size(&Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn momentum_first_terms() {
        let s = momentum_schedule(5, Momentum::Standard);
        assert_eq!(s.eta[0], 0.0);
        assert_eq!(s.eta[1], 1.0);
        assert_eq!(s.gamma[0], -1.0);
        assert_eq!(s.gamma[1], 0.0);
        for w in s.gamma[1..].windows(2) {
            assert!(w[1] > w[0] && w[1] < 1.0);
        }
        let p = momentum_schedule(200, Momentum::Printed);
        assert!((p.eta[200] - 2.0).abs() < 1e-9);
        assert!((p.gamma[199] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn params_validation() {
        let mut p = EncoderParams::default();
        assert!(p.validate().is_ok());
        p.iterations = 0;
        assert!(p.validate().is_err());
        p = EncoderParams { lambda: -1.0, ..Default::default() };
        assert!(p.validate().is_err());
        p = EncoderParams { step: StepSize::Fixed(0.0), ..Default::default() };
        assert!(p.validate().is_err());
    }

    #[test]
    fn tape_has_t_records_and_replays() {
        let a = Matrix::from_row_major(2, 3, &[0.0, 1.0, 0.3, 0.0, 0.2, 1.0]).unwrap();
        let params = EncoderParams { lambda: 0.4, iterations: 7, ..Default::default() };
        let (x, tape) = encode(&a, &[0.4, 0.5], &params).unwrap();
        assert_eq!(tape.len(), 7);
        assert_eq!(tape.output(), &x[..]);
        let mut buf = vec![0.0; 3];
        let mut scratch = ProjectionScratch::default();
        for t in 0..7 {
            project_into(tape.pre_projection(t), &mut buf, &mut scratch);
            assert_eq!(&buf[..], tape.x(t + 1));
        }
    }
}
