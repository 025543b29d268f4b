//! Dictionary learning by backpropagation through the unrolled encoder.
//!
//! Each batch encodes its points with the current atoms, accumulates the mean
//! of the per-point dictionary gradients and takes one Adam step.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::encoder::{default_step_size, Encoder, EncoderParams, StepSize, Workspace};
use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::spectral::CodeMatrix;

/// Points per reduction chunk. Partial sums are formed per chunk and then
/// added in chunk order, so results do not depend on the worker count.
const CHUNK: usize = 256;

/// Abort when an epoch's loss exceeds this multiple of the initial loss.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Floor on the reference loss of the divergence check, relative to the mean
/// squared norm of the data, so that a near-perfect start does not trip it.
const DIVERGENCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Number of atoms `m`.
    pub atoms: usize,
    pub epochs: usize,
    /// Clamped to the number of points.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,
    pub encoder: EncoderParams,
    /// Iterations for the final encode of all points; `None` reuses `T`.
    pub final_iterations: Option<usize>,
    /// Spread batches over the rayon pool (needs the `parallel` feature).
    pub parallel: bool,
}

impl Default for TrainConfig {
    /// Two-moons settings: 24 atoms, `lambda = 5`, `T = 15`, learning rate
    /// `1e-3`, 1000 epochs, batches of 10^4.
    fn default() -> Self {
        TrainConfig {
            atoms: 24,
            epochs: 1000,
            batch_size: 10_000,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            seed: 0,
            encoder: EncoderParams::default(),
            final_iterations: None,
            parallel: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        self.encoder.validate()?;
        let bad = |msg: alloc::string::String| Err(Error::InvalidParameter(msg));
        if self.atoms == 0 || self.atoms > n {
            return bad(alloc::format!(
                "atom count must be in 1..={n}, got {}",
                self.atoms
            ));
        }
        if self.epochs == 0 {
            return bad("epochs must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(alloc::format!("learning rate {}", self.learning_rate));
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(b > 0.0 && b < 1.0) {
                return bad(alloc::format!("adam {name} must be in (0, 1), got {b}"));
            }
        }
        if !(self.adam_epsilon > 0.0) {
            return bad(alloc::format!("adam epsilon {}", self.adam_epsilon));
        }
        if self.final_iterations == Some(0) {
            return bad("final iterations must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub atoms: Matrix,
    pub codes: CodeMatrix,
    /// Mean loss over the points of each epoch, in epoch order.
    pub loss_history: Vec<f64>,
    /// Step size used for the final encode.
    pub alpha: f64,
}

/// `A x`.
pub fn decode(atoms: &Matrix, x: &[f64]) -> Result<Vec<f64>> {
    atoms.mul_vec(x)
}

/// `m` distinct columns of `data`, sampled uniformly without replacement.
pub fn init_dictionary(data: &Matrix, m: usize, seed: u64) -> Result<Matrix> {
    let n = data.cols();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(alloc::format!(
            "cannot draw {m} atoms from {n} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = index::sample(&mut rng, n, m).into_vec();
    Ok(data.select_columns(&idx))
}

/// Adam state for a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        debug_assert_eq!(params.len(), self.m.len());
        self.step = self.step.saturating_add(1);
        let c1 = 1.0 - libm::pow(self.beta1, self.step as f64);
        let c2 = 1.0 - libm::pow(self.beta2, self.step as f64);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (libm::sqrt(vh) + self.eps);
        }
    }
}

/// Loss, dictionary gradient and step-size gradient summed over a chunk.
struct Partial {
    loss: f64,
    grad: Matrix,
    d_alpha: f64,
}

fn chunk_partial(enc: &Encoder<'_>, data: &Matrix, idx: &[usize]) -> Result<Partial> {
    let mut grad = Matrix::zeros(data.rows(), enc.atom_count());
    let mut ws = Workspace::default();
    let mut loss = 0.0;
    let mut d_alpha = 0.0;
    for &i in idx {
        let y = data.col(i);
        let tape = enc.encode(y, &mut ws)?;
        let stats = enc.backward(y, &tape, &mut grad, &mut ws)?;
        loss += stats.loss;
        d_alpha += stats.d_alpha;
    }
    Ok(Partial {
        loss,
        grad,
        d_alpha,
    })
}

fn batch_partials(
    enc: &Encoder<'_>,
    data: &Matrix,
    batch: &[usize],
    parallel: bool,
) -> Result<Vec<Partial>> {
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return batch
            .par_chunks(CHUNK)
            .map(|c| chunk_partial(enc, data, c))
            .collect();
    }
    let _ = parallel;
    batch
        .chunks(CHUNK)
        .map(|c| chunk_partial(enc, data, c))
        .collect()
}

/// Learns `config.atoms` atoms for the columns of `data`.
///
/// The atoms start as a random subset of the data. Every epoch visits the
/// points in a fresh seeded order; every batch takes one Adam step on the
/// mean gradient. After the last epoch all points are re-encoded.
pub fn train(data: &Matrix, config: &TrainConfig) -> Result<TrainOutput> {
    let n = data.cols();
    if n == 0 || data.rows() == 0 {
        return Err(Error::Empty("training data"));
    }
    data.check_finite("training data")?;
    config.validate(n)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(1);
    let mut atoms = init_dictionary(data, config.atoms, config.seed)?;
    let batch_size = config.batch_size.min(n);
    let params = config.encoder;
    let mut adam = Adam::new(
        atoms.as_slice().len(),
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_epsilon,
    );
    let mut learned_alpha = match (params.learn_alpha, params.step) {
        (true, StepSize::Fixed(a)) => Some(a),
        (true, StepSize::Auto) => Some(default_step_size(&atoms)?),
        (false, _) => None,
    };
    let mut alpha_adam = Adam::new(
        1,
        config.learning_rate,
        config.adam_beta1,
        config.adam_beta2,
        config.adam_epsilon,
    );

    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut grad = Matrix::zeros(atoms.rows(), atoms.cols());
    let data_scale = data.as_slice().iter().map(|v| v * v).sum::<f64>() / n as f64;
    // Mean loss of the first batch under the initial atoms.
    let mut initial_loss: Option<f64> = None;
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(batch_size) {
            let alpha = match (learned_alpha, params.step) {
                (Some(a), _) => a,
                (None, StepSize::Fixed(a)) => a,
                (None, StepSize::Auto) => default_step_size(&atoms)?,
            };
            let enc = Encoder::with_alpha(&atoms, &params, alpha);
            let partials = batch_partials(&enc, data, batch, config.parallel)?;

            grad.as_mut_slice().iter_mut().for_each(|g| *g = 0.0);
            let mut d_alpha = 0.0;
            if initial_loss.is_none() {
                let first = partials.iter().map(|p| p.loss).sum::<f64>() / batch.len() as f64;
                initial_loss = Some(first.max(DIVERGENCE_FLOOR * data_scale));
            }
            for p in &partials {
                epoch_loss += p.loss;
                d_alpha += p.d_alpha;
                for (g, pg) in grad.as_mut_slice().iter_mut().zip(p.grad.as_slice()) {
                    *g += pg;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            grad.scale(inv);
            adam.update(atoms.as_mut_slice(), grad.as_slice());
            if let Some(a) = learned_alpha.as_mut() {
                let mut p = [*a];
                alpha_adam.update(&mut p, &[d_alpha * inv]);
                *a = p[0].max(f64::MIN_POSITIVE);
            }
        }
        let mean = epoch_loss / n as f64;
        if !mean.is_finite() || !atoms.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        if initial_loss.is_some_and(|l0| mean > DIVERGENCE_FACTOR * l0) {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        history.push(mean);
    }

    let alpha = match (learned_alpha, params.step) {
        (Some(a), _) => a,
        (None, StepSize::Fixed(a)) => a,
        (None, StepSize::Auto) => default_step_size(&atoms)?,
    };
    let final_params = EncoderParams {
        iterations: config.final_iterations.unwrap_or(params.iterations),
        ..params
    };
    let codes = encode_columns(&atoms, data, &final_params, alpha)?;
    Ok(TrainOutput {
        atoms,
        codes,
        loss_history: history,
        alpha,
    })
}

/// Encodes every column of `data` with a fixed step size into a sparse code
/// matrix.
pub fn encode_columns(
    atoms: &Matrix,
    data: &Matrix,
    params: &EncoderParams,
    alpha: f64,
) -> Result<CodeMatrix> {
    check_dim("data dimension", atoms.rows(), data.rows())?;
    params.validate()?;
    let enc = Encoder::with_alpha(atoms, params, alpha);
    let m = atoms.cols();
    let mut builder = CodeMatrix::builder(m, data.cols());
    let mut ws = Workspace::default();
    let mut code = vec![0.0; m];
    for i in 0..data.cols() {
        enc.encode_code(data.col(i), &mut ws, &mut code)?;
        builder.push_dense(&code);
    }
    builder.finish()
}

/// Mean loss of the given codes.
pub fn mean_loss(atoms: &Matrix, data: &Matrix, codes: &CodeMatrix, lambda: f64) -> Result<f64> {
    check_dim("code count", data.cols(), codes.cols())?;
    let mut total = 0.0;
    for i in 0..data.cols() {
        let x = codes.dense_col(i);
        total += crate::encoder::loss(atoms, data.col(i), &x, lambda)?;
    }
    Ok(total / data.cols() as f64)
}
