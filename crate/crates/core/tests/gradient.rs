use kds_core::encoder::{grad_dictionary, smooth_loss, Encoder, Workspace};
use kds_core::trainer::decode;
use kds_core::{encode, EncoderParams, EncoderTape, Matrix, StepSize};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn params(lambda: f64, t: usize, alpha: f64) -> EncoderParams {
    EncoderParams {
        lambda,
        iterations: t,
        step: StepSize::Fixed(alpha),
        ..EncoderParams::default()
    }
}

/// `L(A, y, x(T)(A, y))` with the step size frozen.
fn objective(a: &Matrix, y: &[f64], p: &EncoderParams) -> f64 {
    let (x, _) = encode(a, y, p).unwrap();
    smooth_loss(a, y, &x, p.lambda)
}

fn fd_grad(a: &Matrix, y: &[f64], p: &EncoderParams, h: f64) -> Matrix {
    let mut g = Matrix::zeros(a.rows(), a.cols());
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            let mut up = a.clone();
            let mut dn = a.clone();
            up[(i, j)] += h;
            dn[(i, j)] -= h;
            g[(i, j)] = (objective(&up, y, p) - objective(&dn, y, p)) / (2.0 * h);
        }
    }
    g
}

fn rel_err(got: &Matrix, want: &Matrix) -> f64 {
    let diff: f64 = got
        .as_slice()
        .iter()
        .zip(want.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    diff / want.frobenius_norm().max(1e-8)
}

/// Some iterate's pre-projection coordinate sits within `margin` of the
/// projection threshold, where the map is not differentiable.
fn near_boundary(tape: &EncoderTape, margin: f64) -> bool {
    (0..tape.len()).any(|t| {
        let z = tape.pre_projection(t);
        let x = tape.x(t + 1);
        let i = x.iter().position(|&v| v > 0.0).unwrap();
        let tau = z[i] - x[i];
        z.iter().any(|&v| (v - tau).abs() < margin)
    })
}

fn random_instance(rng: &mut ChaCha8Rng, d: usize, m: usize) -> (Matrix, Vec<f64>) {
    let data: Vec<f64> = (0..d * m).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    let a = Matrix::from_col_major(d, m, data).unwrap();
    let y: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    (a, y)
}

fn best_fd_error(a: &Matrix, y: &[f64], p: &EncoderParams, g: &Matrix) -> f64 {
    [1e-4, 1e-5, 1e-6]
        .iter()
        .map(|&h| rel_err(g, &fd_grad(a, y, p, h)))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn fifty_instances_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut done = 0;
    let mut skipped = 0;
    let grid: Vec<(usize, f64)> = [1usize, 5, 20]
        .iter()
        .flat_map(|&t| [0.0, 0.5, 5.0].map(move |l| (t, l)))
        .collect();
    while done < 50 {
        let (t, lambda) = grid[done % grid.len()];
        let d = rng.random_range(1..=4);
        let m = rng.random_range(2..=7);
        let (a, y) = random_instance(&mut rng, d, m);
        let alpha = kds_core::encoder::default_step_size(&a).unwrap();
        let p = params(lambda, t, alpha);
        let (_, tape) = encode(&a, &y, &p).unwrap();
        if near_boundary(&tape, 1e-6) {
            skipped += 1;
            continue;
        }
        let g = grad_dictionary(&a, &y, &tape, &p).unwrap();
        let err = best_fd_error(&a, &y, &p, &g);
        assert!(err <= 1e-5, "T={t} lambda={lambda} d={d} m={m}: rel err {err}");
        done += 1;
    }
    assert!(skipped < 200, "too many boundary instances: {skipped}");
}

#[test]
fn documented_random_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut tried = 0;
    loop {
        tried += 1;
        let (a, y) = random_instance(&mut rng, 3, 5);
        let alpha = kds_core::encoder::default_step_size(&a).unwrap();
        let p = params(0.7, 10, alpha);
        let (_, tape) = encode(&a, &y, &p).unwrap();
        if near_boundary(&tape, 1e-6) {
            assert!(tried < 100);
            continue;
        }
        let g = grad_dictionary(&a, &y, &tape, &p).unwrap();
        assert!(best_fd_error(&a, &y, &p, &g) <= 1e-5);
        break;
    }
}

#[test]
fn one_step_chain_by_hand() {
    // d = 1, atoms (a0, a1), T = 1, lambda = 0, zero start:
    // z = alpha * (a * y), x = P(z), L = 1/2 (a.x - y)^2.
    let a = Matrix::from_row_major(1, 2, &[0.1, 0.9]).unwrap();
    let y = [0.3];
    let alpha = 0.8;
    let p = params(0.0, 1, alpha);
    let (x, tape) = encode(&a, &y, &p).unwrap();
    // z = 0.8 * (0.03, 0.27) = (0.024, 0.216); both active: x = z + (1 - 0.24)/2.
    let shift = (1.0 - 0.024 - 0.216) / 2.0;
    assert!((x[0] - (0.024 + shift)).abs() < 1e-15);
    // Hand chain: r = a.x - y; dL/da_j = r x_j + r * sum_k a_k dx_k/da_j.
    // dz_k/da_j = alpha * y * [k == j]; dx/dz = I - 11^T/2.
    let r = 0.1 * x[0] + 0.9 * x[1] - y[0];
    let mut want = Matrix::zeros(1, 2);
    for j in 0..2 {
        let mut total = r * x[j];
        for k in 0..2 {
            let dxk_dzj = if k == j { 0.5 } else { -0.5 };
            total += r * a[(0, k)] * dxk_dzj * alpha * y[0];
        }
        want[(0, j)] = total;
    }
    let got = grad_dictionary(&a, &y, &tape, &p).unwrap();
    assert!(got.max_abs_diff(&want) < 1e-15);
    let fd = fd_grad(&a, &y, &p, 1e-6);
    assert!(rel_err(&got, &fd) <= 1e-7);
}

#[test]
fn detached_code_regularizer_derivative() {
    // With T = 1 and a code pinned to a vertex by a huge step, only the direct
    // terms survive: r x_j + 2 lambda x_j (a_j - y).
    let a = Matrix::from_row_major(2, 3, &[0.0, 1.0, 3.0, 0.0, 0.5, -1.0]).unwrap();
    let y = [0.9, 0.4];
    let p = params(2.0, 1, 1e3);
    let (x, tape) = encode(&a, &y, &p).unwrap();
    assert_eq!(x, vec![0.0, 1.0, 0.0]);
    let got = grad_dictionary(&a, &y, &tape, &p).unwrap();
    let r = [1.0 - 0.9, 0.5 - 0.4];
    for i in 0..2 {
        let want = r[i] + 2.0 * 2.0 * (a[(i, 1)] - y[i]);
        assert!((got[(i, 1)] - want).abs() < 1e-12);
        assert_eq!(got[(i, 0)], 0.0);
        assert_eq!(got[(i, 2)], 0.0);
    }
}

#[test]
fn step_size_derivative_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut checked = 0;
    while checked < 10 {
        let (a, y) = random_instance(&mut rng, 2, 4);
        let alpha = kds_core::encoder::default_step_size(&a).unwrap();
        let p = params(0.5, 8, alpha);
        let enc = Encoder::new(&a, &p).unwrap();
        let mut ws = Workspace::default();
        let tape = enc.encode(&y, &mut ws).unwrap();
        if near_boundary(&tape, 1e-6) {
            continue;
        }
        let mut g = Matrix::zeros(2, 4);
        let stats = enc.backward(&y, &tape, &mut g, &mut ws).unwrap();
        let h = 1e-7;
        let fd = (objective(&a, &y, &params(0.5, 8, alpha + h)) - objective(&a, &y, &params(0.5, 8, alpha - h)))
            / (2.0 * h);
        assert!((stats.d_alpha - fd).abs() <= 1e-5 * fd.abs().max(1e-3), "{} vs {fd}", stats.d_alpha);
        assert!((stats.loss - objective(&a, &y, &p)).abs() < 1e-14);
        checked += 1;
    }
}

#[test]
fn tape_mismatch_is_rejected() {
    let a = Matrix::from_row_major(1, 2, &[0.0, 1.0]).unwrap();
    let p = params(0.5, 3, 0.5);
    let (_, tape) = encode(&a, &[0.2], &p).unwrap();
    let b = Matrix::from_row_major(1, 3, &[0.0, 1.0, 2.0]).unwrap();
    assert!(grad_dictionary(&b, &[0.2], &tape, &p).is_err());
    assert!(grad_dictionary(&a, &[0.2], &tape, &params(0.5, 4, 0.5)).is_err());
    assert!(grad_dictionary(&a, &[0.2], &tape, &params(0.6, 3, 0.5)).is_err());
}

#[test]
fn decode_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let (d, m) = (rng.random_range(1..6), rng.random_range(1..9));
        let (a, _) = random_instance(&mut rng, d, m);
        let x: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let got = decode(&a, &x).unwrap();
        let mut want = vec![0.0; d];
        for (i, w) in want.iter_mut().enumerate() {
            for (j, xj) in x.iter().enumerate() {
                *w += a.as_slice()[j * d + i] * xj;
            }
        }
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12);
        }
    }
    let id = Matrix::identity(2);
    assert_eq!(decode(&id, &[0.3, 0.7]).unwrap(), vec![0.3, 0.7]);
}
