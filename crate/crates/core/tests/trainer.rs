use kds_core::datagen::gen_two_moons;
use kds_core::simplex::is_on_simplex;
use kds_core::trainer::{decode, init_dictionary, mean_loss};
use kds_core::{train, EncoderParams, Error, Matrix, StepSize, TrainConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config(m: usize, epochs: usize) -> TrainConfig {
    TrainConfig {
        atoms: m,
        epochs,
        batch_size: 10,
        learning_rate: 1e-2,
        seed: 5,
        ..TrainConfig::default()
    }
}

#[test]
fn tiny_dataset_loss_goes_down() {
    let (y, _) = gen_two_moons(50, 0.05, 1).unwrap();
    let out = train(&y, &small_config(6, 200)).unwrap();
    assert_eq!(out.loss_history.len(), 200);
    assert!(out.loss_history[199] <= out.loss_history[0]);
    for i in 0..50 {
        assert!(is_on_simplex(&out.codes.dense_col(i), 0.0));
    }
}

#[test]
fn self_representation_with_every_point_an_atom() {
    // Points inside the hull of a few corners, all of which are atoms when m = n.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut cols = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    for _ in 0..9 {
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        let (u, v) = if u + v > 1.0 { (1.0 - u, 1.0 - v) } else { (u, v) };
        cols.push([u, v]);
    }
    let y = Matrix::from_columns(&cols).unwrap();
    let n = y.cols();
    let cfg = TrainConfig {
        atoms: n,
        epochs: 20,
        batch_size: 4,
        learning_rate: 1e-4,
        seed: 2,
        encoder: EncoderParams {
            lambda: 0.0,
            iterations: 300,
            ..EncoderParams::default()
        },
        ..TrainConfig::default()
    };
    let recon_err = |atoms: &Matrix, codes: &kds_core::CodeMatrix| {
        (0..n)
            .map(|i| {
                let r = decode(atoms, &codes.dense_col(i)).unwrap();
                r.iter().zip(y.col(i)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
            .sum::<f64>()
            / n as f64
    };
    let init = init_dictionary(&y, n, cfg.seed).unwrap();
    let init_codes = kds_core::trainer::encode_columns(
        &init,
        &y,
        &cfg.encoder,
        kds_core::encoder::default_step_size(&init).unwrap(),
    )
    .unwrap();
    let before = recon_err(&init, &init_codes);
    let out = train(&y, &cfg).unwrap();
    let after = recon_err(&out.atoms, &out.codes);
    assert!(after <= before.max(1e-3));
    assert!(after <= 1e-3, "{after}");
}

#[test]
fn training_is_bitwise_reproducible() {
    let (y, _) = gen_two_moons(300, 0.05, 4).unwrap();
    let cfg = TrainConfig {
        batch_size: 64,
        ..small_config(8, 5)
    };
    let a = train(&y, &cfg).unwrap();
    let b = train(&y, &cfg).unwrap();
    assert_eq!(a.atoms, b.atoms);
    assert_eq!(a.codes, b.codes);
    assert_eq!(a.loss_history, b.loss_history);
    let other = train(&y, &TrainConfig { seed: 6, ..cfg }).unwrap();
    assert_ne!(a.atoms, other.atoms);
}

#[test]
fn parallel_batches_reduce_in_order() {
    let (y, _) = gen_two_moons(1200, 0.05, 4).unwrap();
    let cfg = TrainConfig {
        batch_size: 1000,
        ..small_config(8, 3)
    };
    let a = train(&y, &cfg).unwrap();
    let b = train(&y, &TrainConfig { parallel: true, ..cfg }).unwrap();
    assert_eq!(a.atoms, b.atoms);
    assert_eq!(a.loss_history, b.loss_history);
}

#[test]
fn learned_step_size_moves() {
    let (y, _) = gen_two_moons(200, 0.05, 9).unwrap();
    let cfg = TrainConfig {
        encoder: EncoderParams {
            learn_alpha: true,
            step: StepSize::Fixed(0.05),
            ..EncoderParams::default()
        },
        ..small_config(6, 10)
    };
    let out = train(&y, &cfg).unwrap();
    assert!(out.alpha > 0.0 && out.alpha != 0.05);
    assert!(mean_loss(&out.atoms, &y, &out.codes, 5.0).unwrap().is_finite());
}

#[test]
fn final_encode_can_run_longer() {
    let (y, _) = gen_two_moons(100, 0.05, 2).unwrap();
    let base = small_config(6, 5);
    let short = train(&y, &base).unwrap();
    let long = train(&y, &TrainConfig { final_iterations: Some(500), ..base }).unwrap();
    assert_eq!(short.atoms, long.atoms);
    let ls = mean_loss(&short.atoms, &y, &short.codes, 5.0).unwrap();
    let ll = mean_loss(&long.atoms, &y, &long.codes, 5.0).unwrap();
    assert!(ll <= ls + 1e-12);
}

#[test]
fn divergence_is_reported() {
    let (mut y, _) = gen_two_moons(40, 0.0, 2).unwrap();
    y.scale(1e3);
    let cfg = TrainConfig {
        learning_rate: 1e12,
        encoder: EncoderParams {
            step: StepSize::Fixed(1.0),
            ..EncoderParams::default()
        },
        ..small_config(4, 50)
    };
    match train(&y, &cfg) {
        Err(Error::Diverged { .. }) => {}
        other => panic!("expected divergence, got {:?}", other.map(|o| o.loss_history)),
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let (y, _) = gen_two_moons(20, 0.0, 2).unwrap();
    for cfg in [
        TrainConfig { atoms: 0, ..small_config(1, 1) },
        TrainConfig { atoms: 21, ..small_config(1, 1) },
        TrainConfig { epochs: 0, ..small_config(2, 1) },
        TrainConfig { learning_rate: -1.0, ..small_config(2, 1) },
        TrainConfig { adam_beta1: 1.0, ..small_config(2, 1) },
        TrainConfig { adam_epsilon: 0.0, ..small_config(2, 1) },
    ] {
        assert!(train(&y, &cfg).is_err(), "{cfg:?}");
    }
}
