//! Cross-check suites: fast paths against the oracles.
//!
//! Shared by `kds verify` (quick scale) and the acceptance tests (full scale).

use std::time::Instant;

use kds_core::datagen::{delaunay_connectivity, sample_delaunay_model, separation_stats, DelaunayModel, GroundTruth};
use kds_core::encoder::{default_step_size, grad_dictionary, smooth_loss};
use kds_core::simplex::is_on_simplex;
use kds_core::spectral::{cluster_pipeline, reduced_adjacency, schur_laplacian, ClusterOptions};
use kds_core::{
    clustering_accuracy, encode, project_simplex, projection_vjp, spectral_embed, CodeMatrix, EncoderParams,
    EncoderTape, LaplacianMode, Matrix, StepSize,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    /// Small instance counts for `kds verify`.
    Quick,
    /// The instance counts of the acceptance criteria.
    Full,
}

impl Scale {
    fn pick(self, quick: usize, full: usize) -> usize {
        match self {
            Scale::Quick => quick,
            Scale::Full => full,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub passed: bool,
    pub checked: usize,
    pub skipped: usize,
    pub seconds: f64,
    /// Headline numbers, or the first failure.
    pub detail: String,
}

impl std::fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {:<10} {} checked, {} skipped, {:.1}s: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.checked,
            self.skipped,
            self.seconds,
            self.detail
        )
    }
}

pub const SUITES: [&str; 6] = ["projection", "gradient", "encoder", "embedding", "theorem1", "theorem2"];

/// The differentiable pieces under test, replaceable so that the suites can
/// be shown to catch a broken implementation.
#[derive(Clone, Copy)]
pub struct Hooks {
    pub vjp: fn(&[f64], &[f64]) -> kds_core::Result<Vec<f64>>,
    pub grad: fn(&Matrix, &[f64], &EncoderTape, &EncoderParams) -> kds_core::Result<Matrix>,
}

impl Default for Hooks {
    fn default() -> Self {
        Hooks {
            vjp: projection_vjp,
            grad: grad_dictionary,
        }
    }
}

pub fn run_suite(name: &str, scale: Scale) -> Option<SuiteReport> {
    run_suite_with(name, scale, Hooks::default())
}

pub fn run_suite_with(name: &str, scale: Scale, hooks: Hooks) -> Option<SuiteReport> {
    let start = Instant::now();
    let mut rep = match name {
        "projection" => projection_suite(scale, hooks),
        "gradient" => gradient_suite(scale, hooks),
        "encoder" => encoder_suite(scale),
        "embedding" => embedding_suite(scale),
        "theorem1" => theorem1_suite(scale),
        "theorem2" => theorem2_suite(scale),
        _ => return None,
    };
    rep.seconds = start.elapsed().as_secs_f64();
    Some(rep)
}

/// Accumulates counts and keeps the first failure message.
struct Tally {
    name: &'static str,
    checked: usize,
    skipped: usize,
    failure: Option<String>,
}

impl Tally {
    fn new(name: &'static str) -> Self {
        Tally {
            name,
            checked: 0,
            skipped: 0,
            failure: None,
        }
    }

    fn check(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        self.checked += 1;
        if !ok && self.failure.is_none() {
            self.failure = Some(msg());
        }
    }

    fn fail(&mut self, msg: String) {
        if self.failure.is_none() {
            self.failure = Some(msg);
        }
    }

    fn finish(self, summary: String) -> SuiteReport {
        SuiteReport {
            name: self.name,
            passed: self.failure.is_none(),
            checked: self.checked,
            skipped: self.skipped,
            seconds: 0.0,
            detail: self.failure.unwrap_or(summary),
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn uniform_vec(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> Vec<f64> {
    (0..m).map(|_| scale * (rng.random::<f64>() * 2.0 - 1.0)).collect()
}

/// Largest KKT violation of `x = P(v)`: feasibility, and `v_i - x_i = mu` on
/// the support with `v_i <= mu` off it.
fn projection_kkt(v: &[f64], x: &[f64]) -> f64 {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] > 0.0).collect();
    if support.is_empty() {
        return f64::INFINITY;
    }
    let mu = support.iter().map(|&i| v[i] - x[i]).sum::<f64>() / support.len() as f64;
    let mut worst: f64 = (x.iter().sum::<f64>() - 1.0).abs();
    for i in 0..x.len() {
        worst = worst.max((-x[i]).max(0.0));
        worst = worst.max(if x[i] > 0.0 { (v[i] - x[i] - mu).abs() } else { (v[i] - mu).max(0.0) });
    }
    worst
}

/// Output coordinates within `margin` of the kink, where the projection is
/// not differentiable.
fn projection_near_kink(v: &[f64], margin: f64) -> bool {
    let x = oracle::reference_projection(v);
    let Some(i) = (0..v.len()).find(|&i| x[i] > 0.0) else {
        return true;
    };
    let tau = v[i] - x[i];
    v.iter().any(|&vi| (vi - tau).abs() < margin)
}

fn vjp_error(hooks: Hooks, v: &[f64], g: &[f64]) -> f64 {
    let got = match (hooks.vjp)(v, g) {
        Ok(r) => r,
        Err(_) => return f64::INFINITY,
    };
    // d/dv of <g, P(v)>.
    let want = oracle::finite_diff_grad(
        |w| oracle::reference_projection(w).iter().zip(g).map(|(a, b)| a * b).sum(),
        v,
        1e-7,
    )
    .expect("positive step");
    // The projection Jacobian has norm at most 1, so |g| bounds the product.
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    dist(&got, &want) / norm(&want).max(norm(g)).max(1e-12)
}

/// Vector-Jacobian products of the projection against finite differences,
/// at points away from the kinks.
fn check_vjp(t: &mut Tally, rng: &mut ChaCha8Rng, hooks: Hooks, count: usize) -> f64 {
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < count {
        let m = rng.random_range(2..=8);
        let v = uniform_vec(rng, m, 1.0);
        if projection_near_kink(&v, 1e-6) {
            t.skipped += 1;
            continue;
        }
        let g = uniform_vec(rng, m, 1.0);
        let err = vjp_error(hooks, &v, &g);
        worst = worst.max(err);
        t.check(err <= 1e-5, || format!("vjp relative error {err:e} at v = {v:?}, g = {g:?}"));
        done += 1;
    }
    worst
}

fn projection_suite(scale: Scale, hooks: Hooks) -> SuiteReport {
    let mut t = Tally::new("projection");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);

    // Small m: bisection reference and KKT conditions.
    let mut worst_ref: f64 = 0.0;
    for _ in 0..scale.pick(500, 2000) {
        let m = rng.random_range(1..=6);
        let v = uniform_vec(&mut rng, m, 3.0);
        let Ok(p) = project_simplex(&v) else {
            t.fail(format!("projection failed on {v:?}"));
            continue;
        };
        let err = dist(&p, &oracle::reference_projection(&v));
        worst_ref = worst_ref.max(err);
        t.check(err <= 1e-12, || format!("differs from bisection by {err:e} at {v:?}"));
        let kkt = projection_kkt(&v, &p);
        t.check(kkt <= 1e-12, || format!("KKT violation {kkt:e} at {v:?}"));
    }

    // m = 3: nothing on a dense grid of the simplex is closer.
    let steps = 200usize;
    let h = 1.0 / steps as f64;
    for _ in 0..scale.pick(3, 20) {
        let v = uniform_vec(&mut rng, 3, 1.5);
        let p = project_simplex(&v).unwrap_or_default();
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=(steps - i) {
                let g = [i as f64 * h, j as f64 * h, (steps - i - j) as f64 * h];
                best = best.min(dist(&g, &v));
            }
        }
        let dp = dist(&p, &v);
        t.check(dp <= best + 1e-15, || format!("grid point beats projection at {v:?}"));
    }

    // Membership, idempotence and nonexpansiveness over many draws.
    let draws = scale.pick(2000, 10_000);
    for _ in 0..draws {
        let m = rng.random_range(1..=120);
        let s = if rng.random::<bool>() { 10.0 } else { 0.1 };
        let u = uniform_vec(&mut rng, m, s);
        let v = uniform_vec(&mut rng, m, s);
        let (Ok(pu), Ok(pv)) = (project_simplex(&u), project_simplex(&v)) else {
            t.fail(format!("projection failed at m = {m}"));
            continue;
        };
        t.check(is_on_simplex(&pu, 0.0) && (pu.iter().sum::<f64>() - 1.0).abs() <= 1e-9, || {
            format!("not on the simplex at m = {m}")
        });
        let again = project_simplex(&pu).unwrap_or_default();
        let idem = dist(&again, &pu);
        t.check(idem <= 1e-12, || format!("not idempotent: moved {idem:e}"));
        let (dp, d) = (dist(&pu, &pv), dist(&u, &v));
        t.check(dp <= d + 1e-12, || format!("expansive: {dp} > {d}"));
    }

    let worst_vjp = check_vjp(&mut t, &mut rng, hooks, scale.pick(100, 300));
    t.finish(format!(
        "max |P - P_bisect| {worst_ref:.1e}, {draws} random draws, max vjp rel err {worst_vjp:.1e}"
    ))
}

/// Some iterate has a pre-projection coordinate within `margin` of the
/// projection threshold.
pub fn tape_near_boundary(tape: &EncoderTape, margin: f64) -> bool {
    (0..tape.len()).any(|s| {
        let z = tape.pre_projection(s);
        let x = tape.x(s + 1);
        let Some(i) = x.iter().position(|&v| v > 0.0) else {
            return true;
        };
        let tau = z[i] - x[i];
        z.iter().any(|&v| (v - tau).abs() < margin)
    })
}

fn dictionary_fd(a: &Matrix, y: &[f64], p: &EncoderParams, h: f64) -> Vec<f64> {
    let (d, m) = (a.rows(), a.cols());
    oracle::finite_diff_grad(
        |flat| {
            let atoms = Matrix::from_col_major(d, m, flat.to_vec()).expect("same shape");
            match encode(&atoms, y, p) {
                Ok((x, _)) => smooth_loss(&atoms, y, &x, p.lambda),
                Err(_) => f64::NAN,
            }
        },
        a.as_slice(),
        h,
    )
    .expect("positive step")
}

fn rel_err(got: &[f64], want: &[f64]) -> f64 {
    let norm = want.iter().map(|v| v * v).sum::<f64>().sqrt();
    dist(got, want) / norm.max(1e-8)
}

fn gradient_suite(scale: Scale, hooks: Hooks) -> SuiteReport {
    let mut t = Tally::new("gradient");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let worst_vjp = check_vjp(&mut t, &mut rng, hooks, scale.pick(50, 100));

    let grid: Vec<(usize, f64)> = [1usize, 5, 20].iter().flat_map(|&s| [0.0, 0.5, 5.0].map(move |l| (s, l))).collect();
    let want = scale.pick(18, 50);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < want {
        let (iters, lambda) = grid[done % grid.len()];
        let d = rng.random_range(1..=4);
        let m = rng.random_range(2..=7);
        let a = Matrix::from_col_major(d, m, uniform_vec(&mut rng, d * m, 1.0)).expect("shape");
        let y = uniform_vec(&mut rng, d, 1.0);
        let Ok(alpha) = default_step_size(&a) else {
            t.skipped += 1;
            continue;
        };
        let p = EncoderParams {
            lambda,
            iterations: iters,
            step: StepSize::Fixed(alpha),
            ..EncoderParams::default()
        };
        let tape = match encode(&a, &y, &p) {
            Ok((_, tape)) => tape,
            Err(e) => {
                t.fail(format!("encode failed: {e}"));
                break;
            }
        };
        if tape_near_boundary(&tape, 1e-6) {
            t.skipped += 1;
            continue;
        }
        let got = match (hooks.grad)(&a, &y, &tape, &p) {
            Ok(g) => g,
            Err(e) => {
                t.fail(format!("gradient failed: {e}"));
                break;
            }
        };
        let err = [1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&h| rel_err(got.as_slice(), &dictionary_fd(&a, &y, &p, h)))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(err);
        t.check(err <= 1e-5, || format!("T = {iters}, lambda = {lambda}, d = {d}, m = {m}: relative error {err:e}"));
        done += 1;
    }
    t.finish(format!("max dictionary-gradient rel err {worst:.1e} over {done} instances, max vjp rel err {worst_vjp:.1e}"))
}

fn encoder_suite(scale: Scale) -> SuiteReport {
    let mut t = Tally::new("encoder");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut worst_gap: f64 = 0.0;
    for k in 0..scale.pick(10, 50) {
        let lambda = [0.0, 0.5, 5.0][k % 3];
        let d = rng.random_range(1..=10);
        let m = rng.random_range(2..=20);
        let a = Matrix::from_col_major(d, m, uniform_vec(&mut rng, d * m, 1.0)).expect("shape");
        let y = uniform_vec(&mut rng, d, 1.0);
        let p = EncoderParams {
            lambda,
            iterations: 1000,
            ..EncoderParams::default()
        };
        let (x, _) = match encode(&a, &y, &p) {
            Ok(r) => r,
            Err(e) => {
                t.fail(format!("encode failed: {e}"));
                continue;
            }
        };
        let reference = match oracle::oracle_encode(&a, &y, lambda, 1e-10) {
            Ok(r) => r,
            Err(e) => {
                t.fail(format!("oracle failed on instance {k}: {e}"));
                continue;
            }
        };
        let fast = oracle::oracle_loss(&a, &y, &x, lambda).unwrap_or(f64::NAN);
        let best = oracle::oracle_loss(&a, &y, &reference, lambda).unwrap_or(f64::NAN);
        let gap = fast - best;
        worst_gap = worst_gap.max(gap);
        t.check(gap <= 1e-6, || format!("instance {k} (d = {d}, m = {m}, lambda = {lambda}): gap {gap:e}"));
        t.check(is_on_simplex(&x, 0.0), || format!("instance {k}: encoder output off the simplex"));
    }
    t.finish(format!("max loss(encode, T=1000) - loss(oracle) = {worst_gap:.1e}"))
}

/// A random sparse code matrix; with `blocks = Some(b)` the atoms are split
/// into `b` groups, each chained so that its points form one component.
pub fn random_codes(rng: &mut ChaCha8Rng, m: usize, n: usize, blocks: Option<usize>) -> (CodeMatrix, Vec<usize>) {
    let mut builder = CodeMatrix::builder(m, n);
    let mut labels = Vec::with_capacity(n);
    match blocks {
        None => {
            for _ in 0..n {
                let s = rng.random_range(1..=3usize.min(m));
                let idx = rand::seq::index::sample(rng, m, s).into_vec();
                let w: Vec<f64> = (0..s).map(|_| rng.random::<f64>() + 0.05).collect();
                let tot: f64 = w.iter().sum();
                let mut e: Vec<(usize, f64)> = idx.into_iter().zip(w.into_iter().map(|v| v / tot)).collect();
                e.sort_by_key(|p| p.0);
                builder.push_sparse(&e);
                labels.push(0);
            }
        }
        Some(b) => {
            let size = m / b;
            for i in 0..n {
                let blk = i % b;
                let lo = blk * size;
                let hi = if blk + 1 == b { m } else { lo + size };
                // The first points of a block walk the chain so every link is used.
                let step = i / b;
                let j = if step < hi - lo - 1 { lo + step } else { rng.random_range(lo..hi - 1) };
                let w = rng.random_range(0.1..0.9);
                builder.push_sparse(&[(j, w), (j + 1, 1.0 - w)]);
                labels.push(blk);
            }
        }
    }
    (builder.finish().expect("columns are on the simplex"), labels)
}

/// `tr(Q_A L_A Q_A^T)` with the fast reduced Laplacian.
fn reduced_energy(codes: &CodeMatrix, q_atoms: &Matrix) -> f64 {
    let l = schur_laplacian(&reduced_adjacency(codes));
    let mut tr = 0.0;
    for r in 0..q_atoms.rows() {
        let q = q_atoms.row(r);
        let lq = l.mul_vec(&q).expect("square");
        tr += q.iter().zip(&lq).map(|(a, b)| a * b).sum::<f64>();
    }
    tr
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}

fn embedding_suite(scale: Scale) -> SuiteReport {
    let mut t = Tally::new("embedding");
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0004);
    let mut worst: f64 = 0.0;
    let count = scale.pick(6, 20);
    for k in 0..count {
        let blocky = k % 4 == 3;
        let m = rng.random_range(4..=30);
        let n = rng.random_range(m..=500);
        let (codes, blocks) = random_codes(&mut rng, m, n, blocky.then_some(2));
        let kept = codes.atom_degrees().iter().filter(|&&d| d > 1e-12).count();
        let dims = if blocky { 2 } else { rng.random_range(2..=kept.min(5)) };
        let (fast, naive) = match (spectral_embed(&codes, dims, LaplacianMode::Quadratic), oracle::naive_embedding(&codes, dims)) {
            (Ok(f), Ok(nv)) => (f, nv),
            (f, nv) => {
                t.fail(format!("instance {k}: fast {:?} / naive {:?}", f.err(), nv.err()));
                continue;
            }
        };
        let fast_tr = reduced_energy(&codes, &fast.atoms);
        let err = (fast_tr - naive.full_trace).abs();
        worst = worst.max(err);
        t.check(err <= 1e-8, || format!("instance {k}: tr(Q L Q^T) {} vs tr(Q_A L_A Q_A^T) {fast_tr}", naive.full_trace));
        // The fast embedding, extended harmonically, has the same energy in the full graph.
        let full_of_fast = oracle::full_energy(&codes, &fast.data, &fast.atoms).unwrap_or(f64::NAN);
        let err2 = (full_of_fast - fast_tr).abs();
        worst = worst.max(err2);
        t.check(err2 <= 1e-8, || format!("instance {k}: full energy of the fast embedding {full_of_fast} vs {fast_tr}"));
        for (a, b) in fast.eigenvalues.iter().zip(&naive.eigenvalues) {
            t.check((a - b).abs() <= 1e-8, || format!("instance {k}: eigenvalue {a} vs {b}"));
        }
        if blocky {
            let pf = oracle::coincidence_partition(&fast.data, 1e-8);
            let pn = oracle::coincidence_partition(&naive.data, 1e-8);
            t.check(same_partition(&pf, &pn) && same_partition(&pn, &blocks), || {
                format!("instance {k}: block separation differs")
            });
        }
    }
    t.finish(format!("{count} code matrices, max trace discrepancy {worst:.1e}"))
}

/// Minimum distance between atom clusters over the largest triangle diameter
/// that each exact-recovery instance must exceed.
pub const RECOVERY_RATIO: f64 = 2.0;

/// A two-cluster Delaunay model with `Delta > 2R` whose clusters are both
/// connected under the sampled points. Draws again until the conditions hold;
/// returns the number of draws used.
pub fn theorem1_instance(seed: u64) -> (DelaunayModel, Matrix, GroundTruth, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draws = 0;
    loop {
        draws += 1;
        let per = [rng.random_range(4..=8), rng.random_range(4..=8)];
        let gap = rng.random_range(2.5..6.0);
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let centres = [(0.0, 0.0), (gap * theta.cos(), gap * theta.sin())];
        let mut cols = Vec::new();
        let mut clusters = Vec::new();
        for (c, &count) in per.iter().enumerate() {
            for _ in 0..count {
                let (r, a) = (rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU));
                cols.push([centres[c].0 + r * a.cos(), centres[c].1 + r * a.sin()]);
                clusters.push(c);
            }
        }
        let atoms = Matrix::from_columns(&cols).expect("2-D atoms");
        let Ok(model) = DelaunayModel::new(atoms, clusters, 0.0) else {
            continue;
        };
        if (0..2).any(|c| !(0..model.triangles.len()).any(|t| model.triangle_cluster(t) == c)) {
            continue;
        }
        let n = rng.random_range(150..=400);
        let Ok((data, truth)) = sample_delaunay_model(&model, n, rng.random()) else {
            continue;
        };
        let (Ok(sep), Ok(conn)) = (separation_stats(&model, &data, &truth), delaunay_connectivity(&model, &truth)) else {
            continue;
        };
        if sep.delta > RECOVERY_RATIO * sep.r && conn.all_clusters_connected() && (0..2).all(|c| truth.labels.contains(&c)) {
            return (model, data, truth, draws);
        }
    }
}

fn theorem1_suite(scale: Scale) -> SuiteReport {
    let mut t = Tally::new("theorem1");
    let count = scale.pick(20, 100);
    let mut draws = 0;
    for k in 0..count {
        let (model, _, truth, used) = theorem1_instance(0x7431_0000 + k as u64);
        draws += used;
        let opts = ClusterOptions {
            clusters: 2,
            seed: k as u64,
            ..ClusterOptions::default()
        };
        match cluster_pipeline(&truth.true_codes, Some(&model.atoms), &opts) {
            Ok(out) => {
                let acc = clustering_accuracy(&out.data_labels, &truth.labels).unwrap_or(0.0);
                let atom_acc = clustering_accuracy(&out.atom_labels, &model.atom_cluster).unwrap_or(0.0);
                t.check(acc == 1.0, || format!("instance {k}: ACC {acc}"));
                t.check(atom_acc == 1.0, || format!("instance {k}: atom ACC {atom_acc}"));
            }
            Err(e) => t.fail(format!("instance {k}: {e}")),
        }
    }
    t.skipped = draws - count;
    t.finish(format!("ACC = 1.0 on {count}/{count} instances ({draws} draws to meet the conditions)"))
}

/// A support-confinement instance: dictionary `[A, A']`, point `y`, radius `epsilon`,
/// the certifying `A`-only code, and the part sizes.
pub struct ConfinementInstance {
    pub dict: Matrix,
    pub y: Vec<f64>,
    pub epsilon: f64,
    pub certificate: Vec<f64>,
    pub parts: (usize, usize),
    pub deltas: (f64, f64),
}

pub fn theorem2_instance(seed: u64) -> ConfinementInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let d = rng.random_range(2..=3);
        let m = rng.random_range(3..=6);
        let p = rng.random_range(2..=12 - m);
        let mut cols: Vec<Vec<f64>> = (0..m).map(|_| uniform_vec(&mut rng, d, 1.0)).collect();
        let far = rng.random_range(3.0..8.0);
        for _ in 0..p {
            let mut dir = uniform_vec(&mut rng, d, 1.0);
            let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-3);
            let r = far + rng.random_range(0.0..2.0);
            dir.iter_mut().for_each(|v| *v *= r / norm);
            cols.push(dir);
        }
        let dict = Matrix::from_columns(&cols).expect("uniform columns");
        let w: Vec<f64> = (0..m).map(|_| -rng.random::<f64>().max(1e-12).ln()).collect();
        let tot: f64 = w.iter().sum();
        let mut certificate: Vec<f64> = w.iter().map(|v| v / tot).collect();
        certificate.resize(m + p, 0.0);
        let centre = dict.mul_vec(&certificate).expect("shape");
        let level = rng.random_range(0.0..0.1);
        let noise = uniform_vec(&mut rng, d, level);
        let y: Vec<f64> = centre.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let epsilon = dist(&y, &centre) + rng.random_range(0.0..0.05);
        let a_part = dict.select_columns(&(0..m).collect::<Vec<_>>());
        let a_prime = dict.select_columns(&(m..m + p).collect::<Vec<_>>());
        let deltas = oracle::theorem2_deltas(&a_part, &a_prime, &y).expect("nonempty parts");
        if deltas.1 > deltas.0 {
            return ConfinementInstance {
                dict,
                y,
                epsilon,
                certificate,
                parts: (m, p),
                deltas,
            };
        }
    }
}

/// Coordinates above this count as support in the confinement check.
pub const CONFINEMENT_SUPPORT_TOL: f64 = 1e-9;

fn theorem2_suite(scale: Scale) -> SuiteReport {
    let mut t = Tally::new("theorem2");
    let count = scale.pick(20, 100);
    for k in 0..count {
        let inst = theorem2_instance(0x7432_0000 + k as u64);
        let (m, _) = inst.parts;
        let cert_resid = dist(&inst.y, &inst.dict.mul_vec(&inst.certificate).expect("shape"));
        t.check(cert_resid <= inst.epsilon, || format!("instance {k}: certificate infeasible"));
        match oracle::solve_program_13(&inst.dict, &inst.y, inst.epsilon, inst.parts) {
            Ok(x) => {
                let stray: f64 = x[m..].iter().cloned().fold(0.0, f64::max);
                t.check(stray <= CONFINEMENT_SUPPORT_TOL, || {
                    format!("instance {k}: mass {stray:e} on A' (Delta1 {}, Delta2 {})", inst.deltas.0, inst.deltas.1)
                });
                let resid = dist(&inst.y, &inst.dict.mul_vec(&x).expect("shape"));
                t.check(resid <= inst.epsilon + oracle::BALL_TOL, || format!("instance {k}: solution leaves the ball"));
                let obj = oracle::program_13_objective(&inst.dict, &inst.y, &x).unwrap_or(f64::NAN);
                let cert = oracle::program_13_objective(&inst.dict, &inst.y, &inst.certificate).unwrap_or(f64::NAN);
                t.check(obj <= cert + 1e-9, || format!("instance {k}: objective {obj} above the certificate's {cert}"));
            }
            Err(e) => t.fail(format!("instance {k}: {e}")),
        }
    }
    t.finish(format!("support inside A on {count}/{count} instances"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_suite() {
        assert!(run_suite("nope", Scale::Quick).is_none());
    }

    #[test]
    fn block_codes_are_chained() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (codes, labels) = random_codes(&mut rng, 10, 40, Some(2));
        assert_eq!(labels.iter().filter(|&&l| l == 1).count(), 20);
        assert!(codes.atom_degrees().iter().all(|&d| d > 0.0));
    }

    #[test]
    fn theorem_instances_meet_their_conditions() {
        let (model, data, truth, _) = theorem1_instance(3);
        let s = separation_stats(&model, &data, &truth).unwrap();
        assert!(s.delta > 2.0 * s.r);
        let inst = theorem2_instance(3);
        assert!(inst.deltas.1 > inst.deltas.0);
        assert!(inst.parts.0 + inst.parts.1 <= 12);
    }
}
