//! Spectral clustering on the bipartite point/atom graph.
//!
//! The codes `X` (`m x n`, simplex columns) define a graph with an edge of
//! weight `x_ij` between point `i` and atom `j`. Requiring the embedding to
//! be harmonic at the data vertices (`Q_Y = Q_A X`) reduces the Laplacian
//! quadratic form to `tr(Q_A L_A Q_A^T)` with `L_A = D_A - X X^T`, the
//! Laplacian of the atom graph with adjacency `X X^T`. Only an `m x m`
//! eigenproblem is solved; the rest is `O(nnz(X))`.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{dot, sq_dist, symmetric_eigen, Matrix};
use crate::SIMPLEX_TOL;

/// Atoms whose total code mass is at or below this are left out of the
/// eigenproblem.
pub const ZERO_DEGREE_TOL: f64 = 1e-12;

/// Lloyd iteration cap.
pub const KMEANS_MAX_ITER: usize = 300;

/// Sparse `m x n` code matrix, stored by column. Column `i` is the simplex
/// code of point `i`; exact zeros are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeMatrix {
    rows: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Incremental column-by-column construction of a [`CodeMatrix`].
#[derive(Debug, Clone)]
pub struct CodeMatrixBuilder {
    expected_cols: usize,
    inner: CodeMatrix,
}

impl CodeMatrixBuilder {
    pub fn push_dense(&mut self, col: &[f64]) {
        for (j, &v) in col.iter().enumerate() {
            if v != 0.0 {
                self.inner.row_idx.push(j);
                self.inner.values.push(v);
            }
        }
        self.inner.col_ptr.push(self.inner.row_idx.len());
    }

    pub fn push_sparse(&mut self, entries: &[(usize, f64)]) {
        for &(j, v) in entries {
            if v != 0.0 {
                self.inner.row_idx.push(j);
                self.inner.values.push(v);
            }
        }
        self.inner.col_ptr.push(self.inner.row_idx.len());
    }

    /// Validates and returns the matrix.
    pub fn finish(self) -> Result<CodeMatrix> {
        check_dim("code columns", self.expected_cols, self.inner.cols())?;
        self.inner.validate()?;
        Ok(self.inner)
    }
}

impl CodeMatrix {
    pub fn builder(rows: usize, cols: usize) -> CodeMatrixBuilder {
        CodeMatrixBuilder {
            expected_cols: cols,
            inner: CodeMatrix {
                rows,
                col_ptr: {
                    let mut p = Vec::with_capacity(cols + 1);
                    p.push(0);
                    p
                },
                row_idx: Vec::new(),
                values: Vec::new(),
            },
        }
    }

    /// From a dense `m x n` matrix whose columns are codes.
    pub fn from_dense(codes: &Matrix) -> Result<Self> {
        let mut b = CodeMatrix::builder(codes.rows(), codes.cols());
        for c in codes.columns() {
            b.push_dense(c);
        }
        b.finish()
    }

    /// From `(row, col, value)` triplets in any order. Duplicates are summed.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        for &(r, c, _) in &sorted {
            if r >= rows || c >= cols {
                return Err(Error::InvalidInput(alloc::format!(
                    "triplet ({r}, {c}) outside a {rows}x{cols} code matrix"
                )));
            }
        }
        sorted.sort_by(|a, b| (a.1, a.0).cmp(&(b.1, b.0)));
        let mut b = CodeMatrix::builder(rows, cols);
        let mut it = sorted.into_iter().peekable();
        let mut entries: Vec<(usize, f64)> = Vec::new();
        for c in 0..cols {
            entries.clear();
            while let Some(&(r, cc, v)) = it.peek() {
                if cc != c {
                    break;
                }
                match entries.last_mut() {
                    Some(last) if last.0 == r => last.1 += v,
                    _ => entries.push((r, v)),
                }
                it.next();
            }
            b.push_sparse(&entries);
        }
        b.finish()
    }

    fn validate(&self) -> Result<()> {
        for i in 0..self.cols() {
            let (idx, vals) = self.col(i);
            let mut sum = 0.0;
            let mut prev: Option<usize> = None;
            for (&r, &v) in idx.iter().zip(vals) {
                if r >= self.rows {
                    return Err(Error::InvalidInput(alloc::format!(
                        "code {i} references atom {r} of {}",
                        self.rows
                    )));
                }
                if prev.is_some_and(|p| p >= r) {
                    return Err(Error::InvalidInput(alloc::format!(
                        "code {i} has unsorted or repeated atom indices"
                    )));
                }
                prev = Some(r);
                if !v.is_finite() || v < -1e-12 {
                    return Err(Error::InvalidInput(alloc::format!(
                        "code {i} has entry {v} for atom {r}"
                    )));
                }
                sum += v;
            }
            if (sum - 1.0).abs() > SIMPLEX_TOL {
                return Err(Error::InvalidInput(alloc::format!(
                    "code {i} sums to {sum}, not 1"
                )));
            }
        }
        Ok(())
    }

    /// Number of atoms `m`.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of points `n`.
    pub fn cols(&self) -> usize {
        self.col_ptr.len() - 1
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored atom indices and values of column `i`.
    pub fn col(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.col_ptr[i], self.col_ptr[i + 1]);
        (&self.row_idx[a..b], &self.values[a..b])
    }

    pub fn dense_col(&self, i: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        let (idx, vals) = self.col(i);
        for (&r, &v) in idx.iter().zip(vals) {
            out[r] = v;
        }
        out
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols());
        for i in 0..self.cols() {
            let (idx, vals) = self.col(i);
            let c = out.col_mut(i);
            for (&r, &v) in idx.iter().zip(vals) {
                c[r] = v;
            }
        }
        out
    }

    /// `(row, col, value)` for every stored entry, column by column.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.cols()).flat_map(move |i| {
            let (idx, vals) = self.col(i);
            idx.iter().zip(vals).map(move |(&r, &v)| (r, i, v))
        })
    }

    /// Row sums of `X`: the weighted degree of each atom.
    pub fn atom_degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.rows];
        for (&r, &v) in self.row_idx.iter().zip(&self.values) {
            deg[r] += v;
        }
        deg
    }

    /// Mean number of entries above `threshold` per code.
    pub fn mean_support(&self, threshold: f64) -> f64 {
        if self.cols() == 0 {
            return 0.0;
        }
        let count = self.values.iter().filter(|&&v| v > threshold).count();
        count as f64 / self.cols() as f64
    }
}

/// Atom graph with adjacency `X X^T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedGraph {
    pub adjacency: Matrix,
    pub atom_degrees: Vec<f64>,
}

/// `X X^T` and the atom degrees, in `O(sum_i nnz(x_i)^2)`.
pub fn reduced_adjacency(codes: &CodeMatrix) -> ReducedGraph {
    let m = codes.rows();
    let mut adj = Matrix::zeros(m, m);
    for i in 0..codes.cols() {
        let (idx, vals) = codes.col(i);
        for (a, (&p, &xp)) in idx.iter().zip(vals).enumerate() {
            for (&q, &xq) in idx[a..].iter().zip(&vals[a..]) {
                adj[(p, q)] += xp * xq;
            }
        }
    }
    for p in 0..m {
        for q in (p + 1)..m {
            adj[(q, p)] = adj[(p, q)];
        }
    }
    ReducedGraph {
        adjacency: adj,
        atom_degrees: codes.atom_degrees(),
    }
}

/// `L_A = diag(degrees) - X X^T`.
pub fn schur_laplacian(graph: &ReducedGraph) -> Matrix {
    let mut l = graph.adjacency.clone();
    l.scale(-1.0);
    for (j, &d) in graph.atom_degrees.iter().enumerate() {
        l[(j, j)] += d;
    }
    l
}

/// Which Laplacian the embedding is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LaplacianMode {
    /// Eigenvectors of `L_A`; `Q_A` has orthonormal rows.
    #[default]
    Quadratic,
    /// Generalized eigenvectors of `L_A v = mu D_A v`; `Q_A` has rows
    /// orthonormal in the `D_A` inner product.
    Normalized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    /// `k x m`. Columns of atoms left out of the eigenproblem are zero.
    pub atoms: Matrix,
    /// `k x n`, equal to `atoms * X`.
    pub data: Matrix,
    /// The `k` smallest eigenvalues, ascending.
    pub eigenvalues: Vec<f64>,
    /// Atoms that took part in the eigenproblem.
    pub kept_atoms: Vec<usize>,
    /// Atoms with zero degree.
    pub dropped_atoms: Vec<usize>,
}

/// The `k`-dimensional harmonic spectral embedding of atoms and points.
///
/// Eigenvectors are ordered by ascending eigenvalue. Inside the eigenspace of
/// the smallest eigenvalue the basis is rotated so that the trivial vector
/// (constant, or `D^{1/2} 1` in normalized mode) comes first and the rest are
/// orthogonal to it. Each vector's largest-magnitude entry is made positive.
pub fn spectral_embed(codes: &CodeMatrix, k: usize, mode: LaplacianMode) -> Result<Embedding> {
    let m = codes.rows();
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(alloc::format!(
            "embedding dimension {k} must be in 1..={m}"
        )));
    }
    let graph = reduced_adjacency(codes);
    let lap = schur_laplacian(&graph);
    let deg = &graph.atom_degrees;
    let (kept, dropped): (Vec<usize>, Vec<usize>) =
        (0..m).partition(|&j| deg[j] > ZERO_DEGREE_TOL);
    let mk = kept.len();
    if k > mk {
        return Err(Error::InvalidParameter(alloc::format!(
            "embedding dimension {k} exceeds the {mk} atoms in use"
        )));
    }

    let mut sub = Matrix::zeros(mk, mk);
    for (a, &p) in kept.iter().enumerate() {
        for (b, &q) in kept.iter().enumerate() {
            sub[(a, b)] = lap[(p, q)];
        }
    }
    let sqrt_deg: Vec<f64> = kept.iter().map(|&j| libm::sqrt(deg[j])).collect();
    let mut trivial: Vec<f64> = match mode {
        LaplacianMode::Quadratic => vec![1.0; mk],
        LaplacianMode::Normalized => {
            for a in 0..mk {
                for b in 0..mk {
                    sub[(a, b)] /= sqrt_deg[a] * sqrt_deg[b];
                }
            }
            sqrt_deg.clone()
        }
    };
    let tn = libm::sqrt(dot(&trivial, &trivial));
    trivial.iter_mut().for_each(|v| *v /= tn);

    let eig = symmetric_eigen(&sub)?;
    let mut vectors: Vec<Vec<f64>> = (0..mk).map(|i| eig.vectors.col(i).to_vec()).collect();
    let scale = (0..mk).map(|a| sub[(a, a)].abs()).fold(1.0, f64::max);
    let cluster = eig
        .values
        .iter()
        .take_while(|&&v| v <= eig.values[0] + 1e-10 * scale)
        .count();
    canonicalize_kernel(&mut vectors[..cluster], &trivial);

    let mut q_atoms = Matrix::zeros(k, m);
    for (r, v) in vectors.iter_mut().take(k).enumerate() {
        fix_sign(v);
        for (a, &j) in kept.iter().enumerate() {
            q_atoms[(r, j)] = match mode {
                LaplacianMode::Quadratic => v[a],
                LaplacianMode::Normalized => v[a] / sqrt_deg[a],
            };
        }
    }
    let q_data = harmonic_extend(&q_atoms, codes)?;
    Ok(Embedding {
        atoms: q_atoms,
        data: q_data,
        eigenvalues: eig.values[..k].to_vec(),
        kept_atoms: kept,
        dropped_atoms: dropped,
    })
}

/// Rotates an orthonormal basis so that `trivial` is its first vector when it
/// lies in the span; otherwise leaves the basis alone.
fn canonicalize_kernel(basis: &mut [Vec<f64>], trivial: &[f64]) {
    if basis.len() < 2 {
        return;
    }
    let coeffs: Vec<f64> = basis.iter().map(|v| dot(v, trivial)).collect();
    let in_span = coeffs.iter().map(|c| c * c).sum::<f64>();
    if in_span < 1.0 - 1e-8 {
        return;
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(basis.len());
    out.push(trivial.to_vec());
    // Gram-Schmidt the old vectors against what we have, dropping the one
    // that is (numerically) spanned by the rest.
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::new();
    for v in basis.iter() {
        let mut w = v.clone();
        for _ in 0..2 {
            for u in &out {
                let c = dot(&w, u);
                w.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
            }
        }
        candidates.push((libm::sqrt(dot(&w, &w)), w));
    }
    let weakest = candidates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(i, _)| i)
        .unwrap_or(0);
    for (i, (_, w)) in candidates.into_iter().enumerate() {
        if i == weakest {
            continue;
        }
        let mut w = w;
        for _ in 0..2 {
            for u in &out {
                let c = dot(&w, u);
                w.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
            }
        }
        let nw = libm::sqrt(dot(&w, &w));
        w.iter_mut().for_each(|a| *a /= nw);
        out.push(w);
    }
    for (dst, src) in basis.iter_mut().zip(out) {
        *dst = src;
    }
}

fn fix_sign(v: &mut [f64]) {
    let mut best = 0usize;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v.get(best).is_some_and(|&x| x < 0.0) {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// `Q_Y = Q_A X`: every point is embedded at the code-weighted average of its
/// atoms' embeddings.
pub fn harmonic_extend(q_atoms: &Matrix, codes: &CodeMatrix) -> Result<Matrix> {
    check_dim("embedded atoms", codes.rows(), q_atoms.cols())?;
    let k = q_atoms.rows();
    let mut out = Matrix::zeros(k, codes.cols());
    for i in 0..codes.cols() {
        let (idx, vals) = codes.col(i);
        let dst = out.col_mut(i);
        for (&j, &x) in idx.iter().zip(vals) {
            for (o, q) in dst.iter_mut().zip(q_atoms.col(j)) {
                *o += x * q;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub labels: Vec<usize>,
    pub inertia: f64,
    /// `dim x k`.
    pub centroids: Matrix,
}

/// Lloyd's algorithm with k-means++ seeding and `replicates` restarts; the
/// lowest-inertia run wins (earliest on ties).
///
/// `points` holds one point per column.
pub fn kmeans(points: &Matrix, k: usize, replicates: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.cols();
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(alloc::format!(
            "cannot form {k} clusters from {n} points"
        )));
    }
    points.check_finite("k-means input")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..replicates.max(1) {
        let run = lloyd(points, k, &mut rng);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one replicate"))
}

fn plus_plus_seeds(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = points.cols();
    let mut centroids = Matrix::zeros(points.rows(), k);
    let first = rng.random_range(0..n);
    centroids.col_mut(0).copy_from_slice(points.col(first));
    let mut d2: Vec<f64> = points.columns().map(|p| sq_dist(p, points.col(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if w > 0.0 && target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            // Rounding can walk past the end; fall back to the last positive weight.
            if d2[chosen] == 0.0 {
                chosen = d2.iter().rposition(|&w| w > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.col_mut(c).copy_from_slice(points.col(pick));
        for (i, p) in points.columns().enumerate() {
            d2[i] = d2[i].min(sq_dist(p, points.col(pick)));
        }
    }
    centroids
}

fn nearest(p: &[f64], centroids: &Matrix) -> (usize, f64) {
    let mut best = (0usize, f64::INFINITY);
    for (c, q) in centroids.columns().enumerate() {
        let d = sq_dist(p, q);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(points: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> KMeansResult {
    let (dim, n) = (points.rows(), points.cols());
    let mut centroids = plus_plus_seeds(points, k, rng);
    let mut labels = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];
    for _ in 0..KMEANS_MAX_ITER {
        let mut changed = false;
        for (i, p) in points.columns().enumerate() {
            let (c, d) = nearest(p, &centroids);
            dist[i] = d;
            if labels[i] != c {
                labels[i] = c;
                changed = true;
            }
        }
        let mut counts = vec![0usize; k];
        for &l in &labels {
            counts[l] += 1;
        }
        // Repair empty clusters with the worst-served point of a cluster
        // that can spare one.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
            if let Some(i) = donor {
                counts[labels[i]] -= 1;
                labels[i] = c;
                counts[c] = 1;
                dist[i] = 0.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        centroids = Matrix::zeros(dim, k);
        for (i, p) in points.columns().enumerate() {
            let dst = centroids.col_mut(labels[i]);
            for (o, v) in dst.iter_mut().zip(p) {
                *o += v;
            }
        }
        for c in 0..k {
            let inv = 1.0 / counts[c].max(1) as f64;
            centroids.col_mut(c).iter_mut().for_each(|v| *v *= inv);
        }
    }
    let inertia = points
        .columns()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, centroids.col(l)))
        .sum();
    KMeansResult {
        labels,
        inertia,
        centroids,
    }
}

/// Fraction of points labelled correctly under the best one-to-one matching
/// of predicted to true labels.
pub fn clustering_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_dim("label vectors", truth.len(), pred.len())?;
    if pred.is_empty() {
        return Err(Error::Empty("labels"));
    }
    let size = pred.iter().chain(truth).copied().max().unwrap_or(0) + 1;
    let mut confusion = vec![vec![0i64; size]; size];
    for (&p, &t) in pred.iter().zip(truth) {
        confusion[p][t] += 1;
    }
    let cost: Vec<Vec<i64>> = confusion
        .iter()
        .map(|row| row.iter().map(|&c| -c).collect())
        .collect();
    let assignment = hungarian(&cost);
    let matched: i64 = assignment
        .iter()
        .enumerate()
        .map(|(p, &t)| confusion[p][t])
        .sum();
    Ok(matched as f64 / pred.len() as f64)
}

/// Minimum-cost perfect matching on a square cost matrix; returns the column
/// assigned to each row.
pub fn hungarian(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    const INF: i64 = i64::MAX / 4;
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = INF;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![0usize; n];
    for j in 1..=n {
        if p[j] > 0 {
            out[p[j] - 1] = j - 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOptions {
    pub clusters: usize,
    pub replicates: usize,
    pub seed: u64,
    pub mode: LaplacianMode,
    /// Cluster atoms together with the points; otherwise atoms take the label
    /// of the nearest data centroid in the embedding.
    pub include_atoms: bool,
}

impl Default for ClusterOptions {
    fn default() -> Self {
        ClusterOptions {
            clusters: 2,
            replicates: 10,
            seed: 0,
            mode: LaplacianMode::Quadratic,
            include_atoms: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterOutput {
    pub data_labels: Vec<usize>,
    pub atom_labels: Vec<usize>,
    pub embedding: Embedding,
    pub inertia: f64,
}

/// Spectral embedding followed by k-means on `[Q_Y, Q_A]`.
///
/// Atoms outside the eigenproblem (zero degree) take the label of the nearest
/// kept atom in data space when `atom_positions` is given, and the most
/// common data label otherwise.
pub fn cluster_pipeline(
    codes: &CodeMatrix,
    atom_positions: Option<&Matrix>,
    opts: &ClusterOptions,
) -> Result<ClusterOutput> {
    if let Some(a) = atom_positions {
        check_dim("atom positions", codes.rows(), a.cols())?;
    }
    let emb = spectral_embed(codes, opts.clusters, opts.mode)?;
    let n = codes.cols();
    let kept_q = emb.atoms.select_columns(&emb.kept_atoms);
    let (data_labels, mut atom_labels, inertia) = if opts.include_atoms {
        let all = emb.data.hstack(&kept_q)?;
        let km = kmeans(&all, opts.clusters, opts.replicates, opts.seed)?;
        let mut atom_labels = vec![0usize; codes.rows()];
        for (a, &j) in emb.kept_atoms.iter().enumerate() {
            atom_labels[j] = km.labels[n + a];
        }
        (km.labels[..n].to_vec(), atom_labels, km.inertia)
    } else {
        let km = kmeans(&emb.data, opts.clusters, opts.replicates, opts.seed)?;
        let mut atom_labels = vec![0usize; codes.rows()];
        for &j in &emb.kept_atoms {
            atom_labels[j] = nearest(emb.atoms.col(j), &km.centroids).0;
        }
        (km.labels, atom_labels, km.inertia)
    };

    if !emb.dropped_atoms.is_empty() {
        let mut counts = vec![0usize; opts.clusters];
        data_labels.iter().for_each(|&l| counts[l] += 1);
        let majority = (0..opts.clusters).max_by_key(|&c| (counts[c], core::cmp::Reverse(c))).unwrap_or(0);
        for &j in &emb.dropped_atoms {
            atom_labels[j] = match atom_positions {
                Some(pos) => emb
                    .kept_atoms
                    .iter()
                    .map(|&q| (q, sq_dist(pos.col(j), pos.col(q))))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(q, _)| atom_labels[q])
                    .unwrap_or(majority),
                None => majority,
            };
        }
    }
    Ok(ClusterOutput {
        data_labels,
        atom_labels,
        embedding: emb,
        inertia,
    })
}
