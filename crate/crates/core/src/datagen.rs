//! Synthetic datasets and the planar Delaunay generative model.
//!
//! In the model, atoms in the plane are triangulated and each triangle belongs
//! to one cluster. A point is a random convex combination of the vertices of
//! one triangle, plus optional Gaussian noise.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_dim, Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::spectral::CodeMatrix;

/// Relative tolerance below which four points count as co-circular.
pub const COCIRCULAR_TOL: f64 = 1e-9;
/// Relative tolerance below which the input counts as collinear.
pub const COLLINEAR_TOL: f64 = 1e-9;

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal(sigma: f64) -> Result<Option<Normal<f64>>> {
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(alloc::format!(
            "noise sigma must be finite and nonnegative, got {sigma}"
        )));
    }
    Ok(if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).expect("valid sigma"))
    } else {
        None
    })
}

/// Two interleaved half circles of radius 1: the upper one centred at the
/// origin (label 0, `ceil(n/2)` points) and the lower one centred at
/// `(1, 0.5)` (label 1). Angles are uniform on `[0, pi]`.
pub fn gen_two_moons(n: usize, noise_sigma: f64, seed: u64) -> Result<(Matrix, Vec<usize>)> {
    if n < 2 {
        return Err(Error::InvalidParameter(alloc::format!(
            "two moons needs at least 2 points, got {n}"
        )));
    }
    let noise = normal(noise_sigma)?;
    let mut rng = rng_for(seed);
    let first = n.div_ceil(2);
    let mut data = Matrix::zeros(2, n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let t = rng.random::<f64>() * PI;
        let (s, c) = libm::sincos(t);
        let (mut x, mut y, l) = if i < first {
            (c, s, 0)
        } else {
            (1.0 - c, 0.5 - s, 1)
        };
        if let Some(nd) = &noise {
            x += nd.sample(&mut rng);
            y += nd.sample(&mut rng);
        }
        data.col_mut(i).copy_from_slice(&[x, y]);
        labels.push(l);
    }
    Ok((data, labels))
}

/// Two concentric circles of radii 1 (label 0, `ceil(n/2)` points) and
/// `1 - delta` (label 1), uniform angles.
pub fn gen_concentric_circles(
    n: usize,
    delta: f64,
    seed: u64,
    noise_sigma: f64,
) -> Result<(Matrix, Vec<usize>)> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(Error::InvalidParameter(alloc::format!(
            "circle separation must lie in [0, 1], got {delta}"
        )));
    }
    let noise = normal(noise_sigma)?;
    let mut rng = rng_for(seed);
    let first = n.div_ceil(2);
    let mut data = Matrix::zeros(2, n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let (r, l) = if i < first { (1.0, 0) } else { (1.0 - delta, 1) };
        let (s, c) = libm::sincos(rng.random::<f64>() * 2.0 * PI);
        let (mut x, mut y) = (r * c, r * s);
        if let Some(nd) = &noise {
            x += nd.sample(&mut rng);
            y += nd.sample(&mut rng);
        }
        data.col_mut(i).copy_from_slice(&[x, y]);
        labels.push(l);
    }
    Ok((data, labels))
}

/// `n` points on the unit circle, all with label 0.
pub fn gen_circle(n: usize, seed: u64, noise_sigma: f64) -> Result<(Matrix, Vec<usize>)> {
    let (data, _) = gen_concentric_circles(2 * n, 0.0, seed, noise_sigma)?;
    Ok((data.select_columns(&(0..n).collect::<Vec<_>>()), vec![0; n]))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preprocess {
    /// Global affine map of the smallest entry to 0 and the largest to 1.
    MinMax,
    /// Zero mean and unit standard deviation per coordinate.
    Standardize,
    /// Each point scaled to unit norm; zero points are left alone.
    UnitNorm,
}

impl Preprocess {
    pub const ALL: [Preprocess; 3] = [Preprocess::MinMax, Preprocess::Standardize, Preprocess::UnitNorm];

    pub fn name(self) -> &'static str {
        match self {
            Preprocess::MinMax => "minmax",
            Preprocess::Standardize => "standardize",
            Preprocess::UnitNorm => "unitnorm",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Preprocess::ALL.into_iter().find(|p| p.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Preprocessed {
    pub data: Matrix,
    /// Columns that unit normalization had to leave at zero.
    pub zero_columns: Vec<usize>,
}

pub fn preprocess(data: &Matrix, mode: Preprocess) -> Result<Preprocessed> {
    data.check_finite("data")?;
    let mut out = data.clone();
    let mut zero_columns = Vec::new();
    match mode {
        Preprocess::MinMax => {
            let lo = data.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
            let hi = data.as_slice().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let span = hi - lo;
            for v in out.as_mut_slice() {
                *v = if span > 0.0 { (*v - lo) / span } else { 0.0 };
            }
        }
        Preprocess::Standardize => {
            let n = data.cols();
            if n == 0 {
                return Err(Error::Empty("data"));
            }
            for r in 0..data.rows() {
                let row = data.row(r);
                let mean = row.iter().sum::<f64>() / n as f64;
                let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
                let sd = libm::sqrt(var);
                if sd == 0.0 {
                    return Err(Error::Degenerate(alloc::format!(
                        "coordinate {r} is constant and cannot be standardized"
                    )));
                }
                for i in 0..n {
                    out[(r, i)] = (row[i] - mean) / sd;
                }
            }
        }
        Preprocess::UnitNorm => {
            for i in 0..data.cols() {
                let c = out.col_mut(i);
                let nrm = libm::sqrt(c.iter().map(|v| v * v).sum());
                if nrm > 0.0 {
                    c.iter_mut().for_each(|v| *v /= nrm);
                } else {
                    zero_columns.push(i);
                }
            }
        }
    }
    Ok(Preprocessed {
        data: out,
        zero_columns,
    })
}

// ---------------------------------------------------------------------------
// Delaunay triangulation

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn det2(u: [f64; 2], v: [f64; 2]) -> f64 {
    u[0] * v[1] - u[1] * v[0]
}

fn sub(a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    [a[0] - b[0], a[1] - b[1]]
}

fn sq(a: [f64; 2]) -> f64 {
    a[0] * a[0] + a[1] * a[1]
}

/// Whether point `d` lies strictly inside the circumcircle of the ccw
/// triangle `(a, b, c)`, with indices used to settle co-circular ties.
///
/// Ties are decided as if every lifted height `|p|^2` were lowered by a tiny
/// amount that is larger for lower indices; the sign then comes from the
/// partial derivative of the lifted determinant for the lowest-index point
/// that moves it.
pub fn in_circumcircle(pts: &[[f64; 2]], tri: [usize; 3], d: usize) -> bool {
    let [ia, ib, ic] = tri;
    let (a, b, c, p) = (pts[ia], pts[ib], pts[ic], pts[d]);
    let (ad, bd, cd) = (sub(a, p), sub(b, p), sub(c, p));
    let (ha, hb, hc) = (sq(ad), sq(bd), sq(cd));
    let det = ha * det2(bd, cd) - hb * det2(ad, cd) + hc * det2(ad, bd);
    let scale = ha.max(hb).max(hc);
    if det.abs() > COCIRCULAR_TOL * scale * scale {
        return det > 0.0;
    }
    let da = det2(bd, cd);
    let db = -det2(ad, cd);
    let dc = det2(ad, bd);
    let dd = -(da + db + dc);
    let mut partials = [(ia, da), (ib, db), (ic, dc), (d, dd)];
    partials.sort_by_key(|&(i, _)| i);
    let tiny = COLLINEAR_TOL * scale;
    partials
        .iter()
        .find(|(_, g)| g.abs() > tiny)
        .is_some_and(|&(_, g)| -g > 0.0)
}

/// Super-triangle directions, turned off the axes so that axis-aligned inputs
/// do not sit on the symbolic boundaries.
fn super_dirs() -> [[f64; 2]; 3] {
    let base = 0.123_456_789;
    let mut out = [[0.0; 2]; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let (s, c) = libm::sincos(base + 2.0 * PI * k as f64 / 3.0);
        *o = [c, s];
    }
    out
}

struct Triangulator<'a> {
    pts: &'a [[f64; 2]],
    dirs: [[f64; 2]; 3],
}

impl Triangulator<'_> {
    fn is_inf(&self, v: usize) -> bool {
        v >= self.pts.len()
    }

    fn dir(&self, v: usize) -> [f64; 2] {
        self.dirs[v - self.pts.len()]
    }

    /// Circumcircle test against a triangle that may contain vertices at
    /// infinity, taken as the limit of a super-triangle whose size grows
    /// without bound.
    fn contains(&self, tri: [usize; 3], p: usize) -> bool {
        let inf = tri.iter().filter(|&&v| self.is_inf(v)).count();
        let pp = self.pts[p];
        match inf {
            0 => in_circumcircle(self.pts, tri, p),
            1 => {
                let k = tri.iter().position(|&v| self.is_inf(v)).unwrap();
                let a = self.pts[tri[(k + 1) % 3]];
                let b = self.pts[tri[(k + 2) % 3]];
                let o = orient(a, b, pp);
                if o != 0.0 {
                    return o > 0.0;
                }
                let ab = sub(b, a);
                let t = (ab[0] * (pp[0] - a[0]) + ab[1] * (pp[1] - a[1])) / sq(ab);
                t > 0.0 && t < 1.0
            }
            2 => {
                let k = tri.iter().position(|&v| !self.is_inf(v)).unwrap();
                let a = self.pts[tri[k]];
                let u1 = self.dir(tri[(k + 1) % 3]);
                let u2 = self.dir(tri[(k + 2) % 3]);
                let w = [u1[0] + u2[0], u1[1] + u2[1]];
                let s = w[0] * (pp[0] - a[0]) + w[1] * (pp[1] - a[1]);
                if s != 0.0 {
                    return s > 0.0;
                }
                sq(pp) < sq(a)
            }
            _ => true,
        }
    }

    fn run(&self) -> Vec<[usize; 3]> {
        let m = self.pts.len();
        let mut tris: Vec<[usize; 3]> = vec![[m, m + 1, m + 2]];
        for p in 0..m {
            let (bad, keep): (Vec<[usize; 3]>, Vec<[usize; 3]>) =
                tris.into_iter().partition(|&t| self.contains(t, p));
            let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
            for t in &bad {
                for k in 0..3 {
                    *edges.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
                }
            }
            tris = keep;
            for (&(u, v), _) in edges.iter() {
                if !edges.contains_key(&(v, u)) {
                    tris.push([u, v, p]);
                }
            }
        }
        tris.retain(|t| t.iter().all(|&v| v < m));
        for t in tris.iter_mut() {
            let r = (0..3).min_by_key(|&k| t[k]).unwrap();
            *t = [t[r], t[(r + 1) % 3], t[(r + 2) % 3]];
        }
        tris.sort_unstable();
        tris
    }
}

fn points_2d(points: &Matrix) -> Result<Vec<[f64; 2]>> {
    check_dim("point dimension", 2, points.rows())?;
    points.check_finite("points")?;
    Ok(points.columns().map(|c| [c[0], c[1]]).collect())
}

/// Delaunay triangulation by Bowyer-Watson insertion in index order.
///
/// Triangles are returned counter-clockwise, starting at their lowest index,
/// sorted. Duplicate and all-collinear inputs are rejected.
pub fn delaunay_triangulate(points: &Matrix) -> Result<Vec<[usize; 3]>> {
    let pts = points_2d(points)?;
    let m = pts.len();
    if m < 3 {
        return Err(Error::InvalidInput(alloc::format!(
            "triangulation needs at least 3 points, got {m}"
        )));
    }
    let span = pts
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut sorted: Vec<usize> = (0..m).collect();
    sorted.sort_by(|&i, &j| pts[i][0].total_cmp(&pts[j][0]).then(pts[i][1].total_cmp(&pts[j][1])));
    for w in sorted.windows(2) {
        if pts[w[0]] == pts[w[1]] {
            return Err(Error::InvalidInput(alloc::format!(
                "points {} and {} coincide",
                w[0].min(w[1]),
                w[0].max(w[1])
            )));
        }
    }
    // Collinearity against the pair spanning the set.
    let (i0, i1) = (sorted[0], sorted[m - 1]);
    let base = sub(pts[i1], pts[i0]);
    let blen = libm::sqrt(sq(base));
    let collinear = pts
        .iter()
        .all(|&p| (orient(pts[i0], pts[i1], p) / blen).abs() <= COLLINEAR_TOL * span);
    if collinear {
        return Err(Error::Degenerate("all points are collinear".into()));
    }
    Ok(Triangulator {
        pts: &pts,
        dirs: super_dirs(),
    }
    .run())
}

// ---------------------------------------------------------------------------
// Generative model

/// Atoms, their triangulation restricted to single-cluster triangles, and the
/// point noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaunayModel {
    pub atoms: Matrix,
    pub triangles: Vec<[usize; 3]>,
    pub atom_cluster: Vec<usize>,
    pub noise_sigma: f64,
}

impl DelaunayModel {
    /// Triangulates all atoms together and keeps the triangles whose three
    /// vertices share a cluster.
    pub fn new(atoms: Matrix, atom_cluster: Vec<usize>, noise_sigma: f64) -> Result<Self> {
        check_dim("atom clusters", atoms.cols(), atom_cluster.len())?;
        normal(noise_sigma)?;
        let mut triangles = delaunay_triangulate(&atoms)?;
        triangles.retain(|t| {
            atom_cluster[t[0]] == atom_cluster[t[1]] && atom_cluster[t[1]] == atom_cluster[t[2]]
        });
        if triangles.is_empty() {
            return Err(Error::Degenerate(
                "no triangle has all three vertices in one cluster".into(),
            ));
        }
        Ok(DelaunayModel {
            atoms,
            triangles,
            atom_cluster,
            noise_sigma,
        })
    }

    pub fn cluster_count(&self) -> usize {
        self.atom_cluster.iter().copied().max().map_or(0, |c| c + 1)
    }

    pub fn triangle_cluster(&self, t: usize) -> usize {
        self.atom_cluster[self.triangles[t][0]]
    }

    /// Longest edge of triangle `t`.
    pub fn triangle_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let p = |i: usize| self.atoms.col(i);
        libm::sqrt(sq_dist(p(a), p(b)).max(sq_dist(p(b), p(c))).max(sq_dist(p(a), p(c))))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub labels: Vec<usize>,
    pub true_codes: CodeMatrix,
    pub triangle_of_point: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TriangleWeighting {
    #[default]
    Uniform,
    Area,
}

/// Draws `n` points with uniformly chosen triangles.
pub fn sample_delaunay_model(model: &DelaunayModel, n: usize, seed: u64) -> Result<(Matrix, GroundTruth)> {
    sample_delaunay_model_weighted(model, n, seed, TriangleWeighting::Uniform)
}

pub fn sample_delaunay_model_weighted(
    model: &DelaunayModel,
    n: usize,
    seed: u64,
    weighting: TriangleWeighting,
) -> Result<(Matrix, GroundTruth)> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample size must be at least 1".into()));
    }
    let noise = normal(model.noise_sigma)?;
    let nt = model.triangles.len();
    if nt == 0 {
        return Err(Error::Empty("model triangles"));
    }
    let cumulative: Vec<f64> = {
        let mut acc = 0.0;
        model
            .triangles
            .iter()
            .map(|&[a, b, c]| {
                acc += match weighting {
                    TriangleWeighting::Uniform => 1.0,
                    TriangleWeighting::Area => {
                        let p = |i: usize| [model.atoms[(0, i)], model.atoms[(1, i)]];
                        orient(p(a), p(b), p(c)).abs()
                    }
                };
                acc
            })
            .collect()
    };
    let total = cumulative[nt - 1];
    let m = model.atoms.cols();
    let mut rng = rng_for(seed);
    let mut data = Matrix::zeros(2, n);
    let mut labels = Vec::with_capacity(n);
    let mut tri_of = Vec::with_capacity(n);
    let mut codes = CodeMatrix::builder(m, n);
    for i in 0..n {
        let r = rng.random::<f64>() * total;
        let t = cumulative.partition_point(|&c| c <= r).min(nt - 1);
        let (u, v): (f64, f64) = (rng.random(), rng.random());
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        let bary = [lo, hi - lo, 1.0 - hi];
        let mut entries: Vec<(usize, f64)> = model.triangles[t].iter().copied().zip(bary).collect();
        entries.sort_by_key(|e| e.0);
        let dst = data.col_mut(i);
        for &(j, w) in &entries {
            dst[0] += w * model.atoms[(0, j)];
            dst[1] += w * model.atoms[(1, j)];
        }
        if let Some(nd) = &noise {
            dst[0] += nd.sample(&mut rng);
            dst[1] += nd.sample(&mut rng);
        }
        codes.push_sparse(&entries);
        labels.push(model.triangle_cluster(t));
        tri_of.push(t);
    }
    Ok((
        data,
        GroundTruth {
            labels,
            true_codes: codes.finish()?,
            triangle_of_point: tri_of,
        },
    ))
}

/// Point graph in which two points are adjacent when their triangles are
/// equal or share an edge, summarized at the triangle level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectivityReport {
    /// Edge-sharing neighbours of each model triangle.
    pub triangle_neighbors: Vec<Vec<usize>>,
    pub triangle_of_point: Vec<usize>,
    /// Per cluster label: its points are nonempty and path-connected.
    pub cluster_connected: Vec<bool>,
    /// Some path joins points of different clusters.
    pub cross_cluster_path: bool,
}

impl ConnectivityReport {
    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        let (s, t) = (self.triangle_of_point[i], self.triangle_of_point[j]);
        s == t || self.triangle_neighbors[s].contains(&t)
    }

    pub fn all_clusters_connected(&self) -> bool {
        self.cluster_connected.iter().all(|&c| c)
    }
}

pub fn delaunay_connectivity(model: &DelaunayModel, truth: &GroundTruth) -> Result<ConnectivityReport> {
    let nt = model.triangles.len();
    if let Some(i) = truth.triangle_of_point.iter().position(|&t| t >= nt) {
        return Err(Error::InvalidInput(alloc::format!(
            "point {i} lies outside every model triangle"
        )));
    }
    let mut by_edge: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
    for (t, tri) in model.triangles.iter().enumerate() {
        for k in 0..3 {
            let (u, v) = (tri[k], tri[(k + 1) % 3]);
            by_edge.entry((u.min(v), u.max(v))).or_default().push(t);
        }
    }
    let mut neighbors = vec![Vec::new(); nt];
    for ts in by_edge.values() {
        for &a in ts {
            for &b in ts {
                if a != b && !neighbors[a].contains(&b) {
                    neighbors[a].push(b);
                }
            }
        }
    }
    neighbors.iter_mut().for_each(|v| v.sort_unstable());

    let mut occupied = vec![false; nt];
    truth.triangle_of_point.iter().for_each(|&t| occupied[t] = true);

    // Components of occupied triangles.
    let mut comp = vec![usize::MAX; nt];
    let mut ncomp = 0;
    for s in 0..nt {
        if !occupied[s] || comp[s] != usize::MAX {
            continue;
        }
        let mut queue = VecDeque::from([s]);
        comp[s] = ncomp;
        while let Some(t) = queue.pop_front() {
            for &u in &neighbors[t] {
                if occupied[u] && comp[u] == usize::MAX {
                    comp[u] = ncomp;
                    queue.push_back(u);
                }
            }
        }
        ncomp += 1;
    }
    let k = model.cluster_count();
    let mut comps_of_cluster: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut cross = false;
    let mut comp_cluster = vec![usize::MAX; ncomp];
    for (&t, &l) in truth.triangle_of_point.iter().zip(&truth.labels) {
        let c = comp[t];
        if !comps_of_cluster[l].contains(&c) {
            comps_of_cluster[l].push(c);
        }
        if comp_cluster[c] == usize::MAX {
            comp_cluster[c] = l;
        } else if comp_cluster[c] != l {
            cross = true;
        }
    }
    Ok(ConnectivityReport {
        triangle_neighbors: neighbors,
        triangle_of_point: truth.triangle_of_point.clone(),
        cluster_connected: comps_of_cluster.iter().map(|c| c.len() == 1).collect(),
        cross_cluster_path: cross,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationStats {
    /// Smallest distance between points of different clusters.
    pub delta: f64,
    /// Largest diameter of a triangle that holds at least one point.
    pub r: f64,
    pub separated: bool,
}

pub fn separation_stats(model: &DelaunayModel, data: &Matrix, truth: &GroundTruth) -> Result<SeparationStats> {
    check_dim("points", truth.labels.len(), data.cols())?;
    check_dim("points", truth.triangle_of_point.len(), data.cols())?;
    let mut best = f64::INFINITY;
    for i in 0..data.cols() {
        for j in (i + 1)..data.cols() {
            if truth.labels[i] != truth.labels[j] {
                best = best.min(sq_dist(data.col(i), data.col(j)));
            }
        }
    }
    if best.is_infinite() {
        return Err(Error::Degenerate("only one cluster present; separation undefined".into()));
    }
    let mut occupied: Vec<usize> = truth.triangle_of_point.clone();
    occupied.sort_unstable();
    occupied.dedup();
    if let Some(&t) = occupied.iter().find(|&&t| t >= model.triangles.len()) {
        return Err(Error::InvalidInput(alloc::format!("unknown triangle {t}")));
    }
    let r = occupied.iter().map(|&t| model.triangle_diameter(t)).fold(0.0, f64::max);
    let delta = libm::sqrt(best);
    Ok(SeparationStats {
        delta,
        r,
        separated: delta > 2.0 * r,
    })
}
