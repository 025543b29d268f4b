use std::collections::{BTreeSet, VecDeque};

use kds_core::datagen::{
    delaunay_connectivity, delaunay_triangulate, gen_two_moons, sample_delaunay_model,
    separation_stats, DelaunayModel, GroundTruth,
};
use kds_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_points(rng: &mut ChaCha8Rng, m: usize) -> Matrix {
    Matrix::from_col_major(2, m, (0..2 * m).map(|_| rng.random::<f64>() * 10.0).collect()).unwrap()
}

fn pt(p: &Matrix, i: usize) -> (f64, f64) {
    (p[(0, i)], p[(1, i)])
}

/// Centre and squared radius of the circle through three points.
fn circumcircle(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Option<((f64, f64), f64)> {
    let d = 2.0 * (a.0 * (b.1 - c.1) + b.0 * (c.1 - a.1) + c.0 * (a.1 - b.1));
    if d.abs() < 1e-12 {
        return None;
    }
    let (a2, b2, c2) = (a.0 * a.0 + a.1 * a.1, b.0 * b.0 + b.1 * b.1, c.0 * c.0 + c.1 * c.1);
    let ux = (a2 * (b.1 - c.1) + b2 * (c.1 - a.1) + c2 * (a.1 - b.1)) / d;
    let uy = (a2 * (c.0 - b.0) + b2 * (a.0 - c.0) + c2 * (b.0 - a.0)) / d;
    let r2 = (a.0 - ux).powi(2) + (a.1 - uy).powi(2);
    Some(((ux, uy), r2))
}

/// Strictly-inside count of the circumcircle with a relative margin.
fn points_inside(p: &Matrix, tri: [usize; 3], margin: f64) -> usize {
    let Some((c, r2)) = circumcircle(pt(p, tri[0]), pt(p, tri[1]), pt(p, tri[2])) else {
        return usize::MAX;
    };
    (0..p.cols())
        .filter(|i| !tri.contains(i))
        .filter(|&i| {
            let q = pt(p, i);
            (q.0 - c.0).powi(2) + (q.1 - c.1).powi(2) < r2 * (1.0 - margin)
        })
        .count()
}

/// All triples with an empty circumcircle, by exhaustive search.
fn brute_force(p: &Matrix) -> BTreeSet<[usize; 3]> {
    let m = p.cols();
    let mut out = BTreeSet::new();
    for i in 0..m {
        for j in (i + 1)..m {
            for k in (j + 1)..m {
                if points_inside(p, [i, j, k], 0.0) == 0 {
                    out.insert([i, j, k]);
                }
            }
        }
    }
    out
}

fn as_sorted_set(tris: &[[usize; 3]]) -> BTreeSet<[usize; 3]> {
    tris.iter()
        .map(|t| {
            let mut s = *t;
            s.sort_unstable();
            s
        })
        .collect()
}

fn area2(p: &Matrix, t: [usize; 3]) -> f64 {
    let (a, b, c) = (pt(p, t[0]), pt(p, t[1]), pt(p, t[2]));
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
}

#[test]
fn thirty_points_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..5 {
        let p = random_points(&mut rng, 30);
        let tris = delaunay_triangulate(&p).unwrap();
        assert_eq!(as_sorted_set(&tris), brute_force(&p));
    }
}

#[test]
fn two_hundred_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for _ in 0..200 {
        let m = rng.random_range(3..=40);
        let p = random_points(&mut rng, m);
        let tris = delaunay_triangulate(&p).unwrap();
        for &t in &tris {
            assert!(area2(&p, t) > 0.0, "not counter-clockwise");
            assert_eq!(points_inside(&p, t, 1e-9), 0);
        }
        assert_eq!(as_sorted_set(&tris), brute_force(&p));
    }
}

/// Andrew's monotone chain, keeping collinear boundary points.
fn hull_size_with_collinear(p: &Matrix) -> usize {
    let mut pts: Vec<(f64, f64)> = (0..p.cols()).map(|i| pt(p, i)).collect();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let mut hull: Vec<(f64, f64)> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &(f64, f64)>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &q in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) < 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    hull.len()
}

#[test]
fn co_circular_grids_are_triangulated_consistently() {
    for (w, h) in [(2, 2), (3, 3), (4, 3), (5, 5), (6, 4)] {
        let mut cols = Vec::new();
        for y in 0..h {
            for x in 0..w {
                cols.push([x as f64, y as f64]);
            }
        }
        let p = Matrix::from_columns(&cols).unwrap();
        let tris = delaunay_triangulate(&p).unwrap();
        let m = p.cols();
        let hull = hull_size_with_collinear(&p);
        assert_eq!(tris.len(), 2 * m - hull - 2, "{w}x{h}");
        let total: f64 = tris.iter().map(|&t| area2(&p, t)).sum();
        assert!((total - 2.0 * ((w - 1) * (h - 1)) as f64).abs() < 1e-9);
        for &t in &tris {
            assert!(area2(&p, t) > 0.0);
            assert_eq!(points_inside(&p, t, 1e-9), 0);
        }
    }
}

#[test]
fn moon_noise_level() {
    let (y, labels) = gen_two_moons(100_000, 0.05, 17).unwrap();
    let residuals: Vec<f64> = y
        .columns()
        .zip(&labels)
        .map(|(p, &l)| {
            let c = if l == 0 { (0.0, 0.0) } else { (1.0, 0.5) };
            ((p[0] - c.0).powi(2) + (p[1] - c.1).powi(2)).sqrt() - 1.0
        })
        .collect();
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    let sd = (residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / residuals.len() as f64).sqrt();
    assert!((sd - 0.05).abs() <= 0.05 * 0.05, "sd {sd}");
}

/// A fan of triangles around `centre` with `k` rim atoms.
fn fan(centre: (f64, f64), k: usize, radius: f64, phase: f64) -> Vec<[f64; 2]> {
    let mut out = vec![[centre.0, centre.1]];
    for i in 0..k {
        let t = phase + 2.0 * std::f64::consts::PI * i as f64 / k as f64;
        out.push([centre.0 + radius * t.cos(), centre.1 + radius * t.sin()]);
    }
    out
}

/// Connectivity straight from the definition: BFS over points where two
/// points are adjacent when their triangles coincide or share an edge.
fn bfs_connected(model: &DelaunayModel, truth: &GroundTruth, cluster: usize) -> bool {
    let tri_edges = |t: usize| {
        let v = model.triangles[t];
        let mut e: Vec<(usize, usize)> = (0..3).map(|k| (v[k].min(v[(k + 1) % 3]), v[k].max(v[(k + 1) % 3]))).collect();
        e.sort_unstable();
        e
    };
    let adjacent = |i: usize, j: usize| {
        let (s, t) = (truth.triangle_of_point[i], truth.triangle_of_point[j]);
        s == t || tri_edges(s).iter().any(|e| tri_edges(t).contains(e))
    };
    let members: Vec<usize> = (0..truth.labels.len()).filter(|&i| truth.labels[i] == cluster).collect();
    if members.is_empty() {
        return false;
    }
    let mut seen = vec![false; truth.labels.len()];
    let mut queue = VecDeque::from([members[0]]);
    seen[members[0]] = true;
    while let Some(i) = queue.pop_front() {
        for &j in &members {
            if !seen[j] && adjacent(i, j) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    members.iter().all(|&i| seen[i])
}

#[test]
fn single_fan_is_connected() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..20 {
        let k = rng.random_range(4..9);
        let atoms = Matrix::from_columns(&fan((0.0, 0.0), k, 1.0, rng.random())).unwrap();
        let model = DelaunayModel::new(atoms, vec![0; k + 1], 0.0).unwrap();
        let (_, truth) = sample_delaunay_model(&model, 40 * k, trial).unwrap();
        let occupied: BTreeSet<usize> = truth.triangle_of_point.iter().copied().collect();
        if occupied.len() < model.triangles.len() {
            continue;
        }
        let rep = delaunay_connectivity(&model, &truth).unwrap();
        assert!(rep.cluster_connected[0]);
        assert!(bfs_connected(&model, &truth, 0));
    }
}

#[test]
fn separated_fans_have_no_cross_path() {
    let mut cols = fan((0.0, 0.0), 5, 1.0, 0.1);
    cols.extend(fan((6.0, 0.5), 6, 1.0, 0.3));
    let atoms = Matrix::from_columns(&cols).unwrap();
    let clusters: Vec<usize> = (0..13).map(|j| usize::from(j >= 6)).collect();
    let model = DelaunayModel::new(atoms, clusters, 0.0).unwrap();
    assert_eq!(model.triangles.len(), 11);
    let (y, truth) = sample_delaunay_model(&model, 400, 3).unwrap();
    let rep = delaunay_connectivity(&model, &truth).unwrap();
    assert!(!rep.cross_cluster_path);
    for c in 0..2 {
        assert_eq!(rep.cluster_connected[c], bfs_connected(&model, &truth, c));
    }
    let same_tri = (1..400).find(|&j| truth.triangle_of_point[j] == truth.triangle_of_point[0]).unwrap();
    assert!(rep.adjacent(0, same_tri));

    let recon = model.atoms.matmul(&truth.true_codes.to_dense()).unwrap();
    assert!(recon.max_abs_diff(&y) <= 1e-12);

    let s = separation_stats(&model, &y, &truth).unwrap();
    let mut scaled = model.clone();
    scaled.atoms.scale(2.0);
    let mut y2 = y.clone();
    y2.scale(2.0);
    let s2 = separation_stats(&scaled, &y2, &truth).unwrap();
    assert!((s2.delta - 2.0 * s.delta).abs() <= 1e-12 * s2.delta);
    assert!((s2.r - 2.0 * s.r).abs() <= 1e-12 * s2.r);
    assert_eq!(s.separated, s2.separated);
}

#[test]
fn points_outside_the_model_are_rejected() {
    let atoms = Matrix::from_columns(&fan((0.0, 0.0), 4, 1.0, 0.2)).unwrap();
    let model = DelaunayModel::new(atoms, vec![0; 5], 0.0).unwrap();
    let (_, mut truth) = sample_delaunay_model(&model, 5, 1).unwrap();
    truth.triangle_of_point[2] = 99;
    assert!(delaunay_connectivity(&model, &truth).is_err());
}
