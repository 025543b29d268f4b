//! Timing harness for the scaling study.

use std::time::Instant;

use kds_core::datagen::gen_two_moons;
use kds_core::spectral::{cluster_pipeline, ClusterOptions};
use kds_core::trainer::encode_columns;
use kds_core::{clustering_accuracy, CodeMatrix, EncoderParams, Matrix, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRecord {
    pub n: usize,
    pub m: usize,
    pub t_encode_seconds: f64,
    pub t_cluster_seconds: f64,
    pub accuracy: f64,
    pub seed: u64,
}

pub const CSV_HEADER: &str = "n,m,t_encode_seconds,t_cluster_seconds,accuracy,seed";

impl BenchmarkRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:?},{:?},{:?},{}",
            self.n, self.m, self.t_encode_seconds, self.t_cluster_seconds, self.accuracy, self.seed
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slopes {
    pub encode_slope: f64,
    pub cluster_slope: f64,
    pub n: Vec<usize>,
}

/// Least-squares slope of `log y` against `log x`; `None` with fewer than
/// three points or non-positive values.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 3 || x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Runs `f` once to warm up, then `repeats` more times; returns the fastest
/// wall time and the last result. The minimum is the least disturbed by
/// other load on the machine.
pub fn min_time<T>(repeats: usize, mut f: impl FnMut() -> Result<T>) -> Result<(f64, T)> {
    let mut out = f()?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        out = f()?;
        times.push(start.elapsed().as_secs_f64());
    }
    Ok((times.into_iter().fold(f64::INFINITY, f64::min), out))
}

pub struct BenchSpec<'a> {
    pub atoms: &'a Matrix,
    pub encoder: EncoderParams,
    pub alpha: f64,
    pub noise: f64,
    pub cluster: ClusterOptions,
    pub repeats: usize,
}

/// Times encode-all and the clustering step on a fresh moons sample of size `n`.
pub fn bench_cell(spec: &BenchSpec<'_>, n: usize, seed: u64) -> Result<BenchmarkRecord> {
    let (data, labels) = gen_two_moons(n, spec.noise, seed)?;
    let (t_encode, codes): (f64, CodeMatrix) = min_time(spec.repeats, || {
        encode_columns(spec.atoms, &data, &spec.encoder, spec.alpha)
    })?;
    let (t_cluster, out) = min_time(spec.repeats, || cluster_pipeline(&codes, Some(spec.atoms), &spec.cluster))?;
    Ok(BenchmarkRecord {
        n,
        m: spec.atoms.cols(),
        t_encode_seconds: t_encode,
        t_cluster_seconds: t_cluster,
        accuracy: clustering_accuracy(&out.data_labels, &labels)?,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let x = [1e4, 2e4, 4e4, 8e4];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.9)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 0.9).abs() < 1e-12);
        assert!(loglog_slope(&x[..2], &y[..2]).is_none());
        assert!(loglog_slope(&x, &[1.0, 0.0, 1.0, 1.0]).is_none());
    }

    #[test]
    fn csv_row_matches_header() {
        let r = BenchmarkRecord {
            n: 10,
            m: 4,
            t_encode_seconds: 0.5,
            t_cluster_seconds: 0.25,
            accuracy: 1.0,
            seed: 3,
        };
        assert_eq!(r.csv_row().split(',').count(), CSV_HEADER.split(',').count());
    }
}
