//! Label-adjusted kernel matrix oracle.
//!
//! All algorithms in this crate consume the matrix `Q` with
//! `Q[i][j] = y_i * y_j * K(x_i, x_j)` through this oracle, which computes
//! entries on demand and memoizes whole rows behind a thread-safe cache.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Kernel function selector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Kernel {
    Linear,
    /// `exp(-gamma * ||x - x'||^2)`, `gamma > 0`.
    Rbf {
        gamma: f64,
    },
}

impl Kernel {
    pub fn validate(&self) -> Result<()> {
        if let Kernel::Rbf { gamma } = self {
            if !(gamma.is_finite() && *gamma > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "rbf gamma must be a positive finite number, got {gamma}"
                )));
            }
        }
        Ok(())
    }
}

struct RowCache {
    /// Row index -> (row, recency stamp).
    map: HashMap<usize, (Arc<[f64]>, u64)>,
    clock: u64,
    cap: Option<usize>,
}

impl RowCache {
    fn get(&mut self, i: usize) -> Option<Arc<[f64]>> {
        self.clock += 1;
        let clock = self.clock;
        self.map.get_mut(&i).map(|slot| {
            slot.1 = clock;
            Arc::clone(&slot.0)
        })
    }

    fn insert(&mut self, i: usize, row: Arc<[f64]>) {
        self.clock += 1;
        if let Some(cap) = self.cap {
            while self.map.len() >= cap.max(1) && !self.map.contains_key(&i) {
                let oldest = self
                    .map
                    .iter()
                    .min_by_key(|(_, (_, stamp))| *stamp)
                    .map(|(&k, _)| k)
                    .expect("non-empty cache");
                self.map.remove(&oldest);
            }
        }
        self.map.entry(i).or_insert((row, self.clock));
    }
}

/// On-demand evaluator for `Q = diag(y) K diag(y)` over a dataset.
///
/// Concurrent reads are safe; cache insertion is synchronized internally,
/// and a cached row is always bit-identical to an uncached evaluation, so
/// results do not depend on thread interleaving.
pub struct KernelOracle {
    dataset: Dataset,
    kernel: Kernel,
    /// Q_ii, precomputed (kernel diagonal; labels square away).
    diag: Vec<f64>,
    /// Squared feature norms, used by the RBF distance identity.
    xnorm_sq: Vec<f64>,
    cache: Mutex<RowCache>,
}

impl KernelOracle {
    pub fn new(dataset: Dataset, kernel: Kernel) -> Result<Self> {
        kernel.validate()?;
        let xnorm_sq: Vec<f64> = dataset.samples().iter().map(|s| s.features.norm_sq()).collect();
        let diag = match kernel {
            Kernel::Linear => xnorm_sq.clone(),
            Kernel::Rbf { .. } => vec![1.0; dataset.n()],
        };
        Ok(KernelOracle {
            dataset,
            kernel,
            diag,
            xnorm_sq,
            cache: Mutex::new(RowCache { map: HashMap::new(), clock: 0, cap: None }),
        })
    }

    /// Caps the row cache at `entries` rows, evicting least-recently-used
    /// rows past the cap. Unbounded by default.
    pub fn with_row_cache_cap(mut self, entries: usize) -> Self {
        self.cache.get_mut().expect("unpoisoned").cap = Some(entries);
        self
    }

    pub fn n(&self) -> usize {
        self.dataset.n()
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    /// `Q_ii` without cache traffic.
    pub fn q_diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.n() {
            return Err(Error::IndexOutOfRange { index: i, n: self.n() });
        }
        Ok(())
    }

    /// Single entry `Q_ij`. Uses a cached row when one is available but never
    /// materializes a row just for one entry.
    pub fn q_entry(&self, i: usize, j: usize) -> Result<f64> {
        self.check_index(i)?;
        self.check_index(j)?;
        if i == j {
            return Ok(self.diag[i]);
        }
        {
            let mut cache = self.cache.lock().expect("unpoisoned");
            if let Some(row) = cache.get(i) {
                return Ok(row[j]);
            }
            if let Some(row) = cache.get(j) {
                return Ok(row[i]);
            }
        }
        Ok(self.compute_entry(i, j))
    }

    fn compute_entry(&self, i: usize, j: usize) -> f64 {
        let si = self.dataset.sample(i);
        let sj = self.dataset.sample(j);
        let yy = si.y() * sj.y();
        match self.kernel {
            Kernel::Linear => yy * si.features.dot(&sj.features),
            Kernel::Rbf { gamma } => {
                let dot = si.features.dot(&sj.features);
                // Cancellation can push the squared distance a hair negative.
                let dist_sq = (self.xnorm_sq[i] + self.xnorm_sq[j] - 2.0 * dot).max(0.0);
                yy * (-gamma * dist_sq).exp()
            }
        }
    }

    /// Full row `Q_i·`, memoized.
    pub fn q_row(&self, i: usize) -> Result<Arc<[f64]>> {
        self.check_index(i)?;
        if let Some(row) = self.cache.lock().expect("unpoisoned").get(i) {
            return Ok(row);
        }
        // Computed outside the lock: concurrent duplicate work is possible but
        // harmless since every computation yields identical values.
        let row = self.compute_row(i);
        let mut cache = self.cache.lock().expect("unpoisoned");
        cache.insert(i, Arc::clone(&row));
        Ok(cache.get(i).unwrap_or(row))
    }

    fn compute_row(&self, i: usize) -> Arc<[f64]> {
        let n = self.n();
        let si = self.dataset.sample(i);
        // Scatter x_i densely so each dot costs one pass over x_j's nonzeros.
        let mut dense = vec![0.0; self.dataset.dim()];
        si.features.scatter(&mut dense);
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            if j == i {
                row.push(self.diag[i]);
                continue;
            }
            let sj = self.dataset.sample(j);
            let dot = sj.features.dot_dense(&dense);
            let yy = si.y() * sj.y();
            let value = match self.kernel {
                Kernel::Linear => yy * dot,
                Kernel::Rbf { gamma } => {
                    let dist_sq = (self.xnorm_sq[i] + self.xnorm_sq[j] - 2.0 * dot).max(0.0);
                    yy * (-gamma * dist_sq).exp()
                }
            };
            row.push(value);
        }
        row.into()
    }

    /// Matrix-vector product `(Q beta)`, skipping zero entries of `beta`.
    pub fn q_matvec(&self, beta: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if beta.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: beta.len() });
        }
        let mut out = vec![0.0; n];
        for (j, &b) in beta.iter().enumerate() {
            if b == 0.0 {
                continue;
            }
            let row = self.q_row(j)?; // row j doubles as column j by symmetry
            for (o, &q) in out.iter_mut().zip(row.iter()) {
                *o += b * q;
            }
        }
        Ok(out)
    }
}

/// Dense weight vector `w = sum_i beta_i y_i x_i` for the linear kernel.
///
/// Screening reasons about balls in the feature space; for the linear kernel
/// that space is explicit, which the test suite uses to cross-check the
/// kernelized inner products.
pub fn linear_weight(dataset: &Dataset, beta: &[f64]) -> Result<Vec<f64>> {
    if beta.len() != dataset.n() {
        return Err(Error::LengthMismatch { expected: dataset.n(), got: beta.len() });
    }
    let mut w = vec![0.0; dataset.dim()];
    for (s, &b) in dataset.samples().iter().zip(beta) {
        if b == 0.0 {
            continue;
        }
        let scale = b * s.y();
        for (i, v) in s.features.iter() {
            w[i as usize] += scale * v;
        }
    }
    Ok(w)
}

/// `z_i^T w = y_i x_i^T w` against an explicit weight vector.
pub fn linear_margin(dataset: &Dataset, w: &[f64], i: usize) -> f64 {
    let s = dataset.sample(i);
    s.y() * s.features.dot_dense(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{parse_libsvm_str, ParseOptions};

    fn tiny() -> Dataset {
        parse_libsvm_str("+1 1:1 2:2\n-1 1:2 2:-1\n+1 2:3\n", ParseOptions::default()).unwrap()
    }

    #[test]
    fn linear_entries_match_hand_computation() {
        let oracle = KernelOracle::new(tiny(), Kernel::Linear).unwrap();
        // x0·x1 = 1*2 + 2*(-1) = 0, labels +1,-1 -> 0
        assert_eq!(oracle.q_entry(0, 1).unwrap(), 0.0);
        // x0·x2 = 2*3 = 6, labels +1,+1 -> 6
        assert_eq!(oracle.q_entry(0, 2).unwrap(), 6.0);
        // x1·x2 = -1*3 = -3, labels -1,+1 -> 3
        assert_eq!(oracle.q_entry(1, 2).unwrap(), 3.0);
        assert_eq!(oracle.q_diag(0), 5.0);
        assert_eq!(oracle.q_diag(1), 5.0);
        assert_eq!(oracle.q_diag(2), 9.0);
    }

    #[test]
    fn rbf_unit_distance_entry() {
        let ds = parse_libsvm_str("+1 1:1\n-1 1:2\n", ParseOptions::default()).unwrap();
        let oracle = KernelOracle::new(ds, Kernel::Rbf { gamma: 1.0 }).unwrap();
        let expected = -(-1.0f64).exp(); // distance 1, opposite labels
        assert!((oracle.q_entry(0, 1).unwrap() - expected).abs() < 1e-15);
        assert_eq!(oracle.q_diag(0), 1.0);
        assert_eq!(oracle.q_diag(1), 1.0);
    }

    #[test]
    fn rbf_rejects_bad_gamma() {
        assert!(KernelOracle::new(tiny(), Kernel::Rbf { gamma: 0.0 }).is_err());
        assert!(KernelOracle::new(tiny(), Kernel::Rbf { gamma: -1.0 }).is_err());
        assert!(KernelOracle::new(tiny(), Kernel::Rbf { gamma: f64::NAN }).is_err());
    }

    #[test]
    fn rows_match_entries_and_are_symmetric() {
        for kernel in [Kernel::Linear, Kernel::Rbf { gamma: 0.7 }] {
            let oracle = KernelOracle::new(tiny(), kernel).unwrap();
            for i in 0..3 {
                let row = oracle.q_row(i).unwrap();
                for j in 0..3 {
                    assert_eq!(row[j], oracle.q_entry(i, j).unwrap(), "entry ({i},{j})");
                    assert_eq!(row[j], oracle.q_entry(j, i).unwrap(), "symmetry ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn cached_rows_are_identical_to_fresh_rows() {
        let ds = crate::data::generate_toy(50, 3).unwrap();
        let capped = KernelOracle::new(ds.clone(), Kernel::Rbf { gamma: 0.5 })
            .unwrap()
            .with_row_cache_cap(4);
        let fresh = KernelOracle::new(ds, Kernel::Rbf { gamma: 0.5 }).unwrap();
        // Walk rows forwards then backwards so the capped cache must evict.
        for i in (0..50).chain((0..50).rev()) {
            assert_eq!(capped.q_row(i).unwrap(), fresh.compute_row(i));
        }
    }

    #[test]
    fn matvec_skips_zeros_and_matches_dense() {
        let ds = crate::data::generate_toy(30, 9).unwrap();
        let oracle = KernelOracle::new(ds, Kernel::Linear).unwrap();
        let mut beta = vec![0.0; 30];
        beta[3] = 1.5;
        beta[17] = -0.25;
        let got = oracle.q_matvec(&beta).unwrap();
        for (i, g) in got.iter().enumerate() {
            let want = 1.5 * oracle.q_entry(i, 3).unwrap() - 0.25 * oracle.q_entry(i, 17).unwrap();
            assert!((g - want).abs() <= 1e-12 * want.abs().max(1.0));
        }
    }

    #[test]
    fn matvec_checks_length() {
        let oracle = KernelOracle::new(tiny(), Kernel::Linear).unwrap();
        assert!(matches!(
            oracle.q_matvec(&[1.0, 2.0]),
            Err(Error::LengthMismatch { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn empty_sample_yields_zero_linear_diag() {
        let ds = parse_libsvm_str("+1\n-1 1:1\n", ParseOptions::default()).unwrap();
        let oracle = KernelOracle::new(ds, Kernel::Linear).unwrap();
        assert_eq!(oracle.q_diag(0), 0.0);
        assert_eq!(oracle.q_entry(0, 1).unwrap(), 0.0);
    }

    #[test]
    fn explicit_linear_weight_agrees_with_kernelized_products() {
        let ds = crate::data::generate_toy(40, 11).unwrap();
        let oracle = KernelOracle::new(ds.clone(), Kernel::Linear).unwrap();
        let beta: Vec<f64> = (0..40).map(|i| ((i * 7) % 5) as f64 / 3.0 - 0.5).collect();
        let w = linear_weight(&ds, &beta).unwrap();
        let qb = oracle.q_matvec(&beta).unwrap();
        for (i, q) in qb.iter().enumerate() {
            assert!((linear_margin(&ds, &w, i) - q).abs() < 1e-10);
        }
    }

    #[test]
    fn concurrent_row_reads_agree_with_sequential() {
        let ds = crate::data::generate_toy(60, 5).unwrap();
        let oracle =
            std::sync::Arc::new(KernelOracle::new(ds, Kernel::Rbf { gamma: 0.3 }).unwrap());
        let sequential: Vec<_> = (0..60).map(|i| oracle.q_row(i).unwrap().to_vec()).collect();
        let oracle2 = std::sync::Arc::new(
            KernelOracle::new(oracle.dataset().clone(), Kernel::Rbf { gamma: 0.3 }).unwrap(),
        );
        let mut handles = Vec::new();
        for t in 0..4 {
            let o = std::sync::Arc::clone(&oracle2);
            handles.push(std::thread::spawn(move || {
                let mut rows = Vec::new();
                for i in (t..60).step_by(4) {
                    rows.push((i, o.q_row(i).unwrap().to_vec()));
                }
                rows
            }));
        }
        for h in handles {
            for (i, row) in h.join().unwrap() {
                assert_eq!(row, sequential[i], "row {i}");
            }
        }
    }
}
