//! Shared fixtures for integration tests: deterministic random instances and
//! reference computations that are independent of the library's own
//! algorithms (projected gradient, dense linear algebra, Monte-Carlo
//! geometry).

#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use svmscreen_core::data::{Dataset, Sample, SparseVector};
use svmscreen_core::kernel::{Kernel, KernelOracle};

/// Deterministic random instance: n in [10, 80], d in [2, 6], linear or RBF
/// with gamma in {0.1/d, 1/d, 10/d}, Gaussian class blobs around ±(0.5, ...)
/// with occasional missing features and rare all-zero samples.
pub fn random_instance(seed: u64) -> KernelOracle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(10..=80);
    let d = rng.random_range(2..=6);
    let kernel = match rng.random_range(0..4u8) {
        0 => Kernel::Linear,
        k => Kernel::Rbf { gamma: [0.1, 1.0, 10.0][(k - 1) as usize] / d as f64 },
    };
    build_instance(&mut rng, n, d, kernel)
}

/// Small instance (n in [4, 15]) for oracles with poor scaling.
pub fn random_small_instance(seed: u64) -> KernelOracle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(4..=15);
    let d = rng.random_range(2..=4);
    let kernel =
        if rng.random_bool(0.5) { Kernel::Linear } else { Kernel::Rbf { gamma: 1.0 / d as f64 } };
    build_instance(&mut rng, n, d, kernel)
}

/// Linear-kernel instance with explicit dimension choices, for tests that
/// work in the explicit feature space.
pub fn random_linear_instance(
    seed: u64,
    n_lo: usize,
    n_hi: usize,
    d_choices: &[usize],
) -> KernelOracle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(n_lo..=n_hi);
    let d = d_choices[rng.random_range(0..d_choices.len())];
    build_instance(&mut rng, n, d, Kernel::Linear)
}

fn build_instance(rng: &mut ChaCha8Rng, n: usize, d: usize, kernel: Kernel) -> KernelOracle {
    let noise = Normal::new(0.0, 1.2).unwrap();
    let mut samples = Vec::with_capacity(n);
    let mut zero_used = false;
    for i in 0..n {
        // Guarantee one sample per class up front; the rest are coin flips.
        let label: i8 = match i {
            0 => 1,
            1 => -1,
            _ => {
                if rng.random_bool(0.5) {
                    1
                } else {
                    -1
                }
            }
        };
        let mut pairs = Vec::new();
        // At most one all-zero sample exercises Q_ii = 0 handling; a second
        // would duplicate it and make the optimal alpha non-unique. The first
        // sample always keeps its features so the dataset has a dimension.
        let drop_features = i > 0 && !zero_used && rng.random_bool(0.03);
        zero_used = zero_used || drop_features;
        if !drop_features {
            for j in 0..d {
                if j == 0 || rng.random_bool(0.85) {
                    let v = 0.5 * f64::from(label) + noise.sample(rng);
                    pairs.push((j as u32, v));
                }
            }
        }
        samples.push(Sample::new(SparseVector::new(pairs).unwrap(), label).unwrap());
    }
    KernelOracle::new(Dataset::from_samples(samples).unwrap(), kernel).unwrap()
}

/// Dense Q matrix, assembled entry by entry.
pub fn dense_q(oracle: &KernelOracle) -> DMatrix<f64> {
    let n = oracle.n();
    DMatrix::from_fn(n, n, |i, j| oracle.q_entry(i, j).unwrap())
}

/// Projected-gradient reference solver for the box QP
/// `max sum(alpha) - alpha' Q alpha / 2` over `[0, C]^n`: a fixed step of
/// `1 / L` with `L` the Gershgorin bound on `||Q||_2`. Slow but entirely
/// independent of the coordinate-ascent implementation.
pub fn pg_solve(oracle: &KernelOracle, c: f64, tol: f64, max_iters: usize) -> Vec<f64> {
    let n = oracle.n();
    let mut l = 0.0f64;
    for i in 0..n {
        let row = oracle.q_row(i).unwrap();
        l = l.max(row.iter().map(|q| q.abs()).sum());
    }
    let step = 1.0 / l.max(f64::MIN_POSITIVE);
    let mut alpha = vec![0.0; n];
    for _ in 0..max_iters {
        let margins = oracle.q_matvec(&alpha).unwrap();
        let worst = (0..n)
            .map(|i| {
                let g = 1.0 - margins[i];
                if alpha[i] <= 0.0 {
                    g.max(0.0)
                } else if alpha[i] >= c {
                    (-g).max(0.0)
                } else {
                    g.abs()
                }
            })
            .fold(0.0f64, f64::max);
        if worst <= tol {
            return alpha;
        }
        for i in 0..n {
            if oracle.q_diag(i) <= 0.0 {
                // Margins never see this coordinate and its objective slope
                // is the constant +1, so the box ceiling is optimal.
                alpha[i] = c;
            } else {
                alpha[i] = (alpha[i] + step * (1.0 - margins[i])).clamp(0.0, c);
            }
        }
    }
    panic!("projected gradient did not reach tolerance {tol} in {max_iters} iterations");
}

/// Uniform point in the `d`-ball of the given center and radius.
pub fn sample_in_ball(rng: &mut ChaCha8Rng, center: &[f64], radius: f64) -> Vec<f64> {
    let d = center.len();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let dir: Vec<f64> = (0..d).map(|_| normal.sample(rng)).collect();
    let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    let u: f64 = rng.random::<f64>();
    let shell = match d {
        2 => u.sqrt(),
        3 => u.cbrt(),
        _ => u.powf(1.0 / d as f64),
    };
    let scale = radius * shell / norm;
    center.iter().zip(&dir).map(|(c, x)| c + scale * x).collect()
}

/// `||w||` distance between a point and a center, both given densely.
pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}
