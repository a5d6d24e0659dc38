//! Datasets: sparse samples, LIBSVM text I/O, hashing, and the synthetic
//! two-Gaussians benchmark generator.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Sparse feature vector with strictly increasing 0-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVector {
    /// Builds a vector from (index, value) pairs, validating ordering and finiteness.
    pub fn new(pairs: Vec<(u32, f64)>) -> Result<Self> {
        let mut indices = Vec::with_capacity(pairs.len());
        let mut values = Vec::with_capacity(pairs.len());
        for (idx, val) in pairs {
            if let Some(&last) = indices.last() {
                if idx <= last {
                    return Err(Error::InvalidArgument(format!(
                        "feature indices must be strictly increasing, got {idx} after {last}"
                    )));
                }
            }
            if !val.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "feature value at index {idx} is not finite"
                )));
            }
            indices.push(idx);
            values.push(val);
        }
        Ok(SparseVector { indices, values })
    }

    /// Empty vector (a sample with no features is valid).
    pub fn empty() -> Self {
        SparseVector { indices: Vec::new(), values: Vec::new() }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Largest index plus one, i.e. the minimal dense dimension holding this vector.
    pub fn width(&self) -> usize {
        self.indices.last().map_or(0, |&i| i as usize + 1)
    }

    /// Sparse-sparse dot product via index merge.
    pub fn dot(&self, other: &SparseVector) -> f64 {
        let mut sum = 0.0;
        let (mut a, mut b) = (0, 0);
        while a < self.indices.len() && b < other.indices.len() {
            match self.indices[a].cmp(&other.indices[b]) {
                std::cmp::Ordering::Less => a += 1,
                std::cmp::Ordering::Greater => b += 1,
                std::cmp::Ordering::Equal => {
                    sum += self.values[a] * other.values[b];
                    a += 1;
                    b += 1;
                }
            }
        }
        sum
    }

    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// Scatter into a dense buffer (buffer must be wide enough and zeroed).
    pub fn scatter(&self, dense: &mut [f64]) {
        for (i, v) in self.iter() {
            dense[i as usize] = v;
        }
    }

    /// Dot product against a dense vector.
    pub fn dot_dense(&self, dense: &[f64]) -> f64 {
        self.iter().map(|(i, v)| v * dense[i as usize]).sum()
    }
}

/// A labeled sample; labels are restricted to +1 / -1.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: SparseVector,
    pub label: i8,
}

impl Sample {
    pub fn new(features: SparseVector, label: i8) -> Result<Self> {
        if label != 1 && label != -1 {
            return Err(Error::InvalidArgument(format!("label must be +1 or -1, got {label}")));
        }
        Ok(Sample { features, label })
    }

    /// Label as a real scalar.
    pub fn y(&self) -> f64 {
        f64::from(self.label)
    }
}

/// An in-memory dataset. `dim` is the maximum feature index across samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
}

impl Dataset {
    pub fn from_samples(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let dim = samples.iter().map(|s| s.features.width()).max().unwrap_or(0);
        Ok(Dataset { samples, dim })
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    /// Number of features (maximum 1-based index seen in the data).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &Sample {
        &self.samples[i]
    }

    pub fn labels(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.y())
    }
}

/// Options for LIBSVM text parsing.
#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept `0` as a negative label (some exports use 0/1). Off by default:
    /// a `0` label is then a parse error.
    pub zero_label_negative: bool,
}

/// Parses LIBSVM text: `label idx:value ...` per line, 1-based strictly
/// increasing indices. Lines holding only whitespace are skipped.
pub fn parse_libsvm<R: BufRead>(reader: R, opts: ParseOptions) -> Result<Dataset> {
    let mut samples = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        samples.push(parse_line(trimmed, lineno, opts)?);
    }
    Dataset::from_samples(samples)
}

/// Convenience wrapper over [`parse_libsvm`] for in-memory text.
pub fn parse_libsvm_str(text: &str, opts: ParseOptions) -> Result<Dataset> {
    parse_libsvm(text.as_bytes(), opts)
}

fn parse_line(line: &str, lineno: usize, opts: ParseOptions) -> Result<Sample> {
    let err = |message: String| Error::Parse { line: lineno, message };
    let mut tokens = line.split_ascii_whitespace();
    let label_tok = tokens.next().ok_or_else(|| err("missing label".into()))?;
    let label_val: f64 =
        label_tok.parse().map_err(|_| err(format!("invalid label `{label_tok}`")))?;
    let label = if label_val == 1.0 {
        1
    } else if label_val == -1.0 || (label_val == 0.0 && opts.zero_label_negative) {
        -1
    } else {
        return Err(err(format!("label must be +1 or -1, got `{label_tok}`")));
    };

    let mut pairs = Vec::new();
    let mut last_idx = 0u32; // file indices are 1-based, so 0 is a safe floor
    for tok in tokens {
        let (idx_s, val_s) = tok
            .split_once(':')
            .ok_or_else(|| err(format!("expected `index:value`, got `{tok}`")))?;
        let idx: u32 =
            idx_s.parse().map_err(|_| err(format!("invalid feature index `{idx_s}`")))?;
        if idx == 0 {
            return Err(err("feature indices are 1-based; got 0".into()));
        }
        if idx <= last_idx {
            return Err(err(format!(
                "feature indices must be strictly increasing, got {idx} after {last_idx}"
            )));
        }
        let val: f64 =
            val_s.parse().map_err(|_| err(format!("invalid feature value `{val_s}`")))?;
        if !val.is_finite() {
            return Err(err(format!("feature value `{val_s}` is not finite")));
        }
        last_idx = idx;
        pairs.push((idx - 1, val)); // store 0-based
    }
    let features = SparseVector::new(pairs)?;
    Sample::new(features, label)
}

/// Serializes a dataset back to LIBSVM text. Indices are written 1-based;
/// values use the shortest round-trip decimal form, so parse/write round-trips
/// are bit-exact.
pub fn write_libsvm<W: Write>(dataset: &Dataset, mut writer: W) -> Result<()> {
    writer.write_all(canonical_text(dataset).as_bytes())?;
    Ok(())
}

/// Canonical LIBSVM rendering used both for file output and for hashing.
pub fn canonical_text(dataset: &Dataset) -> String {
    let mut out = String::new();
    for s in dataset.samples() {
        if s.label > 0 {
            out.push_str("+1");
        } else {
            out.push_str("-1");
        }
        for (i, v) in s.features.iter() {
            let _ = write!(out, " {}:{}", i + 1, v);
        }
        out.push('\n');
    }
    out
}

/// SHA-256 of the canonical LIBSVM text, hex-encoded. Used to tie saved
/// models to the dataset they were trained on.
pub fn dataset_hash(dataset: &Dataset) -> String {
    let digest = Sha256::digest(canonical_text(dataset).as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        let _ = write!(hex, "{byte:02x}");
    }
    hex
}

/// Name of the generator behind [`generate_toy`], recorded in metadata so a
/// dataset can be re-created exactly.
pub const TOY_GENERATOR: &str = "chacha8/normal-ziggurat/v1";

/// Metadata written alongside generated datasets.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ToyMetadata {
    pub generator: String,
    pub seed: u64,
    pub n: usize,
    pub dim: usize,
}

impl ToyMetadata {
    pub fn new(n: usize, seed: u64) -> Self {
        ToyMetadata { generator: TOY_GENERATOR.to_string(), seed, n, dim: 2 }
    }
}

/// Two overlapping Gaussians in the plane: odd samples (1-based) are drawn
/// from N((-0.5, -0.5), 1.5^2 I) with label -1, even samples from
/// N((+0.5, +0.5), 1.5^2 I) with label +1. Deterministic in `seed`.
pub fn generate_toy(n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "toy sample count must be even and at least 2 for balanced classes, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 1.5).expect("valid normal parameters");
    let mut samples = Vec::with_capacity(n);
    for i in 1..=n {
        let (center, label) = if i % 2 == 1 { (-0.5, -1) } else { (0.5, 1) };
        let x1 = center + noise.sample(&mut rng);
        let x2 = center + noise.sample(&mut rng);
        let features = SparseVector::new(vec![(0, x1), (1, x2)])?;
        samples.push(Sample::new(features, label)?);
    }
    Dataset::from_samples(samples)
}
