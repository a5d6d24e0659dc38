//! Trained-model persistence.
//!
//! A model file records the dual variables together with everything needed
//! to reuse them safely: the regularization value, the kernel, the solver
//! tolerance they were trained to, and a hash of the dataset so a model is
//! never silently applied to different data.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::dataset_hash;
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelOracle};
use crate::solver::DualSolution;

/// JSON-serializable trained model.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelFile {
    #[serde(rename = "C")]
    pub c: f64,
    pub alpha: Vec<f64>,
    /// `"linear"` or `"rbf"`.
    pub kernel: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// SHA-256 of the canonical LIBSVM rendering of the training data.
    pub dataset_hash: String,
    /// KKT tolerance the stored `alpha` was solved to.
    pub kkt_tolerance: f64,
}

impl ModelFile {
    pub fn new(solution: &DualSolution, oracle: &KernelOracle, kkt_tolerance: f64) -> Self {
        let (kernel, gamma) = match oracle.kernel() {
            Kernel::Linear => ("linear".to_string(), None),
            Kernel::Rbf { gamma } => ("rbf".to_string(), Some(gamma)),
        };
        ModelFile {
            c: solution.c,
            alpha: solution.alpha.clone(),
            kernel,
            gamma,
            dataset_hash: dataset_hash(oracle.dataset()),
            kkt_tolerance,
        }
    }

    pub fn kernel(&self) -> Result<Kernel> {
        match (self.kernel.as_str(), self.gamma) {
            ("linear", None) => Ok(Kernel::Linear),
            ("linear", Some(_)) => {
                Err(Error::InvalidArgument("linear kernel does not take gamma".into()))
            }
            ("rbf", Some(gamma)) => {
                let k = Kernel::Rbf { gamma };
                k.validate()?;
                Ok(k)
            }
            ("rbf", None) => Err(Error::InvalidArgument("rbf kernel requires gamma".into())),
            (other, _) => Err(Error::InvalidArgument(format!("unknown kernel `{other}`"))),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&json)?)
    }

    /// Rehydrates the stored `alpha` against `oracle`, checking the dataset
    /// hash and kernel match before recomputing margins.
    pub fn to_solution(&self, oracle: &KernelOracle) -> Result<DualSolution> {
        let stored = self.kernel()?;
        if stored != oracle.kernel() {
            return Err(Error::InvalidArgument(format!(
                "model kernel {:?} does not match oracle kernel {:?}",
                stored,
                oracle.kernel()
            )));
        }
        let actual = dataset_hash(oracle.dataset());
        if actual != self.dataset_hash {
            return Err(Error::InvalidArgument(format!(
                "dataset hash mismatch: model was trained on {}, got {}",
                self.dataset_hash, actual
            )));
        }
        DualSolution::from_alpha(self.alpha.clone(), self.c, oracle)
    }
}
