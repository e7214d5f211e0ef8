//! JSON run configuration: one document describes the model, the inputs,
//! the meshes, and the reporting directory. The schema is documented in
//! the repository README.

use memlqr::galerkin::Basis;
use memlqr::model::{BoxRegion, DomainSpec, InputShape, ModelParams, WeightedBox};
use memlqr::Real;
use nalgebra::DMatrix;
use serde::Deserialize;
use std::path::{Path, PathBuf};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Interval,
    Square,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lo: Vec<Real>,
    pub hi: Vec<Real>,
    pub amplitude: Real,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputConfig {
    pub boxes: Vec<BoxConfig>,
}

fn default_mode_max_index() -> usize {
    128
}

fn default_horizon_open() -> Real {
    20.0
}

fn default_horizon_closed() -> Real {
    8.0
}

fn default_dt() -> Real {
    1e-3
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// One run configuration; unknown fields are rejected so typos fail fast.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainKind,
    pub eta: Real,
    pub kappa: Real,
    /// Decay target; must sit strictly below kappa + 1/eta.
    pub omega: Real,
    pub q_weight: Real,
    /// Square positive-definite control weight, row by row.
    pub r_matrix: Vec<Vec<Real>>,
    pub inputs: Vec<InputConfig>,
    /// Mesh parameter for single-mesh commands.
    pub n: usize,
    /// Mesh parameters for sweeps; strictly increasing.
    #[serde(default)]
    pub n_list: Vec<usize>,
    /// Bound on the eigenfunction enumeration of the analytic spectrum.
    #[serde(default = "default_mode_max_index")]
    pub mode_max_index: usize,
    /// Externally claimed count of unstable eigenvalues, if any; the
    /// spectrum report flags a discrepancy instead of failing.
    #[serde(default)]
    pub expected_unstable_count: Option<usize>,
    /// Constant initial temperature; the memory component starts at zero.
    pub initial_value: Real,
    #[serde(default = "default_horizon_open")]
    pub horizon_open: Real,
    #[serde(default = "default_horizon_closed")]
    pub horizon_closed: Real,
    #[serde(default = "default_dt")]
    pub dt: Real,
    /// Finer verification mesh for transferring the synthesized gain.
    #[serde(default)]
    pub cross_check_n: Option<usize>,
    /// Full-size verification mesh, used only under --expensive.
    #[serde(default)]
    pub cross_check_n_expensive: Option<usize>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("cannot parse {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.n == 0 {
            return Err(CliError::Config("n must be positive".into()));
        }
        for pair in self.n_list.windows(2) {
            if pair[1] <= pair[0] {
                return Err(CliError::Config(format!(
                    "n_list must be strictly increasing, got {} after {}",
                    pair[1], pair[0]
                )));
            }
        }
        if self.inputs.is_empty() {
            return Err(CliError::Config("at least one input is required".into()));
        }
        if !(self.dt > 0.0) {
            return Err(CliError::Config("dt must be positive".into()));
        }
        let m = self.inputs.len();
        if self.r_matrix.len() != m || self.r_matrix.iter().any(|row| row.len() != m) {
            return Err(CliError::Config(format!(
                "r_matrix must be {m}x{m} to match the {m} inputs"
            )));
        }
        Ok(())
    }

    pub fn domain_spec(&self) -> DomainSpec {
        match self.domain {
            DomainKind::Interval => DomainSpec::Interval01,
            DomainKind::Square => DomainSpec::UnitSquare,
        }
    }

    /// Validated model parameters; infeasible omega or a bad weight
    /// surfaces here.
    pub fn params(&self) -> Result<ModelParams<Real>, CliError> {
        let m = self.inputs.len();
        let r = DMatrix::from_fn(m, m, |i, j| self.r_matrix[i][j]);
        Ok(ModelParams::new(self.eta, self.kappa, self.omega, self.q_weight, r)?)
    }

    pub fn shapes(&self) -> Result<Vec<InputShape<Real>>, CliError> {
        let domain = self.domain_spec();
        let mut out = Vec::with_capacity(self.inputs.len());
        for input in &self.inputs {
            let boxes = input
                .boxes
                .iter()
                .map(|b| WeightedBox {
                    region: BoxRegion { lo: b.lo.clone(), hi: b.hi.clone() },
                    amplitude: b.amplitude,
                })
                .collect();
            let shape = InputShape { boxes };
            shape.validate(domain)?;
            out.push(shape);
        }
        Ok(out)
    }

    pub fn basis(&self, n: usize) -> Result<Basis, CliError> {
        Ok(match self.domain {
            DomainKind::Interval => Basis::hat1d(n)?,
            DomainKind::Square => Basis::sine2d(n)?,
        })
    }
}
