//! Experiment configuration files and the shipped presets.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::boundary::{lookup_builtin, BoundaryFn, SourceTerm};
use crate::error::{Error, Result};
use crate::network::Activation;
use crate::pde_loss::check_weights;
use crate::sampling::{BoundaryMode, BoxDomain};

/// Which Dirichlet data to use. Exactly one field must be set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    /// Name of a builtin (see [`crate::boundary::Builtin`]).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// One expression for the whole frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expr: Option<String>,
    /// `"xK=c"` → expression, one entry per side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pieces: Option<BTreeMap<String, String>>,
}

impl BoundarySpec {
    pub fn builtin(name: &str) -> Self {
        BoundarySpec {
            builtin: Some(name.to_string()),
            ..Default::default()
        }
    }

    pub fn resolve(&self, d: usize) -> Result<BoundaryFn> {
        let g = match (&self.builtin, &self.expr, &self.pieces) {
            (Some(name), None, None) => lookup_builtin(name)?,
            (None, Some(text), None) => BoundaryFn::expression(text, d)?,
            (None, None, Some(pieces)) => BoundaryFn::piecewise(pieces, d)?,
            _ => {
                return Err(Error::config(
                    "boundary needs exactly one of `builtin`, `expr` or `pieces`",
                ))
            }
        };
        if g.dim() != d {
            return Err(Error::config(format!(
                "boundary `{}` has dimension {}, config has d = {d}",
                g.label(),
                g.dim()
            )));
        }
        Ok(g)
    }
}

fn default_n_interior() -> usize {
    1000
}
fn default_per_edge() -> usize {
    200
}
fn default_log_every() -> usize {
    20
}
fn default_w_pde() -> f64 {
    1.0
}

/// Everything that determines a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Input dimension, 2 to 4.
    pub d: usize,
    /// Defaults to the builtin's canonical box, else the unit box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<BoxDomain>,
    pub boundary: BoundarySpec,
    /// Constant source term.
    #[serde(default)]
    pub f: f64,
    #[serde(default = "default_w_pde")]
    pub w_pde: f64,
    pub w_bdry: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    #[serde(default = "default_n_interior")]
    pub n_interior: usize,
    /// Boundary points per edge (wireframe) or per face (faces).
    #[serde(default = "default_per_edge")]
    pub per_edge: usize,
    #[serde(default)]
    pub boundary_mode: BoundaryMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    /// Hidden-layer activation.
    #[serde(default)]
    pub activation: Activation,
    /// Draw fresh points before every epoch after the first.
    #[serde(default)]
    pub resample: bool,
    /// Log the loss of the logged epoch itself instead of the window mean.
    #[serde(default)]
    pub raw_history: bool,
}

/// Name and file contents of every shipped preset.
pub const PRESETS: &[(&str, &str)] = &[
    ("2d-1", include_str!("../../presets/2d-1.toml")),
    ("2d-1-20k", include_str!("../../presets/2d-1-20k.toml")),
    ("2d-2", include_str!("../../presets/2d-2.toml")),
    ("2d-3", include_str!("../../presets/2d-3.toml")),
    ("3d-1", include_str!("../../presets/3d-1.toml")),
    ("3d-2", include_str!("../../presets/3d-2.toml")),
    ("3d-3", include_str!("../../presets/3d-3.toml")),
    ("4d-1", include_str!("../../presets/4d-1.toml")),
];

impl ExperimentConfig {
    /// Parses TOML text and validates it.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn preset(name: &str) -> Result<Self> {
        let (_, text) = PRESETS.iter().find(|(n, _)| *n == name).ok_or_else(|| {
            let names: Vec<_> = PRESETS.iter().map(|(n, _)| *n).collect();
            Error::config(format!("unknown preset `{name}`; valid presets: {}", names.join(", ")))
        })?;
        Self::from_toml(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.d) {
            return Err(Error::config(format!("d = {} is outside 2..=4", self.d)));
        }
        check_weights(self.w_pde, self.w_bdry)?;
        SourceTerm::new(self.f)?;
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config(format!("learning_rate = {} must be positive", self.learning_rate)));
        }
        for (name, v) in [
            ("epochs", self.epochs),
            ("n_interior", self.n_interior),
            ("per_edge", self.per_edge),
            ("log_every", self.log_every),
        ] {
            if v == 0 {
                return Err(Error::config(format!("{name} must be at least 1")));
            }
        }
        let domain = self.resolved_domain()?;
        if domain.dim() != self.d {
            return Err(Error::config(format!(
                "domain has dimension {}, config has d = {}",
                domain.dim(),
                self.d
            )));
        }
        self.boundary
            .resolve(self.d)?
            .check_coverage(&domain, self.boundary_mode == BoundaryMode::Faces)
    }

    pub fn resolved_domain(&self) -> Result<BoxDomain> {
        if let Some(d) = &self.domain {
            return Ok(d.clone());
        }
        if let Some(name) = &self.boundary.builtin {
            if let Some(b) = lookup_builtin(name)?.as_builtin() {
                if b.dim() == self.d {
                    return Ok(b.canonical_domain());
                }
            }
        }
        BoxDomain::unit(self.d)
    }

    pub fn source(&self) -> SourceTerm {
        SourceTerm::new(self.f).expect("validated")
    }
}
