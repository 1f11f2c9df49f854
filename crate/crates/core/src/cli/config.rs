//! JSON model configuration.
//!
//! ```json
//! {
//!   "kind": "generic",
//!   "rho0": [[[0.5, 0], [0.5, 0]], [[0.5, 0], [0.5, 0]]],
//!   "generators": [[[[1, 0], [0, 0]], [[0, 0], [-1, 0]]]],
//!   "theta": [0.0],
//!   "numerics": { "fs_delta": 1e-3 }
//! }
//! ```
//!
//! Matrix entries are `[re, im]` pairs or plain reals. `kind = "xstate"`
//! takes `xstate: {a, b, c, d, w: [re, im], generators: ["alpha", "beta"]}`
//! instead of `rho0`/`generators`.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::Numerics;
use crate::error::{Error, Result};
use crate::hermlin::{ComplexMatrix, HermitianMatrix};
use crate::states::{DensityMatrix, StateFamily};
use crate::xstate::{XGenerator, XStateParams, xstate_family};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Generic,
    Xstate,
}

/// A matrix entry: `[re, im]` or a bare real.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Entry {
    Complex([f64; 2]),
    Real(f64),
}

impl Entry {
    fn value(self) -> Complex64 {
        match self {
            Entry::Complex([re, im]) => Complex64::new(re, im),
            Entry::Real(re) => Complex64::new(re, 0.0),
        }
    }
}

pub type MatrixSpec = Vec<Vec<Entry>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct XStateSpec {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    pub w: [f64; 2],
    #[serde(default = "default_xgenerators")]
    pub generators: Vec<XGenerator>,
}

fn default_xgenerators() -> Vec<XGenerator> {
    vec![XGenerator::Alpha]
}

impl XStateSpec {
    pub fn params(&self) -> Result<XStateParams> {
        XStateParams::new(self.a, self.b, self.c, self.d, Complex64::new(self.w[0], self.w[1]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub generators: Vec<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xstate: Option<XStateSpec>,
    /// Defaults to the origin.
    #[serde(default)]
    pub theta: Vec<f64>,
    #[serde(default)]
    pub numerics: Numerics,
}

impl ModelConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut cfg: ModelConfig =
            serde_json::from_str(text).map_err(|e| Error::InvalidArgument(format!("config schema: {e}")))?;
        cfg.complete()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidArgument(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    fn complete(&mut self) -> Result<()> {
        match self.kind {
            ModelKind::Generic => {
                if self.xstate.is_some() {
                    return Err(schema("xstate", "only allowed with kind = \"xstate\""));
                }
                if self.rho0.is_none() {
                    return Err(schema("rho0", "required for kind = \"generic\""));
                }
                if self.generators.is_empty() {
                    return Err(schema("generators", "at least one generator is required"));
                }
            }
            ModelKind::Xstate => {
                if self.rho0.is_some() || !self.generators.is_empty() {
                    return Err(schema("rho0/generators", "not allowed with kind = \"xstate\"; use xstate.generators"));
                }
                let x = self.xstate.as_ref().ok_or_else(|| schema("xstate", "required for kind = \"xstate\""))?;
                if x.generators.is_empty() {
                    return Err(schema("xstate.generators", "at least one generator is required"));
                }
            }
        }
        let p = self.parameter_count();
        if self.theta.is_empty() {
            self.theta = vec![0.0; p];
        } else if self.theta.len() != p {
            return Err(schema("theta", &format!("has {} entries but there are {p} generators", self.theta.len())));
        }
        if let Some(i) = self.theta.iter().position(|t| !t.is_finite()) {
            return Err(schema(&format!("theta[{i}]"), "must be finite"));
        }
        self.numerics.validate()
    }

    pub fn parameter_count(&self) -> usize {
        match self.kind {
            ModelKind::Generic => self.generators.len(),
            ModelKind::Xstate => self.xstate.as_ref().map_or(0, |x| x.generators.len()),
        }
    }

    /// Builds and validates the state family.
    pub fn family(&self) -> Result<StateFamily> {
        match self.kind {
            ModelKind::Generic => {
                let rho0 = to_matrix("rho0", self.rho0.as_ref().expect("checked in complete"))?;
                let rho0 = DensityMatrix::new(HermitianMatrix::named("rho0", rho0)?)?;
                let gens = self
                    .generators
                    .iter()
                    .enumerate()
                    .map(|(m, g)| {
                        let name = format!("generators[{m}]");
                        HermitianMatrix::named(&name, to_matrix(&name, g)?)
                    })
                    .collect::<Result<Vec<_>>>()?;
                StateFamily::new(rho0, gens)
            }
            ModelKind::Xstate => {
                let x = self.xstate.as_ref().expect("checked in complete");
                xstate_family(&x.params()?, &x.generators)
            }
        }
    }
}

fn schema(field: &str, msg: &str) -> Error {
    Error::InvalidArgument(format!("config schema: field `{field}` {msg}"))
}

fn to_matrix(name: &str, spec: &MatrixSpec) -> Result<ComplexMatrix> {
    let n = spec.len();
    if n == 0 {
        return Err(schema(name, "is empty"));
    }
    for (i, row) in spec.iter().enumerate() {
        if row.len() != n {
            return Err(schema(name, &format!("row {i} has {} entries, expected {n} (square matrix)", row.len())));
        }
        if let Some(j) = row.iter().position(|e| !e.value().is_finite()) {
            return Err(schema(&format!("{name}[{i}][{j}]"), "must be finite"));
        }
    }
    Ok(ComplexMatrix::from_fn(n, n, |i, j| spec[i][j].value()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BELL_XSTATE: &str = r#"{"kind": "xstate", "xstate": {"a": 0.5, "b": 0, "c": 0, "d": 0.5, "w": [0.5, 0]}}"#;

    #[test]
    fn minimal_xstate_config() {
        let cfg = ModelConfig::from_json(BELL_XSTATE).unwrap();
        let fam = cfg.family().unwrap();
        assert_eq!(fam.dim(), 4);
        assert_eq!(fam.parameter_count(), 1);
        assert_eq!(cfg.theta, vec![0.0]);
        assert_eq!(cfg.numerics, Numerics::default());
    }

    #[test]
    fn non_hermitian_generator_is_named() {
        let text = r#"{
            "kind": "generic",
            "rho0": [[1, 0], [0, 0]],
            "generators": [[[0, 0], [0, 1]], [[0, 1], [0, 0]]]
        }"#;
        let cfg = ModelConfig::from_json(text).unwrap();
        let err = cfg.family().unwrap_err();
        assert_eq!(err.kind(), "HermiticityError");
        assert!(err.to_string().contains("generators[1]"), "{err}");
    }

    #[test]
    fn fs_delta_override() {
        let text = r#"{"kind": "xstate", "xstate": {"a": 0.5, "b": 0, "c": 0, "d": 0.5, "w": [0.5, 0]},
                       "numerics": {"fs_delta": 1e-2}}"#;
        let cfg = ModelConfig::from_json(text).unwrap();
        assert_eq!(cfg.numerics.fs_delta, 1e-2);
        assert_eq!(cfg.numerics.rank_tol, 1e-10);
        assert_eq!(cfg.numerics.fd_step_first, 1e-5);
        assert_eq!(cfg.numerics.fd_step_second, 1e-3);
    }

    #[test]
    fn schema_errors_carry_location() {
        let err = ModelConfig::from_json("{\n  \"kind\": \"generic\",\n  \"rho\": []\n}").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown field `rho`") && msg.contains("line 3"), "{msg}");

        let text = r#"{"kind": "generic", "rho0": [[1, 0], [0]], "generators": [[[1, 0], [0, -1]]]}"#;
        let err = ModelConfig::from_json(text).unwrap().family().unwrap_err();
        assert!(err.to_string().contains("rho0") && err.to_string().contains("row 1"), "{err}");

        let err = ModelConfig::from_json(
            r#"{"kind": "xstate", "xstate": {"a": 0.5, "b": 0, "c": 0, "d": 0.5, "w": [0.5, 0]}, "theta": [0, 1]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("theta"), "{err}");
    }

    #[test]
    fn positivity_is_checked() {
        let text = r#"{"kind": "xstate", "xstate": {"a": 0.1, "b": 0.4, "c": 0.4, "d": 0.1, "w": [0.2, 0]}}"#;
        let err = ModelConfig::from_json(text).unwrap().family().unwrap_err();
        assert_eq!(err.kind(), "PositivityViolation");
    }

    #[test]
    fn round_trip() {
        let cfg = ModelConfig::from_json(BELL_XSTATE).unwrap();
        let again = ModelConfig::from_json(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
