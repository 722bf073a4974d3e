//! JSON file formats. Complex entries are `[re, im]` pairs and matrices are
//! row-major lists of rows.

use std::path::Path;

use qdetect::design::{NoiseModel, Povm};
use qdetect::ensemble::{EnsembleOptions, StateEnsemble};
use qdetect::sdp::SdpSettings;
use qdetect::{c64, CMatrix, Error as CoreError};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub type JsonMatrix = Vec<Vec<[f64; 2]>>;

pub fn matrix_to_json(m: &CMatrix) -> JsonMatrix {
    (0..m.rows())
        .map(|i| {
            (0..m.cols())
                .map(|j| [m[(i, j)].re, m[(i, j)].im])
                .collect()
        })
        .collect()
}

/// `what` names the field in error messages.
pub fn matrix_from_json(m: &JsonMatrix, what: &str) -> Result<CMatrix, CliError> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    if rows == 0 || m.iter().any(|r| r.len() != cols) {
        return Err(CliError::Input(format!(
            "{what}: matrix must be non-empty and rectangular"
        )));
    }
    let data = m.iter().flatten().map(|&[re, im]| c64(re, im)).collect();
    CMatrix::from_vec(rows, cols, data).map_err(|e| CliError::Input(format!("{what}: {e}")))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_feas: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certify_tol: Option<f64>,
}

impl SolverConfig {
    pub fn sdp_settings(&self) -> SdpSettings {
        let mut s = SdpSettings::default();
        if let Some(v) = self.max_iter {
            s.max_iter = v;
        }
        if let Some(v) = self.tol_gap {
            s.tol_gap = v;
        }
        if let Some(v) = self.tol_feas {
            s.tol_feas = v;
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub dim: usize,
    pub states: Vec<JsonMatrix>,
    pub priors: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    /// Rows of the column-stochastic noise matrix.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub inconclusive: bool,
    /// Work on the range of a singular mixture.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub reduce_to_range: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverConfig>,
}

impl Scenario {
    pub fn from_ensemble(e: &StateEnsemble) -> Self {
        let all_one = e.weights().iter().all(|&w| w == 1.0);
        Self {
            dim: e.dim(),
            states: e.states().iter().map(matrix_to_json).collect(),
            priors: e.priors().to_vec(),
            weights: (!all_one).then(|| e.weights().to_vec()),
            noise: None,
            inconclusive: false,
            reduce_to_range: false,
            solver: None,
        }
    }

    pub fn ensemble(&self) -> Result<StateEnsemble, CliError> {
        let states = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let m = matrix_from_json(s, &format!("states[{i}]"))?;
                if m.rows() != self.dim || m.cols() != self.dim {
                    return Err(CliError::Input(format!(
                        "states[{i}]: expected {d}x{d}, got {}x{}",
                        m.rows(),
                        m.cols(),
                        d = self.dim
                    )));
                }
                Ok(m)
            })
            .collect::<Result<Vec<_>, _>>()?;
        let weights = self
            .weights
            .clone()
            .unwrap_or_else(|| vec![1.0; states.len()]);
        let opts = EnsembleOptions {
            reduce_to_range: self.reduce_to_range,
            ..EnsembleOptions::default()
        };
        StateEnsemble::with_options(states, self.priors.clone(), weights, &opts)
            .map_err(scenario_error)
    }

    pub fn noise_model(&self) -> Result<Option<NoiseModel>, CliError> {
        self.noise
            .as_ref()
            .map(|rows| {
                NoiseModel::from_rows(rows).map_err(|e| CliError::Input(format!("noise: {e}")))
            })
            .transpose()
    }

    pub fn solver(&self) -> SolverConfig {
        self.solver.clone().unwrap_or_default()
    }
}

/// Names the scenario field behind an ensemble validation error.
fn scenario_error(e: CoreError) -> CliError {
    let field = match &e {
        CoreError::InvalidPriors { .. } => "priors".to_string(),
        CoreError::InvalidWeights(_) => "weights".to_string(),
        CoreError::InvalidState { index, .. } => format!("states[{index}]"),
        CoreError::SingularMixture { .. } => "states".to_string(),
        CoreError::DimensionMismatch { .. } | CoreError::NotSquare { .. } => "states".to_string(),
        _ => "scenario".to_string(),
    };
    CliError::Input(format!("{field}: {e}"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PovmFile {
    pub elements: Vec<JsonMatrix>,
    /// The first element is the inconclusive outcome.
    #[serde(default)]
    pub inconclusive: bool,
}

impl PovmFile {
    pub fn from_povm(p: &Povm) -> Self {
        Self {
            elements: p.elements().iter().map(matrix_to_json).collect(),
            inconclusive: p.has_inconclusive(),
        }
    }

    pub fn povm(&self) -> Result<Povm, CliError> {
        let elements = self
            .elements
            .iter()
            .enumerate()
            .map(|(i, m)| matrix_from_json(m, &format!("elements[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        Povm::new(elements, self.inconclusive).map_err(|e| CliError::Input(format!("povm: {e}")))
    }
}

/// A POVM given directly, inside a design report, or as a
/// deterministic/randomized pair for robustness sweeps.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum PovmSource {
    Plain(PovmFile),
    Report {
        povm: PovmFile,
    },
    Pair {
        #[serde(default)]
        deterministic: Option<PovmFile>,
        #[serde(default)]
        randomized: Option<PovmFile>,
    },
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    parse_json(&text).map_err(|e| match e {
        CliError::Input(msg) => CliError::Input(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Parses JSON, reporting the path of the offending field on failure.
pub fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if path == "." {
            CliError::Input(inner.to_string())
        } else {
            CliError::Input(format!("at {path}: {inner}"))
        }
    })
}

pub fn read_scenario(path: &Path) -> Result<Scenario, CliError> {
    let s: Scenario = read_json(path)?;
    if s.dim == 0 {
        return Err(CliError::Input("dim: must be positive".into()));
    }
    if s.states.is_empty() {
        return Err(CliError::Input(
            "states: at least one state is required".into(),
        ));
    }
    Ok(s)
}

pub fn read_noise(path: &Path) -> Result<NoiseModel, CliError> {
    let rows: Vec<Vec<f64>> = read_json(path)?;
    NoiseModel::from_rows(&rows).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn noise_to_json(nu: &NoiseModel) -> Vec<Vec<f64>> {
    (0..nu.rows())
        .map(|i| (0..nu.cols()).map(|j| nu.get(i, j)).collect())
        .collect()
}

/// Rounds to `digits` significant digits.
pub fn round_sig(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() || digits == 0 {
        return x;
    }
    let mag = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits as i32 - 1 - mag);
    (x * scale).round() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = include_str!("../data/example_2state.json");

    #[test]
    fn round_trip() {
        let s: Scenario = parse_json(EXAMPLE).unwrap();
        let e = s.ensemble().unwrap();
        let back = Scenario::from_ensemble(&e);
        let e2 = back.ensemble().unwrap();
        for i in 0..e.len() {
            assert!((e.state(i) - e2.state(i)).max_abs() <= 1e-15);
        }
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(parse_json::<Scenario>(&text).unwrap(), s);
    }

    #[test]
    fn errors_name_fields() {
        let bad = EXAMPLE.replace("0.3333333333333333", "0.2333333333333333");
        let s: Scenario = parse_json(&bad).unwrap();
        let err = s.ensemble().unwrap_err().to_string();
        assert!(err.contains("priors"), "{err}");

        let bad = EXAMPLE.replacen("[", "[\"x\",", 3);
        let err = parse_json::<Scenario>(&bad).unwrap_err().to_string();
        assert!(err.contains("states"), "{err}");
    }

    #[test]
    fn significant_digits() {
        assert_eq!(round_sig(0.8660254, 2), 0.87);
        assert_eq!(round_sig(0.0012345, 2), 0.0012);
        assert_eq!(round_sig(123.4, 2), 120.0);
        assert_eq!(round_sig(0.0, 2), 0.0);
    }
}
