//! Run configuration: JSON schema, loading, and validation.
//!
//! A configuration file fixes the model (operators as nested `[re, im]`
//! literals), the integration scheme, the run parameters, and the output
//! destination. Loading validates everything the core modules can check
//! (Hermiticity, kernel structure, state normalization) and everything only
//! the file format can check (exactly one initial state, known output
//! formats), so a config that loads cleanly will not be rejected later for
//! structural reasons.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use unravel_core::generators::{InitialState, ModelSpec};
use unravel_core::kernel::InteractionKernel;
use unravel_core::ops::{self, CMatrix, CVector};
use unravel_core::state::PureState;
use unravel_core::trajectories::{DiffusionVariant, SchemeConfig, SchemeMode};

use crate::CliError;

/// One complex number in the file format: `[re, im]`.
pub type ComplexLit = [f64; 2];

fn to_c64(lit: ComplexLit) -> C64 {
    C64::new(lit[0], lit[1])
}

/// Row-major complex matrix literal.
fn to_matrix(name: &str, rows: &[Vec<ComplexLit>]) -> Result<CMatrix, CliError> {
    let n = rows.len();
    if n == 0 {
        return Err(CliError::config(format!(
            "[{name}] matrix must not be empty"
        )));
    }
    let m = rows[0].len();
    if rows.iter().any(|r| r.len() != m) {
        return Err(CliError::config(format!(
            "[{name}] matrix rows have unequal lengths"
        )));
    }
    let mut out = Array2::zeros((n, m));
    for (i, row) in rows.iter().enumerate() {
        for (j, &lit) in row.iter().enumerate() {
            out[(i, j)] = to_c64(lit);
        }
    }
    Ok(out)
}

fn to_vector(lits: &[ComplexLit]) -> CVector {
    Array1::from_iter(lits.iter().map(|&l| to_c64(l)))
}

/// Initial state: exactly one of the two fields must be present.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi0: Option<Vec<ComplexLit>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho0: Option<Vec<Vec<ComplexLit>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub d: usize,
    #[serde(rename = "H")]
    pub hamiltonian: Vec<Vec<ComplexLit>>,
    #[serde(rename = "L")]
    pub lindblad: Vec<Vec<ComplexLit>>,
    pub kernel: Vec<Vec<ComplexLit>>,
    pub initial: InitialSection,
}

/// Mirror of the core scheme config that also accepts the short horizon key
/// `T` in files.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSection {
    pub mode: SchemeMode,
    pub diffusion_variant: DiffusionVariant,
    #[serde(default = "default_true")]
    pub renormalize_each_step: bool,
    pub dt: f64,
    #[serde(alias = "T")]
    pub t_final: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

fn default_true() -> bool {
    true
}

fn default_stride() -> usize {
    1
}

impl SchemeSection {
    pub fn to_scheme(&self) -> SchemeConfig {
        SchemeConfig {
            mode: self.mode,
            diffusion_variant: self.diffusion_variant,
            renormalize_each_step: self.renormalize_each_step,
            dt: self.dt,
            t_final: self.t_final,
            record_stride: self.record_stride,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Particle count for `simulate`.
    #[serde(default, rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Seed list for the studies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    /// Ensemble-size ladder for the studies.
    #[serde(default, rename = "N_values", skip_serializing_if = "Option::is_none")]
    pub n_values: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl OutputSection {
    pub fn wants(&self, f: OutputFormat) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    pub schema_version: u32,
    pub model: ModelSection,
    pub scheme: SchemeSection,
    #[serde(default)]
    pub run: RunSection,
    pub output: OutputSection,
}

pub const SCHEMA_VERSION: u32 = 1;

impl SimulationConfig {
    /// Parses and validates a config file. Parse errors keep serde_json's
    /// line/column info; validation errors name the failing check.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::config(format!("[config-file] cannot read {}: {e}", path.display()))
        })?;
        let config: SimulationConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("[config-parse] {}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Re-runs every structural check; called on load and again after the
    /// command-line overrides are merged in.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(format!(
                "[schema-version] expected {SCHEMA_VERSION}, got {}",
                self.schema_version
            )));
        }
        if self.output.formats.is_empty() {
            return Err(CliError::config(
                "[output-formats] at least one of csv/json is required".into(),
            ));
        }
        match (&self.model.initial.psi0, &self.model.initial.rho0) {
            (Some(_), Some(_)) => {
                return Err(CliError::config(
                    "[initial-state] psi0 and rho0 are mutually exclusive".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::config(
                    "[initial-state] one of psi0/rho0 is required".into(),
                ))
            }
            _ => {}
        }
        // Everything else (operator shapes, Hermiticity, kernel structure,
        // normalization, grid divisibility) is checked by the core
        // constructors; run them now so `validate` catches it all.
        let spec = self.build_model()?;
        let scheme = self.scheme.to_scheme();
        scheme.steps().map_err(CliError::from_core_config)?;
        if scheme.mode.is_pure() {
            spec.initial_pure().map_err(|_| {
                CliError::config(format!(
                    "[initial-state] mode {} needs psi0 or a rank-1 rho0",
                    scheme.mode.as_str()
                ))
            })?;
        }
        Ok(())
    }

    /// Builds the validated core model. A rank-1 rho0 is converted to the
    /// pure state it projects onto, so pure-state modes accept it.
    pub fn build_model(&self) -> Result<ModelSpec, CliError> {
        let d = self.model.d;
        let h = to_matrix("model.H", &self.model.hamiltonian)?;
        let l = to_matrix("model.L", &self.model.lindblad)?;
        let kernel_matrix = to_matrix("model.kernel", &self.model.kernel)?;
        let kernel = InteractionKernel::new(d, kernel_matrix)
            .map_err(|e| CliError::config(format!("[kernel-structure] {e}")))?;
        let initial = match (&self.model.initial.psi0, &self.model.initial.rho0) {
            (Some(psi), None) => {
                let state = PureState::raw(to_vector(psi))
                    .map_err(|e| CliError::config(format!("[initial-state] {e}")))?;
                InitialState::Pure(state)
            }
            (None, Some(rho)) => {
                let matrix = to_matrix("model.initial.rho0", rho)?;
                match extract_pure(&matrix) {
                    Some(psi) => InitialState::Pure(psi),
                    None => InitialState::Density(matrix),
                }
            }
            _ => unreachable!("validated to exactly one"),
        };
        ModelSpec::new(d, h, l, kernel, initial)
            .map_err(|e| CliError::config(format!("[model-structure] {e}")))
    }
}

/// Tolerance for accepting a density matrix as the projector onto a pure
/// state: Hilbert-Schmidt residual of rho - psi psi^dagger.
const RANK_ONE_RESIDUAL: f64 = 1e-10;

/// If rho is (numerically) a rank-1 projector, returns the unit vector it
/// projects onto. For rho = psi psi^dagger, the column with the largest
/// diagonal entry is psi * conj(psi_j), so normalizing it recovers psi up to
/// a global phase; the residual check then certifies the factorization.
fn extract_pure(rho: &CMatrix) -> Option<PureState> {
    let d = rho.nrows();
    if rho.ncols() != d || d == 0 {
        return None;
    }
    let j = (0..d).max_by(|&a, &b| {
        rho[(a, a)]
            .re
            .partial_cmp(&rho[(b, b)].re)
            .unwrap_or(std::cmp::Ordering::Equal)
    })?;
    if rho[(j, j)].re <= 0.0 {
        return None;
    }
    let column = rho.column(j).to_owned();
    let norm = ops::vector_norm(&column);
    if norm <= 0.0 || norm.is_nan() {
        return None;
    }
    let psi: CVector = column.mapv(|v| v / norm);
    let projector = ops::density_from_pure(&psi);
    let residual = ops::hs_norm(&(rho - &projector));
    if residual <= RANK_ONE_RESIDUAL {
        PureState::raw(psi).ok()
    } else {
        None
    }
}

/// Serializes any hand-built config (used by the shipped examples and tests).
/// Purely numeric arrays are collapsed onto one line so `[re, im]` literals
/// and matrix rows stay readable.
pub fn write_config(path: &Path, config: &SimulationConfig) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(config)
        .map_err(|e| CliError::config(format!("[config-serialize] {e}")))?;
    let text = compact_leaf_arrays(&text);
    std::fs::write(path, text + "\n").map_err(|e| {
        CliError::config(format!(
            "[config-file] cannot write {}: {e}",
            path.display()
        ))
    })
}

/// Rewrites `[\n  1.0,\n  2.0\n]` as `[1.0, 2.0]` wherever the array nests
/// nothing (no inner array, object, or string), which is exactly the numeric
/// leaves of the schema.
fn compact_leaf_arrays(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    // (start offset in `out`, saw nested structure) per open bracket.
    let mut stack: Vec<(usize, bool)> = Vec::new();
    let mut in_string = false;
    let mut escaped = false;
    for ch in text.chars() {
        if in_string {
            out.push(ch);
            if escaped {
                escaped = false;
            } else if ch == '\\' {
                escaped = true;
            } else if ch == '"' {
                in_string = false;
            }
            continue;
        }
        match ch {
            '"' => {
                in_string = true;
                if let Some(top) = stack.last_mut() {
                    top.1 = true;
                }
                out.push(ch);
            }
            '{' => {
                if let Some(top) = stack.last_mut() {
                    top.1 = true;
                }
                out.push(ch);
            }
            '[' => {
                if let Some(top) = stack.last_mut() {
                    top.1 = true;
                }
                stack.push((out.len(), false));
                out.push(ch);
            }
            ']' => {
                out.push(ch);
                if let Some((start, nested)) = stack.pop() {
                    if !nested {
                        let body: String = out[start + 1..out.len() - 1]
                            .split(',')
                            .map(str::trim)
                            .collect::<Vec<_>>()
                            .join(", ");
                        out.truncate(start);
                        out.push('[');
                        out.push_str(&body);
                        out.push(']');
                    }
                }
            }
            _ => out.push(ch),
        }
    }
    out
}

pub fn matrix_to_lits(m: &CMatrix) -> Vec<Vec<ComplexLit>> {
    m.rows()
        .into_iter()
        .map(|row| row.iter().map(|v| [v.re, v.im]).collect())
        .collect()
}

pub fn vector_to_lits(v: &CVector) -> Vec<ComplexLit> {
    v.iter().map(|c| [c.re, c.im]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use unravel_core::ops::{qubit_density, sigma_minus, sigma_z};

    fn example_config(dir: &Path) -> SimulationConfig {
        let spec = ModelSpec::qubit_example();
        SimulationConfig {
            schema_version: SCHEMA_VERSION,
            model: ModelSection {
                d: 2,
                hamiltonian: matrix_to_lits(spec.hamiltonian()),
                lindblad: matrix_to_lits(spec.lindblad()),
                kernel: matrix_to_lits(spec.kernel().matrix()),
                initial: InitialSection {
                    psi0: Some(vector_to_lits(spec.initial_pure().unwrap().amplitudes())),
                    rho0: None,
                },
            },
            scheme: SchemeSection {
                mode: SchemeMode::NormalizedPure,
                diffusion_variant: DiffusionVariant::FullExpectation,
                renormalize_each_step: true,
                dt: 1e-3,
                t_final: 1.0,
                record_stride: 10,
            },
            run: RunSection {
                n: Some(64),
                seed: Some(7),
                seeds: None,
                n_values: None,
            },
            output: OutputSection {
                directory: dir.to_path_buf(),
                formats: vec![OutputFormat::Csv, OutputFormat::Json],
            },
        }
    }

    #[test]
    fn round_trips_and_validates_the_shipped_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let config = example_config(dir.path());
        write_config(&path, &config).unwrap();
        let loaded = SimulationConfig::load(&path).unwrap();
        assert_eq!(loaded.schema_version, SCHEMA_VERSION);
        assert_eq!(loaded.run.n, Some(64));
        let spec = loaded.build_model().unwrap();
        assert_eq!(spec.dim(), 2);
        assert!(spec.initial_pure().is_ok());
    }

    #[test]
    fn accepts_the_short_horizon_key() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let config = example_config(dir.path());
        let mut value = serde_json::to_value(&config).unwrap();
        let scheme = value["scheme"].as_object_mut().unwrap();
        let t = scheme.remove("t_final").unwrap();
        scheme.insert("T".into(), t);
        std::fs::write(&path, serde_json::to_string(&value).unwrap()).unwrap();
        let loaded = SimulationConfig::load(&path).unwrap();
        assert_eq!(loaded.scheme.t_final, 1.0);
    }

    #[test]
    fn rejects_structural_mistakes_with_named_checks() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let base = example_config(dir.path());

        let mut both = base.clone();
        both.model.initial.rho0 = Some(matrix_to_lits(&qubit_density(0.0, 0.0, 0.0)));
        write_config(&path, &both).unwrap();
        let err = SimulationConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("[initial-state]"), "{err}");

        let mut neither = base.clone();
        neither.model.initial.psi0 = None;
        write_config(&path, &neither).unwrap();
        let err = SimulationConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("[initial-state]"), "{err}");

        let mut skewed = base.clone();
        skewed.model.hamiltonian = matrix_to_lits(&sigma_minus());
        write_config(&path, &skewed).unwrap();
        let err = SimulationConfig::load(&path).unwrap_err().to_string();
        assert!(
            err.contains("[model-structure]") && err.contains("Hermitian"),
            "{err}"
        );

        let mut broken_kernel = base.clone();
        let mut k = matrix_to_lits(spec_kernel().matrix());
        k[0][1] = [0.3, 0.0];
        broken_kernel.model.kernel = k;
        write_config(&path, &broken_kernel).unwrap();
        let err = SimulationConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("[kernel-structure]"), "{err}");

        let mut version = base.clone();
        version.schema_version = 2;
        write_config(&path, &version).unwrap();
        let err = SimulationConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("[schema-version]"), "{err}");

        let mut grid = base;
        grid.scheme.dt = 3e-4;
        write_config(&path, &grid).unwrap();
        let err = SimulationConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("integer multiple"), "{err}");
    }

    fn spec_kernel() -> InteractionKernel {
        ModelSpec::qubit_example().kernel().clone()
    }

    #[test]
    fn parse_errors_carry_line_info() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, "{\n  \"schema_version\": 1,\n  oops\n}\n").unwrap();
        let err = SimulationConfig::load(&path).unwrap_err().to_string();
        assert!(
            err.contains("[config-parse]") && err.contains("line 3"),
            "{err}"
        );
    }

    #[test]
    fn rank_one_rho0_feeds_pure_modes_and_mixed_rho0_is_kept() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let mut config = example_config(dir.path());
        let psi = PureState::qubit_plus();
        config.model.initial.psi0 = None;
        config.model.initial.rho0 = Some(matrix_to_lits(&psi.density()));
        write_config(&path, &config).unwrap();
        let loaded = SimulationConfig::load(&path).unwrap();
        let spec = loaded.build_model().unwrap();
        let recovered = spec.initial_pure().unwrap();
        // Phase-free comparison through the projector.
        let gap = ops::hs_norm(&(&recovered.density() - &psi.density()));
        assert!(gap < 1e-12, "gap {gap}");

        let mut mixed = example_config(dir.path());
        mixed.model.initial.psi0 = None;
        mixed.model.initial.rho0 = Some(matrix_to_lits(&CMatrix::eye(2).mapv(|v| v * 0.5)));
        mixed.scheme.mode = SchemeMode::NormalizedPure;
        write_config(&path, &mixed).unwrap();
        let err = SimulationConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("needs psi0"), "{err}");

        let mut density_mode = example_config(dir.path());
        density_mode.model.initial.psi0 = None;
        density_mode.model.initial.rho0 = Some(matrix_to_lits(&CMatrix::eye(2).mapv(|v| v * 0.5)));
        density_mode.scheme.mode = SchemeMode::NormalizedDensity;
        write_config(&path, &density_mode).unwrap();
        assert!(SimulationConfig::load(&path).is_ok());
    }

    #[test]
    fn hamiltonian_matrix_shape_errors_are_named() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        let mut config = example_config(dir.path());
        config.model.hamiltonian = matrix_to_lits(&sigma_z()).into_iter().take(1).collect();
        write_config(&path, &config).unwrap();
        let err = SimulationConfig::load(&path).unwrap_err().to_string();
        assert!(err.contains("[model-structure]"), "{err}");
    }
}
