//! Euler-Maruyama ensembles of N interacting stochastic trajectories.
//!
//! Three unravelings of the same mean-field dynamics are implemented, all
//! driven by one real standard normal xi per particle per step:
//!
//! * `normalized-pure`: psi lives on (or near) the unit sphere,
//!
//!   ```text
//!   psi' = psi + dt [ -i (H + A_eff) psi - (1/2)(L†L - <L†L>) psi ]
//!               + sqrt(dt) xi (L - c <L>) psi,
//!   ```
//!
//!   with expectations taken in psi/|psi| and c = 1 (`full-expectation`) or
//!   c = 1/2 (`halved-expectation`), optionally renormalized after each step.
//!
//! * `unnormalized-pure`: the linear unraveling
//!
//!   ```text
//!   psi' = psi + dt [ -i (H + A_eff) psi - (1/2) L†L psi ] + sqrt(dt) xi L psi,
//!   ```
//!
//!   whose mean projector E[psi psi†] follows the Lindblad flow exactly
//!   (per Euler step, with A_eff frozen). The norm is a martingale, not a
//!   constant, so no renormalization is applied in this mode.
//!
//! * `normalized-density`: each particle carries a density matrix,
//!
//!   ```text
//!   gamma' = gamma + dt [ -i [H + A_eff, gamma] + L gamma L† - (1/2){L†L, gamma} ]
//!                  + sqrt(dt) xi ( L gamma + gamma L† - tr((L + L†) gamma) gamma ).
//!   ```
//!
//!   The diffusion term is traceless on trace-one states and has zero mean,
//!   so this mode is both trace-preserving per step and mean-consistent with
//!   the Lindblad flow; the ensemble mean converges to m_t at the O(1/N)
//!   rate. Statistical studies default to it for that reason.
//!
//! The mean-field operator A_eff is frozen once per ensemble step: either
//! A{m_hat} from the current empirical state (interacting ensemble) or
//! A{m_ref(t_k)} from a precomputed reference solution (i.i.d. companion
//! ensemble, used by the coupling studies). Sharing one [`NoiseStream`]
//! between an interacting ensemble and its companion couples them
//! synchronously: particle l consumes the identical normal draw at the
//! identical (particle, step) address in both.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::generators::{step_count, ModelSpec, TimeSeries};
use crate::kernel::{self, InteractionKernel};
use crate::noise::NoiseStream;
use crate::ops::{self, CMatrix, CVector};
use crate::parallel;
use crate::tolerances as tol;
use crate::{Error, Result};

/// Which unraveling the ensemble integrates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeMode {
    NormalizedPure,
    UnnormalizedPure,
    NormalizedDensity,
}

impl SchemeMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeMode::NormalizedPure => "normalized-pure",
            SchemeMode::UnnormalizedPure => "unnormalized-pure",
            SchemeMode::NormalizedDensity => "normalized-density",
        }
    }

    pub fn is_pure(self) -> bool {
        !matches!(self, SchemeMode::NormalizedDensity)
    }
}

/// Coefficient c in the pure-state diffusion term (L - c<L>) psi.
///
/// Only the normalized-pure mode reads it; the linear and density modes have
/// no expectation term in their diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffusionVariant {
    FullExpectation,
    HalvedExpectation,
}

impl DiffusionVariant {
    pub fn coefficient(self) -> f64 {
        match self {
            DiffusionVariant::FullExpectation => 1.0,
            DiffusionVariant::HalvedExpectation => 0.5,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DiffusionVariant::FullExpectation => "full-expectation",
            DiffusionVariant::HalvedExpectation => "halved-expectation",
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_stride() -> usize {
    1
}

/// Everything that defines one integration run except the model and the
/// ensemble size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub mode: SchemeMode,
    pub diffusion_variant: DiffusionVariant,
    #[serde(default = "default_true")]
    pub renormalize_each_step: bool,
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

impl SchemeConfig {
    pub fn new(mode: SchemeMode, dt: f64, t_final: f64) -> Self {
        Self {
            mode,
            diffusion_variant: DiffusionVariant::FullExpectation,
            renormalize_each_step: true,
            dt,
            t_final,
            record_stride: 1,
        }
    }

    /// Validates the grid and returns the step count.
    pub fn steps(&self) -> Result<usize> {
        if self.record_stride == 0 {
            return Err(Error::invalid("record_stride must be at least 1"));
        }
        step_count(self.dt, self.t_final)
    }
}

/// Operators precomputed once per run: H, L, L†, and L†L.
#[derive(Debug, Clone)]
pub struct ModelOps {
    dim: usize,
    hamiltonian: CMatrix,
    lindblad: CMatrix,
    lindblad_dagger: CMatrix,
    damping: CMatrix,
}

impl ModelOps {
    pub fn new(spec: &ModelSpec) -> Self {
        let lindblad_dagger = ops::dagger(spec.lindblad());
        let damping = lindblad_dagger.dot(spec.lindblad());
        Self {
            dim: spec.dim(),
            hamiltonian: spec.hamiltonian().clone(),
            lindblad: spec.lindblad().clone(),
            lindblad_dagger,
            damping,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

fn inner(a: &CVector, b: &CVector) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// One Euler-Maruyama step of the normalized pure-state unraveling.
pub fn euler_step_normalized_pure(
    model: &ModelOps,
    aeff: &CMatrix,
    psi: &CVector,
    xi: f64,
    dt: f64,
    variant: DiffusionVariant,
    renormalize: bool,
) -> CVector {
    let norm_sq: f64 = psi.iter().map(|v| v.norm_sqr()).sum();
    let l_psi = model.lindblad.dot(psi);
    let damp_psi = model.damping.dot(psi);
    let ell = inner(psi, &l_psi) / norm_sq;
    let damp_expect = (inner(psi, &damp_psi) / norm_sq).re;
    let heff_psi = &model.hamiltonian.dot(psi) + &aeff.dot(psi);

    let minus_i = C64::new(0.0, -1.0);
    let drift = &heff_psi.mapv(|v| v * minus_i)
        - &(&damp_psi - &psi.mapv(|v| v * damp_expect)).mapv(|v| v * 0.5);
    let scale = ell * variant.coefficient();
    let diffusion = &l_psi - &psi.mapv(|v| v * scale);

    let mut next = psi + &drift.mapv(|v| v * dt) + &diffusion.mapv(|v| v * (xi * dt.sqrt()));
    if renormalize {
        let norm = ops::vector_norm(&next);
        next.mapv_inplace(|v| v / norm);
    }
    next
}

/// One Euler-Maruyama step of the linear (unnormalized) unraveling.
pub fn euler_step_unnormalized_pure(
    model: &ModelOps,
    aeff: &CMatrix,
    psi: &CVector,
    xi: f64,
    dt: f64,
) -> CVector {
    let l_psi = model.lindblad.dot(psi);
    let damp_psi = model.damping.dot(psi);
    let heff_psi = &model.hamiltonian.dot(psi) + &aeff.dot(psi);

    let minus_i = C64::new(0.0, -1.0);
    let drift = &heff_psi.mapv(|v| v * minus_i) - &damp_psi.mapv(|v| v * 0.5);
    psi + &drift.mapv(|v| v * dt) + &l_psi.mapv(|v| v * (xi * dt.sqrt()))
}

/// One Euler-Maruyama step of the density-matrix unraveling.
///
/// The diffusion coefficient tr((L + L†) gamma) is real for Hermitian gamma;
/// its real part is used so roundoff in the imaginary part cannot leak into
/// the state. With `renormalize` the result is Hermitized and divided by its
/// trace, both of which are pure roundoff cleanup: the step preserves
/// Hermiticity and the unit trace identically in exact arithmetic. A
/// collapsed trace (|tr| below [`tol::TRACE_UNDERFLOW`]) poisons the output
/// with NaN, which the ensemble-level finiteness scan turns into an error
/// naming the particle and step.
///
/// The body runs entrywise on flat row-major slices: this stepper executes
/// once per particle per step, and at ensemble dimensions the general matmul
/// plus its temporaries cost an order of magnitude more than the arithmetic.
pub fn euler_step_density(
    model: &ModelOps,
    aeff: &CMatrix,
    gamma: &CMatrix,
    xi: f64,
    dt: f64,
    renormalize: bool,
) -> CMatrix {
    let d = model.dim;
    let zero = C64::new(0.0, 0.0);
    let g_std = gamma.as_standard_layout();
    let h_std = model.hamiltonian.as_standard_layout();
    let a_std = aeff.as_standard_layout();
    let l_std = model.lindblad.as_standard_layout();
    let ld_std = model.lindblad_dagger.as_standard_layout();
    let dm_std = model.damping.as_standard_layout();
    let g = g_std.as_slice().expect("standard layout is contiguous");
    let h = h_std.as_slice().expect("standard layout is contiguous");
    let a = a_std.as_slice().expect("standard layout is contiguous");
    let l = l_std.as_slice().expect("standard layout is contiguous");
    let ld = ld_std.as_slice().expect("standard layout is contiguous");
    let dm = dm_std.as_slice().expect("standard layout is contiguous");

    // p = L gamma, shared by the jump term, the diffusion, and the homodyne
    // trace. Stack storage covers every dimension the ensembles run at.
    let mut stack = [zero; 64];
    let mut heap: Vec<C64>;
    let p: &mut [C64] = if d * d <= stack.len() {
        &mut stack[..d * d]
    } else {
        heap = vec![zero; d * d];
        &mut heap
    };
    for i in 0..d {
        for j in 0..d {
            let mut acc = zero;
            for k in 0..d {
                acc += l[i * d + k] * g[k * d + j];
            }
            p[i * d + j] = acc;
        }
    }
    let mut tr = zero;
    for i in 0..d {
        tr += p[i * d + i];
        for k in 0..d {
            tr += g[i * d + k] * ld[k * d + i];
        }
    }
    let homodyne = tr.re;

    let s = xi * dt.sqrt();
    let minus_i = C64::new(0.0, -1.0);
    let mut next = ops::zeros(d);
    let out = next
        .as_slice_mut()
        .expect("freshly allocated arrays are contiguous");
    for i in 0..d {
        for j in 0..d {
            let mut comm = zero; // (H + A_eff) gamma - gamma (H + A_eff)
            let mut jump = zero; // (L gamma) L†
            let mut anti = zero; // L†L gamma + gamma L†L
            let mut gl = zero; // gamma L†
            for k in 0..d {
                let heff_ik = h[i * d + k] + a[i * d + k];
                let heff_kj = h[k * d + j] + a[k * d + j];
                comm += heff_ik * g[k * d + j] - g[i * d + k] * heff_kj;
                jump += p[i * d + k] * ld[k * d + j];
                anti += dm[i * d + k] * g[k * d + j] + g[i * d + k] * dm[k * d + j];
                gl += g[i * d + k] * ld[k * d + j];
            }
            let idx = i * d + j;
            let drift = minus_i * comm + jump - 0.5 * anti;
            let diffusion = p[idx] + gl - homodyne * g[idx];
            out[idx] = g[idx] + dt * drift + s * diffusion;
        }
    }
    if renormalize {
        let mut trace = 0.0;
        for i in 0..d {
            for j in i..d {
                let x = out[i * d + j];
                let y = out[j * d + i];
                let avg = C64::new(0.5 * (x.re + y.re), 0.5 * (x.im - y.im));
                out[i * d + j] = avg;
                out[j * d + i] = avg.conj();
            }
            trace += out[i * d + i].re;
        }
        if trace.abs() < tol::TRACE_UNDERFLOW {
            out.fill(C64::new(f64::NAN, f64::NAN));
        } else {
            for v in out.iter_mut() {
                *v /= trace;
            }
        }
    }
    next
}

/// Particle states of one ensemble: amplitude vectors in the pure modes,
/// density matrices in the density mode.
#[derive(Debug, Clone)]
pub enum EnsembleStates {
    Pure(Vec<CVector>),
    Density(Vec<CMatrix>),
}

impl EnsembleStates {
    pub fn len(&self) -> usize {
        match self {
            EnsembleStates::Pure(list) => list.len(),
            EnsembleStates::Density(list) => list.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Where the frozen A_eff of each step comes from.
#[derive(Debug, Clone)]
enum MeanFieldDrive {
    /// A{m_hat} from the ensemble's own empirical state.
    Empirical,
    /// A{m_ref(t_k)} precomputed from a reference solution, one per step.
    Scheduled(Vec<CMatrix>),
}

/// N trajectories advanced in lockstep on a shared time grid.
#[derive(Debug, Clone)]
pub struct ParticleEnsemble {
    model: ModelOps,
    kernel: InteractionKernel,
    scheme: SchemeConfig,
    noise: NoiseStream,
    states: EnsembleStates,
    drive: MeanFieldDrive,
    step_index: usize,
    total_steps: usize,
}

impl ParticleEnsemble {
    /// Interacting ensemble: every step reads A{m_hat} off its own particles.
    pub fn interacting(
        spec: &ModelSpec,
        scheme: &SchemeConfig,
        n_particles: usize,
        seed: u64,
    ) -> Result<Self> {
        Self::build(spec, scheme, n_particles, seed, MeanFieldDrive::Empirical)
    }

    /// Independent copies of the limiting mean-field trajectory: every step
    /// reads A{m_ref(t_k)} off the supplied reference solution, so the
    /// particles never see each other. Built with the same seed as an
    /// interacting ensemble, particle l consumes the identical noise and the
    /// two systems are synchronously coupled.
    pub fn iid_with_reference(
        spec: &ModelSpec,
        scheme: &SchemeConfig,
        n_particles: usize,
        seed: u64,
        reference: &TimeSeries,
    ) -> Result<Self> {
        let steps = scheme.steps()?;
        if (reference.dt - scheme.dt).abs() > 1e-12 * scheme.dt {
            return Err(Error::invalid(format!(
                "reference grid dt = {} does not match scheme dt = {}",
                reference.dt, scheme.dt
            )));
        }
        if reference.len() < steps + 1 {
            return Err(Error::invalid(format!(
                "reference solution has {} states but the scheme needs {}",
                reference.len(),
                steps + 1
            )));
        }
        let mut schedule = Vec::with_capacity(steps);
        for state in reference.states.iter().take(steps) {
            schedule.push(kernel::apply_kernel(spec.kernel(), state)?);
        }
        Self::build(
            spec,
            scheme,
            n_particles,
            seed,
            MeanFieldDrive::Scheduled(schedule),
        )
    }

    fn build(
        spec: &ModelSpec,
        scheme: &SchemeConfig,
        n_particles: usize,
        seed: u64,
        drive: MeanFieldDrive,
    ) -> Result<Self> {
        let total_steps = scheme.steps()?;
        if n_particles == 0 {
            return Err(Error::invalid("ensemble needs at least one particle"));
        }
        let states = if scheme.mode.is_pure() {
            let psi0 = spec.initial_pure()?.amplitudes().clone();
            EnsembleStates::Pure(vec![psi0; n_particles])
        } else {
            EnsembleStates::Density(vec![spec.initial_density(); n_particles])
        };
        Ok(Self {
            model: ModelOps::new(spec),
            kernel: spec.kernel().clone(),
            scheme: scheme.clone(),
            noise: NoiseStream::new(seed),
            states,
            drive,
            step_index: 0,
            total_steps,
        })
    }

    pub fn n_particles(&self) -> usize {
        self.states.len()
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn total_steps(&self) -> usize {
        self.total_steps
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.scheme.dt
    }

    pub fn mode(&self) -> SchemeMode {
        self.scheme.mode
    }

    pub fn states(&self) -> &EnsembleStates {
        &self.states
    }

    /// Empirical mean state m_hat = (1/N) sum of particle density matrices
    /// (projectors psi psi† in the pure modes, taken without normalizing).
    /// The sum runs in particle order so the result does not depend on the
    /// thread count.
    pub fn empirical_density(&self) -> CMatrix {
        let d = self.model.dim;
        let mut acc = ops::zeros(d);
        match &self.states {
            EnsembleStates::Pure(list) => {
                for psi in list {
                    for i in 0..d {
                        for j in 0..d {
                            acc[(i, j)] += psi[i] * psi[j].conj();
                        }
                    }
                }
            }
            EnsembleStates::Density(list) => {
                for gamma in list {
                    acc += gamma;
                }
            }
        }
        let weight = 1.0 / self.n_particles() as f64;
        acc.mapv_inplace(|v| v * weight);
        acc
    }

    /// Advances every particle by one Euler-Maruyama step with A_eff frozen
    /// at the start of the step. Aborts if any particle stops being finite.
    pub fn step(&mut self) -> Result<()> {
        if self.step_index >= self.total_steps {
            return Err(Error::invalid("ensemble stepped past t_final"));
        }
        let aeff = match &self.drive {
            MeanFieldDrive::Empirical => {
                kernel::apply_kernel(&self.kernel, &self.empirical_density())?
            }
            MeanFieldDrive::Scheduled(schedule) => schedule[self.step_index].clone(),
        };
        let k = self.step_index as u64;
        let dt = self.scheme.dt;
        let mode = self.scheme.mode;
        let variant = self.scheme.diffusion_variant;
        let renormalize = self.scheme.renormalize_each_step;
        let noise = &self.noise;
        let model = &self.model;

        let next = match &self.states {
            EnsembleStates::Pure(list) => {
                let mapped = parallel::indexed_map(list, |i, psi| {
                    let xi = noise.standard_normal(i as u64, k);
                    match mode {
                        SchemeMode::NormalizedPure => euler_step_normalized_pure(
                            model,
                            &aeff,
                            psi,
                            xi,
                            dt,
                            variant,
                            renormalize,
                        ),
                        SchemeMode::UnnormalizedPure => {
                            euler_step_unnormalized_pure(model, &aeff, psi, xi, dt)
                        }
                        SchemeMode::NormalizedDensity => {
                            unreachable!("density mode never holds pure states")
                        }
                    }
                });
                for (i, psi) in mapped.iter().enumerate() {
                    if !psi.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
                        return Err(Error::Numerics {
                            step: self.step_index + 1,
                            what: format!("particle {i} left the finite range"),
                        });
                    }
                }
                EnsembleStates::Pure(mapped)
            }
            EnsembleStates::Density(list) => {
                let mapped = parallel::indexed_map(list, |i, gamma| {
                    let xi = noise.standard_normal(i as u64, k);
                    euler_step_density(model, &aeff, gamma, xi, dt, renormalize)
                });
                for (i, gamma) in mapped.iter().enumerate() {
                    if !ops::is_finite(gamma) {
                        return Err(Error::Numerics {
                            step: self.step_index + 1,
                            what: format!("particle {i} left the finite range"),
                        });
                    }
                }
                EnsembleStates::Density(mapped)
            }
        };
        self.states = next;
        self.step_index += 1;
        Ok(())
    }
}

/// Per-particle distances between two ensembles of equal mode and size:
/// amplitude-vector norms in the pure modes, Hilbert-Schmidt norms in the
/// density mode. Used by the synchronous-coupling studies.
pub fn pairwise_distances(a: &ParticleEnsemble, b: &ParticleEnsemble) -> Result<Vec<f64>> {
    if a.n_particles() != b.n_particles() {
        return Err(Error::Dimension {
            context: "ensembles have different particle counts",
            expected: a.n_particles(),
            got: b.n_particles(),
        });
    }
    match (&a.states, &b.states) {
        (EnsembleStates::Pure(xs), EnsembleStates::Pure(ys)) => Ok(xs
            .iter()
            .zip(ys.iter())
            .map(|(x, y)| ops::vector_norm(&(x - y)))
            .collect()),
        (EnsembleStates::Density(xs), EnsembleStates::Density(ys)) => Ok(xs
            .iter()
            .zip(ys.iter())
            .map(|(x, y)| ops::hs_norm(&(x - y)))
            .collect()),
        _ => Err(Error::invalid(
            "cannot compare a pure-state ensemble with a density-matrix ensemble",
        )),
    }
}

/// Summary of one ensemble run, recorded every `record_stride` steps (plus
/// the initial and final states).
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub scheme: SchemeConfig,
    pub n_particles: usize,
    pub seed: u64,
    /// Step indices at which the rows below were recorded.
    pub indices: Vec<usize>,
    pub times: Vec<f64>,
    /// Empirical mean state at each recorded step.
    pub means: Vec<CMatrix>,
    pub trace_re: Vec<f64>,
    pub purity: Vec<f64>,
    /// Bloch coordinates of the mean state, present for qubit models.
    pub bloch: Option<Vec<[f64; 3]>>,
    pub max_mean_trace_deviation: f64,
    pub max_mean_hermiticity_violation: f64,
}

/// Runs an interacting ensemble to t_final and records summary rows.
pub fn simulate(
    spec: &ModelSpec,
    scheme: &SchemeConfig,
    n_particles: usize,
    seed: u64,
) -> Result<TrajectoryRecord> {
    let mut ensemble = ParticleEnsemble::interacting(spec, scheme, n_particles, seed)?;
    record_run(&mut ensemble, seed)
}

/// Runs an i.i.d. mean-field companion ensemble to t_final and records
/// summary rows; the reference solution supplies A{m_ref(t)} at every step.
pub fn simulate_iid_companion(
    spec: &ModelSpec,
    scheme: &SchemeConfig,
    n_particles: usize,
    seed: u64,
    reference: &TimeSeries,
) -> Result<TrajectoryRecord> {
    let mut ensemble =
        ParticleEnsemble::iid_with_reference(spec, scheme, n_particles, seed, reference)?;
    record_run(&mut ensemble, seed)
}

fn record_run(ensemble: &mut ParticleEnsemble, seed: u64) -> Result<TrajectoryRecord> {
    let scheme = ensemble.scheme.clone();
    let steps = ensemble.total_steps;
    let stride = scheme.record_stride;
    let is_qubit = ensemble.model.dim == 2;
    let mut record = TrajectoryRecord {
        scheme: scheme.clone(),
        n_particles: ensemble.n_particles(),
        seed,
        indices: Vec::new(),
        times: Vec::new(),
        means: Vec::new(),
        trace_re: Vec::new(),
        purity: Vec::new(),
        bloch: is_qubit.then(Vec::new),
        max_mean_trace_deviation: 0.0,
        max_mean_hermiticity_violation: 0.0,
    };
    let push = |record: &mut TrajectoryRecord, k: usize, ensemble: &ParticleEnsemble| {
        let mean = ensemble.empirical_density();
        record.indices.push(k);
        record.times.push(k as f64 * scheme.dt);
        record.trace_re.push(ops::trace(&mean).re);
        record.purity.push(ops::purity(&mean));
        if let Some(bloch) = record.bloch.as_mut() {
            let (x, y, z) = ops::bloch_coords(&mean);
            bloch.push([x, y, z]);
        }
        let trace_dev = (ops::trace(&mean) - C64::new(1.0, 0.0)).norm();
        let herm = ops::hermiticity_violation(&mean);
        record.max_mean_trace_deviation = record.max_mean_trace_deviation.max(trace_dev);
        record.max_mean_hermiticity_violation = record.max_mean_hermiticity_violation.max(herm);
        record.means.push(mean);
    };
    push(&mut record, 0, ensemble);
    for k in 1..=steps {
        ensemble.step()?;
        if k % stride == 0 || k == steps {
            push(&mut record, k, ensemble);
        }
    }
    Ok(record)
}
