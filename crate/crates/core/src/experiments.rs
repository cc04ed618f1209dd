//! Statistical studies built on the trajectory ensembles: the O(1/N) rate of
//! the empirical state, the synchronous-coupling distance to independent
//! mean-field copies, the single-site marginal of the exact N-body solution,
//! and the weak time-discretization bias.
//!
//! Every study is deterministic given its seed list: cells run in a fixed
//! order (parallelism never reorders the outputs) and all reductions are
//! serial.

use serde::Serialize;

use crate::generators::{solve_meanfield_reference, solve_nbody_reference, ModelSpec, TimeSeries};
use crate::ops;
use crate::parallel;
use crate::trajectories::{pairwise_distances, ParticleEnsemble, SchemeConfig, SchemeMode};
use crate::{Error, Result};

/// Ordinary least squares on (ln x, ln y).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fits ln y = slope · ln x + intercept. Requires at least two points and
/// strictly positive data; constant data fits exactly with slope 0 and,
/// by convention for a zero total sum of squares, r² = 1.
pub fn fit_loglog_slope(x: &[f64], y: &[f64]) -> Result<LogLogFit> {
    if x.len() != y.len() {
        return Err(Error::Dimension {
            context: "log-log fit input lengths differ",
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::invalid("log-log fit needs at least two points"));
    }
    for (&xi, &yi) in x.iter().zip(y.iter()) {
        if !(xi > 0.0 && xi.is_finite() && yi > 0.0 && yi.is_finite()) {
            return Err(Error::invalid(
                "log-log fit needs strictly positive finite data",
            ));
        }
    }
    let n = x.len() as f64;
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let mean_x = lx.iter().sum::<f64>() / n;
    let mean_y = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|v| (v - mean_x).powi(2)).sum();
    let sxy: f64 = lx
        .iter()
        .zip(ly.iter())
        .map(|(a, b)| (a - mean_x) * (b - mean_y))
        .sum();
    if sxx == 0.0 {
        return Err(Error::invalid("log-log fit needs at least two distinct x"));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = ly.iter().map(|v| (v - mean_y).powi(2)).sum();
    let ss_res: f64 = lx
        .iter()
        .zip(ly.iter())
        .map(|(a, b)| (b - (intercept + slope * a)).powi(2))
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Sup over the time grid of the seed-averaged squared error, one entry per
/// ensemble size, with the spread across seeds at the sup-attaining time.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub n_values: Vec<usize>,
    /// sup_t mean_seeds ||m_hat - m_ref||² (Hilbert-Schmidt).
    pub mean_sq_errors: Vec<f64>,
    /// Standard error across seeds at the time where the sup is attained.
    pub stderrs: Vec<f64>,
    /// Per-size, per-seed sup over the grid of the squared error (NaN for
    /// excluded cells). Diagnostic only: the fitted quantity above takes the
    /// sup of the seed-averaged curve, not the mean of these sups.
    pub per_seed_sups: Vec<Vec<f64>>,
    pub fit: Option<LogLogFit>,
    pub seeds: Vec<u64>,
    pub dt: f64,
    pub t_final: f64,
    /// Cells dropped because their run aborted (non-finite states).
    pub excluded_cells: usize,
    /// False when more than a tenth of the cells were excluded, any size lost
    /// every seed, or the errors degenerated so no slope could be fitted.
    pub valid: bool,
}

/// Same layout for the synchronous-coupling distances.
#[derive(Debug, Clone, Serialize)]
pub struct CouplingReport {
    pub mode: SchemeMode,
    pub n_values: Vec<usize>,
    /// sup_t mean_seeds (1/N) Σ_l ||particle_l - companion_l||².
    pub mean_sq_distances: Vec<f64>,
    /// sup_t mean_seeds max_l ||particle_l - companion_l||². Recorded for
    /// reference; the fit uses the mean, whose estimator is unbiased for the
    /// (exchangeable, l-independent) expected squared distance, while the
    /// max over particles inflates with ensemble size like an extreme value.
    pub max_sq_distances: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Per-size, per-seed sup over the grid of the mean squared distance
    /// (NaN for excluded cells); diagnostic companion to the fitted column.
    pub per_seed_sups: Vec<Vec<f64>>,
    pub fit: Option<LogLogFit>,
    pub seeds: Vec<u64>,
    pub dt: f64,
    pub t_final: f64,
    pub excluded_cells: usize,
    pub valid: bool,
}

/// Distance of the exact N-body single-site marginal from the mean-field
/// solution, one entry per particle number.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalReport {
    pub n_values: Vec<usize>,
    /// sup_t ||tr_{sites != 0} rho^N_t - m_t|| (Hilbert-Schmidt).
    pub discrepancies: Vec<f64>,
    /// The same distance at the final grid point only.
    pub final_discrepancies: Vec<f64>,
    /// Full per-step distance curve for each size, for tabulation.
    pub curves: Vec<Vec<f64>>,
    pub dt: f64,
    pub t_final: f64,
}

/// Final-time error of the i.i.d. companion mean against the reference, one
/// entry per step size, averaged over seeds. Halving dt should roughly halve
/// the error once the copy count pushes the sampling noise below the
/// discretization bias.
#[derive(Debug, Clone, Serialize)]
pub struct WeakBiasReport {
    pub dts: Vec<f64>,
    /// Seed-averaged ||empirical mean - m_T||, one entry per dt.
    pub final_errors: Vec<f64>,
    /// Per-dt, per-seed errors behind the averages above.
    pub per_seed_errors: Vec<Vec<f64>>,
    pub n_copies: usize,
    pub seeds: Vec<u64>,
    pub t_final: f64,
}

/// Squared-error curve of one interacting ensemble against the reference,
/// indexed by step.
fn convergence_cell(
    spec: &ModelSpec,
    scheme: &SchemeConfig,
    n_particles: usize,
    seed: u64,
    reference: &TimeSeries,
) -> Result<Vec<f64>> {
    let steps = scheme.steps()?;
    let mut ensemble = ParticleEnsemble::interacting(spec, scheme, n_particles, seed)?;
    let mut errors = Vec::with_capacity(steps + 1);
    let gap = |e: &ParticleEnsemble, k: usize| {
        ops::hs_norm(&(&e.empirical_density() - &reference.states[k])).powi(2)
    };
    errors.push(gap(&ensemble, 0));
    for k in 1..=steps {
        ensemble.step()?;
        errors.push(gap(&ensemble, k));
    }
    Ok(errors)
}

/// Mean- and max-squared pairwise distance curves between an interacting
/// ensemble and its synchronously coupled i.i.d. companion.
fn coupling_cell(
    spec: &ModelSpec,
    scheme: &SchemeConfig,
    n_particles: usize,
    seed: u64,
    reference: &TimeSeries,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let steps = scheme.steps()?;
    let mut interacting = ParticleEnsemble::interacting(spec, scheme, n_particles, seed)?;
    let mut companion =
        ParticleEnsemble::iid_with_reference(spec, scheme, n_particles, seed, reference)?;
    let mut means = Vec::with_capacity(steps + 1);
    let mut maxes = Vec::with_capacity(steps + 1);
    let mut push = |a: &ParticleEnsemble, b: &ParticleEnsemble| -> Result<()> {
        let d = pairwise_distances(a, b)?;
        means.push(d.iter().map(|v| v * v).sum::<f64>() / d.len() as f64);
        maxes.push(d.iter().map(|v| v * v).fold(0.0, f64::max));
        Ok(())
    };
    push(&interacting, &companion)?;
    for _ in 0..steps {
        interacting.step()?;
        companion.step()?;
        push(&interacting, &companion)?;
    }
    Ok((means, maxes))
}

/// Seed-averages the per-step curves of one ensemble size and takes the sup
/// over the grid, reporting the across-seed standard error at the
/// sup-attaining step. Failed cells are dropped.
fn combine_cells(cells: &[Result<Vec<f64>>]) -> (f64, f64, usize) {
    let surviving: Vec<&Vec<f64>> = cells.iter().filter_map(|c| c.as_ref().ok()).collect();
    let excluded = cells.len() - surviving.len();
    if surviving.is_empty() {
        return (f64::NAN, f64::NAN, excluded);
    }
    let steps = surviving[0].len();
    let count = surviving.len() as f64;
    let mut sup_mean = f64::NEG_INFINITY;
    let mut sup_index = 0;
    for k in 0..steps {
        let mean = surviving.iter().map(|c| c[k]).sum::<f64>() / count;
        if mean > sup_mean {
            sup_mean = mean;
            sup_index = k;
        }
    }
    let stderr = if surviving.len() < 2 {
        0.0
    } else {
        let vals: Vec<f64> = surviving.iter().map(|c| c[sup_index]).collect();
        let mean = vals.iter().sum::<f64>() / count;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
        (var / count).sqrt()
    };
    (sup_mean, stderr, excluded)
}

fn fit_if_positive(n_values: &[usize], errors: &[f64]) -> Option<LogLogFit> {
    let x: Vec<f64> = n_values.iter().map(|&n| n as f64).collect();
    fit_loglog_slope(&x, errors).ok()
}

/// Sup over the grid of each cell curve, NaN for cells whose run aborted.
fn per_seed_sups(cells: &[Result<Vec<f64>>]) -> Vec<f64> {
    cells
        .iter()
        .map(|c| match c {
            Ok(curve) => curve.iter().copied().fold(0.0, f64::max),
            Err(_) => f64::NAN,
        })
        .collect()
}

fn check_study_inputs(n_values: &[usize], seeds: &[u64]) -> Result<()> {
    if n_values.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("study needs ensemble sizes and seeds"));
    }
    if n_values.contains(&0) {
        return Err(Error::invalid("ensemble sizes must be positive"));
    }
    Ok(())
}

/// Measures sup_t E||m_hat_t - m_t||² across ensemble sizes and fits its
/// decay rate; an exponent near -1 reproduces the O(1/N) convergence of the
/// interacting-particle approximation.
pub fn convergence_study(
    spec: &ModelSpec,
    scheme: &SchemeConfig,
    n_values: &[usize],
    seeds: &[u64],
) -> Result<ConvergenceReport> {
    check_study_inputs(n_values, seeds)?;
    let (reference, _) = solve_meanfield_reference(spec, scheme.dt, scheme.t_final)?;
    let total = n_values.len() * seeds.len();
    let cells = parallel::indexed_tasks(total, |idx| {
        let n = n_values[idx / seeds.len()];
        let seed = seeds[idx % seeds.len()];
        convergence_cell(spec, scheme, n, seed, &reference)
    });
    let mut mean_sq_errors = Vec::with_capacity(n_values.len());
    let mut stderrs = Vec::with_capacity(n_values.len());
    let mut sups = Vec::with_capacity(n_values.len());
    let mut excluded_cells = 0;
    let mut every_size_survived = true;
    for (i, _) in n_values.iter().enumerate() {
        let slice = &cells[i * seeds.len()..(i + 1) * seeds.len()];
        let (mean, stderr, excluded) = combine_cells(slice);
        excluded_cells += excluded;
        every_size_survived &= mean.is_finite();
        mean_sq_errors.push(mean);
        stderrs.push(stderr);
        sups.push(per_seed_sups(slice));
    }
    let fit = if every_size_survived {
        fit_if_positive(n_values, &mean_sq_errors)
    } else {
        None
    };
    let valid = every_size_survived && 10 * excluded_cells <= total && fit.is_some();
    Ok(ConvergenceReport {
        n_values: n_values.to_vec(),
        mean_sq_errors,
        stderrs,
        per_seed_sups: sups,
        fit,
        seeds: seeds.to_vec(),
        dt: scheme.dt,
        t_final: scheme.t_final,
        excluded_cells,
        valid,
    })
}

/// Measures the synchronous-coupling distance between interacting particles
/// and their i.i.d. mean-field copies across ensemble sizes. With the kernel
/// switched off the two systems run the identical arithmetic on the identical
/// noise, so every distance is exactly zero (and no slope exists).
pub fn coupling_study(
    spec: &ModelSpec,
    scheme: &SchemeConfig,
    n_values: &[usize],
    seeds: &[u64],
) -> Result<CouplingReport> {
    check_study_inputs(n_values, seeds)?;
    let (reference, _) = solve_meanfield_reference(spec, scheme.dt, scheme.t_final)?;
    let total = n_values.len() * seeds.len();
    let cells = parallel::indexed_tasks(total, |idx| {
        let n = n_values[idx / seeds.len()];
        let seed = seeds[idx % seeds.len()];
        coupling_cell(spec, scheme, n, seed, &reference)
    });
    let mean_cells: Vec<Result<Vec<f64>>> = cells
        .iter()
        .map(|c| c.as_ref().map(|(m, _)| m.clone()).map_err(Error::clone))
        .collect();
    let max_cells: Vec<Result<Vec<f64>>> = cells
        .iter()
        .map(|c| c.as_ref().map(|(_, x)| x.clone()).map_err(Error::clone))
        .collect();
    let mut mean_sq_distances = Vec::with_capacity(n_values.len());
    let mut max_sq_distances = Vec::with_capacity(n_values.len());
    let mut stderrs = Vec::with_capacity(n_values.len());
    let mut sups = Vec::with_capacity(n_values.len());
    let mut excluded_cells = 0;
    let mut every_size_survived = true;
    for (i, _) in n_values.iter().enumerate() {
        let slice = &mean_cells[i * seeds.len()..(i + 1) * seeds.len()];
        let (mean, stderr, excluded) = combine_cells(slice);
        let (max, _, _) = combine_cells(&max_cells[i * seeds.len()..(i + 1) * seeds.len()]);
        excluded_cells += excluded;
        every_size_survived &= mean.is_finite();
        mean_sq_distances.push(mean);
        max_sq_distances.push(max);
        stderrs.push(stderr);
        sups.push(per_seed_sups(slice));
    }
    let fit = if every_size_survived {
        fit_if_positive(n_values, &mean_sq_distances)
    } else {
        None
    };
    let valid = every_size_survived && 10 * excluded_cells <= total && fit.is_some();
    Ok(CouplingReport {
        mode: scheme.mode,
        n_values: n_values.to_vec(),
        mean_sq_distances,
        max_sq_distances,
        stderrs,
        per_seed_sups: sups,
        fit,
        seeds: seeds.to_vec(),
        dt: scheme.dt,
        t_final: scheme.t_final,
        excluded_cells,
        valid,
    })
}

/// Solves the exact N-body equation for each requested size and measures how
/// far its single-site marginal strays from the mean-field solution. The
/// product dimension cap keeps this to small N; the point is the trend, not
/// large sizes.
pub fn marginal_study(
    spec: &ModelSpec,
    n_values: &[usize],
    dt: f64,
    t_final: f64,
) -> Result<MarginalReport> {
    if n_values.is_empty() {
        return Err(Error::invalid("marginal study needs at least one size"));
    }
    let (reference, _) = solve_meanfield_reference(spec, dt, t_final)?;
    let mut discrepancies = Vec::with_capacity(n_values.len());
    let mut final_discrepancies = Vec::with_capacity(n_values.len());
    let mut curves = Vec::with_capacity(n_values.len());
    for &n in n_values {
        let joint = solve_nbody_reference(spec, n, dt, t_final)?;
        let mut curve = Vec::with_capacity(joint.len());
        for (k, rho) in joint.states.iter().enumerate() {
            let marginal = ops::partial_trace(rho, spec.dim(), n, 0)?;
            curve.push(ops::hs_norm(&(&marginal - &reference.states[k])));
        }
        discrepancies.push(curve.iter().copied().fold(0.0, f64::max));
        final_discrepancies.push(*curve.last().expect("series is never empty"));
        curves.push(curve);
    }
    Ok(MarginalReport {
        n_values: n_values.to_vec(),
        discrepancies,
        final_discrepancies,
        curves,
        dt,
        t_final,
    })
}

/// Sup over the grid of ||companion mean - m_ref|| for one i.i.d. ensemble:
/// the direct check that the scheme's per-particle mean follows the
/// mean-field flow.
pub fn iid_mean_sup_error(
    spec: &ModelSpec,
    scheme: &SchemeConfig,
    n_copies: usize,
    seed: u64,
) -> Result<f64> {
    let (reference, _) = solve_meanfield_reference(spec, scheme.dt, scheme.t_final)?;
    let steps = scheme.steps()?;
    let mut ensemble =
        ParticleEnsemble::iid_with_reference(spec, scheme, n_copies, seed, &reference)?;
    let mut sup = ops::hs_norm(&(&ensemble.empirical_density() - &reference.states[0]));
    for k in 1..=steps {
        ensemble.step()?;
        let gap = ops::hs_norm(&(&ensemble.empirical_density() - &reference.states[k]));
        sup = sup.max(gap);
    }
    Ok(sup)
}

/// Runs the i.i.d. companion at several step sizes and reports the final-time
/// error of its mean against the (fourth-order, effectively exact) reference,
/// averaged over seeds. `scheme.dt` is replaced by each entry of `dts` in
/// turn; each dt gets its own reference solve on its own grid.
pub fn weak_bias_study(
    spec: &ModelSpec,
    scheme: &SchemeConfig,
    dts: &[f64],
    n_copies: usize,
    seeds: &[u64],
) -> Result<WeakBiasReport> {
    if dts.is_empty() {
        return Err(Error::invalid("weak-bias study needs at least one dt"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("weak-bias study needs at least one seed"));
    }
    let mut final_errors = Vec::with_capacity(dts.len());
    let mut per_seed_errors = Vec::with_capacity(dts.len());
    for &dt in dts {
        let mut run = scheme.clone();
        run.dt = dt;
        let steps = run.steps()?;
        let (reference, _) = solve_meanfield_reference(spec, dt, run.t_final)?;
        let cells = parallel::indexed_tasks(seeds.len(), |i| -> Result<f64> {
            let mut ensemble =
                ParticleEnsemble::iid_with_reference(spec, &run, n_copies, seeds[i], &reference)?;
            for _ in 0..steps {
                ensemble.step()?;
            }
            Ok(ops::hs_norm(
                &(&ensemble.empirical_density() - reference.final_state()),
            ))
        });
        let errors = cells.into_iter().collect::<Result<Vec<f64>>>()?;
        final_errors.push(errors.iter().sum::<f64>() / errors.len() as f64);
        per_seed_errors.push(errors);
    }
    Ok(WeakBiasReport {
        dts: dts.to_vec(),
        final_errors,
        per_seed_errors,
        n_copies,
        seeds: seeds.to_vec(),
        t_final: scheme.t_final,
    })
}
