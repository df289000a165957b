//! Monte Carlo protocols: Γ-perturbation sampling, strategy comparison with
//! feasibility accounting, CRLB distributions under a fixed accuracy target,
//! and one-dimensional parameter sweeps written as CSV.
//!
//! Every realization draws from its own ChaCha stream `(seed, index)`, and
//! batches are reduced in index order, so reports do not depend on the number
//! of worker threads.

use std::fmt::{self, Write as _};

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::{self, ConicError};
use crate::feasible::{build_feasible_set, uniform_allocation_for_accuracy, uniform_allocation_for_budget, FeasibleSet, IlluminationMode};
use crate::fisher::{self, GammaMatrix};
use crate::minmax::{self, MinMaxError, MinMaxParams, PoseModel, UncertaintyModel, WorstCaseOptions};
use crate::scenario::Scenario;
use crate::solver::SolveStatus;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    MinMax(#[from] MinMaxError),
    #[error(transparent)]
    Fisher(#[from] fisher::FisherError),
    #[error("invalid experiment parameter: {0}")]
    Parameter(String),
}

impl From<crate::feasible::FeasibleError> for ExperimentError {
    fn from(e: crate::feasible::FeasibleError) -> Self {
        ExperimentError::Conic(e.into())
    }
}

/// Law used to place a draw inside the spectral-norm ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingLaw {
    /// Gaussian direction rescaled to spectral norm `δ·u`, `u ~ U(0, 1]`.
    #[default]
    GaussianUniformRadius,
}

/// Draws 3NL×3 perturbations with `‖Γ_Δ‖₂ ≤ δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSampler {
    pub delta: f64,
    pub num_leds: usize,
    pub seed: u64,
    pub law: SamplingLaw,
}

impl PerturbationSampler {
    pub fn new(delta: f64, num_leds: usize, seed: u64) -> Self {
        PerturbationSampler { delta, num_leds, seed, law: SamplingLaw::default() }
    }

    pub fn rng(&self, index: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        rng
    }

    /// Draw number `index`; identical for identical `(seed, index)`.
    pub fn draw(&self, index: u64, template: &GammaMatrix<f64>) -> GammaMatrix<f64> {
        let mut rng = self.rng(index);
        sample_gamma_perturbation(self, &mut rng, template.sync_mode)
    }
}

pub fn sample_gamma_perturbation(
    sampler: &PerturbationSampler,
    rng: &mut ChaCha20Rng,
    sync_mode: crate::scenario::SyncMode,
) -> GammaMatrix<f64> {
    let nl = sampler.num_leds;
    let data: Vec<f64> = (0..9 * nl).map(|_| rng.sample(StandardNormal)).collect();
    let dir = GammaMatrix::from_stacked(nl, &data, sync_mode);
    let sigma = dir.spectral_norm();
    let u = 1.0 - rng.random::<f64>();
    if sampler.delta == 0.0 || !(sigma > 0.0) {
        return dir.scale(0.0);
    }
    let mut out = dir.scale(sampler.delta * u / sigma);
    let n = out.spectral_norm();
    if n > sampler.delta {
        out = out.scale(sampler.delta / n);
    }
    debug_assert!(out.spectral_norm() <= sampler.delta);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Nominal optimum ignoring any uncertainty.
    Optimal,
    Robust,
    /// Nominal optimum scored under uncertainty.
    NonRobust,
    Uniform,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Optimal, Strategy::Robust, Strategy::NonRobust, Strategy::Uniform];
    pub const COMPARED: [Strategy; 3] = [Strategy::Robust, Strategy::NonRobust, Strategy::Uniform];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Optimal => "optimal",
            Strategy::Robust => "robust",
            Strategy::NonRobust => "non_robust",
            Strategy::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .iter()
            .copied()
            .find(|v| v.name() == s || v.name().replace('_', "-") == s)
            .ok_or_else(|| format!("unknown strategy '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub status: SolveStatus,
    /// m² (or W on the eps axis); `+∞` when not feasible.
    pub objective: f64,
    pub p: Vec<f64>,
}

impl Outcome {
    fn infeasible(status: SolveStatus) -> Self {
        Outcome { status, objective: f64::INFINITY, p: Vec::new() }
    }

    pub fn is_feasible(&self) -> bool {
        self.status == SolveStatus::Optimal && self.objective.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    /// Realization index; together with the master seed it fixes Γ_Δ.
    pub draw: u64,
    pub seed: u64,
    pub strategy: Strategy,
    pub status: SolveStatus,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: Strategy,
    /// Draws consumed until this strategy had its quota (or the cap hit).
    pub draws: u64,
    pub feasible: u64,
    pub feasibility_rate: f64,
    pub mean_objective: f64,
    /// Realizations with objective above the accuracy target (CDF protocol only).
    pub violations: Option<u64>,
    /// Sorted objectives with their empirical CDF levels.
    pub cdf: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ExperimentRow>,
    pub summaries: Vec<StrategySummary>,
    pub total_draws: u64,
    pub warning: Option<String>,
}

impl ExperimentReport {
    pub fn summary(&self, s: Strategy) -> Option<&StrategySummary> {
        self.summaries.iter().find(|v| v.strategy == s)
    }

    /// Per-realization CSV, rows in (strategy, draw) order.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("seed,draw,strategy,status,objective\n");
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{},{},{}", r.seed, r.draw, r.strategy, r.status, r.objective);
        }
        out
    }

    pub fn summary_csv(&self) -> String {
        let mut out = String::from("strategy,draws,feasible,feasibility_rate,mean_objective,violations\n");
        for s in &self.summaries {
            let v = s.violations.map(|v| v.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{},{},{}", s.strategy, s.draws, s.feasible, s.feasibility_rate, s.mean_objective, v);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloOptions {
    pub n_feasible: usize,
    pub seed: u64,
    pub max_draws: u64,
    pub batch: usize,
    pub mode: IlluminationMode,
}

impl Default for MonteCarloOptions {
    fn default() -> Self {
        MonteCarloOptions { n_feasible: 100, seed: 0, max_draws: 1_000_000, batch: 32, mode: IlluminationMode::Exact }
    }
}

/// Draws realizations in index-ordered batches until every strategy has
/// `n_feasible` feasible outcomes; `eval` maps (index, Γ_Δ) to one outcome per strategy.
fn monte_carlo<F>(
    strategies: &[Strategy],
    sampler: &PerturbationSampler,
    template: &GammaMatrix<f64>,
    opts: &MonteCarloOptions,
    eps: Option<f64>,
    eval: F,
) -> ExperimentReport
where
    F: Fn(&GammaMatrix<f64>, &[Strategy]) -> Vec<Outcome> + Sync,
{
    let ns = strategies.len();
    let mut rows: Vec<Vec<ExperimentRow>> = vec![Vec::new(); ns];
    let mut draws = vec![0u64; ns];
    let mut feasible = vec![0u64; ns];
    let mut next = 0u64;
    let done = |feasible: &[u64]| feasible.iter().all(|&f| f as usize >= opts.n_feasible);
    while !done(&feasible) && next < opts.max_draws && ns > 0 {
        let active: Vec<Strategy> =
            strategies.iter().zip(&feasible).filter(|(_, &f)| (f as usize) < opts.n_feasible).map(|(s, _)| *s).collect();
        let end = (next + opts.batch.max(1) as u64).min(opts.max_draws);
        let results: Vec<(u64, Vec<Outcome>)> = (next..end)
            .into_par_iter()
            .map(|idx| {
                let delta = sampler.draw(idx, template);
                (idx, eval(&delta, &active))
            })
            .collect();
        for (idx, outs) in results {
            for (s, o) in active.iter().zip(outs) {
                let k = strategies.iter().position(|v| v == s).expect("active strategy");
                if feasible[k] as usize >= opts.n_feasible {
                    continue;
                }
                draws[k] += 1;
                if o.is_feasible() {
                    feasible[k] += 1;
                    rows[k].push(ExperimentRow { draw: idx, seed: sampler.seed, strategy: *s, status: o.status, objective: o.objective });
                }
            }
        }
        next = end;
    }
    let warning = (!done(&feasible))
        .then(|| format!("draw cap {} reached before every strategy had {} feasible realizations", opts.max_draws, opts.n_feasible));
    let summaries = strategies
        .iter()
        .enumerate()
        .map(|(k, &s)| {
            let mut v: Vec<f64> = rows[k].iter().map(|r| r.objective).collect();
            v.sort_by(f64::total_cmp);
            let n = v.len();
            let mean = if n > 0 { v.iter().sum::<f64>() / n as f64 } else { f64::NAN };
            StrategySummary {
                strategy: s,
                draws: draws[k],
                feasible: feasible[k],
                feasibility_rate: if draws[k] > 0 { feasible[k] as f64 / draws[k] as f64 } else { f64::NAN },
                mean_objective: mean,
                violations: eps.map(|e| v.iter().filter(|&&x| x > e).count() as u64),
                cdf: v.iter().enumerate().map(|(i, &x)| (x, (i + 1) as f64 / n as f64)).collect(),
            }
        })
        .collect();
    ExperimentReport { rows: rows.into_iter().flatten().collect(), summaries, total_draws: next, warning }
}

fn check_quota(opts: &MonteCarloOptions) -> Result<(), ExperimentError> {
    if opts.n_feasible == 0 {
        return Err(ExperimentError::Parameter("n_feasible must be at least 1".into()));
    }
    Ok(())
}

/// Worst-case CRLB comparison under ‖Γ_Δ‖₂ ≤ δ with `Γ̂ = Γ + Γ_Δ`.
pub fn run_strategy_comparison(
    scenario: &Scenario<f64>,
    strategies: &[Strategy],
    delta: f64,
    opts: &MonteCarloOptions,
) -> Result<ExperimentReport, ExperimentError> {
    check_quota(opts)?;
    let gamma = fisher::assemble_gamma(scenario)?;
    let set = build_feasible_set(scenario, opts.mode)?;
    let total = set.total_power.ok_or_else(|| ExperimentError::Parameter("the comparison protocol needs a total power budget".into()))?;
    let uniform = uniform_allocation_for_budget(total, set.num_leds());
    let uniform_ok = set.is_feasible(&uniform).feasible;
    let sampler = PerturbationSampler::new(delta, gamma.num_leds(), opts.seed);
    let eval = |gd: &GammaMatrix<f64>, active: &[Strategy]| -> Vec<Outcome> {
        let gamma_hat = gamma.perturbed(gd);
        active.iter().map(|s| compare_one(*s, &set, &gamma_hat, delta, &uniform, uniform_ok)).collect()
    };
    Ok(monte_carlo(strategies, &sampler, &gamma, opts, None, eval))
}

fn score_fixed(p: &[f64], gamma_hat: &GammaMatrix<f64>, delta: f64) -> Outcome {
    if delta == 0.0 {
        return match fisher::crlb_value(gamma_hat, p) {
            Ok(v) => Outcome { status: SolveStatus::Optimal, objective: v, p: p.to_vec() },
            Err(_) => Outcome::infeasible(SolveStatus::Infeasible),
        };
    }
    match conic::worst_case_crlb_fixed_p(p, gamma_hat, delta) {
        Ok(r) => Outcome { status: r.status, objective: r.objective, p: p.to_vec() },
        Err(_) => Outcome::infeasible(SolveStatus::NumericalFailure),
    }
}

fn compare_one(
    s: Strategy,
    set: &FeasibleSet<f64>,
    gamma_hat: &GammaMatrix<f64>,
    delta: f64,
    uniform: &[f64],
    uniform_ok: bool,
) -> Outcome {
    let backend = crate::solver::BarrierSolver::default();
    let solve = |problem: conic::AllocationProblem| conic::solve_allocation(&problem, set, gamma_hat, &backend);
    match s {
        Strategy::Robust => match solve(conic::AllocationProblem::RobustGamma { delta }) {
            Ok(r) => Outcome { status: r.status, objective: r.objective, p: r.p_star },
            Err(_) => Outcome::infeasible(SolveStatus::NumericalFailure),
        },
        Strategy::Optimal | Strategy::NonRobust => match solve(conic::AllocationProblem::NominalCrlb) {
            Ok(r) if r.is_optimal() => {
                if s == Strategy::Optimal {
                    Outcome { status: r.status, objective: r.objective, p: r.p_star }
                } else {
                    score_fixed(&r.p_star, gamma_hat, delta)
                }
            }
            Ok(r) => Outcome::infeasible(r.status),
            Err(_) => Outcome::infeasible(SolveStatus::NumericalFailure),
        },
        Strategy::Uniform => {
            if uniform_ok {
                score_fixed(uniform, gamma_hat, delta)
            } else {
                Outcome::infeasible(SolveStatus::Infeasible)
            }
        }
    }
}

/// Realized CRLB under the true Γ of allocations designed for accuracy `eps` on `Γ̂ = Γ + Γ_Δ`.
pub fn run_cdf_experiment(
    scenario: &Scenario<f64>,
    strategies: &[Strategy],
    eps: f64,
    delta: f64,
    opts: &MonteCarloOptions,
) -> Result<ExperimentReport, ExperimentError> {
    check_quota(opts)?;
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ExperimentError::Parameter(format!("eps must be positive (got {eps})")));
    }
    let gamma = fisher::assemble_gamma(scenario)?;
    let set = build_feasible_set(scenario, opts.mode)?.without_total();
    let sampler = PerturbationSampler::new(delta, gamma.num_leds(), opts.seed);
    let backend = crate::solver::BarrierSolver::default();
    let eval = |gd: &GammaMatrix<f64>, active: &[Strategy]| -> Vec<Outcome> {
        let gamma_hat = gamma.perturbed(gd);
        active
            .iter()
            .map(|s| {
                let designed: Result<(SolveStatus, Vec<f64>), ConicError> = match s {
                    Strategy::Robust => {
                        conic::solve_allocation(&conic::AllocationProblem::RobustMinPower { delta, eps }, &set, &gamma_hat, &backend)
                            .map(|r| (r.status, r.p_star))
                    }
                    Strategy::Optimal | Strategy::NonRobust => {
                        conic::solve_allocation(&conic::AllocationProblem::MinPower { eps }, &set, &gamma_hat, &backend)
                            .map(|r| (r.status, r.p_star))
                    }
                    Strategy::Uniform => uniform_allocation_for_accuracy(&gamma_hat, eps)
                        .map_err(ConicError::from)
                        .map(|p| (if set.is_feasible(&p).feasible { SolveStatus::Optimal } else { SolveStatus::Infeasible }, p)),
                };
                match designed {
                    Ok((SolveStatus::Optimal, p)) => match fisher::crlb_value(&gamma, &p) {
                        Ok(v) => Outcome { status: SolveStatus::Optimal, objective: v, p },
                        Err(_) => Outcome { status: SolveStatus::Optimal, objective: f64::INFINITY, p },
                    },
                    Ok((status, _)) => Outcome::infeasible(status),
                    Err(_) => Outcome::infeasible(SolveStatus::NumericalFailure),
                }
            })
            .collect()
    };
    Ok(monte_carlo(strategies, &sampler, &gamma, opts, Some(eps), eval))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    TotalPower,
    /// Absolute Γ radius δ.
    Delta,
    DeltaL,
    /// Polar half-width in degrees.
    DeltaTheta,
    /// Accuracy target √ε in m.
    Eps,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::TotalPower => "total_power",
            SweepAxis::Delta => "delta",
            SweepAxis::DeltaL => "delta_l",
            SweepAxis::DeltaTheta => "delta_theta",
            SweepAxis::Eps => "sqrt_eps",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let all = [SweepAxis::TotalPower, SweepAxis::Delta, SweepAxis::DeltaL, SweepAxis::DeltaTheta, SweepAxis::Eps];
        let s = s.replace('-', "_");
        all.into_iter().find(|a| a.name() == s || (s == "eps" && *a == SweepAxis::Eps)).ok_or_else(|| format!("unknown sweep axis '{s}'"))
    }
}

/// Values held fixed while one axis varies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepBase {
    pub total_power: Option<f64>,
    pub delta: f64,
    pub delta_l: f64,
    /// Degrees.
    pub delta_theta: f64,
    /// Degrees.
    pub delta_phi: f64,
    /// √ε in m.
    pub sqrt_eps: f64,
    pub mode: IlluminationMode,
}

impl Default for SweepBase {
    fn default() -> Self {
        SweepBase {
            total_power: None,
            delta: 0.0,
            delta_l: 0.0,
            delta_theta: 0.0,
            delta_phi: 0.0,
            sqrt_eps: 0.1,
            mode: IlluminationMode::Exact,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub axis: SweepAxis,
    pub value: f64,
    pub strategy: Strategy,
    pub outcome: Outcome,
    pub message: Option<String>,
}

/// Evaluates every strategy at every grid value. Objectives are CRLBs in m²
/// except on the eps axis, where they are total electrical power in W.
pub fn sweep(scenario: &Scenario<f64>, axis: SweepAxis, grid: &[f64], strategies: &[Strategy], base: &SweepBase) -> Vec<SweepRow> {
    let jobs: Vec<(f64, Strategy)> = grid.iter().flat_map(|&v| strategies.iter().map(move |&s| (v, s))).collect();
    jobs.par_iter()
        .map(|&(value, strategy)| {
            let (outcome, message) = match sweep_point(scenario, axis, value, strategy, base) {
                Ok(o) => (o, None),
                Err(e) => (Outcome::infeasible(SolveStatus::NumericalFailure), Some(e.to_string())),
            };
            SweepRow { axis, value, strategy, outcome, message }
        })
        .collect()
}

fn at_point(base: &SweepBase, axis: SweepAxis, value: f64) -> SweepBase {
    let mut b = *base;
    match axis {
        SweepAxis::TotalPower => b.total_power = Some(value),
        SweepAxis::Delta => b.delta = value,
        SweepAxis::DeltaL => b.delta_l = value,
        SweepAxis::DeltaTheta => b.delta_theta = value,
        SweepAxis::Eps => b.sqrt_eps = value,
    }
    b
}

fn sweep_point(
    scenario: &Scenario<f64>,
    axis: SweepAxis,
    value: f64,
    strategy: Strategy,
    base: &SweepBase,
) -> Result<Outcome, ExperimentError> {
    let b = at_point(base, axis, value);
    let gamma = fisher::assemble_gamma(scenario)?;
    let mut set = build_feasible_set(scenario, b.mode)?;
    if let Some(t) = b.total_power {
        set = set.with_total(t);
    }
    let backend = crate::solver::BarrierSolver::default();
    let from = |r: conic::AllocationResult| Outcome { status: r.status, objective: r.objective, p: r.p_star };

    if axis == SweepAxis::Eps {
        let eps = b.sqrt_eps * b.sqrt_eps;
        let set = set.without_total();
        return Ok(match strategy {
            Strategy::Optimal | Strategy::NonRobust => {
                from(conic::solve_allocation(&conic::AllocationProblem::MinPower { eps }, &set, &gamma, &backend)?)
            }
            Strategy::Robust => {
                from(conic::solve_allocation(&conic::AllocationProblem::RobustMinPower { delta: b.delta, eps }, &set, &gamma, &backend)?)
            }
            Strategy::Uniform => uniform_min_power(&set, &gamma, eps)?,
        });
    }

    let nominal = || -> Result<conic::AllocationResult, ExperimentError> {
        Ok(conic::solve_allocation(&conic::AllocationProblem::NominalCrlb, &set, &gamma, &backend)?)
    };
    let uniform = || -> Option<Vec<f64>> {
        let p = uniform_allocation_for_budget(set.total_power?, set.num_leds());
        set.is_feasible(&p).feasible.then_some(p)
    };
    let pose_model = match axis {
        SweepAxis::DeltaL => Some(UncertaintyModel::LocationBall { radius: b.delta_l }),
        SweepAxis::DeltaTheta => {
            Some(UncertaintyModel::OrientationBox { delta_theta: b.delta_theta.to_radians(), delta_phi: b.delta_phi.to_radians() })
        }
        _ => None,
    };
    let score = |p: &[f64]| -> Result<Outcome, ExperimentError> {
        match pose_model {
            Some(m) => {
                let pose = PoseModel::new(scenario, m)?;
                let wc = minmax::worst_case_eval(p, &pose, &WorstCaseOptions::for_model(&m));
                let status = if wc.value.is_finite() { SolveStatus::Optimal } else { SolveStatus::Infeasible };
                Ok(Outcome { status, objective: wc.value, p: p.to_vec() })
            }
            None => Ok(score_fixed(p, &gamma, b.delta)),
        }
    };
    Ok(match strategy {
        Strategy::Optimal => from(nominal()?),
        Strategy::NonRobust => {
            let r = nominal()?;
            if r.is_optimal() {
                score(&r.p_star)?
            } else {
                Outcome::infeasible(r.status)
            }
        }
        Strategy::Uniform => match uniform() {
            Some(p) => score(&p)?,
            None => Outcome::infeasible(SolveStatus::Infeasible),
        },
        Strategy::Robust => match pose_model {
            Some(m) => {
                let mut sc = scenario.clone();
                sc.power.p_total = set.total_power;
                let r = minmax::solve_minmax(&sc, m, b.mode, &MinMaxParams::for_model(&m))?;
                from(r.allocation)
            }
            None => from(conic::solve_allocation(&conic::AllocationProblem::RobustGamma { delta: b.delta }, &set, &gamma, &backend)?),
        },
    })
}

/// Uniform allocation meeting accuracy `eps`: the larger of the accuracy level
/// `trace(((I₃⊗1)ᵀΓ)⁻¹)/ε` and the smallest illumination-feasible level.
pub fn uniform_min_power(set: &FeasibleSet<f64>, gamma: &GammaMatrix<f64>, eps: f64) -> Result<Outcome, ExperimentError> {
    let acc = uniform_allocation_for_accuracy(gamma, eps)?;
    let level = acc[0].max(set.min_uniform_level());
    let p = vec![level; set.num_leds()];
    Ok(if set.is_feasible(&p).feasible {
        Outcome { status: SolveStatus::Optimal, objective: level * p.len() as f64, p }
    } else {
        Outcome::infeasible(SolveStatus::Infeasible)
    })
}

/// CSV with one row per (value, strategy); no timing columns, so output is reproducible.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("axis,value,strategy,status,objective,p\n");
    for r in rows {
        let p: Vec<String> = r.outcome.p.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(out, "{},{},{},{},{},{}", r.axis.name(), r.value, r.strategy, r.outcome.status, r.outcome.objective, p.join(";"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::SyncMode;

    fn template(nl: usize) -> GammaMatrix<f64> {
        GammaMatrix::from_stacked(nl, &vec![0.0; 9 * nl], SyncMode::Asynchronous)
    }

    #[test]
    fn zero_delta_gives_zero() {
        let s = PerturbationSampler::new(0.0, 4, 7);
        assert_eq!(s.draw(3, &template(4)).spectral_norm(), 0.0);
    }

    #[test]
    fn draws_are_reproducible_and_bounded() {
        let s = PerturbationSampler::new(0.2, 4, 11);
        let t = template(4);
        let a = s.draw(5, &t);
        assert_eq!(a, s.draw(5, &t));
        assert_ne!(a, s.draw(6, &t));
        for i in 0..2000 {
            let n = s.draw(i, &t).spectral_norm();
            assert!(n <= 0.2 && n > 0.0);
        }
    }

    #[test]
    fn strategy_and_axis_names_parse() {
        for s in Strategy::ALL {
            assert_eq!(s.name().parse::<Strategy>().unwrap(), s);
        }
        assert_eq!("delta-l".parse::<SweepAxis>().unwrap(), SweepAxis::DeltaL);
        assert_eq!("eps".parse::<SweepAxis>().unwrap(), SweepAxis::Eps);
    }

    #[test]
    fn empty_strategy_list_gives_empty_table() {
        let s = crate::scenario::reference_scenario();
        let rows = sweep(&s, SweepAxis::TotalPower, &[1600.0], &[], &SweepBase::default());
        assert!(rows.is_empty());
        assert_eq!(sweep_csv(&rows).lines().count(), 1);
    }
}
