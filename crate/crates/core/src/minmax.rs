//! Min-max allocation under receiver location or orientation uncertainty by
//! iterative entropic regularization, and a multi-start worst-case evaluator.
//!
//! Inside the smoothing every CRLB is divided by `c_u`, the nominal CRLB of the
//! all-`a` allocation (`a` the mean upper power bound), so that `ρ·f` is of unit
//! order. Values crossing the public API are in m².

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conic::{add_power_constraints, power_start, AllocationResult, Aux, ConicError, Provenance, Scaling};
use crate::feasible::{build_feasible_set, FeasibleSet, IlluminationMode};
use crate::fisher::{self, FisherError, FisherModel, GammaMatrix};
use crate::geometry::Vec3;
use crate::scenario::{angles_from_orientation, orientation_from_angles, Scenario};
use crate::solver::{BarrierSolver, ConicBackend, ConicProblem, SmoothObjective, SolveStatus, SolverOptions};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MinMaxError {
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Fisher(#[from] FisherError),
    #[error("invalid uncertainty model: {0}")]
    Model(String),
    #[error("invalid algorithm parameter: {0}")]
    Parameter(String),
}

impl From<crate::feasible::FeasibleError> for MinMaxError {
    fn from(e: crate::feasible::FeasibleError) -> Self {
        MinMaxError::Conic(e.into())
    }
}

/// Uncertainty set `E` for the receiver pose error `e`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum UncertaintyModel {
    /// `‖e‖ ≤ radius` (m); the true location is `l̂ − e`.
    LocationBall { radius: f64 },
    /// `|e_θ| ≤ delta_theta`, `|e_φ| ≤ delta_phi` (rad); the true angles are `(θ̂ − e_θ, φ̂ − e_φ)`.
    OrientationBox { delta_theta: f64, delta_phi: f64 },
}

impl UncertaintyModel {
    pub fn dim(&self) -> usize {
        match self {
            UncertaintyModel::LocationBall { .. } => 3,
            UncertaintyModel::OrientationBox { .. } => 2,
        }
    }

    /// Per-coordinate extent, used to size simplices and the dedup tolerance.
    fn extent(&self) -> Vec<f64> {
        match *self {
            UncertaintyModel::LocationBall { radius } => vec![radius; 3],
            UncertaintyModel::OrientationBox { delta_theta, delta_phi } => vec![delta_theta, delta_phi],
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.extent().iter().all(|&v| v == 0.0)
    }

    pub fn contains(&self, e: &[f64]) -> bool {
        let slack = 1e-12;
        match *self {
            UncertaintyModel::LocationBall { radius } => norm(e) <= radius * (1.0 + slack) + slack,
            UncertaintyModel::OrientationBox { delta_theta, delta_phi } => {
                e[0].abs() <= delta_theta * (1.0 + slack) + slack && e[1].abs() <= delta_phi * (1.0 + slack) + slack
            }
        }
    }

    /// Euclidean projection onto `E`.
    pub fn project(&self, e: &mut [f64]) {
        match *self {
            UncertaintyModel::LocationBall { radius } => {
                let n = norm(e);
                if n > radius {
                    let s = if n > 0.0 { radius / n } else { 0.0 };
                    e.iter_mut().for_each(|v| *v *= s);
                }
            }
            UncertaintyModel::OrientationBox { delta_theta, delta_phi } => {
                e[0] = e[0].clamp(-delta_theta, delta_theta);
                e[1] = e[1].clamp(-delta_phi, delta_phi);
            }
        }
    }

    fn validate(&self, polar: f64) -> Result<(), MinMaxError> {
        for v in self.extent() {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(MinMaxError::Model(format!("radii must be finite and non-negative (got {v})")));
            }
        }
        if let UncertaintyModel::OrientationBox { delta_theta, .. } = *self {
            if !(polar - delta_theta > 0.0 && polar + delta_theta < std::f64::consts::PI) {
                return Err(MinMaxError::Model(format!("polar angle {polar} ± {delta_theta} rad leaves (0, π)")));
            }
        }
        Ok(())
    }
}

fn norm(e: &[f64]) -> f64 {
    e.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Γ as a function of the pose error around the scenario's nominal receiver.
#[derive(Debug, Clone)]
pub struct PoseModel {
    fisher: FisherModel<f64>,
    location: Vec3<f64>,
    polar: f64,
    azimuth: f64,
    orientation: Vec3<f64>,
    pub model: UncertaintyModel,
}

impl PoseModel {
    pub fn new(scenario: &Scenario<f64>, model: UncertaintyModel) -> Result<Self, MinMaxError> {
        let fisher = FisherModel::new(scenario)?;
        let r = &scenario.receiver;
        let (polar, azimuth) = angles_from_orientation(r.orientation);
        model.validate(polar)?;
        Ok(PoseModel { fisher, location: r.location, polar, azimuth, orientation: r.orientation, model })
    }

    /// Γ at the perturbed pose; `None` when the channel is undefined there.
    pub fn gamma(&self, e: &[f64]) -> Option<GammaMatrix<f64>> {
        let (loc, orient) = match self.model {
            UncertaintyModel::LocationBall { .. } => (self.location - Vec3::new(e[0], e[1], e[2]), self.orientation),
            UncertaintyModel::OrientationBox { .. } => (self.location, orientation_from_angles(self.polar - e[0], self.azimuth - e[1])),
        };
        self.fisher.gamma_at(loc, orient).ok()
    }

    /// f(p, e) in m²; `+∞` when the FIM is singular at the perturbed pose.
    pub fn objective_at(&self, p: &[f64], e: &[f64]) -> f64 {
        self.gamma(e).and_then(|g| fisher::crlb_value(&g, p).ok()).unwrap_or(f64::INFINITY)
    }
}

/// `(1/ρ)·log Σ exp(ρ·v)` evaluated with a max shift.
pub fn log_sum_exp(values: &[f64], rho: f64) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    let s: f64 = values.iter().map(|&v| (rho * (v - m)).exp()).sum();
    m + s.ln() / rho
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub points: Vec<Vec<f64>>,
    /// ρ, applied to CRLBs divided by the uniform reference CRLB.
    pub p_reg: f64,
    pub iteration: usize,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Index of a stored point within `tol` (max-norm) of `e`.
    pub fn find(&self, e: &[f64], tol: f64) -> Option<usize> {
        self.points.iter().position(|q| q.iter().zip(e).all(|(a, b)| (a - b).abs() <= tol))
    }
}

/// Reference CRLB `c_u` used to normalize values inside the smoothing.
pub fn reference_crlb(set: &FeasibleSet<f64>, gamma: &GammaMatrix<f64>) -> Result<f64, ConicError> {
    let sc = Scaling::new(set, gamma)?;
    Ok(sc.beta / sc.a)
}

/// Entropic smoothing of `max_{e ∈ candidates} f(p, e)` in m².
/// With `c_u` the reference CRLB, `max f ≤ result ≤ max f + c_u·log(n)/ρ`.
pub fn smoothed_objective(pose: &PoseModel, p: &[f64], candidates: &CandidateSet, c_u: f64) -> f64 {
    let v: Vec<f64> = candidates.points.iter().map(|e| pose.objective_at(p, e) / c_u).collect();
    c_u * log_sum_exp(&v, candidates.p_reg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseOptions {
    pub n_grid: usize,
    pub n_starts: usize,
}

impl WorstCaseOptions {
    pub fn for_model(model: &UncertaintyModel) -> Self {
        let n_grid = match model {
            UncertaintyModel::LocationBall { .. } => 2000,
            UncertaintyModel::OrientationBox { .. } => 441,
        };
        WorstCaseOptions { n_grid, n_starts: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    /// max_e f(p, e) in m².
    pub value: f64,
    pub argmax: Vec<f64>,
    pub evaluations: usize,
}

/// Coarse grid over `E`. Ball: the centre plus Fibonacci spheres on equally spaced
/// radii, points per shell ∝ r². Box: a uniform lattice including the corners.
pub fn uncertainty_grid(model: &UncertaintyModel, n_grid: usize) -> Vec<Vec<f64>> {
    let n_grid = n_grid.max(1);
    match *model {
        UncertaintyModel::LocationBall { radius } => {
            let mut pts = vec![vec![0.0; 3]];
            if radius == 0.0 || n_grid == 1 {
                return pts;
            }
            let rest = n_grid - 1;
            let shells = ((n_grid as f64 / 4.0).cbrt().round() as usize).clamp(1, rest);
            let weight: f64 = (1..=shells).map(|k| (k * k) as f64).sum();
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            let mut used = 0;
            for k in 1..=shells {
                let count = if k == shells { rest - used } else { (((rest as f64) * (k * k) as f64 / weight).round() as usize).max(1) };
                used += count;
                let r = radius * k as f64 / shells as f64;
                for j in 0..count {
                    let z = 1.0 - (2.0 * j as f64 + 1.0) / count as f64;
                    let rho = (1.0 - z * z).max(0.0).sqrt();
                    let th = golden * j as f64;
                    pts.push(vec![r * rho * th.cos(), r * rho * th.sin(), r * z]);
                }
            }
            pts
        }
        UncertaintyModel::OrientationBox { delta_theta, delta_phi } => {
            let side = ((n_grid as f64).sqrt().round() as usize).max(1);
            let axis = |d: f64| -> Vec<f64> {
                if d == 0.0 || side == 1 {
                    vec![0.0]
                } else {
                    (0..side).map(|j| -d + 2.0 * d * j as f64 / (side - 1) as f64).collect()
                }
            };
            let (ta, pa) = (axis(delta_theta), axis(delta_phi));
            let mut pts = Vec::with_capacity(ta.len() * pa.len());
            for &t in &ta {
                for &f in &pa {
                    pts.push(vec![t, f]);
                }
            }
            pts
        }
    }
}

/// Projected Nelder–Mead ascent of `f` from `x0`; returns the best point and value.
fn nelder_mead_max(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    model: &UncertaintyModel,
    x0: &[f64],
    f0: f64,
    evals: &mut usize,
) -> (Vec<f64>, f64) {
    let n = x0.len();
    let ext = model.extent();
    let scale = ext.iter().copied().fold(0.0, f64::max);
    // Minimize g = −f over projected points.
    let eval = |x: &mut Vec<f64>, evals: &mut usize| -> f64 {
        model.project(x);
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            -v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), -f0)];
    for j in 0..n {
        let mut x = x0.to_vec();
        let step = 0.1 * ext[j];
        x[j] += if x[j] > 0.0 { -step } else { step };
        let v = eval(&mut x, evals);
        simplex.push((x, v));
    }
    let max_iter = 300 * n;
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if best == f64::NEG_INFINITY {
            break;
        }
        let diam = simplex
            .iter()
            .skip(1)
            .map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if (worst - best).abs() <= 1e-13 * best.abs() && diam <= 1e-7 * scale || diam <= 1e-10 * scale {
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|i| centroid[i] + t * (simplex[n].0[i] - centroid[i])).collect() };
        let mut xr = along(-1.0);
        let fr = eval(&mut xr, evals);
        if fr < simplex[0].1 {
            let mut xe = along(-2.0);
            let fe = eval(&mut xe, evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        let mut xc = if fr < worst { along(-0.5) } else { along(0.5) };
        let fc = eval(&mut xc, evals);
        if fc < worst.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        let x_best = simplex[0].0.clone();
        for s in simplex.iter_mut().skip(1) {
            let mut x: Vec<f64> = s.0.iter().zip(&x_best).map(|(a, b)| b + 0.5 * (a - b)).collect();
            let v = eval(&mut x, evals);
            *s = (x, v);
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, v) = simplex.swap_remove(0);
    (x, -v)
}

/// Multi-start maximization of f(p, ·) over `E`: grid, then simplex ascent from
/// the best `n_starts` grid points. Ties go to the lowest grid index.
pub fn worst_case_eval(p: &[f64], pose: &PoseModel, opts: &WorstCaseOptions) -> WorstCase {
    let grid = uncertainty_grid(&pose.model, opts.n_grid);
    let f = |e: &[f64]| pose.objective_at(p, e);
    let values: Vec<f64> = grid.par_iter().map(|e| f(e)).collect();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    let mut evaluations = grid.len();
    let top = order[0];
    if values[top] == f64::INFINITY || pose.model.is_degenerate() || opts.n_starts == 0 {
        return WorstCase { value: values[top], argmax: grid[top].clone(), evaluations };
    }
    let starts: Vec<usize> = order.iter().copied().take(opts.n_starts).collect();
    let refined: Vec<(Vec<f64>, f64, usize)> = starts
        .par_iter()
        .map(|&i| {
            let mut ev = 0;
            let (x, v) = nelder_mead_max(&f, &pose.model, &grid[i], values[i], &mut ev);
            (x, v, ev)
        })
        .collect();
    let mut best = (grid[top].clone(), values[top]);
    for (x, v, ev) in refined {
        evaluations += ev;
        if v > best.1 {
            best = (x, v);
        }
    }
    WorstCase { value: best.1, argmax: best.0, evaluations }
}

/// Parameters of the iterative entropic regularization loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxParams {
    /// Initial ρ on normalized CRLBs.
    pub rho0: f64,
    /// Outer solve k uses tolerance `eps^k`.
    pub eps: f64,
    /// ς: stop once `eps^k + log(n)/ρ ≤ ς`.
    pub varsigma: f64,
    pub worst_case: WorstCaseOptions,
    pub max_iter: usize,
}

pub const DEFAULT_MAX_ITER: usize = 200;
pub const DEFAULT_VARSIGMA: f64 = 1e-3;

impl MinMaxParams {
    /// Defaults: ε = 0.5, ς = 1e-3, cap 200, and ρ₀ = log(cap + 1)/ς so that the
    /// smoothing gap `log(n)/ρ` stays below ς for any candidate count the cap allows.
    pub fn for_model(model: &UncertaintyModel) -> Self {
        MinMaxParams {
            rho0: ((DEFAULT_MAX_ITER + 1) as f64).ln() / DEFAULT_VARSIGMA,
            eps: 0.5,
            varsigma: DEFAULT_VARSIGMA,
            worst_case: WorstCaseOptions::for_model(model),
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    fn validate(&self) -> Result<(), MinMaxError> {
        if !(self.rho0 > 0.0 && self.rho0.is_finite()) {
            return Err(MinMaxError::Parameter(format!("rho0 must be positive (got {})", self.rho0)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(MinMaxError::Parameter(format!("eps must lie in (0, 1) (got {})", self.eps)));
        }
        if !(self.varsigma > 0.0) {
            return Err(MinMaxError::Parameter(format!("varsigma must be positive (got {})", self.varsigma)));
        }
        if self.worst_case.n_grid == 0 || self.max_iter == 0 {
            return Err(MinMaxError::Parameter("n_grid and max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub n: usize,
    pub rho: f64,
    /// f^{(n,ρ)}(p*_k) in m².
    pub smoothed: f64,
    /// max_e f(p*_k, e) in m².
    pub inner_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinMaxResult {
    /// `objective` is the worst-case CRLB of `p_star`.
    pub allocation: AllocationResult,
    pub candidates: CandidateSet,
    pub trace: Vec<TraceRow>,
    pub argmax: Vec<f64>,
    pub converged: bool,
    pub warning: Option<String>,
}

/// Log-sum-exp of normalized CRLBs over a fixed candidate set, in p̃ coordinates.
struct EntropicObjective {
    gammas: Vec<GammaMatrix<f64>>,
    rho: f64,
    nl: usize,
}

impl SmoothObjective for EntropicObjective {
    fn value(&self, x: &[f64]) -> Option<f64> {
        let p = &x[..self.nl];
        let v: Vec<f64> = self.gammas.iter().map(|g| fisher::crlb_value(g, p).ok()).collect::<Option<_>>()?;
        Some(log_sum_exp(&v, self.rho))
    }

    fn derivatives(&self, x: &[f64]) -> Option<(f64, Vec<f64>, Vec<f64>)> {
        let nl = self.nl;
        let p = &x[..nl];
        let d: Vec<_> = self.gammas.iter().map(|g| fisher::crlb_derivatives(g, p).ok()).collect::<Option<_>>()?;
        let m = d.iter().map(|c| c.value).fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = d.iter().map(|c| (self.rho * (c.value - m)).exp()).collect();
        let sw: f64 = w.iter().sum();
        let value = m + sw.ln() / self.rho;
        let mut grad = vec![0.0; nl];
        let mut hess = vec![0.0; nl * nl];
        for (c, wk) in d.iter().zip(&w) {
            let wk = wk / sw;
            for i in 0..nl {
                grad[i] += wk * c.gradient[i];
                for j in 0..nl {
                    hess[i * nl + j] += wk * (c.hessian[i * nl + j] + self.rho * c.gradient[i] * c.gradient[j]);
                }
            }
        }
        for i in 0..nl {
            for j in 0..nl {
                hess[i * nl + j] -= self.rho * grad[i] * grad[j];
            }
        }
        Some((value, grad, hess))
    }
}

struct OuterSolution {
    status: SolveStatus,
    p: Vec<f64>,
    smoothed: f64,
    gap: f64,
    steps: usize,
}

fn solve_outer(
    set: &FeasibleSet<f64>,
    sc: &Scaling,
    pose: &PoseModel,
    candidates: &CandidateSet,
    tol: f64,
) -> Result<OuterSolution, MinMaxError> {
    let gammas = candidates
        .points
        .iter()
        .map(|e| pose.gamma(e).map(|g| g.scale(sc.beta)))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| MinMaxError::Model("channel undefined at a candidate pose".into()))?;
    let mut prob = ConicProblem::new(0);
    let vars = add_power_constraints(&mut prob, set, sc);
    prob.smooth = Some(Arc::new(EntropicObjective { gammas, rho: candidates.p_reg, nl: set.num_leds() }));
    let mut x = vec![0.0; prob.num_vars];
    power_start(set, sc, &vars, &mut x);
    let opts = SolverOptions::default();
    let backend = BarrierSolver::new(SolverOptions { gap_tol: tol.min(opts.gap_tol), ..opts });
    let out = backend.solve(&prob, Some(&x));
    let p: Vec<f64> = vars.p.iter().map(|&v| out.x[v] * sc.a).collect();
    Ok(OuterSolution { status: out.status, p, smoothed: sc.crlb_out(out.objective), gap: sc.crlb_out(out.gap), steps: out.newton_steps })
}

/// (p, worst case, argmax, smoothed value, gap) of the best iterate so far.
type BestIterate = (Vec<f64>, f64, Vec<f64>, f64, f64);

/// Iterative entropic regularization for `min_{p∈P} max_{e∈E} f(p, e)`.
pub fn solve_minmax(
    scenario: &Scenario<f64>,
    model: UncertaintyModel,
    mode: IlluminationMode,
    params: &MinMaxParams,
) -> Result<MinMaxResult, MinMaxError> {
    params.validate()?;
    let pose = PoseModel::new(scenario, model)?;
    let set = build_feasible_set(scenario, mode)?;
    if set.total_power.is_none() {
        return Err(ConicError::Parameter("CRLB minimization needs a total power budget".into()).into());
    }
    let gamma_hat =
        pose.gamma(&vec![0.0; model.dim()]).ok_or_else(|| MinMaxError::Model("channel undefined at the nominal pose".into()))?;
    let sc = Scaling::new(&set, &gamma_hat)?;
    let c_u = sc.beta / sc.a;
    let provenance = match model {
        UncertaintyModel::LocationBall { .. } => Provenance::RobustLocation,
        UncertaintyModel::OrientationBox { .. } => Provenance::RobustOrientation,
    };
    let backend_id = BarrierSolver::default().id().to_string();
    let dedup = 1e-9;

    let mut cand = CandidateSet { points: vec![vec![0.0; model.dim()]], p_reg: params.rho0, iteration: 1 };
    let mut trace = Vec::new();
    let mut steps = 0;
    let mut best: Option<BestIterate> = None;
    let mut cached: Option<(usize, f64, OuterSolution)> = None;
    let mut converged = false;
    let mut warning = None;

    loop {
        let k = cand.iteration;
        let tol = params.eps.powi(k as i32);
        let reuse =
            matches!(&cached, Some((n, rho, s)) if *n == cand.len() && *rho == cand.p_reg && s.gap <= tol * (c_u + s.smoothed.abs()));
        if !reuse {
            let s = solve_outer(&set, &sc, &pose, &cand, tol)?;
            steps += s.steps;
            cached = Some((cand.len(), cand.p_reg, s));
        }
        let outer = &cached.as_ref().expect("outer solution").2;
        match outer.status {
            SolveStatus::Optimal | SolveStatus::NumericalFailure => {}
            status => {
                return Ok(MinMaxResult {
                    allocation: AllocationResult {
                        provenance,
                        mode,
                        status,
                        p_star: Vec::new(),
                        objective: f64::INFINITY,
                        duality_gap: f64::INFINITY,
                        aux: Aux::default(),
                        backend: backend_id,
                        newton_steps: steps,
                    },
                    candidates: cand,
                    trace,
                    argmax: Vec::new(),
                    converged: false,
                    warning: None,
                })
            }
        }
        let p = outer.p.clone();
        let smoothed = smoothed_objective(&pose, &p, &cand, c_u);
        let wc = worst_case_eval(&p, &pose, &params.worst_case);
        trace.push(TraceRow { k, n: cand.len(), rho: cand.p_reg, smoothed, inner_max: wc.value });
        if best.as_ref().is_none_or(|b| wc.value < b.1) {
            best = Some((p.clone(), wc.value, wc.argmax.clone(), smoothed, outer.gap));
        }
        if !wc.value.is_finite() {
            warning = Some("worst-case CRLB is unbounded over the uncertainty set".into());
            break;
        }

        cand.iteration += 1;
        let tol_next = params.eps.powi(cand.iteration as i32);
        let exceeds = wc.value > smoothed;
        if exceeds && cand.find(&wc.argmax, dedup).is_none() {
            cand.points.push(wc.argmax.clone());
            let n = cand.len() as f64;
            cand.p_reg = cand.p_reg.max(n.ln().powi(2));
        }
        let n_ln = (cand.len() as f64).ln();
        if tol_next + n_ln / cand.p_reg > params.varsigma {
            cand.p_reg += n_ln;
        }
        if !exceeds && tol_next + n_ln / cand.p_reg <= params.varsigma {
            converged = true;
            break;
        }
        if cand.iteration > params.max_iter {
            warning = Some(format!("iteration cap {} reached; returning the best allocation found", params.max_iter));
            break;
        }
    }

    let (p, value, argmax, smoothed, gap) = best.expect("at least one iteration");
    let status = if converged { SolveStatus::Optimal } else { SolveStatus::NumericalFailure };
    let aux = Aux { t: Some(smoothed), nominal_crlb: fisher::crlb_value(&gamma_hat, &p).ok(), ..Aux::default() };
    Ok(MinMaxResult {
        allocation: AllocationResult {
            provenance,
            mode,
            status,
            p_star: p,
            objective: value,
            duality_gap: gap,
            aux,
            backend: backend_id,
            newton_steps: steps,
        },
        candidates: cand,
        trace,
        argmax,
        converged,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::reference_scenario;

    #[test]
    fn lse_single_candidate_and_limit() {
        assert_eq!(log_sum_exp(&[0.7], 3.0), 0.7);
        let v = [1.0, 0.999, 0.5];
        let r = log_sum_exp(&v, 1e6);
        assert!(r >= 1.0 && r - 1.0 <= 1e-5);
        assert!(log_sum_exp(&[1e3, 1e3], 1e4).is_finite());
    }

    #[test]
    fn grid_sizes_and_membership() {
        let ball = UncertaintyModel::LocationBall { radius: 0.5 };
        let g = uncertainty_grid(&ball, 2000);
        assert_eq!(g.len(), 2000);
        assert!(g.iter().all(|e| ball.contains(e)));
        let bx = UncertaintyModel::OrientationBox { delta_theta: 0.1, delta_phi: 0.2 };
        let g = uncertainty_grid(&bx, 441);
        assert_eq!(g.len(), 441);
        assert!(g.iter().all(|e| bx.contains(e)));
        assert_eq!(uncertainty_grid(&UncertaintyModel::LocationBall { radius: 0.0 }, 2000).len(), 1);
    }

    #[test]
    fn zero_error_is_nominal_crlb() {
        let s = reference_scenario();
        let pose = PoseModel::new(&s, UncertaintyModel::LocationBall { radius: 0.3 }).unwrap();
        let g = fisher::assemble_gamma(&s).unwrap();
        let p = [400.0; 4];
        let a = pose.objective_at(&p, &[0.0; 3]);
        let b = fisher::crlb_value(&g, &p).unwrap();
        assert!((a - b).abs() <= 1e-14 * b);
    }

    #[test]
    fn polar_box_must_stay_inside_hemisphere() {
        let s = reference_scenario();
        let bad = UncertaintyModel::OrientationBox { delta_theta: 31f64.to_radians(), delta_phi: 0.1 };
        assert!(matches!(PoseModel::new(&s, bad), Err(MinMaxError::Model(_))));
    }
}
