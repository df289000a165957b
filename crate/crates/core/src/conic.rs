//! The five allocation problems in conic normal form: nominal CRLB minimization,
//! the robust worst-case SDP, minimum power, robust minimum power and the
//! fixed-power worst-case evaluator.
//!
//! Inside the solver, powers are `p = a·p̃` with `a` the mean upper bound and
//! Γ is multiplied by `β = trace(J(1)⁻¹)`, so `J̃(p̃) = (β/a)·J(p)` and the
//! scaled CRLB of the all-`a` allocation is one. Results are unscaled on exit.

use serde::{Deserialize, Serialize};

use crate::feasible::{build_feasible_set, FeasibleError, FeasibleSet, IlluminationMode};
use crate::fisher::{self, FisherError, GammaMatrix};
use crate::scenario::Scenario;
use crate::solver::{Affine, BarrierSolver, ConicBackend, ConicProblem, PsdBlock, RotatedCone, SolveStatus};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConicError {
    #[error(transparent)]
    Feasible(#[from] FeasibleError),
    #[error(transparent)]
    Fisher(#[from] FisherError),
    #[error("invalid problem parameter: {0}")]
    Parameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    NominalCrlb,
    RobustGamma,
    MinPower,
    RobustMinPower,
    WorstCaseFixedP,
    RobustLocation,
    RobustOrientation,
}

/// Declarative description of one allocation problem.
#[derive(Debug, Clone, PartialEq)]
pub enum AllocationProblem {
    NominalCrlb,
    RobustGamma { delta: f64 },
    MinPower { eps: f64 },
    RobustMinPower { delta: f64, eps: f64 },
    WorstCaseFixedP { p: Vec<f64>, delta: f64 },
}

impl AllocationProblem {
    pub fn provenance(&self) -> Provenance {
        match self {
            AllocationProblem::NominalCrlb => Provenance::NominalCrlb,
            AllocationProblem::RobustGamma { .. } => Provenance::RobustGamma,
            AllocationProblem::MinPower { .. } => Provenance::MinPower,
            AllocationProblem::RobustMinPower { .. } => Provenance::RobustMinPower,
            AllocationProblem::WorstCaseFixedP { .. } => Provenance::WorstCaseFixedP,
        }
    }
}

/// Uncertainty radius on Γ, absolute (1/(m²·W)) or relative to ‖Γ̂‖₂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSpec {
    Absolute(f64),
    Relative(f64),
}

impl DeltaSpec {
    pub fn resolve(&self, gamma: &GammaMatrix<f64>) -> f64 {
        match *self {
            DeltaSpec::Absolute(d) => d,
            DeltaSpec::Relative(r) => r * gamma.spectral_norm(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Aux {
    pub t: Option<f64>,
    pub s: Option<f64>,
    pub mu: Option<f64>,
    pub h: Option<[[f64; 3]; 3]>,
    /// trace(J(p*)⁻¹) under the nominal Γ̂.
    pub nominal_crlb: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationResult {
    pub provenance: Provenance,
    pub mode: IlluminationMode,
    pub status: SolveStatus,
    /// Electrical power per LED in W; empty when no point was found.
    pub p_star: Vec<f64>,
    /// CRLB bound in m² or total power in W; `+∞` when infeasible.
    pub objective: f64,
    pub duality_gap: f64,
    pub aux: Aux,
    pub backend: String,
    pub newton_steps: usize,
}

impl AllocationResult {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Scale factors between physical and solver units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaling {
    /// p = a·p̃.
    pub a: f64,
    /// Γ̃ = β·Γ.
    pub beta: f64,
}

impl Scaling {
    pub fn new(set: &FeasibleSet<f64>, gamma: &GammaMatrix<f64>) -> Result<Self, ConicError> {
        let nl = set.num_leds() as f64;
        let a = set.p_ub.iter().sum::<f64>() / nl;
        if !(a > 0.0 && a.is_finite()) {
            return Err(ConicError::Parameter("upper power bounds must be positive".into()));
        }
        let ones = vec![1.0; set.num_leds()];
        let beta = fisher::crlb_value(gamma, &ones)?;
        Ok(Scaling { a, beta })
    }

    /// Physical CRLB (m²) from a scaled one.
    pub fn crlb_out(&self, scaled: f64) -> f64 {
        scaled * self.beta / self.a
    }

    pub fn crlb_in(&self, physical: f64) -> f64 {
        physical * self.a / self.beta
    }
}

/// Variable indices of the power part of a formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerVars {
    pub p: Vec<usize>,
    pub u: Vec<usize>,
}

/// Adds p̃ (and u for the exact mode) together with P1–P4 of `set` to `prob`.
pub fn add_power_constraints(prob: &mut ConicProblem, set: &FeasibleSet<f64>, scaling: &Scaling) -> PowerVars {
    let nl = set.num_leds();
    let a = scaling.a;
    let p: Vec<usize> = (0..nl).map(|_| prob.add_var()).collect();
    for i in 0..nl {
        prob.add_linear(Affine::var(p[i]).plus(-set.p_lb[i] / a));
        prob.add_linear(Affine::constant(set.p_ub[i] / a).term(p[i], -1.0));
    }
    if let Some(total) = set.total_power {
        let mut e = Affine::constant(total / a);
        for &v in &p {
            e = e.term(v, -1.0);
        }
        prob.add_linear(e);
    }
    let mut u = Vec::new();
    match set.mode {
        IlluminationMode::Exact => {
            if !set.illumination.is_empty() {
                u = (0..nl).map(|_| prob.add_var()).collect();
                for i in 0..nl {
                    prob.cones.push(RotatedCone { a: Affine::var(p[i]), b: Affine::constant(1.0), c: Affine::var(u[i]) });
                }
                for c in &set.illumination {
                    let mut e = Affine::constant(-c.threshold);
                    for i in 0..nl {
                        e = e.term(u[i], c.phi[i] * a.sqrt());
                    }
                    prob.add_linear(e);
                }
            }
        }
        IlluminationMode::Relaxed => {
            for c in &set.illumination {
                let mut e = Affine::constant(-c.relaxed_rhs());
                for i in 0..nl {
                    e = e.term(p[i], c.phi[i] * a);
                }
                prob.add_linear(e);
            }
        }
    }
    PowerVars { p, u }
}

/// A starting point for the power variables: a uniform level inside the box.
pub fn power_start(set: &FeasibleSet<f64>, scaling: &Scaling, vars: &PowerVars, x: &mut [f64]) {
    let nl = set.num_leds();
    let mut level = set.min_uniform_level() * 1.05;
    if let Some(total) = set.total_power {
        level = level.min(total / nl as f64);
    }
    for i in 0..nl {
        let v = level.clamp(set.p_lb[i], set.p_ub[i]) / scaling.a;
        x[vars.p[i]] = v;
        if let Some(&ui) = vars.u.get(i) {
            x[ui] = 0.999 * v.sqrt();
        }
    }
}

const H_INDEX: [[usize; 3]; 3] = [[0, 1, 2], [1, 3, 4], [2, 4, 5]];

enum PowerSource<'a> {
    Variables(&'a PowerVars),
    Fixed(&'a [f64]),
}

struct Epigraph {
    h: [usize; 6],
    s: usize,
    mu: Option<usize>,
}

/// Adds H, s, (μ) and the LMI block, plus `rhs − 3s − trace H ≥ 0` where `rhs` is
/// either the variable `t` or a constant level.
fn add_epigraph(
    prob: &mut ConicProblem,
    gamma_s: &GammaMatrix<f64>,
    power: PowerSource<'_>,
    delta_s: f64,
    robust: bool,
    rhs: Affine,
) -> Epigraph {
    let nl = gamma_s.num_leds();
    let h: [usize; 6] = std::array::from_fn(|_| prob.add_var());
    let s = prob.add_var();
    let mu = robust.then(|| prob.add_var());

    let mut tr = rhs.term(s, -3.0);
    for k in 0..3 {
        tr = tr.term(h[H_INDEX[k][k]], -1.0);
    }
    prob.add_linear(tr);
    prob.add_linear(Affine::var(s));
    if let Some(mu) = mu {
        prob.add_linear(Affine::var(mu));
    }

    let mut hb = PsdBlock::new(3);
    for i in 0..3 {
        for j in i..3 {
            hb.add(i, j, Some(h[H_INDEX[i][j]]), 1.0);
        }
    }
    prob.psd.push(hb);

    let dim = if robust { 6 + 3 * nl } else { 6 };
    let mut phi = PsdBlock::new(dim);
    for i in 0..3 {
        for j in i..3 {
            phi.add(i, j, Some(h[H_INDEX[i][j]]), 1.0);
        }
        phi.add(i, i, Some(s), 1.0);
        phi.add(i, 3 + i, None, 1.0);
    }
    let blocks: Vec<_> = gamma_s.blocks.iter().map(|b| b.sym()).collect();
    for k1 in 0..3 {
        for k2 in k1..3 {
            for (i, b) in blocks.iter().enumerate() {
                let g = b.0[k1][k2];
                match power {
                    PowerSource::Variables(v) => phi.add(3 + k1, 3 + k2, Some(v.p[i]), g),
                    PowerSource::Fixed(p) => phi.add(3 + k1, 3 + k2, None, g * p[i]),
                }
            }
        }
    }
    if let Some(mu) = mu {
        for k in 0..3 {
            phi.add(3 + k, 3 + k, Some(mu), -1.0);
        }
        for r in 0..3 * nl {
            phi.add(6 + r, 6 + r, Some(mu), 1.0);
        }
        for k in 0..3 {
            for i in 0..nl {
                let col = 6 + k * nl + i;
                match power {
                    PowerSource::Variables(v) => phi.add(3 + k, col, Some(v.p[i]), -0.5 * delta_s),
                    PowerSource::Fixed(p) => phi.add(3 + k, col, None, -0.5 * delta_s * p[i]),
                }
            }
        }
    }
    prob.psd.push(phi);
    Epigraph { h, s, mu }
}

fn epigraph_start(e: &Epigraph, x: &mut [f64], level: f64) {
    for k in 0..3 {
        x[e.h[H_INDEX[k][k]]] = level;
    }
    x[e.s] = 0.1 * level;
    if let Some(mu) = e.mu {
        x[mu] = 1e-3;
    }
}

fn read_aux(e: &Epigraph, x: &[f64], sc: &Scaling) -> Aux {
    let k = sc.beta / sc.a;
    let h = std::array::from_fn(|i| std::array::from_fn(|j| x[e.h[H_INDEX[i][j]]] * k));
    Aux { t: None, s: Some(x[e.s] * k), mu: e.mu.map(|m| x[m] / k), h: Some(h), nominal_crlb: None }
}

fn check_delta(delta: f64) -> Result<(), ConicError> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(ConicError::Parameter(format!("delta must be a finite non-negative number (got {delta})")));
    }
    Ok(())
}

fn check_eps(eps: f64) -> Result<(), ConicError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(ConicError::Parameter(format!("eps must be positive (got {eps})")));
    }
    Ok(())
}

/// Builds and solves one problem with the given backend.
pub fn solve_allocation(
    problem: &AllocationProblem,
    set: &FeasibleSet<f64>,
    gamma: &GammaMatrix<f64>,
    backend: &dyn ConicBackend,
) -> Result<AllocationResult, ConicError> {
    let sc = Scaling::new(set, gamma)?;
    let gamma_s = gamma.scale(sc.beta);
    let mut prob = ConicProblem::new(0);
    let provenance = problem.provenance();

    let (delta, robust) = match problem {
        AllocationProblem::NominalCrlb | AllocationProblem::MinPower { .. } => (0.0, false),
        AllocationProblem::RobustGamma { delta } | AllocationProblem::RobustMinPower { delta, .. } => (*delta, true),
        AllocationProblem::WorstCaseFixedP { delta, .. } => (*delta, true),
    };
    check_delta(delta)?;
    let delta_s = delta * sc.beta;
    if set.total_power.is_none() && matches!(problem, AllocationProblem::NominalCrlb | AllocationProblem::RobustGamma { .. }) {
        return Err(ConicError::Parameter("CRLB minimization needs a total power budget".into()));
    }

    match problem {
        AllocationProblem::NominalCrlb | AllocationProblem::RobustGamma { .. } => {
            let vars = add_power_constraints(&mut prob, set, &sc);
            let t = prob.add_var();
            prob.objective[t] = 1.0;
            let e = add_epigraph(&mut prob, &gamma_s, PowerSource::Variables(&vars), delta_s, robust, Affine::var(t));
            let mut x = vec![0.0; prob.num_vars];
            power_start(set, &sc, &vars, &mut x);
            epigraph_start(&e, &mut x, 1.0);
            x[t] = 5.0;
            let out = backend.solve(&prob, Some(&x));
            let p: Vec<f64> = vars.p.iter().map(|&v| out.x[v] * sc.a).collect();
            let mut aux = read_aux(&e, &out.x, &sc);
            aux.t = Some(sc.crlb_out(out.x[t]));
            Ok(finish(
                provenance,
                set.mode,
                out.status,
                p,
                sc.crlb_out(out.objective),
                sc.crlb_out(out.gap),
                aux,
                gamma,
                backend,
                out.newton_steps,
            ))
        }
        AllocationProblem::MinPower { eps } | AllocationProblem::RobustMinPower { eps, .. } => {
            check_eps(*eps)?;
            let vars = add_power_constraints(&mut prob, set, &sc);
            for &v in &vars.p {
                prob.objective[v] = 1.0;
            }
            let e = add_epigraph(&mut prob, &gamma_s, PowerSource::Variables(&vars), delta_s, robust, Affine::constant(sc.crlb_in(*eps)));
            let mut x = vec![0.0; prob.num_vars];
            for i in 0..set.num_leds() {
                x[vars.p[i]] = set.p_ub[i] / sc.a;
                if let Some(&u) = vars.u.get(i) {
                    x[u] = 0.999 * x[vars.p[i]].sqrt();
                }
            }
            epigraph_start(&e, &mut x, 0.1 * sc.crlb_in(*eps));
            let out = backend.solve(&prob, Some(&x));
            let p: Vec<f64> = vars.p.iter().map(|&v| out.x[v] * sc.a).collect();
            let aux = read_aux(&e, &out.x, &sc);
            Ok(finish(provenance, set.mode, out.status, p, out.objective * sc.a, out.gap * sc.a, aux, gamma, backend, out.newton_steps))
        }
        AllocationProblem::WorstCaseFixedP { p, .. } => {
            if p.len() != gamma.num_leds() || p.iter().any(|v| !(*v >= 0.0)) {
                return Err(ConicError::Parameter("power vector must be non-negative with one entry per LED".into()));
            }
            let ps: Vec<f64> = p.iter().map(|v| v / sc.a).collect();
            let t = prob.add_var();
            prob.objective[t] = 1.0;
            let e = add_epigraph(&mut prob, &gamma_s, PowerSource::Fixed(&ps), delta_s, robust, Affine::var(t));
            let mut x = vec![0.0; prob.num_vars];
            epigraph_start(&e, &mut x, 1.0);
            x[t] = 5.0;
            let out = backend.solve(&prob, Some(&x));
            let mut aux = read_aux(&e, &out.x, &sc);
            aux.t = Some(sc.crlb_out(out.x[t]));
            Ok(finish(
                provenance,
                set.mode,
                out.status,
                p.clone(),
                sc.crlb_out(out.objective),
                sc.crlb_out(out.gap),
                aux,
                gamma,
                backend,
                out.newton_steps,
            ))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    provenance: Provenance,
    mode: IlluminationMode,
    status: SolveStatus,
    p: Vec<f64>,
    objective: f64,
    gap: f64,
    mut aux: Aux,
    gamma: &GammaMatrix<f64>,
    backend: &dyn ConicBackend,
    newton_steps: usize,
) -> AllocationResult {
    let found = matches!(status, SolveStatus::Optimal | SolveStatus::NumericalFailure) && p.iter().all(|v| v.is_finite());
    let (p_star, objective, aux) = if found {
        aux.nominal_crlb = fisher::crlb_value(gamma, &p).ok();
        (p, objective, aux)
    } else if provenance == Provenance::WorstCaseFixedP {
        (p, f64::INFINITY, Aux::default())
    } else {
        (Vec::new(), f64::INFINITY, Aux::default())
    };
    AllocationResult {
        provenance,
        mode,
        status,
        p_star,
        objective,
        duality_gap: if found { gap } else { f64::INFINITY },
        aux,
        backend: backend.id().to_string(),
        newton_steps,
    }
}

fn default_backend() -> BarrierSolver {
    BarrierSolver::default()
}

/// Minimizes trace(J⁻¹(p)) over P.
pub fn solve_nominal_crlb(
    scenario: &Scenario<f64>,
    gamma: &GammaMatrix<f64>,
    mode: IlluminationMode,
) -> Result<AllocationResult, ConicError> {
    let set = build_feasible_set(scenario, mode)?;
    solve_allocation(&AllocationProblem::NominalCrlb, &set, gamma, &default_backend())
}

/// Minimizes the worst-case CRLB over ‖Γ_Δ‖₂ ≤ δ.
pub fn solve_robust_gamma(
    scenario: &Scenario<f64>,
    gamma_hat: &GammaMatrix<f64>,
    delta: f64,
    mode: IlluminationMode,
) -> Result<AllocationResult, ConicError> {
    let set = build_feasible_set(scenario, mode)?;
    solve_allocation(&AllocationProblem::RobustGamma { delta }, &set, gamma_hat, &default_backend())
}

/// Worst-case CRLB of a fixed allocation; `+∞` when some perturbation makes the FIM singular.
pub fn worst_case_crlb_fixed_p(p: &[f64], gamma_hat: &GammaMatrix<f64>, delta: f64) -> Result<AllocationResult, ConicError> {
    let nl = gamma_hat.num_leds();
    let ub = p.iter().fold(0.0f64, |m, v| m.max(*v)).max(1e-300);
    let set =
        FeasibleSet { p_lb: vec![0.0; nl], p_ub: vec![ub; nl], total_power: None, illumination: Vec::new(), mode: IlluminationMode::Exact };
    solve_allocation(&AllocationProblem::WorstCaseFixedP { p: p.to_vec(), delta }, &set, gamma_hat, &default_backend())
}

/// Minimizes 1ᵀp subject to trace(J⁻¹(p)) ≤ ε over P_s (no total-power constraint).
pub fn solve_min_power(
    scenario: &Scenario<f64>,
    gamma: &GammaMatrix<f64>,
    eps: f64,
    mode: IlluminationMode,
) -> Result<AllocationResult, ConicError> {
    let set = build_feasible_set(scenario, mode)?.without_total();
    solve_allocation(&AllocationProblem::MinPower { eps }, &set, gamma, &default_backend())
}

pub fn solve_robust_min_power(
    scenario: &Scenario<f64>,
    gamma_hat: &GammaMatrix<f64>,
    delta: f64,
    eps: f64,
    mode: IlluminationMode,
) -> Result<AllocationResult, ConicError> {
    let set = build_feasible_set(scenario, mode)?.without_total();
    solve_allocation(&AllocationProblem::RobustMinPower { delta, eps }, &set, gamma_hat, &default_backend())
}
