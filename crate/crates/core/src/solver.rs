//! Conic normal form and a primal log-det barrier interior-point backend.
//!
//! Problems are `minimize cᵀx + f(x)` over affine inequalities `a(x) ≥ 0`,
//! rotated quadratic cones `a(x)·b(x) ≥ c(x)²` and linear matrix inequalities
//! `F₀ + Σ x_j F_j ⪰ 0`, where `f` is an optional smooth convex term. Iterates
//! stay strictly feasible, so any returned point satisfies every constraint.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};

/// Affine expression `constant + Σ coeff·x[var]`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Affine {
    pub constant: f64,
    pub terms: Vec<(usize, f64)>,
}

impl Affine {
    pub fn constant(c: f64) -> Self {
        Affine { constant: c, terms: Vec::new() }
    }

    pub fn var(v: usize) -> Self {
        Affine { constant: 0.0, terms: vec![(v, 1.0)] }
    }

    pub fn term(mut self, v: usize, coeff: f64) -> Self {
        self.terms.push((v, coeff));
        self
    }

    pub fn plus(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }

    fn norm(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c * c).sum::<f64>().sqrt()
    }

    fn scaled(&self, s: f64) -> Self {
        Affine { constant: self.constant * s, terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect() }
    }
}

/// `a(x)·b(x) ≥ c(x)²` with `a, b ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RotatedCone {
    pub a: Affine,
    pub b: Affine,
    pub c: Affine,
}

/// Symmetric affine matrix constraint `F₀ + Σ x_j F_j ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdBlock {
    pub dim: usize,
    pub constant: DMatrix<f64>,
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl PsdBlock {
    pub fn new(dim: usize) -> Self {
        PsdBlock { dim, constant: DMatrix::zeros(dim, dim), terms: Vec::new() }
    }

    fn slot(&mut self, var: usize) -> &mut DMatrix<f64> {
        let pos = match self.terms.iter().position(|(v, _)| *v == var) {
            Some(p) => p,
            None => {
                self.terms.push((var, DMatrix::zeros(self.dim, self.dim)));
                self.terms.len() - 1
            }
        };
        &mut self.terms[pos].1
    }

    /// Adds `coeff·x[var]` (or `coeff` when `var` is `None`) at (i, j) and (j, i).
    pub fn add(&mut self, i: usize, j: usize, var: Option<usize>, coeff: f64) {
        let m = match var {
            Some(v) => self.slot(v),
            None => &mut self.constant,
        };
        m[(i, j)] += coeff;
        if i != j {
            m[(j, i)] += coeff;
        }
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut f = self.constant.clone();
        for (v, fj) in &self.terms {
            if x[*v] != 0.0 {
                f += fj * x[*v];
            }
        }
        f
    }
}

/// Smooth convex objective term; `None` means `x` is outside its domain.
pub trait SmoothObjective: Send + Sync {
    fn value(&self, x: &[f64]) -> Option<f64>;
    /// Value, gradient and row-major Hessian.
    fn derivatives(&self, x: &[f64]) -> Option<(f64, Vec<f64>, Vec<f64>)>;
}

#[derive(Clone, Default)]
pub struct ConicProblem {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub linear: Vec<Affine>,
    pub cones: Vec<RotatedCone>,
    pub psd: Vec<PsdBlock>,
    pub smooth: Option<Arc<dyn SmoothObjective>>,
}

impl std::fmt::Debug for ConicProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConicProblem")
            .field("num_vars", &self.num_vars)
            .field("linear", &self.linear.len())
            .field("cones", &self.cones.len())
            .field("psd_dims", &self.psd.iter().map(|b| b.dim).collect::<Vec<_>>())
            .field("smooth", &self.smooth.is_some())
            .finish()
    }
}

impl ConicProblem {
    pub fn new(num_vars: usize) -> Self {
        ConicProblem { num_vars, objective: vec![0.0; num_vars], ..Default::default() }
    }

    pub fn add_var(&mut self) -> usize {
        self.num_vars += 1;
        self.objective.push(0.0);
        self.num_vars - 1
    }

    /// Adds `expr ≥ 0`.
    pub fn add_linear(&mut self, expr: Affine) {
        self.linear.push(expr);
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        let lin: f64 = self.objective.iter().zip(x).map(|(c, v)| c * v).sum();
        lin + self.smooth.as_ref().and_then(|s| s.value(x)).unwrap_or(0.0)
    }

    /// Barrier parameter ν: total cone degree.
    pub fn degree(&self) -> usize {
        self.linear.len() + 2 * self.cones.len() + self.psd.iter().map(|b| b.dim).sum::<usize>()
    }

    /// Smallest constraint margin at `x` (negative when infeasible).
    pub fn min_margin(&self, x: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for a in &self.linear {
            m = m.min(a.eval(x));
        }
        for c in &self.cones {
            let (a, b, z) = (c.a.eval(x), c.b.eval(x), c.c.eval(x));
            let tr = 0.5 * (a + b);
            let rad = (0.25 * (a - b) * (a - b) + z * z).sqrt();
            m = m.min(tr - rad);
        }
        for b in &self.psd {
            let f = b.eval(x);
            let e = f.symmetric_eigenvalues();
            m = m.min(e.iter().copied().fold(f64::INFINITY, f64::min));
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical_failure",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    /// Central-path duality gap bound ν/τ at exit.
    pub gap: f64,
    pub newton_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SolverOptions {
    /// Target gap relative to `1 + |objective|`.
    pub gap_tol: f64,
    /// Gap above which a stalled solve is reported as a numerical failure.
    pub failure_gap_tol: f64,
    pub max_newton: usize,
    /// Barrier parameter growth per outer stage.
    pub tau_growth: f64,
    /// Half-width of the artificial box used during phase I.
    pub phase1_box: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { gap_tol: 1e-8, failure_gap_tol: 1e-7, max_newton: 2000, tau_growth: 10.0, phase1_box: 1e6 }
    }
}

/// A solver meeting the interior-point tolerance contract of [`SolverOptions`].
pub trait ConicBackend: Send + Sync {
    fn id(&self) -> &'static str;
    fn options(&self) -> &SolverOptions;
    fn solve(&self, problem: &ConicProblem, x0: Option<&[f64]>) -> SolveOutcome;
}

#[derive(Debug, Clone, Default)]
pub struct BarrierSolver {
    pub options: SolverOptions,
}

impl BarrierSolver {
    pub fn new(options: SolverOptions) -> Self {
        BarrierSolver { options }
    }
}

impl ConicBackend for BarrierSolver {
    fn id(&self) -> &'static str {
        "logdet-barrier/1"
    }

    fn options(&self) -> &SolverOptions {
        &self.options
    }

    fn solve(&self, problem: &ConicProblem, x0: Option<&[f64]>) -> SolveOutcome {
        solve_barrier(problem, x0, &self.options)
    }
}

// ---- barrier internals ----

struct Barrier {
    n: usize,
    linear: Vec<Affine>,
    psd: Vec<PsdBlock>,
    nu: f64,
}

impl Barrier {
    fn from_problem(p: &ConicProblem, extra_linear: Vec<Affine>, shift_var: Option<usize>, n: usize) -> Self {
        let mut linear: Vec<Affine> = p.linear.iter().chain(extra_linear.iter()).cloned().collect();
        let mut psd: Vec<PsdBlock> = p.psd.clone();
        for c in &p.cones {
            let mut b = PsdBlock::new(2);
            for (i, j, e) in [(0, 0, &c.a), (1, 1, &c.b), (0, 1, &c.c)] {
                b.add(i, j, None, e.constant);
                for &(v, k) in &e.terms {
                    b.add(i, j, Some(v), k);
                }
            }
            psd.push(b);
        }
        if let Some(w) = shift_var {
            let n_orig = p.linear.len();
            for a in linear.iter_mut().take(n_orig) {
                a.terms.push((w, 1.0));
            }
            for b in psd.iter_mut() {
                for i in 0..b.dim {
                    b.add(i, i, Some(w), 1.0);
                }
            }
        }
        for a in linear.iter_mut() {
            let nrm = a.norm();
            if nrm > 0.0 {
                *a = a.scaled(1.0 / nrm);
            }
        }
        let nu = (linear.len() + psd.iter().map(|b| b.dim).sum::<usize>()) as f64;
        Barrier { n, linear, psd, nu }
    }

    fn value(&self, x: &[f64]) -> Option<f64> {
        let mut v = 0.0;
        for a in &self.linear {
            let s = a.eval(x);
            if !(s > 0.0) {
                return None;
            }
            v -= s.ln();
        }
        for b in &self.psd {
            let chol = Cholesky::new(b.eval(x))?;
            let l = chol.l_dirty();
            for i in 0..b.dim {
                let d = l[(i, i)];
                if !(d > 0.0) || !d.is_finite() {
                    return None;
                }
                v -= 2.0 * d.ln();
            }
        }
        Some(v)
    }

    fn derivatives(&self, x: &[f64]) -> Option<(f64, DVector<f64>, DMatrix<f64>)> {
        let n = self.n;
        let mut v = 0.0;
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        for a in &self.linear {
            let s = a.eval(x);
            if !(s > 0.0) {
                return None;
            }
            v -= s.ln();
            for &(i, ci) in &a.terms {
                g[i] -= ci / s;
                for &(j, cj) in &a.terms {
                    h[(i, j)] += ci * cj / (s * s);
                }
            }
        }
        for b in &self.psd {
            let chol = Cholesky::new(b.eval(x))?;
            {
                let l = chol.l_dirty();
                for i in 0..b.dim {
                    let d = l[(i, i)];
                    if !(d > 0.0) || !d.is_finite() {
                        return None;
                    }
                    v -= 2.0 * d.ln();
                }
            }
            let finv = chol.inverse();
            let w: Vec<(usize, DMatrix<f64>)> = b.terms.iter().map(|(j, fj)| (*j, &finv * fj)).collect();
            for (idx, (j, wj)) in w.iter().enumerate() {
                g[*j] -= wj.trace();
                for (k, wk) in w.iter().skip(idx) {
                    // tr(W_j W_k) = Σ_ab W_j[a,b] W_k[b,a]
                    let t = wj.component_mul(&wk.transpose()).sum();
                    h[(*j, *k)] += t;
                    if *k != *j {
                        h[(*k, *j)] += t;
                    }
                }
            }
        }
        Some((v, g, h))
    }
}

struct Objective<'a> {
    c: &'a [f64],
    smooth: Option<&'a dyn SmoothObjective>,
}

impl Objective<'_> {
    fn value(&self, x: &[f64]) -> Option<f64> {
        let lin: f64 = self.c.iter().zip(x).map(|(c, v)| c * v).sum();
        match self.smooth {
            None => Some(lin),
            Some(s) => s.value(x).map(|v| v + lin),
        }
    }

    fn derivatives(&self, x: &[f64], n: usize) -> Option<(f64, DVector<f64>, Option<DMatrix<f64>>)> {
        let lin: f64 = self.c.iter().zip(x).map(|(c, v)| c * v).sum();
        let mut g = DVector::from_column_slice(&self.c[..n.min(self.c.len())]);
        if g.len() < n {
            g = g.resize_vertically(n, 0.0);
        }
        match self.smooth {
            None => Some((lin, g, None)),
            Some(s) => {
                let (v, sg, sh) = s.derivatives(x)?;
                for i in 0..sg.len() {
                    g[i] += sg[i];
                }
                let m = sg.len();
                let mut h = DMatrix::zeros(n, n);
                for i in 0..m {
                    for j in 0..m {
                        h[(i, j)] = sh[i * m + j];
                    }
                }
                Some((v + lin, g, Some(h)))
            }
        }
    }
}

fn newton_direction(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = g.len();
    let d: DVector<f64> = DVector::from_iterator(
        n,
        (0..n).map(|i| {
            let v = h[(i, i)];
            if v > 0.0 && v.is_finite() {
                1.0 / v.sqrt()
            } else {
                1.0
            }
        }),
    );
    let mut hs = h.clone();
    for i in 0..n {
        for j in 0..n {
            hs[(i, j)] *= d[i] * d[j];
        }
    }
    let gs = g.component_mul(&d);
    let mut reg = 0.0;
    for _ in 0..12 {
        let mut m = hs.clone();
        for i in 0..n {
            m[(i, i)] += reg;
        }
        if let Some(ch) = Cholesky::new(m) {
            let y = ch.solve(&(-&gs));
            if y.iter().all(|v| v.is_finite()) {
                return Some(y.component_mul(&d));
            }
        }
        reg = if reg == 0.0 { 1e-12 } else { reg * 100.0 };
    }
    None
}

const MAX_CENTERING_STEPS: usize = 60;

enum CenterStop {
    Centered,
    Stalled,
    Early,
    Failed,
}

struct Centering<'a> {
    barrier: &'a Barrier,
    objective: Objective<'a>,
}

impl Centering<'_> {
    fn merit(&self, x: &[f64], tau: f64) -> Option<f64> {
        let f = self.objective.value(x)?;
        let b = self.barrier.value(x)?;
        Some(tau * f + b)
    }

    fn center(&self, x: &mut [f64], tau: f64, budget: &mut usize, early: &dyn Fn(&[f64]) -> bool) -> CenterStop {
        let n = self.barrier.n;
        let mut local = 0;
        loop {
            if *budget == 0 || local == MAX_CENTERING_STEPS {
                return CenterStop::Stalled;
            }
            *budget -= 1;
            local += 1;
            let Some((bv, bg, bh)) = self.barrier.derivatives(x) else { return CenterStop::Failed };
            let Some((fv, fg, fh)) = self.objective.derivatives(x, n) else { return CenterStop::Failed };
            let grad = &fg * tau + &bg;
            let mut hess = bh;
            if let Some(fh) = fh {
                hess += fh * tau;
            }
            let Some(dx) = newton_direction(&hess, &grad) else { return CenterStop::Failed };
            let slope = grad.dot(&dx);
            let lambda2 = -slope;
            let merit0 = tau * fv + bv;
            // Below this the merit decrease is lost in rounding.
            let floor = 1e-9f64.max(1e-12 * merit0.abs());
            if !(lambda2 > floor) {
                return CenterStop::Centered;
            }
            let mut t = 1.0;
            let mut accepted = false;
            let mut trial = x.to_vec();
            while t > 1e-14 {
                for i in 0..n {
                    trial[i] = x[i] + t * dx[i];
                }
                if let Some(m) = self.merit(&trial, tau) {
                    if m <= merit0 + 0.25 * t * slope {
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                return CenterStop::Stalled;
            }
            x.copy_from_slice(&trial);
            if x.iter().any(|v| v.abs() > 1e15) {
                return CenterStop::Stalled;
            }
            if early(x) {
                return CenterStop::Early;
            }
            if lambda2 < 1e-7 && t == 1.0 || lambda2 < 1e-6 && t < 1e-6 {
                return CenterStop::Centered;
            }
        }
    }
}

fn strictly_feasible(problem: &ConicProblem, x: &[f64]) -> bool {
    let b = Barrier::from_problem(problem, Vec::new(), None, problem.num_vars);
    b.value(x).is_some() && problem.smooth.as_ref().is_none_or(|s| s.value(x).is_some())
}

/// Phase I: returns a strictly feasible point or `None` when none exists inside the box.
fn phase_one(problem: &ConicProblem, x0: &[f64], opts: &SolverOptions, steps: &mut usize) -> Result<Vec<f64>, SolveStatus> {
    let n = problem.num_vars;
    let w = n;
    let mut extra = Vec::new();
    extra.push(Affine::var(w).plus(1.0));
    for j in 0..n {
        let r = opts.phase1_box * (1.0 + x0[j].abs());
        extra.push(Affine::constant(r + x0[j]).term(j, -1.0));
        extra.push(Affine::constant(r - x0[j]).term(j, 1.0));
    }
    let barrier = Barrier::from_problem(problem, extra, Some(w), n + 1);
    let margin = problem.min_margin(x0);
    let mut x: Vec<f64> = x0.to_vec();
    x.push((-margin).max(0.0) + 1.0);
    let mut c = vec![0.0; n + 1];
    c[w] = 1.0;
    let centering = Centering { barrier: &barrier, objective: Objective { c: &c, smooth: None } };
    let early = |x: &[f64]| x[w] < 0.0;
    let mut tau = 1.0;
    let mut budget = opts.max_newton;
    loop {
        let stop = centering.center(&mut x, tau, &mut budget, &early);
        *steps = opts.max_newton - budget;
        if x[w] < 0.0 {
            x.truncate(n);
            return Ok(x);
        }
        let gap = barrier.nu / tau;
        match stop {
            CenterStop::Failed => return Err(SolveStatus::NumericalFailure),
            CenterStop::Stalled if budget == 0 => return Err(SolveStatus::NumericalFailure),
            _ => {}
        }
        if x[w] - gap > 0.0 {
            return Err(SolveStatus::Infeasible);
        }
        if gap < 1e-10 {
            // Optimum of phase I is (numerically) zero: no strictly feasible point.
            return Err(SolveStatus::Infeasible);
        }
        tau *= opts.tau_growth;
    }
}

pub fn solve_barrier(problem: &ConicProblem, x0: Option<&[f64]>, opts: &SolverOptions) -> SolveOutcome {
    let n = problem.num_vars;
    let start: Vec<f64> = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let mut steps = 0;
    let fail = |status, x: Vec<f64>, steps| SolveOutcome { status, objective: f64::NAN, gap: f64::INFINITY, x, newton_steps: steps };
    let mut x = if strictly_feasible(problem, &start) {
        start
    } else {
        match phase_one(problem, &start, opts, &mut steps) {
            Ok(x) => x,
            Err(status) => return fail(status, start, steps),
        }
    };
    if let Some(s) = &problem.smooth {
        if s.value(&x).is_none() {
            return fail(SolveStatus::NumericalFailure, x, steps);
        }
    }
    let barrier = Barrier::from_problem(problem, Vec::new(), None, n);
    let centering = Centering { barrier: &barrier, objective: Objective { c: &problem.objective, smooth: problem.smooth.as_deref() } };
    let obj0 = centering.objective.value(&x).unwrap_or(0.0);
    let mut tau = (barrier.nu / (1.0 + obj0.abs())).max(1e-2);
    let mut stalls = 0;
    let mut budget = opts.max_newton;
    let never = |_: &[f64]| false;
    loop {
        let stop = centering.center(&mut x, tau, &mut budget, &never);
        let steps_total = steps + opts.max_newton - budget;
        let obj = centering.objective.value(&x).unwrap_or(f64::NAN);
        let gap = barrier.nu / tau;
        if !obj.is_finite() || obj < -1e15 || x.iter().any(|v| v.abs() > 1e15) {
            return SolveOutcome { status: SolveStatus::Unbounded, x, objective: obj, gap, newton_steps: steps_total };
        }
        let done = gap <= opts.gap_tol * (1.0 + obj.abs());
        if matches!(stop, CenterStop::Stalled) {
            stalls += 1;
        }
        let broken = matches!(stop, CenterStop::Failed) || budget == 0 || stalls >= 3;
        if done || broken {
            let status = if gap <= opts.failure_gap_tol * (1.0 + obj.abs()) { SolveStatus::Optimal } else { SolveStatus::NumericalFailure };
            return SolveOutcome { status, x, objective: obj, gap, newton_steps: steps_total };
        }
        tau *= opts.tau_growth;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_lp() {
        // min -x - y  s.t. x + 2y ≤ 4, 3x + y ≤ 6, x, y ≥ 0  → x=1.6, y=1.2
        let mut p = ConicProblem::new(2);
        p.objective = vec![-1.0, -1.0];
        p.add_linear(Affine::constant(4.0).term(0, -1.0).term(1, -2.0));
        p.add_linear(Affine::constant(6.0).term(0, -3.0).term(1, -1.0));
        p.add_linear(Affine::var(0));
        p.add_linear(Affine::var(1));
        let r = BarrierSolver::default().solve(&p, Some(&[-5.0, 7.0]));
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - 1.6).abs() < 1e-7 && (r.x[1] - 1.2).abs() < 1e-7, "{:?}", r.x);
    }

    #[test]
    fn infeasible_lp() {
        let mut p = ConicProblem::new(1);
        p.objective = vec![1.0];
        p.add_linear(Affine::var(0).plus(-2.0));
        p.add_linear(Affine::constant(1.0).term(0, -1.0));
        assert_eq!(BarrierSolver::default().solve(&p, None).status, SolveStatus::Infeasible);
    }

    #[test]
    fn sdp_min_eigenvalue() {
        // max t s.t. A − tI ⪰ 0  → t = λ_min(A)
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let mut b = PsdBlock::new(2);
        b.constant = a.clone();
        b.add(0, 0, Some(0), -1.0);
        b.add(1, 1, Some(0), -1.0);
        let mut p = ConicProblem::new(1);
        p.objective = vec![-1.0];
        p.psd.push(b);
        let r = BarrierSolver::default().solve(&p, None);
        let lmin = (5.0 - 5.0f64.sqrt()) / 2.0;
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.x[0] - lmin).abs() < 1e-7);
    }

    #[test]
    fn rotated_cone_sqrt() {
        // max u s.t. u² ≤ 4·1  → u = 2
        let mut p = ConicProblem::new(1);
        p.objective = vec![-1.0];
        p.cones.push(RotatedCone { a: Affine::constant(4.0), b: Affine::constant(1.0), c: Affine::var(0) });
        let r = BarrierSolver::default().solve(&p, None);
        assert!((r.x[0] - 2.0).abs() < 1e-7);
    }

    #[test]
    fn unbounded_lp() {
        let mut p = ConicProblem::new(1);
        p.objective = vec![-1.0];
        p.add_linear(Affine::var(0));
        assert_eq!(BarrierSolver::default().solve(&p, None).status, SolveStatus::Unbounded);
    }
}
