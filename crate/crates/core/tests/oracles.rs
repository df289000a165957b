//! Frozen reference values for the bundled scenario, computed independently
//! (closed forms and a separate dense-matrix implementation).

use approx::assert_relative_eq;

use vlp_core::channel;
use vlp_core::conic;
use vlp_core::feasible::{build_feasible_set, IlluminationMode};
use vlp_core::fisher;
use vlp_core::scenario::reference_scenario;
use vlp_core::signal::BasePulse;
use vlp_core::solver::SolveStatus;
use vlp_core::Vec3;

const EXACT: IlluminationMode = IlluminationMode::Exact;

#[test]
fn closed_form_derivative_energy() {
    let pulse = BasePulse::new(1e-6, 40e6).unwrap();
    let e = pulse.closed_form_energies();
    let t = 1e-6;
    let f = 40e6;
    let expected = 4.0 * std::f64::consts::PI.powi(2) / 3.0 * (1.0 / t + f * f * t);
    assert_relative_eq!(e.e1, expected, max_relative = 1e-12);
    assert_relative_eq!(e.e1, 2.106832e10, max_relative = 1e-6);
}

#[test]
fn gain_of_first_led() {
    let s = reference_scenario();
    let (alpha, los) = channel::lambertian_gain(&s.leds[0], s.receiver.location, s.receiver.orientation, s.receiver.detector_area).unwrap();
    assert!(los);
    assert_relative_eq!(alpha, 5.19986e-7, max_relative = 1e-5);
}

#[test]
fn illuminance_kernels_at_first_point() {
    let s = reference_scenario();
    let set = build_feasible_set(&s, EXACT).unwrap();
    let phi = &set.illumination[0].phi;
    for (got, want) in phi.iter().zip([3.76667, 0.150667, 0.150667, 0.0465021]) {
        assert_relative_eq!(*got, want, max_relative = 1e-5);
    }
}

#[test]
fn gamma_spectral_norm() {
    let g = fisher::assemble_gamma(&reference_scenario()).unwrap();
    assert_relative_eq!(g.spectral_norm(), 97.68692542808868, max_relative = 1e-9);
}

#[test]
fn uniform_crlbs() {
    let s = reference_scenario();
    let g = fisher::assemble_gamma(&s).unwrap();
    for (level, want) in [(100.0, 0.017671), (400.0, 0.0044176), (900.0, 0.0019634)] {
        assert_relative_eq!(fisher::crlb_value(&g, &[level; 4]).unwrap(), want, max_relative = 1e-4);
    }
    let sc = s.with_receiver_pose(Vec3::new(5.0, 5.0, 0.5), Vec3::new(0.0, 0.0, 1.0));
    let gc = fisher::assemble_gamma(&sc).unwrap();
    assert_relative_eq!(fisher::crlb_value(&gc, &[400.0; 4]).unwrap(), 0.0011386, max_relative = 1e-4);
}

#[test]
fn illumination_cliff() {
    let set = build_feasible_set(&reference_scenario(), EXACT).unwrap();
    assert_relative_eq!(4.0 * set.min_uniform_level(), 508.5420578086068, max_relative = 1e-9);
}

#[test]
fn nominal_optimum() {
    let s = reference_scenario();
    let g = fisher::assemble_gamma(&s).unwrap();
    let r = conic::solve_nominal_crlb(&s, &g, EXACT).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert_relative_eq!(r.objective, 0.00297743675, max_relative = 1e-7);
    for (got, want) in r.p_star.iter().zip([148.318, 768.458, 626.974, 56.25]) {
        assert_relative_eq!(*got, want, max_relative = 1e-4);
    }
}

#[test]
fn robust_optima() {
    let s = reference_scenario();
    let g = fisher::assemble_gamma(&s).unwrap();
    for (delta, want) in [(0.1, 0.00404772163), (0.2, 0.00642891432), (0.3, 0.0162545888), (0.35, 0.0715682)] {
        let r = conic::solve_robust_gamma(&s, &g, delta, EXACT).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal, "delta {delta}");
        assert_relative_eq!(r.objective, want, max_relative = 1e-5);
    }
    let r = conic::solve_robust_gamma(&s, &g, 0.4, EXACT).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
}

#[test]
fn worst_case_of_uniform() {
    let g = fisher::assemble_gamma(&reference_scenario()).unwrap();
    let r = conic::worst_case_crlb_fixed_p(&[400.0; 4], &g, 0.2).unwrap();
    assert_relative_eq!(r.objective, 0.0128203828, max_relative = 1e-6);
}

#[test]
fn min_power_totals() {
    let s = reference_scenario();
    let g = fisher::assemble_gamma(&s).unwrap();
    let table = [
        (0.045, 3139.67102),
        (0.05, 1897.05114),
        (0.06, 1331.58370),
        (0.08, 769.970222),
        (0.1, 536.841404),
        (0.12, 508.542058),
        (0.2, 508.542058),
    ];
    for (se, want) in table {
        let r = conic::solve_min_power(&s, &g, se * se, EXACT).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal, "sqrt eps {se}");
        assert_relative_eq!(r.objective, want, max_relative = 1e-6);
    }
    let r = conic::solve_min_power(&s, &g, 0.04 * 0.04, EXACT).unwrap();
    assert_eq!(r.status, SolveStatus::Infeasible);
}

#[test]
fn robust_min_power_totals() {
    let s = reference_scenario();
    let g = fisher::assemble_gamma(&s).unwrap();
    for (delta, want) in [(0.05, 579.909429), (0.1, 675.785560), (0.2, 1043.92489)] {
        let r = conic::solve_robust_min_power(&s, &g, delta, 0.01, EXACT).unwrap();
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_relative_eq!(r.objective, want, max_relative = 1e-6);
    }
}
