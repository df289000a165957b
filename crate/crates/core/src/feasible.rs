//! Power and illumination constraint sets, membership tests and uniform baselines.

use std::fmt;

use crate::channel::{self, ChannelError};
use crate::fisher::{self, FisherError, GammaMatrix};
use crate::num::Real;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IlluminationMode {
    /// Σ √P_i φ_i ≥ Ẽ, solved through u_i² ≤ P_i cones.
    #[default]
    Exact,
    /// φᵀp ≥ Ẽ² / (1ᵀφ), a linear superset.
    Relaxed,
}

impl fmt::Display for IlluminationMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IlluminationMode::Exact => "exact",
            IlluminationMode::Relaxed => "relaxed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IlluminationKind {
    Point(usize),
    Average,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IlluminationConstraint<T> {
    pub kind: IlluminationKind,
    /// φ-vector in lx/√W.
    pub phi: Vec<T>,
    /// Ẽ in lx.
    pub threshold: T,
}

impl<T: Real> IlluminationConstraint<T> {
    /// Right-hand side Ẽ²/(1ᵀφ) of the relaxed half-space φᵀp ≥ ·.
    pub fn relaxed_rhs(&self) -> T {
        let s: T = self.phi.iter().copied().sum();
        self.threshold * self.threshold / s
    }

    pub fn illuminance(&self, p: &[T]) -> T {
        self.phi.iter().zip(p).map(|(&f, &pi)| f * pi.max(T::zero()).sqrt()).sum()
    }

    pub fn linear_form(&self, p: &[T]) -> T {
        self.phi.iter().zip(p).map(|(&f, &pi)| f * pi).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleSet<T> {
    pub p_lb: Vec<T>,
    pub p_ub: Vec<T>,
    pub total_power: Option<T>,
    pub illumination: Vec<IlluminationConstraint<T>>,
    pub mode: IlluminationMode,
}

/// Which of the four constraint families a violation belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConstraintId {
    LowerBound(usize),
    UpperBound(usize),
    TotalPower,
    Point(usize),
    Average,
}

impl ConstraintId {
    pub fn family(&self) -> &'static str {
        match self {
            ConstraintId::LowerBound(_) | ConstraintId::UpperBound(_) => "P1",
            ConstraintId::TotalPower => "P2",
            ConstraintId::Point(_) => "P3",
            ConstraintId::Average => "P4",
        }
    }
}

impl fmt::Display for ConstraintId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConstraintId::LowerBound(i) => write!(f, "P1 lower power bound of LED {i}"),
            ConstraintId::UpperBound(i) => write!(f, "P1 upper power bound of LED {i}"),
            ConstraintId::TotalPower => write!(f, "P2 total electrical power"),
            ConstraintId::Point(j) => write!(f, "P3 illuminance at point {j}"),
            ConstraintId::Average => write!(f, "P4 average illuminance"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSlack<T> {
    pub id: ConstraintId,
    /// Positive when satisfied, in the constraint's own unit (W, W or lx).
    pub slack: T,
    pub tolerance: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityReport<T> {
    pub feasible: bool,
    pub violations: Vec<ConstraintSlack<T>>,
    pub slacks: Vec<ConstraintSlack<T>>,
}

/// Slack tolerance `1e-8·(1 + |threshold|)`.
pub fn tolerance<T: Real>(threshold: T) -> T {
    T::lit(1e-8) * (T::one() + threshold.abs())
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeasibleError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Signal(#[from] crate::signal::SignalError),
}

/// Base optical power P̃_opt of every LED's pulse.
pub fn base_optical_powers<T: Real>(scenario: &Scenario<T>) -> Result<Vec<T>, crate::signal::SignalError> {
    scenario.leds.iter().map(|l| l.pulse().map(|p| p.base_optical_power())).collect()
}

pub fn build_feasible_set<T: Real>(scenario: &Scenario<T>, mode: IlluminationMode) -> Result<FeasibleSet<T>, FeasibleError> {
    let base = base_optical_powers(scenario)?;
    let mut illumination = Vec::new();
    for (j, pt) in scenario.illumination.points.iter().enumerate() {
        illumination.push(IlluminationConstraint {
            kind: IlluminationKind::Point(j),
            phi: channel::illuminance_vector(&scenario.leds, pt.location, &base)?,
            threshold: pt.threshold,
        });
    }
    if let Some(avg) = &scenario.illumination.average {
        illumination.push(IlluminationConstraint {
            kind: IlluminationKind::Average,
            phi: channel::average_illuminance_coefficients(&scenario.leds, &avg.region, avg.grid, &base)?,
            threshold: avg.threshold,
        });
    }
    Ok(FeasibleSet {
        p_lb: scenario.power.p_lb.clone(),
        p_ub: scenario.power.p_ub.clone(),
        total_power: scenario.power.p_total,
        illumination,
        mode,
    })
}

impl<T: Real> FeasibleSet<T> {
    pub fn num_leds(&self) -> usize {
        self.p_lb.len()
    }

    pub fn with_mode(&self, mode: IlluminationMode) -> Self {
        FeasibleSet { mode, ..self.clone() }
    }

    /// P_s: the same set without the total-power constraint.
    pub fn without_total(&self) -> Self {
        FeasibleSet { total_power: None, ..self.clone() }
    }

    pub fn with_total(&self, total: T) -> Self {
        FeasibleSet { total_power: Some(total), ..self.clone() }
    }

    pub fn slacks(&self, p: &[T]) -> Vec<ConstraintSlack<T>> {
        let mut out = Vec::new();
        for i in 0..self.num_leds() {
            let v = p.get(i).copied().unwrap_or(T::nan());
            out.push(ConstraintSlack { id: ConstraintId::LowerBound(i), slack: v - self.p_lb[i], tolerance: tolerance(self.p_lb[i]) });
            out.push(ConstraintSlack { id: ConstraintId::UpperBound(i), slack: self.p_ub[i] - v, tolerance: tolerance(self.p_ub[i]) });
        }
        if let Some(total) = self.total_power {
            let s: T = p.iter().copied().sum();
            out.push(ConstraintSlack { id: ConstraintId::TotalPower, slack: total - s, tolerance: tolerance(total) });
        }
        for c in &self.illumination {
            let id = match c.kind {
                IlluminationKind::Point(j) => ConstraintId::Point(j),
                IlluminationKind::Average => ConstraintId::Average,
            };
            let (value, rhs) = match self.mode {
                IlluminationMode::Exact => (c.illuminance(p), c.threshold),
                IlluminationMode::Relaxed => (c.linear_form(p), c.relaxed_rhs()),
            };
            out.push(ConstraintSlack { id, slack: value - rhs, tolerance: tolerance(rhs) });
        }
        out
    }

    pub fn is_feasible(&self, p: &[T]) -> FeasibilityReport<T> {
        let slacks = self.slacks(p);
        let violations: Vec<_> = slacks.iter().filter(|s| !(s.slack >= -s.tolerance)).cloned().collect();
        FeasibilityReport { feasible: violations.is_empty() && p.len() == self.num_leds(), violations, slacks }
    }

    /// Smallest uniform level `P·1` meeting the box lower bounds and all
    /// illumination constraints (both modes give the same value).
    pub fn min_uniform_level(&self) -> T {
        let mut level = self.p_lb.iter().copied().fold(T::zero(), T::max);
        for c in &self.illumination {
            let s: T = c.phi.iter().copied().sum();
            let need = c.threshold / s;
            level = level.max(need * need);
        }
        level
    }
}

pub fn uniform_allocation_for_budget<T: Real>(total: T, nl: usize) -> Vec<T> {
    vec![total / T::lit(nl as f64); nl]
}

/// P_i = trace(((I₃⊗1)ᵀΓ)⁻¹)/ε for every LED.
pub fn uniform_allocation_for_accuracy<T: Real>(gamma: &GammaMatrix<T>, eps: T) -> Result<Vec<T>, FisherError> {
    let ones = vec![T::one(); gamma.num_leds()];
    let c = fisher::crlb_value(gamma, &ones)?;
    Ok(vec![c / eps; gamma.num_leds()])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::reference_scenario;

    #[test]
    fn reference_point_kernel_and_relaxation() {
        let set = build_feasible_set(&reference_scenario(), IlluminationMode::Exact).unwrap();
        let phi = &set.illumination[0].phi;
        let expect = [3.76667, 0.150667, 0.150667, 0.0465021];
        for (a, b) in phi.iter().zip(expect) {
            assert!((a - b).abs() / b < 1e-5, "{a} vs {b}");
        }
        assert!((set.illumination[0].relaxed_rhs() - 218.7).abs() < 0.1);
    }

    #[test]
    fn lower_bound_point_is_p3_feasible_and_zero_is_not() {
        let set = build_feasible_set(&reference_scenario(), IlluminationMode::Exact).unwrap();
        let p = vec![56.25; 4];
        let r = set.is_feasible(&p);
        assert!(r.violations.iter().all(|v| v.id.family() != "P3"));
        let z = set.is_feasible(&[0.0; 4]);
        assert!(z.violations.iter().any(|v| v.id.family() == "P3"));
        let hi = set.is_feasible(&[901.0, 400.0, 400.0, 400.0]);
        assert_eq!(hi.violations[0].id, ConstraintId::UpperBound(0));
    }

    #[test]
    fn uniform_budget() {
        assert_eq!(uniform_allocation_for_budget(1600.0, 4), vec![400.0; 4]);
        assert_eq!(uniform_allocation_for_budget(0.0, 4), vec![0.0; 4]);
    }
}
