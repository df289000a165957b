//! Raised-cosine-modulated base pulse and its energy integrals.
//!
//! The base signal is `s̃(t) = (2/3)(1 − cos(2πt/T))(1 + cos(2π f t))` on `[0, T]`.
//! Closed forms are used for the energies and each one is cross-checked against
//! adaptive Gauss–Kronrod quadrature when the energies are built.

use crate::num::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SignalError {
    #[error("pulse width and center frequency must be positive (got T={pulse_width}, f={center_frequency})")]
    NonPositive { pulse_width: f64, center_frequency: f64 },
    #[error("center_frequency * pulse_width = {0} is not a positive integer")]
    NonIntegerCycles(f64),
    #[error("unit-power normalization fails: ∫s̃²/T = {0}")]
    NormalizationFailed(f64),
    #[error("closed-form {name} = {closed} disagrees with quadrature {quadrature}")]
    QuadratureMismatch { name: &'static str, closed: f64, quadrature: f64 },
}

/// `e1 = ∫(s̃′)²` [1/s], `e2 = ∫s̃²` [s], `e3 = ∫s̃ s̃′` [dimensionless].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalEnergies<T> {
    pub e1: T,
    pub e2: T,
    pub e3: T,
}

impl<T: Real> SignalEnergies<T> {
    /// `E₂ − E₃²/E₁`, the energy surviving an unknown clock offset.
    pub fn asynchronous_energy(&self) -> T {
        self.e2 - self.e3 * self.e3 / self.e1
    }
}

/// The shipped base pulse with pulse width `T` and center frequency `f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasePulse<T> {
    pub pulse_width: T,
    pub center_frequency: T,
}

impl<T: Real> BasePulse<T> {
    pub fn new(pulse_width: T, center_frequency: T) -> Result<Self, SignalError> {
        if !(pulse_width > T::zero() && center_frequency > T::zero()) {
            return Err(SignalError::NonPositive {
                pulse_width: pulse_width.to_f64_lossy(),
                center_frequency: center_frequency.to_f64_lossy(),
            });
        }
        let cycles = (center_frequency * pulse_width).to_f64_lossy();
        if cycles.round() < 1.0 || (cycles - cycles.round()).abs() > 1e-6 * cycles.max(1.0) {
            return Err(SignalError::NonIntegerCycles(cycles));
        }
        Ok(BasePulse { pulse_width, center_frequency })
    }

    pub fn value(&self, t: T) -> T {
        let two_pi = T::TAU();
        let a = two_pi * t / self.pulse_width;
        let b = two_pi * self.center_frequency * t;
        T::lit(2.0 / 3.0) * (T::one() - a.cos()) * (T::one() + b.cos())
    }

    pub fn derivative(&self, t: T) -> T {
        let two_pi = T::TAU();
        let wa = two_pi / self.pulse_width;
        let wb = two_pi * self.center_frequency;
        let (a, b) = (wa * t, wb * t);
        T::lit(2.0 / 3.0) * (wa * a.sin() * (T::one() + b.cos()) - (T::one() - a.cos()) * wb * b.sin())
    }

    /// Closed-form energies; valid when `f·T` is an integer ≥ 3.
    pub fn closed_form_energies(&self) -> SignalEnergies<T> {
        let ts = self.pulse_width;
        let f = self.center_frequency;
        let four_pi2_3 = T::lit(4.0) * T::PI() * T::PI() / T::lit(3.0);
        SignalEnergies { e1: four_pi2_3 * (T::one() / ts + f * f * ts), e2: ts, e3: T::zero() }
    }

    pub fn quadrature_energies(&self, rel_tol: T) -> SignalEnergies<T> {
        let ts = self.pulse_width;
        let panels = 4 * ((self.center_frequency * ts).to_f64_lossy().round() as usize + 1);
        let e1 = integrate(|t| self.derivative(t).powi(2), T::zero(), ts, panels, rel_tol);
        let e2 = integrate(|t| self.value(t).powi(2), T::zero(), ts, panels, rel_tol);
        let e3 = integrate(|t| self.value(t) * self.derivative(t), T::zero(), ts, panels, rel_tol);
        SignalEnergies { e1, e2, e3 }
    }

    /// Optical power of the base pulse, `∫s̃/T`.
    pub fn base_optical_power(&self) -> T {
        T::lit(2.0 / 3.0)
    }

    pub fn quadrature_optical_power(&self, rel_tol: T) -> T {
        let ts = self.pulse_width;
        let panels = 4 * ((self.center_frequency * ts).to_f64_lossy().round() as usize + 1);
        integrate(|t| self.value(t), T::zero(), ts, panels, rel_tol) / ts
    }
}

/// Relative tolerance of the closed-form vs quadrature cross-check.
fn check_tolerance<T: Real>() -> T {
    T::lit(1e-6).max(T::eps() * T::lit(200.0))
}

/// Energies of the base pulse, cross-checked against quadrature.
pub fn signal_energies<T: Real>(pulse_width: T, center_frequency: T) -> Result<SignalEnergies<T>, SignalError> {
    let pulse = BasePulse::new(pulse_width, center_frequency)?;
    let tol = check_tolerance::<T>();
    let quad = pulse.quadrature_energies(tol * T::lit(1e-3));
    let norm = quad.e2 / pulse_width;
    if (norm - T::one()).abs() > tol {
        return Err(SignalError::NormalizationFailed(norm.to_f64_lossy()));
    }
    let closed = pulse.closed_form_energies();
    let mismatch = |name, c: T, q: T, scale: T| {
        if (c - q).abs() > tol * scale {
            Err(SignalError::QuadratureMismatch { name, closed: c.to_f64_lossy(), quadrature: q.to_f64_lossy() })
        } else {
            Ok(())
        }
    };
    mismatch("E1", closed.e1, quad.e1, closed.e1)?;
    mismatch("E2", closed.e2, quad.e2, closed.e2)?;
    mismatch("E3", closed.e3, quad.e3, (closed.e1 * closed.e2).sqrt())?;
    Ok(closed)
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gauss_kronrod<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = (b - a) * T::lit(0.5);
    let mid = (a + b) * T::lit(0.5);
    let fc = f(mid);
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let pair = f(mid - dx) + f(mid + dx);
        kronrod += pair * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss += pair * T::lit(WG[j / 2]);
        }
    }
    (kronrod * half, (kronrod - gauss).abs() * half)
}

fn adapt<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T, depth: u32) -> T {
    let (k, err) = gauss_kronrod(f, a, b);
    if err <= tol || depth == 0 {
        return k;
    }
    let m = (a + b) * T::lit(0.5);
    let half_tol = tol * T::lit(0.5);
    adapt(f, a, m, half_tol, depth - 1) + adapt(f, m, b, half_tol, depth - 1)
}

/// Adaptive G7/K15 quadrature over `panels` equal sub-intervals.
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, panels: usize, rel_tol: T) -> T {
    let panels = panels.max(1);
    let width = (b - a) / T::lit(panels as f64);
    let coarse: T = (0..panels).map(|i| gauss_kronrod(&f, a + width * T::lit(i as f64), a + width * T::lit((i + 1) as f64)).0.abs()).sum();
    let rel_tol = rel_tol.max(T::eps() * T::lit(50.0));
    let abs_tol = (rel_tol * coarse).max(T::min_positive_value()) / T::lit(panels as f64);
    (0..panels).map(|i| adapt(&f, a + width * T::lit(i as f64), a + width * T::lit((i + 1) as f64), abs_tol, 24)).sum()
}
