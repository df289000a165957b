//! Fisher coefficients γ, the stacked matrix Γ, the FIM and the CRLB.

use crate::channel::{self, ChannelError};
use crate::geometry::{Mat3, Vec3};
use crate::num::Real;
use crate::scenario::{LedTransmitter, Scenario, SyncMode};
use crate::signal::{signal_energies, SignalEnergies, SignalError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FisherError {
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("power component {index} is negative ({value})")]
    NegativePower { index: usize, value: f64 },
    #[error("power vector has {got} components, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("unlocalizable: FIM is singular or indefinite (min eigenvalue {min_eigenvalue:e})")]
    Unlocalizable { min_eigenvalue: f64 },
}

/// Γ stored as one 3×3 block per LED: `blocks[i][k1][k2] = γ_{k1,k2}(i)`.
///
/// In the stacked 3NL×3 layout the entry at row `k1·NL + i`, column `k2` is
/// `blocks[i][k1][k2]`, so that `J(p) = (I₃ ⊗ p)ᵀ Γ`.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix<T> {
    pub blocks: Vec<Mat3<T>>,
    pub sync_mode: SyncMode,
}

impl<T: Real> GammaMatrix<T> {
    pub fn num_leds(&self) -> usize {
        self.blocks.len()
    }

    pub fn rows(&self) -> usize {
        3 * self.blocks.len()
    }

    /// Entry of the stacked 3NL×3 matrix.
    pub fn entry(&self, row: usize, col: usize) -> T {
        let nl = self.num_leds();
        self.blocks[row % nl].0[row / nl][col]
    }

    pub fn set_entry(&mut self, row: usize, col: usize, v: T) {
        let nl = self.num_leds();
        self.blocks[row % nl].0[row / nl][col] = v;
    }

    /// Row-major copy of the stacked 3NL×3 matrix.
    pub fn to_stacked(&self) -> Vec<T> {
        let r = self.rows();
        (0..r).flat_map(|row| (0..3).map(move |c| (row, c))).map(|(row, c)| self.entry(row, c)).collect()
    }

    pub fn from_stacked(nl: usize, data: &[T], sync_mode: SyncMode) -> Self {
        assert_eq!(data.len(), 9 * nl, "stacked Γ must be 3NL×3");
        let mut g = GammaMatrix { blocks: vec![Mat3::zero(); nl], sync_mode };
        for row in 0..3 * nl {
            for c in 0..3 {
                g.set_entry(row, c, data[row * 3 + c]);
            }
        }
        g
    }

    /// Spectral norm of the stacked matrix, `√λ_max(ΓᵀΓ)`.
    pub fn spectral_norm(&self) -> T {
        let mut gtg = Mat3::zero();
        for b in &self.blocks {
            gtg += b.transpose() * *b;
        }
        gtg.sym_eigen().values[2].max(T::zero()).sqrt()
    }

    pub fn scale(&self, s: T) -> Self {
        GammaMatrix { blocks: self.blocks.iter().map(|b| b.scale(s)).collect(), sync_mode: self.sync_mode }
    }

    /// Γ + Δ in the stacked layout.
    pub fn perturbed(&self, delta: &GammaMatrix<T>) -> Self {
        GammaMatrix { blocks: self.blocks.iter().zip(&delta.blocks).map(|(a, b)| *a + *b).collect(), sync_mode: self.sync_mode }
    }

    pub fn cast<U: Real>(&self) -> GammaMatrix<U> {
        GammaMatrix { blocks: self.blocks.iter().map(|b| b.cast()).collect(), sync_mode: self.sync_mode }
    }
}

/// Precomputed per-LED signal energies and constants for evaluating Γ at many poses.
#[derive(Debug, Clone)]
pub struct FisherModel<T> {
    pub leds: Vec<LedTransmitter<T>>,
    pub energies: Vec<SignalEnergies<T>>,
    /// R_p²/σ².
    pub snr_factor: T,
    pub detector_area: T,
    pub sync_mode: SyncMode,
}

impl<T: Real> FisherModel<T> {
    pub fn new(scenario: &Scenario<T>) -> Result<Self, FisherError> {
        let energies = scenario.leds.iter().map(|l| signal_energies(l.pulse_width, l.center_frequency)).collect::<Result<Vec<_>, _>>()?;
        let r = &scenario.receiver;
        Ok(FisherModel {
            leds: scenario.leds.clone(),
            energies,
            snr_factor: r.responsivity * r.responsivity / r.noise_psd,
            detector_area: r.detector_area,
            sync_mode: r.sync_mode,
        })
    }

    /// 3×3 block of γ_{k1,k2}(i) for LED `i` at the given pose.
    pub fn gamma_block(&self, i: usize, location: Vec3<T>, orientation: Vec3<T>) -> Result<Mat3<T>, FisherError> {
        let g = channel::channel_gain(&self.leds[i], location, orientation, self.detector_area)?;
        let e = &self.energies[i];
        let c = self.snr_factor;
        Ok(match self.sync_mode {
            SyncMode::Asynchronous => g.grad_alpha.outer(g.grad_alpha).scale(c * e.asynchronous_energy()),
            SyncMode::Synchronous => {
                let aa = g.grad_alpha.outer(g.grad_alpha).scale(e.e2);
                let tt = g.grad_tau.outer(g.grad_tau).scale(e.e1 * g.alpha * g.alpha);
                let at = g.grad_alpha.outer(g.grad_tau);
                let cross = (at + at.transpose()).scale(e.e3 * g.alpha);
                (aa + tt - cross).scale(c)
            }
        })
    }

    pub fn gamma_at(&self, location: Vec3<T>, orientation: Vec3<T>) -> Result<GammaMatrix<T>, FisherError> {
        let blocks = (0..self.leds.len()).map(|i| self.gamma_block(i, location, orientation)).collect::<Result<_, _>>()?;
        Ok(GammaMatrix { blocks, sync_mode: self.sync_mode })
    }
}

/// γ_{k1,k2}(i) for the scenario's receiver pose; `k1`, `k2` are 0-based axes.
pub fn gamma_entry<T: Real>(led_index: usize, k1: usize, k2: usize, scenario: &Scenario<T>) -> Result<T, FisherError> {
    let model = FisherModel::new(scenario)?;
    let b = model.gamma_block(led_index, scenario.receiver.location, scenario.receiver.orientation)?;
    Ok(b.0[k1][k2])
}

pub fn assemble_gamma<T: Real>(scenario: &Scenario<T>) -> Result<GammaMatrix<T>, FisherError> {
    FisherModel::new(scenario)?.gamma_at(scenario.receiver.location, scenario.receiver.orientation)
}

/// Symmetric 3×3 Fisher information matrix in 1/m².
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Fim<T>(pub Mat3<T>);

fn check_power<T: Real>(nl: usize, p: &[T]) -> Result<(), FisherError> {
    if p.len() != nl {
        return Err(FisherError::Dimension { expected: nl, got: p.len() });
    }
    if let Some((index, &v)) = p.iter().enumerate().find(|(_, v)| !(**v >= T::zero())) {
        return Err(FisherError::NegativePower { index, value: v.to_f64_lossy() });
    }
    Ok(())
}

/// `(I₃ ⊗ p)ᵀ Γ` without symmetrization.
pub fn fim_raw<T: Real>(gamma: &GammaMatrix<T>, p: &[T]) -> Mat3<T> {
    let mut j = Mat3::zero();
    for (b, &pi) in gamma.blocks.iter().zip(p) {
        j += b.scale(pi);
    }
    j
}

/// J(p); the symmetric part is taken so perturbed (nonsymmetric) Γ still yield a proper FIM.
pub fn fim<T: Real>(gamma: &GammaMatrix<T>, p: &[T]) -> Result<Fim<T>, FisherError> {
    check_power(gamma.num_leds(), p)?;
    Ok(Fim(fim_raw(gamma, p).sym()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crlb<T> {
    /// trace(J⁻¹) in m².
    pub total: T,
    /// Diagonal of J⁻¹.
    pub per_axis: [T; 3],
    pub min_eigenvalue: T,
}

impl<T: Real> Crlb<T> {
    /// √trace(J⁻¹) in m.
    pub fn rmse(&self) -> T {
        self.total.sqrt()
    }
}

fn singular_threshold<T: Real>() -> T {
    T::lit(1e-14).max(T::eps() * T::lit(10.0))
}

/// J⁻¹ via the symmetric eigendecomposition, with the singularity test.
pub fn fim_inverse<T: Real>(j: &Fim<T>) -> Result<(Mat3<T>, T), FisherError> {
    let eig = j.0.sym_eigen();
    let scale = eig.values.iter().fold(T::zero(), |a, v| a.max(v.abs()));
    let min = eig.values[0];
    if !(min > singular_threshold::<T>() * scale) || !min.is_finite() {
        return Err(FisherError::Unlocalizable { min_eigenvalue: min.to_f64_lossy() });
    }
    let mut inv = Mat3::zero();
    for k in 0..3 {
        let v = eig.vectors.column(k);
        inv += v.outer(v).scale(T::one() / eig.values[k]);
    }
    Ok((inv, min))
}

pub fn crlb<T: Real>(j: &Fim<T>) -> Result<Crlb<T>, FisherError> {
    let (inv, min) = fim_inverse(j)?;
    let per_axis = [inv.0[0][0], inv.0[1][1], inv.0[2][2]];
    Ok(Crlb { total: per_axis[0] + per_axis[1] + per_axis[2], per_axis, min_eigenvalue: min })
}

/// trace(J(p)⁻¹) in one call.
pub fn crlb_value<T: Real>(gamma: &GammaMatrix<T>, p: &[T]) -> Result<T, FisherError> {
    Ok(crlb(&fim(gamma, p)?)?.total)
}

/// Value, gradient and Hessian of p ↦ trace(J(p)⁻¹).
#[derive(Debug, Clone, PartialEq)]
pub struct CrlbDerivatives<T> {
    pub value: T,
    pub gradient: Vec<T>,
    /// Row-major NL×NL.
    pub hessian: Vec<T>,
}

pub fn crlb_derivatives<T: Real>(gamma: &GammaMatrix<T>, p: &[T]) -> Result<CrlbDerivatives<T>, FisherError> {
    let j = fim(gamma, p)?;
    let (inv, _) = fim_inverse(&j)?;
    let nl = gamma.num_leds();
    let g: Vec<Mat3<T>> = gamma.blocks.iter().map(|b| b.sym()).collect();
    // X_i = J⁻¹ G_i J⁻¹, ∂f/∂p_i = −tr(X_i), ∂²f/∂p_i∂p_k = 2 tr(X_i G_k J⁻¹).
    let x: Vec<Mat3<T>> = g.iter().map(|gi| inv * *gi * inv).collect();
    let gradient = x.iter().map(|xi| -xi.trace()).collect();
    let gk_inv: Vec<Mat3<T>> = g.iter().map(|gk| *gk * inv).collect();
    let mut hessian = vec![T::zero(); nl * nl];
    for i in 0..nl {
        for k in i..nl {
            let h = T::lit(2.0) * (x[i] * gk_inv[k]).trace();
            hessian[i * nl + k] = h;
            hessian[k * nl + i] = h;
        }
    }
    Ok(CrlbDerivatives { value: inv.trace(), gradient, hessian })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_and_diagonal_crlb() {
        let c = crlb(&Fim(Mat3::<f64>::identity())).unwrap();
        assert!((c.total - 3.0).abs() < 1e-15);
        let c = crlb(&Fim(Mat3::diag([2.0f64, 4.0, 8.0]))).unwrap();
        assert!((c.total - 0.875).abs() < 1e-15);
        assert!(matches!(crlb(&Fim(Mat3::diag([1.0, 1.0, 0.0]))), Err(FisherError::Unlocalizable { .. })));
    }

    #[test]
    fn stacked_layout_roundtrip() {
        let data: Vec<f64> = (0..18).map(|v| v as f64).collect();
        let g = GammaMatrix::from_stacked(2, &data, SyncMode::Asynchronous);
        assert_eq!(g.entry(3, 1), 10.0);
        // row 3 = k1 1, LED 1
        assert_eq!(g.blocks[1].0[1][1], 10.0);
        assert_eq!(g.to_stacked(), data);
    }

    #[test]
    fn negative_power_rejected() {
        let g = GammaMatrix { blocks: vec![Mat3::<f64>::identity()], sync_mode: SyncMode::Asynchronous };
        assert!(matches!(fim(&g, &[-1.0]), Err(FisherError::NegativePower { index: 0, .. })));
        assert!(matches!(fim(&g, &[1.0, 2.0]), Err(FisherError::Dimension { .. })));
    }
}
