//! Lambertian line-of-sight channel, its receiver-location gradient, the TOA
//! gradient and the illuminance kernels.

use crate::geometry::Vec3;
use crate::num::Real;
use crate::scenario::{LedTransmitter, Rect};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("receiver location coincides with the LED location")]
    Coincident,
    #[error("illuminance point at z={point_z} is not strictly below the LED at z={led_z}")]
    PointNotBelowLed { point_z: f64, led_z: f64 },
}

/// Gain of one LED at one receiver pose. `los` is false when the receiver is
/// behind the LED plane or faces away; `alpha` and the gradient are then zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelGain<T> {
    pub alpha: T,
    pub grad_alpha: Vec3<T>,
    pub grad_tau: Vec3<T>,
    pub los: bool,
}

struct Geometry<T> {
    d: Vec3<T>,
    dist: T,
    dnt: T,
    dnr: T,
    coeff: T,
    m: T,
}

fn geometry<T: Real>(
    led: &LedTransmitter<T>,
    receiver_loc: Vec3<T>,
    receiver_orient: Vec3<T>,
    detector_area: T,
) -> Result<Geometry<T>, ChannelError> {
    let d = receiver_loc - led.location;
    let dist = d.norm();
    if !(dist > T::zero()) {
        return Err(ChannelError::Coincident);
    }
    let m = led.lambertian_order;
    Ok(Geometry { d, dist, dnt: d.dot(led.orientation), dnr: d.dot(receiver_orient), coeff: (m + T::one()) * detector_area / T::TAU(), m })
}

impl<T: Real> Geometry<T> {
    fn los(&self) -> bool {
        self.dnt > T::zero() && self.dnr < T::zero()
    }

    fn alpha(&self) -> T {
        -self.coeff * self.dnt.powf(self.m) * self.dnr / self.dist.powf(self.m + T::lit(3.0))
    }

    fn gradient(&self, led_orient: Vec3<T>, receiver_orient: Vec3<T>) -> Vec3<T> {
        let m = self.m;
        let a = self.dnt.powf(m - T::one()) / self.dist.powf(m + T::lit(3.0));
        let b = (m + T::lit(3.0)) * self.dnt.powf(m) * self.dnr / self.dist.powf(m + T::lit(5.0));
        let mut g = Vec3::zero();
        for k in 0..3 {
            let bracket = a * (m * led_orient[k] * self.dnr + receiver_orient[k] * self.dnt) - b * self.d[k];
            g[k] = -self.coeff * bracket;
        }
        g
    }
}

/// Lambertian gain α of `led` at the receiver pose; zero outside line of sight.
pub fn lambertian_gain<T: Real>(
    led: &LedTransmitter<T>,
    receiver_loc: Vec3<T>,
    receiver_orient: Vec3<T>,
    detector_area: T,
) -> Result<(T, bool), ChannelError> {
    let g = geometry(led, receiver_loc, receiver_orient, detector_area)?;
    if g.los() {
        Ok((g.alpha(), true))
    } else {
        Ok((T::zero(), false))
    }
}

/// ∂α/∂l_r, analytic; zero outside line of sight.
pub fn gain_gradient<T: Real>(
    led: &LedTransmitter<T>,
    receiver_loc: Vec3<T>,
    receiver_orient: Vec3<T>,
    detector_area: T,
) -> Result<Vec3<T>, ChannelError> {
    let g = geometry(led, receiver_loc, receiver_orient, detector_area)?;
    if g.los() {
        Ok(g.gradient(led.orientation, receiver_orient))
    } else {
        Ok(Vec3::zero())
    }
}

/// ∂τ/∂l_r = (l_r − l_t) / (c‖l_r − l_t‖).
pub fn toa_gradient<T: Real>(led_loc: Vec3<T>, receiver_loc: Vec3<T>) -> Result<Vec3<T>, ChannelError> {
    let d = receiver_loc - led_loc;
    let n = d.norm();
    if !(n > T::zero()) {
        return Err(ChannelError::Coincident);
    }
    Ok(d.scale(T::one() / (n * T::lit(SPEED_OF_LIGHT))))
}

pub fn channel_gain<T: Real>(
    led: &LedTransmitter<T>,
    receiver_loc: Vec3<T>,
    receiver_orient: Vec3<T>,
    detector_area: T,
) -> Result<ChannelGain<T>, ChannelError> {
    let g = geometry(led, receiver_loc, receiver_orient, detector_area)?;
    let grad_tau = toa_gradient(led.location, receiver_loc)?;
    if g.los() {
        Ok(ChannelGain { alpha: g.alpha(), grad_alpha: g.gradient(led.orientation, receiver_orient), grad_tau, los: true })
    } else {
        Ok(ChannelGain { alpha: T::zero(), grad_alpha: Vec3::zero(), grad_tau, los: false })
    }
}

/// Horizontal illuminance per √W of electrical power at `point`, φ_i(x).
pub fn illuminance_kernel<T: Real>(led: &LedTransmitter<T>, point: Vec3<T>, base_optical_power: T) -> Result<T, ChannelError> {
    let drop = led.location.z() - point.z();
    if !(drop > T::zero()) {
        return Err(ChannelError::PointNotBelowLed { point_z: point.z().to_f64_lossy(), led_z: led.location.z().to_f64_lossy() });
    }
    let d = point - led.location;
    let dnt = d.dot(led.orientation);
    if dnt <= T::zero() {
        return Ok(T::zero());
    }
    let m = led.lambertian_order;
    let coeff = (m + T::one()) * led.luminous_efficacy * base_optical_power / T::TAU();
    Ok(coeff * dnt.powf(m) * drop / d.norm().powf(m + T::lit(3.0)))
}

/// Per-LED kernels φ_i(x) for every LED.
pub fn illuminance_vector<T: Real>(leds: &[LedTransmitter<T>], point: Vec3<T>, base_optical_power: &[T]) -> Result<Vec<T>, ChannelError> {
    leds.iter().zip(base_optical_power).map(|(l, &b)| illuminance_kernel(l, point, b)).collect()
}

/// Total illuminance Σ √P_i φ_i(x) at `point`.
pub fn total_illuminance<T: Real>(
    leds: &[LedTransmitter<T>],
    point: Vec3<T>,
    p: &[T],
    base_optical_power: &[T],
) -> Result<T, ChannelError> {
    let phi = illuminance_vector(leds, point, base_optical_power)?;
    Ok(phi.iter().zip(p).map(|(&f, &pi)| pi.max(T::zero()).sqrt() * f).sum())
}

/// Midpoint-rule average of φ_i over `region` on an `nx × ny` grid.
pub fn average_illuminance_coefficients<T: Real>(
    leds: &[LedTransmitter<T>],
    region: &Rect<T>,
    grid: (usize, usize),
    base_optical_power: &[T],
) -> Result<Vec<T>, ChannelError> {
    let (nx, ny) = (grid.0.max(1), grid.1.max(1));
    let hx = (region.x[1] - region.x[0]) / T::lit(nx as f64);
    let hy = (region.y[1] - region.y[0]) / T::lit(ny as f64);
    let cells = T::lit((nx * ny) as f64);
    let mut out = Vec::with_capacity(leds.len());
    for (led, &base) in leds.iter().zip(base_optical_power) {
        let mut acc = T::zero();
        for ix in 0..nx {
            let x = region.x[0] + hx * (T::lit(ix as f64) + T::lit(0.5));
            for iy in 0..ny {
                let y = region.y[0] + hy * (T::lit(iy as f64) + T::lit(0.5));
                acc += illuminance_kernel(led, Vec3::new(x, y, region.z), base)?;
            }
        }
        out.push(acc / cells);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn led(loc: [f64; 3]) -> LedTransmitter<f64> {
        LedTransmitter {
            location: Vec3::from_f64(loc),
            orientation: Vec3::new(0.0, 0.0, -1.0),
            lambertian_order: 1.0,
            luminous_efficacy: 284.0,
            center_frequency: 40e6,
            pulse_width: 1e-6,
        }
    }

    #[test]
    fn on_axis_gain_and_gradient() {
        let l = led([0.0, 0.0, 1.0]);
        let up = Vec3::new(0.0, 0.0, 1.0);
        let (a, los) = lambertian_gain(&l, Vec3::zero(), up, 1e-4).unwrap();
        assert!(los);
        assert!((a - 1e-4 / std::f64::consts::PI).abs() < 1e-18);
        let g = gain_gradient(&l, Vec3::zero(), up, 1e-4).unwrap();
        assert!(g.x().abs() < 1e-20 && g.y().abs() < 1e-20);
        assert!((g.z() - 2e-4 / std::f64::consts::PI).abs() < 1e-17);
    }

    #[test]
    fn table_i_gain_matches_reference_value() {
        let n_r = Vec3::new(0.5, 0.0, 0.75f64.sqrt());
        let (a, _) = lambertian_gain(&led([1.0, 1.0, 5.0]), Vec3::new(3.0, 3.0, 0.5), n_r, 1e-4).unwrap();
        assert!((a - 5.19986e-7).abs() / 5.19986e-7 < 1e-5, "alpha = {a}");
    }

    #[test]
    fn toa_gradient_3_4_5() {
        let g = toa_gradient(Vec3::zero(), Vec3::new(3.0, 4.0, 0.0)).unwrap();
        assert!((g.x() * SPEED_OF_LIGHT - 0.6).abs() < 1e-15);
        assert!((g.y() * SPEED_OF_LIGHT - 0.8).abs() < 1e-15);
        assert!(toa_gradient(Vec3::<f64>::zero(), Vec3::zero()).is_err());
    }

    #[test]
    fn behind_and_orthogonal_have_no_los() {
        let l = led([0.0, 0.0, 1.0]);
        let (a, los) = lambertian_gain(&l, Vec3::new(0.0, 0.0, 2.0), Vec3::new(0.0, 0.0, 1.0), 1e-4).unwrap();
        assert_eq!((a, los), (0.0, false));
        let (a, _) = lambertian_gain(&l, Vec3::zero(), Vec3::new(1.0, 0.0, 0.0), 1e-4).unwrap();
        assert_eq!(a, 0.0);
    }

    #[test]
    fn on_axis_illuminance_kernel() {
        let phi = illuminance_kernel(&led([1.0, 1.0, 5.0]), Vec3::new(1.0, 1.0, 1.0), 2.0 / 3.0).unwrap();
        let expect = 2.0 * 284.0 * (2.0 / 3.0) / std::f64::consts::TAU / 16.0;
        assert!((phi - expect).abs() < 1e-12);
        assert!(illuminance_kernel(&led([1.0, 1.0, 5.0]), Vec3::new(1.0, 1.0, 5.0), 2.0 / 3.0).is_err());
    }
}
