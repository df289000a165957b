//! Scenario data model, scenario-file loading and invariant checks.
//!
//! All quantities are stored in SI. The file format is TOML with unit-tagged
//! strings; see `scenarios/README.md` in the repository for the schema.

use std::path::Path;

use serde::Deserialize;

use crate::geometry::Vec3;
use crate::num::Real;
use crate::signal::{BasePulse, SignalError};
use crate::units::{Dimension, Quantity, UnitError};

/// Orientation vectors in a file are renormalized when within this distance of unit norm.
pub const FILE_NORM_TOLERANCE: f64 = 1e-3;
/// Tolerance of the unit-norm invariant on constructed scenarios.
pub const UNIT_NORM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read scenario file: {0}")]
    Io(#[from] std::io::Error),
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unit error in `{field}`: {source}")]
    Unit { field: String, source: UnitError },
    #[error("invalid `{field}`: {message}")]
    Invariant { field: String, message: String },
    #[error("scenario infeasible: {0}")]
    Infeasible(String),
    #[error("signal model error in `{field}`: {source}")]
    Signal { field: String, source: SignalError },
}

fn invariant(field: impl Into<String>, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Invariant { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Deserialize, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SyncMode {
    Synchronous,
    #[default]
    Asynchronous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LedTransmitter<T> {
    pub location: Vec3<T>,
    pub orientation: Vec3<T>,
    pub lambertian_order: T,
    /// κ in lm/W.
    pub luminous_efficacy: T,
    pub center_frequency: T,
    pub pulse_width: T,
}

impl<T: Real> LedTransmitter<T> {
    pub fn pulse(&self) -> Result<BasePulse<T>, SignalError> {
        BasePulse::new(self.pulse_width, self.center_frequency)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Receiver<T> {
    pub location: Vec3<T>,
    pub orientation: Vec3<T>,
    pub responsivity: T,
    pub detector_area: T,
    pub noise_psd: T,
    pub sync_mode: SyncMode,
}

/// Unit normal from polar angle θ (from +z) and azimuth φ.
pub fn orientation_from_angles<T: Real>(polar: T, azimuth: T) -> Vec3<T> {
    Vec3::new(polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos())
}

/// Inverse of [`orientation_from_angles`]; returns `(θ, φ)`.
pub fn angles_from_orientation<T: Real>(n: Vec3<T>) -> (T, T) {
    let polar = n.z().max(-T::one()).min(T::one()).acos();
    let azimuth = n.y().atan2(n.x());
    (polar, azimuth)
}

/// Axis-aligned horizontal rectangle at a fixed height.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect<T> {
    pub x: [T; 2],
    pub y: [T; 2],
    pub z: T,
}

impl<T: Real> Rect<T> {
    pub fn area(&self) -> T {
        (self.x[1] - self.x[0]) * (self.y[1] - self.y[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointConstraint<T> {
    pub location: Vec3<T>,
    pub threshold: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AverageConstraint<T> {
    pub region: Rect<T>,
    pub threshold: T,
    pub grid: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IlluminationSpec<T> {
    pub points: Vec<PointConstraint<T>>,
    pub average: Option<AverageConstraint<T>>,
}

/// Electrical power bounds in W.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpec<T> {
    pub p_lb: Vec<T>,
    pub p_ub: Vec<T>,
    pub p_total: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario<T> {
    pub leds: Vec<LedTransmitter<T>>,
    pub receiver: Receiver<T>,
    pub illumination: IlluminationSpec<T>,
    pub power: PowerSpec<T>,
}

/// Inverts `P_opt = √P · P̃_opt`: returns `(p_opt / P̃_opt)²`.
pub fn convert_optical_to_electrical<T: Real>(p_opt: T, base_optical_power: T) -> Result<T, ScenarioError> {
    if !(base_optical_power > T::zero()) {
        return Err(invariant("base_optical_power", "must be positive"));
    }
    if p_opt < T::zero() {
        return Err(invariant("p_opt", "optical power must be non-negative"));
    }
    Ok((p_opt / base_optical_power).powi(2))
}

pub fn convert_electrical_to_optical<T: Real>(p: T, base_optical_power: T) -> T {
    p.sqrt() * base_optical_power
}

fn check_unit<T: Real>(field: &str, v: Vec3<T>) -> Result<(), ScenarioError> {
    let n = v.norm().to_f64_lossy();
    if (n - 1.0).abs() > UNIT_NORM_TOLERANCE.max(T::eps().to_f64_lossy() * 8.0) {
        return Err(invariant(field, format!("orientation not unit norm (‖n‖ = {n})")));
    }
    Ok(())
}

fn positive<T: Real>(field: &str, v: T) -> Result<(), ScenarioError> {
    if v > T::zero() && v.is_finite() {
        Ok(())
    } else {
        Err(invariant(field, format!("must be positive and finite (got {v})")))
    }
}

impl<T: Real> Scenario<T> {
    pub fn num_leds(&self) -> usize {
        self.leds.len()
    }

    /// Checks every type invariant; the loader calls this before returning.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let nl = self.leds.len();
        if nl == 0 {
            return Err(invariant("leds", "at least one LED is required"));
        }
        for (i, led) in self.leds.iter().enumerate() {
            let f = |name: &str| format!("leds[{i}].{name}");
            check_unit(&f("orientation"), led.orientation)?;
            if !(led.lambertian_order >= T::one()) {
                return Err(invariant(f("lambertian_order"), "must be ≥ 1"));
            }
            positive(&f("luminous_efficacy"), led.luminous_efficacy)?;
            positive(&f("pulse_width"), led.pulse_width)?;
            positive(&f("center_frequency"), led.center_frequency)?;
            led.pulse().map_err(|source| ScenarioError::Signal { field: f("center_frequency"), source })?;
        }
        let r = &self.receiver;
        check_unit("receiver.orientation", r.orientation)?;
        positive("receiver.responsivity", r.responsivity)?;
        positive("receiver.detector_area", r.detector_area)?;
        positive("receiver.noise_psd", r.noise_psd)?;

        let lowest_led = self.leds.iter().map(|l| l.location.z()).fold(T::infinity(), T::min);
        for (j, pt) in self.illumination.points.iter().enumerate() {
            if !(pt.threshold >= T::zero()) {
                return Err(invariant(format!("illumination.points[{j}].threshold"), "must be ≥ 0"));
            }
            if !(pt.location.z() < lowest_led) {
                return Err(invariant(format!("illumination.points[{j}].location"), "must lie strictly below every LED"));
            }
        }
        if let Some(avg) = &self.illumination.average {
            if !(avg.threshold >= T::zero()) {
                return Err(invariant("illumination.average.threshold", "must be ≥ 0"));
            }
            if !(avg.region.x[1] > avg.region.x[0] && avg.region.y[1] > avg.region.y[0]) {
                return Err(invariant("illumination.average", "region must have positive area"));
            }
            if avg.grid.0 < 2 || avg.grid.1 < 2 {
                return Err(invariant("illumination.average.grid", "grid dimensions must be ≥ 2"));
            }
            if !(avg.region.z < lowest_led) {
                return Err(invariant("illumination.average.height", "must lie strictly below every LED"));
            }
        }

        let p = &self.power;
        if p.p_lb.len() != nl || p.p_ub.len() != nl {
            return Err(invariant("power", format!("bounds must have {nl} components")));
        }
        for i in 0..nl {
            if !(p.p_lb[i] >= T::zero()) {
                return Err(invariant(format!("power.lower[{i}]"), "must be ≥ 0"));
            }
            if !(p.p_lb[i] <= p.p_ub[i]) {
                return Err(invariant(
                    format!("power[{i}]"),
                    format!("lower bound {} exceeds upper bound {} for LED {i}", p.p_lb[i], p.p_ub[i]),
                ));
            }
        }
        if let Some(total) = p.p_total {
            let sum_lb: T = p.p_lb.iter().copied().sum();
            if total < sum_lb {
                return Err(ScenarioError::Infeasible(format!("total power {total} W is below the sum of lower bounds {sum_lb} W")));
            }
        }
        Ok(())
    }

    pub fn cast<U: Real>(&self) -> Scenario<U> {
        let c = crate::num::cast::<T, U>;
        Scenario {
            leds: self
                .leds
                .iter()
                .map(|l| LedTransmitter {
                    location: l.location.cast(),
                    orientation: l.orientation.cast(),
                    lambertian_order: c(l.lambertian_order),
                    luminous_efficacy: c(l.luminous_efficacy),
                    center_frequency: c(l.center_frequency),
                    pulse_width: c(l.pulse_width),
                })
                .collect(),
            receiver: Receiver {
                location: self.receiver.location.cast(),
                orientation: self.receiver.orientation.cast(),
                responsivity: c(self.receiver.responsivity),
                detector_area: c(self.receiver.detector_area),
                noise_psd: c(self.receiver.noise_psd),
                sync_mode: self.receiver.sync_mode,
            },
            illumination: IlluminationSpec {
                points: self
                    .illumination
                    .points
                    .iter()
                    .map(|p| PointConstraint { location: p.location.cast(), threshold: c(p.threshold) })
                    .collect(),
                average: self.illumination.average.as_ref().map(|a| AverageConstraint {
                    region: Rect { x: [c(a.region.x[0]), c(a.region.x[1])], y: [c(a.region.y[0]), c(a.region.y[1])], z: c(a.region.z) },
                    threshold: c(a.threshold),
                    grid: a.grid,
                }),
            },
            power: PowerSpec {
                p_lb: self.power.p_lb.iter().map(|&v| c(v)).collect(),
                p_ub: self.power.p_ub.iter().map(|&v| c(v)).collect(),
                p_total: self.power.p_total.map(c),
            },
        }
    }

    /// Same scenario with the receiver moved and reoriented.
    pub fn with_receiver_pose(&self, location: Vec3<T>, orientation: Vec3<T>) -> Self {
        let mut s = self.clone();
        s.receiver.location = location;
        s.receiver.orientation = orientation;
        s
    }
}

// ---- file schema ----

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileScenario {
    leds: Vec<FileLed>,
    receiver: FileReceiver,
    #[serde(default)]
    illumination: FileIllumination,
    power: FilePower,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileLed {
    location: Quantity,
    orientation: Vec<f64>,
    lambertian_order: Quantity,
    luminous_efficacy: Quantity,
    center_frequency: Quantity,
    pulse_width: Quantity,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileReceiver {
    location: Quantity,
    orientation: Option<Vec<f64>>,
    polar: Option<Quantity>,
    azimuth: Option<Quantity>,
    responsivity: Quantity,
    detector_area: Quantity,
    noise_psd: Quantity,
    #[serde(default)]
    sync: SyncMode,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FileIllumination {
    #[serde(default)]
    points: Vec<FilePoint>,
    average: Option<FileAverage>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePoint {
    location: Quantity,
    threshold: Quantity,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileAverage {
    x: Quantity,
    y: Quantity,
    height: Quantity,
    threshold: Quantity,
    #[serde(default = "default_grid")]
    grid: [usize; 2],
}

fn default_grid() -> [usize; 2] {
    [50, 50]
}

#[derive(Deserialize, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum BoundKind {
    Optical,
    Electrical,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(Quantity),
    Many(Vec<Quantity>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FilePower {
    bounds: BoundKind,
    lower: OneOrMany,
    upper: OneOrMany,
    total: Option<Quantity>,
}

fn unit_err(field: impl Into<String>) -> impl FnOnce(UnitError) -> ScenarioError {
    let field = field.into();
    move |source| ScenarioError::Unit { field, source }
}

fn scalar(q: &Quantity, dim: Dimension, field: &str) -> Result<f64, ScenarioError> {
    q.scalar(dim).map_err(unit_err(field))
}

fn vec3(q: &Quantity, dim: Dimension, field: &str) -> Result<Vec3<f64>, ScenarioError> {
    let v = q.vector(dim).map_err(unit_err(field))?;
    if v.len() != 3 {
        return Err(invariant(field, format!("expected 3 components, got {}", v.len())));
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn interval(q: &Quantity, field: &str) -> Result<[f64; 2], ScenarioError> {
    let v = q.vector(Dimension::Length).map_err(unit_err(field))?;
    if v.len() != 2 {
        return Err(invariant(field, "expected [min, max]"));
    }
    Ok([v[0], v[1]])
}

fn orientation(raw: &[f64], field: &str) -> Result<Vec3<f64>, ScenarioError> {
    if raw.len() != 3 {
        return Err(invariant(field, "expected 3 components"));
    }
    let v = Vec3::new(raw[0], raw[1], raw[2]);
    let n = v.norm();
    if !n.is_finite() || (n - 1.0).abs() > FILE_NORM_TOLERANCE {
        return Err(invariant(field, format!("orientation not unit norm (‖n‖ = {n})")));
    }
    Ok(v.scale(1.0 / n))
}

fn bound_list(b: &OneOrMany, nl: usize, field: &str) -> Result<Vec<f64>, ScenarioError> {
    match b {
        OneOrMany::One(q) => Ok(vec![scalar(q, Dimension::Power, field)?; nl]),
        OneOrMany::Many(qs) => {
            if qs.len() != nl {
                return Err(invariant(field, format!("expected {nl} entries, got {}", qs.len())));
            }
            qs.iter().enumerate().map(|(i, q)| scalar(q, Dimension::Power, &format!("{field}[{i}]"))).collect()
        }
    }
}

/// Parses and validates a scenario document.
pub fn from_toml_str(text: &str) -> Result<Scenario<f64>, ScenarioError> {
    let file: FileScenario = toml::from_str(text)?;
    let mut leds = Vec::with_capacity(file.leds.len());
    for (i, l) in file.leds.iter().enumerate() {
        let f = |name: &str| format!("leds[{i}].{name}");
        leds.push(LedTransmitter {
            location: vec3(&l.location, Dimension::Length, &f("location"))?,
            orientation: orientation(&l.orientation, &f("orientation"))?,
            lambertian_order: scalar(&l.lambertian_order, Dimension::Dimensionless, &f("lambertian_order"))?,
            luminous_efficacy: scalar(&l.luminous_efficacy, Dimension::Efficacy, &f("luminous_efficacy"))?,
            center_frequency: scalar(&l.center_frequency, Dimension::Frequency, &f("center_frequency"))?,
            pulse_width: scalar(&l.pulse_width, Dimension::Time, &f("pulse_width"))?,
        });
    }
    let nl = leds.len();

    let r = &file.receiver;
    let n_r = match (&r.orientation, &r.polar, &r.azimuth) {
        (Some(v), None, None) => orientation(v, "receiver.orientation")?,
        (None, Some(th), az) => {
            let th = scalar(th, Dimension::Angle, "receiver.polar")?;
            let az = match az {
                Some(a) => scalar(a, Dimension::Angle, "receiver.azimuth")?,
                None => 0.0,
            };
            orientation_from_angles(th, az)
        }
        _ => return Err(invariant("receiver", "give either `orientation` or `polar` (with optional `azimuth`), not both")),
    };
    let receiver = Receiver {
        location: vec3(&r.location, Dimension::Length, "receiver.location")?,
        orientation: n_r,
        responsivity: scalar(&r.responsivity, Dimension::Responsivity, "receiver.responsivity")?,
        detector_area: scalar(&r.detector_area, Dimension::Area, "receiver.detector_area")?,
        noise_psd: scalar(&r.noise_psd, Dimension::NoisePsd, "receiver.noise_psd")?,
        sync_mode: r.sync,
    };

    let mut points = Vec::new();
    for (j, p) in file.illumination.points.iter().enumerate() {
        points.push(PointConstraint {
            location: vec3(&p.location, Dimension::Length, &format!("illumination.points[{j}].location"))?,
            threshold: scalar(&p.threshold, Dimension::Illuminance, &format!("illumination.points[{j}].threshold"))?,
        });
    }
    let average = match &file.illumination.average {
        None => None,
        Some(a) => Some(AverageConstraint {
            region: Rect {
                x: interval(&a.x, "illumination.average.x")?,
                y: interval(&a.y, "illumination.average.y")?,
                z: scalar(&a.height, Dimension::Length, "illumination.average.height")?,
            },
            threshold: scalar(&a.threshold, Dimension::Illuminance, "illumination.average.threshold")?,
            grid: (a.grid[0], a.grid[1]),
        }),
    };

    let mut p_lb = bound_list(&file.power.lower, nl, "power.lower")?;
    let mut p_ub = bound_list(&file.power.upper, nl, "power.upper")?;
    if file.power.bounds == BoundKind::Optical {
        for i in 0..nl {
            let base = leds[i]
                .pulse()
                .map_err(|source| ScenarioError::Signal { field: format!("leds[{i}].center_frequency"), source })?
                .base_optical_power();
            p_lb[i] = convert_optical_to_electrical(p_lb[i], base)?;
            p_ub[i] = convert_optical_to_electrical(p_ub[i], base)?;
        }
    }
    let p_total = file.power.total.as_ref().map(|q| scalar(q, Dimension::Power, "power.total")).transpose()?;

    let s = Scenario { leds, receiver, illumination: IlluminationSpec { points, average }, power: PowerSpec { p_lb, p_ub, p_total } };
    s.validate()?;
    Ok(s)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario<f64>, ScenarioError> {
    from_toml_str(&std::fs::read_to_string(path)?)
}

/// The bundled reference scenario.
pub const REFERENCE_SCENARIO: &str = include_str!("../../../scenarios/tables_1_2.scenario");

pub fn reference_scenario() -> Scenario<f64> {
    from_toml_str(REFERENCE_SCENARIO).expect("shipped reference scenario is valid")
}
