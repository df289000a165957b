//! Unit-tagged quantities used by the scenario file format.
//!
//! A quantity is written as `"<number> <unit>"`, e.g. `"1 cm^2"`, or for vectors
//! `"[1, 1, 5] m"`. Everything is converted to SI on parse.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Length,
    Area,
    Time,
    Frequency,
    Power,
    Responsivity,
    NoisePsd,
    Efficacy,
    Illuminance,
    Angle,
    Dimensionless,
}

impl Dimension {
    fn units(self) -> &'static [(&'static str, f64)] {
        use std::f64::consts::PI;
        match self {
            Dimension::Length => &[("m", 1.0), ("cm", 1e-2), ("mm", 1e-3)],
            Dimension::Area => &[("m^2", 1.0), ("cm^2", 1e-4), ("mm^2", 1e-6)],
            Dimension::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("μs", 1e-6), ("µs", 1e-6), ("ns", 1e-9)],
            Dimension::Frequency => &[("Hz", 1.0), ("kHz", 1e3), ("MHz", 1e6), ("GHz", 1e9)],
            Dimension::Power => &[("W", 1.0), ("mW", 1e-3), ("kW", 1e3)],
            Dimension::Responsivity => &[("A/W", 1.0), ("mA/mW", 1.0), ("mA/W", 1e-3)],
            // Only the ratio R_p²/σ² is ever used; the published W/Hz value is taken verbatim.
            Dimension::NoisePsd => &[("W/Hz", 1.0), ("A^2/Hz", 1.0)],
            Dimension::Efficacy => &[("lm/W", 1.0)],
            Dimension::Illuminance => &[("lx", 1.0), ("lux", 1.0)],
            Dimension::Angle => &[("rad", 1.0), ("deg", PI / 180.0)],
            Dimension::Dimensionless => &[("", 1.0), ("1", 1.0)],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Dimension::Length => "length",
            Dimension::Area => "area",
            Dimension::Time => "time",
            Dimension::Frequency => "frequency",
            Dimension::Power => "power",
            Dimension::Responsivity => "responsivity",
            Dimension::NoisePsd => "noise spectral density",
            Dimension::Efficacy => "luminous efficacy",
            Dimension::Illuminance => "illuminance",
            Dimension::Angle => "angle",
            Dimension::Dimensionless => "dimensionless",
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum UnitError {
    #[error("missing unit tag on `{text}` (expected a {expected} unit)")]
    MissingUnit { text: String, expected: &'static str },
    #[error("unknown unit `{unit}` for {expected}; accepted: {accepted}")]
    UnknownUnit { unit: String, expected: &'static str, accepted: String },
    #[error("cannot parse number in `{0}`")]
    BadNumber(String),
}

/// A raw quantity from a scenario file: either a bare number or a tagged string.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl fmt::Display for Quantity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Quantity::Number(v) => write!(f, "{v}"),
            Quantity::Text(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Quantity {
    fn from(s: &str) -> Self {
        Quantity::Text(s.to_string())
    }
}

impl Quantity {
    pub fn scalar(&self, dim: Dimension) -> Result<f64, UnitError> {
        match self {
            Quantity::Number(v) if dim == Dimension::Dimensionless => Ok(*v),
            Quantity::Number(v) => Err(UnitError::MissingUnit { text: v.to_string(), expected: dim.name() }),
            Quantity::Text(s) => parse_scalar(s, dim),
        }
    }

    pub fn vector(&self, dim: Dimension) -> Result<Vec<f64>, UnitError> {
        match self {
            Quantity::Number(v) if dim == Dimension::Dimensionless => Ok(vec![*v]),
            Quantity::Number(v) => Err(UnitError::MissingUnit { text: v.to_string(), expected: dim.name() }),
            Quantity::Text(s) => parse_vector(s, dim),
        }
    }
}

fn factor(unit: &str, dim: Dimension, text: &str) -> Result<f64, UnitError> {
    if unit.is_empty() && dim != Dimension::Dimensionless {
        return Err(UnitError::MissingUnit { text: text.to_string(), expected: dim.name() });
    }
    dim.units().iter().find(|(u, _)| *u == unit).map(|(_, f)| *f).ok_or_else(|| UnitError::UnknownUnit {
        unit: unit.to_string(),
        expected: dim.name(),
        accepted: dim.units().iter().map(|(u, _)| *u).filter(|u| !u.is_empty()).collect::<Vec<_>>().join(", "),
    })
}

/// Parses `"<number> <unit>"` into SI.
pub fn parse_scalar(text: &str, dim: Dimension) -> Result<f64, UnitError> {
    let t = text.trim();
    let (num, unit) = match t.find(char::is_whitespace) {
        Some(i) => (&t[..i], t[i..].trim()),
        None => (t, ""),
    };
    let v: f64 = num.parse().map_err(|_| UnitError::BadNumber(text.to_string()))?;
    Ok(v * factor(unit, dim, text)?)
}

/// Parses `"[a, b, c] <unit>"` into SI; a plain scalar yields a single-element vector.
pub fn parse_vector(text: &str, dim: Dimension) -> Result<Vec<f64>, UnitError> {
    let t = text.trim();
    let Some(rest) = t.strip_prefix('[') else {
        return parse_scalar(t, dim).map(|v| vec![v]);
    };
    let close = rest.find(']').ok_or_else(|| UnitError::BadNumber(text.to_string()))?;
    let f = factor(rest[close + 1..].trim(), dim, text)?;
    rest[..close].split(',').map(|s| s.trim().parse::<f64>().map(|v| v * f).map_err(|_| UnitError::BadNumber(text.to_string()))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_ii_units_convert_to_si() {
        assert_eq!(parse_scalar("1 cm^2", Dimension::Area).unwrap(), 1e-4);
        assert_eq!(parse_scalar("0.4 mA/mW", Dimension::Responsivity).unwrap(), 0.4);
        assert!((parse_scalar("1 us", Dimension::Time).unwrap() - 1e-6).abs() < 1e-22);
        assert_eq!(parse_scalar("40 MHz", Dimension::Frequency).unwrap(), 40e6);
        assert!((parse_scalar("30 deg", Dimension::Angle).unwrap() - std::f64::consts::FRAC_PI_6).abs() < 1e-15);
        assert_eq!(parse_vector("[1, 1, 5] m", Dimension::Length).unwrap(), vec![1.0, 1.0, 5.0]);
    }

    #[test]
    fn missing_and_unknown_units_are_errors() {
        assert!(matches!(parse_scalar("1", Dimension::Area), Err(UnitError::MissingUnit { .. })));
        assert!(matches!(Quantity::Number(2.0).scalar(Dimension::Length), Err(UnitError::MissingUnit { .. })));
        assert!(matches!(parse_scalar("1 furlong", Dimension::Length), Err(UnitError::UnknownUnit { .. })));
        assert_eq!(Quantity::Number(1.0).scalar(Dimension::Dimensionless).unwrap(), 1.0);
    }
}
