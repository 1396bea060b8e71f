//! Angle arguments: plain radians or multiples of π.
//!
//! Accepted forms: `0.3927`, `pi`, `-pi/4`, `3pi/8`, `3*pi/8`, `π/8`, `0.5pi`.
//! A decimal within [`SNAP_TOLERANCE`] of a multiple of π/8 is snapped onto
//! it, so `0.7854` means exactly π/4. The snapped value is what lands in the
//! manifest.

use std::f64::consts::{FRAC_PI_8, PI};

use eprb_core::Angle;
use serde::Deserialize;

pub const SNAP_TOLERANCE: f64 = 1e-4;

pub fn parse_angle(text: &str) -> Result<Angle, String> {
    let s: String = text.trim().chars().filter(|c| !c.is_whitespace()).collect();
    let lower = s.to_ascii_lowercase().replace('π', "pi");
    if let Some(pos) = lower.find("pi") {
        let (coef, rest) = lower.split_at(pos);
        let rest = &rest[2..];
        let coef = coef.strip_suffix('*').unwrap_or(coef);
        let factor = match coef {
            "" | "+" => 1.0,
            "-" => -1.0,
            c => c
                .parse::<f64>()
                .map_err(|_| format!("bad coefficient in angle `{text}`"))?,
        };
        let divisor = match rest {
            "" => 1.0,
            r => r
                .strip_prefix('/')
                .and_then(|d| d.parse::<f64>().ok())
                .filter(|d| *d != 0.0)
                .ok_or_else(|| format!("bad divisor in angle `{text}`"))?,
        };
        let value = factor * PI / divisor;
        if !value.is_finite() {
            return Err(format!("angle `{text}` is not finite"));
        }
        return Ok(Angle::new(value));
    }
    let value: f64 = lower.parse().map_err(|_| format!("cannot parse angle `{text}`"))?;
    if !value.is_finite() {
        return Err(format!("angle `{text}` is not finite"));
    }
    Ok(Angle::new(snap(value)))
}

fn snap(x: f64) -> f64 {
    let k = (x / FRAC_PI_8).round();
    if (x - k * FRAC_PI_8).abs() < SNAP_TOLERANCE {
        k * FRAC_PI_8
    } else {
        x
    }
}

/// Angle as written in a config file: a number or a string expression.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AngleSpec {
    Radians(f64),
    Text(String),
}

impl AngleSpec {
    pub fn resolve(&self) -> Result<Angle, String> {
        match self {
            AngleSpec::Radians(x) => parse_angle(&x.to_string()),
            AngleSpec::Text(t) => parse_angle(t),
        }
    }
}

#[cfg(test)]
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_4;

    #[test]
    fn pi_expressions() {
        assert_eq!(parse_angle("pi/4").unwrap(), Angle::new(FRAC_PI_4));
        assert_eq!(parse_angle("3pi/8").unwrap(), Angle::new(3.0 * PI / 8.0));
        assert_eq!(parse_angle("3*pi/8").unwrap(), Angle::new(3.0 * PI / 8.0));
        assert_eq!(parse_angle("π/8").unwrap(), Angle::new(FRAC_PI_8));
        assert_eq!(parse_angle("-pi/4").unwrap(), Angle::new(-FRAC_PI_4));
        assert_eq!(parse_angle("PI").unwrap(), Angle::new(PI));
        assert_eq!(parse_angle("0.5pi").unwrap(), Angle::new(PI / 2.0));
    }

    #[test]
    fn decimals_snap_to_eighths_of_pi() {
        assert_eq!(parse_angle("0.7854").unwrap(), Angle::new(FRAC_PI_4));
        assert_eq!(parse_angle("0.3927").unwrap(), Angle::new(FRAC_PI_8));
        assert_eq!(parse_angle("0").unwrap(), Angle::ZERO);
        assert_eq!(parse_angle("0.5").unwrap(), Angle::new(0.5));
        assert_eq!(parse_angle("0.785").unwrap(), Angle::new(0.785));
    }

    #[test]
    fn garbage_is_rejected() {
        for bad in ["", "abc", "pi/", "pi/0", "2pi/x", "xpi", "nan", "inf"] {
            assert!(parse_angle(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn config_values() {
        assert_eq!(AngleSpec::Radians(0.7854).resolve().unwrap(), Angle::new(FRAC_PI_4));
        assert_eq!(AngleSpec::Text("pi/8".into()).resolve().unwrap(), Angle::new(FRAC_PI_8));
    }
}
