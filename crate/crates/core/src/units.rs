//! Parsing of angle and frequency notation used on the command line and in
//! configuration files. Internally every rate is rad/µs and every time is µs.

use std::f64::consts::PI;

use serde::{Deserialize, Deserializer};

use crate::error::{Error, Result};

/// Parse angles such as `pi`, `-pi/2`, `0.02pi`, `3*pi/4`, `1.25`.
pub fn parse_angle(text: &str) -> Result<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let s = s.to_ascii_lowercase();
    if s.is_empty() {
        return Err(Error::InvalidConfig("empty angle".into()));
    }
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.to_string(), Some(d.to_string())),
        None => (s.clone(), None),
    };
    let mut value = parse_pi_product(&num)
        .ok_or_else(|| Error::InvalidConfig(format!("cannot parse angle `{text}`")))?;
    if let Some(d) = den {
        let d = parse_pi_product(&d)
            .ok_or_else(|| Error::InvalidConfig(format!("cannot parse angle `{text}`")))?;
        if d == 0.0 {
            return Err(Error::InvalidConfig(format!("division by zero in `{text}`")));
        }
        value /= d;
    }
    Ok(value)
}

fn parse_pi_product(s: &str) -> Option<f64> {
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, s.strip_prefix('+').unwrap_or(s)),
    };
    if let Some(coeff) = body.strip_suffix("pi") {
        let coeff = coeff.strip_suffix('*').unwrap_or(coeff);
        let c = if coeff.is_empty() { 1.0 } else { coeff.parse::<f64>().ok()? };
        return Some(sign * c * PI);
    }
    body.parse::<f64>().ok().map(|v| sign * v)
}

/// Parse an angular frequency. Bare numbers are rad/µs; `2pi*32MHz`, `32MHz`,
/// `2pi*2kHz`, `0.3GHz` are cycle frequencies converted to rad/µs.
pub fn parse_frequency(text: &str) -> Result<f64> {
    let s: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let lower = s.to_ascii_lowercase();
    let bad = || Error::InvalidConfig(format!("cannot parse frequency `{text}`"));
    if let Some(v) = lower.strip_suffix("rad/us") {
        return v.parse::<f64>().map_err(|_| bad());
    }
    let units = [("ghz", 1e3), ("mhz", 1.0), ("khz", 1e-3), ("hz", 1e-6)];
    for (suffix, scale) in units {
        if let Some(body) = lower.strip_suffix(suffix) {
            let body = body.strip_suffix('*').unwrap_or(body);
            let magnitude = if let Some(rest) = body
                .strip_prefix("2pi*")
                .or_else(|| body.strip_prefix("2*pi*"))
                .or_else(|| body.strip_prefix("2π*"))
            {
                rest.parse::<f64>().map_err(|_| bad())?
            } else if body == "2pi" || body == "2*pi" {
                1.0
            } else {
                body.parse::<f64>().map_err(|_| bad())?
            };
            return Ok(2.0 * PI * magnitude * scale);
        }
    }
    lower.parse::<f64>().map_err(|_| bad())
}

/// Deserialize a rate given either as a number (rad/µs) or as a string in
/// `2pi*MHz` notation.
pub fn de_frequency<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(s) => parse_frequency(&s).map_err(serde::de::Error::custom),
    }
}

/// `2pi * mhz` in rad/µs.
pub fn mhz(v: f64) -> f64 {
    2.0 * PI * v
}

/// `2pi * khz` in rad/µs.
pub fn khz(v: f64) -> f64 {
    2.0 * PI * v * 1e-3
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angles() {
        assert_eq!(parse_angle("pi").unwrap(), PI);
        assert!((parse_angle("0.02pi").unwrap() - 0.02 * PI).abs() < 1e-15);
        assert!((parse_angle("pi/4").unwrap() - PI / 4.0).abs() < 1e-15);
        assert!((parse_angle("-3*pi/4").unwrap() + 0.75 * PI).abs() < 1e-15);
        assert_eq!(parse_angle("1.5").unwrap(), 1.5);
        assert_eq!(parse_angle("0").unwrap(), 0.0);
        assert!(parse_angle("foo").is_err());
    }

    #[test]
    fn frequencies() {
        assert!((parse_frequency("2pi*32MHz").unwrap() - mhz(32.0)).abs() < 1e-12);
        assert!((parse_frequency("32MHz").unwrap() - mhz(32.0)).abs() < 1e-12);
        assert!((parse_frequency("2pi*2kHz").unwrap() - khz(2.0)).abs() < 1e-15);
        assert!((parse_frequency("0.32GHz").unwrap() - mhz(320.0)).abs() < 1e-9);
        assert_eq!(parse_frequency("12.5").unwrap(), 12.5);
        assert_eq!(parse_frequency("3rad/us").unwrap(), 3.0);
        assert!(parse_frequency("fast").is_err());
    }
}
