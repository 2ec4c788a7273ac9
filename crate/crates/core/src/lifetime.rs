//! Key-lifetime planning for a KLJN-backed vehicular network.
//!
//! The chain is: noise bandwidth `B = Θ·c/L`, secure bit rate
//! `f_sec = m·B/(2γ)`, cars per KLJN unit `n_c = N_c/N_KLJN`, per-car rate
//! `f_c = f_sec/n_c`, and key lifetime `τ_k = N_k/f_c`. With homogeneous
//! load this is the lifetime every car sees; with `n_c` set to the busiest
//! unit's load it is an upper bound for all of them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, KljnError, Result};
use crate::noise::NO_WAVE_WARN_THETA;
use crate::protocol::GAMMA_WARN;

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(
            name,
            format!("must be finite and positive, got {v}"),
        ))
    }
}

/// `B = Θ·c/L`.
pub fn noise_bandwidth(theta: f64, wave_speed: f64, line_length: f64) -> Result<f64> {
    if theta >= 1.0 {
        return Err(KljnError::NoWaveLimit { theta });
    }
    positive("theta", theta)?;
    positive("wave_speed", wave_speed)?;
    positive("line_length", line_length)?;
    Ok(theta * wave_speed / line_length)
}

/// `f_sec = m·B/(2γ)`; secure exchanges happen in half the periods on average.
pub fn secure_bit_rate(bandwidth: f64, gamma: f64, parallel_channels: u32) -> Result<f64> {
    if !(bandwidth >= 0.0) || !bandwidth.is_finite() {
        return Err(invalid(
            "bandwidth",
            format!("must be finite and non-negative, got {bandwidth}"),
        ));
    }
    if !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(invalid("gamma", format!("must be at least 1, got {gamma}")));
    }
    if parallel_channels == 0 {
        return Err(invalid("parallel_channels", "must be at least 1"));
    }
    Ok(parallel_channels as f64 * bandwidth / (2.0 * gamma))
}

/// `n_c = N_c/N_KLJN`, kept real-valued.
pub fn car_density(car_count: u64, kljn_unit_count: u64) -> Result<f64> {
    if kljn_unit_count == 0 {
        return Err(KljnError::DivisionByZero("kljn_unit_count is zero"));
    }
    Ok(car_count as f64 / kljn_unit_count as f64)
}

/// `f_c = f_sec/n_c`.
pub fn per_car_rate(secure_bit_rate: f64, car_density: f64) -> Result<f64> {
    if car_density == 0.0 {
        return Err(KljnError::DivisionByZero("car density is zero"));
    }
    positive("car_density", car_density)?;
    Ok(secure_bit_rate / car_density)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifetimeParams {
    pub theta: f64,
    pub wave_speed: f64,
    pub line_length: f64,
    pub gamma: f64,
    /// Key length `N_k`, bits.
    pub key_length: u64,
    pub car_count: Option<u64>,
    pub kljn_unit_count: Option<u64>,
    /// Cars per KLJN unit; alternative to the `car_count`/`kljn_unit_count` pair.
    pub car_density: Option<f64>,
    pub parallel_channels: u32,
}

impl Default for LifetimeParams {
    /// The numeric example used throughout the docs: a 1 km line, γ = 100,
    /// 100-bit keys and 1000 cars on one unit.
    fn default() -> Self {
        Self {
            theta: 0.1,
            wave_speed: 2e8,
            line_length: 1000.0,
            gamma: 100.0,
            key_length: 100,
            car_count: None,
            kljn_unit_count: None,
            car_density: Some(1000.0),
            parallel_channels: 1,
        }
    }
}

impl LifetimeParams {
    /// Resolve `n_c`, checking consistency when it is over-specified.
    pub fn resolved_car_density(&self) -> Result<f64> {
        let from_counts = match (self.car_count, self.kljn_unit_count) {
            (Some(cars), Some(units)) => Some(car_density(cars, units)?),
            (None, None) => None,
            _ => {
                return Err(invalid(
                    "car_count",
                    "car_count and kljn_unit_count must be given together",
                ))
            }
        };
        match (self.car_density, from_counts) {
            (Some(given), Some(derived)) => {
                if (given - derived).abs() > 1e-12 * derived.abs().max(1.0) {
                    return Err(invalid(
                        "car_density",
                        format!("{given} disagrees with car_count/kljn_unit_count = {derived}"),
                    ));
                }
                Ok(given)
            }
            (Some(given), None) => Ok(given),
            (None, Some(derived)) => Ok(derived),
            (None, None) => Err(invalid(
                "car_density",
                "give car_density or both car_count and kljn_unit_count",
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LifetimeReport {
    pub noise_bandwidth: f64,
    pub secure_bit_rate: f64,
    pub car_density: f64,
    pub per_car_rate: f64,
    pub key_lifetime: f64,
    /// `Θ` at or above the no-wave guidance cutoff.
    pub no_wave_warning: bool,
    /// `γ` below the recommended minimum.
    pub gamma_warning: bool,
}

/// Chain the four rates into the key lifetime `τ_k = N_k/f_c`.
pub fn key_lifetime(params: &LifetimeParams) -> Result<LifetimeReport> {
    let bandwidth = noise_bandwidth(params.theta, params.wave_speed, params.line_length)?;
    let f_sec = secure_bit_rate(bandwidth, params.gamma, params.parallel_channels)?;
    let n_c = params.resolved_car_density()?;
    let f_c = per_car_rate(f_sec, n_c)?;
    Ok(LifetimeReport {
        noise_bandwidth: bandwidth,
        secure_bit_rate: f_sec,
        car_density: n_c,
        per_car_rate: f_c,
        key_lifetime: params.key_length as f64 / f_c,
        no_wave_warning: params.theta >= NO_WAVE_WARN_THETA,
        gamma_warning: params.gamma < GAMMA_WARN,
    })
}

/// Direct form `τ_k = 2·N_k·n_c·γ·L/(Θ·c·m)`.
pub fn key_lifetime_closed_form(params: &LifetimeParams) -> Result<f64> {
    let n_c = params.resolved_car_density()?;
    Ok(
        2.0 * params.key_length as f64 * n_c * params.gamma * params.line_length
            / (params.theta * params.wave_speed * params.parallel_channels as f64),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn bandwidth_examples() {
        assert!(rel(noise_bandwidth(0.1, 2e8, 1000.0).unwrap(), 2e4) < 1e-15);
        let b1 = noise_bandwidth(0.1, 2e8, 1000.0).unwrap();
        let b2 = noise_bandwidth(0.1, 2e8, 2000.0).unwrap();
        assert!(rel(b2, b1 / 2.0) < 1e-15);
        assert!(noise_bandwidth(0.0, 2e8, 1000.0).is_err());
        assert!(matches!(
            noise_bandwidth(1.0, 2e8, 1000.0),
            Err(KljnError::NoWaveLimit { .. })
        ));
        assert!(noise_bandwidth(0.1, 2e8, 0.0).is_err());
    }

    #[test]
    fn secure_rate_examples() {
        assert!(rel(secure_bit_rate(2e4, 100.0, 1).unwrap(), 100.0) < 1e-15);
        assert!(rel(secure_bit_rate(2e4, 100.0, 4).unwrap(), 400.0) < 1e-15);
        assert!(rel(secure_bit_rate(2e4, 200.0, 1).unwrap(), 50.0) < 1e-15);
        assert!(secure_bit_rate(2e4, 0.5, 1).is_err());
        assert!(secure_bit_rate(2e4, 100.0, 0).is_err());
    }

    #[test]
    fn density_examples() {
        assert_eq!(car_density(1000, 1).unwrap(), 1000.0);
        assert_eq!(car_density(0, 5).unwrap(), 0.0);
        assert_eq!(car_density(3, 2).unwrap(), 1.5);
        assert!(matches!(
            car_density(3, 0),
            Err(KljnError::DivisionByZero(_))
        ));
    }

    #[test]
    fn per_car_examples() {
        assert!(rel(per_car_rate(100.0, 1000.0).unwrap(), 0.1) < 1e-15);
        assert_eq!(per_car_rate(100.0, 1.0).unwrap(), 100.0);
        assert!(rel(per_car_rate(100.0, 2000.0).unwrap(), 0.05) < 1e-15);
        assert!(matches!(
            per_car_rate(100.0, 0.0),
            Err(KljnError::DivisionByZero(_))
        ));
    }

    #[test]
    fn worked_example() {
        let report = key_lifetime(&LifetimeParams::default()).unwrap();
        assert!(rel(report.noise_bandwidth, 2e4) < 1e-12);
        assert!(rel(report.secure_bit_rate, 100.0) < 1e-12);
        assert!(rel(report.per_car_rate, 0.1) < 1e-12);
        assert!(rel(report.key_lifetime, 1000.0) < 1e-12);
        assert!(!report.no_wave_warning && !report.gamma_warning);
    }

    #[test]
    fn parallel_channels_shorten_lifetime() {
        let p = LifetimeParams {
            parallel_channels: 10,
            ..LifetimeParams::default()
        };
        assert!(rel(key_lifetime(&p).unwrap().key_lifetime, 100.0) < 1e-12);
    }

    #[test]
    fn zero_length_key_has_zero_lifetime() {
        let p = LifetimeParams {
            key_length: 0,
            ..LifetimeParams::default()
        };
        assert_eq!(key_lifetime(&p).unwrap().key_lifetime, 0.0);
    }

    #[test]
    fn density_resolution() {
        let counts = LifetimeParams {
            car_density: None,
            car_count: Some(3000),
            kljn_unit_count: Some(3),
            ..LifetimeParams::default()
        };
        assert_eq!(counts.resolved_car_density().unwrap(), 1000.0);
        let both = LifetimeParams {
            car_density: Some(1000.0),
            ..counts
        };
        assert_eq!(both.resolved_car_density().unwrap(), 1000.0);
        let clash = LifetimeParams {
            car_density: Some(999.0),
            ..counts
        };
        assert!(clash.resolved_car_density().is_err());
        let half = LifetimeParams {
            kljn_unit_count: None,
            ..counts
        };
        assert!(half.resolved_car_density().is_err());
        let none = LifetimeParams {
            car_density: None,
            ..LifetimeParams::default()
        };
        assert!(none.resolved_car_density().is_err());
    }

    #[test]
    fn warnings() {
        let p = LifetimeParams {
            theta: 0.5,
            gamma: 5.0,
            ..LifetimeParams::default()
        };
        let r = key_lifetime(&p).unwrap();
        assert!(r.no_wave_warning && r.gamma_warning);
    }
}
