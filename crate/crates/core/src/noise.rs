//! Johnson-noise synthesis and the quasi-static Kirchhoff loop.
//!
//! Each party drives the wire through one resistor in series with a Gaussian
//! noise generator whose mean-square voltage over bandwidth `B` is
//! `4·k·T_eff·R·B`. The wire itself is ideal: no resistance, no delay.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, KljnError, Result};

/// Boltzmann constant in J/K (exact SI value).
pub const BOLTZMANN: f64 = 1.380649e-23;

/// Default sample rate as a multiple of the noise bandwidth.
pub const DEFAULT_OVERSAMPLING: f64 = 10.0;

/// `theta` at or above this value is accepted but flagged as outside the no-wave guidance.
pub const NO_WAVE_WARN_THETA: f64 = 0.2;

/// Physical parameters of one KLJN line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KljnLineConfig {
    /// Low-bit resistance, ohms.
    pub r_low: f64,
    /// High-bit resistance, ohms.
    pub r_high: f64,
    /// Effective noise temperature, kelvin.
    pub t_eff: f64,
    /// Distance between the two ends, meters.
    pub line_length: f64,
    /// Propagation speed of electromagnetic waves in the cable, m/s.
    pub wave_speed: f64,
    /// Fraction of `c/L` used as noise bandwidth.
    pub theta: f64,
}

impl Default for KljnLineConfig {
    fn default() -> Self {
        Self {
            r_low: 10e3,
            r_high: 100e3,
            t_eff: 1e15,
            line_length: 1000.0,
            wave_speed: 2e8,
            theta: 0.1,
        }
    }
}

impl KljnLineConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("r_low", self.r_low),
            ("r_high", self.r_high),
            ("line_length", self.line_length),
            ("wave_speed", self.wave_speed),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(
                    name,
                    format!("must be finite and positive, got {v}"),
                ));
            }
        }
        if self.r_low == self.r_high {
            return Err(invalid("r_high", "must differ from r_low"));
        }
        if !(self.t_eff.is_finite() && self.t_eff >= 0.0) {
            return Err(invalid(
                "t_eff",
                format!("must be finite and non-negative, got {}", self.t_eff),
            ));
        }
        if self.theta >= 1.0 {
            return Err(KljnError::NoWaveLimit { theta: self.theta });
        }
        if !(self.theta > 0.0) {
            return Err(invalid(
                "theta",
                format!("must lie in (0, 1), got {}", self.theta),
            ));
        }
        Ok(())
    }

    /// `B_KLJN = theta·c/L`.
    pub fn noise_bandwidth(&self) -> f64 {
        self.theta * self.wave_speed / self.line_length
    }

    /// Noise correlation time, `1/B_KLJN`.
    pub fn correlation_time(&self) -> f64 {
        1.0 / self.noise_bandwidth()
    }

    pub fn violates_no_wave_guidance(&self) -> bool {
        self.theta >= NO_WAVE_WARN_THETA
    }

    /// Resistance selected by a low (`false`) or high (`true`) bit.
    pub fn resistance(&self, high: bool) -> f64 {
        if high {
            self.r_high
        } else {
            self.r_low
        }
    }
}

/// A uniformly sampled voltage trace.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseTrace {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
    pub duration: f64,
}

impl NoiseTrace {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_square(&self) -> f64 {
        mean_square(&self.samples)
    }

    fn same_grid(&self, other: &NoiseTrace) -> bool {
        self.samples.len() == other.samples.len() && self.sample_rate == other.sample_rate
    }
}

/// Channel voltage `u_c(t)` and wire current `i_c(t)` on a shared sample grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopSignals {
    pub voltage: Vec<f64>,
    pub current: Vec<f64>,
    pub sample_rate: f64,
    pub duration: f64,
}

impl LoopSignals {
    pub fn len(&self) -> usize {
        self.voltage.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voltage.is_empty()
    }

    pub fn same_grid(&self, other: &LoopSignals) -> bool {
        self.voltage.len() == other.voltage.len()
            && self.current.len() == other.current.len()
            && self.sample_rate == other.sample_rate
    }

    pub fn msv_voltage(&self) -> f64 {
        mean_square(&self.voltage)
    }

    pub fn msv_current(&self) -> f64 {
        mean_square(&self.current)
    }

    /// Time average of `u_c·i_c` (the net power flow along the wire).
    pub fn cross_mean(&self) -> f64 {
        if self.voltage.is_empty() {
            return 0.0;
        }
        let sum: f64 = self
            .voltage
            .iter()
            .zip(&self.current)
            .map(|(u, i)| u * i)
            .sum();
        sum / self.voltage.len() as f64
    }
}

pub fn mean_square(samples: &[f64]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().map(|x| x * x).sum::<f64>() / samples.len() as f64
}

/// Resistor-pair class visible on the line.
///
/// `Mixed` covers both LH and HL, which produce the same line statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairClass {
    LL,
    Mixed,
    HH,
}

/// Johnson–Nyquist RMS voltage `sqrt(4·k·T·R·B)`.
pub fn johnson_rms(resistance: f64, t_eff: f64, bandwidth: f64) -> Result<f64> {
    for (name, v) in [
        ("resistance", resistance),
        ("t_eff", t_eff),
        ("bandwidth", bandwidth),
    ] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(invalid(
                name,
                format!("must be finite and non-negative, got {v}"),
            ));
        }
    }
    Ok((4.0 * BOLTZMANN * t_eff * resistance * bandwidth).sqrt())
}

/// Band-limited zero-mean Gaussian noise, seeded.
pub fn sample_bandlimited_gaussian(
    rms: f64,
    bandwidth: f64,
    sample_rate: f64,
    duration: f64,
    seed: u64,
) -> Result<NoiseTrace> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_bandlimited_gaussian_with(rms, bandwidth, sample_rate, duration, &mut rng)
}

/// Same as [`sample_bandlimited_gaussian`], drawing from a caller-owned generator.
///
/// Synthesis is done in the frequency domain: every bin with `0 < f ≤ B` gets
/// an independent complex Gaussian coefficient, all other bins are zero, and
/// the inverse transform gives the trace. The DC bin is left empty so each
/// realization has exactly zero mean.
pub fn sample_bandlimited_gaussian_with<R: Rng + ?Sized>(
    rms: f64,
    bandwidth: f64,
    sample_rate: f64,
    duration: f64,
    rng: &mut R,
) -> Result<NoiseTrace> {
    if !(rms >= 0.0) || !rms.is_finite() {
        return Err(invalid(
            "rms",
            format!("must be finite and non-negative, got {rms}"),
        ));
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(invalid(
            "duration",
            format!("must be positive, got {duration}"),
        ));
    }
    if !(bandwidth >= 0.0) || !(sample_rate > 0.0) {
        return Err(invalid(
            "sample_rate",
            "bandwidth and sample rate must be positive",
        ));
    }
    if sample_rate < 2.0 * bandwidth {
        return Err(KljnError::Aliasing {
            sample_rate,
            bandwidth,
        });
    }
    if duration * bandwidth < 1.0 - 1e-9 {
        return Err(invalid(
            "duration",
            format!(
                "duration·bandwidth = {} must be at least 1",
                duration * bandwidth
            ),
        ));
    }
    let n = (sample_rate * duration).round() as usize;
    if n < 2 {
        return Err(invalid(
            "duration",
            format!("trace would have {n} samples, need at least 2"),
        ));
    }

    let mut bins = (n as f64 * bandwidth / sample_rate + 1e-9).floor() as usize;
    bins = bins.clamp(1, n / 2);
    let nyquist_real = n.is_multiple_of(2) && bins == n / 2;

    let sigma = rms / (2.0 * (bins as f64).sqrt());
    let mut spectrum = vec![Complex::new(0.0, 0.0); n];
    for k in 1..=bins {
        let re: f64 = rng.sample(StandardNormal);
        if nyquist_real && k == bins {
            spectrum[k] = Complex::new(2.0 * sigma * re, 0.0);
        } else {
            let im: f64 = rng.sample(StandardNormal);
            let c = Complex::new(sigma * re, sigma * im);
            spectrum[k] = c;
            spectrum[n - k] = c.conj();
        }
    }

    let mut planner = FftPlanner::<f64>::new();
    planner.plan_fft_inverse(n).process(&mut spectrum);

    Ok(NoiseTrace {
        samples: spectrum.into_iter().map(|c| c.re).collect(),
        sample_rate,
        duration,
    })
}

/// Solve the series loop `u_a — r_a — wire — r_b — u_b`.
///
/// Returns `u_c = (u_a·r_b + u_b·r_a)/(r_a + r_b)` and
/// `i_c = (u_a − u_b)/(r_a + r_b)`, current positive from Alice toward Bob.
pub fn solve_loop(u_a: &NoiseTrace, r_a: f64, u_b: &NoiseTrace, r_b: f64) -> Result<LoopSignals> {
    if !u_a.same_grid(u_b) {
        return Err(KljnError::GridMismatch(format!(
            "{} samples at {} Hz vs {} samples at {} Hz",
            u_a.len(),
            u_a.sample_rate,
            u_b.len(),
            u_b.sample_rate
        )));
    }
    if !(r_a >= 0.0 && r_b >= 0.0 && r_a + r_b > 0.0) {
        return Err(invalid("r_a", "loop resistance must be positive"));
    }
    let total = r_a + r_b;
    let (voltage, current) = u_a
        .samples
        .iter()
        .zip(&u_b.samples)
        .map(|(&a, &b)| ((a * r_b + b * r_a) / total, (a - b) / total))
        .unzip();
    Ok(LoopSignals {
        voltage,
        current,
        sample_rate: u_a.sample_rate,
        duration: u_a.duration,
    })
}

/// Expected `(⟨u_c²⟩, ⟨i_c²⟩)` for two resistors driven by Johnson noise at the same temperature.
pub fn loop_msv(r_a: f64, r_b: f64, t_eff: f64, bandwidth: f64) -> (f64, f64) {
    let psd = 4.0 * BOLTZMANN * t_eff * bandwidth;
    let total = r_a + r_b;
    (psd * r_a * r_b / total, psd / total)
}

/// Theoretical mean-square voltage and current for a resistor-pair class.
pub fn theoretical_msv(config: &KljnLineConfig, pair: PairClass) -> (f64, f64) {
    let (r_a, r_b) = match pair {
        PairClass::LL => (config.r_low, config.r_low),
        PairClass::Mixed => (config.r_low, config.r_high),
        PairClass::HH => (config.r_high, config.r_high),
    };
    loop_msv(r_a, r_b, config.t_eff, config.noise_bandwidth())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trace(samples: Vec<f64>) -> NoiseTrace {
        let n = samples.len();
        NoiseTrace {
            samples,
            sample_rate: 1000.0,
            duration: n as f64 / 1000.0,
        }
    }

    #[test]
    fn johnson_rms_edge_cases() {
        assert_eq!(johnson_rms(1e4, 300.0, 0.0).unwrap(), 0.0);
        assert_eq!(johnson_rms(0.0, 1e15, 2e4).unwrap(), 0.0);
        assert!(johnson_rms(-1.0, 1.0, 1.0).is_err());
        assert!(johnson_rms(1.0, -1.0, 1.0).is_err());
        assert!(johnson_rms(1.0, 1.0, -1.0).is_err());
    }

    #[test]
    fn johnson_rms_default_resistor() {
        // 4 · 1.380649e-23 · 1e15 · 1e4 · 2e4 = 11.045192 V²
        let v = johnson_rms(1e4, 1e15, 2e4).unwrap();
        assert!((v - 11.045192f64.sqrt()).abs() < 1e-12);
        assert!((v - 3.3234).abs() < 1e-4);
    }

    #[test]
    fn zero_rms_gives_zero_trace() {
        let t = sample_bandlimited_gaussian(0.0, 100.0, 1000.0, 1.0, 3).unwrap();
        assert_eq!(t.len(), 1000);
        assert!(t.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_bandlimited_gaussian(1.0, 100.0, 1000.0, 1.0, 42).unwrap();
        let b = sample_bandlimited_gaussian(1.0, 100.0, 1000.0, 1.0, 42).unwrap();
        let c = sample_bandlimited_gaussian(1.0, 100.0, 1000.0, 1.0, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn sampling_rejects_bad_parameters() {
        assert!(matches!(
            sample_bandlimited_gaussian(1.0, 100.0, 150.0, 1.0, 0),
            Err(KljnError::Aliasing { .. })
        ));
        assert!(sample_bandlimited_gaussian(1.0, 100.0, 1000.0, 0.0, 0).is_err());
        assert!(sample_bandlimited_gaussian(1.0, 100.0, 1000.0, -1.0, 0).is_err());
        assert!(sample_bandlimited_gaussian(1.0, 100.0, 1000.0, 0.001, 0).is_err());
    }

    #[test]
    fn trace_has_zero_mean_and_requested_length() {
        let t = sample_bandlimited_gaussian(2.0, 50.0, 500.0, 2.0, 11).unwrap();
        assert_eq!(t.len(), 1000);
        let mean = t.samples.iter().sum::<f64>() / t.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn nyquist_limited_trace_keeps_power() {
        // sample_rate == 2·bandwidth puts the top bin on Nyquist.
        let runs = 400;
        let mut acc = 0.0;
        for seed in 0..runs {
            acc += sample_bandlimited_gaussian(1.0, 50.0, 100.0, 1.0, seed)
                .unwrap()
                .mean_square();
        }
        let mean = acc / runs as f64;
        assert!((mean - 1.0).abs() < 0.02, "mean square {mean}");
    }

    #[test]
    fn symmetric_divider() {
        let ua = trace(vec![1.0, -2.0, 3.0, 0.5]);
        let ub = trace(vec![0.0; 4]);
        let r = 1e3;
        let s = solve_loop(&ua, r, &ub, r).unwrap();
        for (k, &a) in ua.samples.iter().enumerate() {
            assert!((s.voltage[k] - a / 2.0).abs() < 1e-15);
            assert!((s.current[k] - a / (2.0 * r)).abs() < 1e-18);
        }
    }

    #[test]
    fn equal_potentials_carry_no_current() {
        let ua = trace(vec![1.0, -2.0, 3.0, 0.5]);
        let s = solve_loop(&ua, 5.0, &ua.clone(), 5.0).unwrap();
        assert!(s.current.iter().all(|&i| i == 0.0));
        assert_eq!(s.voltage, ua.samples);
    }

    #[test]
    fn solve_loop_rejects_mismatched_grids() {
        let ua = trace(vec![0.0; 4]);
        let ub = trace(vec![0.0; 5]);
        assert!(matches!(
            solve_loop(&ua, 1.0, &ub, 1.0),
            Err(KljnError::GridMismatch(_))
        ));
        let mut uc = trace(vec![0.0; 4]);
        uc.sample_rate = 2000.0;
        assert!(matches!(
            solve_loop(&ua, 1.0, &uc, 1.0),
            Err(KljnError::GridMismatch(_))
        ));
    }

    #[test]
    fn theoretical_levels_are_ordered() {
        let cfg = KljnLineConfig::default();
        let psd = 4.0 * BOLTZMANN * cfg.t_eff * cfg.noise_bandwidth();
        let (ll, ill) = theoretical_msv(&cfg, PairClass::LL);
        let (mid, imid) = theoretical_msv(&cfg, PairClass::Mixed);
        let (hh, ihh) = theoretical_msv(&cfg, PairClass::HH);
        assert!((ll / psd - 5e3).abs() < 1e-9);
        assert!((mid / psd - 1e9 / 1.1e5).abs() < 1e-9);
        assert!((hh / psd - 5e4).abs() < 1e-9);
        assert!(ll < mid && mid < hh);
        assert!(ill > imid && imid > ihh);
    }

    #[test]
    fn mixed_orientation_is_symmetric() {
        let cfg = KljnLineConfig::default();
        let b = cfg.noise_bandwidth();
        assert_eq!(
            loop_msv(cfg.r_low, cfg.r_high, cfg.t_eff, b),
            loop_msv(cfg.r_high, cfg.r_low, cfg.t_eff, b)
        );
    }

    #[test]
    fn degenerate_equal_resistors_collapse_levels() {
        let cfg = KljnLineConfig {
            r_high: 10e3,
            ..KljnLineConfig::default()
        };
        assert!(cfg.validate().is_err());
        let ll = theoretical_msv(&cfg, PairClass::LL);
        assert_eq!(ll, theoretical_msv(&cfg, PairClass::Mixed));
        assert_eq!(ll, theoretical_msv(&cfg, PairClass::HH));
    }

    #[test]
    fn line_config_validation() {
        let ok = KljnLineConfig::default();
        assert!(ok.validate().is_ok());
        assert_eq!(ok.noise_bandwidth(), 0.1 * 2e8 / 1000.0);
        assert!(!ok.violates_no_wave_guidance());
        let wide = KljnLineConfig { theta: 0.5, ..ok };
        assert!(wide.validate().is_ok());
        assert!(wide.violates_no_wave_guidance());
        assert!(matches!(
            KljnLineConfig { theta: 1.5, ..ok }.validate(),
            Err(KljnError::NoWaveLimit { .. })
        ));
        assert!(KljnLineConfig { theta: 0.0, ..ok }.validate().is_err());
        assert!(KljnLineConfig { r_low: 0.0, ..ok }.validate().is_err());
    }
}
