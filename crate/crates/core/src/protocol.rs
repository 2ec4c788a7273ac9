//! The bit-sharing protocol.
//!
//! Every bit period both parties pick a resistor at random, the line is
//! driven for `τ = γ/B` seconds, and the mean-square channel voltage is
//! sorted into one of three levels. Only the intermediate level (LH or HL)
//! yields a secret bit; LL and HH are public and dropped. Both ends also
//! compare their instantaneous voltage/current readings and raise an alarm
//! on any discrepancy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{apply_injection, leak_report, InjectionAttack};
use crate::error::{invalid, KljnError, Result};
use crate::noise::{
    johnson_rms, sample_bandlimited_gaussian_with, solve_loop, theoretical_msv, KljnLineConfig,
    LoopSignals, PairClass, DEFAULT_OVERSAMPLING,
};

/// `γ` below this value is accepted but flagged.
pub const GAMMA_WARN: f64 = 10.0;

/// One party's resistor. `Low` encodes bit 0, `High` bit 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ResistorChoice {
    Low,
    High,
}

impl ResistorChoice {
    pub fn bit(self) -> bool {
        matches!(self, ResistorChoice::High)
    }

    pub fn is_high(self) -> bool {
        self.bit()
    }
}

/// Ground-truth resistor permutation of a bit period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Permutation {
    LL,
    LH,
    HL,
    HH,
}

impl Permutation {
    pub fn of(alice: ResistorChoice, bob: ResistorChoice) -> Self {
        use ResistorChoice::*;
        match (alice, bob) {
            (Low, Low) => Permutation::LL,
            (Low, High) => Permutation::LH,
            (High, Low) => Permutation::HL,
            (High, High) => Permutation::HH,
        }
    }

    pub fn class(self) -> PairClass {
        match self {
            Permutation::LL => PairClass::LL,
            Permutation::LH | Permutation::HL => PairClass::Mixed,
            Permutation::HH => PairClass::HH,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

/// Classified mean-square level on the line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    Low,
    Mid,
    High,
}

impl Level {
    pub fn from_class(class: PairClass) -> Self {
        match class {
            PairClass::LL => Level::Low,
            PairClass::Mixed => Level::Mid,
            PairClass::HH => Level::High,
        }
    }
}

/// Which line statistics feed the level decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classifier {
    /// Mean-square channel voltage only.
    VoltageOnly,
    /// Voltage and current must both read intermediate for a bit to be kept.
    Joint,
}

/// Position of each threshold between its two neighbouring theoretical levels,
/// on a logarithmic scale: 0 sits on the lower level, 1 on the upper, and 0.5
/// is the geometric mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdPlacement {
    pub lower_weight: f64,
    pub upper_weight: f64,
}

impl Default for ThresholdPlacement {
    fn default() -> Self {
        // The lower boundary sits above the geometric mean: an LL period read as
        // intermediate corrupts the key, while an LH/HL period read as low only
        // costs one discarded bit.
        Self {
            lower_weight: 0.7,
            upper_weight: 0.5,
        }
    }
}

impl ThresholdPlacement {
    pub const GEOMETRIC: Self = Self {
        lower_weight: 0.5,
        upper_weight: 0.5,
    };
}

/// Two level boundaries in V² (or A² for the current statistic).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub lower: f64,
    pub upper: f64,
}

fn log_interp(a: f64, b: f64, w: f64) -> f64 {
    a.powf(1.0 - w) * b.powf(w)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExchangeConfig {
    pub line: KljnLineConfig,
    /// Ratio of noise bandwidth to bit rate.
    pub gamma: f64,
    /// Sample rate as a multiple of the noise bandwidth.
    pub oversampling: f64,
    pub placement: ThresholdPlacement,
    /// Explicit voltage thresholds; overrides `placement` when set.
    pub thresholds: Option<Thresholds>,
    /// Relative deviation between the two endpoint readings that raises the alarm.
    pub alarm_tolerance: f64,
    pub inverting_party: Party,
    pub classifier: Classifier,
    /// Tolerated fraction of alarmed (compromised) bits in a key.
    pub max_leak: f64,
    /// Period cap as a multiple of `2·target_bits`.
    pub period_cap_factor: u64,
}

impl Default for ExchangeConfig {
    fn default() -> Self {
        Self {
            line: KljnLineConfig::default(),
            gamma: 100.0,
            oversampling: DEFAULT_OVERSAMPLING,
            placement: ThresholdPlacement::default(),
            thresholds: None,
            alarm_tolerance: 1e-9,
            inverting_party: Party::Bob,
            classifier: Classifier::VoltageOnly,
            max_leak: 0.0,
            period_cap_factor: 100,
        }
    }
}

impl ExchangeConfig {
    pub fn with_gamma(self, gamma: f64) -> Self {
        Self { gamma, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        self.line.validate()?;
        if !(self.gamma >= 1.0) || !self.gamma.is_finite() {
            return Err(invalid(
                "gamma",
                format!("must be at least 1, got {}", self.gamma),
            ));
        }
        if !(self.oversampling >= 2.0) || !self.oversampling.is_finite() {
            return Err(invalid(
                "oversampling",
                format!("must be at least 2, got {}", self.oversampling),
            ));
        }
        for (name, w) in [
            ("placement.lower_weight", self.placement.lower_weight),
            ("placement.upper_weight", self.placement.upper_weight),
        ] {
            if !(w > 0.0 && w < 1.0) {
                return Err(invalid(name, format!("must lie in (0, 1), got {w}")));
            }
        }
        if !(self.alarm_tolerance >= 0.0) || !self.alarm_tolerance.is_finite() {
            return Err(invalid(
                "alarm_tolerance",
                "must be finite and non-negative",
            ));
        }
        if !(0.0..=1.0).contains(&self.max_leak) {
            return Err(invalid(
                "max_leak",
                format!("must lie in [0, 1], got {}", self.max_leak),
            ));
        }
        if self.period_cap_factor == 0 {
            return Err(invalid("period_cap_factor", "must be at least 1"));
        }
        let t = self.voltage_thresholds();
        let (ll, _) = theoretical_msv(&self.line, PairClass::LL);
        let (hh, _) = theoretical_msv(&self.line, PairClass::HH);
        let (lo, hi) = if ll <= hh { (ll, hh) } else { (hh, ll) };
        if !(t.lower > 0.0 && t.lower < t.upper) {
            return Err(invalid(
                "thresholds",
                "must be positive and strictly ordered",
            ));
        }
        if !(lo < t.lower && t.upper < hi) {
            return Err(invalid(
                "thresholds",
                format!("must lie strictly between the LL level {ll} V² and the HH level {hh} V²"),
            ));
        }
        Ok(())
    }

    pub fn gamma_warning(&self) -> bool {
        self.gamma < GAMMA_WARN
    }

    /// Bit-sharing period `τ = γ/B`.
    pub fn bit_period(&self) -> f64 {
        self.gamma / self.line.noise_bandwidth()
    }

    pub fn sample_rate(&self) -> f64 {
        self.oversampling * self.line.noise_bandwidth()
    }

    /// Voltage thresholds in V², ascending.
    pub fn voltage_thresholds(&self) -> Thresholds {
        if let Some(t) = self.thresholds {
            return t;
        }
        let (ll, _) = theoretical_msv(&self.line, PairClass::LL);
        let (mid, _) = theoretical_msv(&self.line, PairClass::Mixed);
        let (hh, _) = theoretical_msv(&self.line, PairClass::HH);
        Thresholds {
            lower: log_interp(ll, mid, self.placement.lower_weight),
            upper: log_interp(mid, hh, self.placement.upper_weight),
        }
    }

    /// Current thresholds in A², ascending. HH carries the least current and LL the most.
    pub fn current_thresholds(&self) -> Thresholds {
        let (_, ll) = theoretical_msv(&self.line, PairClass::LL);
        let (_, mid) = theoretical_msv(&self.line, PairClass::Mixed);
        let (_, hh) = theoretical_msv(&self.line, PairClass::HH);
        Thresholds {
            lower: log_interp(hh, mid, 1.0 - self.placement.upper_weight),
            upper: log_interp(mid, ll, 1.0 - self.placement.lower_weight),
        }
    }
}

/// Outcome of one bit-sharing period.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BitPeriodRecord {
    pub alice_choice: ResistorChoice,
    pub bob_choice: ResistorChoice,
    /// Time-averaged `u_c²`, V².
    pub msv_u: f64,
    /// Time-averaged `i_c²`, A².
    pub msv_i: f64,
    pub classified: Level,
    pub kept: bool,
    pub alice_bit: Option<bool>,
    pub bob_bit: Option<bool>,
    pub alarm: bool,
}

impl BitPeriodRecord {
    pub fn permutation(&self) -> Permutation {
        Permutation::of(self.alice_choice, self.bob_choice)
    }

    pub fn misclassified(&self) -> bool {
        Level::from_class(self.permutation().class()) != self.classified
    }
}

/// Provenance of one candidate bit period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BitFlag {
    Secure,
    DiscardedPublic,
    Compromised,
}

/// A party's key: the secure bits in order, plus the provenance of every period.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyMaterial {
    bits: Vec<bool>,
    provenance: Vec<BitFlag>,
}

impl KeyMaterial {
    pub fn from_bits(bits: Vec<bool>) -> Self {
        let provenance = vec![BitFlag::Secure; bits.len()];
        Self { bits, provenance }
    }

    pub(crate) fn push(&mut self, flag: BitFlag, bit: Option<bool>) {
        self.provenance.push(flag);
        if flag == BitFlag::Secure {
            self.bits.push(bit.expect("secure period carries a bit"));
        }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn provenance(&self) -> &[BitFlag] {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn count(&self, flag: BitFlag) -> usize {
        self.provenance.iter().filter(|&&f| f == flag).count()
    }

    /// Bits packed MSB-first into bytes, final byte zero-padded.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.bits
            .chunks(8)
            .map(|chunk| {
                chunk
                    .iter()
                    .enumerate()
                    .fold(0u8, |acc, (k, &b)| acc | ((b as u8) << (7 - k)))
            })
            .collect()
    }

    pub fn to_hex(&self) -> String {
        self.to_bytes().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Bitwise exclusive-or with a pad of the same length.
    pub fn xor(&self, pad: &KeyMaterial) -> Option<KeyMaterial> {
        if pad.len() != self.len() {
            return None;
        }
        Some(KeyMaterial::from_bits(
            self.bits
                .iter()
                .zip(&pad.bits)
                .map(|(a, b)| a ^ b)
                .collect(),
        ))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ExchangeStats {
    /// Periods per ground-truth permutation, in LL, LH, HL, HH order.
    pub counts: [u64; 4],
    pub misclassified: u64,
    pub alarms: u64,
    pub elapsed: f64,
}

impl ExchangeStats {
    pub fn periods(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn count(&self, p: Permutation) -> u64 {
        self.counts[p.index()]
    }

    fn record(&mut self, rec: &BitPeriodRecord, bit_period: f64) {
        self.counts[rec.permutation().index()] += 1;
        self.misclassified += rec.misclassified() as u64;
        self.alarms += rec.alarm as u64;
        self.elapsed = self.periods() as f64 * bit_period;
    }
}

/// Two independent fair resistor choices (Alice, Bob).
pub fn choose_resistors<R: Rng + ?Sized>(rng: &mut R) -> (ResistorChoice, ResistorChoice) {
    let pick = |rng: &mut R| {
        if rng.random::<bool>() {
            ResistorChoice::High
        } else {
            ResistorChoice::Low
        }
    };
    let alice = pick(rng);
    let bob = pick(rng);
    (alice, bob)
}

/// Closed-below level decision: a value exactly on a threshold falls in the band beneath it.
pub fn classify_level(msv_u: f64, thresholds: &Thresholds) -> Level {
    if msv_u <= thresholds.lower {
        Level::Low
    } else if msv_u <= thresholds.upper {
        Level::Mid
    } else {
        Level::High
    }
}

fn classify_current(msv_i: f64, thresholds: &Thresholds) -> Level {
    // Current ordering is reversed: the largest current means both resistors are low.
    match classify_level(msv_i, thresholds) {
        Level::Low => Level::High,
        Level::Mid => Level::Mid,
        Level::High => Level::Low,
    }
}

fn classify(config: &ExchangeConfig, msv_u: f64, msv_i: f64) -> Level {
    let by_voltage = classify_level(msv_u, &config.voltage_thresholds());
    match config.classifier {
        Classifier::VoltageOnly => by_voltage,
        Classifier::Joint => {
            let by_current = classify_current(msv_i, &config.current_thresholds());
            match (by_voltage, by_current) {
                (v, c) if v == c => v,
                (Level::Mid, c) => c,
                (v, _) => v,
            }
        }
    }
}

/// Drive both sources for one bit period and solve the loop.
///
/// Alice's generator draws from stream 0 of `seed`, Bob's from stream 1.
pub fn synthesize_period(
    config: &ExchangeConfig,
    choices: (ResistorChoice, ResistorChoice),
    seed: u64,
) -> Result<LoopSignals> {
    let line = &config.line;
    let bandwidth = line.noise_bandwidth();
    let fs = config.sample_rate();
    let tau = config.bit_period();
    let r_a = line.resistance(choices.0.is_high());
    let r_b = line.resistance(choices.1.is_high());

    let source = |r: f64, stream: u64| -> Result<_> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let rms = johnson_rms(r, line.t_eff, bandwidth)?;
        sample_bandlimited_gaussian_with(rms, bandwidth, fs, tau, &mut rng)
    };
    let u_a = source(r_a, 0)?;
    let u_b = source(r_b, 1)?;
    solve_loop(&u_a, r_a, &u_b, r_b)
}

/// Build the period record from what each end measured.
///
/// The level decision uses Alice's readings, which she publishes over the
/// authenticated channel; Bob's readings only feed the alarm.
pub fn record_period(
    config: &ExchangeConfig,
    choices: (ResistorChoice, ResistorChoice),
    alice_view: &LoopSignals,
    bob_view: &LoopSignals,
) -> Result<BitPeriodRecord> {
    let alarm = monitor_endpoints(alice_view, bob_view, config.alarm_tolerance)?;
    let msv_u = alice_view.msv_voltage();
    let msv_i = alice_view.msv_current();
    let classified = classify(config, msv_u, msv_i);
    let kept = classified == Level::Mid;
    let (alice_bit, bob_bit) = if kept {
        let (a, b) = (choices.0.bit(), choices.1.bit());
        match config.inverting_party {
            Party::Bob => (Some(a), Some(!b)),
            Party::Alice => (Some(!a), Some(b)),
        }
    } else {
        (None, None)
    };
    Ok(BitPeriodRecord {
        alice_choice: choices.0,
        bob_choice: choices.1,
        msv_u,
        msv_i,
        classified,
        kept,
        alice_bit,
        bob_bit,
        alarm,
    })
}

/// Run one unattacked bit period.
pub fn run_bit_period(
    config: &ExchangeConfig,
    choices: (ResistorChoice, ResistorChoice),
    seed: u64,
) -> Result<BitPeriodRecord> {
    let signals = synthesize_period(config, choices, seed)?;
    record_period(config, choices, &signals, &signals)
}

/// Run one bit period, optionally with an active injection on the line.
pub fn run_bit_period_attacked(
    config: &ExchangeConfig,
    choices: (ResistorChoice, ResistorChoice),
    seed: u64,
    attack: Option<&InjectionAttack>,
) -> Result<(BitPeriodRecord, LoopSignals)> {
    let signals = synthesize_period(config, choices, seed)?;
    match attack {
        None => {
            let rec = record_period(config, choices, &signals, &signals)?;
            Ok((rec, signals))
        }
        Some(attack) => {
            let r_a = config.line.resistance(choices.0.is_high());
            let r_b = config.line.resistance(choices.1.is_high());
            let (alice, bob) = apply_injection(&signals, r_a, r_b, attack, seed)?;
            let rec = record_period(config, choices, &alice, &bob)?;
            Ok((rec, alice))
        }
    }
}

/// Exchange bits until `target_bits` have been kept.
///
/// Returns Alice's key, Bob's key and the run statistics.
pub fn run_key_exchange(
    config: &ExchangeConfig,
    target_bits: usize,
    seed: u64,
) -> Result<(KeyMaterial, KeyMaterial, ExchangeStats)> {
    run_key_exchange_with(config, target_bits, seed, None)
}

pub fn run_key_exchange_with(
    config: &ExchangeConfig,
    target_bits: usize,
    seed: u64,
    attack: Option<&InjectionAttack>,
) -> Result<(KeyMaterial, KeyMaterial, ExchangeStats)> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tau = config.bit_period();
    let cap = config
        .period_cap_factor
        .saturating_mul(2)
        .saturating_mul(target_bits as u64);

    let mut stats = ExchangeStats::default();
    let mut records = Vec::new();
    let mut kept = 0usize;
    while kept < target_bits {
        if stats.periods() >= cap {
            return Err(KljnError::Timeout {
                cap,
                kept,
                target: target_bits,
            });
        }
        let choices = choose_resistors(&mut rng);
        let period_seed: u64 = rng.random();
        let (rec, _) = run_bit_period_attacked(config, choices, period_seed, attack)?;
        stats.record(&rec, tau);
        kept += rec.kept as usize;
        records.push(rec);
    }

    let alarmed: Vec<bool> = records.iter().filter(|r| r.kept).map(|r| r.alarm).collect();
    let discard = leak_report(&alarmed, config.max_leak);

    let mut alice = KeyMaterial::default();
    let mut bob = KeyMaterial::default();
    let mut candidate = 0;
    for rec in &records {
        if !rec.kept {
            alice.push(BitFlag::DiscardedPublic, None);
            bob.push(BitFlag::DiscardedPublic, None);
            continue;
        }
        let flag = if discard[candidate] {
            BitFlag::Compromised
        } else {
            BitFlag::Secure
        };
        candidate += 1;
        alice.push(flag, rec.alice_bit);
        bob.push(flag, rec.bob_bit);
    }
    Ok((alice, bob, stats))
}

/// Relative-deviation comparison of the two endpoint readings.
///
/// Deviations are scaled by the RMS of Alice's trace of the same quantity.
pub fn monitor_endpoints(alice: &LoopSignals, bob: &LoopSignals, tolerance: f64) -> Result<bool> {
    if !alice.same_grid(bob) || alice.voltage.len() != alice.current.len() {
        return Err(KljnError::GridMismatch(format!(
            "endpoint views have {} and {} samples",
            alice.len(),
            bob.len()
        )));
    }
    let exceeds = |a: &[f64], b: &[f64]| {
        let scale = crate::noise::mean_square(a).sqrt().max(f64::MIN_POSITIVE);
        a.iter()
            .zip(b)
            .any(|(x, y)| (x - y).abs() / scale > tolerance)
    };
    Ok(exceeds(&alice.voltage, &bob.voltage) || exceeds(&alice.current, &bob.current))
}

/// Empirical misclassification rate at one `γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BerPoint {
    pub gamma: f64,
    pub runs: u64,
    pub errors: u64,
}

impl BerPoint {
    pub fn ber(&self) -> f64 {
        self.errors as f64 / self.runs as f64
    }
}

/// Fraction of bit periods whose level decision differs from the ground truth, per `γ`.
///
/// The `k`-th entry of `gammas` draws from stream `k` of `seed`.
pub fn estimate_ber(
    config: &ExchangeConfig,
    gammas: &[f64],
    runs_per_gamma: u64,
    seed: u64,
) -> Result<Vec<BerPoint>> {
    if runs_per_gamma < 100 {
        return Err(invalid(
            "runs_per_gamma",
            format!("must be at least 100, got {runs_per_gamma}"),
        ));
    }
    gammas
        .iter()
        .enumerate()
        .map(|(k, &gamma)| {
            let cfg = config.with_gamma(gamma);
            cfg.validate()?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut errors = 0;
            for _ in 0..runs_per_gamma {
                let choices = choose_resistors(&mut rng);
                let rec = run_bit_period(&cfg, choices, rng.random())?;
                errors += rec.misclassified() as u64;
            }
            Ok(BerPoint {
                gamma,
                runs: runs_per_gamma,
                errors,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ResistorChoice::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = ExchangeConfig::default();
        cfg.validate().unwrap();
        assert!((cfg.bit_period() - 5e-3).abs() < 1e-15);
        assert_eq!(cfg.sample_rate(), 2e5);
        assert!(!cfg.gamma_warning());
        assert!(cfg.with_gamma(5.0).gamma_warning());
        assert!(cfg.with_gamma(0.5).validate().is_err());
    }

    #[test]
    fn thresholds_bracket_levels() {
        let cfg = ExchangeConfig::default();
        let t = cfg.voltage_thresholds();
        let (ll, _) = theoretical_msv(&cfg.line, PairClass::LL);
        let (mid, _) = theoretical_msv(&cfg.line, PairClass::Mixed);
        let (hh, _) = theoretical_msv(&cfg.line, PairClass::HH);
        assert!(ll < t.lower && t.lower < mid && mid < t.upper && t.upper < hh);

        let geo = ExchangeConfig {
            placement: ThresholdPlacement::GEOMETRIC,
            ..cfg
        }
        .voltage_thresholds();
        assert!((geo.lower - (ll * mid).sqrt()).abs() / geo.lower < 1e-12);
        assert!((geo.upper - (mid * hh).sqrt()).abs() / geo.upper < 1e-12);
    }

    #[test]
    fn explicit_thresholds_are_checked() {
        let (ll, _) = theoretical_msv(&KljnLineConfig::default(), PairClass::LL);
        let bad = ExchangeConfig {
            thresholds: Some(Thresholds {
                lower: ll * 0.5,
                upper: ll * 2.0,
            }),
            ..ExchangeConfig::default()
        };
        assert!(bad.validate().is_err());
        let unordered = ExchangeConfig {
            thresholds: Some(Thresholds {
                lower: ll * 3.0,
                upper: ll * 2.0,
            }),
            ..ExchangeConfig::default()
        };
        assert!(unordered.validate().is_err());
    }

    #[test]
    fn classify_level_bands() {
        let cfg = ExchangeConfig::default();
        let t = cfg.voltage_thresholds();
        let (ll, _) = theoretical_msv(&cfg.line, PairClass::LL);
        let (mid, _) = theoretical_msv(&cfg.line, PairClass::Mixed);
        let (hh, _) = theoretical_msv(&cfg.line, PairClass::HH);
        assert_eq!(classify_level(ll, &t), Level::Low);
        assert_eq!(classify_level(mid, &t), Level::Mid);
        assert_eq!(classify_level(hh, &t), Level::High);
        assert_eq!(classify_level(t.lower, &t), Level::Low);
        assert_eq!(classify_level(t.upper, &t), Level::Mid);
        assert_eq!(classify_level(0.0, &t), Level::Low);
    }

    #[test]
    fn choices_are_reproducible() {
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..64)
                .map(|_| choose_resistors(&mut rng))
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn permutation_frequencies_are_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let mut counts = [0u32; 4];
        for _ in 0..n {
            let (a, b) = choose_resistors(&mut rng);
            counts[Permutation::of(a, b).index()] += 1;
        }
        let band = 3.0 * (0.25f64 * 0.75 / n as f64).sqrt();
        for c in counts {
            assert!((c as f64 / n as f64 - 0.25).abs() <= band, "{counts:?}");
        }
    }

    #[test]
    fn mixed_period_bits_follow_alice() {
        let cfg = ExchangeConfig::default();
        for (choices, expect) in [((Low, High), false), ((High, Low), true)] {
            let rec = run_bit_period(&cfg, choices, 77).unwrap();
            if rec.classified == Level::Mid {
                assert_eq!(rec.alice_bit, Some(expect));
                assert_eq!(rec.bob_bit, Some(expect));
            }
        }
    }

    #[test]
    fn inverting_alice_follows_bob() {
        let cfg = ExchangeConfig {
            inverting_party: Party::Alice,
            ..ExchangeConfig::default()
        };
        let rec = run_bit_period(&cfg, (Low, High), 5).unwrap();
        assert_eq!(rec.classified, Level::Mid);
        assert_eq!(rec.alice_bit, Some(true));
        assert_eq!(rec.bob_bit, Some(true));
    }

    #[test]
    fn public_periods_are_discarded() {
        let cfg = ExchangeConfig::default();
        for seed in 0..50 {
            for choices in [(Low, Low), (High, High)] {
                let rec = run_bit_period(&cfg, choices, seed).unwrap();
                assert!(!rec.alarm);
                if !rec.misclassified() {
                    assert!(!rec.kept);
                    assert_eq!(rec.alice_bit, None);
                }
            }
        }
    }

    #[test]
    fn empty_target_runs_no_periods() {
        let (a, b, stats) = run_key_exchange(&ExchangeConfig::default(), 0, 1).unwrap();
        assert!(a.is_empty() && b.is_empty());
        assert_eq!(stats.periods(), 0);
        assert_eq!(stats.elapsed, 0.0);
    }

    #[test]
    fn key_exchange_stats_are_consistent() {
        let cfg = ExchangeConfig::default();
        let (a, b, stats) = run_key_exchange(&cfg, 64, 3).unwrap();
        assert_eq!(a.len(), 64);
        assert_eq!(b.len(), 64);
        assert_eq!(a.provenance().len() as u64, stats.periods());
        assert!((stats.elapsed - stats.periods() as f64 * cfg.bit_period()).abs() < 1e-12);
        assert_eq!(stats.alarms, 0);
        assert_eq!(a.count(BitFlag::Secure), a.len());
    }

    #[test]
    fn tiny_cap_times_out() {
        let cfg = ExchangeConfig {
            period_cap_factor: 1,
            thresholds: Some(Thresholds {
                // Both boundaries sit between the mixed and HH levels, so nothing reads intermediate.
                lower: 5.6e-3 * 5e3 * 1.01,
                upper: 5.6e-3 * 5e3 * 1.02,
            }),
            ..ExchangeConfig::default()
        };
        let out = run_key_exchange(&cfg, 4, 0);
        assert!(
            matches!(out, Err(KljnError::Timeout { cap: 8, .. })),
            "{out:?}"
        );
    }

    #[test]
    fn hex_packing() {
        let key = KeyMaterial::from_bits(vec![
            true, false, true, false, false, false, false, true, true,
        ]);
        assert_eq!(key.to_hex(), "a180");
        let pad = KeyMaterial::from_bits(vec![true; 9]);
        let ct = key.xor(&pad).unwrap();
        assert_eq!(ct.xor(&pad).unwrap(), key);
        assert!(key.xor(&KeyMaterial::from_bits(vec![true])).is_none());
    }

    #[test]
    fn monitor_flags_single_sample_offset() {
        let cfg = ExchangeConfig::default();
        let s = synthesize_period(&cfg, (Low, High), 12).unwrap();
        assert!(!monitor_endpoints(&s, &s, cfg.alarm_tolerance).unwrap());
        let mut bob = s.clone();
        let rms = s.msv_current().sqrt();
        bob.current[17] += 10.0 * cfg.alarm_tolerance * rms;
        assert!(monitor_endpoints(&s, &bob, cfg.alarm_tolerance).unwrap());
        bob.current.pop();
        assert!(monitor_endpoints(&s, &bob, cfg.alarm_tolerance).is_err());
    }

    #[test]
    fn ber_requires_enough_runs() {
        assert!(estimate_ber(&ExchangeConfig::default(), &[10.0], 99, 0).is_err());
    }

    #[test]
    fn ber_is_deterministic() {
        let cfg = ExchangeConfig::default();
        let a = estimate_ber(&cfg, &[10.0, 30.0], 200, 4).unwrap();
        let b = estimate_ber(&cfg, &[10.0, 30.0], 200, 4).unwrap();
        assert_eq!(a, b);
    }
}
