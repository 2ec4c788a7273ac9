//! Passive and active attacks on the line.
//!
//! The passive eavesdropper sees `u_c(t)` and `i_c(t)` at full bandwidth
//! without noise and tries to tell LH from HL. The active attacker injects a
//! current at a single lumped node on the wire; the two ends then read
//! different currents, which is what the endpoint comparison catches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{KljnError, Result};
use crate::noise::{theoretical_msv, LoopSignals, PairClass};
use crate::protocol::{run_bit_period_attacked, ExchangeConfig, Level, ResistorChoice};

/// What Eve records during one bit period.
#[derive(Debug, Clone, PartialEq)]
pub struct EveObservation {
    pub signals: LoopSignals,
    pub msv_u: f64,
    pub msv_i: f64,
    /// `⟨u_c·i_c⟩` over the period.
    pub cross: f64,
}

impl EveObservation {
    pub fn new(signals: LoopSignals) -> Self {
        let msv_u = signals.msv_voltage();
        let msv_i = signals.msv_current();
        let cross = signals.cross_mean();
        Self {
            signals,
            msv_u,
            msv_i,
            cross,
        }
    }
}

/// Secure-period orientation: which party holds the low resistor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    LH,
    HL,
}

impl Orientation {
    pub fn choices(self) -> (ResistorChoice, ResistorChoice) {
        match self {
            Orientation::LH => (ResistorChoice::Low, ResistorChoice::High),
            Orientation::HL => (ResistorChoice::High, ResistorChoice::Low),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PassiveStrategy {
    /// Compare the voltage mean square against the theoretical intermediate level.
    MsvThreshold,
    /// Sign of the net power flow `⟨u_c·i_c⟩`.
    CorrelationSign,
    Random,
}

impl PassiveStrategy {
    pub const ALL: [PassiveStrategy; 3] = [
        PassiveStrategy::MsvThreshold,
        PassiveStrategy::CorrelationSign,
        PassiveStrategy::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PassiveStrategy::MsvThreshold => "msv-threshold",
            PassiveStrategy::CorrelationSign => "correlation-sign",
            PassiveStrategy::Random => "random",
        }
    }
}

/// Eve's guess of the orientation of an intermediate-level period.
pub fn passive_guess<R: Rng + ?Sized>(
    observation: &EveObservation,
    strategy: PassiveStrategy,
    config: &ExchangeConfig,
    rng: &mut R,
) -> Orientation {
    let pick = |lh: bool| if lh { Orientation::LH } else { Orientation::HL };
    match strategy {
        PassiveStrategy::MsvThreshold => {
            let (mid, _) = theoretical_msv(&config.line, PairClass::Mixed);
            pick(observation.msv_u > mid)
        }
        // Power flows from the hotter (larger-noise) side, which would be the
        // high resistor if the line were not in equilibrium.
        PassiveStrategy::CorrelationSign => pick(observation.cross < 0.0),
        PassiveStrategy::Random => pick(rng.random::<bool>()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Waveform {
    Constant,
    Gaussian,
}

/// Current injected by Eve at the mid-line node over `[start, stop)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InjectionAttack {
    /// Amperes; peak for `Constant`, standard deviation for `Gaussian`.
    pub amplitude: f64,
    pub waveform: Waveform,
    pub start: usize,
    pub stop: usize,
}

impl InjectionAttack {
    /// A constant injection covering an entire trace of `len` samples.
    pub fn persistent(amplitude: f64, len: usize) -> Self {
        Self {
            amplitude,
            waveform: Waveform::Constant,
            start: 0,
            stop: len,
        }
    }
}

/// Apply a lumped-node current injection and return (Alice's view, Bob's view).
///
/// With `α = r_b/(r_a + r_b)` Alice's end reads `i_c + α·i_E`, Bob's end
/// `i_c − (1−α)·i_E`, and the node voltage both ends see rises by
/// `i_E·r_a·r_b/(r_a + r_b)`.
pub fn apply_injection(
    signals: &LoopSignals,
    r_a: f64,
    r_b: f64,
    attack: &InjectionAttack,
    seed: u64,
) -> Result<(LoopSignals, LoopSignals)> {
    let len = signals.len();
    if attack.start > attack.stop || attack.stop > len {
        return Err(KljnError::WindowOutOfBounds {
            start: attack.start,
            stop: attack.stop,
            len,
        });
    }
    if !(attack.amplitude >= 0.0) {
        return Err(crate::error::invalid("amplitude", "must be non-negative"));
    }
    let alpha = split_ratio(r_a, r_b);
    let r_par = r_a * r_b / (r_a + r_b);

    let mut alice = signals.clone();
    let mut bob = signals.clone();
    if attack.amplitude == 0.0 {
        return Ok((alice, bob));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(2);
    for k in attack.start..attack.stop {
        let i_e = match attack.waveform {
            Waveform::Constant => attack.amplitude,
            Waveform::Gaussian => attack.amplitude * rng.sample::<f64, _>(StandardNormal),
        };
        let dv = i_e * r_par;
        alice.voltage[k] += dv;
        bob.voltage[k] += dv;
        alice.current[k] += alpha * i_e;
        bob.current[k] -= (1.0 - alpha) * i_e;
    }
    Ok((alice, bob))
}

/// Fraction of the injected current that flows toward Alice's end.
pub fn split_ratio(r_a: f64, r_b: f64) -> f64 {
    r_b / (r_a + r_b)
}

/// Decide which candidate bits to drop given per-bit alarm flags.
///
/// Alarmed bits are compromised. When their fraction exceeds `max_leak` all of
/// them are dropped; otherwise they are tolerated. The same decision applies
/// to both parties' copies.
pub fn leak_report(alarmed: &[bool], max_leak: f64) -> Vec<bool> {
    let compromised = alarmed.iter().filter(|&&a| a).count();
    if alarmed.is_empty() || compromised as f64 / alarmed.len() as f64 <= max_leak {
        return vec![false; alarmed.len()];
    }
    alarmed.to_vec()
}

/// Accuracy of one passive strategy over a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyAccuracy {
    pub strategy: PassiveStrategy,
    pub correct: u64,
    pub total: u64,
}

impl StrategyAccuracy {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PassiveSweep {
    pub accuracies: Vec<StrategyAccuracy>,
    /// Mean of the per-period `⟨u_c·i_c⟩`, W.
    pub cross_mean: f64,
    /// Standard error of `cross_mean`.
    pub cross_stderr: f64,
}

/// Collect `per_orientation` intermediate-level periods for each of LH and HL
/// and score every passive strategy on them.
pub fn passive_sweep(
    config: &ExchangeConfig,
    per_orientation: u64,
    seed: u64,
) -> Result<PassiveSweep> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut eve_rng = ChaCha8Rng::seed_from_u64(seed);
    eve_rng.set_stream(1);

    let mut correct = [0u64; PassiveStrategy::ALL.len()];
    let mut crosses = Vec::with_capacity(2 * per_orientation as usize);
    for orientation in [Orientation::LH, Orientation::HL] {
        let mut collected = 0;
        while collected < per_orientation {
            let (rec, signals) =
                run_bit_period_attacked(config, orientation.choices(), rng.random(), None)?;
            if rec.classified != Level::Mid {
                continue;
            }
            collected += 1;
            let obs = EveObservation::new(signals);
            crosses.push(obs.cross);
            for (slot, strategy) in correct.iter_mut().zip(PassiveStrategy::ALL) {
                *slot +=
                    (passive_guess(&obs, strategy, config, &mut eve_rng) == orientation) as u64;
            }
        }
    }

    let n = crosses.len() as f64;
    let mean = crosses.iter().sum::<f64>() / n;
    let var = crosses.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok(PassiveSweep {
        accuracies: PassiveStrategy::ALL
            .iter()
            .zip(correct)
            .map(|(&strategy, correct)| StrategyAccuracy {
                strategy,
                correct,
                total: 2 * per_orientation,
            })
            .collect(),
        cross_mean: mean,
        cross_stderr: (var / n).sqrt(),
    })
}

/// Alarm count at one injection amplitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InjectionPoint {
    /// Injection amplitude divided by the theoretical RMS wire current.
    pub relative_amplitude: f64,
    pub periods: u64,
    pub alarms: u64,
}

impl InjectionPoint {
    pub fn alarm_rate(&self) -> f64 {
        self.alarms as f64 / self.periods as f64
    }
}

/// Persistent constant injections at each relative amplitude, `periods` random bit periods each.
pub fn injection_sweep(
    config: &ExchangeConfig,
    relative_amplitudes: &[f64],
    periods: u64,
    seed: u64,
) -> Result<Vec<InjectionPoint>> {
    config.validate()?;
    let len = (config.sample_rate() * config.bit_period()).round() as usize;
    relative_amplitudes
        .iter()
        .enumerate()
        .map(|(k, &relative)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut alarms = 0;
            for _ in 0..periods {
                let choices = crate::protocol::choose_resistors(&mut rng);
                let class = crate::protocol::Permutation::of(choices.0, choices.1).class();
                let (_, msv_i) = theoretical_msv(&config.line, class);
                let attack = InjectionAttack::persistent(relative * msv_i.sqrt(), len);
                let (rec, _) =
                    run_bit_period_attacked(config, choices, rng.random(), Some(&attack))?;
                alarms += rec.alarm as u64;
            }
            Ok(InjectionPoint {
                relative_amplitude: relative,
                periods,
                alarms,
            })
        })
        .collect()
}
