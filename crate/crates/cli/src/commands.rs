use kljn_core::adversary::{injection_sweep, passive_sweep};
use kljn_core::lifetime::key_lifetime;
use kljn_core::protocol::{estimate_ber, run_key_exchange, BitFlag, ExchangeConfig, Permutation};
use kljn_core::vanet::{build_topology, run_scenario};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::*;

fn warn_exchange(cfg: &ExchangeConfig) {
    if cfg.line.violates_no_wave_guidance() {
        eprintln!(
            "warning: theta = {} is outside the no-wave guidance",
            cfg.line.theta
        );
    }
    if cfg.gamma_warning() {
        eprintln!("warning: gamma = {} gives a high bit error rate", cfg.gamma);
    }
}

fn check_runs(runs: usize) -> Result<(), CliError> {
    if runs == 0 {
        return Err(CliError::Config("--runs must be at least 1".into()));
    }
    Ok(())
}

pub fn exchange(cfg: &RunConfig, seed: u64, runs: usize, out: &OutDir) -> Result<(), CliError> {
    check_runs(runs)?;
    cfg.exchange.validate()?;
    warn_exchange(&cfg.exchange);
    let results = (0..runs)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            run_key_exchange(&cfg.exchange, cfg.key_bits, s).map(|r| (s, r))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let batch = runs > 1;
    let mut rows = Vec::with_capacity(runs);
    for (i, (s, (alice, bob, stats))) in results.into_iter().enumerate() {
        out.text(
            &indexed("alice_key", "hex", i, batch),
            &(alice.to_hex() + "\n"),
        )?;
        out.text(&indexed("bob_key", "hex", i, batch), &(bob.to_hex() + "\n"))?;
        rows.push(ExchangeRow {
            run: i,
            seed: s,
            periods: stats.periods(),
            ll: stats.count(Permutation::LL),
            lh: stats.count(Permutation::LH),
            hl: stats.count(Permutation::HL),
            hh: stats.count(Permutation::HH),
            secure_bits: alice.count(BitFlag::Secure),
            compromised_bits: alice.count(BitFlag::Compromised),
            misclassified: stats.misclassified,
            alarms: stats.alarms,
            elapsed_s: stats.elapsed,
            keys_match: alice.bits() == bob.bits(),
        });
    }
    out.csv("exchange_stats.csv", &rows)
}

pub fn lifetime(cfg: &RunConfig, out: &OutDir) -> Result<(), CliError> {
    let p = &cfg.lifetime;
    let r = key_lifetime(p)?;
    if r.no_wave_warning {
        eprintln!(
            "warning: theta = {} is outside the no-wave guidance",
            p.theta
        );
    }
    if r.gamma_warning {
        eprintln!("warning: gamma = {} gives a high bit error rate", p.gamma);
    }
    out.csv(
        "lifetime.csv",
        &[LifetimeRow {
            theta: p.theta,
            wave_speed_mps: p.wave_speed,
            line_length_m: p.line_length,
            gamma: p.gamma,
            key_length_bits: p.key_length,
            parallel_channels: p.parallel_channels,
            car_density: r.car_density,
            noise_bandwidth_hz: r.noise_bandwidth,
            secure_bit_rate_bps: r.secure_bit_rate,
            per_car_rate_bps: r.per_car_rate,
            key_lifetime_s: r.key_lifetime,
            no_wave_warning: r.no_wave_warning,
            gamma_warning: r.gamma_warning,
        }],
    )
}

pub fn simulate(cfg: &RunConfig, seed: u64, runs: usize, out: &OutDir) -> Result<(), CliError> {
    check_runs(runs)?;
    let topo = build_topology(&cfg.topology, &cfg.link)?;
    let results = (0..runs)
        .into_par_iter()
        .map(|i| {
            let s = seed.wrapping_add(i as u64);
            run_scenario(&topo, &cfg.traffic, &cfg.scenario, s).map(|r| (s, r))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let batch = runs > 1;
    let mut metrics = Vec::with_capacity(runs);
    let mut rsds = Vec::new();
    for (i, (s, outcome)) in results.into_iter().enumerate() {
        let m = &outcome.metrics;
        metrics.push(MetricsRow {
            run: i,
            seed: s,
            duration_s: m.duration_s,
            vehicles: m.vehicles,
            donation_attempts: m.donation_attempts,
            donation_successes: m.donation_successes,
            failures_pool_empty: m.failures_pool_empty,
            failures_window_too_short: m.failures_window_too_short,
            failures_no_former_key: m.failures_no_former_key,
            missed_detections: m.missed_detections,
            pool_depletion_episodes: m.pool_depletion_episodes,
            bits_generated: m.bits_generated.iter().sum(),
            bits_donated: m.bits_donated.iter().sum(),
            refresh_count: m.refresh_count,
            mean_refresh_interval_s: m.mean_refresh_interval_s,
            max_refresh_interval_s: m.max_refresh_interval_s,
            mean_vehicle_key_rate_bps: m.mean_vehicle_key_rate,
            max_rsd_load: m.max_rsd_load,
            chain_failures: m.chain_failures,
            events_processed: m.events_processed,
        });
        for (k, rsd) in topo.rsds.iter().enumerate() {
            let pools = topo.pools.iter().enumerate().filter(|(_, p)| p.rsd == k);
            let (generated, donated) = pools.fold((0, 0), |(g, d), (j, _)| {
                (g + m.bits_generated[j], d + m.bits_donated[j])
            });
            rsds.push(RsdRow {
                run: i,
                rsd_id: rsd.id,
                pads: rsd.rskps.len(),
                load: m.per_rsd_load[k],
                bits_generated: generated,
                bits_donated: donated,
            });
        }
        if cfg.scenario.record_events {
            out.csv(&indexed("events", "csv", i, batch), &outcome.events)?;
        }
    }
    out.csv("metrics.csv", &metrics)?;
    out.csv("rsd_metrics.csv", &rsds)
}

pub fn attack(
    cfg: &RunConfig,
    seed: u64,
    runs: Option<usize>,
    out: &OutDir,
) -> Result<(), CliError> {
    let plan = &cfg.attack;
    let (per_orientation, periods) = match runs {
        Some(n) => {
            check_runs(n)?;
            (n as u64, n as u64)
        }
        None => (plan.per_orientation, plan.injection_periods),
    };
    if per_orientation == 0 || periods == 0 {
        return Err(CliError::Config(
            "attack: period counts must be at least 1".into(),
        ));
    }
    cfg.exchange.validate()?;
    warn_exchange(&cfg.exchange);
    let (passive, active) = rayon::join(
        || passive_sweep(&cfg.exchange, per_orientation, seed),
        || {
            injection_sweep(
                &cfg.exchange,
                &plan.relative_amplitudes,
                periods,
                seed.wrapping_add(1),
            )
        },
    );
    let passive = passive?;
    let rows: Vec<_> = passive
        .accuracies
        .iter()
        .map(|a| PassiveRow {
            strategy: a.strategy.name(),
            correct: a.correct,
            total: a.total,
            accuracy: a.accuracy(),
            cross_mean_w: passive.cross_mean,
            cross_stderr_w: passive.cross_stderr,
        })
        .collect();
    out.csv("passive_accuracy.csv", &rows)?;
    let rows: Vec<_> = active?
        .iter()
        .map(|p| InjectionRow {
            relative_amplitude: p.relative_amplitude,
            periods: p.periods,
            alarms: p.alarms,
            alarm_rate: p.alarm_rate(),
        })
        .collect();
    out.csv("injection_alarms.csv", &rows)
}

pub fn ber(cfg: &RunConfig, seed: u64, runs: Option<usize>, out: &OutDir) -> Result<(), CliError> {
    let runs = runs.map(|n| n as u64).unwrap_or(cfg.ber.runs);
    if cfg
        .ber
        .gammas
        .iter()
        .any(|&g| g < kljn_core::protocol::GAMMA_WARN)
    {
        eprintln!(
            "warning: gamma below {} gives a high bit error rate",
            kljn_core::protocol::GAMMA_WARN
        );
    }
    let points = estimate_ber(&cfg.exchange, &cfg.ber.gammas, runs, seed)?;
    let rows: Vec<_> = points
        .iter()
        .map(|p| BerRow {
            gamma: p.gamma,
            runs: p.runs,
            errors: p.errors,
            ber: p.ber(),
        })
        .collect();
    out.csv("ber.csv", &rows)
}
