use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;
use serde::{Deserialize, Serialize};

use super::event::{EventKind, EventLogRow, EventQueue, Payload};
use super::topology::{DetectorSpec, Topology};
use crate::error::{invalid, Result};
use crate::protocol::{run_key_exchange, ExchangeConfig, KeyMaterial};

/// Vehicle population and demand.
///
/// Every vehicle is homed to one RSD and passes one of its lane pads (picked
/// uniformly) as a Poisson process, so each lane sees Poisson arrivals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficModel {
    pub fleet_size: usize,
    /// Mean time between consecutive pad passes of one vehicle, seconds.
    pub mean_pass_interval_s: f64,
    pub speed_min_mps: f64,
    pub speed_max_mps: f64,
    /// Relative share of the fleet homed to each RSD. Absent: even split over RSDs with pads.
    pub home_weights: Option<Vec<f64>>,
    /// Provision every vehicle with a registration key at time zero.
    pub bootstrap_keys: bool,
    /// Keys at least this old are refreshed on the next pass. Zero means every pass asks.
    pub key_max_age_s: f64,
}

impl Default for TrafficModel {
    fn default() -> Self {
        Self {
            fleet_size: 1000,
            mean_pass_interval_s: 60.0,
            speed_min_mps: 20.0,
            speed_max_mps: 35.0,
            home_weights: None,
            bootstrap_keys: true,
            key_max_age_s: 0.0,
        }
    }
}

/// Where pool bits come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KeySource {
    /// Uniform random bits delivered at the line's secure bit rate.
    #[default]
    Random,
    /// Run the full bit-level exchange for every key quantum (slow).
    Kljn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSettings {
    pub duration_s: f64,
    /// Pool capacity in whole keys.
    pub pool_capacity_keys: usize,
    pub key_source: KeySource,
    pub record_events: bool,
}

impl Default for ScenarioSettings {
    fn default() -> Self {
        Self {
            duration_s: 10_000.0,
            pool_capacity_keys: 100,
            key_source: KeySource::Random,
            record_events: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vehicle {
    pub id: usize,
    /// Home RSD index, if any RSD serves this vehicle.
    pub home: Option<usize>,
    /// Lane of the most recent pad pass.
    pub lane: Option<u32>,
    pub speed: f64,
    pub current_key: Option<KeyMaterial>,
    pub former_key: Option<KeyMaterial>,
    pub key_issued_at: f64,
    pub bits_received: u64,
    expired: bool,
    busy: bool,
    seen: bool,
}

impl Vehicle {
    pub fn key_age(&self, now: f64) -> Option<f64> {
        self.current_key.as_ref().map(|_| now - self.key_issued_at)
    }

    /// Distance driven since time zero at constant speed.
    pub fn position(&self, now: f64) -> f64 {
        self.speed * now
    }

    fn needs_key(&self) -> bool {
        !self.busy && (self.current_key.is_none() || self.expired)
    }
}

#[derive(Debug, Clone)]
struct KeyPool {
    bits: std::collections::VecDeque<bool>,
    generated: u64,
    donated: u64,
    rng: ChaCha8Rng,
}

/// Outcome of a pad detector firing for one pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    /// `None` when the detector missed the vehicle.
    pub request_time: Option<f64>,
    /// Whether the request fires while the vehicle is still on the pad.
    pub within_dwell: bool,
}

/// The detector fires `latency` after pad entry unless it misses the vehicle.
pub fn detect_vehicle<R: Rng + ?Sized>(
    entry_time: f64,
    dwell: f64,
    detector: &DetectorSpec,
    rng: &mut R,
) -> Detection {
    let missed = detector.miss_probability > 0.0 && rng.random::<f64>() < detector.miss_probability;
    Detection {
        request_time: (!missed).then_some(entry_time + detector.latency_s),
        within_dwell: detector.latency_s <= dwell,
    }
}

/// Whether a car moving at `speed` stays over a pad of `pad_length` long
/// enough to receive `key_bits` at `rate`.
pub fn donation_window(speed: f64, pad_length: f64, key_bits: usize, rate: f64) -> bool {
    if !(rate > 0.0) {
        return key_bits == 0;
    }
    pad_length / speed >= key_bits as f64 / rate
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NetworkMetrics {
    pub duration_s: f64,
    /// Vehicles homed to an RSD with at least one pad.
    pub vehicles: usize,
    pub donation_attempts: u64,
    pub donation_successes: u64,
    pub failures_pool_empty: u64,
    pub failures_window_too_short: u64,
    pub failures_no_former_key: u64,
    pub missed_detections: u64,
    pub pool_depletion_episodes: u64,
    pub bits_generated: Vec<u64>,
    pub bits_donated: Vec<u64>,
    pub refresh_count: u64,
    pub mean_refresh_interval_s: f64,
    pub max_refresh_interval_s: f64,
    pub per_vehicle_key_rate: Vec<f64>,
    pub mean_vehicle_key_rate: f64,
    pub per_rsd_load: Vec<u64>,
    pub max_rsd_load: u64,
    /// Donations whose ciphertext did not decrypt to the issued key.
    pub chain_failures: u64,
    pub events_processed: u64,
}

impl NetworkMetrics {
    pub fn donation_failures(&self) -> u64 {
        self.failures_pool_empty + self.failures_window_too_short + self.failures_no_former_key
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub metrics: NetworkMetrics,
    pub vehicles: Vec<Vehicle>,
    /// Empty unless [`ScenarioSettings::record_events`] is set.
    pub events: Vec<EventLogRow>,
}

fn validate(traffic: &TrafficModel, settings: &ScenarioSettings, topo: &Topology) -> Result<()> {
    if !(settings.duration_s > 0.0) || !settings.duration_s.is_finite() {
        return Err(invalid("duration_s", "must be positive"));
    }
    if settings.pool_capacity_keys == 0 {
        return Err(invalid("pool_capacity_keys", "must be at least 1"));
    }
    if !(traffic.mean_pass_interval_s > 0.0) {
        return Err(invalid("mean_pass_interval_s", "must be positive"));
    }
    if !(traffic.speed_min_mps > 0.0 && traffic.speed_min_mps <= traffic.speed_max_mps)
        || !traffic.speed_max_mps.is_finite()
    {
        return Err(invalid(
            "speed_min_mps",
            "need 0 < speed_min_mps <= speed_max_mps",
        ));
    }
    if !(traffic.key_max_age_s >= 0.0) {
        return Err(invalid("key_max_age_s", "must be non-negative"));
    }
    if let Some(w) = &traffic.home_weights {
        if w.len() != topo.rsds.len() {
            return Err(invalid(
                "home_weights",
                format!("expected {} weights, got {}", topo.rsds.len(), w.len()),
            ));
        }
        if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || w.iter().sum::<f64>() <= 0.0 {
            return Err(invalid(
                "home_weights",
                "must be non-negative with a positive sum",
            ));
        }
    }
    Ok(())
}

/// Split `fleet` vehicles over RSDs by largest remainder.
fn assign_homes(traffic: &TrafficModel, topo: &Topology) -> Vec<Option<usize>> {
    let weights: Vec<f64> = match &traffic.home_weights {
        Some(w) => w.clone(),
        None => topo
            .rsds
            .iter()
            .map(|r| if r.rskps.is_empty() { 0.0 } else { 1.0 })
            .collect(),
    };
    let total: f64 = weights.iter().sum();
    let fleet = traffic.fleet_size;
    if total <= 0.0 {
        return vec![None; fleet];
    }
    let quotas: Vec<f64> = weights.iter().map(|w| w / total * fleet as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut left = fleet - counts.iter().sum::<usize>();
    for k in order {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
        .iter()
        .enumerate()
        .flat_map(|(rsd, &n)| std::iter::repeat_n(Some(rsd), n))
        .collect()
}

struct Sim<'a> {
    topo: &'a Topology,
    traffic: &'a TrafficModel,
    settings: &'a ScenarioSettings,
    queue: EventQueue,
    rng: ChaCha8Rng,
    pass_gap: Exp<f64>,
    vehicles: Vec<Vehicle>,
    pools: Vec<KeyPool>,
    metrics: NetworkMetrics,
    refresh_sum: f64,
    log: Vec<EventLogRow>,
    key_bits: usize,
    exchange_seed: u64,
}

impl Sim<'_> {
    fn schedule(&mut self, time: f64, payload: Payload) {
        if time <= self.settings.duration_s {
            self.queue.schedule(time, payload);
        }
    }

    fn schedule_pass(&mut self, now: f64, vehicle: usize) {
        let Some(home) = self.vehicles[vehicle].home else {
            return;
        };
        let pads = &self.topo.rsds[home].rskps;
        if pads.is_empty() {
            return;
        }
        let gap = self.rng.sample(self.pass_gap);
        let rskp = pads[self.rng.random_range(0..pads.len())];
        self.schedule(now + gap, Payload::Arrival { vehicle, rskp });
    }

    fn refill_interval(&self, pool: usize) -> Option<f64> {
        let rate = self.topo.pools[pool].fill_rate;
        (rate > 0.0).then(|| self.key_bits as f64 / rate)
    }

    fn next_key_bits(&mut self, pool: usize) -> Result<Vec<bool>> {
        let p = &mut self.pools[pool];
        match self.settings.key_source {
            KeySource::Random => Ok((0..self.key_bits).map(|_| p.rng.random()).collect()),
            KeySource::Kljn => {
                let cfg = ExchangeConfig {
                    line: self.topo.pools[pool].line,
                    gamma: self.topo.link.gamma,
                    ..ExchangeConfig::default()
                };
                let seed = p.rng.random::<u64>() ^ self.exchange_seed;
                let (rsd_side, _, _) = run_key_exchange(&cfg, self.key_bits, seed)?;
                Ok(rsd_side.bits().to_vec())
            }
        }
    }

    fn log(
        &mut self,
        (time, sequence, kind): (f64, u64, EventKind),
        vehicle: Option<usize>,
        rskp: Option<usize>,
        pool: Option<usize>,
        detail: String,
    ) {
        if !self.settings.record_events {
            return;
        }
        let rsd = rskp
            .map(|r| self.topo.rskps[r].rsd)
            .or(pool.map(|p| self.topo.pools[p].rsd))
            .map(|k| self.topo.rsds[k].id);
        self.log.push(EventLogRow {
            time_s: time,
            sequence,
            kind,
            vehicle_id: vehicle,
            rsd_id: rsd,
            lane: rskp.map(|r| self.topo.rskps[r].lane),
            detail,
        });
    }

    fn run(&mut self) -> Result<()> {
        let capacity_bits = self.settings.pool_capacity_keys * self.key_bits;
        while let Some(ev) = self.queue.pop() {
            if ev.time > self.settings.duration_s {
                break;
            }
            self.metrics.events_processed += 1;
            let now = ev.time;
            let kind = ev.payload.kind();
            match ev.payload {
                Payload::Refill { pool, index } => {
                    let fresh = self.next_key_bits(pool)?;
                    let p = &mut self.pools[pool];
                    p.generated += fresh.len() as u64;
                    let stored = p.bits.len() + fresh.len() <= capacity_bits;
                    if stored {
                        p.bits.extend(fresh);
                    }
                    let detail = format!("available={};stored={stored}", p.bits.len());
                    self.log((now, ev.sequence, kind), None, None, Some(pool), detail);
                    if let Some(dt) = self.refill_interval(pool) {
                        let index = index + 1;
                        self.schedule(index as f64 * dt, Payload::Refill { pool, index });
                    }
                }
                Payload::Arrival { vehicle, rskp } => {
                    let pad = &self.topo.rskps[rskp];
                    let v = &mut self.vehicles[vehicle];
                    v.lane = Some(pad.lane);
                    if !v.seen {
                        v.seen = true;
                        self.metrics.per_rsd_load[pad.rsd] += 1;
                    }
                    let dwell = pad.pad_length / v.speed;
                    let pad_exit = now + dwell;
                    let wants = v.needs_key();
                    self.schedule(pad_exit, Payload::Departure { vehicle, rskp });
                    let mut detail = format!("dwell={dwell}");
                    if wants {
                        let detection = detect_vehicle(now, dwell, &pad.detector, &mut self.rng);
                        match detection.request_time {
                            Some(t) => self.schedule(
                                t,
                                Payload::Request {
                                    vehicle,
                                    rskp,
                                    pad_exit,
                                },
                            ),
                            None => {
                                self.metrics.missed_detections += 1;
                                detail.push_str(";missed");
                            }
                        }
                    }
                    self.log(
                        (now, ev.sequence, kind),
                        Some(vehicle),
                        Some(rskp),
                        None,
                        detail,
                    );
                }
                Payload::Request {
                    vehicle,
                    rskp,
                    pad_exit,
                } => {
                    self.metrics.donation_attempts += 1;
                    let pad = &self.topo.rskps[rskp];
                    let v = &self.vehicles[vehicle];
                    let remaining = (pad_exit - now).max(0.0) * v.speed;
                    let outcome = if v.current_key.is_none() {
                        self.metrics.failures_no_former_key += 1;
                        "no-former-key"
                    } else if !donation_window(
                        v.speed,
                        remaining,
                        self.key_bits,
                        pad.near_field_rate,
                    ) {
                        self.metrics.failures_window_too_short += 1;
                        "window-too-short"
                    } else if self.pools[pad.pool].bits.len() < self.key_bits {
                        self.metrics.failures_pool_empty += 1;
                        "pool-empty"
                    } else {
                        let p = &mut self.pools[pad.pool];
                        let key = KeyMaterial::from_bits(p.bits.drain(..self.key_bits).collect());
                        p.donated += self.key_bits as u64;
                        if p.bits.len() < self.key_bits {
                            self.metrics.pool_depletion_episodes += 1;
                        }
                        self.metrics.donation_successes += 1;
                        self.vehicles[vehicle].busy = true;
                        self.schedule(now, Payload::Start { vehicle, rskp, key });
                        "granted"
                    };
                    self.log(
                        (now, ev.sequence, kind),
                        Some(vehicle),
                        Some(rskp),
                        None,
                        outcome.to_string(),
                    );
                }
                Payload::Start { vehicle, rskp, key } => {
                    let former = self.vehicles[vehicle]
                        .current_key
                        .as_ref()
                        .expect("granted requests hold a key");
                    let ciphertext = key.xor(former).expect("keys share one length");
                    let transfer = self.key_bits as f64 / self.topo.rskps[rskp].near_field_rate;
                    self.schedule(
                        now + transfer,
                        Payload::Complete {
                            vehicle,
                            rskp,
                            ciphertext,
                            key,
                        },
                    );
                    self.log(
                        (now, ev.sequence, kind),
                        Some(vehicle),
                        Some(rskp),
                        None,
                        format!("transfer_s={transfer}"),
                    );
                }
                Payload::Complete {
                    vehicle,
                    rskp,
                    ciphertext,
                    key,
                } => {
                    let key_bits = self.key_bits as u64;
                    let max_age = self.traffic.key_max_age_s;
                    let v = &mut self.vehicles[vehicle];
                    let former = v.current_key.take().expect("granted requests hold a key");
                    let plain = ciphertext.xor(&former).expect("keys share one length");
                    if plain != key {
                        self.metrics.chain_failures += 1;
                    }
                    let interval = now - v.key_issued_at;
                    v.former_key = Some(former);
                    v.current_key = Some(plain);
                    v.key_issued_at = now;
                    v.expired = false;
                    v.busy = false;
                    v.bits_received += key_bits;
                    self.metrics.refresh_count += 1;
                    self.refresh_sum += interval;
                    self.metrics.max_refresh_interval_s =
                        self.metrics.max_refresh_interval_s.max(interval);
                    self.schedule(
                        now + max_age,
                        Payload::Expiry {
                            vehicle,
                            issued_at: now,
                        },
                    );
                    self.log(
                        (now, ev.sequence, kind),
                        Some(vehicle),
                        Some(rskp),
                        None,
                        format!("interval_s={interval}"),
                    );
                }
                Payload::Expiry { vehicle, issued_at } => {
                    let v = &mut self.vehicles[vehicle];
                    let current = v.key_issued_at == issued_at && v.current_key.is_some();
                    if current {
                        v.expired = true;
                    }
                    let detail = if current { "expired" } else { "stale" };
                    self.log(
                        (now, ev.sequence, kind),
                        Some(vehicle),
                        None,
                        None,
                        detail.to_string(),
                    );
                }
                Payload::Departure { vehicle, rskp } => {
                    self.log(
                        (now, ev.sequence, kind),
                        Some(vehicle),
                        Some(rskp),
                        None,
                        String::new(),
                    );
                    self.schedule_pass(now, vehicle);
                }
            }
        }
        Ok(())
    }
}

/// Run the discrete-event model for `settings.duration_s` seconds.
///
/// Randomness: traffic and detectors draw from stream 0 of `seed`, and pool
/// `k` draws its key bits from stream `k + 1`.
pub fn run_scenario(
    topology: &Topology,
    traffic: &TrafficModel,
    settings: &ScenarioSettings,
    seed: u64,
) -> Result<ScenarioOutcome> {
    validate(traffic, settings, topology)?;
    let key_bits = topology.link.key_bits;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let homes = assign_homes(traffic, topology);

    let mut vehicles = Vec::with_capacity(homes.len());
    for (id, home) in homes.into_iter().enumerate() {
        let speed = if traffic.speed_max_mps > traffic.speed_min_mps {
            rng.random_range(traffic.speed_min_mps..=traffic.speed_max_mps)
        } else {
            traffic.speed_min_mps
        };
        let current_key = traffic
            .bootstrap_keys
            .then(|| KeyMaterial::from_bits((0..key_bits).map(|_| rng.random()).collect()));
        vehicles.push(Vehicle {
            id,
            home,
            lane: None,
            speed,
            current_key,
            former_key: None,
            key_issued_at: 0.0,
            bits_received: 0,
            expired: false,
            busy: false,
            seen: false,
        });
    }

    let pools = (0..topology.pools.len())
        .map(|k| {
            let mut prng = ChaCha8Rng::seed_from_u64(seed);
            prng.set_stream(k as u64 + 1);
            KeyPool {
                bits: Default::default(),
                generated: 0,
                donated: 0,
                rng: prng,
            }
        })
        .collect();

    let metrics = NetworkMetrics {
        duration_s: settings.duration_s,
        per_rsd_load: vec![0; topology.rsds.len()],
        ..NetworkMetrics::default()
    };
    let mut sim = Sim {
        topo: topology,
        traffic,
        settings,
        queue: EventQueue::default(),
        rng,
        pass_gap: Exp::new(1.0 / traffic.mean_pass_interval_s)
            .map_err(|_| invalid("mean_pass_interval_s", "must be positive"))?,
        vehicles,
        pools,
        metrics,
        refresh_sum: 0.0,
        log: Vec::new(),
        key_bits,
        exchange_seed: seed,
    };

    for pool in 0..topology.pools.len() {
        if let Some(dt) = sim.refill_interval(pool) {
            sim.schedule(dt, Payload::Refill { pool, index: 1 });
        }
    }
    for v in 0..sim.vehicles.len() {
        if sim.vehicles[v].current_key.is_some() {
            sim.schedule(
                traffic.key_max_age_s,
                Payload::Expiry {
                    vehicle: v,
                    issued_at: 0.0,
                },
            );
        }
        sim.schedule_pass(0.0, v);
    }
    sim.run()?;

    let Sim {
        mut metrics,
        vehicles,
        pools,
        refresh_sum,
        log,
        ..
    } = sim;
    metrics.bits_generated = pools.iter().map(|p| p.generated).collect();
    metrics.bits_donated = pools.iter().map(|p| p.donated).collect();
    if metrics.refresh_count > 0 {
        metrics.mean_refresh_interval_s = refresh_sum / metrics.refresh_count as f64;
    }
    let served: Vec<&Vehicle> = vehicles
        .iter()
        .filter(|v| v.home.is_some_and(|h| !topology.rsds[h].rskps.is_empty()))
        .collect();
    metrics.vehicles = served.len();
    metrics.per_vehicle_key_rate = served
        .iter()
        .map(|v| v.bits_received as f64 / settings.duration_s)
        .collect();
    if !served.is_empty() {
        metrics.mean_vehicle_key_rate =
            metrics.per_vehicle_key_rate.iter().sum::<f64>() / served.len() as f64;
    }
    metrics.max_rsd_load = metrics.per_rsd_load.iter().copied().max().unwrap_or(0);

    Ok(ScenarioOutcome {
        metrics,
        vehicles,
        events: log,
    })
}
