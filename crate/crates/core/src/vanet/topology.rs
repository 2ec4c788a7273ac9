use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{KljnError, Result};
use crate::lifetime::secure_bit_rate;
use crate::noise::KljnLineConfig;

/// Which node terminates the KLJN line at the roadside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KljnEndpoint {
    /// Lines run CA–RSD; RSKPs only hand keys to cars and draw from their RSD's pool.
    #[default]
    Rsd,
    /// Each RSKP owns a CA line and a pool of its own.
    Rskp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSpec {
    pub latency_s: f64,
    pub miss_probability: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            latency_s: 0.0,
            miss_probability: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsdSpec {
    pub id: u32,
    #[serde(default)]
    pub line: Option<KljnLineConfig>,
    #[serde(default = "yes")]
    pub high_speed_link: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RskpSpec {
    pub rsd: u32,
    pub lane: u32,
    #[serde(default = "default_pad")]
    pub pad_length_m: f64,
    #[serde(default = "default_near_field")]
    pub near_field_rate_bps: f64,
    #[serde(default)]
    pub detector: DetectorSpec,
    /// Own CA line, used only with [`KljnEndpoint::Rskp`]; falls back to the RSD's line.
    #[serde(default)]
    pub line: Option<KljnLineConfig>,
}

fn default_pad() -> f64 {
    2.0
}

fn default_near_field() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologySpec {
    pub rsds: Vec<RsdSpec>,
    pub rskps: Vec<RskpSpec>,
    pub endpoint: KljnEndpoint,
}

impl TopologySpec {
    /// One RSD with one lane pad, on the default line.
    pub fn single_lane() -> Self {
        Self {
            rsds: vec![RsdSpec {
                id: 0,
                line: Some(KljnLineConfig::default()),
                high_speed_link: true,
            }],
            rskps: vec![RskpSpec {
                rsd: 0,
                lane: 0,
                pad_length_m: default_pad(),
                near_field_rate_bps: default_near_field(),
                detector: DetectorSpec::default(),
                line: None,
            }],
            endpoint: KljnEndpoint::Rsd,
        }
    }
}

/// Key-exchange parameters shared by every line in the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkParams {
    pub gamma: f64,
    pub key_bits: usize,
    pub parallel_channels: u32,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            gamma: 100.0,
            key_bits: 100,
            parallel_channels: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rsd {
    pub id: u32,
    pub line: Option<KljnLineConfig>,
    pub high_speed_link: bool,
    /// Indices into [`Topology::rskps`].
    pub rskps: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rskp {
    /// Index into [`Topology::rsds`].
    pub rsd: usize,
    pub lane: u32,
    pub pad_length: f64,
    pub near_field_rate: f64,
    pub detector: DetectorSpec,
    /// Index into [`Topology::pools`].
    pub pool: usize,
}

/// A key pool fed by one KLJN line.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolSpec {
    /// Index of the RSD the pool belongs to.
    pub rsd: usize,
    pub line: KljnLineConfig,
    /// `f_sec` of the feeding line, bits/s.
    pub fill_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub rsds: Vec<Rsd>,
    pub rskps: Vec<Rskp>,
    pub pools: Vec<PoolSpec>,
    pub endpoint: KljnEndpoint,
    pub link: LinkParams,
}

fn topo_err(msg: String) -> KljnError {
    KljnError::Topology(msg)
}

/// Validate a topology description and precompute each line's secure bit rate.
pub fn build_topology(spec: &TopologySpec, link: &LinkParams) -> Result<Topology> {
    if link.key_bits == 0 {
        return Err(crate::error::invalid("key_bits", "must be at least 1"));
    }
    let mut index = HashMap::new();
    let mut rsds = Vec::with_capacity(spec.rsds.len());
    for (k, r) in spec.rsds.iter().enumerate() {
        if index.insert(r.id, k).is_some() {
            return Err(topo_err(format!("duplicate rsd id {}", r.id)));
        }
        if let Some(line) = &r.line {
            line.validate()?;
        }
        rsds.push(Rsd {
            id: r.id,
            line: r.line,
            high_speed_link: r.high_speed_link,
            rskps: Vec::new(),
        });
    }

    let rate_of = |line: &KljnLineConfig| {
        secure_bit_rate(line.noise_bandwidth(), link.gamma, link.parallel_channels)
    };

    let mut pools = Vec::new();
    let mut rsd_pool = vec![None; rsds.len()];
    if spec.endpoint == KljnEndpoint::Rsd {
        for (k, rsd) in rsds.iter().enumerate() {
            let line = rsd
                .line
                .ok_or_else(|| topo_err(format!("rsd {} has no KLJN line to the CA", rsd.id)))?;
            rsd_pool[k] = Some(pools.len());
            pools.push(PoolSpec {
                rsd: k,
                line,
                fill_rate: rate_of(&line)?,
            });
        }
    }

    let mut rskps = Vec::with_capacity(spec.rskps.len());
    for (n, p) in spec.rskps.iter().enumerate() {
        let &k = index
            .get(&p.rsd)
            .ok_or_else(|| topo_err(format!("rskp {n} references unknown rsd {}", p.rsd)))?;
        if !rsds[k].high_speed_link {
            return Err(topo_err(format!(
                "rskp {n} is attached to rsd {} which has no high-speed link",
                p.rsd
            )));
        }
        if !(p.pad_length_m > 0.0) || !(p.near_field_rate_bps >= 0.0) {
            return Err(topo_err(format!(
                "rskp {n} needs a positive pad length and a non-negative rate"
            )));
        }
        if !(p.detector.latency_s >= 0.0) || !(0.0..=1.0).contains(&p.detector.miss_probability) {
            return Err(topo_err(format!("rskp {n} has an invalid detector")));
        }
        let pool = match spec.endpoint {
            KljnEndpoint::Rsd => rsd_pool[k].expect("every rsd has a pool"),
            KljnEndpoint::Rskp => {
                let line = p.line.or(rsds[k].line).ok_or_else(|| {
                    topo_err(format!(
                        "rskp {n} has no KLJN line and neither has rsd {}",
                        p.rsd
                    ))
                })?;
                line.validate()?;
                pools.push(PoolSpec {
                    rsd: k,
                    line,
                    fill_rate: rate_of(&line)?,
                });
                pools.len() - 1
            }
        };
        rsds[k].rskps.push(rskps.len());
        rskps.push(Rskp {
            rsd: k,
            lane: p.lane,
            pad_length: p.pad_length_m,
            near_field_rate: p.near_field_rate_bps,
            detector: p.detector,
            pool,
        });
    }

    Ok(Topology {
        rsds,
        rskps,
        pools,
        endpoint: spec.endpoint,
        link: *link,
    })
}
