//! Discrete-event model of key generation and lane-by-lane key donation.
//!
//! A CA holds a KLJN line to every RSD (or, optionally, to every RSKP). Each
//! line fills a key pool at its secure bit rate. Lane pads (RSKPs) detect
//! passing vehicles and hand over a fresh key, one-time-pad encrypted under
//! the vehicle's current key, if the pool holds a full key and the car stays
//! on the pad long enough for the near-field transfer.

mod event;
mod sim;
mod topology;

pub use event::{EventKind, EventLogRow};
pub use sim::{
    detect_vehicle, donation_window, run_scenario, Detection, KeySource, NetworkMetrics,
    ScenarioOutcome, ScenarioSettings, TrafficModel, Vehicle,
};
pub use topology::{
    build_topology, DetectorSpec, KljnEndpoint, LinkParams, PoolSpec, Rsd, RsdSpec, Rskp, RskpSpec,
    Topology, TopologySpec,
};
