use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::Serialize;

use crate::protocol::KeyMaterial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    VehicleArrival,
    KeyRequest,
    PoolRefill,
    DonationStart,
    DonationComplete,
    KeyExpiry,
    Departure,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::VehicleArrival => "vehicle-arrival",
            EventKind::KeyRequest => "key-request",
            EventKind::PoolRefill => "pool-refill",
            EventKind::DonationStart => "donation-start",
            EventKind::DonationComplete => "donation-complete",
            EventKind::KeyExpiry => "key-expiry",
            EventKind::Departure => "departure",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Payload {
    Arrival {
        vehicle: usize,
        rskp: usize,
    },
    Request {
        vehicle: usize,
        rskp: usize,
        /// Time the vehicle leaves the pad.
        pad_exit: f64,
    },
    Refill {
        pool: usize,
        /// Refill `n` lands at `n·N_k/f_sec`.
        index: u64,
    },
    Start {
        vehicle: usize,
        rskp: usize,
        key: KeyMaterial,
    },
    Complete {
        vehicle: usize,
        rskp: usize,
        ciphertext: KeyMaterial,
        /// Plaintext kept only to audit the chain on delivery.
        key: KeyMaterial,
    },
    Expiry {
        vehicle: usize,
        issued_at: f64,
    },
    Departure {
        vehicle: usize,
        rskp: usize,
    },
}

impl Payload {
    pub(crate) fn kind(&self) -> EventKind {
        match self {
            Payload::Arrival { .. } => EventKind::VehicleArrival,
            Payload::Request { .. } => EventKind::KeyRequest,
            Payload::Refill { .. } => EventKind::PoolRefill,
            Payload::Start { .. } => EventKind::DonationStart,
            Payload::Complete { .. } => EventKind::DonationComplete,
            Payload::Expiry { .. } => EventKind::KeyExpiry,
            Payload::Departure { .. } => EventKind::Departure,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ScheduledEvent {
    pub time: f64,
    pub sequence: u64,
    pub payload: Payload,
}

impl PartialEq for ScheduledEvent {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for ScheduledEvent {}

impl PartialOrd for ScheduledEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ScheduledEvent {
    // Reversed so the max-heap pops the earliest (time, sequence) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then_with(|| other.sequence.cmp(&self.sequence))
    }
}

/// Pending events ordered by `(time, sequence)`.
#[derive(Debug, Default)]
pub(crate) struct EventQueue {
    heap: BinaryHeap<ScheduledEvent>,
    next_sequence: u64,
}

impl EventQueue {
    pub fn schedule(&mut self, time: f64, payload: Payload) {
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(ScheduledEvent {
            time,
            sequence,
            payload,
        });
    }

    pub fn pop(&mut self) -> Option<ScheduledEvent> {
        self.heap.pop()
    }
}

/// One processed event, as written to the event log.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventLogRow {
    pub time_s: f64,
    pub sequence: u64,
    pub kind: EventKind,
    pub vehicle_id: Option<usize>,
    pub rsd_id: Option<u32>,
    pub lane: Option<u32>,
    pub detail: String,
}
