//! Server-side port-knocking state machine.
//!
//! Tracks per-source progress through a secret (protocol, port) sequence.
//! Strict-order mode wants the exact configured order; sequence-tagged
//! mode accepts any arrival order because each UDP knock carries its index
//! in a 1-byte payload. TCP knocks are bare SYN-equivalents and carry no
//! tag, so TCP-only configurations cannot be out-of-order tolerant.
//!
//! Memory is bounded: at most `capacity` sources are tracked and the
//! least-recently-updated entry is evicted first, so a spoofed-source
//! flood can never exhaust the server or permanently lock out fresh
//! clients.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::addr::{NetAddress, Protocol};
use crate::spa::payload::ServiceRequest;

pub const DEFAULT_WINDOW_MS: u64 = 30_000;
pub const DEFAULT_CAPACITY: usize = 1024;
pub const MIN_SEQUENCE_LEN: usize = 3;
pub const MAX_SEQUENCE_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnockMode {
    StrictOrder,
    SequenceTagged,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SequenceError {
    #[error("sequence length must be {MIN_SEQUENCE_LEN}..={MAX_SEQUENCE_LEN}, got {0}")]
    BadLength(usize),
    #[error("knock ports must be distinct within a sequence")]
    DuplicatePort,
    #[error("icmp is not a knock protocol")]
    IcmpKnock,
    #[error("grant must be an open-port request")]
    BadGrant,
}

/// The secret knock sequence and what completing it grants.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnockSequence {
    knocks: Vec<(Protocol, u16)>,
    pub mode: KnockMode,
    pub window_ms: u64,
    pub grant: ServiceRequest,
}

impl KnockSequence {
    pub fn new(
        knocks: Vec<(Protocol, u16)>,
        mode: KnockMode,
        window_ms: u64,
        grant: ServiceRequest,
    ) -> Result<Self, SequenceError> {
        if knocks.len() < MIN_SEQUENCE_LEN || knocks.len() > MAX_SEQUENCE_LEN {
            return Err(SequenceError::BadLength(knocks.len()));
        }
        let mut ports: Vec<u16> = knocks.iter().map(|(_, p)| *p).collect();
        ports.sort_unstable();
        ports.dedup();
        if ports.len() != knocks.len() {
            return Err(SequenceError::DuplicatePort);
        }
        if knocks.iter().any(|(p, _)| *p == Protocol::Icmp) {
            return Err(SequenceError::IcmpKnock);
        }
        if !matches!(grant, ServiceRequest::OpenPort { .. }) {
            return Err(SequenceError::BadGrant);
        }
        Ok(Self {
            knocks,
            mode,
            window_ms,
            grant,
        })
    }

    pub fn knocks(&self) -> &[(Protocol, u16)] {
        &self.knocks
    }

    pub fn len(&self) -> usize {
        self.knocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knocks.is_empty()
    }

    fn index_of(&self, protocol: Protocol, port: u16) -> Option<usize> {
        self.knocks.iter().position(|k| *k == (protocol, port))
    }

    /// True if any knock in the sequence uses this port.
    pub fn uses_port(&self, port: u16) -> bool {
        self.knocks.iter().any(|(_, p)| *p == port)
    }
}

/// One observed knock.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnockEvent {
    pub src: NetAddress,
    pub protocol: Protocol,
    pub dst_port: u16,
    /// Index tag from a 1-byte UDP payload; absent for TCP knocks.
    pub seq_tag: Option<u8>,
    pub at_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TrackerOutcome {
    Progress,
    Granted { grant: ServiceRequest, src: NetAddress },
    Reset,
    Ignored,
}

#[derive(Debug, Clone)]
struct Entry {
    /// Bitmap over sequence indices (tagged mode).
    received: u16,
    /// Next expected index (strict mode).
    next_expected: usize,
    first_at_ms: u64,
    lru_key: u64,
}

/// Bounded per-source knock progress.
#[derive(Debug, Clone)]
pub struct KnockTracker {
    entries: HashMap<NetAddress, Entry>,
    // lru_key -> source, ordered oldest-update first
    lru: BTreeMap<u64, NetAddress>,
    capacity: usize,
    tick: u64,
}

impl KnockTracker {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: HashMap::new(),
            lru: BTreeMap::new(),
            capacity: capacity.max(1),
            tick: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    fn remove(&mut self, src: &NetAddress) {
        if let Some(e) = self.entries.remove(src) {
            self.lru.remove(&e.lru_key);
        }
    }

    fn touch(&mut self, src: NetAddress) {
        self.tick += 1;
        let tick = self.tick;
        if let Some(e) = self.entries.get_mut(&src) {
            self.lru.remove(&e.lru_key);
            e.lru_key = tick;
            self.lru.insert(tick, src);
        }
    }

    fn insert_fresh(&mut self, src: NetAddress, at_ms: u64) {
        if self.entries.len() >= self.capacity {
            // Evict the least-recently-updated source.
            if let Some((&oldest, &victim)) = self.lru.iter().next() {
                self.lru.remove(&oldest);
                self.entries.remove(&victim);
            }
        }
        self.tick += 1;
        self.entries.insert(
            src,
            Entry {
                received: 0,
                next_expected: 0,
                first_at_ms: at_ms,
                lru_key: self.tick,
            },
        );
        self.lru.insert(self.tick, src);
    }

    /// Feeds one knock through the state machine.
    pub fn observe(&mut self, seq: &KnockSequence, ev: &KnockEvent) -> TrackerOutcome {
        // A stale entry is dropped and the event starts over as a fresh
        // first knock.
        if let Some(e) = self.entries.get(&ev.src) {
            if ev.at_ms.saturating_sub(e.first_at_ms) > seq.window_ms {
                self.remove(&ev.src);
            }
        }

        let index = seq.index_of(ev.protocol, ev.dst_port);
        match seq.mode {
            KnockMode::StrictOrder => self.observe_strict(seq, ev, index),
            KnockMode::SequenceTagged => self.observe_tagged(seq, ev, index),
        }
    }

    fn observe_strict(
        &mut self,
        seq: &KnockSequence,
        ev: &KnockEvent,
        index: Option<usize>,
    ) -> TrackerOutcome {
        let port_in_sequence = seq.uses_port(ev.dst_port);
        let Some(index) = index else {
            // A sequence port hit with the wrong protocol still burns the
            // attempt; anything else is unrelated traffic.
            if port_in_sequence {
                self.remove(&ev.src);
                return TrackerOutcome::Reset;
            }
            return TrackerOutcome::Ignored;
        };

        let expected = self.entries.get(&ev.src).map_or(0, |e| e.next_expected);
        if index != expected {
            self.remove(&ev.src);
            return TrackerOutcome::Reset;
        }

        if expected + 1 == seq.len() {
            self.remove(&ev.src);
            return TrackerOutcome::Granted {
                grant: seq.grant.clone(),
                src: ev.src,
            };
        }

        if self.entries.contains_key(&ev.src) {
            let e = self.entries.get_mut(&ev.src).unwrap();
            e.next_expected += 1;
            self.touch(ev.src);
        } else {
            self.insert_fresh(ev.src, ev.at_ms);
            self.entries.get_mut(&ev.src).unwrap().next_expected = 1;
        }
        TrackerOutcome::Progress
    }

    fn observe_tagged(
        &mut self,
        seq: &KnockSequence,
        ev: &KnockEvent,
        index: Option<usize>,
    ) -> TrackerOutcome {
        if index.is_none() && !seq.uses_port(ev.dst_port) {
            return TrackerOutcome::Ignored;
        }
        // In-sequence port: the tag must exist, be in range, and agree with
        // the port, otherwise the attempt is burned.
        let valid = ev
            .seq_tag
            .map(|t| (t as usize) < seq.len() && seq.knocks()[t as usize] == (ev.protocol, ev.dst_port))
            .unwrap_or(false);
        if !valid {
            self.remove(&ev.src);
            return TrackerOutcome::Reset;
        }
        let tag = ev.seq_tag.unwrap() as usize;

        if !self.entries.contains_key(&ev.src) {
            self.insert_fresh(ev.src, ev.at_ms);
        }
        let e = self.entries.get_mut(&ev.src).unwrap();
        e.received |= 1 << tag;
        let full = e.received == (1u16 << seq.len()) - 1;
        self.touch(ev.src);

        if full {
            self.remove(&ev.src);
            return TrackerOutcome::Granted {
                grant: seq.grant.clone(),
                src: ev.src,
            };
        }
        TrackerOutcome::Progress
    }

    /// Drops every entry whose window has elapsed; returns how many.
    pub fn expire(&mut self, now_ms: u64, window_ms: u64) -> usize {
        let stale: Vec<NetAddress> = self
            .entries
            .iter()
            .filter(|(_, e)| now_ms.saturating_sub(e.first_at_ms) > window_ms)
            .map(|(src, _)| *src)
            .collect();
        for src in &stale {
            self.remove(src);
        }
        stale.len()
    }
}

impl Default for KnockTracker {
    fn default() -> Self {
        Self::new(DEFAULT_CAPACITY)
    }
}
