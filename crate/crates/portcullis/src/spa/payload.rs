//! Authorization payload assembly.

use crate::addr::{NetAddress, Protocol};
use crate::clock::{to_minute_stamp, MinuteStamp, SimClock};
use crate::rng::SeededRng;

/// What the client is asking for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServiceRequest {
    /// Open `port` over `protocol` for the bound source.
    OpenPort { protocol: Protocol, port: u16 },
    /// Run a command on the server. Only ever logged, never executed.
    Command { protocol: Protocol, command: String },
}

impl ServiceRequest {
    pub fn open(protocol: Protocol, port: u16) -> Self {
        ServiceRequest::OpenPort { protocol, port }
    }

    pub fn command(text: &str) -> Self {
        ServiceRequest::Command {
            protocol: Protocol::Tcp,
            command: text.to_string(),
        }
    }

    pub fn protocol(&self) -> Protocol {
        match self {
            ServiceRequest::OpenPort { protocol, .. } => *protocol,
            ServiceRequest::Command { protocol, .. } => *protocol,
        }
    }

    /// Requests ride TCP or UDP only, and commands must fit a length byte.
    pub fn is_well_formed(&self) -> bool {
        let proto_ok = matches!(self.protocol(), Protocol::Tcp | Protocol::Udp);
        match self {
            ServiceRequest::OpenPort { .. } => proto_ok,
            ServiceRequest::Command { command, .. } => proto_ok && command.len() <= 255,
        }
    }
}

/// How the server should derive the address a grant binds to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindMode {
    /// Trust the address declared inside the payload.
    DeclaredByClient,
    /// Ask the server to bind whatever source it observes.
    ServerObserved,
}

impl BindMode {
    pub fn wire_code(self) -> u8 {
        match self {
            BindMode::DeclaredByClient => 0,
            BindMode::ServerObserved => 1,
        }
    }

    pub fn from_wire_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BindMode::DeclaredByClient),
            1 => Some(BindMode::ServerObserved),
            _ => None,
        }
    }
}

/// The plaintext of one authorization packet: freshness data plus the
/// request itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpaPayload {
    pub stamp: MinuteStamp,
    pub nonce: [u8; 16],
    pub bound_addr: NetAddress,
    pub bind_mode: BindMode,
    pub request: ServiceRequest,
}

/// Assembles a payload stamped at the clock's current minute with a fresh
/// nonce. The nonce is never all-zero.
pub fn build_payload(
    request: ServiceRequest,
    bound_addr: NetAddress,
    bind_mode: BindMode,
    clock: &SimClock,
    rng: &mut SeededRng,
) -> SpaPayload {
    debug_assert!(request.is_well_formed());
    let mut nonce = [0u8; 16];
    loop {
        rng.fill_bytes(&mut nonce);
        if nonce.iter().any(|&b| b != 0) {
            break;
        }
    }
    SpaPayload {
        stamp: to_minute_stamp(clock.now_ms()),
        nonce,
        bound_addr,
        bind_mode,
        request,
    }
}
