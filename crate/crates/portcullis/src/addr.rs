//! Canonical network addresses and transport protocols.
//!
//! Every address in the suite is stored as 16 canonical bytes. IPv4
//! addresses use the IPv4-mapped IPv6 form (`::ffff:a.b.c.d`) so a single
//! type serves both families and equality is plain byte comparison.

use std::fmt;
use std::net::{Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use thiserror::Error;

/// Address family derived from the canonical byte form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    V4,
    V6,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("malformed address: {0:?}")]
pub struct MalformedAddress(pub String);

/// A network address in canonical 16-byte form.
///
/// IPv4 addresses carry the mapped prefix: ten zero bytes, then `0xff 0xff`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NetAddress {
    bytes: [u8; 16],
}

impl NetAddress {
    /// Parses a dotted-quad IPv4 or colon-hex IPv6 string into canonical form.
    ///
    /// Parsing is strict: leading zeros in IPv4 octets and malformed
    /// groups are rejected.
    pub fn parse(text: &str) -> Result<Self, MalformedAddress> {
        if let Ok(v4) = Ipv4Addr::from_str(text) {
            return Ok(Self::from_v4(v4));
        }
        if let Ok(v6) = Ipv6Addr::from_str(text) {
            return Ok(Self::from_v6(v6));
        }
        Err(MalformedAddress(text.to_string()))
    }

    pub fn from_v4(v4: Ipv4Addr) -> Self {
        let o = v4.octets();
        let mut bytes = [0u8; 16];
        bytes[10] = 0xff;
        bytes[11] = 0xff;
        bytes[12..].copy_from_slice(&o);
        Self { bytes }
    }

    pub fn from_v6(v6: Ipv6Addr) -> Self {
        Self { bytes: v6.octets() }
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        Self { bytes }
    }

    pub fn bytes(&self) -> &[u8; 16] {
        &self.bytes
    }

    pub fn family(&self) -> Family {
        if self.bytes[..10].iter().all(|&b| b == 0)
            && self.bytes[10] == 0xff
            && self.bytes[11] == 0xff
        {
            Family::V4
        } else {
            Family::V6
        }
    }

    pub fn is_v4(&self) -> bool {
        self.family() == Family::V4
    }
}

impl fmt::Display for NetAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.family() {
            Family::V4 => {
                let b = &self.bytes[12..];
                write!(f, "{}.{}.{}.{}", b[0], b[1], b[2], b[3])
            }
            Family::V6 => write!(f, "{}", Ipv6Addr::from(self.bytes)),
        }
    }
}

impl fmt::Debug for NetAddress {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NetAddress({self})")
    }
}

impl FromStr for NetAddress {
    type Err = MalformedAddress;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::parse(s)
    }
}

/// Transport protocols the suite understands.
///
/// Wire codes are the IANA protocol numbers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    Tcp,
    Udp,
    Icmp,
}

impl Protocol {
    pub fn wire_code(self) -> u8 {
        match self {
            Protocol::Icmp => 1,
            Protocol::Tcp => 6,
            Protocol::Udp => 17,
        }
    }

    pub fn from_wire_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(Protocol::Icmp),
            6 => Some(Protocol::Tcp),
            17 => Some(Protocol::Udp),
            _ => None,
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.to_ascii_lowercase().as_str() {
            "tcp" => Some(Protocol::Tcp),
            "udp" => Some(Protocol::Udp),
            "icmp" => Some(Protocol::Icmp),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Protocol::Tcp => "tcp",
            Protocol::Udp => "udp",
            Protocol::Icmp => "icmp",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v4_loopback_maps_to_canonical_form() {
        let a = NetAddress::parse("127.0.0.1").unwrap();
        let mut expect = [0u8; 16];
        expect[10] = 0xff;
        expect[11] = 0xff;
        expect[12..].copy_from_slice(&[127, 0, 0, 1]);
        assert_eq!(a.bytes(), &expect);
        assert_eq!(a.family(), Family::V4);
    }

    #[test]
    fn v6_loopback() {
        let a = NetAddress::parse("::1").unwrap();
        let mut expect = [0u8; 16];
        expect[15] = 1;
        assert_eq!(a.bytes(), &expect);
        assert_eq!(a.family(), Family::V6);
    }

    #[test]
    fn out_of_range_octet_rejected() {
        assert!(NetAddress::parse("999.1.1.1").is_err());
    }

    #[test]
    fn leading_zero_octets_rejected() {
        assert!(NetAddress::parse("127.0.00.1").is_err());
    }

    #[test]
    fn render_normalize_is_idempotent() {
        for text in ["203.0.113.9", "2001:db8::1", "::ffff:10.0.0.5", "::1"] {
            let a = NetAddress::parse(text).unwrap();
            let b = NetAddress::parse(&a.to_string()).unwrap();
            assert_eq!(a.bytes(), b.bytes(), "through rendering of {text}");
        }
    }

    #[test]
    fn mapped_v6_text_is_family_v4() {
        let a = NetAddress::parse("::ffff:10.0.0.5").unwrap();
        assert_eq!(a.family(), Family::V4);
        assert_eq!(a.to_string(), "10.0.0.5");
    }

    #[test]
    fn protocol_wire_codes_round_trip() {
        for p in [Protocol::Tcp, Protocol::Udp, Protocol::Icmp] {
            assert_eq!(Protocol::from_wire_code(p.wire_code()), Some(p));
        }
        assert_eq!(Protocol::from_wire_code(42), None);
    }
}
