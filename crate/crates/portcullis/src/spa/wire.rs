//! The authorization packet wire format.
//!
//! All multi-byte integers are big-endian. Packet layout:
//!
//! ```text
//! magic      4  0x50 0x4B 0x41 0x31 ("PKA1")
//! version    1  0x01
//! cipher_id  1
//! user_len   1  1..=32
//! user_id    user_len bytes, ASCII
//! ct_len     2
//! ciphertext ct_len bytes (IV or AEAD nonce prefixed inside)
//! mac       32  HMAC-SHA-256(hmac_key, all preceding bytes)
//! ```
//!
//! The MAC is verified before any decryption is attempted. Decrypted
//! plaintext layout:
//!
//! ```text
//! stamp u32 | nonce 16 | bind_mode u8 | bound_addr 16 |
//! kind u8 | protocol u8 | port u16 | cmd_len u8 | cmd bytes
//! ```
//!
//! Unknown trailing bytes anywhere are an error: packets either parse
//! exactly or are dropped.

use hmac::{Hmac, Mac};
use sha2::Sha256;
use thiserror::Error;

use crate::addr::{NetAddress, Protocol};
use crate::clock::MinuteStamp;
use crate::rng::SeededRng;
use crate::spa::cipher::{self, CipherError, CipherId, CipherRegistry};
use crate::spa::keyring::{KeyEntry, KeyRing};
use crate::spa::payload::{BindMode, ServiceRequest, SpaPayload};

pub const MAGIC: [u8; 4] = *b"PKA1";
pub const VERSION: u8 = 1;
pub const MAX_PACKET_LEN: usize = 1024;
const MAC_LEN: usize = 32;

type HmacSha256 = Hmac<Sha256>;

/// Decode failures. Every one of these is a signal to drop silently at
/// the server; none ever produces a response packet.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version")]
    UnsupportedVersion,
    #[error("unknown user")]
    UnknownUser,
    #[error("mac mismatch")]
    MacMismatch,
    #[error("decrypt failure")]
    DecryptFailure,
    #[error("malformed payload")]
    MalformedPayload,
    #[error("cipher {0} unavailable")]
    CipherUnavailable(u8),
}

impl From<CipherError> for CodecError {
    fn from(e: CipherError) -> Self {
        match e {
            CipherError::CipherUnavailable(id) => CodecError::CipherUnavailable(id),
            CipherError::DecryptFailure => CodecError::DecryptFailure,
        }
    }
}

/// A successfully decoded packet: the payload, who sent it, and the MAC
/// digest used as the replay-cache key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub payload: SpaPayload,
    pub user_id: String,
    pub digest: [u8; 32],
}

fn mac_of(hmac_key: &[u8; 32], data: &[u8]) -> [u8; 32] {
    let mut mac = HmacSha256::new_from_slice(hmac_key).expect("hmac accepts 32-byte keys");
    mac.update(data);
    mac.finalize().into_bytes().into()
}

fn serialize_plaintext(payload: &SpaPayload) -> Vec<u8> {
    let mut out = Vec::with_capacity(64);
    out.extend_from_slice(&payload.stamp.0.to_be_bytes());
    out.extend_from_slice(&payload.nonce);
    out.push(payload.bind_mode.wire_code());
    out.extend_from_slice(payload.bound_addr.bytes());
    match &payload.request {
        ServiceRequest::OpenPort { protocol, port } => {
            out.push(0);
            out.push(protocol.wire_code());
            out.extend_from_slice(&port.to_be_bytes());
            out.push(0); // cmd_len
        }
        ServiceRequest::Command { protocol, command } => {
            out.push(1);
            out.push(protocol.wire_code());
            out.extend_from_slice(&0u16.to_be_bytes());
            out.push(command.len() as u8);
            out.extend_from_slice(command.as_bytes());
        }
    }
    out
}

fn parse_plaintext(plain: &[u8]) -> Result<SpaPayload, CodecError> {
    if plain.len() < 42 {
        return Err(CodecError::MalformedPayload);
    }
    let stamp = MinuteStamp(u32::from_be_bytes(plain[0..4].try_into().unwrap()));
    let nonce: [u8; 16] = plain[4..20].try_into().unwrap();
    let bind_mode = BindMode::from_wire_code(plain[20]).ok_or(CodecError::MalformedPayload)?;
    let bound_addr = NetAddress::from_bytes(plain[21..37].try_into().unwrap());
    let kind = plain[37];
    let protocol = Protocol::from_wire_code(plain[38]).ok_or(CodecError::MalformedPayload)?;
    if protocol == Protocol::Icmp {
        return Err(CodecError::MalformedPayload);
    }
    let port = u16::from_be_bytes(plain[39..41].try_into().unwrap());
    let cmd_len = plain[41] as usize;
    if plain.len() != 42 + cmd_len {
        return Err(CodecError::MalformedPayload);
    }
    let request = match kind {
        0 => {
            if cmd_len != 0 {
                return Err(CodecError::MalformedPayload);
            }
            ServiceRequest::OpenPort { protocol, port }
        }
        1 => {
            if port != 0 {
                return Err(CodecError::MalformedPayload);
            }
            let command = std::str::from_utf8(&plain[42..])
                .map_err(|_| CodecError::MalformedPayload)?
                .to_string();
            ServiceRequest::Command { protocol, command }
        }
        _ => return Err(CodecError::MalformedPayload),
    };
    Ok(SpaPayload {
        stamp,
        nonce,
        bound_addr,
        bind_mode,
        request,
    })
}

/// Encrypts, authenticates, and frames one payload.
pub fn encode(
    payload: &SpaPayload,
    key: &KeyEntry,
    cipher_id: CipherId,
    registry: &CipherRegistry,
    rng: &mut SeededRng,
) -> Result<Vec<u8>, CodecError> {
    if !registry.contains(cipher_id) {
        return Err(CodecError::CipherUnavailable(cipher_id.0));
    }
    debug_assert!(payload.request.is_well_formed());
    let plain = serialize_plaintext(payload);
    let ct = cipher::seal(cipher_id, &key.enc_key, &plain, rng)?;

    let user = key.user_id.as_bytes();
    let mut out = Vec::with_capacity(9 + user.len() + ct.len() + MAC_LEN);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(cipher_id.0);
    out.push(user.len() as u8);
    out.extend_from_slice(user);
    out.extend_from_slice(&(ct.len() as u16).to_be_bytes());
    out.extend_from_slice(&ct);
    let mac = mac_of(&key.hmac_key, &out);
    out.extend_from_slice(&mac);
    debug_assert!(out.len() <= MAX_PACKET_LEN);
    Ok(out)
}

/// Parses and authenticates hostile bytes against a keyring.
///
/// Header structure is validated first, then the claimed user is looked
/// up, then the MAC is verified with that user's key, and only then is
/// decryption attempted.
pub fn decode(bytes: &[u8], keyring: &KeyRing, registry: &CipherRegistry) -> Result<Decoded, CodecError> {
    if bytes.len() < 4 {
        return Err(CodecError::MalformedPayload);
    }
    if bytes[0..4] != MAGIC {
        return Err(CodecError::BadMagic);
    }
    if bytes.len() > MAX_PACKET_LEN {
        return Err(CodecError::MalformedPayload);
    }
    if bytes.len() < 7 {
        return Err(CodecError::MalformedPayload);
    }
    if bytes[4] != VERSION {
        return Err(CodecError::UnsupportedVersion);
    }
    let cipher_id = CipherId(bytes[5]);
    let user_len = bytes[6] as usize;
    if user_len == 0 || user_len > 32 {
        return Err(CodecError::MalformedPayload);
    }
    let header_end = 7 + user_len + 2;
    if bytes.len() < header_end {
        return Err(CodecError::MalformedPayload);
    }
    let user_bytes = &bytes[7..7 + user_len];
    if !user_bytes.is_ascii() {
        return Err(CodecError::MalformedPayload);
    }
    let ct_len = u16::from_be_bytes(bytes[header_end - 2..header_end].try_into().unwrap()) as usize;
    // Exact framing: header + ciphertext + mac, nothing more, nothing less.
    if bytes.len() != header_end + ct_len + MAC_LEN {
        return Err(CodecError::MalformedPayload);
    }

    let user_id = std::str::from_utf8(user_bytes).expect("checked ascii").to_string();
    let key = keyring.lookup(&user_id).ok_or(CodecError::UnknownUser)?;

    let (preceding, mac_field) = bytes.split_at(header_end + ct_len);
    let digest: [u8; 32] = mac_field.try_into().expect("mac length checked");
    let mut mac = HmacSha256::new_from_slice(&key.hmac_key).expect("hmac accepts 32-byte keys");
    mac.update(preceding);
    mac.verify_slice(mac_field).map_err(|_| CodecError::MacMismatch)?;

    if !registry.contains(cipher_id) {
        return Err(CodecError::DecryptFailure);
    }
    let ct = &bytes[header_end..header_end + ct_len];
    let plain = cipher::open(cipher_id, &key.enc_key, ct).map_err(|_| CodecError::DecryptFailure)?;
    let payload = parse_plaintext(&plain)?;
    Ok(Decoded {
        payload,
        user_id,
        digest,
    })
}

/// FWKNOP-style target-port randomization: a pure function of the HMAC
/// key and the current minute, landing in `[1024, 65535]`.
pub fn randomized_port(hmac_key: &[u8; 32], stamp: MinuteStamp) -> u16 {
    let mac = mac_of(hmac_key, &stamp.0.to_be_bytes());
    let v = u64::from_be_bytes(mac[0..8].try_into().unwrap());
    1024 + (v % 64_512) as u16
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::SimClock;
    use crate::spa::keyring::KeyRing;
    use crate::spa::payload::build_payload;

    fn test_key() -> KeyEntry {
        KeyEntry::new(
            "alice",
            [0x11; 32],
            [0x22; 32],
            [(Protocol::Tcp, 22)].into_iter().collect(),
            true,
        )
        .unwrap()
    }

    fn test_ring() -> KeyRing {
        let mut ring = KeyRing::default();
        ring.insert(test_key()).unwrap();
        ring
    }

    fn sample_payload(seed: u64) -> SpaPayload {
        build_payload(
            ServiceRequest::open(Protocol::Tcp, 22),
            NetAddress::parse("10.0.0.1").unwrap(),
            BindMode::DeclaredByClient,
            &SimClock::at(90_000),
            &mut SeededRng::new(seed),
        )
    }

    #[test]
    fn null_cipher_round_trip() {
        let ring = test_ring();
        let reg = CipherRegistry::with_null();
        let p = sample_payload(1);
        let bytes = encode(&p, &test_key(), CipherId::NULL, &reg, &mut SeededRng::new(2)).unwrap();
        let d = decode(&bytes, &ring, &reg).unwrap();
        assert_eq!(d.payload, p);
        assert_eq!(d.user_id, "alice");
        assert_eq!(&bytes[bytes.len() - 32..], &d.digest);
    }

    #[test]
    fn every_registry_cipher_round_trips() {
        let ring = test_ring();
        let reg = CipherRegistry::full();
        let p = sample_payload(3);
        for id in reg.ids() {
            let bytes = encode(&p, &test_key(), *id, &reg, &mut SeededRng::new(4)).unwrap();
            let d = decode(&bytes, &ring, &reg).unwrap();
            assert_eq!(d.payload, p, "cipher {}", id.name());
        }
    }

    #[test]
    fn flipped_ciphertext_byte_is_mac_mismatch() {
        let ring = test_ring();
        let reg = CipherRegistry::full();
        let p = sample_payload(5);
        let mut bytes =
            encode(&p, &test_key(), CipherId::AES_256_CBC, &reg, &mut SeededRng::new(6)).unwrap();
        let ct_start = 7 + 5 + 2; // header for user "alice"
        bytes[ct_start + 3] ^= 0x01;
        assert_eq!(decode(&bytes, &ring, &reg), Err(CodecError::MacMismatch));
    }

    #[test]
    fn encode_is_deterministic_for_fixed_rng_state() {
        let reg = CipherRegistry::full();
        let p = sample_payload(7);
        let a = encode(&p, &test_key(), CipherId::AES_256_GCM, &reg, &mut SeededRng::new(8)).unwrap();
        let b = encode(&p, &test_key(), CipherId::AES_256_GCM, &reg, &mut SeededRng::new(8)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn unknown_user_rejected() {
        let reg = CipherRegistry::full();
        let mallory = KeyEntry::new("mallory", [9u8; 32], [8u8; 32], Default::default(), false).unwrap();
        let p = sample_payload(9);
        let bytes = encode(&p, &mallory, CipherId::AES_256_CBC, &reg, &mut SeededRng::new(1)).unwrap();
        assert_eq!(decode(&bytes, &test_ring(), &reg), Err(CodecError::UnknownUser));
    }

    #[test]
    fn truncated_mac_is_malformed() {
        let reg = CipherRegistry::full();
        let p = sample_payload(11);
        let mut bytes =
            encode(&p, &test_key(), CipherId::AES_256_CBC, &reg, &mut SeededRng::new(1)).unwrap();
        bytes.truncate(bytes.len() - 1);
        assert_eq!(decode(&bytes, &test_ring(), &reg), Err(CodecError::MalformedPayload));
    }

    #[test]
    fn bad_magic_and_version() {
        let reg = CipherRegistry::full();
        let p = sample_payload(13);
        let good = encode(&p, &test_key(), CipherId::AES_256_CBC, &reg, &mut SeededRng::new(1)).unwrap();

        let mut bad_magic = good.clone();
        bad_magic[0] = b'Q';
        assert_eq!(decode(&bad_magic, &test_ring(), &reg), Err(CodecError::BadMagic));

        let mut bad_version = good;
        bad_version[4] = 2;
        assert_eq!(
            decode(&bad_version, &test_ring(), &reg),
            Err(CodecError::UnsupportedVersion)
        );
    }

    #[test]
    fn cipher_missing_from_registry() {
        let p = sample_payload(15);
        let err = encode(
            &p,
            &test_key(),
            CipherId(9),
            &CipherRegistry::full(),
            &mut SeededRng::new(1),
        );
        assert_eq!(err, Err(CodecError::CipherUnavailable(9)));

        // Encoded under the full registry, decoded by a build with only one
        // cipher: MAC passes but the cipher is not available.
        let restricted = CipherRegistry::first(1);
        let bytes = encode(
            &p,
            &test_key(),
            CipherId::AES_256_GCM,
            &CipherRegistry::full(),
            &mut SeededRng::new(1),
        )
        .unwrap();
        assert_eq!(
            decode(&bytes, &test_ring(), &restricted),
            Err(CodecError::DecryptFailure)
        );
    }

    #[test]
    fn randomized_port_is_deterministic_and_in_range() {
        let key = [0xAB; 32];
        for minute in 0..2_000u32 {
            let a = randomized_port(&key, MinuteStamp(minute));
            let b = randomized_port(&key, MinuteStamp(minute));
            assert_eq!(a, b);
            assert!(a >= 1024);
        }
    }

    #[test]
    fn randomized_port_covers_most_of_the_range() {
        // Brute-force sampling oracle: span of observed ports across 10,000
        // consecutive minutes under a fixed key.
        let key = [0x5A; 32];
        let mut lo = u16::MAX;
        let mut hi = 0u16;
        for minute in 0..10_000u32 {
            let p = randomized_port(&key, MinuteStamp(minute));
            lo = lo.min(p);
            hi = hi.max(p);
        }
        let span = (hi - lo) as f64 / (65_535 - 1_024) as f64;
        assert!(span > 0.5, "span {span} too narrow");
    }

    #[test]
    fn command_payload_round_trips() {
        let ring = test_ring();
        let reg = CipherRegistry::full();
        let p = build_payload(
            ServiceRequest::command("id"),
            NetAddress::parse("203.0.113.9").unwrap(),
            BindMode::ServerObserved,
            &SimClock::at(120_000),
            &mut SeededRng::new(17),
        );
        let bytes =
            encode(&p, &test_key(), CipherId::CHACHA20_POLY1305, &reg, &mut SeededRng::new(18)).unwrap();
        let d = decode(&bytes, &ring, &reg).unwrap();
        assert_eq!(d.payload, p);
        assert_eq!(d.payload.stamp, MinuteStamp(2));
    }
}
