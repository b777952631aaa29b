//! Single packet authorization: payload assembly, cipher registry, wire
//! codec, and key management.

pub mod cipher;
pub mod keyring;
pub mod payload;
pub mod wire;

pub use cipher::{registry, CipherId, CipherRegistry};
pub use keyring::{derive_keypair, KeyEntry, KeyRing, KeyringError};
pub use payload::{build_payload, BindMode, ServiceRequest, SpaPayload};
pub use wire::{decode, encode, randomized_port, CodecError, Decoded, MAX_PACKET_LEN};
