//! Per-user key material and the keyring file format.
//!
//! One entry per line:
//!
//! ```text
//! user_id:enc_key_hex64:hmac_key_hex64:proto/port[,proto/port...]:cmd={0|1}
//! ```
//!
//! `#` starts a comment and blank lines are ignored. The ports field may be
//! empty for command-only users.
//!
//! Passphrase-derived keys use a fixed construction so that independent
//! tools (and attackers guessing passphrases) arrive at the same pair:
//! `enc_key = HMAC-SHA-256(passphrase, "portcullis/enc")`,
//! `hmac_key = HMAC-SHA-256(passphrase, "portcullis/mac")`.

use std::collections::{BTreeMap, BTreeSet};

use hmac::{Hmac, Mac};
use sha2::Sha256;
use thiserror::Error;

use crate::addr::Protocol;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyringError {
    #[error("line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    #[error("duplicate user {0:?}")]
    DuplicateUser(String),
}

/// One user's symmetric keys and authorization scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyEntry {
    pub user_id: String,
    pub enc_key: [u8; 32],
    pub hmac_key: [u8; 32],
    pub allowed_ports: BTreeSet<(Protocol, u16)>,
    pub allow_command: bool,
}

impl KeyEntry {
    pub fn new(
        user_id: &str,
        enc_key: [u8; 32],
        hmac_key: [u8; 32],
        allowed_ports: BTreeSet<(Protocol, u16)>,
        allow_command: bool,
    ) -> Result<Self, String> {
        if user_id.is_empty() || user_id.len() > 32 || !user_id.is_ascii() {
            return Err(format!("user_id must be 1..=32 ASCII bytes, got {user_id:?}"));
        }
        if enc_key == hmac_key {
            return Err("enc_key and hmac_key must differ".to_string());
        }
        Ok(Self {
            user_id: user_id.to_string(),
            enc_key,
            hmac_key,
            allowed_ports,
            allow_command,
        })
    }

    /// Builds an entry from a passphrase using the documented derivation.
    pub fn from_passphrase(
        user_id: &str,
        passphrase: &str,
        allowed_ports: BTreeSet<(Protocol, u16)>,
        allow_command: bool,
    ) -> Result<Self, String> {
        let (enc_key, hmac_key) = derive_keypair(passphrase);
        Self::new(user_id, enc_key, hmac_key, allowed_ports, allow_command)
    }

    pub fn may_open(&self, protocol: Protocol, port: u16) -> bool {
        self.allowed_ports.contains(&(protocol, port))
    }
}

/// Derives an (enc, hmac) key pair from a passphrase. Fixed construction,
/// see the module docs.
pub fn derive_keypair(passphrase: &str) -> ([u8; 32], [u8; 32]) {
    let tag = |label: &[u8]| -> [u8; 32] {
        let mut mac = Hmac::<Sha256>::new_from_slice(passphrase.as_bytes())
            .expect("hmac accepts any key length");
        mac.update(label);
        mac.finalize().into_bytes().into()
    };
    (tag(b"portcullis/enc"), tag(b"portcullis/mac"))
}

/// The set of provisioned users, unique by user id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeyRing {
    entries: BTreeMap<String, KeyEntry>,
}

impl KeyRing {
    pub fn insert(&mut self, entry: KeyEntry) -> Result<(), KeyringError> {
        if self.entries.contains_key(&entry.user_id) {
            return Err(KeyringError::DuplicateUser(entry.user_id));
        }
        self.entries.insert(entry.user_id.clone(), entry);
        Ok(())
    }

    pub fn lookup(&self, user_id: &str) -> Option<&KeyEntry> {
        self.entries.get(user_id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &KeyEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses the keyring file format. Line numbers in errors are 1-based.
    pub fn parse(text: &str) -> Result<Self, KeyringError> {
        let mut ring = KeyRing::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(':').collect();
            if fields.len() != 5 {
                return Err(KeyringError::ParseError {
                    line: line_no,
                    msg: format!("expected 5 ':'-separated fields, got {}", fields.len()),
                });
            }
            let user_id = fields[0];
            let enc_key = parse_key_hex(fields[1], line_no, "enc_key")?;
            let hmac_key = parse_key_hex(fields[2], line_no, "hmac_key")?;
            let mut allowed_ports = BTreeSet::new();
            if !fields[3].is_empty() {
                for spec in fields[3].split(',') {
                    allowed_ports.insert(parse_port_spec(spec, line_no)?);
                }
            }
            let allow_command = match fields[4] {
                "cmd=0" => false,
                "cmd=1" => true,
                other => {
                    return Err(KeyringError::ParseError {
                        line: line_no,
                        msg: format!("expected cmd=0 or cmd=1, got {other:?}"),
                    })
                }
            };
            let entry = KeyEntry::new(user_id, enc_key, hmac_key, allowed_ports, allow_command)
                .map_err(|msg| KeyringError::ParseError { line: line_no, msg })?;
            ring.insert(entry)?;
        }
        Ok(ring)
    }
}

fn parse_key_hex(field: &str, line: usize, what: &str) -> Result<[u8; 32], KeyringError> {
    let bytes = hex::decode(field).map_err(|_| KeyringError::ParseError {
        line,
        msg: format!("{what} is not valid hex"),
    })?;
    bytes.try_into().map_err(|_| KeyringError::ParseError {
        line,
        msg: format!("{what} must be 64 hex chars (32 bytes)"),
    })
}

fn parse_port_spec(spec: &str, line: usize) -> Result<(Protocol, u16), KeyringError> {
    let err = |msg: String| KeyringError::ParseError { line, msg };
    let (proto, port) = spec
        .split_once('/')
        .ok_or_else(|| err(format!("port spec {spec:?} missing '/'")))?;
    let protocol = Protocol::parse(proto)
        .filter(|p| *p != Protocol::Icmp)
        .ok_or_else(|| err(format!("bad protocol {proto:?} (tcp or udp)")))?;
    let port: u16 = port
        .parse()
        .map_err(|_| err(format!("bad port {port:?}")))?;
    Ok((protocol, port))
}

#[cfg(test)]
mod tests {
    use super::*;

    const ENC: &str = "1111111111111111111111111111111111111111111111111111111111111111";
    const MAC: &str = "2222222222222222222222222222222222222222222222222222222222222222";

    #[test]
    fn parses_single_entry() {
        let text = format!("# demo keyring\nalice:{ENC}:{MAC}:tcp/22:cmd=0\n");
        let ring = KeyRing::parse(&text).unwrap();
        assert_eq!(ring.len(), 1);
        let alice = ring.lookup("alice").unwrap();
        assert!(alice.may_open(Protocol::Tcp, 22));
        assert!(!alice.may_open(Protocol::Udp, 22));
        assert!(!alice.allow_command);
    }

    #[test]
    fn duplicate_user_rejected() {
        let text = format!("alice:{ENC}:{MAC}:tcp/22:cmd=0\nalice:{ENC}:{MAC}:tcp/80:cmd=0\n");
        assert_eq!(
            KeyRing::parse(&text),
            Err(KeyringError::DuplicateUser("alice".into()))
        );
    }

    #[test]
    fn bad_hex_reports_line_number() {
        let err = KeyRing::parse("bob:xyz:abc:tcp/22:cmd=0\n").unwrap_err();
        assert!(matches!(err, KeyringError::ParseError { line: 1, .. }));
    }

    #[test]
    fn equal_keys_rejected() {
        let text = format!("carol:{ENC}:{ENC}:tcp/22:cmd=0\n");
        assert!(matches!(
            KeyRing::parse(&text),
            Err(KeyringError::ParseError { line: 1, .. })
        ));
    }

    #[test]
    fn multiple_ports_and_command_flag() {
        let text = format!("dave:{ENC}:{MAC}:tcp/22,udp/53,tcp/443:cmd=1\n");
        let ring = KeyRing::parse(&text).unwrap();
        let dave = ring.lookup("dave").unwrap();
        assert_eq!(dave.allowed_ports.len(), 3);
        assert!(dave.allow_command);
    }

    #[test]
    fn empty_ports_field_is_command_only() {
        let text = format!("eve:{ENC}:{MAC}::cmd=1\n");
        let ring = KeyRing::parse(&text).unwrap();
        assert!(ring.lookup("eve").unwrap().allowed_ports.is_empty());
    }

    #[test]
    fn derive_keypair_is_stable_and_distinct() {
        let (e1, m1) = derive_keypair("hunter2");
        let (e2, m2) = derive_keypair("hunter2");
        assert_eq!(e1, e2);
        assert_eq!(m1, m2);
        assert_ne!(e1, m1);
        let (e3, _) = derive_keypair("hunter3");
        assert_ne!(e1, e3);
    }
}
