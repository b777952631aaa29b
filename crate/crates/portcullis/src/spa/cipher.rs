//! Cipher registry.
//!
//! Five real ciphers plus a null cipher for diagnostics. Non-AEAD modes
//! (the CBC family) get their integrity from the packet-level HMAC, which
//! is always verified before decryption is attempted.

use aes::cipher::block_padding::Pkcs7;
use aes::cipher::{BlockModeDecrypt, BlockModeEncrypt, KeyIvInit};
use aes_gcm::aead::{Aead, KeyInit};
use aes_gcm::Aes256Gcm;
use chacha20poly1305::ChaCha20Poly1305;
use thiserror::Error;

use crate::rng::SeededRng;

/// Identifier carried in the packet header.
///
/// `0` is the null cipher and is excluded from the full registry; it exists
/// for tests and wire-format diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CipherId(pub u8);

impl CipherId {
    pub const NULL: CipherId = CipherId(0);
    pub const AES_256_CBC: CipherId = CipherId(1);
    pub const AES_256_GCM: CipherId = CipherId(2);
    pub const CHACHA20_POLY1305: CipherId = CipherId(3);
    pub const TWOFISH_256_CBC: CipherId = CipherId(4);
    pub const SERPENT_256_CBC: CipherId = CipherId(5);

    pub fn name(self) -> &'static str {
        match self.0 {
            0 => "null",
            1 => "aes-256-cbc",
            2 => "aes-256-gcm",
            3 => "chacha20-poly1305",
            4 => "twofish-256-cbc",
            5 => "serpent-256-cbc",
            _ => "unknown",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CipherError {
    #[error("cipher id {0} not available in this registry")]
    CipherUnavailable(u8),
    #[error("decryption failed")]
    DecryptFailure,
}

/// The set of ciphers a build (or an emulated implementation) offers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CipherRegistry {
    ids: Vec<CipherId>,
}

impl CipherRegistry {
    /// Full build: all five real ciphers.
    pub fn full() -> Self {
        Self {
            ids: vec![
                CipherId::AES_256_CBC,
                CipherId::AES_256_GCM,
                CipherId::CHACHA20_POLY1305,
                CipherId::TWOFISH_256_CBC,
                CipherId::SERPENT_256_CBC,
            ],
        }
    }

    /// The first `count` real ciphers, for emulating restricted builds.
    pub fn first(count: u8) -> Self {
        let full = Self::full();
        Self {
            ids: full.ids.into_iter().take(count as usize).collect(),
        }
    }

    /// Full registry plus the null cipher.
    pub fn with_null() -> Self {
        let mut r = Self::full();
        r.ids.insert(0, CipherId::NULL);
        r
    }

    pub fn ids(&self) -> &[CipherId] {
        &self.ids
    }

    pub fn contains(&self, id: CipherId) -> bool {
        self.ids.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

impl Default for CipherRegistry {
    fn default() -> Self {
        Self::full()
    }
}

/// All ciphers of a full build.
pub fn registry() -> Vec<CipherId> {
    CipherRegistry::full().ids().to_vec()
}

type TwofishCbcEnc = cbc::Encryptor<twofish::Twofish>;
type TwofishCbcDec = cbc::Decryptor<twofish::Twofish>;
type SerpentCbcEnc = cbc::Encryptor<serpent::Serpent>;
type SerpentCbcDec = cbc::Decryptor<serpent::Serpent>;
type Aes256CbcEnc = cbc::Encryptor<aes::Aes256>;
type Aes256CbcDec = cbc::Decryptor<aes::Aes256>;

fn draw(rng: &mut SeededRng, n: usize) -> Vec<u8> {
    let mut v = vec![0u8; n];
    rng.fill_bytes(&mut v);
    v
}

/// Encrypts `plain` under `id`, prefixing the IV or AEAD nonce inside the
/// returned ciphertext field.
pub fn seal(
    id: CipherId,
    key: &[u8; 32],
    plain: &[u8],
    rng: &mut SeededRng,
) -> Result<Vec<u8>, CipherError> {
    match id {
        CipherId::NULL => Ok(plain.to_vec()),
        CipherId::AES_256_CBC => {
            let iv = draw(rng, 16);
            let ct = Aes256CbcEnc::new(key.into(), iv.as_slice().try_into().unwrap())
                .encrypt_padded_vec::<Pkcs7>(plain);
            Ok([iv, ct].concat())
        }
        CipherId::TWOFISH_256_CBC => {
            let iv = draw(rng, 16);
            let ct = TwofishCbcEnc::new(key.into(), iv.as_slice().try_into().unwrap())
                .encrypt_padded_vec::<Pkcs7>(plain);
            Ok([iv, ct].concat())
        }
        CipherId::SERPENT_256_CBC => {
            let iv = draw(rng, 16);
            let ct = SerpentCbcEnc::new(key.into(), iv.as_slice().try_into().unwrap())
                .encrypt_padded_vec::<Pkcs7>(plain);
            Ok([iv, ct].concat())
        }
        CipherId::AES_256_GCM => {
            let nonce = draw(rng, 12);
            let cipher = Aes256Gcm::new(key.into());
            let ct = cipher
                .encrypt(nonce.as_slice().try_into().unwrap(), plain)
                .map_err(|_| CipherError::DecryptFailure)?;
            Ok([nonce, ct].concat())
        }
        CipherId::CHACHA20_POLY1305 => {
            let nonce = draw(rng, 12);
            let cipher = ChaCha20Poly1305::new(key.into());
            let ct = cipher
                .encrypt(nonce.as_slice().try_into().unwrap(), plain)
                .map_err(|_| CipherError::DecryptFailure)?;
            Ok([nonce, ct].concat())
        }
        other => Err(CipherError::CipherUnavailable(other.0)),
    }
}

/// Inverse of [`seal`].
pub fn open(id: CipherId, key: &[u8; 32], sealed: &[u8]) -> Result<Vec<u8>, CipherError> {
    match id {
        CipherId::NULL => Ok(sealed.to_vec()),
        CipherId::AES_256_CBC | CipherId::TWOFISH_256_CBC | CipherId::SERPENT_256_CBC => {
            if sealed.len() < 32 || (sealed.len() - 16) % 16 != 0 {
                return Err(CipherError::DecryptFailure);
            }
            let (iv, ct) = sealed.split_at(16);
            let iv: &[u8; 16] = iv.try_into().unwrap();
            let out = match id {
                CipherId::AES_256_CBC => Aes256CbcDec::new(key.into(), iv.into())
                    .decrypt_padded_vec::<Pkcs7>(ct),
                CipherId::TWOFISH_256_CBC => TwofishCbcDec::new(key.into(), iv.into())
                    .decrypt_padded_vec::<Pkcs7>(ct),
                _ => SerpentCbcDec::new(key.into(), iv.into()).decrypt_padded_vec::<Pkcs7>(ct),
            };
            out.map_err(|_| CipherError::DecryptFailure)
        }
        CipherId::AES_256_GCM => {
            if sealed.len() < 12 + 16 {
                return Err(CipherError::DecryptFailure);
            }
            let (nonce, ct) = sealed.split_at(12);
            Aes256Gcm::new(key.into())
                .decrypt(nonce.try_into().unwrap(), ct)
                .map_err(|_| CipherError::DecryptFailure)
        }
        CipherId::CHACHA20_POLY1305 => {
            if sealed.len() < 12 + 16 {
                return Err(CipherError::DecryptFailure);
            }
            let (nonce, ct) = sealed.split_at(12);
            ChaCha20Poly1305::new(key.into())
                .decrypt(nonce.try_into().unwrap(), ct)
                .map_err(|_| CipherError::DecryptFailure)
        }
        other => Err(CipherError::CipherUnavailable(other.0)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_registry_has_five_ciphers() {
        let ids: Vec<u8> = registry().iter().map(|c| c.0).collect();
        assert_eq!(ids, vec![1, 2, 3, 4, 5]);
    }

    #[test]
    fn restricted_registries() {
        assert_eq!(CipherRegistry::first(2).ids().len(), 2);
        assert_eq!(CipherRegistry::first(1).ids(), &[CipherId::AES_256_CBC]);
    }

    #[test]
    fn every_cipher_round_trips() {
        let key = [7u8; 32];
        let plain = b"the quick brown fox jumps over the lazy dog";
        for id in CipherRegistry::with_null().ids() {
            let mut rng = SeededRng::new(11);
            let sealed = seal(*id, &key, plain, &mut rng).unwrap();
            let opened = open(*id, &key, &sealed).unwrap();
            assert_eq!(opened, plain, "cipher {}", id.name());
        }
    }

    #[test]
    fn wrong_key_fails_for_aead_ciphers() {
        let key = [7u8; 32];
        let bad = [8u8; 32];
        let plain = b"payload";
        for id in [CipherId::AES_256_GCM, CipherId::CHACHA20_POLY1305] {
            let mut rng = SeededRng::new(2);
            let sealed = seal(id, &key, plain, &mut rng).unwrap();
            assert_eq!(open(id, &bad, &sealed), Err(CipherError::DecryptFailure));
        }
    }

    #[test]
    fn unknown_id_unavailable() {
        let mut rng = SeededRng::new(0);
        assert_eq!(
            seal(CipherId(9), &[0u8; 32], b"x", &mut rng),
            Err(CipherError::CipherUnavailable(9))
        );
    }

    #[test]
    fn sealing_is_deterministic_given_rng_state() {
        let key = [3u8; 32];
        let plain = b"determinism";
        for id in registry() {
            let a = seal(id, &key, plain, &mut SeededRng::new(5)).unwrap();
            let b = seal(id, &key, plain, &mut SeededRng::new(5)).unwrap();
            assert_eq!(a, b, "cipher {}", id.name());
        }
    }
}
