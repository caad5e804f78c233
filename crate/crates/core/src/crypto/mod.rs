//! The mandated algorithm set: SHA-1, HMAC-SHA-1, AES-128-CBC for content,
//! AES-128 key wrap for keys, KDF2, and 1024-bit RSA for key transport and
//! signatures.
//!
//! Everything here is a pure function over its inputs. Cost accounting lives
//! one layer up, in [`crate::roap::Meter`], which calls into this module and
//! records an event per operation.

mod keys;
mod rsa;

pub use keys::{builtin_key, builtin_keys, format_key_fixture, generate_key_pair, parse_key_fixture, NamedKeyPair};
pub use rsa::{
    encode_signature_block, i2osp, os2ip, pss_sign, pss_verify, rsa_apply, sign_digest, verify_digest, RsaKeyPair,
    RsaPublicKey, Signature, MODULUS_BITS, MODULUS_BYTES,
};

use aes::cipher::{block_padding::Pkcs7, BlockDecryptMut, BlockEncryptMut, KeyIvInit};
use hmac::{Hmac, Mac};
use rand::{CryptoRng, RngCore};
use sha1::{Digest as _, Sha1};
use std::fmt;
use thiserror::Error;
use zeroize::{Zeroize, ZeroizeOnDrop, Zeroizing};

type Aes128CbcEnc = cbc::Encryptor<aes::Aes128>;
type Aes128CbcDec = cbc::Decryptor<aes::Aes128>;

pub const DIGEST_LEN: usize = 20;
pub const KEY_LEN: usize = 16;
pub const BLOCK_LEN: usize = 16;
/// Bytes added by the key-wrap integrity register.
pub const WRAP_OVERHEAD: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CryptoError {
    #[error("{what}: expected {expected} bytes, got {actual}")]
    InvalidLength { what: &'static str, expected: usize, actual: usize },
    #[error("ciphertext length {0} is not a positive multiple of the block size")]
    BlockLength(usize),
    #[error("invalid padding")]
    InvalidPadding,
    #[error("key wrap input of {0} bytes must be a multiple of 8 and at least 16")]
    WrapInputLength(usize),
    #[error("key unwrap input of {0} bytes must be a multiple of 8 and at least 24")]
    UnwrapInputLength(usize),
    #[error("key unwrap integrity check failed")]
    Integrity,
    #[error("integer is out of range for the modulus")]
    OutOfRange,
    #[error("invalid RSA key: {0}")]
    InvalidKey(&'static str),
    #[error("key fixture line {line}: {reason}")]
    Fixture { line: usize, reason: String },
}

/// A SHA-1 output.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Digest([u8; DIGEST_LEN]);

impl Digest {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; DIGEST_LEN] = bytes.try_into().map_err(|_| CryptoError::InvalidLength {
            what: "digest",
            expected: DIGEST_LEN,
            actual: bytes.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn as_bytes(&self) -> &[u8; DIGEST_LEN] {
        &self.0
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Digest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Digest({})", self.to_hex())
    }
}

/// AES-128 key material. Used for K_CEK, K_REK, K_MAC, K_DEV and the KEK.
///
/// Zeroized on drop; `Debug` never prints the bytes.
#[derive(Clone, PartialEq, Eq, Zeroize, ZeroizeOnDrop)]
pub struct SymmetricKey([u8; KEY_LEN]);

impl SymmetricKey {
    pub fn generate<R: RngCore + CryptoRng>(rng: &mut R) -> Self {
        let mut bytes = [0u8; KEY_LEN];
        rng.fill_bytes(&mut bytes);
        Self(bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; KEY_LEN] = bytes.try_into().map_err(|_| CryptoError::InvalidLength {
            what: "symmetric key",
            expected: KEY_LEN,
            actual: bytes.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn as_bytes(&self) -> &[u8; KEY_LEN] {
        &self.0
    }
}

impl fmt::Debug for SymmetricKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("SymmetricKey(..)")
    }
}

pub fn sha1(data: &[u8]) -> Digest {
    Digest(Sha1::digest(data).into())
}

pub fn hmac_sha1(key: &[u8], data: &[u8]) -> Digest {
    let mut mac = <Hmac<Sha1> as Mac>::new_from_slice(key).expect("HMAC accepts any key length");
    mac.update(data);
    Digest(mac.finalize().into_bytes().into())
}

/// AES-128-CBC with PKCS#7 padding. Output is always one to sixteen bytes
/// longer than the input.
pub fn aes_cbc_encrypt(key: &SymmetricKey, iv: &[u8; BLOCK_LEN], plaintext: &[u8]) -> Vec<u8> {
    Aes128CbcEnc::new(key.as_bytes().into(), iv.into()).encrypt_padded_vec_mut::<Pkcs7>(plaintext)
}

pub fn aes_cbc_decrypt(key: &SymmetricKey, iv: &[u8; BLOCK_LEN], ciphertext: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if ciphertext.is_empty() || ciphertext.len() % BLOCK_LEN != 0 {
        return Err(CryptoError::BlockLength(ciphertext.len()));
    }
    Aes128CbcDec::new(key.as_bytes().into(), iv.into())
        .decrypt_padded_vec_mut::<Pkcs7>(ciphertext)
        .map_err(|_| CryptoError::InvalidPadding)
}

/// AES-128 key wrap with the default initial value. Output is
/// `data.len() + 8` bytes.
pub fn key_wrap(kek: &SymmetricKey, data: &[u8]) -> Result<Vec<u8>, CryptoError> {
    if data.len() < 16 || data.len() % 8 != 0 {
        return Err(CryptoError::WrapInputLength(data.len()));
    }
    aes_kw::KekAes128::from(*kek.as_bytes()).wrap_vec(data).map_err(|_| CryptoError::WrapInputLength(data.len()))
}

/// Inverse of [`key_wrap`]. Fails with [`CryptoError::Integrity`] when the
/// integrity register does not come out as the initial value, i.e. on a
/// wrong KEK or any modification of the wrapped bytes.
pub fn key_unwrap(kek: &SymmetricKey, wrapped: &[u8]) -> Result<Zeroizing<Vec<u8>>, CryptoError> {
    if wrapped.len() < 24 || wrapped.len() % 8 != 0 {
        return Err(CryptoError::UnwrapInputLength(wrapped.len()));
    }
    let mut out = Zeroizing::new(vec![0u8; wrapped.len() - WRAP_OVERHEAD]);
    aes_kw::KekAes128::from(*kek.as_bytes()).unwrap(wrapped, &mut out).map_err(|_| CryptoError::Integrity)?;
    Ok(out)
}

/// KDF2 over SHA-1: `sha1(z || 1) || sha1(z || 2) || ...` truncated to
/// `out_len`, counters as 4-byte big-endian integers.
pub fn kdf2(z: &[u8], out_len: usize) -> Zeroizing<Vec<u8>> {
    let mut out = Zeroizing::new(Vec::with_capacity(out_len + DIGEST_LEN));
    let mut input = Zeroizing::new(Vec::with_capacity(z.len() + 4));
    let mut counter: u32 = 1;
    while out.len() < out_len {
        input.clear();
        input.extend_from_slice(z);
        input.extend_from_slice(&counter.to_be_bytes());
        out.extend_from_slice(sha1(&input).as_bytes());
        counter += 1;
    }
    out.truncate(out_len);
    out
}

/// Number of SHA-1 invocations [`kdf2`] performs for `out_len` bytes.
pub fn kdf2_blocks(out_len: usize) -> usize {
    out_len.div_ceil(DIGEST_LEN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn key(byte: u8) -> SymmetricKey {
        SymmetricKey::from_bytes(&[byte; KEY_LEN]).unwrap()
    }

    #[test]
    fn sha1_standard_vectors() {
        assert_eq!(sha1(b"").to_hex(), "da39a3ee5e6b4b0d3255bfef95601890afd80709");
        assert_eq!(sha1(b"abc").to_hex(), "a9993e364706816aba3e25717850c26c9cd0d89d");
        assert_eq!(
            sha1(b"abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq").to_hex(),
            "84983e441c3bd26ebaae4aa1f95129e5e54670f1"
        );
    }

    #[test]
    fn hmac_sha1_standard_vectors() {
        assert_eq!(hmac_sha1(&[0x0b; 20], b"Hi There").to_hex(), "b617318655057264e28bc0b6fb378c8ef146be00");
        assert_eq!(
            hmac_sha1(b"Jefe", b"what do ya want for nothing?").to_hex(),
            "effcdf6ae5eb2fa2d27416d5f184df9c259a7c79"
        );
    }

    #[test]
    fn hmac_single_bit_flips_change_digest() {
        let data = b"rights object canonical body".to_vec();
        let reference = hmac_sha1(&[7; 16], &data);
        for bit in (0..data.len() * 8).step_by(5) {
            let mut flipped = data.clone();
            flipped[bit / 8] ^= 1 << (bit % 8);
            assert_ne!(hmac_sha1(&[7; 16], &flipped), reference, "bit {bit}");
        }
    }

    #[test]
    fn aes_core_single_block_vector() {
        // FIPS-197 appendix C.1; with a zero IV the first CBC block equals
        // the raw block cipher output.
        let k = SymmetricKey::from_bytes(&hex::decode("000102030405060708090a0b0c0d0e0f").unwrap()).unwrap();
        let pt = hex::decode("00112233445566778899aabbccddeeff").unwrap();
        let ct = aes_cbc_encrypt(&k, &[0; 16], &pt);
        assert_eq!(ct.len(), 32);
        assert_eq!(hex::encode(&ct[..16]), "69c4e0d86a7b0430d8cdb78070b4c55a");
        assert_eq!(aes_cbc_decrypt(&k, &[0; 16], &ct).unwrap(), pt);
    }

    #[test]
    fn aes_cbc_sp800_38a_first_block() {
        let k = SymmetricKey::from_bytes(&hex::decode("2b7e151628aed2a6abf7158809cf4f3c").unwrap()).unwrap();
        let iv: [u8; 16] = hex::decode("000102030405060708090a0b0c0d0e0f").unwrap().try_into().unwrap();
        let pt = hex::decode("6bc1bee22e409f96e93d7e117393172a").unwrap();
        let ct = aes_cbc_encrypt(&k, &iv, &pt);
        assert_eq!(hex::encode(&ct[..16]), "7649abac8119b246cee98e9b12e9197d");
    }

    #[test]
    fn aes_cbc_rejects_bad_lengths() {
        assert_eq!(aes_cbc_decrypt(&key(1), &[0; 16], &[]), Err(CryptoError::BlockLength(0)));
        assert_eq!(aes_cbc_decrypt(&key(1), &[0; 16], &[0; 17]), Err(CryptoError::BlockLength(17)));
    }

    #[test]
    fn aes_cbc_wrong_key_never_returns_plaintext() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut pt = vec![0u8; 100];
        rng.fill_bytes(&mut pt);
        for i in 0..32u8 {
            let ct = aes_cbc_encrypt(&key(i), &[9; 16], &pt);
            match aes_cbc_decrypt(&key(i.wrapping_add(1)), &[9; 16], &ct) {
                Err(e) => assert_eq!(e, CryptoError::InvalidPadding),
                Ok(other) => assert_ne!(other, pt),
            }
        }
    }

    #[test]
    fn aes_cbc_music_player_sized_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(35);
        let mut pt = vec![0u8; 3_670_016];
        rng.fill_bytes(&mut pt);
        let k = SymmetricKey::generate(&mut rng);
        let ct = aes_cbc_encrypt(&k, &[1; 16], &pt);
        assert_eq!(ct.len(), 3_670_032);
        assert_eq!(aes_cbc_decrypt(&k, &[1; 16], &ct).unwrap(), pt);
    }

    #[test]
    fn key_wrap_rfc3394_vector() {
        // RFC 3394 section 4.1: 128-bit key data under a 128-bit KEK.
        let kek = SymmetricKey::from_bytes(&hex::decode("000102030405060708090A0B0C0D0E0F").unwrap()).unwrap();
        let data = hex::decode("00112233445566778899AABBCCDDEEFF").unwrap();
        let wrapped = key_wrap(&kek, &data).unwrap();
        assert_eq!(hex::encode_upper(&wrapped), "1FA68B0A8112B447AEF34BD8FB5A7B829D3E862371D2CFE5");
        assert_eq!(key_unwrap(&kek, &wrapped).unwrap().as_slice(), data.as_slice());
    }

    #[test]
    fn key_wrap_of_mac_and_rek_is_forty_bytes() {
        let payload = [0x5a; 32];
        let wrapped = key_wrap(&key(3), &payload).unwrap();
        assert_eq!(wrapped.len(), 40);
        assert_eq!(key_unwrap(&key(3), &wrapped).unwrap().as_slice(), &payload);
    }

    #[test]
    fn key_unwrap_under_wrong_kek_fails_integrity() {
        let payload = [0x11; 32];
        for a in 0..8u8 {
            let wrapped = key_wrap(&key(a), &payload).unwrap();
            for b in (0..8u8).filter(|&b| b != a) {
                assert_eq!(key_unwrap(&key(b), &wrapped).unwrap_err(), CryptoError::Integrity);
            }
        }
    }

    #[test]
    fn key_unwrap_detects_tampering() {
        let wrapped = key_wrap(&key(4), &[0x22; 16]).unwrap();
        for i in 0..wrapped.len() {
            let mut t = wrapped.clone();
            t[i] ^= 0x80;
            assert_eq!(key_unwrap(&key(4), &t).unwrap_err(), CryptoError::Integrity);
        }
    }

    #[test]
    fn key_wrap_length_errors() {
        assert_eq!(key_wrap(&key(0), &[0; 8]), Err(CryptoError::WrapInputLength(8)));
        assert_eq!(key_wrap(&key(0), &[0; 20]), Err(CryptoError::WrapInputLength(20)));
        assert_eq!(key_unwrap(&key(0), &[0; 16]).unwrap_err(), CryptoError::UnwrapInputLength(16));
    }

    // Independent oracle: build each KDF2 block by hand from `sha1`.
    fn kdf2_block(z: &[u8], counter: u32) -> Vec<u8> {
        let mut input = z.to_vec();
        input.extend_from_slice(&counter.to_be_bytes());
        sha1(&input).as_bytes().to_vec()
    }

    #[test]
    fn kdf2_matches_hand_built_blocks() {
        let z: Vec<u8> = (0..128u8).collect();
        assert!(kdf2(&z, 0).is_empty());
        assert_eq!(kdf2(&z, 16).as_slice(), &kdf2_block(&z, 1)[..16]);
        let mut expected = kdf2_block(&z, 1);
        expected.extend_from_slice(&kdf2_block(&z, 2)[..4]);
        assert_eq!(kdf2(&z, 24).as_slice(), expected.as_slice());
    }

    #[test]
    fn kdf2_block_count() {
        assert_eq!(kdf2_blocks(0), 0);
        assert_eq!(kdf2_blocks(16), 1);
        assert_eq!(kdf2_blocks(20), 1);
        assert_eq!(kdf2_blocks(21), 2);
    }

    #[test]
    fn symmetric_key_debug_is_redacted() {
        assert_eq!(format!("{:?}", key(0xaa)), "SymmetricKey(..)");
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cbc_round_trip(k in any::<[u8; 16]>(), iv in any::<[u8; 16]>(),
                              pt in proptest::collection::vec(any::<u8>(), 0..600)) {
                let k = SymmetricKey::from_bytes(&k).unwrap();
                let ct = aes_cbc_encrypt(&k, &iv, &pt);
                prop_assert!(ct.len() > pt.len() && ct.len() <= pt.len() + 16);
                prop_assert_eq!(aes_cbc_decrypt(&k, &iv, &ct).unwrap(), pt);
            }

            #[test]
            fn wrap_round_trip(k in any::<[u8; 16]>(), words in 2usize..8, seed in any::<u8>()) {
                let k = SymmetricKey::from_bytes(&k).unwrap();
                let data: Vec<u8> = (0..words * 8).map(|i| (i as u8).wrapping_mul(seed)).collect();
                let wrapped = key_wrap(&k, &data).unwrap();
                prop_assert_eq!(wrapped.len(), data.len() + 8);
                let unwrapped = key_unwrap(&k, &wrapped).unwrap();
                prop_assert_eq!(unwrapped.as_slice(), data.as_slice());
            }

            #[test]
            fn kdf2_prefix_consistent(z in proptest::collection::vec(any::<u8>(), 0..160),
                                      a in 0usize..70, b in 0usize..70) {
                let (short, long) = (a.min(b), a.max(b));
                let ks = kdf2(&z, short);
                let kl = kdf2(&z, long);
                prop_assert_eq!(ks.as_slice(), &kl[..short]);
            }

            #[test]
            fn primitives_are_deterministic(data in proptest::collection::vec(any::<u8>(), 0..300)) {
                prop_assert_eq!(sha1(&data), sha1(&data));
                prop_assert_eq!(hmac_sha1(&data, &data), hmac_sha1(&data, &data));
            }
        }
    }
}
