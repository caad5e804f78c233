//! Raw 1024-bit RSA and the deterministic one-hash signature encoding.
//!
//! A single exponentiation routine, [`rsa_apply`], serves as encryption,
//! decryption, signing and verification primitive; which one it is depends
//! only on the exponent passed in.
//!
//! Signatures use a simplified encoding of the message: one SHA-1 over the
//! message, placed at the end of a fixed block
//! `00 01 FF .. FF 00 || sha1(m)`, and one private-key exponentiation.

use super::{sha1, CryptoError, Digest, DIGEST_LEN};
use num_bigint::BigUint;
use num_traits::Zero;
use std::fmt;

pub const MODULUS_BITS: u64 = 1024;
pub const MODULUS_BYTES: usize = 128;

#[derive(Clone, PartialEq, Eq)]
pub struct RsaPublicKey {
    n: BigUint,
    e: BigUint,
}

impl RsaPublicKey {
    pub fn new(n: BigUint, e: BigUint) -> Result<Self, CryptoError> {
        if n.bits() != MODULUS_BITS {
            return Err(CryptoError::InvalidKey("modulus must be exactly 1024 bits"));
        }
        if e.is_zero() || e >= n {
            return Err(CryptoError::InvalidKey("public exponent out of range"));
        }
        Ok(Self { n, e })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.n
    }

    pub fn exponent(&self) -> &BigUint {
        &self.e
    }
}

impl fmt::Debug for RsaPublicKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.n.to_str_radix(16);
        write!(f, "RsaPublicKey(n={}.., e={})", &n[..16], self.e)
    }
}

/// A 1024-bit RSA key pair. The private exponent never appears in `Debug`.
#[derive(Clone, PartialEq, Eq)]
pub struct RsaKeyPair {
    public: RsaPublicKey,
    d: BigUint,
}

impl RsaKeyPair {
    /// Validates bit length and exponent ranges, then checks that `e` and
    /// `d` invert each other on a probe value.
    pub fn from_components(n: BigUint, e: BigUint, d: BigUint) -> Result<Self, CryptoError> {
        let public = RsaPublicKey::new(n, e)?;
        if d.is_zero() || d >= public.n {
            return Err(CryptoError::InvalidKey("private exponent out of range"));
        }
        let probe = BigUint::from(0x0123_4567_89ab_cdefu64);
        let round = probe.modpow(&public.e, &public.n).modpow(&d, &public.n);
        if round != probe {
            return Err(CryptoError::InvalidKey("exponents are not inverse"));
        }
        Ok(Self { public, d })
    }

    pub fn public(&self) -> &RsaPublicKey {
        &self.public
    }

    pub fn modulus(&self) -> &BigUint {
        &self.public.n
    }

    pub fn public_exponent(&self) -> &BigUint {
        &self.public.e
    }

    pub fn private_exponent(&self) -> &BigUint {
        &self.d
    }

    /// RSADP / RSASP1.
    pub fn apply_private(&self, m: &BigUint) -> Result<BigUint, CryptoError> {
        rsa_apply(&self.public.n, &self.d, m)
    }
}

impl RsaPublicKey {
    /// RSAEP / RSAVP1.
    pub fn apply_public(&self, m: &BigUint) -> Result<BigUint, CryptoError> {
        rsa_apply(&self.n, &self.e, m)
    }
}

impl fmt::Debug for RsaKeyPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RsaKeyPair").field("public", &self.public).finish_non_exhaustive()
    }
}

/// `m^exponent mod n`, rejecting `m >= n`.
pub fn rsa_apply(n: &BigUint, exponent: &BigUint, m: &BigUint) -> Result<BigUint, CryptoError> {
    if m >= n {
        return Err(CryptoError::OutOfRange);
    }
    Ok(m.modpow(exponent, n))
}

/// Big-endian encoding of `x` into exactly `len` bytes.
pub fn i2osp(x: &BigUint, len: usize) -> Result<Vec<u8>, CryptoError> {
    let bytes = x.to_bytes_be();
    if x.is_zero() {
        return Ok(vec![0; len]);
    }
    if bytes.len() > len {
        return Err(CryptoError::OutOfRange);
    }
    let mut out = vec![0u8; len - bytes.len()];
    out.extend_from_slice(&bytes);
    Ok(out)
}

pub fn os2ip(bytes: &[u8]) -> BigUint {
    BigUint::from_bytes_be(bytes)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Signature([u8; MODULUS_BYTES]);

impl Signature {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CryptoError> {
        let arr: [u8; MODULUS_BYTES] = bytes.try_into().map_err(|_| CryptoError::InvalidLength {
            what: "signature",
            expected: MODULUS_BYTES,
            actual: bytes.len(),
        })?;
        Ok(Self(arr))
    }

    pub fn as_bytes(&self) -> &[u8; MODULUS_BYTES] {
        &self.0
    }
}

impl fmt::Debug for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Signature({}..)", hex::encode(&self.0[..8]))
    }
}

/// `00 01 FF..FF 00 || digest`, 128 bytes.
pub fn encode_signature_block(digest: &Digest) -> [u8; MODULUS_BYTES] {
    let mut em = [0xffu8; MODULUS_BYTES];
    em[0] = 0x00;
    em[1] = 0x01;
    em[MODULUS_BYTES - DIGEST_LEN - 1] = 0x00;
    em[MODULUS_BYTES - DIGEST_LEN..].copy_from_slice(digest.as_bytes());
    em
}

/// The exponentiation half of signing, for callers that hash separately.
pub fn sign_digest(key: &RsaKeyPair, digest: &Digest) -> Signature {
    let em = os2ip(&encode_signature_block(digest));
    // The encoded block has a zero top byte, so it is always below a
    // 1024-bit modulus.
    let s = key.apply_private(&em).expect("encoded block is below the modulus");
    Signature(i2osp(&s, MODULUS_BYTES).expect("result is below the modulus").try_into().unwrap())
}

/// The exponentiation half of verification. Never errors: anything
/// malformed is simply not a valid signature.
pub fn verify_digest(key: &RsaPublicKey, digest: &Digest, signature: &[u8]) -> bool {
    if signature.len() != MODULUS_BYTES {
        return false;
    }
    let s = os2ip(signature);
    let Ok(m) = key.apply_public(&s) else {
        return false;
    };
    match i2osp(&m, MODULUS_BYTES) {
        Ok(em) => em[..] == encode_signature_block(digest)[..],
        Err(_) => false,
    }
}

pub fn pss_sign(key: &RsaKeyPair, message: &[u8]) -> Signature {
    sign_digest(key, &sha1(message))
}

pub fn pss_verify(key: &RsaPublicKey, message: &[u8], signature: &[u8]) -> bool {
    verify_digest(key, &sha1(message), signature)
}
