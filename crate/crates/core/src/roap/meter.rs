//! Agent-side crypto calls that record what they cost.

use crate::cost::{AlgorithmId, OpEvent, OpTrace, Phase};
use crate::crypto::{
    aes_cbc_decrypt, hmac_sha1, kdf2, kdf2_blocks, key_unwrap, key_wrap, sha1, sign_digest, verify_digest, CryptoError,
    Digest, RsaKeyPair, RsaPublicKey, Signature, SymmetricKey, BLOCK_LEN,
};
use num_bigint::BigUint;
use zeroize::Zeroizing;

/// Records one event per primitive call into the borrowed trace, tagged
/// with the current phase.
pub struct Meter<'t> {
    trace: &'t mut OpTrace,
    phase: Phase,
}

fn bits(len: usize) -> u64 {
    // Events must be non-empty; an empty input still costs one block.
    (len as u64 * 8).max(1)
}

impl<'t> Meter<'t> {
    pub fn new(trace: &'t mut OpTrace, phase: Phase) -> Self {
        Self { trace, phase }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    fn record(&mut self, algorithm: AlgorithmId, input_bits: u64) {
        let event = OpEvent::new(self.phase, algorithm, input_bits).expect("metered sizes are positive");
        self.trace.record(event);
    }

    pub fn sha1(&mut self, data: &[u8]) -> Digest {
        self.record(AlgorithmId::Sha1, bits(data.len()));
        sha1(data)
    }

    pub fn hmac_sha1(&mut self, key: &SymmetricKey, data: &[u8]) -> Digest {
        self.record(AlgorithmId::HmacSha1, bits(data.len()));
        hmac_sha1(key.as_bytes(), data)
    }

    /// One SHA-1 event per output block over `Z || counter`.
    pub fn kdf2(&mut self, z: &[u8], out_len: usize) -> Zeroizing<Vec<u8>> {
        for _ in 0..kdf2_blocks(out_len) {
            self.record(AlgorithmId::Sha1, bits(z.len() + 4));
        }
        kdf2(z, out_len)
    }

    /// Key unwrap priced as a decryption of `metered_bits`.
    pub fn unwrap(
        &mut self,
        kek: &SymmetricKey,
        wrapped: &[u8],
        metered_bits: u64,
    ) -> Result<Zeroizing<Vec<u8>>, CryptoError> {
        self.record(AlgorithmId::AesDec, metered_bits);
        key_unwrap(kek, wrapped)
    }

    /// Key wrap priced as an encryption of the payload bits.
    pub fn wrap(&mut self, kek: &SymmetricKey, data: &[u8]) -> Result<Vec<u8>, CryptoError> {
        self.record(AlgorithmId::AesEnc, bits(data.len()));
        key_wrap(kek, data)
    }

    pub fn cbc_decrypt(
        &mut self,
        key: &SymmetricKey,
        iv: &[u8; BLOCK_LEN],
        ciphertext: &[u8],
    ) -> Result<Vec<u8>, CryptoError> {
        self.record(AlgorithmId::AesDec, bits(ciphertext.len()));
        aes_cbc_decrypt(key, iv, ciphertext)
    }

    pub fn rsa_private(&mut self, key: &RsaKeyPair, m: &BigUint) -> Result<BigUint, CryptoError> {
        self.record(AlgorithmId::RsaPriv, 1024);
        key.apply_private(m)
    }

    /// Hash then one private exponentiation.
    pub fn sign(&mut self, key: &RsaKeyPair, message: &[u8]) -> Signature {
        let digest = self.sha1(message);
        self.record(AlgorithmId::RsaPriv, 1024);
        sign_digest(key, &digest)
    }

    /// Hash then one public exponentiation.
    pub fn verify(&mut self, key: &RsaPublicKey, message: &[u8], signature: &[u8]) -> bool {
        let digest = self.sha1(message);
        self.record(AlgorithmId::RsaPub, 1024);
        verify_digest(key, &digest, signature)
    }
}
