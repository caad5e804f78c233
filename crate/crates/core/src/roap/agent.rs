//! The DRM agent: device keys, RI contexts and installed rights.

use super::cert::{get_public_key, set_public_key, CertStatus, Certificate, Timestamp};
use super::message::{
    MessageKind, MessageSizes, Payload, RoapMessage, MANDATED_ALGORITHMS, NONCE_LEN, PROTOCOL_VERSION,
};
use super::meter::Meter;
use super::store::AgentStore;
use super::ProtocolError;
use crate::codec::{validate_id, Fields, FormatError};
use crate::crypto::{i2osp, os2ip, RsaKeyPair, RsaPublicKey, SymmetricKey, KEY_LEN, MODULUS_BYTES};
use crate::objects::{Dcf, InstalledRo, RightsObject};
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;
use zeroize::Zeroizing;

/// Metered size of the c2 and c2dev unwraps: the two 128-bit keys.
const C2_PAYLOAD_BITS: u64 = 256;
/// Metered size of the K_CEK unwrap: the full 192-bit wrapped value.
const KCEK_WRAP_BITS: u64 = 192;

/// What an agent keeps about a rights issuer after registration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiContext {
    pub ri_id: String,
    pub ri_public_key: RsaPublicKey,
    pub cert_not_after: Timestamp,
    pub established_at: Timestamp,
}

const CONTEXT_FIELDS: [&str; 5] = ["cert_not_after", "established_at", "ri_id", "ri_public_key_e", "ri_public_key_n"];

impl RiContext {
    pub fn is_valid_at(&self, now: Timestamp) -> bool {
        now <= self.cert_not_after
    }

    pub fn to_text(&self) -> String {
        let mut f = Fields::new();
        f.set("cert_not_after", self.cert_not_after.to_string())
            .set("established_at", self.established_at.to_string())
            .set("ri_id", &self.ri_id);
        set_public_key(&mut f, "ri_public_key", &self.ri_public_key);
        f.render()
    }

    pub fn from_text(text: &str) -> Result<Self, FormatError> {
        let f = Fields::parse(text, &CONTEXT_FIELDS)?;
        let ri_id = f.require("ri_id")?.to_string();
        validate_id("ri_id", &ri_id)?;
        Ok(Self {
            ri_id,
            ri_public_key: get_public_key(&f, "ri_public_key")?,
            cert_not_after: f.require_parsed("cert_not_after")?,
            established_at: f.require_parsed("established_at")?,
        })
    }
}

#[derive(Debug, Clone)]
struct PendingRegistration {
    session_id: String,
    ri_id: String,
}

#[derive(Debug, Clone)]
struct PendingAcquisition {
    ri_id: String,
    nonce: [u8; NONCE_LEN],
}

fn expect_kind(msg: &RoapMessage, expected: MessageKind) -> Result<(), ProtocolError> {
    if msg.kind() == expected {
        Ok(())
    } else {
        Err(ProtocolError::UnexpectedMessage { expected, found: msg.kind() })
    }
}

/// Splits `K_MAC || K_REK`.
fn split_keys(keys: &[u8]) -> Result<(SymmetricKey, SymmetricKey), ProtocolError> {
    if keys.len() != 2 * KEY_LEN {
        return Err(ProtocolError::UnwrapIntegrity);
    }
    Ok((SymmetricKey::from_bytes(&keys[..KEY_LEN])?, SymmetricKey::from_bytes(&keys[KEY_LEN..])?))
}

pub struct DrmAgent {
    id: String,
    keys: RsaKeyPair,
    certificate: Certificate,
    k_dev: SymmetricKey,
    ca_root: RsaPublicKey,
    rng: ChaCha20Rng,
    sizes: MessageSizes,
    ri_contexts: BTreeMap<String, RiContext>,
    installed: BTreeMap<String, InstalledRo>,
    pending_registration: Option<PendingRegistration>,
    pending_ro: BTreeMap<String, PendingAcquisition>,
    store: Option<AgentStore>,
}

impl std::fmt::Debug for DrmAgent {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DrmAgent")
            .field("id", &self.id)
            .field("ri_contexts", &self.ri_contexts.keys().collect::<Vec<_>>())
            .field("installed", &self.installed.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

impl DrmAgent {
    /// K_DEV is drawn from `rng` here and never leaves the agent.
    pub fn new<R: RngCore + CryptoRng>(
        rng: &mut R,
        keys: RsaKeyPair,
        certificate: Certificate,
        ca_root: RsaPublicKey,
    ) -> Result<Self, ProtocolError> {
        if certificate.subject_key != *keys.public() {
            return Err(ProtocolError::CertificateKeyMismatch(certificate.subject_id));
        }
        let k_dev = SymmetricKey::generate(rng);
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Ok(Self {
            id: certificate.subject_id.clone(),
            keys,
            certificate,
            k_dev,
            ca_root,
            rng: ChaCha20Rng::from_seed(seed),
            sizes: MessageSizes::default(),
            ri_contexts: BTreeMap::new(),
            installed: BTreeMap::new(),
            pending_registration: None,
            pending_ro: BTreeMap::new(),
            store: None,
        })
    }

    /// Persists all current and future state under `store`.
    pub fn attach_store(&mut self, store: AgentStore) -> Result<(), ProtocolError> {
        for ctx in self.ri_contexts.values() {
            store.save_context(ctx)?;
        }
        for ro in self.installed.values() {
            store.save_installed(ro)?;
        }
        self.store = Some(store);
        Ok(())
    }

    pub fn set_message_sizes(&mut self, sizes: MessageSizes) {
        self.sizes = sizes;
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn certificate(&self) -> &Certificate {
        &self.certificate
    }

    pub fn ri_context(&self, ri_id: &str) -> Option<&RiContext> {
        self.ri_contexts.get(ri_id)
    }

    pub fn installed(&self) -> impl Iterator<Item = &InstalledRo> {
        self.installed.values()
    }

    pub fn installed_ro(&self, ro_id: &str) -> Option<&InstalledRo> {
        self.installed.get(ro_id)
    }

    fn nonce(&mut self) -> [u8; NONCE_LEN] {
        let mut n = [0u8; NONCE_LEN];
        self.rng.fill_bytes(&mut n);
        n
    }

    fn sign(&self, mut msg: RoapMessage, meter: &mut Meter<'_>) -> RoapMessage {
        msg.signature = Some(meter.sign(&self.keys, msg.body().as_bytes()));
        msg
    }

    /// Pass 1: advertise version and algorithms.
    pub fn device_hello(&self) -> RoapMessage {
        let payload = Payload::DeviceHello {
            versions: vec![PROTOCOL_VERSION.to_string()],
            algorithms: MANDATED_ALGORITHMS.iter().map(|s| s.to_string()).collect(),
        };
        RoapMessage::new(&self.id, payload, &self.sizes)
    }

    /// Pass 3: signed request carrying the device certificate.
    pub fn registration_request(
        &mut self,
        ri_hello: &RoapMessage,
        meter: &mut Meter<'_>,
    ) -> Result<RoapMessage, ProtocolError> {
        expect_kind(ri_hello, MessageKind::RiHello)?;
        let Payload::RiHello { session_id, algorithms } = &ri_hello.payload else { unreachable!() };
        if let Some(a) = algorithms.iter().find(|a| !MANDATED_ALGORITHMS.contains(&a.as_str())) {
            return Err(ProtocolError::UnsupportedAlgorithm(a.clone()));
        }
        self.pending_registration =
            Some(PendingRegistration { session_id: session_id.clone(), ri_id: ri_hello.sender.clone() });
        let payload = Payload::RegistrationRequest {
            session_id: session_id.clone(),
            nonce: self.nonce(),
            certificate: self.certificate.clone(),
        };
        let msg = RoapMessage::new(&self.id, payload, &self.sizes);
        Ok(self.sign(msg, meter))
    }

    /// Pass 4: checks the RI certificate, the response signature and the
    /// OCSP response, then records the RI context. Nothing is stored on
    /// any failure.
    pub fn process_registration_response(
        &mut self,
        msg: &RoapMessage,
        now: Timestamp,
        meter: &mut Meter<'_>,
    ) -> Result<RiContext, ProtocolError> {
        expect_kind(msg, MessageKind::RegistrationResponse)?;
        let Payload::RegistrationResponse { session_id, certificate, ocsp } = &msg.payload else { unreachable!() };
        let pending = self.pending_registration.as_ref().ok_or(ProtocolError::SessionMismatch)?;
        if pending.session_id != *session_id || pending.ri_id != msg.sender {
            return Err(ProtocolError::SessionMismatch);
        }
        if certificate.subject_id != msg.sender {
            return Err(ProtocolError::IdentityMismatch {
                expected: msg.sender.clone(),
                found: certificate.subject_id.clone(),
            });
        }

        if !meter.verify(&self.ca_root, certificate.canonical_body().as_bytes(), certificate.signature.as_bytes()) {
            return Err(ProtocolError::BadSignature { what: "RI certificate" });
        }
        let signature = msg.signature.as_ref().map_or(&[][..], |s| &s.as_bytes()[..]);
        if !meter.verify(&certificate.subject_key, msg.body().as_bytes(), signature) {
            return Err(ProtocolError::BadSignature { what: "RegistrationResponse" });
        }
        if !meter.verify(&self.ca_root, ocsp.canonical_body().as_bytes(), ocsp.signature.as_bytes()) {
            return Err(ProtocolError::BadSignature { what: "OCSP response" });
        }
        if ocsp.cert_subject_id != certificate.subject_id {
            return Err(ProtocolError::IdentityMismatch {
                expected: certificate.subject_id.clone(),
                found: ocsp.cert_subject_id.clone(),
            });
        }
        if !certificate.is_valid_at(now) {
            return Err(ProtocolError::ExpiredCertificate { subject: certificate.subject_id.clone() });
        }
        if ocsp.status == CertStatus::Revoked {
            return Err(ProtocolError::RevokedCertificate { subject: certificate.subject_id.clone() });
        }

        let ctx = RiContext {
            ri_id: certificate.subject_id.clone(),
            ri_public_key: certificate.subject_key.clone(),
            cert_not_after: certificate.not_after,
            established_at: now,
        };
        if let Some(store) = &self.store {
            store.save_context(&ctx)?;
        }
        self.pending_registration = None;
        self.ri_contexts.insert(ctx.ri_id.clone(), ctx.clone());
        Ok(ctx)
    }

    fn valid_context(&self, ri_id: &str, now: Timestamp) -> Result<&RiContext, ProtocolError> {
        let ctx = self.ri_contexts.get(ri_id).ok_or_else(|| ProtocolError::NoRiContext(ri_id.to_string()))?;
        if !ctx.is_valid_at(now) {
            return Err(ProtocolError::ContextExpired(ri_id.to_string()));
        }
        Ok(ctx)
    }

    /// Signed request for one rights object. Trusts the cached context;
    /// the RI certificate is not re-checked.
    pub fn ro_request(
        &mut self,
        ri_id: &str,
        ro_id: &str,
        now: Timestamp,
        meter: &mut Meter<'_>,
    ) -> Result<RoapMessage, ProtocolError> {
        self.valid_context(ri_id, now)?;
        validate_id("ro_id", ro_id)?;
        let nonce = self.nonce();
        self.pending_ro.insert(ro_id.to_string(), PendingAcquisition { ri_id: ri_id.to_string(), nonce });
        let payload = Payload::RoRequest { ri_id: ri_id.to_string(), ro_id: ro_id.to_string(), nonce };
        let msg = RoapMessage::new(&self.id, payload, &self.sizes);
        Ok(self.sign(msg, meter))
    }

    pub fn process_ro_response(
        &mut self,
        msg: &RoapMessage,
        meter: &mut Meter<'_>,
    ) -> Result<RightsObject, ProtocolError> {
        expect_kind(msg, MessageKind::RoResponse)?;
        let Payload::RoResponse { ro_id, nonce, rights } = &msg.payload else { unreachable!() };
        let pending = self.pending_ro.get(ro_id).ok_or(ProtocolError::UnexpectedResponse)?;
        if pending.ri_id != msg.sender || pending.nonce != *nonce {
            return Err(ProtocolError::UnexpectedResponse);
        }
        let key = &self
            .ri_contexts
            .get(&msg.sender)
            .ok_or_else(|| ProtocolError::NoRiContext(msg.sender.clone()))?
            .ri_public_key;
        let signature = msg.signature.as_ref().map_or(&[][..], |s| &s.as_bytes()[..]);
        if !meter.verify(key, msg.body().as_bytes(), signature) {
            return Err(ProtocolError::BadSignature { what: "RoResponse" });
        }
        if rights.ro_id != *ro_id || rights.ri_id != msg.sender {
            return Err(ProtocolError::UnexpectedResponse);
        }
        self.pending_ro.remove(ro_id);
        Ok(rights.clone())
    }

    /// Moves a rights object from the public-key layer to K_DEV.
    pub fn install(
        &mut self,
        ro: &RightsObject,
        dcf: &Dcf,
        meter: &mut Meter<'_>,
    ) -> Result<InstalledRo, ProtocolError> {
        if ro.content_id != dcf.content_id {
            return Err(ProtocolError::ContentMismatch);
        }
        if self.installed.contains_key(&ro.ro_id) {
            return Err(ProtocolError::AlreadyInstalled(ro.ro_id.clone()));
        }
        let ri_key = match &ro.signature {
            Some(_) => Some(
                self.ri_contexts
                    .get(&ro.ri_id)
                    .ok_or_else(|| ProtocolError::NoRiContext(ro.ri_id.clone()))?
                    .ri_public_key
                    .clone(),
            ),
            None => None,
        };

        // A c1 addressed to another device may exceed this modulus; both
        // that and a wrong Z surface as an unwrap failure.
        let z = meter.rsa_private(&self.keys, &os2ip(&ro.c1)).map_err(|_| ProtocolError::UnwrapIntegrity)?;
        let z_bytes = Zeroizing::new(i2osp(&z, MODULUS_BYTES)?);
        let kek = SymmetricKey::from_bytes(&meter.kdf2(&z_bytes, KEY_LEN))?;
        let keys = meter.unwrap(&kek, &ro.c2, C2_PAYLOAD_BITS).map_err(|_| ProtocolError::UnwrapIntegrity)?;
        let (kmac, _) = split_keys(&keys)?;

        let body = ro.canonical_body();
        if meter.hmac_sha1(&kmac, body.as_bytes()) != ro.mac {
            return Err(ProtocolError::MacMismatch);
        }
        if let (Some(sig), Some(key)) = (&ro.signature, &ri_key) {
            if !meter.verify(key, body.as_bytes(), sig.as_bytes()) {
                return Err(ProtocolError::SignatureInvalid);
            }
        }
        let c2dev = meter.wrap(&self.k_dev, &keys)?;
        let installed = InstalledRo::new(ro.clone(), c2dev.try_into().expect("32-byte wrap input yields 40 bytes"));
        if let Some(store) = &self.store {
            store.save_installed(&installed)?;
        }
        self.installed.insert(ro.ro_id.clone(), installed.clone());
        Ok(installed)
    }

    /// Picks the first installed RO (by id) for `content_id` that still
    /// allows a play.
    fn select_rights(&self, content_id: &str) -> Result<String, ProtocolError> {
        let mut candidates = self
            .installed
            .values()
            .filter(|i| i.rights.content_id == content_id && i.rights.permissions.play_allowed)
            .peekable();
        if candidates.peek().is_none() {
            return Err(ProtocolError::NoRights(content_id.to_string()));
        }
        candidates
            .find(|i| i.remaining_plays != Some(0))
            .map(|i| i.rights.ro_id.clone())
            .ok_or_else(|| ProtocolError::PlaysExhausted(content_id.to_string()))
    }

    /// One access: K_DEV unwrap, MAC check, DCF hash check, K_CEK unwrap,
    /// payload decryption. The play counter moves only on success.
    pub fn consume(&mut self, content_id: &str, dcf: &Dcf, meter: &mut Meter<'_>) -> Result<Vec<u8>, ProtocolError> {
        let ro_id = self.select_rights(content_id)?;
        if dcf.content_id != content_id {
            return Err(ProtocolError::ContentMismatch);
        }
        let installed = &self.installed[&ro_id];
        let ro = &installed.rights;

        let keys =
            meter.unwrap(&self.k_dev, &installed.c2dev, C2_PAYLOAD_BITS).map_err(|_| ProtocolError::UnwrapIntegrity)?;
        let (kmac, krek) = split_keys(&keys)?;
        if meter.hmac_sha1(&kmac, ro.canonical_body().as_bytes()) != ro.mac {
            return Err(ProtocolError::MacMismatch);
        }
        if meter.sha1(&dcf.to_bytes()) != ro.dcf_hash {
            return Err(ProtocolError::DcfHashMismatch);
        }
        let kcek = meter.unwrap(&krek, &ro.wrapped_kcek, KCEK_WRAP_BITS).map_err(|_| ProtocolError::UnwrapIntegrity)?;
        let kcek = SymmetricKey::from_bytes(&kcek)?;
        let plaintext =
            meter.cbc_decrypt(&kcek, &dcf.iv, &dcf.encrypted_payload).map_err(|_| ProtocolError::Decryption)?;
        if plaintext.len() as u64 != dcf.plaintext_len {
            return Err(ProtocolError::Decryption);
        }

        let installed = self.installed.get_mut(&ro_id).expect("selected above");
        if let Some(n) = installed.remaining_plays.as_mut() {
            *n -= 1;
        }
        if let Some(store) = &self.store {
            store.save_installed(installed)?;
        }
        Ok(plaintext)
    }

    #[cfg(test)]
    pub(crate) fn k_dev(&self) -> &SymmetricKey {
        &self.k_dev
    }
}
