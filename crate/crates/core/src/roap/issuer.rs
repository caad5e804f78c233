//! The rights issuer. Its own computation is not metered.

use super::cert::{verify_ocsp, CertStatus, Certificate, CertificationAuthority, Timestamp};
use super::message::{MessageKind, MessageSizes, Payload, RoapMessage, MANDATED_ALGORITHMS, PROTOCOL_VERSION};
use super::ProtocolError;
use crate::codec::validate_id;
use crate::crypto::{pss_verify, RsaKeyPair, RsaPublicKey, SymmetricKey};
use crate::objects::{issue_rights_object, Dcf, Permissions, RightsObject, RoTerms};
use rand::{CryptoRng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;

/// One sellable rights object.
#[derive(Debug, Clone)]
pub struct CatalogEntry {
    pub dcf: Dcf,
    pub kcek: SymmetricKey,
    pub permissions: Permissions,
    /// Attach an issuer signature to the RO itself.
    pub sign: bool,
}

pub struct RightsIssuer {
    id: String,
    keys: RsaKeyPair,
    certificate: Certificate,
    ca_root: RsaPublicKey,
    rng: ChaCha20Rng,
    sizes: MessageSizes,
    catalog: BTreeMap<String, CatalogEntry>,
    registered_agents: BTreeMap<String, RsaPublicKey>,
    sessions: BTreeMap<String, String>,
}

impl std::fmt::Debug for RightsIssuer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RightsIssuer")
            .field("id", &self.id)
            .field("catalog", &self.catalog.keys().collect::<Vec<_>>())
            .field("registered_agents", &self.registered_agents.keys().collect::<Vec<_>>())
            .finish_non_exhaustive()
    }
}

fn expect_kind(msg: &RoapMessage, expected: MessageKind) -> Result<(), ProtocolError> {
    if msg.kind() == expected {
        Ok(())
    } else {
        Err(ProtocolError::UnexpectedMessage { expected, found: msg.kind() })
    }
}

impl RightsIssuer {
    pub fn new<R: RngCore + CryptoRng>(
        rng: &mut R,
        keys: RsaKeyPair,
        certificate: Certificate,
        ca_root: RsaPublicKey,
    ) -> Result<Self, ProtocolError> {
        if certificate.subject_key != *keys.public() {
            return Err(ProtocolError::CertificateKeyMismatch(certificate.subject_id));
        }
        let mut seed = [0u8; 32];
        rng.fill_bytes(&mut seed);
        Ok(Self {
            id: certificate.subject_id.clone(),
            keys,
            certificate,
            ca_root,
            rng: ChaCha20Rng::from_seed(seed),
            sizes: MessageSizes::default(),
            catalog: BTreeMap::new(),
            registered_agents: BTreeMap::new(),
            sessions: BTreeMap::new(),
        })
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

    pub fn offer(&mut self, ro_id: &str, entry: CatalogEntry) -> Result<(), ProtocolError> {
        validate_id("ro_id", ro_id)?;
        self.catalog.insert(ro_id.to_string(), entry);
        Ok(())
    }

    pub fn catalog_entry(&self, ro_id: &str) -> Option<&CatalogEntry> {
        self.catalog.get(ro_id)
    }

    pub fn is_registered(&self, agent_id: &str) -> bool {
        self.registered_agents.contains_key(agent_id)
    }

    fn signed(&self, payload: Payload) -> RoapMessage {
        let mut msg = RoapMessage::new(&self.id, payload, &self.sizes);
        msg.sign(&self.keys);
        msg
    }

    /// Pass 2: open a session and select the mandated suite.
    pub fn handle_device_hello(&mut self, msg: &RoapMessage) -> Result<RoapMessage, ProtocolError> {
        expect_kind(msg, MessageKind::DeviceHello)?;
        let Payload::DeviceHello { versions, algorithms } = &msg.payload else { unreachable!() };
        if !versions.iter().any(|v| v == PROTOCOL_VERSION) {
            return Err(ProtocolError::UnsupportedVersion(versions.join(",")));
        }
        if let Some(missing) = MANDATED_ALGORITHMS.iter().find(|a| !algorithms.iter().any(|b| b == *a)) {
            return Err(ProtocolError::UnsupportedAlgorithm(missing.to_string()));
        }
        let mut raw = [0u8; 8];
        self.rng.fill_bytes(&mut raw);
        let session_id = format!("s-{}", hex::encode(raw));
        self.sessions.insert(session_id.clone(), msg.sender.clone());
        let payload =
            Payload::RiHello { session_id, algorithms: MANDATED_ALGORITHMS.iter().map(|s| s.to_string()).collect() };
        Ok(RoapMessage::new(&self.id, payload, &self.sizes))
    }

    /// Checks the agent (certificate, status, request signature), registers
    /// it, and answers with the RI certificate and a fresh OCSP response.
    pub fn handle_registration_request(
        &mut self,
        msg: &RoapMessage,
        ca: &CertificationAuthority,
        now: Timestamp,
    ) -> Result<RoapMessage, ProtocolError> {
        expect_kind(msg, MessageKind::RegistrationRequest)?;
        let Payload::RegistrationRequest { session_id, certificate, .. } = &msg.payload else { unreachable!() };
        if self.sessions.get(session_id) != Some(&msg.sender) {
            return Err(ProtocolError::SessionMismatch);
        }
        if certificate.subject_id != msg.sender {
            return Err(ProtocolError::IdentityMismatch {
                expected: msg.sender.clone(),
                found: certificate.subject_id.clone(),
            });
        }
        if !pss_verify(&self.ca_root, certificate.canonical_body().as_bytes(), certificate.signature.as_bytes()) {
            return Err(ProtocolError::BadSignature { what: "agent certificate" });
        }
        if !certificate.is_valid_at(now) {
            return Err(ProtocolError::ExpiredCertificate { subject: certificate.subject_id.clone() });
        }
        let status = ca.ocsp(&msg.sender, now);
        if !verify_ocsp(&status, &self.ca_root) {
            return Err(ProtocolError::BadSignature { what: "OCSP response" });
        }
        if status.status == CertStatus::Revoked {
            return Err(ProtocolError::RevokedCertificate { subject: msg.sender.clone() });
        }
        if !msg.verify(&certificate.subject_key) {
            return Err(ProtocolError::BadSignature { what: "RegistrationRequest" });
        }

        self.sessions.remove(session_id);
        self.registered_agents.insert(msg.sender.clone(), certificate.subject_key.clone());
        Ok(self.signed(Payload::RegistrationResponse {
            session_id: session_id.clone(),
            certificate: self.certificate.clone(),
            ocsp: ca.ocsp(&self.id, now),
        }))
    }

    /// Issues a fresh rights object for a registered agent.
    pub fn handle_ro_request(&mut self, msg: &RoapMessage) -> Result<RoapMessage, ProtocolError> {
        expect_kind(msg, MessageKind::RoRequest)?;
        let Payload::RoRequest { ri_id, ro_id, nonce } = &msg.payload else { unreachable!() };
        let agent_key = self
            .registered_agents
            .get(&msg.sender)
            .ok_or_else(|| ProtocolError::AgentNotRegistered(msg.sender.clone()))?;
        if !msg.verify(agent_key) {
            return Err(ProtocolError::BadSignature { what: "RoRequest" });
        }
        if *ri_id != self.id {
            return Err(ProtocolError::IdentityMismatch { expected: self.id.clone(), found: ri_id.clone() });
        }
        let entry = self.catalog.get(ro_id).ok_or_else(|| ProtocolError::UnknownRoId(ro_id.clone()))?;
        let terms = RoTerms { ro_id: ro_id.clone(), permissions: entry.permissions, sign: entry.sign };
        let rights: RightsObject =
            issue_rights_object(&mut self.rng, &self.id, &self.keys, agent_key, &entry.dcf, &entry.kcek, &terms)?;
        Ok(self.signed(Payload::RoResponse { ro_id: ro_id.clone(), nonce: *nonce, rights }))
    }
}
