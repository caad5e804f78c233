//! ROAP messages in a line-oriented canonical text form.
//!
//! Capability negotiation always lands on the mandated algorithm suite;
//! the hello messages exist so that sizes and hashes are accounted for.

use super::cert::{Certificate, OcspResponse};
use crate::codec::{b64, validate_id, Fields, FormatError};
use crate::crypto::{pss_sign, pss_verify, RsaKeyPair, RsaPublicKey, Signature};
use crate::objects::RightsObject;
use std::fmt;

pub const PROTOCOL_VERSION: &str = "2.0";

/// The suite every conforming agent and issuer supports.
pub const MANDATED_ALGORITHMS: [&str; 6] =
    ["AES-128-CBC", "AES-128-WRAP", "HMAC-SHA1", "KDF2-SHA1", "RSA-1024", "SHA-1"];

pub const NONCE_LEN: usize = 16;

/// Target body sizes in bytes. Bodies shorter than the target are padded
/// with a `pad` field; longer bodies are left alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MessageSizes {
    pub hello: usize,
    pub registration_request: usize,
    pub registration_response: usize,
    pub ro_request: usize,
    /// Added to the length of the embedded rights object.
    pub ro_response_base: usize,
}

impl Default for MessageSizes {
    fn default() -> Self {
        Self {
            hello: 512,
            registration_request: 1024,
            registration_response: 4096,
            ro_request: 1024,
            ro_response_base: 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MessageKind {
    DeviceHello,
    RiHello,
    RegistrationRequest,
    RegistrationResponse,
    RoRequest,
    RoResponse,
}

impl MessageKind {
    const ALL: [MessageKind; 6] = [
        MessageKind::DeviceHello,
        MessageKind::RiHello,
        MessageKind::RegistrationRequest,
        MessageKind::RegistrationResponse,
        MessageKind::RoRequest,
        MessageKind::RoResponse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::DeviceHello => "DeviceHello",
            MessageKind::RiHello => "RiHello",
            MessageKind::RegistrationRequest => "RegistrationRequest",
            MessageKind::RegistrationResponse => "RegistrationResponse",
            MessageKind::RoRequest => "RoRequest",
            MessageKind::RoResponse => "RoResponse",
        }
    }

    pub fn is_signed(self) -> bool {
        !matches!(self, MessageKind::DeviceHello | MessageKind::RiHello)
    }

    fn payload_fields(self) -> &'static [&'static str] {
        match self {
            MessageKind::DeviceHello => &["algorithms", "versions"],
            MessageKind::RiHello => &["algorithms", "session_id"],
            MessageKind::RegistrationRequest => &["certificate", "nonce", "session_id"],
            MessageKind::RegistrationResponse => &["certificate", "ocsp", "session_id"],
            MessageKind::RoRequest => &["nonce", "ri_id", "ro_id"],
            MessageKind::RoResponse => &["nonce", "rights", "ro_id"],
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    DeviceHello { versions: Vec<String>, algorithms: Vec<String> },
    RiHello { session_id: String, algorithms: Vec<String> },
    RegistrationRequest { session_id: String, nonce: [u8; NONCE_LEN], certificate: Certificate },
    RegistrationResponse { session_id: String, certificate: Certificate, ocsp: OcspResponse },
    RoRequest { ri_id: String, ro_id: String, nonce: [u8; NONCE_LEN] },
    RoResponse { ro_id: String, nonce: [u8; NONCE_LEN], rights: RightsObject },
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::DeviceHello { .. } => MessageKind::DeviceHello,
            Payload::RiHello { .. } => MessageKind::RiHello,
            Payload::RegistrationRequest { .. } => MessageKind::RegistrationRequest,
            Payload::RegistrationResponse { .. } => MessageKind::RegistrationResponse,
            Payload::RoRequest { .. } => MessageKind::RoRequest,
            Payload::RoResponse { .. } => MessageKind::RoResponse,
        }
    }

    fn write(&self, f: &mut Fields) {
        match self {
            Payload::DeviceHello { versions, algorithms } => {
                f.set("versions", versions.join(",")).set("algorithms", algorithms.join(","));
            }
            Payload::RiHello { session_id, algorithms } => {
                f.set("session_id", session_id).set("algorithms", algorithms.join(","));
            }
            Payload::RegistrationRequest { session_id, nonce, certificate } => {
                f.set("session_id", session_id)
                    .set_bytes("nonce", nonce)
                    .set("certificate", b64(certificate.to_text().as_bytes()));
            }
            Payload::RegistrationResponse { session_id, certificate, ocsp } => {
                f.set("session_id", session_id)
                    .set("certificate", b64(certificate.to_text().as_bytes()))
                    .set("ocsp", b64(ocsp.to_text().as_bytes()));
            }
            Payload::RoRequest { ri_id, ro_id, nonce } => {
                f.set("ri_id", ri_id).set("ro_id", ro_id).set_bytes("nonce", nonce);
            }
            Payload::RoResponse { ro_id, nonce, rights } => {
                f.set("ro_id", ro_id).set_bytes("nonce", nonce).set("rights", b64(rights.to_text().as_bytes()));
            }
        }
    }

    fn read(kind: MessageKind, f: &Fields) -> Result<Self, FormatError> {
        let list = |key: &str| -> Result<Vec<String>, FormatError> {
            Ok(f.require(key)?.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect())
        };
        let id = |key: &str| -> Result<String, FormatError> {
            let v = f.require(key)?;
            validate_id(key, v)?;
            Ok(v.to_string())
        };
        let embedded = |key: &str| -> Result<String, FormatError> {
            String::from_utf8(f.require_bytes(key)?).map_err(|_| FormatError::InvalidValue {
                field: key.to_string(),
                reason: "embedded object is not UTF-8".into(),
            })
        };
        Ok(match kind {
            MessageKind::DeviceHello => {
                Payload::DeviceHello { versions: list("versions")?, algorithms: list("algorithms")? }
            }
            MessageKind::RiHello => Payload::RiHello { session_id: id("session_id")?, algorithms: list("algorithms")? },
            MessageKind::RegistrationRequest => Payload::RegistrationRequest {
                session_id: id("session_id")?,
                nonce: f.require_array("nonce")?,
                certificate: Certificate::from_text(&embedded("certificate")?)?,
            },
            MessageKind::RegistrationResponse => Payload::RegistrationResponse {
                session_id: id("session_id")?,
                certificate: Certificate::from_text(&embedded("certificate")?)?,
                ocsp: OcspResponse::from_text(&embedded("ocsp")?)?,
            },
            MessageKind::RoRequest => {
                Payload::RoRequest { ri_id: id("ri_id")?, ro_id: id("ro_id")?, nonce: f.require_array("nonce")? }
            }
            MessageKind::RoResponse => Payload::RoResponse {
                ro_id: id("ro_id")?,
                nonce: f.require_array("nonce")?,
                rights: RightsObject::from_text(&embedded("rights")?)?,
            },
        })
    }

    fn target_len(&self, sizes: &MessageSizes) -> usize {
        match self {
            Payload::DeviceHello { .. } | Payload::RiHello { .. } => sizes.hello,
            Payload::RegistrationRequest { .. } => sizes.registration_request,
            Payload::RegistrationResponse { .. } => sizes.registration_response,
            Payload::RoRequest { .. } => sizes.ro_request,
            Payload::RoResponse { rights, .. } => sizes.ro_response_base + b64(rights.to_text().as_bytes()).len(),
        }
    }
}

const ALL_FIELDS: [&str; 13] = [
    "algorithms",
    "certificate",
    "kind",
    "nonce",
    "ocsp",
    "pad",
    "ri_id",
    "ro_id",
    "rights",
    "sender",
    "session_id",
    "signature",
    "versions",
];

/// `pad=` plus its newline.
const PAD_OVERHEAD: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoapMessage {
    pub sender: String,
    pub payload: Payload,
    pub pad_len: usize,
    pub signature: Option<Signature>,
}

impl RoapMessage {
    /// Unsigned message padded to the configured size for its kind.
    pub fn new(sender: &str, payload: Payload, sizes: &MessageSizes) -> Self {
        let target = payload.target_len(sizes);
        let mut msg = Self { sender: sender.to_string(), payload, pad_len: 0, signature: None };
        let unpadded = msg.body_fields(false).render().len();
        if target >= unpadded + PAD_OVERHEAD {
            msg.pad_len = target - unpadded - PAD_OVERHEAD;
        }
        msg
    }

    pub fn kind(&self) -> MessageKind {
        self.payload.kind()
    }

    fn body_fields(&self, with_pad: bool) -> Fields {
        let mut f = Fields::new();
        f.set("kind", self.kind().name()).set("sender", &self.sender);
        self.payload.write(&mut f);
        if with_pad && self.pad_len > 0 {
            f.set("pad", "0".repeat(self.pad_len));
        }
        f
    }

    /// Hashed and signed bytes: everything but the signature.
    pub fn body(&self) -> String {
        self.body_fields(true).render()
    }

    pub fn sign(&mut self, key: &RsaKeyPair) {
        self.signature = Some(pss_sign(key, self.body().as_bytes()));
    }

    /// Unmetered check, for the issuer side.
    pub fn verify(&self, key: &RsaPublicKey) -> bool {
        self.signature.as_ref().is_some_and(|s| pss_verify(key, self.body().as_bytes(), s.as_bytes()))
    }

    pub fn to_text(&self) -> String {
        let mut f = self.body_fields(true);
        if let Some(sig) = &self.signature {
            f.set_bytes("signature", sig.as_bytes());
        }
        f.render()
    }

    pub fn from_text(text: &str) -> Result<Self, FormatError> {
        let f = Fields::parse(text, &ALL_FIELDS)?;
        let kind_name = f.require("kind")?;
        let kind = MessageKind::ALL
            .into_iter()
            .find(|k| k.name() == kind_name)
            .ok_or_else(|| FormatError::InvalidValue { field: "kind".into(), reason: format!("`{kind_name}`") })?;
        let expected = kind.payload_fields();
        if let Some(stray) =
            f.keys().find(|k| !expected.contains(k) && !matches!(*k, "kind" | "sender" | "pad" | "signature"))
        {
            return Err(FormatError::UnknownField { field: stray.to_string(), line: f.line(stray) });
        }
        let sender = f.require("sender")?.to_string();
        validate_id("sender", &sender)?;
        let pad_len = match f.get("pad") {
            None => 0,
            Some(p) if p.bytes().all(|b| b == b'0') && !p.is_empty() => p.len(),
            Some(_) => {
                return Err(FormatError::InvalidValue { field: "pad".into(), reason: "padding must be zeros".into() })
            }
        };
        let signature = f
            .optional_bytes("signature")?
            .map(|b| Signature::from_bytes(&b))
            .transpose()
            .map_err(|e| FormatError::InvalidValue { field: "signature".into(), reason: e.to_string() })?;
        Ok(Self { sender, payload: Payload::read(kind, &f)?, pad_len, signature })
    }
}
