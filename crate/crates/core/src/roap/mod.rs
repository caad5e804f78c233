//! Rights object acquisition: actors, messages and the four lifecycle
//! phases. Every agent-side primitive goes through [`Meter`].

mod agent;
mod cert;
mod issuer;
mod message;
mod meter;
mod store;

pub use agent::{DrmAgent, RiContext};
pub use cert::{
    verify_certificate, verify_ocsp, CaFixture, CertStatus, Certificate, CertificationAuthority, OcspResponse,
    SubjectEntry, Timestamp,
};
pub use issuer::{CatalogEntry, RightsIssuer};
pub use message::{MessageKind, MessageSizes, Payload, RoapMessage, MANDATED_ALGORITHMS, NONCE_LEN, PROTOCOL_VERSION};
pub use meter::Meter;
pub use store::AgentStore;

use crate::codec::FormatError;
use crate::cost::{OpTrace, Phase};
use crate::crypto::CryptoError;
use crate::objects::{Dcf, InstalledRo, ObjectError, RightsObject};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("certificate of `{subject}` has expired")]
    ExpiredCertificate { subject: String },
    #[error("certificate of `{subject}` is revoked")]
    RevokedCertificate { subject: String },
    #[error("bad signature on {what}")]
    BadSignature { what: &'static str },
    #[error("certificate for `{0}` does not match its key pair")]
    CertificateKeyMismatch(String),
    #[error("expected identity `{expected}`, found `{found}`")]
    IdentityMismatch { expected: String, found: String },
    #[error("expected {expected}, got {found}")]
    UnexpectedMessage { expected: MessageKind, found: MessageKind },
    #[error("unsupported protocol version `{0}`")]
    UnsupportedVersion(String),
    #[error("unsupported algorithm `{0}`")]
    UnsupportedAlgorithm(String),
    #[error("registration session mismatch")]
    SessionMismatch,
    #[error("response does not answer an outstanding request")]
    UnexpectedResponse,
    #[error("no RI context for `{0}`")]
    NoRiContext(String),
    #[error("RI context for `{0}` has expired")]
    ContextExpired(String),
    #[error("agent `{0}` is not registered")]
    AgentNotRegistered(String),
    #[error("unknown rights object `{0}`")]
    UnknownRoId(String),
    #[error("rights object `{0}` is already installed")]
    AlreadyInstalled(String),
    #[error("key unwrap failed integrity check")]
    UnwrapIntegrity,
    #[error("rights object MAC mismatch")]
    MacMismatch,
    #[error("rights object signature invalid")]
    SignatureInvalid,
    #[error("rights object and DCF refer to different content")]
    ContentMismatch,
    #[error("no rights to play `{0}`")]
    NoRights(String),
    #[error("play count for `{0}` exhausted")]
    PlaysExhausted(String),
    #[error("DCF hash does not match the rights object")]
    DcfHashMismatch,
    #[error("content decryption failed")]
    Decryption,
    #[error("invalid CA fixture: {0}")]
    Fixture(String),
    #[error("agent store: {0}")]
    Store(String),
    #[error(transparent)]
    Object(#[from] ObjectError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Crypto(#[from] CryptoError),
}

/// Messages cross between actors in their text form.
fn transmit(msg: &RoapMessage) -> Result<RoapMessage, ProtocolError> {
    Ok(RoapMessage::from_text(&msg.to_text())?)
}

/// The 4-pass registration. `ca` answers the status queries.
pub fn run_registration(
    agent: &mut DrmAgent,
    ri: &mut RightsIssuer,
    ca: &CertificationAuthority,
    now: Timestamp,
    trace: &mut OpTrace,
) -> Result<RiContext, ProtocolError> {
    let mut meter = Meter::new(trace, Phase::Registration);
    let hello = transmit(&agent.device_hello())?;
    let ri_hello = transmit(&ri.handle_device_hello(&hello)?)?;
    let request = transmit(&agent.registration_request(&ri_hello, &mut meter)?)?;
    let response = transmit(&ri.handle_registration_request(&request, ca, now)?)?;
    agent.process_registration_response(&response, now, &mut meter)
}

/// The 2-pass rights object request.
pub fn acquire_ro(
    agent: &mut DrmAgent,
    ri: &mut RightsIssuer,
    ro_id: &str,
    now: Timestamp,
    trace: &mut OpTrace,
) -> Result<RightsObject, ProtocolError> {
    let mut meter = Meter::new(trace, Phase::Acquisition);
    let request = transmit(&agent.ro_request(ri.id(), ro_id, now, &mut meter)?)?;
    let response = transmit(&ri.handle_ro_request(&request)?)?;
    agent.process_ro_response(&response, &mut meter)
}

pub fn install_ro(
    agent: &mut DrmAgent,
    ro: &RightsObject,
    dcf: &Dcf,
    trace: &mut OpTrace,
) -> Result<InstalledRo, ProtocolError> {
    agent.install(ro, dcf, &mut Meter::new(trace, Phase::Installation))
}

pub fn consume(
    agent: &mut DrmAgent,
    content_id: &str,
    dcf: &Dcf,
    trace: &mut OpTrace,
) -> Result<Vec<u8>, ProtocolError> {
    agent.consume(content_id, dcf, &mut Meter::new(trace, Phase::Consumption))
}
