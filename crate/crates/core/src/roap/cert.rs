//! Certificates, OCSP responses and the certification authority.

use super::ProtocolError;
use crate::codec::{validate_id, Fields, FormatError};
use crate::crypto::{pss_sign, pss_verify, RsaKeyPair, RsaPublicKey, Signature};
use num_bigint::BigUint;
use serde::Deserialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

/// Seconds since the Unix epoch. Always passed in explicitly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl FromStr for Timestamp {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.parse().map(Timestamp)
    }
}

pub(crate) fn set_public_key(f: &mut Fields, prefix: &str, key: &RsaPublicKey) {
    f.set(&format!("{prefix}_e"), key.exponent().to_str_radix(16));
    f.set(&format!("{prefix}_n"), key.modulus().to_str_radix(16));
}

pub(crate) fn get_public_key(f: &Fields, prefix: &str) -> Result<RsaPublicKey, FormatError> {
    let field = |suffix: &str| -> Result<BigUint, FormatError> {
        let key = format!("{prefix}_{suffix}");
        BigUint::parse_bytes(f.require(&key)?.as_bytes(), 16)
            .ok_or(FormatError::InvalidValue { field: key, reason: "not hexadecimal".into() })
    };
    RsaPublicKey::new(field("n")?, field("e")?)
        .map_err(|e| FormatError::InvalidValue { field: format!("{prefix}_n"), reason: e.to_string() })
}

fn signature_field(f: &Fields) -> Result<Signature, FormatError> {
    Signature::from_bytes(&f.require_bytes("signature")?)
        .map_err(|e| FormatError::InvalidValue { field: "signature".into(), reason: e.to_string() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Certificate {
    pub subject_id: String,
    pub subject_key: RsaPublicKey,
    pub issuer_id: String,
    pub not_after: Timestamp,
    pub signature: Signature,
}

const CERT_FIELDS: [&str; 6] = ["issuer_id", "not_after", "signature", "subject_id", "subject_key_e", "subject_key_n"];

impl Certificate {
    fn body_fields(&self) -> Fields {
        let mut f = Fields::new();
        f.set("issuer_id", &self.issuer_id)
            .set("not_after", self.not_after.to_string())
            .set("subject_id", &self.subject_id);
        set_public_key(&mut f, "subject_key", &self.subject_key);
        f
    }

    /// The signed part: everything but the signature.
    pub fn canonical_body(&self) -> String {
        self.body_fields().render()
    }

    pub fn is_valid_at(&self, now: Timestamp) -> bool {
        now <= self.not_after
    }

    pub fn to_text(&self) -> String {
        let mut f = self.body_fields();
        f.set_bytes("signature", self.signature.as_bytes());
        f.render()
    }

    pub fn from_text(text: &str) -> Result<Self, FormatError> {
        let f = Fields::parse(text, &CERT_FIELDS)?;
        let subject_id = f.require("subject_id")?.to_string();
        let issuer_id = f.require("issuer_id")?.to_string();
        validate_id("subject_id", &subject_id)?;
        validate_id("issuer_id", &issuer_id)?;
        Ok(Self {
            subject_id,
            subject_key: get_public_key(&f, "subject_key")?,
            issuer_id,
            not_after: f.require_parsed("not_after")?,
            signature: signature_field(&f)?,
        })
    }
}

/// Signature and validity window together.
pub fn verify_certificate(cert: &Certificate, ca_public: &RsaPublicKey, now: Timestamp) -> bool {
    cert.is_valid_at(now) && pss_verify(ca_public, cert.canonical_body().as_bytes(), cert.signature.as_bytes())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CertStatus {
    Good,
    Revoked,
}

impl fmt::Display for CertStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CertStatus::Good => "good",
            CertStatus::Revoked => "revoked",
        })
    }
}

impl FromStr for CertStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "good" => Ok(CertStatus::Good),
            "revoked" => Ok(CertStatus::Revoked),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OcspResponse {
    pub cert_subject_id: String,
    pub status: CertStatus,
    pub produced_at: Timestamp,
    pub signature: Signature,
}

const OCSP_FIELDS: [&str; 4] = ["cert_subject_id", "produced_at", "signature", "status"];

impl OcspResponse {
    fn body_fields(&self) -> Fields {
        let mut f = Fields::new();
        f.set("cert_subject_id", &self.cert_subject_id)
            .set("produced_at", self.produced_at.to_string())
            .set("status", self.status.to_string());
        f
    }

    pub fn canonical_body(&self) -> String {
        self.body_fields().render()
    }

    pub fn to_text(&self) -> String {
        let mut f = self.body_fields();
        f.set_bytes("signature", self.signature.as_bytes());
        f.render()
    }

    pub fn from_text(text: &str) -> Result<Self, FormatError> {
        let f = Fields::parse(text, &OCSP_FIELDS)?;
        let cert_subject_id = f.require("cert_subject_id")?.to_string();
        validate_id("cert_subject_id", &cert_subject_id)?;
        Ok(Self {
            cert_subject_id,
            status: f.require_parsed("status")?,
            produced_at: f.require_parsed("produced_at")?,
            signature: signature_field(&f)?,
        })
    }
}

/// Signature only. A revoked status still verifies; callers judge the
/// status separately.
pub fn verify_ocsp(resp: &OcspResponse, ca_public: &RsaPublicKey) -> bool {
    pss_verify(ca_public, resp.canonical_body().as_bytes(), resp.signature.as_bytes())
}

/// Subject list and revocation set for a [`CertificationAuthority`].
///
/// ```toml
/// ca_id = "ca"
/// default_validity = 31536000
/// revoked = ["ri-b"]
///
/// [[subject]]
/// id = "ri"
/// not_after = 1199145600
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CaFixture {
    pub ca_id: String,
    /// Lifetime in seconds for subjects without an explicit `not_after`.
    pub default_validity: u64,
    #[serde(default)]
    pub revoked: Vec<String>,
    #[serde(default, rename = "subject")]
    pub subjects: Vec<SubjectEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubjectEntry {
    pub id: String,
    pub not_after: Timestamp,
}

impl CaFixture {
    pub fn from_toml(text: &str) -> Result<Self, ProtocolError> {
        let fixture: CaFixture = toml::from_str(text).map_err(|e| ProtocolError::Fixture(e.to_string()))?;
        let ids = std::iter::once(&fixture.ca_id).chain(&fixture.revoked).chain(fixture.subjects.iter().map(|s| &s.id));
        for id in ids {
            validate_id("id", id).map_err(|e| ProtocolError::Fixture(e.to_string()))?;
        }
        let mut seen = BTreeSet::new();
        if let Some(dup) = fixture.subjects.iter().find(|s| !seen.insert(&s.id)) {
            return Err(ProtocolError::Fixture(format!("subject `{}` listed twice", dup.id)));
        }
        Ok(fixture)
    }

    /// The fixture shipped with the crate.
    pub fn builtin() -> Self {
        Self::from_toml(include_str!("../../fixtures/ca.toml")).expect("built-in CA fixture is valid")
    }
}

/// Issues certificates and answers status queries. Revocation is local
/// state; there is no transport.
#[derive(Debug, Clone)]
pub struct CertificationAuthority {
    id: String,
    keys: RsaKeyPair,
    default_validity: u64,
    windows: BTreeMap<String, Timestamp>,
    revoked: BTreeSet<String>,
}

impl CertificationAuthority {
    pub fn new(id: impl Into<String>, keys: RsaKeyPair, default_validity: u64) -> Self {
        Self { id: id.into(), keys, default_validity, windows: BTreeMap::new(), revoked: BTreeSet::new() }
    }

    pub fn from_fixture(fixture: &CaFixture, keys: RsaKeyPair) -> Self {
        let mut ca = Self::new(&fixture.ca_id, keys, fixture.default_validity);
        for s in &fixture.subjects {
            ca.windows.insert(s.id.clone(), s.not_after);
        }
        ca.revoked.extend(fixture.revoked.iter().cloned());
        ca
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn public(&self) -> &RsaPublicKey {
        self.keys.public()
    }

    /// Certifies `key` for `subject_id`. The fixture window wins over the
    /// default lifetime counted from `now`.
    pub fn certify(&self, subject_id: &str, key: &RsaPublicKey, now: Timestamp) -> Certificate {
        let not_after =
            self.windows.get(subject_id).copied().unwrap_or(Timestamp(now.0.saturating_add(self.default_validity)));
        self.certify_until(subject_id, key, not_after)
    }

    pub fn certify_until(&self, subject_id: &str, key: &RsaPublicKey, not_after: Timestamp) -> Certificate {
        let mut cert = Certificate {
            subject_id: subject_id.to_string(),
            subject_key: key.clone(),
            issuer_id: self.id.clone(),
            not_after,
            signature: Signature::from_bytes(&[0; 128]).unwrap(),
        };
        cert.signature = pss_sign(&self.keys, cert.canonical_body().as_bytes());
        cert
    }

    pub fn revoke(&mut self, subject_id: &str) {
        self.revoked.insert(subject_id.to_string());
    }

    pub fn status(&self, subject_id: &str) -> CertStatus {
        if self.revoked.contains(subject_id) {
            CertStatus::Revoked
        } else {
            CertStatus::Good
        }
    }

    pub fn ocsp(&self, subject_id: &str, now: Timestamp) -> OcspResponse {
        let mut resp = OcspResponse {
            cert_subject_id: subject_id.to_string(),
            status: self.status(subject_id),
            produced_at: now,
            signature: Signature::from_bytes(&[0; 128]).unwrap(),
        };
        resp.signature = pss_sign(&self.keys, resp.canonical_body().as_bytes());
        resp
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::builtin_key;

    const NOW: Timestamp = Timestamp(1_096_588_800);

    fn ca() -> CertificationAuthority {
        CertificationAuthority::new("ca", builtin_key("ca").clone(), 3600)
    }

    #[test]
    fn issued_certificate_verifies_until_expiry() {
        let ca = ca();
        let cert = ca.certify("ri", builtin_key("ri").public(), NOW);
        assert_eq!(cert.not_after, Timestamp(NOW.0 + 3600));
        assert!(verify_certificate(&cert, ca.public(), NOW));
        assert!(verify_certificate(&cert, ca.public(), cert.not_after));
        assert!(!verify_certificate(&cert, ca.public(), Timestamp(cert.not_after.0 + 1)));
        assert!(!verify_certificate(&cert, builtin_key("ri").public(), NOW));
    }

    #[test]
    fn any_body_change_breaks_the_signature() {
        let ca = ca();
        let cert = ca.certify("ri", builtin_key("ri").public(), NOW);
        let body = cert.canonical_body().into_bytes();
        for i in (0..body.len()).step_by(7) {
            let mut tampered = body.clone();
            tampered[i] ^= 0x01;
            assert!(!pss_verify(ca.public(), &tampered, cert.signature.as_bytes()), "byte {i}");
        }
        let mut altered = cert.clone();
        altered.subject_id = "rj".into();
        assert!(!verify_certificate(&altered, ca.public(), NOW));
        let mut altered = cert.clone();
        altered.not_after = Timestamp(cert.not_after.0 + 1);
        assert!(!verify_certificate(&altered, ca.public(), NOW));
        let mut altered = cert;
        altered.subject_key = builtin_key("agent").public().clone();
        assert!(!verify_certificate(&altered, ca.public(), NOW));
    }

    #[test]
    fn text_round_trips() {
        let ca = ca();
        let cert = ca.certify("agent", builtin_key("agent").public(), NOW);
        assert_eq!(Certificate::from_text(&cert.to_text()).unwrap(), cert);
        let resp = ca.ocsp("agent", NOW);
        assert_eq!(OcspResponse::from_text(&resp.to_text()).unwrap(), resp);
        assert!(Certificate::from_text(&cert.to_text().replace("subject_id=agent", "subject_id=../x")).is_err());
    }

    #[test]
    fn ocsp_status_is_independent_of_validity() {
        let mut ca = ca();
        ca.revoke("ri");
        let revoked = ca.ocsp("ri", NOW);
        assert_eq!(revoked.status, CertStatus::Revoked);
        assert!(verify_ocsp(&revoked, ca.public()));
        let good = ca.ocsp("agent", NOW);
        assert_eq!(good.status, CertStatus::Good);
        let mut forged = revoked.clone();
        forged.status = CertStatus::Good;
        assert!(!verify_ocsp(&forged, ca.public()));
    }

    #[test]
    fn fixture_windows_and_revocations() {
        let text =
            "ca_id = \"ca\"\ndefault_validity = 10\nrevoked = [\"x\"]\n\n[[subject]]\nid = \"old\"\nnot_after = 5\n";
        let fixture = CaFixture::from_toml(text).unwrap();
        let ca = CertificationAuthority::from_fixture(&fixture, builtin_key("ca").clone());
        assert_eq!(ca.certify("old", builtin_key("ri").public(), NOW).not_after, Timestamp(5));
        assert_eq!(ca.certify("new", builtin_key("ri").public(), NOW).not_after, Timestamp(NOW.0 + 10));
        assert_eq!(ca.status("x"), CertStatus::Revoked);
        assert!(CaFixture::from_toml("ca_id = \"ca\"\n").is_err());
        assert!(CaFixture::from_toml(&format!("{text}\n[[subject]]\nid = \"old\"\nnot_after = 6\n")).is_err());
        assert!(CaFixture::from_toml("ca_id = \"c a\"\ndefault_validity = 1\n").is_err());
    }

    #[test]
    fn builtin_fixture_loads() {
        let fixture = CaFixture::builtin();
        assert!(fixture.revoked.contains(&"ri-revoked".to_string()));
        assert!(fixture.subjects.iter().any(|s| s.id == "ri-expired" && s.not_after < NOW));
    }
}
