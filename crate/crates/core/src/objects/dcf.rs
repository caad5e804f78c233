//! The content container.
//!
//! Binary layout, all integers big-endian:
//!
//! ```text
//! "DCF2" | version:u8 | u32 len | content_id | u32 len | rights_url
//!        | u32 len | metadata ("key=value\n" lines, sorted)
//!        | iv[16] | plaintext_len:u64 | payload (to end of file)
//! ```

use super::ObjectError;
use crate::codec::{validate_id, FormatError};
use crate::crypto::{aes_cbc_encrypt, sha1, Digest, SymmetricKey, BLOCK_LEN};
use rand::{CryptoRng, RngCore};
use std::collections::BTreeMap;
use std::fmt;

pub const DCF_MAGIC: &[u8; 4] = b"DCF2";
pub const DCF_VERSION: u8 = 1;

#[derive(Clone, PartialEq, Eq)]
pub struct Dcf {
    pub content_id: String,
    pub rights_url: String,
    pub metadata: BTreeMap<String, String>,
    pub iv: [u8; BLOCK_LEN],
    pub encrypted_payload: Vec<u8>,
    pub plaintext_len: u64,
}

impl fmt::Debug for Dcf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dcf")
            .field("content_id", &self.content_id)
            .field("rights_url", &self.rights_url)
            .field("metadata", &self.metadata)
            .field("payload_len", &self.encrypted_payload.len())
            .field("plaintext_len", &self.plaintext_len)
            .finish()
    }
}

fn metadata_text(metadata: &BTreeMap<String, String>) -> String {
    metadata.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
}

fn check_metadata(metadata: &BTreeMap<String, String>) -> Result<(), ObjectError> {
    for (k, v) in metadata {
        if k.is_empty() || k.contains(['=', '\n']) || v.contains('\n') {
            return Err(ObjectError::InvalidMetadata(k.clone()));
        }
    }
    Ok(())
}

fn payload_len_consistent(payload_len: usize, plaintext_len: u64) -> bool {
    let len = payload_len as u64;
    payload_len > 0 && payload_len % BLOCK_LEN == 0 && plaintext_len <= len && len < plaintext_len + 17
}

impl Dcf {
    pub fn serialized_len(&self) -> usize {
        4 + 1
            + 4
            + self.content_id.len()
            + 4
            + self.rights_url.len()
            + 4
            + metadata_text(&self.metadata).len()
            + BLOCK_LEN
            + 8
            + self.encrypted_payload.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.serialized_len());
        out.extend_from_slice(DCF_MAGIC);
        out.push(DCF_VERSION);
        for section in [self.content_id.as_str(), self.rights_url.as_str(), metadata_text(&self.metadata).as_str()] {
            out.extend_from_slice(&(section.len() as u32).to_be_bytes());
            out.extend_from_slice(section.as_bytes());
        }
        out.extend_from_slice(&self.iv);
        out.extend_from_slice(&self.plaintext_len.to_be_bytes());
        out.extend_from_slice(&self.encrypted_payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4, "magic")? != DCF_MAGIC {
            return Err(FormatError::BadMagic { expected: "DCF2" });
        }
        let version = r.take(1, "version")?[0];
        if version != DCF_VERSION {
            return Err(FormatError::UnsupportedVersion(version));
        }
        let content_id = r.string("content_id")?;
        let rights_url = r.string("rights_url")?;
        let meta_offset = r.pos + 4;
        let meta = r.string("metadata")?;
        let mut metadata = BTreeMap::new();
        for line in meta.lines() {
            let Some((k, v)) = line.split_once('=') else {
                return Err(FormatError::Malformed {
                    offset: meta_offset,
                    reason: format!("metadata line `{line}` has no `=`"),
                });
            };
            if metadata.insert(k.to_string(), v.to_string()).is_some() {
                return Err(FormatError::Malformed {
                    offset: meta_offset,
                    reason: format!("duplicate metadata key `{k}`"),
                });
            }
        }
        if metadata_text(&metadata) != meta {
            return Err(FormatError::Malformed {
                offset: meta_offset,
                reason: "metadata is not in canonical form".into(),
            });
        }
        let iv: [u8; BLOCK_LEN] = r.take(BLOCK_LEN, "iv")?.try_into().unwrap();
        let plaintext_len = u64::from_be_bytes(r.take(8, "plaintext_len")?.try_into().unwrap());
        let payload_offset = r.pos;
        let encrypted_payload = bytes[payload_offset..].to_vec();
        if encrypted_payload.len() < plaintext_len as usize {
            return Err(FormatError::Truncated { section: "payload", offset: bytes.len() });
        }
        if !payload_len_consistent(encrypted_payload.len(), plaintext_len) {
            return Err(FormatError::Malformed {
                offset: payload_offset,
                reason: format!(
                    "payload of {} bytes does not fit plaintext length {plaintext_len}",
                    encrypted_payload.len()
                ),
            });
        }
        Ok(Self { content_id, rights_url, metadata, iv, encrypted_payload, plaintext_len })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(FormatError::Truncated { section, offset: self.bytes.len() });
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn string(&mut self, section: &'static str) -> Result<String, FormatError> {
        let len = u32::from_be_bytes(self.take(4, section)?.try_into().unwrap()) as usize;
        let start = self.pos;
        let raw = self.take(len, section)?;
        String::from_utf8(raw.to_vec())
            .map_err(|e| FormatError::InvalidUtf8 { section, offset: start + e.utf8_error().valid_up_to() })
    }
}

/// SHA-1 over the serialized container.
pub fn compute_dcf_hash(dcf: &Dcf) -> Digest {
    sha1(&dcf.to_bytes())
}

/// Encrypts `plaintext` under a fresh K_CEK and IV. Returns the container
/// and the key; the key is what a rights issuer later wraps into rights
/// objects for this content.
pub fn package_content<R: RngCore + CryptoRng>(
    rng: &mut R,
    plaintext: &[u8],
    content_id: &str,
    metadata: BTreeMap<String, String>,
    rights_url: &str,
) -> Result<(Dcf, SymmetricKey), ObjectError> {
    if plaintext.is_empty() {
        return Err(ObjectError::EmptyContent);
    }
    validate_id("content_id", content_id)?;
    check_metadata(&metadata)?;
    let kcek = SymmetricKey::generate(rng);
    let mut iv = [0u8; BLOCK_LEN];
    rng.fill_bytes(&mut iv);
    let encrypted_payload = aes_cbc_encrypt(&kcek, &iv, plaintext);
    let dcf = Dcf {
        content_id: content_id.to_string(),
        rights_url: rights_url.to_string(),
        metadata,
        iv,
        encrypted_payload,
        plaintext_len: plaintext.len() as u64,
    };
    Ok((dcf, kcek))
}
