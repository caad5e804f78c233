//! Content objects (DCF) and rights objects.

mod dcf;
mod rights;

pub use dcf::{compute_dcf_hash, package_content, Dcf, DCF_MAGIC, DCF_VERSION};
pub use rights::{
    issue_rights_object, InstalledRo, Permissions, RightsObject, RoTerms, C1_LEN, C2_LEN, WRAPPED_KCEK_LEN,
};

use crate::codec::FormatError;
use crate::crypto::CryptoError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObjectError {
    #[error("content is empty")]
    EmptyContent,
    #[error("invalid metadata key `{0}`")]
    InvalidMetadata(String),
    #[error("content key does not decrypt the container")]
    KeyMismatch,
    #[error(transparent)]
    Crypto(#[from] CryptoError),
    #[error(transparent)]
    Format(#[from] FormatError),
}
