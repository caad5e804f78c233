use super::CostError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AlgorithmId {
    AesEnc,
    AesDec,
    Sha1,
    HmacSha1,
    RsaPub,
    RsaPriv,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 6] = [
        AlgorithmId::AesEnc,
        AlgorithmId::AesDec,
        AlgorithmId::Sha1,
        AlgorithmId::HmacSha1,
        AlgorithmId::RsaPub,
        AlgorithmId::RsaPriv,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::AesEnc => "AesEnc",
            AlgorithmId::AesDec => "AesDec",
            AlgorithmId::Sha1 => "Sha1",
            AlgorithmId::HmacSha1 => "HmacSha1",
            AlgorithmId::RsaPub => "RsaPub",
            AlgorithmId::RsaPriv => "RsaPriv",
        }
    }

    /// The unit this algorithm's rates are expressed in.
    pub fn unit(self) -> CostUnit {
        match self {
            AlgorithmId::RsaPub | AlgorithmId::RsaPriv => CostUnit::Op1024,
            _ => CostUnit::Block128,
        }
    }

    pub fn is_rsa(self) -> bool {
        self.unit() == CostUnit::Op1024
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AlgorithmId {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AlgorithmId::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CostError::UnknownAlgorithm(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostUnit {
    /// Charged per started 128-bit block of input.
    Block128,
    /// Charged per started 1024-bit operand.
    Op1024,
}

impl CostUnit {
    pub fn bits(self) -> u64 {
        match self {
            CostUnit::Block128 => 128,
            CostUnit::Op1024 => 1024,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostEntry {
    pub offset_cycles: u64,
    pub unit_cycles: u64,
    pub unit: CostUnit,
}

impl CostEntry {
    pub const fn per_block(offset_cycles: u64, unit_cycles: u64) -> Self {
        Self { offset_cycles, unit_cycles, unit: CostUnit::Block128 }
    }

    pub const fn per_op(unit_cycles: u64) -> Self {
        Self { offset_cycles: 0, unit_cycles, unit: CostUnit::Op1024 }
    }
}

/// Cycle rates for every algorithm on one realization (software or
/// hardware).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CostProfile {
    entries: BTreeMap<AlgorithmId, CostEntry>,
}

impl CostProfile {
    /// Requires an entry for every [`AlgorithmId`].
    pub fn new(entries: BTreeMap<AlgorithmId, CostEntry>) -> Result<Self, CostError> {
        if let Some(missing) = AlgorithmId::ALL.into_iter().find(|a| !entries.contains_key(a)) {
            return Err(CostError::IncompleteProfile(missing));
        }
        Ok(Self { entries })
    }

    /// ARM9 software rates.
    pub fn software() -> Self {
        Self::from_rows([
            (AlgorithmId::AesEnc, CostEntry::per_block(360, 830)),
            (AlgorithmId::AesDec, CostEntry::per_block(950, 830)),
            (AlgorithmId::Sha1, CostEntry::per_block(0, 400)),
            (AlgorithmId::HmacSha1, CostEntry::per_block(1200, 400)),
            (AlgorithmId::RsaPub, CostEntry::per_op(2_160_000)),
            (AlgorithmId::RsaPriv, CostEntry::per_op(37_740_000)),
        ])
    }

    /// Dedicated hardware macro rates.
    pub fn hardware() -> Self {
        Self::from_rows([
            (AlgorithmId::AesEnc, CostEntry::per_block(0, 10)),
            (AlgorithmId::AesDec, CostEntry::per_block(10, 10)),
            (AlgorithmId::Sha1, CostEntry::per_block(0, 20)),
            (AlgorithmId::HmacSha1, CostEntry::per_block(240, 20)),
            (AlgorithmId::RsaPub, CostEntry::per_op(10_000)),
            (AlgorithmId::RsaPriv, CostEntry::per_op(260_000)),
        ])
    }

    fn from_rows(rows: [(AlgorithmId, CostEntry); 6]) -> Self {
        Self { entries: rows.into_iter().collect() }
    }

    pub fn entry(&self, algorithm: AlgorithmId) -> &CostEntry {
        &self.entries[&algorithm]
    }

    pub fn entries(&self) -> impl Iterator<Item = (AlgorithmId, &CostEntry)> {
        self.entries.iter().map(|(a, e)| (*a, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Realization {
    Software,
    Hardware,
}

/// Which algorithms run on dedicated hardware and which in software.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArchVariant {
    name: String,
    assignment: BTreeMap<AlgorithmId, Realization>,
}

impl ArchVariant {
    pub fn new(name: impl Into<String>, assignment: BTreeMap<AlgorithmId, Realization>) -> Result<Self, CostError> {
        if let Some(missing) = AlgorithmId::ALL.into_iter().find(|a| !assignment.contains_key(a)) {
            return Err(CostError::IncompleteVariant(missing));
        }
        Ok(Self { name: name.into(), assignment })
    }

    fn uniform(name: &str, pick: impl Fn(AlgorithmId) -> Realization) -> Self {
        Self { name: name.to_string(), assignment: AlgorithmId::ALL.into_iter().map(|a| (a, pick(a))).collect() }
    }

    pub fn all_software() -> Self {
        Self::uniform("sw", |_| Realization::Software)
    }

    /// AES, SHA-1 and HMAC in hardware; RSA in software.
    pub fn mixed() -> Self {
        Self::uniform("mixed", |a| if a.is_rsa() { Realization::Software } else { Realization::Hardware })
    }

    pub fn all_hardware() -> Self {
        Self::uniform("hw", |_| Realization::Hardware)
    }

    pub fn presets() -> [ArchVariant; 3] {
        [Self::all_software(), Self::mixed(), Self::all_hardware()]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn realization(&self, algorithm: AlgorithmId) -> Realization {
        self.assignment[&algorithm]
    }
}

impl FromStr for ArchVariant {
    type Err = CostError;

    /// Accepts `sw`, `mixed`, `hw` and the long forms `software`,
    /// `hardware`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sw" | "software" | "all-software" => Ok(Self::all_software()),
            "mixed" => Ok(Self::mixed()),
            "hw" | "hardware" | "all-hardware" => Ok(Self::all_hardware()),
            _ => Err(CostError::UnknownVariant(s.to_string())),
        }
    }
}
