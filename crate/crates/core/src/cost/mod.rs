//! Cycle-count pricing of metered operation traces.

mod profile;
mod report;
mod trace;

pub use profile::{AlgorithmId, ArchVariant, CostEntry, CostProfile, CostUnit, Realization};
pub use report::{Comparison, CostModel, Report};
pub use trace::{OpEvent, OpTrace, Phase};

use thiserror::Error;

/// Default processor clock.
pub const DEFAULT_CLOCK_HZ: u64 = 200_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CostError {
    #[error("{algorithm} is priced per {expected:?} but the entry uses {actual:?}")]
    UnitMismatch { algorithm: AlgorithmId, expected: CostUnit, actual: CostUnit },
    #[error("{0} event with zero input bits")]
    EmptyEvent(AlgorithmId),
    #[error("RSA events must cover exactly 1024 bits, got {0}")]
    RsaWidth(u64),
    #[error("profile has no entry for {0}")]
    IncompleteProfile(AlgorithmId),
    #[error("variant assigns no realization to {0}")]
    IncompleteVariant(AlgorithmId),
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("unknown phase `{0}`")]
    UnknownPhase(String),
    #[error("unknown variant `{0}` (expected sw, mixed or hw)")]
    UnknownVariant(String),
    #[error("trace line {line}: {reason}")]
    TraceLine { line: usize, reason: String },
    #[error("invalid profile file: {0}")]
    ProfileFile(String),
    #[error("clock frequency must be positive")]
    ZeroClock,
    #[error("comparison needs at least two variants, got {0}")]
    TooFewVariants(usize),
    #[error("cycle count overflow")]
    Overflow,
}

/// Cycles for one event under one table entry.
///
/// Per-block entries charge `offset + unit_cycles * ceil(bits / 128)`.
/// Per-op entries charge `offset + unit_cycles * ceil(bits / 1024)`; every
/// built-in per-op entry has a zero offset.
pub fn cost_of(event: &OpEvent, entry: &CostEntry) -> Result<u64, CostError> {
    let algorithm = event.algorithm();
    if entry.unit != algorithm.unit() {
        return Err(CostError::UnitMismatch { algorithm, expected: algorithm.unit(), actual: entry.unit });
    }
    let units = event.input_bits().div_ceil(entry.unit.bits());
    entry.unit_cycles.checked_mul(units).and_then(|c| c.checked_add(entry.offset_cycles)).ok_or(CostError::Overflow)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ev(alg: AlgorithmId, bits: u64) -> OpEvent {
        OpEvent::new(Phase::Consumption, alg, bits).unwrap()
    }

    #[test]
    fn worked_examples() {
        let sw = CostProfile::software();
        let hw = CostProfile::hardware();
        let aes = ev(AlgorithmId::AesDec, 29_360_128);
        assert_eq!(cost_of(&aes, sw.entry(AlgorithmId::AesDec)).unwrap(), 950 + 830 * 229_376);
        assert_eq!(cost_of(&aes, sw.entry(AlgorithmId::AesDec)).unwrap(), 190_383_030);
        assert_eq!(cost_of(&ev(AlgorithmId::Sha1, 128), sw.entry(AlgorithmId::Sha1)).unwrap(), 400);
        assert_eq!(cost_of(&ev(AlgorithmId::RsaPriv, 1024), hw.entry(AlgorithmId::RsaPriv)).unwrap(), 260_000);
    }

    #[test]
    fn partial_blocks_round_up() {
        let sw = CostProfile::software();
        let e = sw.entry(AlgorithmId::Sha1);
        assert_eq!(cost_of(&ev(AlgorithmId::Sha1, 1), e).unwrap(), 400);
        assert_eq!(cost_of(&ev(AlgorithmId::Sha1, 129), e).unwrap(), 800);
        assert_eq!(cost_of(&ev(AlgorithmId::Sha1, 1056), e).unwrap(), 9 * 400);
    }

    #[test]
    fn mismatched_unit_is_rejected() {
        let sw = CostProfile::software();
        let err = cost_of(&ev(AlgorithmId::Sha1, 128), sw.entry(AlgorithmId::RsaPub)).unwrap_err();
        assert!(matches!(err, CostError::UnitMismatch { algorithm: AlgorithmId::Sha1, .. }));
        let err = cost_of(&ev(AlgorithmId::RsaPub, 1024), sw.entry(AlgorithmId::AesEnc)).unwrap_err();
        assert!(matches!(err, CostError::UnitMismatch { .. }));
    }

    #[test]
    fn overflow_is_reported() {
        let entry = CostEntry::per_block(0, u64::MAX);
        assert_eq!(cost_of(&ev(AlgorithmId::AesEnc, 256), &entry), Err(CostError::Overflow));
    }

    fn block_alg() -> impl Strategy<Value = AlgorithmId> {
        prop::sample::select(vec![AlgorithmId::AesEnc, AlgorithmId::AesDec, AlgorithmId::Sha1, AlgorithmId::HmacSha1])
    }

    proptest! {
        #[test]
        fn linear_in_block_count(alg in block_alg(), blocks in 1u64..100_000, k in 1u64..64, hw in any::<bool>()) {
            let profile = if hw { CostProfile::hardware() } else { CostProfile::software() };
            let entry = profile.entry(alg);
            let one = cost_of(&ev(alg, blocks * 128), entry).unwrap();
            let many = cost_of(&ev(alg, k * blocks * 128), entry).unwrap();
            prop_assert_eq!(many - one, entry.unit_cycles * (k - 1) * blocks);
        }

        #[test]
        fn hardware_dominates_per_event(a in 0usize..6, bits in 1u64..50_000_000) {
            let alg = AlgorithmId::ALL[a];
            let bits = if alg.is_rsa() { 1024 } else { bits };
            let e = ev(alg, bits);
            let sw = cost_of(&e, CostProfile::software().entry(alg)).unwrap();
            let hw = cost_of(&e, CostProfile::hardware().entry(alg)).unwrap();
            prop_assert!(hw <= sw);
        }

        #[test]
        fn more_bits_never_cheaper(alg in block_alg(), bits in 1u64..10_000_000, extra in 0u64..10_000) {
            let entry = *CostProfile::software().entry(alg);
            prop_assert!(cost_of(&ev(alg, bits + extra), &entry).unwrap() >= cost_of(&ev(alg, bits), &entry).unwrap());
        }
    }
}
