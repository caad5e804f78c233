use super::{cost_of, AlgorithmId, ArchVariant, CostError, CostProfile, OpTrace, Phase, Realization};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Priced trace. Every algorithm and phase is present, with zero where
/// nothing was recorded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub variant: String,
    pub clock_hz: u64,
    pub total_cycles: u64,
    pub total_seconds: f64,
    /// Relative energy figure; energy is taken to scale with cycles.
    pub energy_proxy: u64,
    pub cycles_by_algorithm: BTreeMap<AlgorithmId, u64>,
    pub cycles_by_phase: BTreeMap<Phase, u64>,
    pub percent_by_algorithm: BTreeMap<AlgorithmId, f64>,
}

impl Report {
    pub fn seconds_for(&self, cycles: u64) -> f64 {
        cycles as f64 / self.clock_hz as f64
    }

    /// Cycles of registration, acquisition and installation together.
    pub fn setup_cycles(&self) -> u64 {
        self.cycles_by_phase.iter().filter(|(p, _)| p.is_setup()).map(|(_, c)| c).sum()
    }

    pub fn algorithm_share(&self, algorithms: &[AlgorithmId]) -> f64 {
        algorithms.iter().map(|a| self.percent_by_algorithm[a]).sum()
    }
}

/// Reports in input order plus `ratios[i][j] = total(i) / total(j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub reports: Vec<Report>,
    pub ratios: Vec<Vec<f64>>,
}

impl Comparison {
    pub fn ratio(&self, numerator: usize, denominator: usize) -> f64 {
        self.ratios[numerator][denominator]
    }
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct ProfileFile {
    software: Option<CostProfile>,
    hardware: Option<CostProfile>,
}

/// Software and hardware rate tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostModel {
    pub software: CostProfile,
    pub hardware: CostProfile,
}

impl Default for CostModel {
    fn default() -> Self {
        Self { software: CostProfile::software(), hardware: CostProfile::hardware() }
    }
}

impl CostModel {
    /// Reads a TOML override with optional `[software]` and `[hardware]`
    /// tables. A table that is given must list all six algorithms; an
    /// omitted table keeps the built-in rates.
    ///
    /// ```toml
    /// [hardware.RsaPriv]
    /// offset_cycles = 0
    /// unit_cycles = 130000
    /// unit = "op1024"
    /// ```
    pub fn from_toml(text: &str) -> Result<Self, CostError> {
        let file: ProfileFile = toml::from_str(text).map_err(|e| CostError::ProfileFile(e.to_string()))?;
        let mut model = CostModel::default();
        for (slot, given) in [(&mut model.software, file.software), (&mut model.hardware, file.hardware)] {
            if let Some(profile) = given {
                let entries: BTreeMap<_, _> = profile.entries().map(|(a, e)| (a, *e)).collect();
                let profile = CostProfile::new(entries)?;
                for (alg, entry) in profile.entries() {
                    if entry.unit != alg.unit() {
                        return Err(CostError::UnitMismatch {
                            algorithm: alg,
                            expected: alg.unit(),
                            actual: entry.unit,
                        });
                    }
                }
                *slot = profile;
            }
        }
        Ok(model)
    }

    pub fn to_toml(&self) -> String {
        let file = ProfileFile { software: Some(self.software.clone()), hardware: Some(self.hardware.clone()) };
        toml::to_string(&file).expect("profile tables always serialize")
    }

    pub fn profile(&self, realization: Realization) -> &CostProfile {
        match realization {
            Realization::Software => &self.software,
            Realization::Hardware => &self.hardware,
        }
    }

    pub fn estimate(&self, trace: &OpTrace, variant: &ArchVariant, clock_hz: u64) -> Result<Report, CostError> {
        if clock_hz == 0 {
            return Err(CostError::ZeroClock);
        }
        let mut by_alg: BTreeMap<AlgorithmId, u64> = AlgorithmId::ALL.into_iter().map(|a| (a, 0)).collect();
        let mut by_phase: BTreeMap<Phase, u64> = Phase::ALL.into_iter().map(|p| (p, 0)).collect();
        let mut total: u64 = 0;
        for event in trace.events() {
            let alg = event.algorithm();
            let cycles = cost_of(event, self.profile(variant.realization(alg)).entry(alg))?;
            total = total.checked_add(cycles).ok_or(CostError::Overflow)?;
            // Both partial sums are bounded by `total`.
            *by_alg.get_mut(&alg).expect("all algorithms present") += cycles;
            *by_phase.get_mut(&event.phase()).expect("all phases present") += cycles;
        }
        let percent_by_algorithm =
            by_alg.iter().map(|(a, c)| (*a, if total == 0 { 0.0 } else { 100.0 * *c as f64 / total as f64 })).collect();
        Ok(Report {
            variant: variant.name().to_string(),
            clock_hz,
            total_cycles: total,
            total_seconds: total as f64 / clock_hz as f64,
            energy_proxy: total,
            cycles_by_algorithm: by_alg,
            cycles_by_phase: by_phase,
            percent_by_algorithm,
        })
    }

    pub fn compare(&self, trace: &OpTrace, variants: &[ArchVariant], clock_hz: u64) -> Result<Comparison, CostError> {
        if variants.len() < 2 {
            return Err(CostError::TooFewVariants(variants.len()));
        }
        let reports = variants.iter().map(|v| self.estimate(trace, v, clock_hz)).collect::<Result<Vec<_>, _>>()?;
        let ratios = reports
            .iter()
            .map(|a| {
                reports
                    .iter()
                    .map(|b| if a.total_cycles == b.total_cycles { 1.0 } else { a.total_seconds / b.total_seconds })
                    .collect()
            })
            .collect();
        Ok(Comparison { reports, ratios })
    }
}
