use super::{AlgorithmId, CostError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Registration,
    Acquisition,
    Installation,
    Consumption,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Registration, Phase::Acquisition, Phase::Installation, Phase::Consumption];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Registration => "Registration",
            Phase::Acquisition => "Acquisition",
            Phase::Installation => "Installation",
            Phase::Consumption => "Consumption",
        }
    }

    /// Registration, acquisition and installation: the phases whose work
    /// does not depend on content size.
    pub fn is_setup(self) -> bool {
        self != Phase::Consumption
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Phase {
    type Err = CostError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| CostError::UnknownPhase(s.to_string()))
    }
}

/// One metered cryptographic operation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct OpEvent {
    phase: Phase,
    algorithm: AlgorithmId,
    input_bits: u64,
}

impl OpEvent {
    /// `input_bits` must be positive; RSA events must be exactly 1024 bits.
    pub fn new(phase: Phase, algorithm: AlgorithmId, input_bits: u64) -> Result<Self, CostError> {
        if input_bits == 0 {
            return Err(CostError::EmptyEvent(algorithm));
        }
        if algorithm.is_rsa() && input_bits != 1024 {
            return Err(CostError::RsaWidth(input_bits));
        }
        Ok(Self { phase, algorithm, input_bits })
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn algorithm(&self) -> AlgorithmId {
        self.algorithm
    }

    pub fn input_bits(&self) -> u64 {
        self.input_bits
    }
}

/// Ordered list of metered events.
///
/// Text form, one event per line: `phase algorithm input_bits`. Blank lines
/// and lines starting with `#` are ignored on input.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OpTrace {
    events: Vec<OpEvent>,
}

impl OpTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, event: OpEvent) {
        self.events.push(event);
    }

    pub fn events(&self) -> &[OpEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn phase_events(&self, phase: Phase) -> impl Iterator<Item = &OpEvent> {
        self.events.iter().filter(move |e| e.phase == phase)
    }

    /// Number of events per algorithm within `phase`.
    pub fn counts(&self, phase: Phase) -> BTreeMap<AlgorithmId, usize> {
        let mut out = BTreeMap::new();
        for e in self.phase_events(phase) {
            *out.entry(e.algorithm).or_insert(0) += 1;
        }
        out
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# phase algorithm input_bits\n");
        for e in &self.events {
            out.push_str(&format!("{} {} {}\n", e.phase, e.algorithm, e.input_bits));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self, CostError> {
        let mut trace = OpTrace::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let at_line = |source: CostError| CostError::TraceLine { line: idx + 1, reason: source.to_string() };
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let [phase, algorithm, bits] = tokens[..] else {
                return Err(CostError::TraceLine {
                    line: idx + 1,
                    reason: format!("expected 3 fields, found {}", tokens.len()),
                });
            };
            let bits: u64 = bits
                .parse()
                .map_err(|_| CostError::TraceLine { line: idx + 1, reason: format!("`{bits}` is not a bit count") })?;
            let event = OpEvent::new(phase.parse().map_err(at_line)?, algorithm.parse().map_err(at_line)?, bits)
                .map_err(at_line)?;
            trace.record(event);
        }
        Ok(trace)
    }
}

impl Extend<OpEvent> for OpTrace {
    fn extend<T: IntoIterator<Item = OpEvent>>(&mut self, iter: T) {
        self.events.extend(iter);
    }
}
