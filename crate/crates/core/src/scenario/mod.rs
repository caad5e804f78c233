//! The two reference use cases, run end to end with real cryptography and
//! priced under the cost model.

mod render;

pub use render::{parse_csv, render_report, OutputFormat, RenderedFile};

use crate::cost::{ArchVariant, CostError, CostModel, OpTrace, Phase, Report};
use crate::crypto::builtin_key;
use crate::objects::{package_content, Permissions};
use crate::roap::{
    acquire_ro, consume, install_ro, run_registration, CaFixture, CatalogEntry, CertificationAuthority, DrmAgent,
    ProtocolError, RightsIssuer, Timestamp,
};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use std::collections::BTreeMap;
use std::fmt;
use std::num::NonZeroU32;
use std::str::FromStr;
use thiserror::Error;

/// Fixed protocol time for every built-in run.
pub const SCENARIO_NOW: Timestamp = Timestamp(1_096_588_800);

pub const MUSIC_PLAYER_BYTES: usize = 3_670_016;
pub const MUSIC_PLAYER_PLAYS: u32 = 5;
pub const RINGTONE_BYTES: usize = 30_720;
pub const RINGTONE_PLAYS: u32 = 25;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}` (expected music_player, ringtone or custom:SIZE:N)")]
    UnknownScenario(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("{phase} failed: {error}")]
    Protocol { phase: Phase, error: ProtocolError },
    #[error("setup failed: {0}")]
    Setup(String),
    #[error("access {access} returned different bytes than were packaged")]
    RoundTrip { access: u32 },
    #[error(transparent)]
    Cost(#[from] CostError),
    #[error("unknown output format `{0}` (expected table, csv, json or plotdata)")]
    UnknownFormat(String),
    #[error("nothing to render")]
    NoRuns,
    #[error("malformed report data: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Scenario {
    pub name: String,
    pub content_size_bytes: usize,
    pub access_count: NonZeroU32,
    pub permissions: Permissions,
}

impl Scenario {
    /// 3.5 MiB track played five times.
    pub fn music_player() -> Self {
        Self::builtin("music_player", MUSIC_PLAYER_BYTES, MUSIC_PLAYER_PLAYS)
    }

    /// 30 KiB ringtone played on 25 calls.
    pub fn ringtone() -> Self {
        Self::builtin("ringtone", RINGTONE_BYTES, RINGTONE_PLAYS)
    }

    fn builtin(name: &str, size: usize, plays: u32) -> Self {
        Self {
            name: name.to_string(),
            content_size_bytes: size,
            access_count: NonZeroU32::new(plays).unwrap(),
            permissions: Permissions::unlimited(),
        }
    }

    pub fn custom(size: usize, accesses: u32) -> Result<Self, ScenarioError> {
        if size == 0 {
            return Err(ScenarioError::InvalidScenario("content size must be at least 1 byte".into()));
        }
        let access_count = NonZeroU32::new(accesses)
            .ok_or_else(|| ScenarioError::InvalidScenario("access count must be at least 1".into()))?;
        Ok(Self {
            name: format!("custom:{size}:{accesses}"),
            content_size_bytes: size,
            access_count,
            permissions: Permissions::unlimited(),
        })
    }

    /// Same scenario with the play count enforced by the rights object.
    pub fn with_play_limit(mut self, plays: NonZeroU32) -> Self {
        self.permissions = Permissions::limited(plays);
        self
    }

    pub fn builtins() -> [Scenario; 2] {
        [Self::music_player(), Self::ringtone()]
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for Scenario {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "music_player" => return Ok(Self::music_player()),
            "ringtone" => return Ok(Self::ringtone()),
            _ => {}
        }
        let unknown = || ScenarioError::UnknownScenario(s.to_string());
        let rest = s.strip_prefix("custom:").ok_or_else(unknown)?;
        let (size, n) = rest.split_once(':').ok_or_else(unknown)?;
        let size: usize = size.parse().map_err(|_| unknown())?;
        let n: u32 = n.parse().map_err(|_| unknown())?;
        Self::custom(size, n)
    }
}

/// Metered trace of one complete run, before pricing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutedScenario {
    pub scenario: Scenario,
    pub seed: u64,
    pub trace: OpTrace,
    /// Every access returned the packaged bytes.
    pub round_trip_verified: bool,
}

/// A priced run.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioRun {
    pub scenario: Scenario,
    pub variant: String,
    pub clock_hz: u64,
    pub seed: u64,
    pub trace: OpTrace,
    pub report: Report,
    pub round_trip_verified: bool,
}

fn setup_err(e: impl fmt::Display) -> ScenarioError {
    ScenarioError::Setup(e.to_string())
}

fn in_phase(phase: Phase) -> impl Fn(ProtocolError) -> ScenarioError {
    move |error| ScenarioError::Protocol { phase, error }
}

/// Packages seeded content and runs registration, acquisition,
/// installation and every access. Identifiers are fixed-width so message
/// and RO sizes do not depend on the scenario.
pub fn execute_scenario(scenario: &Scenario, seed: u64) -> Result<ExecutedScenario, ScenarioError> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let now = SCENARIO_NOW;
    let ca = CertificationAuthority::from_fixture(&CaFixture::builtin(), builtin_key("ca").clone());
    let agent_cert = ca.certify("agent", builtin_key("agent").public(), now);
    let ri_cert = ca.certify("ri", builtin_key("ri").public(), now);
    let mut agent =
        DrmAgent::new(&mut rng, builtin_key("agent").clone(), agent_cert, ca.public().clone()).map_err(setup_err)?;
    let mut ri =
        RightsIssuer::new(&mut rng, builtin_key("ri").clone(), ri_cert, ca.public().clone()).map_err(setup_err)?;

    let mut content = vec![0u8; scenario.content_size_bytes];
    rng.fill_bytes(&mut content);
    let content_id = format!("cid-{seed:016x}");
    let ro_id = format!("ro-{seed:016x}");
    let (dcf, kcek) = package_content(&mut rng, &content, &content_id, BTreeMap::new(), "http://ri.example/roap")
        .map_err(setup_err)?;
    let entry = CatalogEntry { dcf: dcf.clone(), kcek, permissions: scenario.permissions, sign: false };
    ri.offer(&ro_id, entry).map_err(setup_err)?;

    let mut trace = OpTrace::new();
    run_registration(&mut agent, &mut ri, &ca, now, &mut trace).map_err(in_phase(Phase::Registration))?;
    let ro = acquire_ro(&mut agent, &mut ri, &ro_id, now, &mut trace).map_err(in_phase(Phase::Acquisition))?;
    install_ro(&mut agent, &ro, &dcf, &mut trace).map_err(in_phase(Phase::Installation))?;
    for access in 1..=scenario.access_count.get() {
        let plaintext = consume(&mut agent, &content_id, &dcf, &mut trace).map_err(in_phase(Phase::Consumption))?;
        if plaintext != content {
            return Err(ScenarioError::RoundTrip { access });
        }
    }
    Ok(ExecutedScenario { scenario: scenario.clone(), seed, trace, round_trip_verified: true })
}

impl ExecutedScenario {
    pub fn price(&self, model: &CostModel, variant: &ArchVariant, clock_hz: u64) -> Result<ScenarioRun, ScenarioError> {
        Ok(ScenarioRun {
            scenario: self.scenario.clone(),
            variant: variant.name().to_string(),
            clock_hz,
            seed: self.seed,
            trace: self.trace.clone(),
            report: model.estimate(&self.trace, variant, clock_hz)?,
            round_trip_verified: self.round_trip_verified,
        })
    }
}

/// Executes and prices under the built-in rate tables.
pub fn run_scenario(
    scenario: &Scenario,
    variant: &ArchVariant,
    clock_hz: u64,
    seed: u64,
) -> Result<ScenarioRun, ScenarioError> {
    execute_scenario(scenario, seed)?.price(&CostModel::default(), variant, clock_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{AlgorithmId, DEFAULT_CLOCK_HZ};
    use std::sync::OnceLock;

    fn music() -> &'static ExecutedScenario {
        static RUN: OnceLock<ExecutedScenario> = OnceLock::new();
        RUN.get_or_init(|| execute_scenario(&Scenario::music_player(), 1).unwrap())
    }

    fn ringtone() -> &'static ExecutedScenario {
        static RUN: OnceLock<ExecutedScenario> = OnceLock::new();
        RUN.get_or_init(|| execute_scenario(&Scenario::ringtone(), 1).unwrap())
    }

    fn priced(run: &ExecutedScenario, variant: ArchVariant) -> Report {
        run.price(&CostModel::default(), &variant, DEFAULT_CLOCK_HZ).unwrap().report
    }

    #[test]
    fn builtin_parameters() {
        let m: Scenario = "music_player".parse().unwrap();
        assert_eq!((m.content_size_bytes, m.access_count.get()), (3_670_016, 5));
        let r: Scenario = "ringtone".parse().unwrap();
        assert_eq!((r.content_size_bytes, r.access_count.get()), (30_720, 25));
        assert_eq!(m.permissions, Permissions::unlimited());
    }

    #[test]
    fn custom_parsing() {
        let c: Scenario = "custom:100:3".parse().unwrap();
        assert_eq!((c.content_size_bytes, c.access_count.get()), (100, 3));
        for bad in ["podcast", "custom:0:1", "custom:1:0", "custom:1", "custom:x:1", "custom:1:-1"] {
            assert!(bad.parse::<Scenario>().is_err(), "{bad}");
        }
        assert!(matches!("podcast".parse::<Scenario>(), Err(ScenarioError::UnknownScenario(_))));
        assert!(matches!("custom:0:1".parse::<Scenario>(), Err(ScenarioError::InvalidScenario(_))));
    }

    #[test]
    fn minimal_custom_runs() {
        let run = run_scenario(&Scenario::custom(1, 1).unwrap(), &ArchVariant::mixed(), DEFAULT_CLOCK_HZ, 3).unwrap();
        assert!(run.round_trip_verified);
        assert_eq!(run.trace.counts(Phase::Consumption)[&AlgorithmId::AesDec], 3);
    }

    #[test]
    fn music_player_totals() {
        let sw = priced(music(), ArchVariant::all_software());
        let mixed = priced(music(), ArchVariant::mixed());
        assert!((7.4..8.0).contains(&sw.total_seconds), "{}", sw.total_seconds);
        let ratio = sw.total_seconds / mixed.total_seconds;
        assert!((9.5..10.1).contains(&ratio), "{ratio}");
        let aes_sha = sw.algorithm_share(&[AlgorithmId::AesEnc, AlgorithmId::AesDec, AlgorithmId::Sha1]);
        assert!(aes_sha >= 85.0, "{aes_sha}");
    }

    #[test]
    fn ringtone_totals() {
        let mixed = priced(ringtone(), ArchVariant::mixed());
        let hw = priced(ringtone(), ArchVariant::all_hardware());
        let sw = priced(ringtone(), ArchVariant::all_software());
        assert!((0.60..0.64).contains(&mixed.total_seconds), "{}", mixed.total_seconds);
        let rsa = mixed.seconds_for(
            mixed.cycles_by_algorithm[&AlgorithmId::RsaPriv] + mixed.cycles_by_algorithm[&AlgorithmId::RsaPub],
        );
        assert!((rsa - 0.6093).abs() < 1e-9);
        assert!(hw.total_seconds / mixed.total_seconds < 0.03);
        let rsa_share = sw.algorithm_share(&[AlgorithmId::RsaPriv, AlgorithmId::RsaPub]);
        assert!((60.0..75.0).contains(&rsa_share), "{rsa_share}");
    }

    #[test]
    fn setup_phases_are_size_independent() {
        for variant in ArchVariant::presets() {
            let (m, r) = (priced(music(), variant.clone()), priced(ringtone(), variant.clone()));
            for phase in [Phase::Registration, Phase::Acquisition, Phase::Installation] {
                assert_eq!(m.cycles_by_phase[&phase], r.cycles_by_phase[&phase], "{} {phase}", variant.name());
            }
        }
        let setup: Vec<_> = music().trace.events().iter().filter(|e| e.phase().is_setup()).collect();
        let setup_r: Vec<_> = ringtone().trace.events().iter().filter(|e| e.phase().is_setup()).collect();
        assert_eq!(setup, setup_r);
    }

    #[test]
    fn consumption_is_affine_in_size() {
        let sizes = [16_384usize, 32_768, 65_536];
        for variant in ArchVariant::presets() {
            let c: Vec<i128> = sizes
                .iter()
                .map(|&s| {
                    let run = run_scenario(&Scenario::custom(s, 2).unwrap(), &variant, DEFAULT_CLOCK_HZ, 5).unwrap();
                    run.report.cycles_by_phase[&Phase::Consumption] as i128
                })
                .collect();
            let s: Vec<i128> = sizes.iter().map(|&x| x as i128).collect();
            assert_eq!((c[2] - c[0]) * (s[1] - s[0]), (c[1] - c[0]) * (s[2] - s[0]), "{}", variant.name());
            assert!(c[1] > c[0]);
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let s = Scenario::custom(5000, 3).unwrap();
        let a = run_scenario(&s, &ArchVariant::mixed(), DEFAULT_CLOCK_HZ, 42).unwrap();
        let b = run_scenario(&s, &ArchVariant::mixed(), DEFAULT_CLOCK_HZ, 42).unwrap();
        assert_eq!(a, b);
        let c = run_scenario(&s, &ArchVariant::mixed(), DEFAULT_CLOCK_HZ, 43).unwrap();
        // Costs depend on sizes only, never on the seeded bytes.
        assert_eq!(a.report, c.report);
        assert_ne!(a.trace.len(), 0);
    }

    #[test]
    fn play_limit_below_access_count_fails_in_consumption() {
        let s = Scenario::custom(64, 4).unwrap().with_play_limit(NonZeroU32::new(3).unwrap());
        match execute_scenario(&s, 9) {
            Err(ScenarioError::Protocol { phase: Phase::Consumption, error: ProtocolError::PlaysExhausted(_) }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let s = Scenario::custom(64, 3).unwrap().with_play_limit(NonZeroU32::new(3).unwrap());
        assert!(execute_scenario(&s, 9).is_ok());
    }
}
