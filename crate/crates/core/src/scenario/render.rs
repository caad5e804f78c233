use super::{ScenarioError, ScenarioRun};
use crate::cost::{AlgorithmId, Phase, Report};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Table,
    Csv,
    Json,
    /// `algorithm_share.csv` and `variant_totals.csv`.
    PlotData,
}

impl FromStr for OutputFormat {
    type Err = ScenarioError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "table" => Ok(OutputFormat::Table),
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "plotdata" => Ok(OutputFormat::PlotData),
            other => Err(ScenarioError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedFile {
    pub name: String,
    pub contents: String,
}

pub fn render_report(runs: &[ScenarioRun], format: OutputFormat) -> Result<Vec<RenderedFile>, ScenarioError> {
    if runs.is_empty() {
        return Err(ScenarioError::NoRuns);
    }
    let file = |name: &str, contents: String| RenderedFile { name: name.to_string(), contents };
    Ok(match format {
        OutputFormat::Table => vec![file("report.txt", table(runs))],
        OutputFormat::Csv => vec![file("report.csv", long_csv(runs)?)],
        OutputFormat::Json => vec![file("report.json", json(runs)?)],
        OutputFormat::PlotData => {
            vec![file("algorithm_share.csv", algorithm_share(runs)?), file("variant_totals.csv", variant_totals(runs)?)]
        }
    })
}

fn ms(seconds: f64) -> String {
    format!("{:.3}", seconds * 1e3)
}

fn table(runs: &[ScenarioRun]) -> String {
    let mut out = String::new();
    for run in runs {
        let r = &run.report;
        let _ = writeln!(
            out,
            "{} / {} @ {} MHz  ({} bytes, {} accesses, seed {})",
            run.scenario,
            run.variant,
            r.clock_hz as f64 / 1e6,
            run.scenario.content_size_bytes,
            run.scenario.access_count,
            run.seed
        );
        let _ = writeln!(out, "  {:<14}{:>16}{:>14}{:>9}", "algorithm", "cycles", "ms", "share");
        for (alg, cycles) in &r.cycles_by_algorithm {
            let _ = writeln!(
                out,
                "  {:<14}{:>16}{:>14}{:>8.2}%",
                alg.name(),
                cycles,
                ms(r.seconds_for(*cycles)),
                r.percent_by_algorithm[alg]
            );
        }
        let _ = writeln!(out, "  {:<14}{:>16}{:>14}", "phase", "cycles", "ms");
        for (phase, cycles) in &r.cycles_by_phase {
            let _ = writeln!(out, "  {:<14}{:>16}{:>14}", phase.name(), cycles, ms(r.seconds_for(*cycles)));
        }
        let _ = writeln!(out, "  {:<14}{:>16}{:>14}", "total", r.total_cycles, ms(r.total_seconds));
        let _ = writeln!(out, "  energy proxy  {} (relative)\n", r.energy_proxy);
    }
    if runs.len() > 1 {
        let _ = writeln!(out, "{:<24}{:<10}{:>14}{:>12}", "scenario", "variant", "total ms", "vs first");
        let mut first: BTreeMap<&str, f64> = BTreeMap::new();
        for run in runs {
            let base = *first.entry(run.scenario.name.as_str()).or_insert(run.report.total_seconds);
            let _ = writeln!(
                out,
                "{:<24}{:<10}{:>14}{:>11.3}x",
                run.scenario.name,
                run.variant,
                ms(run.report.total_seconds),
                base / run.report.total_seconds
            );
        }
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    scenario: String,
    variant: String,
    clock_hz: u64,
    kind: String,
    key: String,
    cycles: u64,
    seconds: f64,
    percent: Option<f64>,
}

fn csv_text<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, ScenarioError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| ScenarioError::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Long format: one row per total, algorithm and phase figure.
fn long_csv(runs: &[ScenarioRun]) -> Result<String, ScenarioError> {
    let mut rows = Vec::new();
    for run in runs {
        let r = &run.report;
        let row = |kind: &str, key: &str, cycles: u64, seconds: f64, percent: Option<f64>| CsvRow {
            scenario: run.scenario.name.clone(),
            variant: run.variant.clone(),
            clock_hz: r.clock_hz,
            kind: kind.to_string(),
            key: key.to_string(),
            cycles,
            seconds,
            percent,
        };
        rows.push(row("total", "total", r.total_cycles, r.total_seconds, None));
        rows.push(row("energy", "energy_proxy", r.energy_proxy, r.total_seconds, None));
        for (alg, c) in &r.cycles_by_algorithm {
            rows.push(row("algorithm", alg.name(), *c, r.seconds_for(*c), Some(r.percent_by_algorithm[alg])));
        }
        for (phase, c) in &r.cycles_by_phase {
            rows.push(row("phase", phase.name(), *c, r.seconds_for(*c), None));
        }
    }
    csv_text(rows)
}

/// Reads the long CSV back into `(scenario, report)` pairs, in the order
/// the runs first appear.
pub fn parse_csv(text: &str) -> Result<Vec<(String, Report)>, ScenarioError> {
    let bad = |msg: String| ScenarioError::Parse(msg);
    let mut out: Vec<(String, Report)> = Vec::new();
    for row in csv::Reader::from_reader(text.as_bytes()).deserialize::<CsvRow>() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let idx = match out.iter().position(|(s, r)| *s == row.scenario && r.variant == row.variant) {
            Some(i) => i,
            None => {
                out.push((
                    row.scenario.clone(),
                    Report {
                        variant: row.variant.clone(),
                        clock_hz: row.clock_hz,
                        total_cycles: 0,
                        total_seconds: 0.0,
                        energy_proxy: 0,
                        cycles_by_algorithm: BTreeMap::new(),
                        cycles_by_phase: BTreeMap::new(),
                        percent_by_algorithm: BTreeMap::new(),
                    },
                ));
                out.len() - 1
            }
        };
        let r = &mut out[idx].1;
        match row.kind.as_str() {
            "total" => {
                r.total_cycles = row.cycles;
                r.total_seconds = row.seconds;
            }
            "energy" => r.energy_proxy = row.cycles,
            "algorithm" => {
                let alg: AlgorithmId = row.key.parse().map_err(|e: crate::cost::CostError| bad(e.to_string()))?;
                r.cycles_by_algorithm.insert(alg, row.cycles);
                r.percent_by_algorithm
                    .insert(alg, row.percent.ok_or_else(|| bad(format!("{alg} row without percent")))?);
            }
            "phase" => {
                let phase: Phase = row.key.parse().map_err(|e: crate::cost::CostError| bad(e.to_string()))?;
                r.cycles_by_phase.insert(phase, row.cycles);
            }
            other => return Err(bad(format!("unknown row kind `{other}`"))),
        }
    }
    Ok(out)
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonRun {
    scenario: String,
    content_size_bytes: usize,
    access_count: u32,
    seed: u64,
    round_trip_verified: bool,
    report: Report,
}

fn json(runs: &[ScenarioRun]) -> Result<String, ScenarioError> {
    let items: Vec<JsonRun> = runs
        .iter()
        .map(|run| JsonRun {
            scenario: run.scenario.name.clone(),
            content_size_bytes: run.scenario.content_size_bytes,
            access_count: run.scenario.access_count.get(),
            seed: run.seed,
            round_trip_verified: run.round_trip_verified,
            report: run.report.clone(),
        })
        .collect();
    serde_json::to_string_pretty(&items).map(|s| s + "\n").map_err(|e| ScenarioError::Parse(e.to_string()))
}

#[derive(Serialize)]
struct ShareRow<'a> {
    scenario: &'a str,
    variant: &'a str,
    algorithm: &'static str,
    percent: f64,
}

fn algorithm_share(runs: &[ScenarioRun]) -> Result<String, ScenarioError> {
    csv_text(runs.iter().flat_map(|run| {
        run.report.percent_by_algorithm.iter().map(move |(alg, pct)| ShareRow {
            scenario: &run.scenario.name,
            variant: &run.variant,
            algorithm: alg.name(),
            percent: *pct,
        })
    }))
}

#[derive(Serialize)]
struct TotalsRow<'a> {
    scenario: &'a str,
    variant: &'a str,
    registration_s: f64,
    acquisition_s: f64,
    installation_s: f64,
    consumption_s: f64,
    total_s: f64,
}

fn variant_totals(runs: &[ScenarioRun]) -> Result<String, ScenarioError> {
    csv_text(runs.iter().map(|run| {
        let r = &run.report;
        let s = |p: Phase| r.seconds_for(r.cycles_by_phase[&p]);
        TotalsRow {
            scenario: &run.scenario.name,
            variant: &run.variant,
            registration_s: s(Phase::Registration),
            acquisition_s: s(Phase::Acquisition),
            installation_s: s(Phase::Installation),
            consumption_s: s(Phase::Consumption),
            total_s: r.total_seconds,
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{ArchVariant, CostModel, DEFAULT_CLOCK_HZ};
    use crate::scenario::{execute_scenario, Scenario};

    fn runs() -> Vec<ScenarioRun> {
        let exec = execute_scenario(&Scenario::custom(2048, 3).unwrap(), 8).unwrap();
        ArchVariant::presets().iter().map(|v| exec.price(&CostModel::default(), v, DEFAULT_CLOCK_HZ).unwrap()).collect()
    }

    #[test]
    fn csv_round_trips_exactly() {
        let runs = runs();
        let text = &render_report(&runs, OutputFormat::Csv).unwrap()[0].contents;
        let parsed = parse_csv(text).unwrap();
        assert_eq!(parsed.len(), runs.len());
        for ((scenario, report), run) in parsed.iter().zip(&runs) {
            assert_eq!(scenario, &run.scenario.name);
            assert_eq!(report, &run.report);
        }
    }

    #[test]
    fn json_round_trips_exactly() {
        let runs = runs();
        let text = &render_report(&runs, OutputFormat::Json).unwrap()[0].contents;
        let parsed: Vec<JsonRun> = serde_json::from_str(text).unwrap();
        for (p, run) in parsed.iter().zip(&runs) {
            assert_eq!(p.report, run.report);
            assert!(p.round_trip_verified);
            assert_eq!(p.access_count, 3);
        }
    }

    #[test]
    fn plotdata_has_two_files() {
        let runs = runs();
        let files = render_report(&runs, OutputFormat::PlotData).unwrap();
        let names: Vec<_> = files.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["algorithm_share.csv", "variant_totals.csv"]);
        assert_eq!(files[0].contents.lines().count(), 1 + 6 * runs.len());
        assert_eq!(files[1].contents.lines().count(), 1 + runs.len());
        let mut reader = csv::Reader::from_reader(files[1].contents.as_bytes());
        for (rec, run) in reader.records().zip(&runs) {
            let total: f64 = rec.unwrap()[6].parse().unwrap();
            assert_eq!(total, run.report.total_seconds);
        }
    }

    #[test]
    fn table_mentions_every_algorithm_and_total() {
        let runs = runs();
        let text = &render_report(&runs, OutputFormat::Table).unwrap()[0].contents;
        for alg in AlgorithmId::ALL {
            assert!(text.contains(alg.name()));
        }
        for run in &runs {
            assert!(text.contains(&run.report.total_cycles.to_string()));
        }
        assert!(text.contains("vs first"));
    }

    #[test]
    fn errors() {
        assert_eq!(render_report(&[], OutputFormat::Csv), Err(ScenarioError::NoRuns));
        assert!(matches!("xml".parse::<OutputFormat>(), Err(ScenarioError::UnknownFormat(_))));
        let bad = "scenario,variant,clock_hz,kind,key,cycles,seconds,percent\ns,v,1,bogus,k,1,1,\n";
        assert!(matches!(parse_csv(bad), Err(ScenarioError::Parse(_))));
    }
}
