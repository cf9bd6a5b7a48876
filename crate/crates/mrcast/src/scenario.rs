//! Scenario and report file formats.
//!
//! Scenarios are TOML, written by hand and validated on load with the first
//! violated rule called out by name. Reports are JSON, fully resolved and
//! deterministic apart from the timestamp, so a report can be diffed,
//! replayed, and compared byte for byte.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dist::{Alphabet, JointPmf, Partition, Pmf};
use crate::error::{Error, Result};
use crate::protocol::{
    cost_compare, run_hierarchical_broadcast, run_naive_unicast, validate, CostComparison,
    RunParams, RunReport, Scenario, Scheme, SizeOverrides, Validated,
};

pub const SCENARIO_VERSION: u32 = 1;
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphabetsSection {
    pub side1: Vec<String>,
    pub side2: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointSection {
    /// Row-major masses; rows index `side1`.
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecoderSection {
    /// Target mass per symbol name; omitted symbols carry zero mass. Falls
    /// back to the file's `shared_target` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<BTreeMap<String, f64>>,
    /// Function value per symbol name; omitted symbols evaluate to zero.
    pub f: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct OverridesSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_c: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub naive: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_ref: Option<Vec<Vec<usize>>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsSection {
    /// Refinement slack (nats).
    pub t: f64,
    /// Block-stage slack (nats).
    pub t_c: f64,
    /// Transmissions per run.
    pub k: usize,
    pub seed: u64,
    #[serde(default)]
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection_cap: Option<u64>,
    #[serde(default)]
    pub atol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_overrides: Option<OverridesSection>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionSection {
    pub side1: BTreeMap<String, usize>,
    pub side2: BTreeMap<String, usize>,
}

/// The on-disk scenario schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioFile {
    pub version: u32,
    pub mode: String,
    pub alphabets: AlphabetsSection,
    pub joint: JointSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shared_target: Option<BTreeMap<String, f64>>,
    pub decoders: Vec<DecoderSection>,
    pub params: ParamsSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<PartitionSection>,
}

pub fn parse_scenario_toml(text: &str) -> Result<ScenarioFile> {
    toml::from_str(text).map_err(|e| Error::invalid_scenario("parse", e.to_string()))
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioFile> {
    let text = std::fs::read_to_string(path)?;
    parse_scenario_toml(&text)
}

pub fn emit_scenario_toml(file: &ScenarioFile) -> String {
    toml::to_string_pretty(file).expect("scenario schema serializes")
}

fn mass_map_to_vec(
    map: &BTreeMap<String, f64>,
    alphabet: &Alphabet,
    what: &str,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; alphabet.len()];
    for (name, &value) in map {
        let idx = alphabet.index_of(name).ok_or_else(|| {
            Error::invalid_scenario(
                "unknown-symbol",
                format!("{what} names {name:?}, which is not in the alphabet"),
            )
        })?;
        out[idx] = value;
    }
    Ok(out)
}

impl ScenarioFile {
    /// Builds the runnable scenario, naming the first violated rule.
    pub fn resolve(&self) -> Result<Scenario> {
        if self.version != SCENARIO_VERSION {
            return Err(Error::invalid_scenario(
                "version",
                format!("expected version {SCENARIO_VERSION}, got {}", self.version),
            ));
        }
        let mode = match self.mode.as_str() {
            "naive" => Scheme::Naive,
            "hierarchical" | "hier" => Scheme::Hierarchical,
            "both" => Scheme::Both,
            other => {
                return Err(Error::invalid_scenario(
                    "mode",
                    format!("unknown mode {other:?}; use naive, hierarchical, or both"),
                ))
            }
        };
        let a1 = Alphabet::new(self.alphabets.side1.clone())
            .map_err(|e| Error::invalid_scenario("alphabet", e.to_string()))?;
        let a2 = Alphabet::new(self.alphabets.side2.clone())
            .map_err(|e| Error::invalid_scenario("alphabet", e.to_string()))?;
        let joint = JointPmf::new(a1.clone(), a2.clone(), self.joint.rows.clone())
            .map_err(|e| Error::invalid_scenario("joint", e.to_string()))?;

        let mut targets = Vec::with_capacity(self.decoders.len());
        let mut functions = Vec::with_capacity(self.decoders.len());
        for (i, dec) in self.decoders.iter().enumerate() {
            let alphabet = if i == 0 { &a1 } else { &a2 };
            let map = dec
                .target
                .as_ref()
                .or(self.shared_target.as_ref())
                .ok_or_else(|| {
                    Error::invalid_scenario(
                        "target-missing",
                        format!("decoder {i} has no target and no shared_target is set"),
                    )
                })?;
            let mass = mass_map_to_vec(map, alphabet, &format!("decoder {i} target"))?;
            targets.push(
                Pmf::new(alphabet.clone(), mass)
                    .map_err(|e| Error::invalid_scenario("target", format!("decoder {i}: {e}")))?,
            );
            functions.push(mass_map_to_vec(
                &dec.f,
                alphabet,
                &format!("decoder {i} function"),
            )?);
        }

        let partition_override = match &self.partition {
            None => None,
            Some(p) => {
                let mut l1 = vec![usize::MAX; a1.len()];
                for (name, &block) in &p.side1 {
                    let idx = a1.index_of(name).ok_or_else(|| {
                        Error::invalid_scenario(
                            "partition-symbols",
                            format!("side1 partition names unknown symbol {name:?}"),
                        )
                    })?;
                    l1[idx] = block;
                }
                let mut l2 = vec![usize::MAX; a2.len()];
                for (name, &block) in &p.side2 {
                    let idx = a2.index_of(name).ok_or_else(|| {
                        Error::invalid_scenario(
                            "partition-symbols",
                            format!("side2 partition names unknown symbol {name:?}"),
                        )
                    })?;
                    l2[idx] = block;
                }
                if l1.contains(&usize::MAX) || l2.contains(&usize::MAX) {
                    return Err(Error::invalid_scenario(
                        "partition-symbols",
                        "explicit partition must label every symbol",
                    ));
                }
                let p1 = Partition::new(a1.clone(), l1)
                    .map_err(|e| Error::invalid_scenario("partition", e.to_string()))?;
                let p2 = Partition::new(a2.clone(), l2)
                    .map_err(|e| Error::invalid_scenario("partition", e.to_string()))?;
                Some((p1, p2))
            }
        };

        let overrides = match &self.params.n_overrides {
            None => SizeOverrides::default(),
            Some(o) => SizeOverrides {
                n_c: o.n_c,
                naive_n: o.naive.clone(),
                n_ref: o.n_ref.clone(),
            },
        };

        Ok(Scenario {
            joint,
            targets,
            functions,
            params: RunParams {
                t: self.params.t,
                t_c: self.params.t_c,
                reps: self.params.k,
                seed: self.params.seed,
                label: self.params.label.clone(),
                rejection_cap: self.params.rejection_cap,
                atol: self.params.atol,
                overrides,
            },
            mode,
            partition_override,
        })
    }

    /// Resolve and validate in one step.
    pub fn validate(&self) -> Result<Validated> {
        validate(self.resolve()?)
    }
}

/// One trial's outcome under the scenario's scheme(s).
#[derive(Debug, Clone, Serialize)]
pub struct TrialOutput {
    pub trial: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub naive: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hierarchical: Option<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<CostComparison>,
}

/// Mean and standard error of per-trial statistics.
#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub trials: usize,
    pub mean_abs_bias: Vec<f64>,
    pub stderr_abs_bias: Vec<f64>,
    pub mean_tv: Vec<f64>,
    pub mean_total_bits: f64,
    pub stderr_total_bits: f64,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn aggregate(runs: &[&RunReport]) -> Aggregate {
    let decoders = runs.first().map_or(0, |r| r.decoders.len());
    let mut mean_abs_bias = Vec::with_capacity(decoders);
    let mut stderr_abs_bias = Vec::with_capacity(decoders);
    let mut mean_tv = Vec::with_capacity(decoders);
    for i in 0..decoders {
        let biases: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.decoders[i].abs_bias)
            .collect();
        let (m, s) = mean_stderr(&biases);
        mean_abs_bias.push(m);
        stderr_abs_bias.push(s);
        let tvs: Vec<f64> = runs
            .iter()
            .filter_map(|r| r.decoders[i].tv_to_target)
            .collect();
        mean_tv.push(mean_stderr(&tvs).0);
    }
    let bits: Vec<f64> = runs.iter().map(|r| r.cost.total_bits).collect();
    let (mean_total_bits, stderr_total_bits) = mean_stderr(&bits);
    Aggregate {
        trials: runs.len(),
        mean_abs_bias,
        stderr_abs_bias,
        mean_tv,
        mean_total_bits,
        stderr_total_bits,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SchemeSection {
    pub aggregate: Aggregate,
    pub runs: Vec<RunReport>,
}

/// Deterministic report content (everything but the envelope).
#[derive(Debug, Clone, Serialize)]
pub struct ReportBody {
    pub scheme: String,
    pub trials: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub naive: Option<SchemeSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hierarchical: Option<SchemeSection>,
    /// Naive-versus-hierarchical comparison of the first trial.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<CostComparison>,
    /// Mean over trials of (naive total bits - hierarchical total bits).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_savings_bits: Option<f64>,
}

/// The on-disk report: envelope plus deterministic body, with the scenario
/// embedded for replay.
#[derive(Debug, Clone, Serialize)]
pub struct ReportFile {
    pub version: u32,
    pub tool: String,
    pub timestamp_unix: u64,
    pub scenario: ScenarioFile,
    pub body: ReportBody,
}

fn scheme_of(mode: Scheme, requested: Option<Scheme>) -> Scheme {
    requested.unwrap_or(mode)
}

fn run_one_trial(file: &ScenarioFile, scheme: Scheme, trial: usize) -> Result<TrialOutput> {
    let mut scenario = file.resolve()?;
    let base = if scenario.params.label.is_empty() {
        format!("trial/{trial}")
    } else {
        format!("{}/trial/{trial}", scenario.params.label)
    };
    scenario.params.label = base;
    let validated = validate(scenario)?;
    let naive = match scheme {
        Scheme::Naive | Scheme::Both => Some(run_naive_unicast(&validated)?),
        Scheme::Hierarchical => None,
    };
    let hierarchical = match scheme {
        Scheme::Hierarchical | Scheme::Both => Some(run_hierarchical_broadcast(&validated)?),
        Scheme::Naive => None,
    };
    let comparison = match (&naive, &hierarchical) {
        (Some(a), Some(b)) => Some(cost_compare(a, b)?),
        _ => None,
    };
    Ok(TrialOutput {
        trial,
        naive,
        hierarchical,
        comparison,
    })
}

/// Runs `trials` independent trials (sub-seeded by trial label) and
/// assembles the deterministic report body. `workers` caps the thread
/// count; aggregation order is fixed by trial index either way.
pub fn run_trials(
    file: &ScenarioFile,
    requested: Option<Scheme>,
    trials: usize,
    workers: usize,
) -> Result<ReportBody> {
    let scheme = scheme_of(file.resolve()?.mode, requested);
    let mut outputs: Vec<(usize, Result<TrialOutput>)> = Vec::with_capacity(trials);
    if workers <= 1 {
        for i in 0..trials {
            outputs.push((i, run_one_trial(file, scheme, i)));
        }
    } else {
        std::thread::scope(|s| {
            let mut handles = Vec::new();
            for w in 0..workers {
                let file = &file;
                handles.push(s.spawn(move || {
                    (w..trials)
                        .step_by(workers)
                        .map(|i| (i, run_one_trial(file, scheme, i)))
                        .collect::<Vec<_>>()
                }));
            }
            for h in handles {
                outputs.extend(h.join().expect("trial worker panicked"));
            }
        });
        outputs.sort_by_key(|(i, _)| *i);
    }

    let mut trials_out = Vec::with_capacity(trials);
    for (_, result) in outputs {
        trials_out.push(result?);
    }

    let naive_runs: Vec<&RunReport> = trials_out.iter().filter_map(|t| t.naive.as_ref()).collect();
    let hier_runs: Vec<&RunReport> = trials_out
        .iter()
        .filter_map(|t| t.hierarchical.as_ref())
        .collect();
    let mean_savings_bits = if !naive_runs.is_empty() && !hier_runs.is_empty() {
        let diffs: Vec<f64> = naive_runs
            .iter()
            .zip(&hier_runs)
            .map(|(a, b)| a.cost.total_bits - b.cost.total_bits)
            .collect();
        Some(mean_stderr(&diffs).0)
    } else {
        None
    };

    Ok(ReportBody {
        scheme: match scheme {
            Scheme::Naive => "naive".into(),
            Scheme::Hierarchical => "hierarchical".into(),
            Scheme::Both => "both".into(),
        },
        trials,
        comparison: trials_out.first().and_then(|t| t.comparison.clone()),
        naive: if naive_runs.is_empty() {
            None
        } else {
            Some(SchemeSection {
                aggregate: aggregate(&naive_runs),
                runs: trials_out.iter().filter_map(|t| t.naive.clone()).collect(),
            })
        },
        hierarchical: if hier_runs.is_empty() {
            None
        } else {
            Some(SchemeSection {
                aggregate: aggregate(&hier_runs),
                runs: trials_out
                    .iter()
                    .filter_map(|t| t.hierarchical.clone())
                    .collect(),
            })
        },
        mean_savings_bits,
    })
}

/// Wraps a body in the report envelope.
pub fn report_file(scenario: ScenarioFile, body: ReportBody) -> ReportFile {
    ReportFile {
        version: REPORT_VERSION,
        tool: format!("mrcast {}", env!("CARGO_PKG_VERSION")),
        timestamp_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        scenario,
        body,
    }
}

pub fn report_to_json(report: &ReportFile) -> String {
    serde_json::to_string_pretty(report).expect("report schema serializes")
}
