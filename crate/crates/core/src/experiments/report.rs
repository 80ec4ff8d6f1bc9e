//! Report values and their file renderings.
//!
//! Every rendering is a pure function of the report, so emitting twice gives identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::Experiment;
use crate::architectures::{SweepFamily, SWEEP_AGENT_COUNTS};
use crate::error::{Error, Result};
use crate::metrics::{Metric, MetricsSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Markdown,
    Plotdata,
}

impl OutputFormat {
    pub const ALL: [OutputFormat; 3] = [
        OutputFormat::Csv,
        OutputFormat::Markdown,
        OutputFormat::Plotdata,
    ];
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            "plotdata" => Ok(OutputFormat::Plotdata),
            _ => Err(Error::validation(
                "format",
                format!("unknown output format `{s}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    /// Row label as printed in the published table.
    pub label: String,
    pub summary: MetricsSummary,
}

/// One target cell compared against the simulation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub profile_id: String,
    pub metric: Metric,
    pub target: f64,
    pub simulated: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Verdict {
    pub fn new(
        profile_id: &str,
        metric: Metric,
        target: f64,
        simulated: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            profile_id: profile_id.to_string(),
            metric,
            target,
            simulated,
            tolerance,
            passed: (simulated - target).abs() <= tolerance,
        }
    }
}

/// A structural claim over several cells, e.g. an ordering or a ratio.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub experiment: Experiment,
    pub seed: u64,
    pub task_seed: u64,
    /// Size of the generated task set (before any stress filtering).
    pub task_count: usize,
    pub fingerprint: String,
    pub model_digest: String,
    pub rows: Vec<ReportRow>,
    pub verdicts: Vec<Verdict>,
    pub checks: Vec<Check>,
}

/// Columns of the published table for each experiment.
pub fn table_metrics(experiment: Experiment) -> &'static [Metric] {
    use Metric::*;
    match experiment {
        Experiment::Comparison => &Metric::ALL,
        Experiment::Ablation => &[
            FunctionalPct,
            SafePct,
            ViolationsPer1k,
            PoisonPer1k,
            EscalationPct,
            AuditPct,
            MeanCost,
            P95Latency,
        ],
        Experiment::Stress => &[
            SafePct,
            ViolationsPer1k,
            PoisonPer1k,
            EscalationPct,
            AuditPct,
        ],
        Experiment::Sweep => &[SafePct, MeanCost],
    }
}

fn fmt_metric(metric: Metric, v: f64) -> String {
    format!("{v:.*}", metric.precision())
}

impl ExperimentReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed) && self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_verdicts(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.passed)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn summary(&self, profile_id: &str) -> Option<&MetricsSummary> {
        self.rows
            .iter()
            .map(|r| &r.summary)
            .find(|s| s.arch_id == profile_id)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn header(&self, open: &str, close: &str) -> String {
        format!(
            "{open}archsim {} | seed {} | task seed {} | tasks {} | fingerprint {} | model {}{close}\n",
            self.experiment, self.seed, self.task_seed, self.task_count, self.fingerprint, self.model_digest
        )
    }

    /// One row per run: the run id and all ten metrics.
    pub fn to_csv(&self) -> String {
        let mut out = self.header("# ", "");
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut head = vec!["run"];
        head.extend(Metric::ALL.iter().map(|m| m.name()));
        w.write_record(&head).expect("write to memory");
        for row in &self.rows {
            let mut rec = vec![row.summary.arch_id.clone()];
            rec.extend(Metric::ALL.iter().map(|&m| row.summary.get(m).to_string()));
            w.write_record(&rec).expect("write to memory");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8"));
        out
    }

    pub fn verdicts_csv(&self) -> String {
        let mut out = self.header("# ", "");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "run",
            "metric",
            "target",
            "simulated",
            "tolerance",
            "passed",
        ])
        .expect("write to memory");
        for v in &self.verdicts {
            w.write_record([
                v.profile_id.clone(),
                v.metric.name().to_string(),
                v.target.to_string(),
                v.simulated.to_string(),
                v.tolerance.to_string(),
                v.passed.to_string(),
            ])
            .expect("write to memory");
        }
        for c in &self.checks {
            w.write_record([
                "check".to_string(),
                c.name.clone(),
                String::new(),
                c.detail.clone(),
                String::new(),
                c.passed.to_string(),
            ])
            .expect("write to memory");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("flush to memory")).expect("utf-8"));
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = self.header("<!-- ", " -->");
        let _ = writeln!(out, "\n## {}\n", self.experiment.title());
        match self.experiment {
            Experiment::Sweep => self.sweep_table(&mut out),
            e => {
                let metrics = table_metrics(e);
                let first = if e == Experiment::Ablation {
                    "Variant"
                } else {
                    "Architecture"
                };
                let _ = write!(out, "| {first} |");
                for m in metrics {
                    let _ = write!(out, " {} |", m.heading());
                }
                out.push_str("\n|---|");
                out.push_str(&"---:|".repeat(metrics.len()));
                out.push('\n');
                for row in &self.rows {
                    let _ = write!(out, "| {} |", row.label);
                    for &m in metrics {
                        let _ = write!(out, " {} |", fmt_metric(m, row.summary.get(m)));
                    }
                    out.push('\n');
                }
            }
        }

        let passed = self.verdicts.iter().filter(|v| v.passed).count();
        let _ = writeln!(
            out,
            "\n### Targets ({passed}/{} within tolerance)\n",
            self.verdicts.len()
        );
        out.push_str("| Run | Metric | Target | Simulated | Tolerance | Verdict |\n|---|---|---:|---:|---:|---|\n");
        for v in &self.verdicts {
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} |",
                v.profile_id,
                v.metric.name(),
                fmt_metric(v.metric, v.target),
                fmt_metric(v.metric, v.simulated),
                v.tolerance,
                if v.passed { "pass" } else { "FAIL" }
            );
        }
        if !self.checks.is_empty() {
            out.push_str("\n### Checks\n\n");
            for c in &self.checks {
                let _ = writeln!(
                    out,
                    "- [{}] {}: {}",
                    if c.passed { "pass" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
        }
        out
    }

    fn sweep_table(&self, out: &mut String) {
        out.push_str("| Agents |");
        for m in table_metrics(Experiment::Sweep) {
            for f in SweepFamily::ALL {
                let _ = write!(out, " {} {} |", f.label(), m.heading());
            }
        }
        out.push_str("\n|---:|");
        out.push_str(&"---:|".repeat(2 * table_metrics(Experiment::Sweep).len()));
        out.push('\n');
        for n in SWEEP_AGENT_COUNTS {
            let _ = write!(out, "| {n} |");
            for &m in table_metrics(Experiment::Sweep) {
                for f in SweepFamily::ALL {
                    let cell = self
                        .summary(&format!("{}_{n}", f.key()))
                        .map(|s| fmt_metric(m, s.get(m)))
                        .unwrap_or_default();
                    let _ = write!(out, " {cell} |");
                }
            }
            out.push('\n');
        }
    }

    /// Plot-data files as `(file name, contents)`. Only the sweep has any: one file per
    /// metric, one index block per family, `n value` per line.
    pub fn plotdata(&self) -> Vec<(String, String)> {
        if self.experiment != Experiment::Sweep {
            return Vec::new();
        }
        [
            (Metric::SafePct, "sweep_safe.dat"),
            (Metric::MeanCost, "sweep_cost.dat"),
        ]
        .into_iter()
        .map(|(metric, file)| {
            let mut out = self.header("# ", "");
            let _ = writeln!(out, "# agents {}", metric.name());
            for (i, f) in SweepFamily::ALL.iter().enumerate() {
                if i > 0 {
                    out.push_str("\n\n");
                }
                let _ = writeln!(out, "# {}", f.label());
                for n in SWEEP_AGENT_COUNTS {
                    if let Some(s) = self.summary(&format!("{}_{n}", f.key())) {
                        let _ = writeln!(out, "{n} {}", s.get(metric));
                    }
                }
            }
            (file.to_string(), out)
        })
        .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes the files of `format` into `dir` and returns their paths.
    pub fn emit(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let name = self.experiment.name();
        let files: Vec<(String, String)> = match format {
            OutputFormat::Csv => vec![
                (format!("{name}.csv"), self.to_csv()),
                (format!("{name}_verdicts.csv"), self.verdicts_csv()),
            ],
            OutputFormat::Markdown => vec![(format!("{name}.md"), self.to_markdown())],
            OutputFormat::Plotdata => self.plotdata(),
        };
        files
            .into_iter()
            .map(|(file, text)| {
                let path = dir.join(file);
                std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                Ok(path)
            })
            .collect()
    }
}
