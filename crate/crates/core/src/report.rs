//! Per-fork analysis and the reports built from it: a patch × fork summary
//! table, a per-heuristic detail table, CSV and JSON records, and plot data.
//!
//! Summary cells hold whole days (halves rounded up) and the winning
//! heuristic. `-` marks patches not found in the fork, `NA` patches that
//! predate it. Averages and fix counts skip `NA` cells; averages also skip
//! `-` cells and are taken over the displayed whole-day values.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::archive::EventIndex;
use crate::graph::{build_graph, CommitGraph, CompletionReport, GraphError};
use crate::heuristics::{
    estimate_all, round_days, secs_to_days, EstimateStatus, Heuristic, PatchSpec,
    PropagationEstimate, TagSets,
};
use crate::model::Timestamp;
use crate::provider::Provider;

pub const ESTIMATES_SCHEMA: &str = "gitwatch-estimates/1";

pub const CSV_COLUMNS: [&str; 9] = [
    "patch_label",
    "published_date",
    "fork",
    "delta_pcf_days",
    "delta_pef_days",
    "delta_ptf_days",
    "combined_days",
    "status",
    "flags",
];

pub const PLOT_COLUMNS: [&str; 5] = [
    "fork",
    "patch_label",
    "upstream_date",
    "delta_days",
    "heuristic",
];

/// Everything computed for one fork.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForkAnalysis {
    pub fork: String,
    /// Why the graph could not be built, when it could not.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub completion: CompletionReport,
    /// One estimate per patch, in patch order.
    pub estimates: Vec<PropagationEstimate>,
}

/// Builds the fork's graph through `provider` and estimates every patch.
pub fn analyze_fork(
    index: &EventIndex,
    upstream: &str,
    fork: &str,
    provider: &Provider,
    patches: &[PatchSpec],
) -> Result<(CommitGraph, ForkAnalysis), GraphError> {
    let (graph, completion) = build_graph(index, upstream, fork, provider)?;
    let estimates = analyze_graph(&graph, index, patches);
    Ok((
        graph,
        ForkAnalysis {
            fork: fork.to_string(),
            error: None,
            completion,
            estimates,
        },
    ))
}

pub fn analyze_graph(
    graph: &CommitGraph,
    index: &EventIndex,
    patches: &[PatchSpec],
) -> Vec<PropagationEstimate> {
    let tags = TagSets::from_index(index, graph);
    estimate_all(graph, index, &tags, patches)
}

impl ForkAnalysis {
    /// A fork whose graph could not be built: every patch is reported as
    /// graph-incomplete.
    pub fn failed(fork: &str, error: &GraphError, patches: &[PatchSpec]) -> Self {
        let estimates = patches
            .iter()
            .map(|p| PropagationEstimate {
                patch: p.label.clone(),
                fork: fork.to_string(),
                published_date: p.published_date,
                upstream_author_ts: None,
                pcf: None,
                pef: None,
                ptf: None,
                combined: None,
                status: EstimateStatus::GraphIncomplete,
                flags: [crate::heuristics::EstimateFlag::GraphIncomplete].into(),
                delay_since_publication_secs: None,
                per_commit: Vec::new(),
            })
            .collect();
        Self {
            fork: fork.to_string(),
            error: Some(error.to_string()),
            completion: CompletionReport::default(),
            estimates,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub upstream: String,
    pub patches: Vec<PatchSpec>,
    pub forks: Vec<ForkAnalysis>,
}

fn days_cell(secs: Option<i64>) -> String {
    secs.map_or_else(|| "-".to_string(), |s| round_days(s).to_string())
}

fn frac_days(secs: Option<i64>) -> String {
    secs.map(|s| secs_to_days(s).to_string())
        .unwrap_or_default()
}

fn date(ts: Option<Timestamp>) -> String {
    ts.map(Timestamp::to_date).unwrap_or_default()
}

/// Text table with left-aligned first columns and right-aligned numbers.
fn render(rows: &[Vec<String>], left_aligned: usize) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| {
            rows.iter()
                .filter_map(|r| r.get(c))
                .map(|s| s.chars().count())
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    for row in rows {
        let mut line = String::new();
        for (c, cell) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            if c < left_aligned {
                let _ = write!(line, "{cell:<w$}", w = widths[c]);
            } else {
                let _ = write!(line, "{cell:>w$}", w = widths[c]);
            }
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}

/// Mean of the cells that hold a number, two decimals; `-` when none do.
pub fn average_cell(values: &[i64]) -> String {
    if values.is_empty() {
        "-".to_string()
    } else {
        format!(
            "{:.2}",
            values.iter().sum::<i64>() as f64 / values.len() as f64
        )
    }
}

impl Report {
    pub fn new(
        upstream: impl Into<String>,
        patches: Vec<PatchSpec>,
        forks: Vec<ForkAnalysis>,
    ) -> Self {
        Self {
            schema: ESTIMATES_SCHEMA.to_string(),
            upstream: upstream.into(),
            patches,
            forks,
        }
    }

    pub fn estimates(&self) -> impl Iterator<Item = &PropagationEstimate> {
        // Patch-major, fork-minor: the order of the CSV rows.
        (0..self.patches.len())
            .flat_map(move |p| self.forks.iter().filter_map(move |f| f.estimates.get(p)))
    }

    /// True when there is at least one estimate and none of them found or
    /// ruled out the patch.
    pub fn all_failed(&self) -> bool {
        let mut any = false;
        for e in self.estimates() {
            any = true;
            if !e.failed() {
                return false;
            }
        }
        any
    }

    fn has_upstream_column(&self) -> bool {
        self.patches.iter().any(|p| p.published_date.is_some())
    }

    /// Upstream patch date minus publication date, for the upstream column.
    fn upstream_delay(&self, patch: usize) -> Option<i64> {
        let published = self.patches[patch].published_date?;
        let authored = self
            .forks
            .iter()
            .find_map(|f| f.estimates.get(patch)?.upstream_author_ts)?;
        Some(authored.0 - published.0)
    }

    pub fn summary_cell(e: &PropagationEstimate) -> String {
        match (e.status, &e.combined) {
            (EstimateStatus::PredatesFork, _) => "NA".to_string(),
            (EstimateStatus::Found, Some(c)) => {
                format!("{} ({})", round_days(c.delta_secs), c.heuristic)
            }
            _ => "-".to_string(),
        }
    }

    /// One row per patch, one column per fork.
    pub fn summary_table(&self) -> String {
        let upstream_col = self.has_upstream_column();
        let mut header = vec!["Patch".to_string(), "Published".to_string()];
        if upstream_col {
            header.push("Upstream".to_string());
        }
        header.extend(self.forks.iter().map(|f| f.fork.clone()));
        let mut rows = vec![header];

        let mut upstream_values = Vec::new();
        let mut upstream_known = 0;
        for (p, spec) in self.patches.iter().enumerate() {
            let mut row = vec![spec.label.clone(), date(spec.published_date)];
            if upstream_col {
                let d = self.upstream_delay(p);
                if spec.published_date.is_some() {
                    upstream_known += 1;
                }
                if let Some(d) = d {
                    upstream_values.push(round_days(d));
                }
                row.push(d.map_or_else(|| "-".to_string(), |d| round_days(d).to_string()));
            }
            for f in &self.forks {
                row.push(
                    f.estimates
                        .get(p)
                        .map(Self::summary_cell)
                        .unwrap_or_default(),
                );
            }
            rows.push(row);
        }

        let mut avg = vec![String::new(), "Average".to_string()];
        let mut fixes = vec![String::new(), "Number of fixes".to_string()];
        if upstream_col {
            avg.push(average_cell(&upstream_values));
            fixes.push(format!("{}/{}", upstream_values.len(), upstream_known));
        }
        for f in &self.forks {
            let (values, applicable) = column_stats(&f.estimates);
            avg.push(average_cell(&values));
            fixes.push(format!("{}/{}", values.len(), applicable));
        }
        rows.push(avg);
        rows.push(fixes);
        render(&rows, 2)
    }

    /// Every heuristic for every (patch, fork) pair, with per-commit rows for
    /// multi-commit patches.
    pub fn detail_table(&self) -> String {
        let mut rows = vec![[
            "Patch", "Fork", "PCF", "PEF", "PTF", "Best", "Status", "Flags",
        ]
        .map(String::from)
        .to_vec()];
        for e in self.estimates() {
            rows.push(vec![
                e.patch.clone(),
                e.fork.clone(),
                days_cell(e.delta_secs(Heuristic::Pcf)),
                days_cell(e.delta_secs(Heuristic::Pef)),
                days_cell(e.delta_secs(Heuristic::Ptf)),
                e.combined.as_ref().map_or_else(
                    || "-".to_string(),
                    |c| format!("{} ({})", round_days(c.delta_secs), c.heuristic),
                ),
                e.status.as_str().to_string(),
                flags(e),
            ]);
            if e.per_commit.len() > 1 {
                for b in &e.per_commit {
                    let d = |f: &Option<crate::heuristics::Finding>| {
                        days_cell(f.as_ref().map(|f| f.delta_secs))
                    };
                    rows.push(vec![
                        format!("  {}", &b.commit.to_hex()[..12]),
                        String::new(),
                        d(&b.pcf),
                        d(&b.pef),
                        d(&b.ptf),
                        String::new(),
                        if b.resolved {
                            String::new()
                        } else {
                            "unresolved".to_string()
                        },
                        String::new(),
                    ]);
                }
            }
        }
        render(&rows, 2)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_COLUMNS).expect("in-memory write");
        for e in self.estimates() {
            w.write_record([
                e.patch.clone(),
                date(e.published_date),
                e.fork.clone(),
                frac_days(e.delta_secs(Heuristic::Pcf)),
                frac_days(e.delta_secs(Heuristic::Pef)),
                frac_days(e.delta_secs(Heuristic::Ptf)),
                frac_days(e.combined.as_ref().map(|c| c.delta_secs)),
                e.status.as_str().to_string(),
                flags(e),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    /// Figure-style series: one row per heuristic that found the patch.
    pub fn plot_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(PLOT_COLUMNS).expect("in-memory write");
        for f in &self.forks {
            for e in &f.estimates {
                if e.status != EstimateStatus::Found {
                    continue;
                }
                for h in Heuristic::ALL {
                    if let Some(d) = e.delta_secs(h) {
                        w.write_record([
                            f.fork.clone(),
                            e.patch.clone(),
                            date(e.upstream_author_ts),
                            secs_to_days(d).to_string(),
                            h.as_str().to_string(),
                        ])
                        .expect("in-memory write");
                    }
                }
            }
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

fn flags(e: &PropagationEstimate) -> String {
    e.flags
        .iter()
        .map(|f| f.as_str())
        .collect::<Vec<_>>()
        .join(";")
}

/// Found whole-day values and the number of non-`NA` cells of one column.
fn column_stats(estimates: &[PropagationEstimate]) -> (Vec<i64>, usize) {
    let mut values = Vec::new();
    let mut applicable = 0;
    for e in estimates {
        if e.status == EstimateStatus::PredatesFork {
            continue;
        }
        applicable += 1;
        if let (EstimateStatus::Found, Some(c)) = (e.status, &e.combined) {
            values.push(round_days(c.delta_secs));
        }
    }
    (values, applicable)
}
