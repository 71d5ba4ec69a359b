//! Cross-operator comparison of unfiltered and filtered campaigns.

use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{run_filtered, run_unfiltered, FuzzOptions, FuzzReport, PipelineError, Prefilter};
use crate::artifact::{child_seed, Provenance};
use crate::datagen::Generator;
use crate::registry::OperatorSpec;
use crate::stats::{cohens_d, effect_size_label, ks_normal, wilcoxon_rank_sum, StatResult};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub n: usize,
    pub seed: u64,
    pub generator: Generator,
    pub options: FuzzOptions,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            n: 5_000,
            seed: 0,
            generator: Generator::Weak(crate::datagen::Relaxation::Partial),
            options: FuzzOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorComparison {
    pub operator: String,
    pub unfiltered: FuzzReport,
    pub filtered: FuzzReport,
}

/// One row of the summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub arm: String,
    pub avg_time_s: f64,
    pub total_time_s: f64,
    pub invalid: u64,
    /// Mean over operators; an operator that executed nothing counts as 0.
    pub pass_rate: f64,
    pub valid_per_second: f64,
}

fn summarize(arm: &str, reports: &[&FuzzReport]) -> ArmSummary {
    let n = reports.len().max(1) as f64;
    let total: f64 = reports.iter().map(|r| r.timings.total_s()).sum();
    ArmSummary {
        arm: arm.to_string(),
        avg_time_s: total / n,
        total_time_s: total,
        invalid: reports.iter().map(|r| r.invalid_executed).sum(),
        pass_rate: reports.iter().map(|r| r.pass_rate_or_zero()).sum::<f64>() / n,
        valid_per_second: reports.iter().map(|r| r.valid_per_second.unwrap_or(0.0)).sum::<f64>() / n,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub operators: Vec<OperatorComparison>,
    /// Operators whose campaign failed, with the error.
    pub incomplete: Vec<(String, String)>,
    pub unfiltered: ArmSummary,
    pub filtered: ArmSummary,
    pub ks_unfiltered: Result<StatResult, String>,
    pub ks_filtered: Result<StatResult, String>,
    /// Filtered against unfiltered per-operator pass rates.
    pub wilcoxon: Result<StatResult, String>,
    pub cohens_d: Result<f64, String>,
    pub effect_size: Option<String>,
}

impl CampaignResult {
    pub fn pass_rates(&self) -> (Vec<f64>, Vec<f64>) {
        self.operators
            .iter()
            .map(|c| (c.unfiltered.pass_rate_or_zero(), c.filtered.pass_rate_or_zero()))
            .unzip()
    }
}

fn run_pair(op: &OperatorSpec, filter: &dyn Prefilter, cfg: &CampaignConfig) -> Result<OperatorComparison, PipelineError> {
    let seed = child_seed(cfg.seed, &op.name, 0);
    Ok(OperatorComparison {
        operator: op.name.clone(),
        unfiltered: run_unfiltered(op, cfg.generator, cfg.n, seed, &cfg.options)?,
        filtered: run_filtered(op, cfg.generator, filter, cfg.n, seed, &cfg.options)?,
    })
}

/// Runs both arms for every operator with paired seeds, then compares the
/// per-operator pass-rate distributions.
pub fn compare(entries: &[(&OperatorSpec, &dyn Prefilter)], cfg: &CampaignConfig) -> Result<CampaignResult, PipelineError> {
    if entries.len() < 2 {
        return Err(PipelineError::TooFewOperators(entries.len()));
    }
    let mut operators = Vec::new();
    let mut incomplete = Vec::new();
    for (op, filter) in entries {
        match run_pair(op, *filter, cfg) {
            Ok(c) => operators.push(c),
            Err(e) => incomplete.push((op.name.clone(), e.to_string())),
        }
    }
    let unf: Vec<&FuzzReport> = operators.iter().map(|c| &c.unfiltered).collect();
    let fil: Vec<&FuzzReport> = operators.iter().map(|c| &c.filtered).collect();
    let mut result = CampaignResult {
        unfiltered: summarize("unfiltered", &unf),
        filtered: summarize("filtered", &fil),
        operators,
        incomplete,
        ks_unfiltered: Err(String::new()),
        ks_filtered: Err(String::new()),
        wilcoxon: Err(String::new()),
        cohens_d: Err(String::new()),
        effect_size: None,
    };
    let (a, b) = result.pass_rates();
    result.ks_unfiltered = ks_normal(&a).map_err(|e| e.to_string());
    result.ks_filtered = ks_normal(&b).map_err(|e| e.to_string());
    result.wilcoxon = wilcoxon_rank_sum(&b, &a).map_err(|e| e.to_string());
    result.cohens_d = cohens_d(&b, &a).map_err(|e| e.to_string());
    result.effect_size = result.cohens_d.as_ref().ok().map(|&d| effect_size_label(d).to_string());
    Ok(result)
}

/// Summary table: one row per arm.
pub fn write_campaign_csv<W: Write>(
    result: &CampaignResult,
    provenance: Option<&Provenance>,
    mut out: W,
) -> std::io::Result<()> {
    if let Some(p) = provenance {
        writeln!(out, "{}", p.csv_comment())?;
    }
    writeln!(out, "arm,avg_time_s,total_time_s,invalid,pass_rate,valid_per_s")?;
    for s in [&result.unfiltered, &result.filtered] {
        writeln!(
            out,
            "{},{:.3},{:.3},{},{:.4},{:.2}",
            s.arm, s.avg_time_s, s.total_time_s, s.invalid, s.pass_rate, s.valid_per_second
        )?;
    }
    Ok(())
}
