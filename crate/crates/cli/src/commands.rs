use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};

use serde::Serialize;
use shapefuzz::bridge::{self, BridgeClient, BridgeResponse, MAPPED_OPS, UNSUPPORTED};
use shapefuzz::datagen::{generate_dataset, read_jsonl};
use shapefuzz::encoder::write_csv;
use shapefuzz::experiment::{fit_dataset, learnability, train_repetition, RepetitionResult, GENERALIZATION_REP};
use shapefuzz::learners::{load_model, predict_batch, save_model};
use shapefuzz::metrics::{evaluate, fmt_pct, EvalReport};
use shapefuzz::pipeline::campaign::{compare as compare_campaign, write_campaign_csv, CampaignConfig};
use shapefuzz::pipeline::{bug_campaign, generalize as generalize_model, run_filtered, run_unfiltered, FuzzReport, ModelFilter, OracleFilter, Prefilter};
use shapefuzz::registry::{CatalogEntry, ExecCost, OperatorSpec, Registry};
use shapefuzz::{build_schema, child_seed, encode_batch, Provenance};

use crate::config::{generator_tag, RunConfig};
use crate::output::{cell, Outputs};
use crate::{runtime, CliError, FuzzMode};

fn outputs(cfg: &RunConfig, command: &str) -> Outputs {
    let provenance = Provenance::new(command, cfg.hash_for(command), cfg.seed);
    Outputs::new(cfg.out_dir(), provenance)
}

pub fn ops(json: bool) -> Result<(), CliError> {
    let reg = Registry::builtin();
    if json {
        let entries: Vec<CatalogEntry> = reg.iter().map(CatalogEntry::from).collect();
        let text = serde_json::to_string_pretty(&entries).map_err(runtime)?;
        say!("{text}");
        return Ok(());
    }
    for op in reg.iter() {
        say!("{}", op.signature());
        say!("    {}", op.constraint);
        if let Some(bug) = op.bug() {
            say!("    injected bug: {}", bug.description);
        }
    }
    Ok(())
}

pub fn gen(cfg: &RunConfig, features: bool) -> Result<(), CliError> {
    let reg = Registry::builtin();
    let out = outputs(cfg, "gen");
    let plan = cfg.plan()?;
    let tag = generator_tag(&plan.generator);
    for op in cfg.operators.resolve(&reg)? {
        let ds = generate_dataset(op, plan.generator, &plan.generation(&op.name, 0)).map_err(runtime)?;
        let (path, mut w) = out.create("datasets", &format!("{}.{tag}.jsonl", op.name))?;
        shapefuzz::datagen::write_jsonl(&ds, Some(&out.provenance), &mut w).map_err(runtime)?;
        io::Write::flush(&mut w).map_err(runtime)?;
        if features {
            let schema = build_schema(&op.space);
            let x = encode_batch(&ds.tuples(), &schema).map_err(runtime)?;
            let (_, mut w) = out.create("datasets", &format!("{}.{tag}.csv", op.name))?;
            write_csv(&schema, &x, &ds.labels(), Some(&out.provenance), &mut w).map_err(runtime)?;
            io::Write::flush(&mut w).map_err(runtime)?;
        }
        let stats = shapefuzz::class_stats(&ds);
        say!(
            "{:<18} {:>7} samples {:>7} valid ({:.1}%)  {}",
            op.name,
            ds.len(),
            stats.positives,
            100.0 * stats.ratio,
            path.display()
        );
    }
    Ok(())
}

fn model_path(dir: &Path, op: &str, tag: &str) -> PathBuf {
    dir.join(format!("{op}.{tag}.json"))
}

fn models_dir(cfg: &RunConfig, explicit: Option<PathBuf>) -> PathBuf {
    explicit.unwrap_or_else(|| cfg.out_dir().join("models"))
}

/// Loads `<dir>/<op>.<tag>.json`, or trains repetition 0 and saves it there.
fn load_or_train(
    cfg: &RunConfig,
    op: &OperatorSpec,
    dir: &Path,
    out: &Outputs,
) -> Result<(ModelFilter, Option<EvalReport>), CliError> {
    let plan = cfg.plan()?;
    let path = model_path(dir, &op.name, &generator_tag(&plan.generator));
    let schema = build_schema(&op.space);
    if path.exists() {
        let model = load_model(&path).map_err(runtime)?;
        let filter = ModelFilter::new(model, schema).map_err(runtime)?;
        return Ok((filter, None));
    }
    log::info!("no model at {}, training {}", path.display(), op.name);
    let trained = train_repetition(op, &plan, 0).map_err(runtime)?;
    std::fs::create_dir_all(dir).map_err(runtime)?;
    let model = trained.model.with_provenance(out.provenance.clone());
    save_model(&model, &path).map_err(runtime)?;
    let filter = ModelFilter::new(model, schema).map_err(runtime)?;
    Ok((filter, Some(trained.result.held_out)))
}

fn summary_row(s: &shapefuzz::OperatorSummary, best: &RepetitionResult) -> String {
    format!(
        "{},{},{},{:.4},{},{},{},{},{}",
        s.operator,
        s.generator,
        s.repetitions,
        s.positive_ratio,
        cell(s.precision),
        cell(s.recall),
        cell(s.f1),
        best.best_family.name(),
        if s.low_support { "LOW_SUPPORT" } else { "" }
    )
}

const TRAIN_HEADER: &str = "operator,generator,repetitions,positive_ratio,precision,recall,f1,best_family_rep0,flag";

pub fn train(
    cfg: &RunConfig,
    dataset: Option<&Path>,
    models: Option<PathBuf>,
    min_precision: Option<f64>,
    min_recall: Option<f64>,
) -> Result<(), CliError> {
    let reg = Registry::builtin();
    let out = outputs(cfg, "train");
    let dir = models_dir(cfg, models);
    std::fs::create_dir_all(&dir).map_err(runtime)?;
    if let Some(path) = dataset {
        return train_from_file(cfg, &reg, path, &dir, &out);
    }
    let plan = cfg.plan()?;
    let tag = generator_tag(&plan.generator);
    let mut rows = Vec::new();
    let mut table = Vec::new();
    let mut failures = Vec::new();
    for op in cfg.operators.resolve(&reg)? {
        let (summary, reps, first) = learnability(op, &plan, cfg.repetitions).map_err(runtime)?;
        let model = first.model.with_provenance(out.provenance.clone());
        save_model(&model, &model_path(&dir, &op.name, &tag)).map_err(runtime)?;
        say!(
            "{:<18} ratio {:>5.1}%  precision {:>6}  recall {:>6}  best {:<17} {}",
            op.name,
            100.0 * summary.positive_ratio,
            fmt_pct(summary.precision),
            fmt_pct(summary.recall),
            first.result.best_family.name(),
            if summary.low_support { "LOW_SUPPORT" } else { "" }
        );
        if summary.positive_ratio >= 0.10 {
            let below = |v: Option<f64>, min: Option<f64>| min.is_some_and(|m| v.map_or(true, |v| v < m));
            if below(summary.precision, min_precision) || below(summary.recall, min_recall) {
                failures.push(op.name.clone());
            }
        }
        table.push(summary_row(&summary, &first.result));
        rows.extend(reps);
    }
    out.jsonl("reports", &format!("train.{tag}.jsonl"), &rows)?;
    out.csv("reports", &format!("train.{tag}.csv"), TRAIN_HEADER, &table)?;
    if !failures.is_empty() {
        return Err(CliError::Gate(format!("below precision/recall threshold: {}", failures.join(", "))));
    }
    Ok(())
}

fn train_from_file(cfg: &RunConfig, reg: &Registry, path: &Path, dir: &Path, out: &Outputs) -> Result<(), CliError> {
    let file = File::open(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let ds = read_jsonl(BufReader::new(file)).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let op = reg.get(&ds.operator).map_err(|e| CliError::Usage(e.to_string()))?;
    let tag = ds.strategy.to_string();
    let trained = fit_dataset(op, ds, &tag, cfg.split, cfg.seed, 0).map_err(runtime)?;
    let model = trained.model.with_provenance(out.provenance.clone());
    save_model(&model, &model_path(dir, &op.name, &tag)).map_err(runtime)?;
    let r = &trained.result;
    say!(
        "{:<18} {} samples, {} valid  precision {}  recall {}  best {} {}",
        op.name,
        r.samples,
        r.positives,
        fmt_pct(r.held_out.precision),
        fmt_pct(r.held_out.recall),
        r.best_family.name(),
        if r.low_support { "LOW_SUPPORT" } else { "" }
    );
    out.jsonl("reports", &format!("train.{}.{tag}.jsonl", op.name), std::slice::from_ref(r))?;
    Ok(())
}

#[derive(Serialize)]
struct EvalRecord<'a> {
    operator: &'a str,
    model: String,
    dataset: String,
    eval: EvalReport,
}

pub fn eval(cfg: &RunConfig, model: &Path, dataset: &Path) -> Result<(), CliError> {
    let reg = Registry::builtin();
    let out = outputs(cfg, "eval");
    let file = File::open(dataset).map_err(|e| CliError::Usage(format!("{}: {e}", dataset.display())))?;
    let ds = read_jsonl(BufReader::new(file)).map_err(|e| CliError::Usage(format!("{}: {e}", dataset.display())))?;
    let op = reg.get(&ds.operator).map_err(|e| CliError::Usage(e.to_string()))?;
    let m = load_model(model).map_err(|e| CliError::Usage(e.to_string()))?;
    let filter = ModelFilter::new(m, build_schema(&op.space)).map_err(|e| CliError::Usage(e.to_string()))?;
    let x = encode_batch(&ds.tuples(), &filter.schema).map_err(runtime)?;
    let pred = predict_batch(&filter.model, &x).map_err(runtime)?;
    let report = evaluate(&pred.labels, &ds.labels()).map_err(runtime)?;
    say!(
        "{:<18} precision {}  recall {}  accuracy {}  ({} positives)",
        op.name,
        fmt_pct(report.precision),
        fmt_pct(report.recall),
        fmt_pct(report.accuracy),
        report.positives_in_eval
    );
    let record = EvalRecord {
        operator: &op.name,
        model: model.display().to_string(),
        dataset: dataset.display().to_string(),
        eval: report,
    };
    out.json("reports", &format!("eval.{}.json", op.name), &record)?;
    Ok(())
}

#[derive(Serialize)]
struct GeneralizationRecord {
    #[serde(flatten)]
    report: shapefuzz::pipeline::GeneralizationReport,
    /// Held-out scores of the same model, when it was trained in this run.
    held_out: Option<EvalReport>,
}

pub fn generalize(cfg: &RunConfig, models: Option<PathBuf>) -> Result<(), CliError> {
    let reg = Registry::builtin();
    let out = outputs(cfg, "generalize");
    let dir = models_dir(cfg, models);
    let generator = cfg.training_generator()?;
    let mut records = Vec::new();
    for op in cfg.operators.resolve(&reg)? {
        let (filter, held_out) = load_or_train(cfg, op, &dir, &out)?;
        let seed = child_seed(cfg.seed, &op.name, GENERALIZATION_REP);
        let report = generalize_model(op, &filter, generator, cfg.generalization.n, seed, &cfg.fuzz_options())
            .map_err(runtime)?;
        say!(
            "{:<18} precision {:>6}  recall {:>6}  ({} positives of {}) {}",
            op.name,
            fmt_pct(report.eval.precision),
            fmt_pct(report.eval.recall),
            report.positives_in_eval,
            report.samples,
            if report.low_support { "LOW_SUPPORT" } else { "" }
        );
        records.push(GeneralizationRecord { report, held_out });
    }
    out.jsonl("reports", &format!("generalize.{}.jsonl", generator_tag(&generator)), &records)?;
    Ok(())
}

fn campaign_op(cfg: &RunConfig, op: &OperatorSpec) -> OperatorSpec {
    if cfg.campaign.simulate_cost {
        op.clone()
    } else {
        op.clone().with_exec_cost(ExecCost::ZERO)
    }
}

fn print_fuzz(r: &FuzzReport) {
    say!(
        "{:<18} {:<10} candidates {:>6}  executed {:>6}  valid {:>6}  pass rate {:>6}",
        r.operator,
        format!("{:?}", r.mode).to_lowercase(),
        r.candidates,
        r.executed,
        r.valid_executed,
        fmt_pct(r.pass_rate)
    );
}

pub fn fuzz(cfg: &RunConfig, models: Option<PathBuf>, mode: FuzzMode) -> Result<(), CliError> {
    let reg = Registry::builtin();
    let out = outputs(cfg, "fuzz");
    let dir = models_dir(cfg, models);
    let generator = cfg.campaign_generator()?;
    let opts = cfg.fuzz_options();
    let mut reports = Vec::new();
    for spec in cfg.operators.resolve(&reg)? {
        let op = campaign_op(cfg, spec);
        let seed = child_seed(cfg.seed, &op.name, 0);
        if mode != FuzzMode::Filtered {
            reports.push(run_unfiltered(&op, generator, cfg.campaign.n, seed, &opts).map_err(runtime)?);
            print_fuzz(reports.last().expect("pushed"));
        }
        if mode != FuzzMode::Unfiltered {
            let (filter, _) = load_or_train(cfg, spec, &dir, &out)?;
            reports.push(run_filtered(&op, generator, &filter, cfg.campaign.n, seed, &opts).map_err(runtime)?);
            print_fuzz(reports.last().expect("pushed"));
        }
    }
    out.jsonl("reports", &format!("fuzz.{}.jsonl", generator_tag(&generator)), &reports)?;
    Ok(())
}

pub fn compare(cfg: &RunConfig, models: Option<PathBuf>, max_p: Option<f64>) -> Result<(), CliError> {
    let reg = Registry::builtin();
    let out = outputs(cfg, "compare");
    let dir = models_dir(cfg, models);
    let selected = cfg.operators.resolve(&reg)?;
    if selected.len() < 2 {
        return Err(CliError::Usage("compare needs at least two operators".into()));
    }
    let ops: Vec<OperatorSpec> = selected.iter().map(|op| campaign_op(cfg, op)).collect();
    let mut filters = Vec::new();
    for op in &selected {
        filters.push(load_or_train(cfg, op, &dir, &out)?.0);
    }
    let entries: Vec<(&OperatorSpec, &dyn Prefilter)> =
        ops.iter().zip(&filters).map(|(o, f)| (o, f as &dyn Prefilter)).collect();
    let campaign = CampaignConfig {
        n: cfg.campaign.n,
        seed: cfg.seed,
        generator: cfg.campaign_generator()?,
        options: cfg.fuzz_options(),
    };
    let result = compare_campaign(&entries, &campaign).map_err(runtime)?;
    let tag = generator_tag(&campaign.generator);
    out.json("reports", &format!("compare.{tag}.json"), &result)?;
    let (path, mut w) = out.create("reports", &format!("compare.{tag}.csv"))?;
    write_campaign_csv(&result, Some(&out.provenance), &mut w).map_err(runtime)?;
    io::Write::flush(&mut w).map_err(runtime)?;

    for c in &result.operators {
        say!(
            "{:<18} pass rate {:>6} -> {:>6}",
            c.operator,
            fmt_pct(c.unfiltered.pass_rate),
            fmt_pct(c.filtered.pass_rate)
        );
    }
    for (op, err) in &result.incomplete {
        say!("{op:<18} INCOMPLETE: {err}");
    }
    say!("{:<12} {:>10} {:>12} {:>9} {:>10} {:>9}", "arm", "avg time", "total time", "#invalid", "pass rate", "#valid/s");
    for s in [&result.unfiltered, &result.filtered] {
        say!(
            "{:<12} {:>9.2}s {:>11.2}s {:>9} {:>10} {:>9.1}",
            s.arm,
            s.avg_time_s,
            s.total_time_s,
            s.invalid,
            fmt_pct(Some(s.pass_rate)),
            s.valid_per_second
        );
    }
    match &result.wilcoxon {
        Ok(w) => say!("wilcoxon z = {:.3}, p = {:.4}", w.statistic, w.p_value),
        Err(e) => say!("wilcoxon: {e}"),
    }
    if let Ok(d) = &result.cohens_d {
        say!("cohen's d = {d:.3} ({})", result.effect_size.as_deref().unwrap_or(""));
    }
    say!("summary table: {}", path.display());
    if let Some(max_p) = max_p {
        let p = result.wilcoxon.as_ref().map(|w| w.p_value).unwrap_or(1.0);
        if p >= max_p {
            return Err(CliError::Gate(format!("wilcoxon p = {p:.4} is not below {max_p}")));
        }
    }
    Ok(())
}

pub fn bugs(cfg: &RunConfig, models: Option<PathBuf>, min_retention: Option<f64>) -> Result<(), CliError> {
    let reg = Registry::builtin();
    let out = outputs(cfg, "bugs");
    let dir = models_dir(cfg, models);
    let opts = cfg.fuzz_options();
    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for op in cfg.operators.resolve(&reg)? {
        if op.bug().is_none() {
            continue;
        }
        let seed = child_seed(cfg.seed, &op.name, 0);
        let (filter, _) = load_or_train(cfg, op, &dir, &out)?;
        let control = OracleFilter { op };
        for (is_model, f) in [(true, &filter as &dyn Prefilter), (false, &control)] {
            let r = bug_campaign(op, f, cfg.bugs.n, seed, &opts).map_err(runtime)?;
            say!(
                "{:<18} {:<24} triggers {:>5}  kept {:>5}  retention {:>6}",
                r.operator,
                r.filter,
                r.triggers,
                r.predicted_valid,
                fmt_pct(r.success_ratio)
            );
            if is_model && min_retention.is_some_and(|m| r.success_ratio.unwrap_or(0.0) < m) {
                failures.push(r.operator.clone());
            }
            reports.push(r);
        }
    }
    out.jsonl("reports", "bugs.jsonl", &reports)?;
    if !failures.is_empty() {
        return Err(CliError::Gate(format!("bug retention below threshold: {}", failures.join(", "))));
    }
    Ok(())
}

pub fn xcheck(cfg: &RunConfig, ops_given: bool, min_agreement: Option<f64>) -> Result<(), CliError> {
    let reg = Registry::builtin();
    let out = outputs(cfg, "xcheck");
    let names: Vec<String> = if ops_given {
        cfg.operators.resolve(&reg)?.iter().map(|o| o.name.clone()).collect()
    } else {
        MAPPED_OPS.iter().map(|s| s.to_string()).collect()
    };
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let mut client = BridgeClient::spawn(&cfg.bridge.command, &cfg.bridge.args).map_err(runtime)?;
    let report = bridge::xcheck(&reg, &names, &mut client, cfg.bridge.n, cfg.seed).map_err(runtime)?;
    for o in &report.per_operator {
        let status = if o.unsupported {
            "UNSUPPORTED".to_string()
        } else {
            fmt_pct(o.agreement)
        };
        say!("{:<18} {:>5}/{:<5} {}", o.operator, o.agree, o.total, status);
    }
    say!("overall agreement {}", fmt_pct(report.agreement));
    out.json("reports", "xcheck.json", &report)?;
    if let Some(min) = min_agreement {
        let a = report.agreement.unwrap_or(0.0);
        if a < min {
            return Err(CliError::Gate(format!("agreement {a:.4} below {min}")));
        }
    }
    Ok(())
}

pub fn bridge_stub(flip: &[String], unsupported: &[String]) -> Result<(), CliError> {
    let reg = Registry::builtin();
    let mut answer = bridge::registry_responder(&reg);
    let stdin = io::stdin().lock();
    let stdout = io::stdout().lock();
    bridge::serve(stdin, stdout, |req| {
        if unsupported.contains(&req.op) {
            return BridgeResponse {
                id: Some(req.id),
                valid: false,
                error: Some(UNSUPPORTED.into()),
            };
        }
        let mut r = answer(req);
        if flip.contains(&req.op) {
            r.valid = !r.valid;
        }
        r
    })
    .map_err(runtime)
}
