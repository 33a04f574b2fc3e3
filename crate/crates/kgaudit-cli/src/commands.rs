//! Subcommand implementations over the library pipeline.

use kgaudit::eval::{evaluate_method, EvalContext, MethodOutput, MethodReport};
use kgaudit::ingest::{self, DatasetBundle};
use kgaudit::kg::{PathValidator, TrainIndex, UserId};
use kgaudit::rec::{
    attach_paths, parse_path_file, parse_rec_file, render_path_file, render_rec_file,
    PathCountRecommender, PathPolicy, PopularityModel, RecommendedList,
};
use kgaudit::report::{
    build_report, compare_reports, sha256_hex, EvaluationReport, ReportFormat, RunConfig,
    COMPARE_METRICS,
};
use kgaudit::split::{chronological_split, SplitBundle};
use kgaudit::{Error, Result};
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

fn bundle_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("bundle")
}

fn split_file(cfg: &RunConfig) -> PathBuf {
    cfg.out_dir.join("split.json")
}

fn read_input(path: &Path) -> Result<String> {
    if !path.is_file() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

fn write_artifact(cfg: &RunConfig, name: &str, text: &str) -> Result<()> {
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join(name), text)?;
    Ok(())
}

fn load_bundle(cfg: &RunConfig) -> Result<(DatasetBundle, String)> {
    let dir = bundle_dir(cfg);
    if !dir.is_dir() {
        return Err(Error::MissingInput(dir.join("manifest.json")));
    }
    DatasetBundle::load(&dir)
}

fn load_split(cfg: &RunConfig) -> Result<SplitBundle> {
    Ok(serde_json::from_str(&read_input(&split_file(cfg))?)?)
}

fn fmt_mean(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |v| format!("{v:.4}"))
}

pub fn preprocess(cfg: &RunConfig) -> Result<()> {
    let raw = ingest::load_raw(&cfg.inputs, cfg.delimiter as char)?;
    let mut pcfg = cfg.preprocess.clone();
    pcfg.seed = cfg.seed;
    let outcome = ingest::preprocess(raw, &pcfg)?;

    fs::create_dir_all(&cfg.out_dir)?;
    let dataset_id = outcome.bundle.save(&bundle_dir(cfg))?;
    let summary = serde_json::json!({
        "dataset_id": dataset_id,
        "stats": outcome.stats,
        "variants": outcome.variants,
        "warnings": outcome.warnings,
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    write_artifact(cfg, "stats.json", &text)?;

    let s = &outcome.stats;
    println!("dataset {dataset_id}");
    println!(
        "  {} users, {} products, {} interactions",
        s.users, s.products, s.interactions
    );
    println!(
        "  {} entities ({} types), {} relations ({} types)",
        s.entities, s.entity_types, s.relations, s.relation_types
    );
    for v in &outcome.variants {
        println!(
            "  variant ({:?}, k-core {}): {} users, {} products, {} interactions",
            v.share_base, v.kcore_applied, v.stats.users, v.stats.products, v.stats.interactions
        );
    }
    if !outcome.warnings.pruned_relations.is_empty() {
        println!(
            "  pruned {} sparse relation type(s)",
            outcome.warnings.pruned_relations.len()
        );
    }
    Ok(())
}

pub fn split(cfg: &RunConfig) -> Result<()> {
    let (bundle, dataset_id) = load_bundle(cfg)?;
    let split = chronological_split(&bundle.interactions, &cfg.split)?;
    let mut text = serde_json::to_string_pretty(&split)?;
    text.push('\n');
    write_artifact(cfg, "split.json", &text)?;
    println!(
        "dataset {dataset_id}: {} train, {} valid, {} test interactions ({} users dropped)",
        split.train.len(),
        split.valid.len(),
        split.test.len(),
        split.dropped_users.len()
    );
    Ok(())
}

pub fn baseline(cfg: &RunConfig, method: &str, k: Option<usize>, max_hops: usize) -> Result<()> {
    let (bundle, _) = load_bundle(cfg)?;
    let split = load_split(cfg)?;
    let k = k.unwrap_or_else(|| cfg.eval.max_cutoff());
    let train = TrainIndex::new(&split.train);

    let mut seen: BTreeMap<UserId, HashSet<_>> = BTreeMap::new();
    for i in split.train.iter().chain(&split.valid) {
        seen.entry(i.user).or_default().insert(i.product);
    }
    let users: BTreeSet<UserId> = split.test.iter().map(|i| i.user).collect();
    let empty = HashSet::new();
    let seen_of = |u: &UserId| seen.get(u).unwrap_or(&empty);

    let delim = cfg.delimiter as char;
    match method {
        "mostpop" => {
            let model = PopularityModel::train(&split.train, &bundle.catalog);
            let lists: Vec<RecommendedList> = users
                .iter()
                .map(|&u| model.recommend(u, k, seen_of(&u)))
                .collect();
            write_artifact(
                cfg,
                "mostpop.rec.tsv",
                &render_rec_file(&lists, &bundle.ids, delim)?,
            )?;
            println!("mostpop: {} lists at k={k} -> mostpop.rec.tsv", lists.len());
        }
        "pathcount" => {
            let rec = PathCountRecommender::new(
                &bundle.kg,
                &bundle.catalog,
                &train,
                bundle.interaction_relation,
            );
            let lists: Vec<RecommendedList> = users
                .iter()
                .map(|&u| rec.recommend(u, k, max_hops, seen_of(&u)))
                .collect::<Result<_>>()?;
            write_artifact(
                cfg,
                "pathcount.rec.tsv",
                &render_rec_file(&lists, &bundle.ids, delim)?,
            )?;
            write_artifact(
                cfg,
                "pathcount.paths.tsv",
                &render_path_file(&lists, &bundle.ids, delim)?,
            )?;
            println!(
                "pathcount: {} lists at k={k} -> pathcount.rec.tsv, pathcount.paths.tsv",
                lists.len()
            );
        }
        other => {
            return Err(Error::Usage(format!(
                "unknown baseline {other:?}, expected mostpop or pathcount"
            )))
        }
    }
    Ok(())
}

pub fn evaluate(
    cfg: &RunConfig,
    methods: &[String],
    path_policy: &str,
    include_baseline: bool,
) -> Result<()> {
    if methods.is_empty() && !include_baseline {
        return Err(Error::Usage(
            "evaluate needs at least one --method or --include-baseline".into(),
        ));
    }
    let policy: PathPolicy = path_policy.parse()?;
    let (bundle, dataset_id) = load_bundle(cfg)?;
    let split = load_split(cfg)?;
    let ctx = EvalContext::build(&bundle, &split, &cfg.eval)?;

    let mut outputs: Vec<MethodOutput> = Vec::new();
    let mut checksums = BTreeMap::new();
    if include_baseline {
        outputs.push(ctx.baseline_output());
    }
    let delim = cfg.delimiter as char;
    for spec in methods {
        let (name, files) = spec.split_once('=').ok_or_else(|| {
            Error::Usage(format!("--method expects NAME=REC[,PATHS], got {spec:?}"))
        })?;
        let name = name.trim();
        if name.is_empty() {
            return Err(Error::Usage(format!("--method {spec:?} has an empty name")));
        }
        let (rec_path, path_path) = match files.split_once(',') {
            Some((r, p)) => (r.trim(), Some(p.trim())),
            None => (files.trim(), None),
        };
        let rec_text = read_input(Path::new(rec_path))?;
        checksums.insert(format!("{name}.rec"), sha256_hex(rec_text.as_bytes()));
        let mut lists = parse_rec_file(&rec_text, delim, rec_path, &bundle.ids)?;
        let mut invalid_paths = 0;
        if let Some(pp) = path_path {
            let path_text = read_input(Path::new(pp))?;
            checksums.insert(format!("{name}.paths"), sha256_hex(path_text.as_bytes()));
            let paths = parse_path_file(&path_text, delim, pp, &bundle.ids)?;
            let validator = PathValidator {
                kg: &bundle.kg,
                catalog: &bundle.catalog,
                train: &ctx.train,
            };
            let outcome = attach_paths(&mut lists, &paths, &validator, &ctx.weights, policy);
            invalid_paths = outcome.invalid + outcome.unmatched;
        }
        outputs.push(MethodOutput {
            name: name.to_string(),
            lists,
            invalid_paths,
        });
    }

    let mut reports: BTreeMap<String, MethodReport> = BTreeMap::new();
    for output in &outputs {
        if reports.contains_key(&output.name) {
            return Err(Error::Usage(format!(
                "method name {:?} is used twice",
                output.name
            )));
        }
        let report = evaluate_method(&ctx, output, &cfg.eval)?;
        reports.insert(output.name.clone(), report);
    }

    let stats = ingest::compute_stats(&bundle.interactions, &bundle.kg, &bundle.catalog);
    let report = build_report(cfg, dataset_id, checksums, stats, reports);

    for format in &cfg.formats {
        match format {
            ReportFormat::Json => write_artifact(cfg, "report.json", &report.to_json()?)?,
            ReportFormat::Csv => write_artifact(cfg, "report.csv", &report.to_csv())?,
            ReportFormat::Svg => {
                for (name, svg) in report.radar_charts() {
                    write_artifact(cfg, &name, &svg)?;
                }
            }
        }
    }

    let k = report.primary_k();
    for (name, m) in &report.methods {
        let u = m.utility.get(&k);
        println!(
            "{name}: {} users evaluated ({} without output), ndcg@{k} {}, mrr@{k} {}",
            m.users_evaluated,
            m.users_missing_output,
            fmt_mean(u.and_then(|u| u.ndcg.mean)),
            fmt_mean(u.and_then(|u| u.mrr.mean)),
        );
    }
    Ok(())
}

pub fn compare(
    cfg: &RunConfig,
    report_paths: &[PathBuf],
    assignments: &[String],
    k: Option<usize>,
) -> Result<()> {
    let mut reports = Vec::new();
    for path in report_paths {
        reports.push(EvaluationReport::from_json(&read_input(path)?)?);
    }
    let mut grouping = BTreeMap::new();
    for a in assignments {
        let (method, class) = a
            .split_once('=')
            .ok_or_else(|| Error::Usage(format!("--assign expects METHOD=CLASS, got {a:?}")))?;
        grouping.insert(method.trim().to_string(), class.trim().to_string());
    }
    let k = k
        .or_else(|| reports.first().and_then(|r| r.cutoffs.first().copied()))
        .unwrap_or(10);

    let cmp = compare_reports(&reports, &grouping, k)?;
    for format in &cfg.formats {
        match format {
            ReportFormat::Json => write_artifact(cfg, "comparison.json", &cmp.to_json()?)?,
            ReportFormat::Csv => write_artifact(cfg, "comparison.csv", &cmp.to_csv())?,
            ReportFormat::Svg => {}
        }
    }

    println!("dataset {} at k={k}", cmp.dataset_id);
    for (class, members) in &cmp.classes {
        println!("  class {class}: {}", members.join(", "));
    }
    for metric in COMPARE_METRICS {
        match cmp.columns.get(metric).copied().flatten() {
            Some(t) => {
                let flag = if cmp.significant.contains(metric) {
                    " (significant)"
                } else {
                    ""
                };
                println!("  {metric}: p = {:.4}{flag}", t.p_value);
            }
            None => println!("  {metric}: absent"),
        }
    }
    Ok(())
}

pub fn stats(cfg: &RunConfig) -> Result<()> {
    let (bundle, dataset_id) = load_bundle(cfg)?;
    let stats = ingest::compute_stats(&bundle.interactions, &bundle.kg, &bundle.catalog);
    let summary = serde_json::json!({ "dataset_id": dataset_id, "stats": stats });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
