//! Run configuration, report assembly, and the rendered output formats.
//!
//! Reports carry a provenance block (config hash, seed, input checksums) so
//! any rendered number can be traced back to the exact inputs that produced
//! it. Rendering never recomputes: csv and svg output only restate values
//! already present in the json report.

use crate::error::{Error, Result};
use crate::eval::{EvalConfig, MethodReport};
use crate::ingest::{DatasetStats, InputPaths, PreprocessConfig, ShareBase};
use crate::split::SplitConfig;
use crate::stattest::{welch_ttest, TestResult};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const COMPARE_METRICS: [&str; 7] = ["ndcg", "mrr", "ser", "div", "nov", "pf", "cov"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Svg,
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "svg" => Ok(ReportFormat::Svg),
            other => Err(Error::Config(format!(
                "unknown report format {other:?}, expected json, csv, or svg"
            ))),
        }
    }
}

/// Everything one run needs: input locations, pipeline settings, cutoffs,
/// and output selection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub inputs: InputPaths,
    pub delimiter: u8,
    pub preprocess: PreprocessConfig,
    pub split: SplitConfig,
    pub eval: EvalConfig,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub formats: BTreeSet<ReportFormat>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            inputs: InputPaths::default(),
            delimiter: b'\t',
            preprocess: PreprocessConfig::default(),
            split: SplitConfig::default(),
            eval: EvalConfig::default(),
            seed: 0,
            out_dir: PathBuf::from("out"),
            formats: [ReportFormat::Json, ReportFormat::Csv].into(),
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<usize>> {
    value.split(',').map(|p| parse_num(key, p.trim())).collect()
}

fn opt_string(value: &str) -> Option<String> {
    let v = value.trim();
    (!v.is_empty()).then(|| v.to_string())
}

impl RunConfig {
    /// Loads a key-value config file: one `key = value` per line, `#` starts
    /// a comment, unknown keys are errors.
    pub fn from_file(path: &Path) -> Result<RunConfig> {
        if !path.is_file() {
            return Err(Error::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        let mut cfg = RunConfig::default();
        let file = path.display().to_string();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(&file, i + 1, "expected `key = value`"))?;
            cfg.apply(key.trim(), value.trim())
                .map_err(|e| Error::parse(&file, i + 1, e.to_string()))?;
        }
        Ok(cfg)
    }

    /// Applies one configuration assignment; shared by the config file
    /// parser and command-line overrides.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "interactions" => self.inputs.interactions = PathBuf::from(value),
            "kg_triples" => self.inputs.kg_triples = PathBuf::from(value),
            "entity_types" => self.inputs.entity_types = PathBuf::from(value),
            "user_attributes" => {
                self.inputs.user_attributes = opt_string(value).map(PathBuf::from)
            }
            "product_providers" => {
                self.inputs.product_providers = opt_string(value).map(PathBuf::from)
            }
            "provider_attributes" => {
                self.inputs.provider_attributes = opt_string(value).map(PathBuf::from)
            }
            "delimiter" => {
                self.delimiter = match value {
                    "tab" => b'\t',
                    "comma" => b',',
                    "semicolon" => b';',
                    v if v.len() == 1 && v.is_ascii() => v.as_bytes()[0],
                    v => {
                        return Err(Error::Config(format!(
                            "invalid delimiter {v:?}, expected tab, comma, semicolon, or one ascii character"
                        )))
                    }
                }
            }
            "min_user_interactions" => {
                self.preprocess.min_user_interactions = parse_num(key, value)?
            }
            "min_product_interactions" => {
                self.preprocess.min_product_interactions = parse_num(key, value)?
            }
            "min_relation_share" => self.preprocess.min_relation_share = parse_num(key, value)?,
            "share_base" => {
                self.preprocess.share_base = match value {
                    "after_head_rule" => ShareBase::AfterHeadRule,
                    "raw_total" => ShareBase::RawTotal,
                    v => {
                        return Err(Error::Config(format!(
                            "invalid share_base {v:?}, expected after_head_rule or raw_total"
                        )))
                    }
                }
            }
            "category_relation" => self.preprocess.category_relation = opt_string(value),
            "provider_relation" => self.preprocess.provider_relation = opt_string(value),
            "interaction_relation" => {
                self.preprocess.interaction_relation = value.to_string()
            }
            "require_attributes" => {
                self.preprocess.require_attributes = parse_num(key, value)?
            }
            "sample_users" => {
                self.preprocess.sample_users = match opt_string(value) {
                    None => None,
                    Some(v) => Some(parse_num(key, &v)?),
                }
            }
            "train_fraction" => self.split.train_fraction = parse_num(key, value)?,
            "valid_fraction" => self.split.valid_fraction = parse_num(key, value)?,
            "test_fraction" => self.split.test_fraction = parse_num(key, value)?,
            "cutoffs" => self.eval.cutoffs = parse_list(key, value)?,
            "fidelity_cutoffs" => self.eval.fidelity_cutoffs = parse_list(key, value)?,
            "beta" => self.eval.beta = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "out_dir" => self.out_dir = PathBuf::from(value),
            "formats" => {
                self.formats = value
                    .split(',')
                    .map(str::parse)
                    .collect::<Result<BTreeSet<ReportFormat>>>()?
            }
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Content hash of the full configuration, recorded in reports. The
    /// execution mode is excluded, so worker counts never change the hash.
    pub fn config_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        sha256_hex(&bytes)
    }
}

/// Hex-encoded sha256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        let _ = write!(out, "{b:02x}");
    }
    out
}

/// Where the numbers in a report came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    /// Identity of the preprocessed bundle the run evaluated against.
    pub dataset_id: String,
    /// sha256 per loaded method-output file.
    pub input_checksums: BTreeMap<String, String>,
}

/// The complete result of one evaluation run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub provenance: Provenance,
    pub cutoffs: Vec<usize>,
    pub fidelity_cutoffs: Vec<usize>,
    pub beta: f64,
    pub stats: DatasetStats,
    pub methods: BTreeMap<String, MethodReport>,
}

pub fn build_report(
    cfg: &RunConfig,
    dataset_id: String,
    input_checksums: BTreeMap<String, String>,
    stats: DatasetStats,
    methods: BTreeMap<String, MethodReport>,
) -> EvaluationReport {
    EvaluationReport {
        provenance: Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: cfg.seed,
            config_hash: cfg.config_hash(),
            dataset_id,
            input_checksums,
        },
        cutoffs: cfg.eval.cutoffs.clone(),
        fidelity_cutoffs: cfg.eval.fidelity_cutoffs.clone(),
        beta: cfg.eval.beta,
        stats,
        methods,
    }
}

/// Formats a float exactly as it appears in the json rendering, so csv and
/// json never disagree on a digit.
fn fmt_f64(v: f64) -> String {
    serde_json::to_string(&v).unwrap_or_default()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

impl EvaluationReport {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<EvaluationReport> {
        Ok(serde_json::from_str(text)?)
    }

    /// Flat csv of every reported mean, delta, exposure, and p-value:
    /// `method,section,metric,k,group,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("method,section,metric,k,group,value\n");
        let mut row =
            |method: &str, section: &str, metric: &str, k: usize, group: &str, value: String| {
                let _ = writeln!(out, "{method},{section},{metric},{k},{group},{value}");
            };
        for (name, m) in &self.methods {
            for (&k, u) in &m.utility {
                row(name, "utility", "ndcg", k, "", fmt_opt(u.ndcg.mean));
                row(name, "utility", "mrr", k, "", fmt_opt(u.mrr.mean));
                row(name, "utility", "ser", k, "", fmt_opt(u.ser.mean));
                row(name, "utility", "div", k, "", fmt_opt(u.div.mean));
                row(name, "utility", "nov", k, "", fmt_opt(u.nov.mean));
                row(name, "utility", "cov", k, "", fmt_f64(u.cov));
            }
            for (&k, e) in &m.explanation {
                for (metric, s) in [
                    ("fid", &e.fid),
                    ("lir", &e.lir),
                    ("lid", &e.lid),
                    ("sep", &e.sep),
                    ("sed", &e.sed),
                    ("ptd", &e.ptd),
                    ("ptc", &e.ptc),
                    ("ppc", &e.ppc),
                ] {
                    row(name, "explanation", metric, k, "", fmt_opt(s.mean));
                }
            }
            for (&k, fid) in &m.fidelity_sweep {
                row(name, "fidelity_sweep", "fid", k, "", fmt_f64(*fid));
            }
            for (&k, block) in &m.fairness {
                for (dim, side) in [("gender", &block.gender), ("age", &block.age)] {
                    let section = format!("fairness_{dim}");
                    for (metric, outcome) in &side.consumer {
                        for (group, mean) in &outcome.groups.group_means {
                            row(name, &section, metric, k, group, fmt_f64(*mean));
                        }
                        row(
                            name,
                            &section,
                            metric,
                            k,
                            "delta",
                            fmt_opt(outcome.groups.delta),
                        );
                        row(
                            name,
                            &section,
                            metric,
                            k,
                            "p_value",
                            fmt_opt(outcome.test.map(|t| t.p_value)),
                        );
                    }
                    let section = format!("exposure_{dim}");
                    let exp = &side.provider_exposure;
                    for (group, share) in &exp.group_exposure {
                        row(name, &section, "exp", k, group, fmt_f64(*share));
                    }
                    row(
                        name,
                        &section,
                        "exp",
                        k,
                        "unattributed",
                        fmt_f64(exp.unattributed_share),
                    );
                    row(name, &section, "exp", k, "delta", fmt_opt(exp.delta));
                }
            }
        }
        out
    }

    /// The headline cutoff: the first configured one.
    pub fn primary_k(&self) -> usize {
        self.cutoffs.first().copied().unwrap_or(10)
    }

    /// One radar chart per perspective, keyed by file name. Axes are metric
    /// names in sorted order; series are methods.
    pub fn radar_charts(&self) -> BTreeMap<String, String> {
        let k = self.primary_k();
        let mut charts = BTreeMap::new();

        let utility_axes = ["cov", "div", "mrr", "ndcg", "nov", "pf", "ser"];
        let series: Vec<(String, Vec<f64>)> = self
            .methods
            .iter()
            .map(|(name, m)| {
                let u = m.utility.get(&k);
                let pf = m
                    .fairness
                    .get(&k)
                    .and_then(|f| f.gender.provider_exposure.delta);
                let values = utility_axes
                    .iter()
                    .map(|&axis| match axis {
                        "cov" => u.map(|u| u.cov),
                        "div" => u.and_then(|u| u.div.mean),
                        "mrr" => u.and_then(|u| u.mrr.mean),
                        "ndcg" => u.and_then(|u| u.ndcg.mean),
                        "nov" => u.and_then(|u| u.nov.mean),
                        "pf" => pf,
                        "ser" => u.and_then(|u| u.ser.mean),
                        _ => None,
                    })
                    .map(|v| v.unwrap_or(0.0))
                    .collect();
                (name.clone(), values)
            })
            .collect();
        charts.insert(
            "radar_utility.svg".to_string(),
            radar_svg(&format!("utility at k={k}"), &utility_axes, &series),
        );

        let expl_axes = ["fid", "lid", "lir", "ppc", "ptc", "ptd", "sed", "sep"];
        let series: Vec<(String, Vec<f64>)> = self
            .methods
            .iter()
            .map(|(name, m)| {
                let e = m.explanation.get(&k);
                let values = expl_axes
                    .iter()
                    .map(|&axis| {
                        e.and_then(|e| match axis {
                            "fid" => e.fid.mean,
                            "lid" => e.lid.mean,
                            "lir" => e.lir.mean,
                            "ppc" => e.ppc.mean,
                            "ptc" => e.ptc.mean,
                            "ptd" => e.ptd.mean,
                            "sed" => e.sed.mean,
                            "sep" => e.sep.mean,
                            _ => None,
                        })
                        .unwrap_or(0.0)
                    })
                    .collect();
                (name.clone(), values)
            })
            .collect();
        charts.insert(
            "radar_explanation.svg".to_string(),
            radar_svg(
                &format!("explanation quality at k={k}"),
                &expl_axes,
                &series,
            ),
        );

        let fairness_axes = ["cov", "div", "mrr", "ndcg", "nov", "ser"];
        for dim in ["gender", "age"] {
            let series: Vec<(String, Vec<f64>)> = self
                .methods
                .iter()
                .map(|(name, m)| {
                    let side = m.fairness.get(&k).map(|b| match dim {
                        "gender" => &b.gender,
                        _ => &b.age,
                    });
                    let values = fairness_axes
                        .iter()
                        .map(|&axis| {
                            side.and_then(|s| s.consumer.get(axis))
                                .and_then(|o| o.groups.delta)
                                .unwrap_or(0.0)
                        })
                        .collect();
                    (name.clone(), values)
                })
                .collect();
            charts.insert(
                format!("radar_fairness_{dim}.svg"),
                radar_svg(
                    &format!("{dim} parity delta at k={k}"),
                    &fairness_axes,
                    &series,
                ),
            );
        }
        charts
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf",
];

fn radar_point(cx: f64, cy: f64, radius: f64, axis: usize, axes: usize) -> (f64, f64) {
    let theta =
        -std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * axis as f64 / axes as f64;
    (cx + radius * theta.cos(), cy + radius * theta.sin())
}

/// Renders one radar chart; every value is expected in `[0, 1]`.
fn radar_svg(title: &str, axes: &[&str], series: &[(String, Vec<f64>)]) -> String {
    let (cx, cy, r) = (300.0, 300.0, 210.0);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 760 580\" font-family=\"sans-serif\" font-size=\"13\">"
    );
    let _ = writeln!(svg, "<title>{title}</title>");
    let _ = writeln!(svg, "<rect width=\"760\" height=\"580\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<text x=\"300\" y=\"30\" text-anchor=\"middle\" font-size=\"17\">{title}</text>"
    );
    for ring in [0.25, 0.5, 0.75, 1.0] {
        let points: Vec<String> = (0..axes.len())
            .map(|i| {
                let (x, y) = radar_point(cx, cy, r * ring, i, axes.len());
                format!("{x:.4},{y:.4}")
            })
            .collect();
        let _ = writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"none\" stroke=\"#dddddd\"/>",
            points.join(" ")
        );
    }
    for (i, axis) in axes.iter().enumerate() {
        let (x, y) = radar_point(cx, cy, r, i, axes.len());
        let _ = writeln!(
            svg,
            "<line x1=\"{cx:.4}\" y1=\"{cy:.4}\" x2=\"{x:.4}\" y2=\"{y:.4}\" stroke=\"#cccccc\"/>"
        );
        let (lx, ly) = radar_point(cx, cy, r + 24.0, i, axes.len());
        let _ = writeln!(
            svg,
            "<text x=\"{lx:.4}\" y=\"{ly:.4}\" text-anchor=\"middle\" dominant-baseline=\"middle\">{axis}</text>"
        );
    }
    for (s, (name, values)) in series.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        let points: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let (x, y) = radar_point(cx, cy, r * v.clamp(0.0, 1.0), i, axes.len());
                format!("{x:.4},{y:.4}")
            })
            .collect();
        let _ = writeln!(
            svg,
            "<polygon points=\"{}\" fill=\"{color}\" fill-opacity=\"0.12\" stroke=\"{color}\" stroke-width=\"2\"/>",
            points.join(" ")
        );
        let y = 60.0 + 24.0 * s as f64;
        let _ = writeln!(
            svg,
            "<rect x=\"600\" y=\"{:.4}\" width=\"14\" height=\"14\" fill=\"{color}\"/>",
            y - 11.0
        );
        let _ = writeln!(svg, "<text x=\"622\" y=\"{y:.4}\">{name}</text>");
    }
    svg.push_str("</svg>\n");
    svg
}

/// Two method classes tested metric by metric.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassComparison {
    pub dataset_id: String,
    pub k: usize,
    pub classes: BTreeMap<String, Vec<String>>,
    /// Per metric: the class-level test, or `None` when a method lacks the
    /// metric or the samples are degenerate.
    pub columns: BTreeMap<String, Option<TestResult>>,
    /// Metrics whose difference is significant at the 0.05 level.
    pub significant: BTreeSet<String>,
}

fn method_metric(m: &MethodReport, metric: &str, k: usize) -> Option<f64> {
    let u = m.utility.get(&k);
    match metric {
        "ndcg" => u.and_then(|u| u.ndcg.mean),
        "mrr" => u.and_then(|u| u.mrr.mean),
        "ser" => u.and_then(|u| u.ser.mean),
        "div" => u.and_then(|u| u.div.mean),
        "nov" => u.and_then(|u| u.nov.mean),
        "cov" => u.map(|u| u.cov),
        "pf" => m
            .fairness
            .get(&k)
            .and_then(|f| f.gender.provider_exposure.delta),
        _ => None,
    }
}

/// Tests, per metric, whether two method classes differ, pooling the
/// method-level means from `reports` as the class samples.
pub fn compare_reports(
    reports: &[EvaluationReport],
    grouping: &BTreeMap<String, String>,
    k: usize,
) -> Result<ClassComparison> {
    if reports.len() < 2 {
        return Err(Error::Usage(format!(
            "comparison needs at least 2 reports, got {}",
            reports.len()
        )));
    }
    let dataset_id = reports[0].provenance.dataset_id.clone();
    for r in reports {
        if r.provenance.dataset_id != dataset_id {
            return Err(Error::Usage(format!(
                "reports evaluate different datasets: {dataset_id} vs {}",
                r.provenance.dataset_id
            )));
        }
    }
    let mut methods: BTreeMap<&str, &MethodReport> = BTreeMap::new();
    for r in reports {
        for (name, m) in &r.methods {
            if methods.insert(name, m).is_some() {
                return Err(Error::Usage(format!(
                    "method {name} appears in more than one report"
                )));
            }
        }
    }
    let mut classes: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for &name in methods.keys() {
        let class = grouping
            .get(name)
            .ok_or_else(|| Error::Usage(format!("method {name} is not assigned to a class")))?;
        classes
            .entry(class.clone())
            .or_default()
            .push(name.to_string());
    }
    if classes.len() != 2 {
        return Err(Error::Usage(format!(
            "comparison needs exactly 2 classes, got {}",
            classes.len()
        )));
    }
    if let Some((class, members)) = classes.iter().find(|(_, m)| m.len() < 2) {
        return Err(Error::Usage(format!(
            "class {class} has {} method(s), need at least 2",
            members.len()
        )));
    }

    let mut columns = BTreeMap::new();
    let mut significant = BTreeSet::new();
    for metric in COMPARE_METRICS {
        let mut samples: Vec<Vec<f64>> = Vec::with_capacity(2);
        let mut complete = true;
        for members in classes.values() {
            let values: Vec<Option<f64>> = members
                .iter()
                .map(|m| method_metric(methods[m.as_str()], metric, k))
                .collect();
            if values.iter().any(Option::is_none) {
                complete = false;
                break;
            }
            samples.push(values.into_iter().flatten().collect());
        }
        let result = if complete {
            welch_ttest(&samples[0], &samples[1]).ok()
        } else {
            None
        };
        if let Some(t) = result {
            if t.p_value < 0.05 {
                significant.insert(metric.to_string());
            }
        }
        columns.insert(metric.to_string(), result);
    }
    Ok(ClassComparison {
        dataset_id,
        k,
        classes,
        columns,
        significant,
    })
}

impl ClassComparison {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<ClassComparison> {
        Ok(serde_json::from_str(text)?)
    }

    /// `metric,statistic,df,p_value,flag` with metrics in the fixed column
    /// order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,statistic,df,p_value,flag\n");
        for metric in COMPARE_METRICS {
            match self.columns.get(metric).copied().flatten() {
                Some(t) => {
                    let flag = if t.p_value < 0.05 {
                        "significant"
                    } else {
                        "not_significant"
                    };
                    let _ = writeln!(
                        out,
                        "{metric},{},{},{},{flag}",
                        fmt_f64(t.statistic),
                        fmt_f64(t.df),
                        fmt_f64(t.p_value)
                    );
                }
                None => {
                    let _ = writeln!(out, "{metric},,,,absent");
                }
            }
        }
        out
    }
}
