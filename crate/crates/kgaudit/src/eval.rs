//! Evaluation driver: scores method outputs against one dataset and split.
//!
//! Per-user scoring fans out across workers and is reduced in user-id order,
//! so reports are identical at any worker count. Path-concentration metrics
//! need the run-wide distinct type and pattern counts, so scoring runs in two
//! passes.

use crate::error::{Error, Result};
use crate::exec::{run_map, Execution};
use crate::explanation::{self, ExplanationWeights};
use crate::fairness::{
    group_delta, mean_abs_pairwise_delta, provider_exposure, Dimension, ExposureReport,
    FairnessReport, GroupAssignment,
};
use crate::ingest::DatasetBundle;
use crate::kg::{PathPattern, PathType, ProductId, ProviderId, TrainIndex, UserId};
use crate::metrics;
use crate::rec::{PopularityModel, RecommendedList};
use crate::split::SplitBundle;
use crate::stattest::{kruskal_h, welch_ttest, TestResult};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

/// Cutoffs and weighting knobs of one evaluation run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Cutoffs every metric is computed at.
    pub cutoffs: Vec<usize>,
    /// Cutoffs of the fidelity sweep.
    pub fidelity_cutoffs: Vec<usize>,
    /// Recency smoothing factor.
    pub beta: f64,
    #[serde(skip)]
    pub exec: Execution,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            cutoffs: vec![10],
            fidelity_cutoffs: vec![10, 20, 50, 100],
            beta: 0.3,
            exec: Execution::Auto,
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, ks) in [
            ("cutoffs", &self.cutoffs),
            ("fidelity cutoffs", &self.fidelity_cutoffs),
        ] {
            if ks.is_empty() {
                return Err(Error::Config(format!("{name} must not be empty")));
            }
            if ks[0] == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
            if !ks.windows(2).all(|w| w[0] < w[1]) {
                return Err(Error::Config(format!("{name} must be strictly increasing")));
            }
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!(
                "smoothing beta must be in (0, 1], got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// Sorted union of metric and fidelity cutoffs.
    pub fn all_cutoffs(&self) -> Vec<usize> {
        let set: BTreeSet<usize> = self
            .cutoffs
            .iter()
            .chain(&self.fidelity_cutoffs)
            .copied()
            .collect();
        set.into_iter().collect()
    }

    pub fn max_cutoff(&self) -> usize {
        self.all_cutoffs().last().copied().unwrap_or(10)
    }
}

/// One method's ranked lists, with whatever reasoning paths survived
/// validation attached, plus loader tallies.
#[derive(Clone, Debug, Default)]
pub struct MethodOutput {
    pub name: String,
    pub lists: Vec<RecommendedList>,
    /// Paths rejected while loading; they left their entries unexplained.
    pub invalid_paths: u64,
}

/// Mean of one per-user metric and the values it was taken over.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct MetricSummary {
    /// `None` when the metric is undefined for every evaluated user.
    pub mean: Option<f64>,
    pub defined_users: usize,
    pub per_user: BTreeMap<UserId, f64>,
}

impl MetricSummary {
    fn collect(pairs: impl IntoIterator<Item = (UserId, Option<f64>)>) -> Self {
        let per_user: BTreeMap<UserId, f64> = pairs
            .into_iter()
            .filter_map(|(u, v)| v.map(|v| (u, v)))
            .collect();
        let defined_users = per_user.len();
        let mean =
            (defined_users > 0).then(|| per_user.values().sum::<f64>() / defined_users as f64);
        MetricSummary {
            mean,
            defined_users,
            per_user,
        }
    }
}

/// Utility and beyond-utility results at one cutoff.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct UtilityReport {
    pub k: usize,
    pub ndcg: MetricSummary,
    pub mrr: MetricSummary,
    pub ser: MetricSummary,
    pub div: MetricSummary,
    pub nov: MetricSummary,
    /// Catalog share recommended to at least one evaluated user.
    pub cov: f64,
}

/// Explanation-quality results at one cutoff.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExplanationQualityReport {
    pub k: usize,
    pub fid: MetricSummary,
    pub lir: MetricSummary,
    pub lid: MetricSummary,
    pub sep: MetricSummary,
    pub sed: MetricSummary,
    pub ptd: MetricSummary,
    pub ptc: MetricSummary,
    pub ppc: MetricSummary,
    /// Distinct path types across all evaluated lists at this cutoff.
    pub distinct_path_types: usize,
    pub distinct_path_patterns: usize,
}

/// Group means and, where a test applies, their significance.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FairnessOutcome {
    pub groups: FairnessReport,
    /// Welch t-test for two-group dimensions, Kruskal-Wallis H otherwise;
    /// absent when samples are degenerate or the metric has no per-user
    /// values.
    pub test: Option<TestResult>,
}

/// Consumer and provider fairness along one demographic dimension.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DimensionFairness {
    /// Per metric: group means of the per-user values and their delta.
    pub consumer: BTreeMap<String, FairnessOutcome>,
    pub provider_exposure: ExposureReport,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FairnessBlock {
    pub k: usize,
    pub gender: DimensionFairness,
    pub age: DimensionFairness,
}

/// Everything measured about one method on one dataset split.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub users_evaluated: usize,
    /// Test users the method produced no list for.
    pub users_missing_output: usize,
    /// Lists for users without test interactions, skipped.
    pub lists_ignored: usize,
    pub invalid_paths: u64,
    pub utility: BTreeMap<usize, UtilityReport>,
    pub explanation: BTreeMap<usize, ExplanationQualityReport>,
    /// Mean fidelity at each sweep cutoff.
    pub fidelity_sweep: BTreeMap<usize, f64>,
    pub fairness: BTreeMap<usize, FairnessBlock>,
}

/// Immutable state shared by every method evaluation of one run.
pub struct EvalContext<'a> {
    pub bundle: &'a DatasetBundle,
    pub train: TrainIndex,
    pub pop: PopularityModel,
    pub weights: ExplanationWeights,
    /// Test products per user; its key set is the evaluable population.
    pub relevant: BTreeMap<UserId, HashSet<ProductId>>,
    /// Popularity-baseline list per test user at the maximum cutoff.
    pub baseline: HashMap<UserId, RecommendedList>,
    pub consumer_gender: GroupAssignment<UserId>,
    pub consumer_age: GroupAssignment<UserId>,
    pub provider_gender: GroupAssignment<ProviderId>,
    pub provider_age: GroupAssignment<ProviderId>,
}

impl<'a> EvalContext<'a> {
    pub fn build(bundle: &'a DatasetBundle, split: &SplitBundle, cfg: &EvalConfig) -> Result<Self> {
        cfg.validate()?;
        let train = TrainIndex::new(&split.train);
        let pop = PopularityModel::train(&split.train, &bundle.catalog);
        let weights = explanation::precompute_weights(&split.train, &bundle.kg, cfg.beta)?;

        let mut relevant: BTreeMap<UserId, HashSet<ProductId>> = BTreeMap::new();
        for i in &split.test {
            relevant.entry(i.user).or_default().insert(i.product);
        }
        let mut seen: HashMap<UserId, HashSet<ProductId>> = HashMap::new();
        for i in split.train.iter().chain(&split.valid) {
            seen.entry(i.user).or_default().insert(i.product);
        }
        let users: Vec<UserId> = relevant.keys().copied().collect();
        let max_k = cfg.max_cutoff();
        let empty = HashSet::new();
        let baseline_lists = run_map(cfg.exec, &users, |u| {
            pop.recommend(*u, max_k, seen.get(u).unwrap_or(&empty))
        });
        let baseline = users.iter().copied().zip(baseline_lists).collect();

        Ok(EvalContext {
            bundle,
            train,
            pop,
            weights,
            relevant,
            baseline,
            consumer_gender: GroupAssignment::new(&bundle.user_attributes, Dimension::Gender),
            consumer_age: GroupAssignment::new(&bundle.user_attributes, Dimension::Age),
            provider_gender: GroupAssignment::new(&bundle.provider_attributes, Dimension::Gender),
            provider_age: GroupAssignment::new(&bundle.provider_attributes, Dimension::Age),
        })
    }

    /// The popularity-baseline lists as an evaluable method output, in user
    /// order.
    pub fn baseline_output(&self) -> MethodOutput {
        let lists = self
            .relevant
            .keys()
            .map(|u| self.baseline[u].clone())
            .collect();
        MethodOutput {
            name: "mostpop".into(),
            lists,
            invalid_paths: 0,
        }
    }
}

struct UserScores {
    ndcg: Option<f64>,
    mrr: Option<f64>,
    ser: f64,
    div: f64,
    nov: f64,
    fid: f64,
    lir: Option<f64>,
    lid: Option<f64>,
    sep: Option<f64>,
    sed: Option<f64>,
    ptd: Option<f64>,
    types: BTreeSet<PathType>,
    patterns: BTreeSet<PathPattern>,
}

fn score_user(
    ctx: &EvalContext,
    user: UserId,
    list: &RecommendedList,
    all_ks: &[usize],
) -> Result<Vec<UserScores>> {
    let relevant = &ctx.relevant[&user];
    let baseline = ctx
        .baseline
        .get(&user)
        .ok_or_else(|| Error::Invariant(format!("no baseline list for user {user}")))?;
    all_ks
        .iter()
        .map(|&k| {
            Ok(UserScores {
                ndcg: metrics::ndcg_at_k(list, relevant, k),
                mrr: metrics::mrr_at_k(list, relevant, k),
                ser: metrics::serendipity_at_k(list, baseline, k)?,
                div: metrics::diversity_at_k(list, &ctx.bundle.category_of, k),
                nov: metrics::novelty_at_k(list, &ctx.pop, k),
                fid: explanation::fidelity_at_k(list, k),
                lir: explanation::lir_at_k(list, &ctx.weights, k),
                lid: explanation::lid_at_k(list, k),
                sep: explanation::sep_at_k(list, &ctx.weights, k),
                sed: explanation::sed_at_k(list, k),
                ptd: explanation::ptd_at_k(list, k),
                types: explanation::path_types_at_k(list, k),
                patterns: explanation::path_patterns_at_k(list, &ctx.bundle.kg, k)?,
            })
        })
        .collect()
}

fn significance(
    per_user: &BTreeMap<UserId, f64>,
    assignment: &GroupAssignment<UserId>,
) -> Option<TestResult> {
    let mut by_group: BTreeMap<&'static str, Vec<f64>> = BTreeMap::new();
    for (&u, &v) in per_user {
        if let Some(label) = assignment.group_of(u) {
            by_group.entry(label).or_default().push(v);
        }
    }
    let samples: Vec<Vec<f64>> = assignment
        .dimension
        .labels()
        .into_iter()
        .filter_map(|l| by_group.remove(l))
        .collect();
    match assignment.dimension {
        Dimension::Gender => {
            let [a, b] = samples.try_into().ok()?;
            welch_ttest(&a, &b).ok()
        }
        Dimension::Age => {
            if samples.len() < 2 {
                return None;
            }
            kruskal_h(&samples).ok()
        }
    }
}

fn group_coverage(
    evaluated: &[(UserId, &RecommendedList)],
    assignment: &GroupAssignment<UserId>,
    k: usize,
    catalog_size: usize,
) -> Result<FairnessReport> {
    let mut group_means = BTreeMap::new();
    let mut empty_groups = Vec::new();
    let mut means = Vec::new();
    for label in assignment.dimension.labels() {
        let lists: Vec<&RecommendedList> = evaluated
            .iter()
            .filter(|(u, _)| assignment.group_of(*u) == Some(label))
            .map(|&(_, l)| l)
            .collect();
        if lists.is_empty() {
            empty_groups.push(label.to_string());
        } else {
            let cov = metrics::coverage_at_k(lists, k, catalog_size)?;
            group_means.insert(label.to_string(), cov);
            means.push(cov);
        }
    }
    Ok(FairnessReport {
        dimension: assignment.dimension,
        group_means,
        empty_groups,
        delta: mean_abs_pairwise_delta(&means),
    })
}

fn dimension_fairness(
    ctx: &EvalContext,
    evaluated: &[(UserId, &RecommendedList)],
    per_metric: &BTreeMap<String, BTreeMap<UserId, f64>>,
    consumers: &GroupAssignment<UserId>,
    providers: &GroupAssignment<ProviderId>,
    k: usize,
) -> Result<DimensionFairness> {
    let mut consumer = BTreeMap::new();
    for (name, values) in per_metric {
        consumer.insert(
            name.clone(),
            FairnessOutcome {
                groups: group_delta(values, consumers),
                test: significance(values, consumers),
            },
        );
    }
    consumer.insert(
        "cov".into(),
        FairnessOutcome {
            groups: group_coverage(evaluated, consumers, k, ctx.bundle.catalog.len())?,
            test: None,
        },
    );
    let lists = evaluated.iter().map(|&(_, l)| l);
    let provider_exposure = provider_exposure(lists, &ctx.bundle.provider_of, providers, k);
    Ok(DimensionFairness {
        consumer,
        provider_exposure,
    })
}

/// Scores one method output against the context's split at every cutoff.
pub fn evaluate_method(
    ctx: &EvalContext,
    output: &MethodOutput,
    cfg: &EvalConfig,
) -> Result<MethodReport> {
    cfg.validate()?;
    let mut by_user: BTreeMap<UserId, &RecommendedList> = BTreeMap::new();
    for list in &output.lists {
        list.check()?;
        for e in &list.entries {
            if !ctx.bundle.catalog.contains(&e.product) {
                return Err(Error::Validation(format!(
                    "method {}: user {} is recommended product {}, which is not in the catalog",
                    output.name, list.user, e.product
                )));
            }
        }
        if by_user.insert(list.user, list).is_some() {
            return Err(Error::Validation(format!(
                "method {} has two lists for user {}",
                output.name, list.user
            )));
        }
    }
    let lists_ignored = by_user
        .keys()
        .filter(|u| !ctx.relevant.contains_key(u))
        .count();
    let evaluated: Vec<(UserId, &RecommendedList)> = by_user
        .iter()
        .filter(|(u, _)| ctx.relevant.contains_key(u))
        .map(|(&u, &l)| (u, l))
        .collect();
    let users_missing_output = ctx.relevant.len() - evaluated.len();
    let all_ks = cfg.all_cutoffs();

    let scored = run_map(cfg.exec, &evaluated, |&(u, l)| {
        score_user(ctx, u, l, &all_ks)
    });
    let scored: Vec<Vec<UserScores>> = scored.into_iter().collect::<Result<_>>()?;

    let mut type_totals = vec![0usize; all_ks.len()];
    let mut pattern_totals = vec![0usize; all_ks.len()];
    for (i, (tt, pt)) in type_totals.iter_mut().zip(&mut pattern_totals).enumerate() {
        let mut types: BTreeSet<&PathType> = BTreeSet::new();
        let mut patterns: BTreeSet<&PathPattern> = BTreeSet::new();
        for rows in &scored {
            types.extend(&rows[i].types);
            patterns.extend(&rows[i].patterns);
        }
        *tt = types.len();
        *pt = patterns.len();
    }

    let concentrations = run_map(cfg.exec, &evaluated, |&(_, l)| {
        all_ks
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                (
                    explanation::ptc_at_k(l, type_totals[i], k),
                    explanation::ppc_at_k(l, &ctx.bundle.kg, pattern_totals[i], k),
                )
            })
            .collect::<Vec<_>>()
    });

    let users: Vec<UserId> = evaluated.iter().map(|&(u, _)| u).collect();
    let column = |f: &dyn Fn(&UserScores) -> Option<f64>, i: usize| -> MetricSummary {
        MetricSummary::collect(users.iter().zip(&scored).map(|(&u, rows)| (u, f(&rows[i]))))
    };

    let mut utility = BTreeMap::new();
    let mut explanation_reports = BTreeMap::new();
    let mut fidelity_sweep = BTreeMap::new();
    let mut fairness = BTreeMap::new();
    for (i, &k) in all_ks.iter().enumerate() {
        let fid = column(&|s| Some(s.fid), i);
        if cfg.fidelity_cutoffs.contains(&k) {
            fidelity_sweep.insert(k, fid.mean.unwrap_or(0.0));
        }
        if !cfg.cutoffs.contains(&k) {
            continue;
        }
        let ndcg = column(&|s| s.ndcg, i);
        let mrr = column(&|s| s.mrr, i);
        let ser = column(&|s| Some(s.ser), i);
        let div = column(&|s| Some(s.div), i);
        let nov = column(&|s| Some(s.nov), i);
        let cov = metrics::coverage_at_k(
            evaluated.iter().map(|&(_, l)| l),
            k,
            ctx.bundle.catalog.len(),
        )?;

        let per_metric: BTreeMap<String, BTreeMap<UserId, f64>> = [
            ("ndcg", &ndcg),
            ("mrr", &mrr),
            ("ser", &ser),
            ("div", &div),
            ("nov", &nov),
        ]
        .into_iter()
        .map(|(name, s)| (name.to_string(), s.per_user.clone()))
        .collect();

        fairness.insert(
            k,
            FairnessBlock {
                k,
                gender: dimension_fairness(
                    ctx,
                    &evaluated,
                    &per_metric,
                    &ctx.consumer_gender,
                    &ctx.provider_gender,
                    k,
                )?,
                age: dimension_fairness(
                    ctx,
                    &evaluated,
                    &per_metric,
                    &ctx.consumer_age,
                    &ctx.provider_age,
                    k,
                )?,
            },
        );

        utility.insert(
            k,
            UtilityReport {
                k,
                ndcg,
                mrr,
                ser,
                div,
                nov,
                cov,
            },
        );
        explanation_reports.insert(
            k,
            ExplanationQualityReport {
                k,
                fid,
                lir: column(&|s| s.lir, i),
                lid: column(&|s| s.lid, i),
                sep: column(&|s| s.sep, i),
                sed: column(&|s| s.sed, i),
                ptd: column(&|s| s.ptd, i),
                ptc: MetricSummary::collect(
                    users.iter().zip(&concentrations).map(|(&u, c)| (u, c[i].0)),
                ),
                ppc: MetricSummary::collect(
                    users.iter().zip(&concentrations).map(|(&u, c)| (u, c[i].1)),
                ),
                distinct_path_types: type_totals[i],
                distinct_path_patterns: pattern_totals[i],
            },
        );
    }

    Ok(MethodReport {
        method: output.name.clone(),
        users_evaluated: evaluated.len(),
        users_missing_output,
        lists_ignored,
        invalid_paths: output.invalid_paths,
        utility,
        explanation: explanation_reports,
        fidelity_sweep,
        fairness,
    })
}
