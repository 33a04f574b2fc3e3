//! Naive reference recomputation of every reported metric.
//!
//! Everything is recomputed from the raw inputs with plain loops and its own
//! special-function code, not through the library's metric, weighting, or
//! statistics paths, so a disagreement points at a defect rather than at a
//! shared bug.

use kgaudit::eval::{FairnessOutcome, MethodReport, MetricSummary};
use kgaudit::fairness::{Dimension, ExposureReport, FairnessReport};
use kgaudit::ingest::{DatasetBundle, Demographics};
use kgaudit::kg::{Direction, EntityId, Interaction, ProductId, ProviderId, UserId};
use kgaudit::rec::RecommendedList;
use kgaudit::split::SplitBundle;
use kgaudit::stattest::{TestKind, TestResult};
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

pub const TOL: f64 = 1e-9;

/// One evaluation run's inputs, as handed to the library.
pub struct Instance<'a> {
    pub bundle: &'a DatasetBundle,
    pub split: &'a SplitBundle,
    /// Popularity-baseline list per test user, an input to serendipity.
    pub baseline: &'a HashMap<UserId, RecommendedList>,
    pub lists: &'a [RecommendedList],
    pub cutoffs: &'a [usize],
    pub fidelity_cutoffs: &'a [usize],
    pub beta: f64,
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= TOL
}

fn check(cond: bool, what: &str) {
    assert!(cond, "oracle mismatch: {what}");
}

fn check_value(got: f64, want: f64, what: &str) {
    assert!(
        close(got, want),
        "oracle mismatch: {what}: got {got}, want {want}"
    );
}

fn check_opt(got: Option<f64>, want: Option<f64>, what: &str) {
    match (got, want) {
        (None, None) => {}
        (Some(g), Some(w)) => check_value(g, w, what),
        _ => panic!("oracle mismatch: {what}: got {got:?}, want {want:?}"),
    }
}

fn check_summary(got: &MetricSummary, want: &BTreeMap<UserId, f64>, what: &str) {
    check(
        got.defined_users == want.len(),
        &format!("{what}: defined {} vs {}", got.defined_users, want.len()),
    );
    check(
        got.per_user.keys().eq(want.keys()),
        &format!("{what}: user sets differ"),
    );
    for (u, &w) in want {
        check_value(got.per_user[u], w, &format!("{what} of user {u}"));
    }
    let mean = (!want.is_empty()).then(|| want.values().sum::<f64>() / want.len() as f64);
    check_opt(got.mean, mean, &format!("{what} mean"));
}

fn top(list: &RecommendedList, k: usize) -> &[kgaudit::rec::RecEntry] {
    &list.entries[..k.min(list.entries.len())]
}

fn discount(rank: usize) -> f64 {
    1.0 / ((rank + 1) as f64).log2()
}

type TypeKey = Vec<(u32, bool)>;
type PatternKey = (Vec<(u32, bool)>, Vec<u32>);

fn type_key(path: &kgaudit::kg::ReasoningPath) -> TypeKey {
    path.steps
        .iter()
        .map(|s| (s.relation.0, s.direction == Direction::Inverse))
        .collect()
}

fn pattern_key(path: &kgaudit::kg::ReasoningPath, bundle: &DatasetBundle) -> PatternKey {
    let inner = path.steps[..path.steps.len() - 1]
        .iter()
        .map(|s| bundle.kg.entity_type(s.entity).expect("typed entity").0)
        .collect();
    (type_key(path), inner)
}

fn entropy_over_total(counts: &BTreeMap<impl Ord, u64>, run_total: usize) -> f64 {
    if run_total <= 1 {
        return 0.0;
    }
    let n: u64 = counts.values().sum();
    let h: f64 = counts
        .values()
        .map(|&c| {
            let p = c as f64 / n as f64;
            -p * p.log2()
        })
        .sum();
    h / (run_total as f64).log2()
}

fn pairwise_delta(means: &[f64]) -> Option<f64> {
    if means.len() < 2 {
        return None;
    }
    let mut sum = 0.0;
    let mut pairs = 0u32;
    for (i, a) in means.iter().enumerate() {
        for b in &means[i + 1..] {
            sum += (a - b).abs();
            pairs += 1;
        }
    }
    Some(sum / f64::from(pairs))
}

/// Recency weights: per-user min-max normalized timestamps, smoothed with
/// `w_i = (1 - beta) w_{i-1} + beta v_i` after `w_1 = v_1`.
fn naive_lir_weights(train: &[Interaction], beta: f64) -> HashMap<(UserId, ProductId), f64> {
    let mut per_user: BTreeMap<UserId, Vec<Interaction>> = BTreeMap::new();
    for i in train {
        per_user.entry(i.user).or_default().push(*i);
    }
    let mut out = HashMap::new();
    for (user, mut rows) in per_user {
        rows.sort_by_key(|i| i.timestamp);
        let t_min = rows.first().map_or(0, |i| i.timestamp);
        let t_max = rows.last().map_or(0, |i| i.timestamp);
        let span = (t_max - t_min) as f64;
        let mut w = 0.0;
        for (i, row) in rows.iter().enumerate() {
            let v = if span == 0.0 {
                0.5
            } else {
                (row.timestamp - t_min) as f64 / span
            };
            w = if i == 0 {
                v
            } else {
                (1.0 - beta) * w + beta * v
            };
            out.insert((user, row.product), w);
        }
    }
    out
}

/// Popularity weights: `ln(1 + degree)` over the maximum within the entity's
/// type, degrees counted directly off the triple list.
fn naive_sep_weights(bundle: &DatasetBundle) -> HashMap<EntityId, f64> {
    let mut degree: HashMap<EntityId, u64> = HashMap::new();
    for t in bundle.kg.triples() {
        *degree.entry(t.head).or_insert(0) += 1;
        *degree.entry(t.tail).or_insert(0) += 1;
    }
    let mut max_of_type: HashMap<u32, f64> = HashMap::new();
    let mut logs: Vec<(EntityId, u32, f64)> = Vec::new();
    for &e in bundle.kg.entities() {
        let t = bundle.kg.entity_type(e).expect("typed entity").0;
        let d = (1.0 + degree.get(&e).copied().unwrap_or(0) as f64).ln();
        let slot = max_of_type.entry(t).or_insert(0.0);
        if d > *slot {
            *slot = d;
        }
        logs.push((e, t, d));
    }
    logs.into_iter()
        .map(|(e, t, d)| {
            let max = max_of_type[&t];
            (e, if max == 0.0 { 0.0 } else { d / max })
        })
        .collect()
}

fn ln_gamma(x: f64) -> f64 {
    const G: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.5203681218851,
        -1259.1392167224028,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507343278686905,
        -0.13857109526572012,
        9.984_369_578_019_572e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = G[0];
    for (i, &g) in G.iter().enumerate().skip(1) {
        a += g / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fvals: [f64; 3], eps: f64, depth: u32) -> f64 {
    let [fa, fm, fb] = fvals;
    let m = (a + b) / 2.0;
    let lm = (a + m) / 2.0;
    let rm = (m + b) / 2.0;
    let flm = f(lm);
    let frm = f(rm);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, [fa, flm, fm], eps / 2.0, depth - 1)
        + simpson(f, m, b, [fm, frm, fb], eps / 2.0, depth - 1)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let m = (a + b) / 2.0;
    simpson(f, a, b, [f(a), f(m), f(b)], 1e-13, 48)
}

/// Two-sided p of a t statistic: `1 - 2 * integral of the density on
/// [0, |t|]`.
fn student_two_sided_p(t: f64, df: f64) -> f64 {
    let c =
        (ln_gamma((df + 1.0) / 2.0) - ln_gamma(df / 2.0) - 0.5 * (df * std::f64::consts::PI).ln())
            .exp();
    let pdf = move |x: f64| c * (1.0 + x * x / df).powf(-(df + 1.0) / 2.0);
    (1.0 - 2.0 * integrate(&pdf, 0.0, t.abs())).clamp(0.0, 1.0)
}

/// Chi-squared survival `P(X > h)` via the substitution `x = u^2`, which
/// removes the endpoint singularity at one degree of freedom.
fn chi_squared_sf(h: f64, df: f64) -> f64 {
    if h <= 0.0 {
        return 1.0;
    }
    let ln_norm = (df / 2.0) * 2f64.ln() + ln_gamma(df / 2.0);
    let g = move |u: f64| {
        if u == 0.0 {
            if df == 1.0 {
                2.0 * (-ln_norm).exp()
            } else {
                0.0
            }
        } else {
            2.0 * ((df - 1.0) * u.ln() - u * u / 2.0 - ln_norm).exp()
        }
    };
    (1.0 - integrate(&g, 0.0, h.sqrt())).clamp(0.0, 1.0)
}

fn mean_var(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Unequal-variance t-test; `None` mirrors the degenerate inputs the
/// pipeline declines to test.
pub fn naive_welch(a: &[f64], b: &[f64]) -> Option<(f64, f64, f64)> {
    if a.len() < 2 || b.len() < 2 {
        return None;
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    if va == 0.0 && vb == 0.0 {
        return if ma == mb {
            Some((0.0, (a.len() + b.len() - 2) as f64, 1.0))
        } else {
            None
        };
    }
    let sa = va / a.len() as f64;
    let sb = vb / b.len() as f64;
    let t = (ma - mb) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2)
        / (sa.powi(2) / (a.len() as f64 - 1.0) + sb.powi(2) / (b.len() as f64 - 1.0));
    Some((t, df, student_two_sided_p(t, df)))
}

/// Rank test over two or more groups with mid-rank ties; `None` mirrors the
/// degenerate inputs the pipeline declines to test.
pub fn naive_kruskal(groups: &[Vec<f64>]) -> Option<(f64, f64, f64)> {
    if groups.len() < 2 || groups.iter().any(Vec::is_empty) {
        return None;
    }
    let n: usize = groups.iter().map(Vec::len).sum();
    if n < 3 {
        return None;
    }
    let mut pooled: Vec<(f64, usize)> = Vec::new();
    for g in groups {
        for &v in g {
            pooled.push((v, pooled.len()));
        }
    }
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        for row in &pooled[i..j] {
            ranks[row.1] = (i + 1 + j) as f64 / 2.0;
        }
        let t = (j - i) as f64;
        tie_term += t.powi(3) - t;
        i = j;
    }
    let nf = n as f64;
    let df = (groups.len() - 1) as f64;
    let correction = 1.0 - tie_term / (nf.powi(3) - nf);
    if correction == 0.0 {
        return Some((0.0, df, 1.0));
    }
    let mut offset = 0;
    let mut rank_sq = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        rank_sq += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = (12.0 / (nf * (nf + 1.0)) * rank_sq - 3.0 * (nf + 1.0)) / correction;
    Some((h, df, chi_squared_sf(h, df)))
}

fn check_test(got: &Option<TestResult>, want: Option<(TestKind, f64, f64, f64)>, what: &str) {
    match (got, want) {
        (None, None) => {}
        (Some(g), Some((kind, stat, df, p))) => {
            check(g.kind == kind, &format!("{what}: test kind"));
            check_value(g.statistic, stat, &format!("{what}: statistic"));
            check_value(g.df, df, &format!("{what}: df"));
            check_value(g.p_value, p, &format!("{what}: p-value"));
        }
        _ => panic!("oracle mismatch: {what}: presence {got:?} vs {want:?}"),
    }
}

struct Grouping {
    labels: Vec<&'static str>,
    of_user: BTreeMap<UserId, &'static str>,
    of_provider: BTreeMap<ProviderId, &'static str>,
}

fn grouping(bundle: &DatasetBundle, dim: Dimension) -> Grouping {
    let label_of = |d: &Demographics| match dim {
        Dimension::Gender => d.gender.map(|g| g.label()),
        Dimension::Age => d.age.map(|a| a.label()),
    };
    Grouping {
        labels: dim.labels(),
        of_user: bundle
            .user_attributes
            .iter()
            .filter_map(|(&u, d)| label_of(d).map(|l| (u, l)))
            .collect(),
        of_provider: bundle
            .provider_attributes
            .iter()
            .filter_map(|(&p, d)| label_of(d).map(|l| (p, l)))
            .collect(),
    }
}

fn check_group_report(
    got: &FairnessReport,
    values: &BTreeMap<UserId, f64>,
    g: &Grouping,
    what: &str,
) {
    let mut sums: BTreeMap<&str, (f64, u64)> = BTreeMap::new();
    for (u, &v) in values {
        if let Some(&label) = g.of_user.get(u) {
            let slot = sums.entry(label).or_insert((0.0, 0));
            slot.0 += v;
            slot.1 += 1;
        }
    }
    let mut means = Vec::new();
    let mut empty = Vec::new();
    for &label in &g.labels {
        match sums.get(label) {
            Some(&(s, n)) => {
                let mean = s / n as f64;
                check_value(
                    got.group_means[label],
                    mean,
                    &format!("{what}: group {label}"),
                );
                means.push(mean);
            }
            None => empty.push(label.to_string()),
        }
    }
    check(
        got.group_means.len() == means.len(),
        &format!("{what}: group count"),
    );
    check(got.empty_groups == empty, &format!("{what}: empty groups"));
    check_opt(got.delta, pairwise_delta(&means), &format!("{what}: delta"));
}

fn check_significance(
    got: &Option<TestResult>,
    values: &BTreeMap<UserId, f64>,
    g: &Grouping,
    dim: Dimension,
    what: &str,
) {
    let mut by_group: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (u, &v) in values {
        if let Some(&label) = g.of_user.get(u) {
            by_group.entry(label).or_default().push(v);
        }
    }
    let samples: Vec<Vec<f64>> = g.labels.iter().filter_map(|l| by_group.remove(l)).collect();
    let want = match dim {
        Dimension::Gender => {
            if samples.len() != 2 {
                None
            } else {
                naive_welch(&samples[0], &samples[1]).map(|(t, df, p)| (TestKind::WelchT, t, df, p))
            }
        }
        Dimension::Age => {
            if samples.len() < 2 {
                None
            } else {
                naive_kruskal(&samples).map(|(h, df, p)| (TestKind::KruskalH, h, df, p))
            }
        }
    };
    check_test(got, want, what);
}

fn check_exposure(
    got: &ExposureReport,
    evaluated: &[(UserId, &RecommendedList)],
    bundle: &DatasetBundle,
    g: &Grouping,
    k: usize,
    what: &str,
) {
    let populated: Vec<&str> = g
        .labels
        .iter()
        .copied()
        .filter(|l| g.of_provider.values().any(|v| v == l))
        .collect();
    let mut sums: BTreeMap<&str, f64> = populated.iter().map(|&l| (l, 0.0)).collect();
    let mut unattributed = 0.0;
    let mut n = 0usize;
    for &(_, list) in evaluated {
        let window = top(list, k);
        if window.is_empty() {
            continue;
        }
        n += 1;
        let total: f64 = window.iter().map(|e| discount(e.rank as usize)).sum();
        for e in window {
            let w = discount(e.rank as usize) / total;
            let label = bundle
                .provider_of
                .get(&e.product)
                .and_then(|p| g.of_provider.get(p).copied());
            match label {
                Some(l) => *sums.get_mut(l).expect("populated label") += w,
                None => unattributed += w,
            }
        }
    }
    let mut means = Vec::new();
    for &label in &populated {
        let mean = if n == 0 { 0.0 } else { sums[label] / n as f64 };
        check_value(
            got.group_exposure[label],
            mean,
            &format!("{what}: exposure of {label}"),
        );
        means.push(mean);
    }
    check(
        got.group_exposure.len() == populated.len(),
        &format!("{what}: exposure group count"),
    );
    let empty: Vec<String> = g
        .labels
        .iter()
        .filter(|l| !populated.contains(l))
        .map(|l| l.to_string())
        .collect();
    check(got.empty_groups == empty, &format!("{what}: empty groups"));
    check_value(
        got.unattributed_share,
        if n == 0 { 0.0 } else { unattributed / n as f64 },
        &format!("{what}: unattributed"),
    );
    let delta = if n == 0 { None } else { pairwise_delta(&means) };
    check_opt(got.delta, delta, &format!("{what}: delta"));
    check(got.lists == n, &format!("{what}: list count"));
}

/// Recomputes every value in `report` from first principles and panics on
/// the first disagreement beyond `TOL`.
pub fn verify(report: &MethodReport, inst: &Instance) {
    let bundle = inst.bundle;
    let mut relevant: BTreeMap<UserId, HashSet<ProductId>> = BTreeMap::new();
    for i in &inst.split.test {
        relevant.entry(i.user).or_default().insert(i.product);
    }
    let mut evaluated: Vec<(UserId, &RecommendedList)> = inst
        .lists
        .iter()
        .filter(|l| relevant.contains_key(&l.user))
        .map(|l| (l.user, l))
        .collect();
    evaluated.sort_by_key(|&(u, _)| u);

    check(report.users_evaluated == evaluated.len(), "users_evaluated");
    check(
        report.users_missing_output == relevant.len() - evaluated.len(),
        "users_missing_output",
    );
    check(
        report.lists_ignored == inst.lists.len() - evaluated.len(),
        "lists_ignored",
    );

    let mut pop: HashMap<ProductId, u64> = HashMap::new();
    for i in &inst.split.train {
        *pop.entry(i.product).or_insert(0) += 1;
    }
    let pop_max = pop.values().copied().max().unwrap_or(0);
    let lir = naive_lir_weights(&inst.split.train, inst.beta);
    let sep = naive_sep_weights(bundle);
    let gender = grouping(bundle, Dimension::Gender);
    let age = grouping(bundle, Dimension::Age);

    check(
        report
            .utility
            .keys()
            .copied()
            .eq(inst.cutoffs.iter().copied()),
        "utility cutoffs",
    );
    check(
        report
            .fidelity_sweep
            .keys()
            .copied()
            .eq(inst.fidelity_cutoffs.iter().copied()),
        "fidelity cutoffs",
    );

    let all_ks: BTreeSet<usize> = inst
        .cutoffs
        .iter()
        .chain(inst.fidelity_cutoffs)
        .copied()
        .collect();
    for &k in &all_ks {
        let mut fid: BTreeMap<UserId, f64> = BTreeMap::new();
        for &(u, list) in &evaluated {
            let denom = k.min(list.entries.len());
            let explained = top(list, k).iter().filter(|e| e.path.is_some()).count();
            fid.insert(
                u,
                if denom == 0 {
                    0.0
                } else {
                    explained as f64 / denom as f64
                },
            );
        }
        if inst.fidelity_cutoffs.contains(&k) {
            let mean = if fid.is_empty() {
                0.0
            } else {
                fid.values().sum::<f64>() / fid.len() as f64
            };
            check_value(
                report.fidelity_sweep[&k],
                mean,
                &format!("fidelity sweep at {k}"),
            );
        }
        if !inst.cutoffs.contains(&k) {
            continue;
        }

        let mut ndcg = BTreeMap::new();
        let mut mrr = BTreeMap::new();
        let mut ser = BTreeMap::new();
        let mut div = BTreeMap::new();
        let mut nov = BTreeMap::new();
        let mut covered: HashSet<ProductId> = HashSet::new();
        for &(u, list) in &evaluated {
            let rel = &relevant[&u];
            let window = top(list, k);
            covered.extend(window.iter().map(|e| e.product));

            if !rel.is_empty() {
                let dcg: f64 = window
                    .iter()
                    .enumerate()
                    .filter(|(_, e)| rel.contains(&e.product))
                    .map(|(i, _)| discount(i + 1))
                    .sum();
                let ideal: f64 = (1..=k.min(rel.len())).map(discount).sum();
                ndcg.insert(u, dcg / ideal);
                let hit = window.iter().position(|e| rel.contains(&e.product));
                mrr.insert(u, hit.map_or(0.0, |i| 1.0 / (i + 1) as f64));
            }

            let expected: HashSet<ProductId> = top(&inst.baseline[&u], k)
                .iter()
                .map(|e| e.product)
                .collect();
            let unexpected = window
                .iter()
                .filter(|e| !expected.contains(&e.product))
                .count();
            ser.insert(u, unexpected as f64 / k as f64);

            let mut cats: HashSet<EntityId> = HashSet::new();
            for e in window {
                if let Some(cs) = bundle.category_of.get(&e.product) {
                    cats.extend(cs.iter().copied());
                }
            }
            div.insert(u, cats.len() as f64 / k as f64);

            let value = if window.is_empty() {
                0.0
            } else {
                window
                    .iter()
                    .map(|e| {
                        if pop_max == 0 {
                            1.0
                        } else {
                            1.0 - pop.get(&e.product).copied().unwrap_or(0) as f64 / pop_max as f64
                        }
                    })
                    .sum::<f64>()
                    / window.len() as f64
            };
            nov.insert(u, value);
        }
        let u = &report.utility[&k];
        check_summary(&u.ndcg, &ndcg, &format!("ndcg@{k}"));
        check_summary(&u.mrr, &mrr, &format!("mrr@{k}"));
        check_summary(&u.ser, &ser, &format!("ser@{k}"));
        check_summary(&u.div, &div, &format!("div@{k}"));
        check_summary(&u.nov, &nov, &format!("nov@{k}"));
        check_value(
            u.cov,
            covered.len() as f64 / bundle.catalog.len() as f64,
            &format!("cov@{k}"),
        );

        let mut run_types: BTreeSet<TypeKey> = BTreeSet::new();
        let mut run_patterns: BTreeSet<PatternKey> = BTreeSet::new();
        let mut per_list_types: Vec<BTreeMap<TypeKey, u64>> = Vec::new();
        let mut per_list_patterns: Vec<BTreeMap<PatternKey, u64>> = Vec::new();
        let mut lir_vals = BTreeMap::new();
        let mut sep_vals = BTreeMap::new();
        let mut lid_vals = BTreeMap::new();
        let mut sed_vals = BTreeMap::new();
        let mut ptd_vals = BTreeMap::new();
        for &(user, list) in &evaluated {
            let paths: Vec<_> = top(list, k)
                .iter()
                .filter_map(|e| e.path.as_ref())
                .collect();
            let mut types: BTreeMap<TypeKey, u64> = BTreeMap::new();
            let mut patterns: BTreeMap<PatternKey, u64> = BTreeMap::new();
            for p in &paths {
                *types.entry(type_key(p)).or_insert(0) += 1;
                *patterns.entry(pattern_key(p, bundle)).or_insert(0) += 1;
            }
            run_types.extend(types.keys().cloned());
            run_patterns.extend(patterns.keys().cloned());
            per_list_types.push(types);
            per_list_patterns.push(patterns);
            if paths.is_empty() {
                continue;
            }

            let mut lir_sum = 0.0;
            let mut lir_n = 0usize;
            let mut sep_sum = 0.0;
            let mut sep_n = 0usize;
            let mut linkings: HashSet<ProductId> = HashSet::new();
            let mut shareds: HashSet<EntityId> = HashSet::new();
            let mut type_set: HashSet<TypeKey> = HashSet::new();
            for p in &paths {
                let linking = p.steps[0].entity.as_product();
                let shared = p.steps[p.steps.len() - 2].entity;
                if let Some(&w) = lir.get(&(user, linking)) {
                    lir_sum += w;
                    lir_n += 1;
                }
                if let Some(&w) = sep.get(&shared) {
                    sep_sum += w;
                    sep_n += 1;
                }
                linkings.insert(linking);
                shareds.insert(shared);
                type_set.insert(type_key(p));
            }
            if lir_n > 0 {
                lir_vals.insert(user, lir_sum / lir_n as f64);
            }
            if sep_n > 0 {
                sep_vals.insert(user, sep_sum / sep_n as f64);
            }
            lid_vals.insert(user, linkings.len() as f64 / paths.len() as f64);
            sed_vals.insert(user, shareds.len() as f64 / paths.len() as f64);
            ptd_vals.insert(user, type_set.len() as f64 / paths.len() as f64);
        }
        let mut ptc_vals = BTreeMap::new();
        let mut ppc_vals = BTreeMap::new();
        for (i, &(user, _)) in evaluated.iter().enumerate() {
            if per_list_types[i].is_empty() {
                continue;
            }
            ptc_vals.insert(
                user,
                entropy_over_total(&per_list_types[i], run_types.len()),
            );
            ppc_vals.insert(
                user,
                entropy_over_total(&per_list_patterns[i], run_patterns.len()),
            );
        }

        let e = &report.explanation[&k];
        check_summary(&e.fid, &fid, &format!("fid@{k}"));
        check_summary(&e.lir, &lir_vals, &format!("lir@{k}"));
        check_summary(&e.lid, &lid_vals, &format!("lid@{k}"));
        check_summary(&e.sep, &sep_vals, &format!("sep@{k}"));
        check_summary(&e.sed, &sed_vals, &format!("sed@{k}"));
        check_summary(&e.ptd, &ptd_vals, &format!("ptd@{k}"));
        check_summary(&e.ptc, &ptc_vals, &format!("ptc@{k}"));
        check_summary(&e.ppc, &ppc_vals, &format!("ppc@{k}"));
        check(
            e.distinct_path_types == run_types.len(),
            &format!("distinct path types @{k}"),
        );
        check(
            e.distinct_path_patterns == run_patterns.len(),
            &format!("distinct path patterns @{k}"),
        );

        let per_metric: [(&str, &BTreeMap<UserId, f64>); 5] = [
            ("ndcg", &ndcg),
            ("mrr", &mrr),
            ("ser", &ser),
            ("div", &div),
            ("nov", &nov),
        ];
        let block = &report.fairness[&k];
        for (dim, g, side) in [
            (Dimension::Gender, &gender, &block.gender),
            (Dimension::Age, &age, &block.age),
        ] {
            for (name, values) in per_metric {
                let what = format!("{dim} fairness of {name}@{k}");
                let outcome: &FairnessOutcome = &side.consumer[name];
                check_group_report(&outcome.groups, values, g, &what);
                check_significance(&outcome.test, values, g, dim, &what);
            }
            let cov_outcome = &side.consumer["cov"];
            let mut cov_means = Vec::new();
            let mut cov_empty = Vec::new();
            for &label in &g.labels {
                let members: Vec<&RecommendedList> = evaluated
                    .iter()
                    .filter(|(u, _)| g.of_user.get(u) == Some(&label))
                    .map(|&(_, l)| l)
                    .collect();
                if members.is_empty() {
                    cov_empty.push(label.to_string());
                    continue;
                }
                let mut seen: HashSet<ProductId> = HashSet::new();
                for l in members {
                    seen.extend(top(l, k).iter().map(|e| e.product));
                }
                let mean = seen.len() as f64 / bundle.catalog.len() as f64;
                check_value(
                    cov_outcome.groups.group_means[label],
                    mean,
                    &format!("{dim} cov@{k} of {label}"),
                );
                cov_means.push(mean);
            }
            check(
                cov_outcome.groups.empty_groups == cov_empty,
                &format!("{dim} cov@{k} empty groups"),
            );
            check_opt(
                cov_outcome.groups.delta,
                pairwise_delta(&cov_means),
                &format!("{dim} cov@{k} delta"),
            );
            check(cov_outcome.test.is_none(), &format!("{dim} cov@{k} test"));
            check_exposure(
                &side.provider_exposure,
                &evaluated,
                bundle,
                g,
                k,
                &format!("{dim} exposure@{k}"),
            );
        }
    }
}
