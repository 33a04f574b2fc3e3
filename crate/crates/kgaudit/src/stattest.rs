//! Significance tests comparing metric samples across method families or
//! demographic groups.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestKind {
    WelchT,
    KruskalH,
}

/// Outcome of one two-sided significance test.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TestResult {
    pub kind: TestKind,
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
}

fn mean_and_variance(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let var = sample.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Two-sided unequal-variance t-test with Welch–Satterthwaite degrees of
/// freedom.
///
/// Identical constant samples are a defined degenerate case (`t = 0`,
/// `p = 1`); samples shorter than 2 values, or two zero-variance samples
/// with different means, are usage errors.
pub fn welch_ttest(a: &[f64], b: &[f64]) -> Result<TestResult> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Usage(format!(
            "each sample needs at least 2 values, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let (mean_a, var_a) = mean_and_variance(a);
    let (mean_b, var_b) = mean_and_variance(b);
    if var_a == 0.0 && var_b == 0.0 {
        if mean_a == mean_b {
            return Ok(TestResult {
                kind: TestKind::WelchT,
                statistic: 0.0,
                df: (a.len() + b.len() - 2) as f64,
                p_value: 1.0,
            });
        }
        return Err(Error::Usage(
            "both samples have zero variance but different means".into(),
        ));
    }
    let sa = var_a / a.len() as f64;
    let sb = var_b / b.len() as f64;
    let t = (mean_a - mean_b) / (sa + sb).sqrt();
    let df = (sa + sb).powi(2)
        / (sa.powi(2) / (a.len() as f64 - 1.0) + sb.powi(2) / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df)
        .map_err(|e| Error::Invariant(format!("t-distribution with df {df}: {e}")))?;
    Ok(TestResult {
        kind: TestKind::WelchT,
        statistic: t,
        df,
        p_value: (2.0 * dist.cdf(-t.abs())).min(1.0),
    })
}

fn midranks(pooled: &mut [(f64, usize)]) -> (Vec<f64>, f64) {
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let n = pooled.len();
    let mut ranks = vec![0.0; n];
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && pooled[j].0 == pooled[i].0 {
            j += 1;
        }
        let mid = (i + 1 + j) as f64 / 2.0;
        for row in &pooled[i..j] {
            ranks[row.1] = mid;
        }
        let t = (j - i) as f64;
        tie_term += t.powi(3) - t;
        i = j;
    }
    (ranks, tie_term)
}

/// Kruskal–Wallis H test over two or more value groups, with mid-rank ties
/// correction and a chi-squared approximation on `groups − 1` degrees of
/// freedom.
///
/// All-identical values are a defined degenerate case (`H = 0`, `p = 1`);
/// fewer than two groups, an empty group, or fewer than 3 values overall are
/// usage errors.
pub fn kruskal_h(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::Usage(format!(
            "the h-test needs at least 2 groups, got {}",
            groups.len()
        )));
    }
    if let Some(i) = groups.iter().position(|g| g.is_empty()) {
        return Err(Error::Usage(format!("group {i} is empty")));
    }
    let n: usize = groups.iter().map(|g| g.len()).sum();
    if n < 3 {
        return Err(Error::Usage(format!(
            "the h-test needs at least 3 values overall, got {n}"
        )));
    }
    let mut pooled: Vec<(f64, usize)> = Vec::with_capacity(n);
    for g in groups {
        for &v in g {
            pooled.push((v, pooled.len()));
        }
    }
    let (ranks, tie_term) = midranks(&mut pooled);

    let nf = n as f64;
    let df = (groups.len() - 1) as f64;
    let correction = 1.0 - tie_term / (nf.powi(3) - nf);
    if correction == 0.0 {
        return Ok(TestResult {
            kind: TestKind::KruskalH,
            statistic: 0.0,
            df,
            p_value: 1.0,
        });
    }
    let mut offset = 0;
    let mut rank_sq_sum = 0.0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        rank_sq_sum += r * r / g.len() as f64;
        offset += g.len();
    }
    let h = (12.0 / (nf * (nf + 1.0)) * rank_sq_sum - 3.0 * (nf + 1.0)) / correction;
    let dist = ChiSquared::new(df)
        .map_err(|e| Error::Invariant(format!("chi-squared with df {df}: {e}")))?;
    Ok(TestResult {
        kind: TestKind::KruskalH,
        statistic: h,
        df,
        p_value: dist.sf(h).clamp(0.0, 1.0),
    })
}
