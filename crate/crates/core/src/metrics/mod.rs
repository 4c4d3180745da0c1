//! Outcome aggregation: amendment-passing accuracy, resilience lift, paired
//! significance, procedural-integrity rates, and attention-curve fitting.
//!
//! Verdicts carrying a judge error are excluded from every denominator here;
//! run failures count as ordinary failures. All aggregates report how many
//! verdicts they excluded so a judge outage cannot silently shrink a sample.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use crate::forge::Tier;
use crate::judge::Verdict;
use crate::strategy::StrategyKind;

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("no scored verdicts (all excluded or empty input)")]
    NoScoredVerdicts,

    #[error("baseline accuracy is zero; lift is undefined")]
    ZeroBaseline,

    #[error("curve fit needs at least two distinct |x - 0.5| values")]
    RankDeficient,

    #[error("significance needs at least one shared trajectory, got {got}")]
    InsufficientPairs { got: usize },

    #[error("verdict references unknown trajectory {id}")]
    UnknownTrajectory { id: String },

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for MetricsError {
    fn from(e: std::io::Error) -> Self {
        MetricsError::Io(e.to_string())
    }
}

/// Amendment-passing accuracy over one verdict group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Apa {
    pub rate: f64,
    pub successes: u64,
    pub n_scored: u64,
    /// Verdicts dropped for judge errors.
    pub n_excluded: u64,
}

pub fn apa(verdicts: &[Verdict]) -> Result<Apa, MetricsError> {
    let mut successes = 0u64;
    let mut scored = 0u64;
    let mut excluded = 0u64;
    for v in verdicts {
        if v.judge_error.is_some() {
            excluded += 1;
            continue;
        }
        scored += 1;
        successes += u64::from(v.final_success);
    }
    if scored == 0 {
        return Err(MetricsError::NoScoredVerdicts);
    }
    Ok(Apa { rate: successes as f64 / scored as f64, successes, n_scored: scored, n_excluded: excluded })
}

/// Relative gain of a strategy over the vanilla baseline:
/// `(apa_strategy - apa_vanilla) / apa_vanilla`.
pub fn resilience_lift(apa_strategy: f64, apa_vanilla: f64) -> Result<f64, MetricsError> {
    if apa_vanilla <= 0.0 {
        return Err(MetricsError::ZeroBaseline);
    }
    Ok((apa_strategy - apa_vanilla) / apa_vanilla)
}

/// Procedural-integrity adherence rate over scored ssrp verdicts.
pub fn pi_rate(verdicts: &[Verdict]) -> Option<f64> {
    let mut adherent = 0u64;
    let mut n = 0u64;
    for v in verdicts {
        if v.judge_error.is_some() {
            continue;
        }
        if let Some(ok) = v.pi_adherent {
            n += 1;
            adherent += u64::from(ok);
        }
    }
    (n > 0).then(|| adherent as f64 / n as f64)
}

pub fn refusal_rate(verdicts: &[Verdict]) -> Option<f64> {
    let mut refusals = 0u64;
    let mut n = 0u64;
    for v in verdicts {
        if v.judge_error.is_some() {
            continue;
        }
        n += 1;
        refusals += u64::from(v.refusal);
    }
    (n > 0).then(|| refusals as f64 / n as f64)
}

/// Success pairs shared by two verdict groups, joined on trajectory id.
/// Judge-errored verdicts on either side drop the pair.
pub fn paired_outcomes(a: &[Verdict], b: &[Verdict]) -> Vec<(bool, bool)> {
    let index: BTreeMap<&str, &Verdict> = b
        .iter()
        .filter(|v| v.judge_error.is_none())
        .map(|v| (v.trajectory_id.as_str(), v))
        .collect();
    let mut pairs = Vec::new();
    for va in a {
        if va.judge_error.is_some() {
            continue;
        }
        if let Some(vb) = index.get(va.trajectory_id.as_str()) {
            pairs.push((va.final_success, vb.final_success));
        }
    }
    pairs
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Significance {
    pub n_pairs: u64,
    /// Absent when the paired t statistic is undefined (all differences
    /// equal, or fewer than two pairs).
    pub t_statistic: Option<f64>,
    /// Two-sided paired-t p-value; 1.0 or 0.0 on the degenerate paths.
    pub t_p: f64,
    pub t_degenerate: bool,
    /// Exact two-sided McNemar p-value.
    pub mcnemar_p: f64,
    /// Pairs where only the first group succeeded.
    pub discordant_b: u64,
    /// Pairs where only the second group succeeded.
    pub discordant_c: u64,
}

/// Paired t-test plus exact McNemar over shared-trajectory outcome pairs.
pub fn paired_significance(pairs: &[(bool, bool)]) -> Result<Significance, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::InsufficientPairs { got: 0 });
    }
    let n = pairs.len();
    let diffs: Vec<f64> =
        pairs.iter().map(|&(a, b)| f64::from(u8::from(a)) - f64::from(u8::from(b))).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let (t_statistic, t_p, t_degenerate) = if n < 2 {
        (None, if mean == 0.0 { 1.0 } else { 0.0 }, true)
    } else {
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        if var == 0.0 {
            (None, if mean == 0.0 { 1.0 } else { 0.0 }, true)
        } else {
            let t = mean / (var / n as f64).sqrt();
            let dist = StudentsT::new(0.0, 1.0, n as f64 - 1.0)
                .expect("valid student-t parameters");
            let p = 2.0 * (1.0 - dist.cdf(t.abs()));
            (Some(t), p.clamp(0.0, 1.0), false)
        }
    };

    let b = pairs.iter().filter(|&&(a, b)| a && !b).count() as u64;
    let c = pairs.iter().filter(|&&(a, b)| !a && b).count() as u64;
    Ok(Significance {
        n_pairs: n as u64,
        t_statistic,
        t_p,
        t_degenerate,
        mcnemar_p: mcnemar_exact(b, c),
        discordant_b: b,
        discordant_c: c,
    })
}

/// Exact two-sided McNemar p-value:
/// `min(1, 2 * sum_{k<=min(b,c)} C(b+c, k) / 2^(b+c))`, and 1.0 when there
/// are no discordant pairs. Exact integer arithmetic up to 50 discordant
/// pairs, log-space beyond.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let m = b.min(c);
    let tail = if n <= 50 {
        let mut acc = 0u128;
        let mut binom = 1u128; // C(n, 0)
        for k in 0..=m {
            if k > 0 {
                binom = binom * (n - k + 1) as u128 / k as u128;
            }
            acc += binom;
        }
        acc as f64 / 2f64.powi(n as i32)
    } else {
        let ln2 = std::f64::consts::LN_2;
        let mut acc = 0.0f64;
        for k in 0..=m {
            let ln_c = ln_gamma(n as f64 + 1.0)
                - ln_gamma(k as f64 + 1.0)
                - ln_gamma((n - k) as f64 + 1.0);
            acc += (ln_c - n as f64 * ln2).exp();
        }
        acc
    };
    (2.0 * tail).min(1.0)
}

/// Quadratic attention-curve fit. Least squares of observed retrieval rates
/// on `u = (x - 0.5)^2`, giving `P(x) = alpha * u + gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveFit {
    pub alpha: f64,
    pub gamma: f64,
    /// Sum of squared residuals at the fitted parameters.
    pub sse: f64,
    pub n_points: u64,
}

pub fn fit_attention_curve(points: &[(f64, f64)]) -> Result<CurveFit, MetricsError> {
    if points.len() < 2 {
        return Err(MetricsError::RankDeficient);
    }
    let n = points.len() as f64;
    let us: Vec<f64> = points.iter().map(|&(x, _)| (x - 0.5).powi(2)).collect();
    let ys: Vec<f64> = points.iter().map(|&(_, y)| y).collect();
    let su: f64 = us.iter().sum();
    let sy: f64 = ys.iter().sum();
    let suu: f64 = us.iter().map(|u| u * u).sum();
    let suy: f64 = us.iter().zip(&ys).map(|(u, y)| u * y).sum();
    let det = n * suu - su * su;
    if det.abs() < 1e-12 {
        return Err(MetricsError::RankDeficient);
    }
    let alpha = (n * suy - su * sy) / det;
    let gamma = (sy - alpha * su) / n;
    let sse = us.iter().zip(&ys).map(|(u, y)| (alpha * u + gamma - y).powi(2)).sum();
    Ok(CurveFit { alpha, gamma, sse, n_points: points.len() as u64 })
}

/// One (tier, strategy) cell of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub tier: Tier,
    pub strategy: StrategyKind,
    pub apa: f64,
    pub successes: u64,
    pub n_scored: u64,
    pub n_excluded: u64,
    pub refusal_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pi_rate: Option<f64>,
    /// `pi_rate - apa`; procedurally compliant yet semantically wrong.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grounding_gap: Option<f64>,
}

/// Per-tier comparison of a strategy against the vanilla baseline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftReport {
    pub tier: Tier,
    pub strategy: StrategyKind,
    /// Absent when the vanilla baseline is zero.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lift: Option<f64>,
    pub zero_baseline: bool,
    pub significance: Significance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_pair: String,
    pub groups: Vec<GroupReport>,
    pub comparisons: Vec<LiftReport>,
}

fn tier_index(tier: Tier) -> usize {
    Tier::ALL.iter().position(|t| *t == tier).unwrap_or(usize::MAX)
}

fn strategy_index(s: StrategyKind) -> usize {
    StrategyKind::ALL.iter().position(|k| *k == s).unwrap_or(usize::MAX)
}

/// Builds the full report from verdicts, resolving each trajectory's tier
/// through `tier_of`.
pub fn aggregate_report(
    verdicts: &[Verdict],
    tier_of: &BTreeMap<String, Tier>,
    model_pair: &str,
) -> Result<MetricsReport, MetricsError> {
    let mut cells: BTreeMap<(usize, usize), Vec<Verdict>> = BTreeMap::new();
    for v in verdicts {
        let tier = tier_of
            .get(&v.trajectory_id)
            .copied()
            .ok_or_else(|| MetricsError::UnknownTrajectory { id: v.trajectory_id.clone() })?;
        cells
            .entry((tier_index(tier), strategy_index(v.strategy)))
            .or_default()
            .push(v.clone());
    }

    let mut groups = Vec::new();
    for (&(ti, _), group) in &cells {
        let tier = Tier::ALL[ti];
        let strategy = group[0].strategy;
        let acc = apa(group)?;
        let pi = pi_rate(group);
        groups.push(GroupReport {
            tier,
            strategy,
            apa: acc.rate,
            successes: acc.successes,
            n_scored: acc.n_scored,
            n_excluded: acc.n_excluded,
            refusal_rate: refusal_rate(group).unwrap_or(0.0),
            pi_rate: pi,
            grounding_gap: pi.map(|p| p - acc.rate),
        });
    }

    let mut comparisons = Vec::new();
    for (&(ti, _), group) in &cells {
        let strategy = group[0].strategy;
        if strategy == StrategyKind::Vanilla {
            continue;
        }
        let Some(baseline) = cells.get(&(ti, strategy_index(StrategyKind::Vanilla))) else {
            continue;
        };
        let pairs = paired_outcomes(group, baseline);
        if pairs.is_empty() {
            continue;
        }
        let significance = paired_significance(&pairs)?;
        let apa_s = apa(group)?.rate;
        let apa_v = apa(baseline)?.rate;
        let lift = resilience_lift(apa_s, apa_v).ok();
        comparisons.push(LiftReport {
            tier: Tier::ALL[ti],
            strategy,
            lift,
            zero_baseline: lift.is_none(),
            significance,
        });
    }

    Ok(MetricsReport { model_pair: model_pair.to_string(), groups, comparisons })
}

pub fn write_report_json(report: &MetricsReport, path: &Path) -> Result<(), MetricsError> {
    let mut body = serde_json::to_string_pretty(report)
        .map_err(|e| MetricsError::Io(e.to_string()))?;
    body.push('\n');
    std::fs::write(path, body)?;
    Ok(())
}

fn fmt_rate(v: f64) -> String {
    format!("{v:.6}")
}

/// Flat CSV: one row per (tier, strategy) cell with the matching comparison
/// columns when a vanilla baseline exists.
pub fn write_report_csv(report: &MetricsReport, path: &Path) -> Result<(), MetricsError> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "model_pair,tier,strategy,apa,n,lift,t_p,mcnemar_p")?;
    for group in &report.groups {
        let comparison = report
            .comparisons
            .iter()
            .find(|c| c.tier == group.tier && c.strategy == group.strategy);
        let (lift, t_p, mc_p) = match comparison {
            Some(c) => (
                c.lift.map(fmt_rate).unwrap_or_default(),
                fmt_rate(c.significance.t_p),
                fmt_rate(c.significance.mcnemar_p),
            ),
            None => (String::new(), String::new(), String::new()),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            report.model_pair,
            group.tier.name(),
            group.strategy.name(),
            fmt_rate(group.apa),
            group.n_scored,
            lift,
            t_p,
            mc_p
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub apa: f64,
    pub strategy: StrategyKind,
}

pub fn write_curve_points_csv(points: &[CurvePoint], path: &Path) -> Result<(), MetricsError> {
    let mut out = std::fs::File::create(path)?;
    writeln!(out, "x,apa,strategy")?;
    for p in points {
        writeln!(out, "{},{},{}", fmt_rate(p.x), fmt_rate(p.apa), p.strategy.name())?;
    }
    Ok(())
}
