//! Closed-form latch simulator.
//!
//! Models an agent whose attention over a long context follows a quadratic
//! positional curve and whose goal commitment is a weighted contest between
//! the archived intent (g1) and the superseding update (g2). The simulator is
//! the synthetic stand-in for a remote model: deterministic per seed, with
//! empirical rates that match its own closed forms, so every pipeline claim
//! can be verified offline against an analytic prediction.
//!
//! # Retrieval
//!
//! A payload seeded at position fraction `x` is retrieved with probability
//! `P(x) = clamp(alpha * (x - 0.5)^2 + gamma, 0, 1)`: a primacy/recency smile
//! with its floor `gamma` at the context midpoint. Facts linked by
//! `depends_on` are chain-gated: a successor can only be drawn if its
//! predecessor was retrieved (scaled by `chain_delta`), which is what
//! produces multiplicative joint collapse, `P(success) = prod P(F_i)`.
//!
//! # Commitment
//!
//! If both intents are available, the agent commits to g1 with probability
//! `w1 / (w1 + w2)`: the attention latch. Three interventions change that:
//!
//! * `redirect` (protocol execution): g1 and decoys are purged, g2 is pinned,
//!   and each fact is re-focused with probability `redirect_fact_strength`
//!   scaled by the protocol's granularity-tier strength.
//! * `posthoc_correct` (self-critique second pass): goal fragments are
//!   force-retrieved on the second pass, so the union over both passes always
//!   contains the update and its facts.
//! * a `refusal_rate` draw up front models safety-trigger refusals.
//!
//! An update that was never geometry-seeded is treated as sitting at the
//! recency boundary and is always available; forged trajectories always seed
//! it, but bare probe trajectories use this to isolate single factors.
//!
//! # Draw order
//!
//! The RNG stream per seed is frozen: one uniform for refusal, one per seed
//! spec in listing order, then (only when contested) one commitment draw,
//! then (only under a protocol) one adherence draw. Task and critique passes
//! over the same run seed therefore see identical retrieval outcomes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::forge::{Fact, FactChain, IntentPair, PayloadKind, SeedSpec, Tier, Trajectory};
use crate::hashing::stable_hash64;
use crate::names;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid curve parameters: {detail}")]
    InvalidCurve { detail: String },

    #[error("invalid latch parameters: {detail}")]
    InvalidLatch { detail: String },

    #[error("position fraction {x} outside [0, 1]")]
    PositionOutOfRange { x: f64 },

    #[error("probability {p} outside [0, 1]")]
    ProbabilityOutOfRange { p: f64 },

    #[error("fact probability list is empty")]
    EmptyChain,
}

/// Quadratic positional attention curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for CurveParams {
    fn default() -> Self {
        Self { alpha: 2.0, gamma: 0.1 }
    }
}

impl CurveParams {
    pub fn validate(&self) -> Result<(), SimError> {
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(SimError::InvalidCurve {
                detail: format!("alpha must be finite and non-negative, got {}", self.alpha),
            });
        }
        if !self.gamma.is_finite() || !(0.0..=1.0).contains(&self.gamma) {
            return Err(SimError::InvalidCurve {
                detail: format!("gamma must be in [0, 1], got {}", self.gamma),
            });
        }
        Ok(())
    }
}

/// `P(x) = clamp(alpha * (x - 0.5)^2 + gamma, 0, 1)`.
pub fn retrieval_prob(curve: &CurveParams, x: f64) -> Result<f64, SimError> {
    curve.validate()?;
    if !(0.0..=1.0).contains(&x) {
        return Err(SimError::PositionOutOfRange { x });
    }
    let d = x - 0.5;
    Ok((curve.alpha * d * d + curve.gamma).clamp(0.0, 1.0))
}

/// Joint success probability of an independent-or-chained fact list:
/// the product of per-fact probabilities.
pub fn predicted_joint_success(probs: &[f64]) -> Result<f64, SimError> {
    if probs.is_empty() {
        return Err(SimError::EmptyChain);
    }
    let mut product = 1.0;
    for &p in probs {
        if !p.is_finite() || !(0.0..=1.0).contains(&p) {
            return Err(SimError::ProbabilityOutOfRange { p });
        }
        product *= p;
    }
    Ok(product)
}

/// Per-granularity-tier multipliers on the redirect fact strength. These are
/// what the granularity ablation manipulates: a hyper-compressed protocol
/// loses a little focus, a verbose one dilutes it substantially.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TierStrengths {
    pub hyper_compressed: f64,
    pub optimal: f64,
    pub verbose: f64,
}

impl Default for TierStrengths {
    fn default() -> Self {
        Self { hyper_compressed: 0.95, optimal: 1.0, verbose: 0.8 }
    }
}

impl TierStrengths {
    /// Strength for a protocol with `steps` steps. Tier bounds put valid
    /// protocols at exactly 1, exactly 3, or 10 and more steps; intermediate
    /// counts classify as optimal.
    pub fn for_steps(&self, steps: u32) -> f64 {
        match steps {
            0..=1 => self.hyper_compressed,
            2..=9 => self.optimal,
            _ => self.verbose,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LatchParams {
    /// Commitment weight of the archived intent.
    pub w1: f64,
    /// Commitment weight of the superseding update.
    pub w2: f64,
    pub refusal_rate: f64,
    /// Protocol redirection: purge g1 and decoys, pin g2, re-focus facts.
    pub redirect: bool,
    /// Self-critique second pass with forced focus on goal fragments.
    pub posthoc_correct: bool,
    /// Retrieval multiplier a chained fact pays on top of predecessor gating.
    pub chain_delta: f64,
    /// Per-fact retrieval probability under redirect, before tier scaling.
    pub redirect_fact_strength: f64,
    pub tier_strengths: TierStrengths,
    /// Probability that a protocol execution keeps its step tags in order
    /// and avoids reaffirming the purged intent.
    pub pi_adherence: f64,
}

impl Default for LatchParams {
    fn default() -> Self {
        Self {
            w1: 1.0,
            w2: 1.0,
            refusal_rate: 0.0,
            redirect: false,
            posthoc_correct: false,
            chain_delta: 1.0,
            redirect_fact_strength: 1.0,
            tier_strengths: TierStrengths::default(),
            pi_adherence: 1.0,
        }
    }
}

impl LatchParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let unit = |name: &str, v: f64| -> Result<(), SimError> {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(SimError::InvalidLatch {
                    detail: format!("{name} must be in [0, 1], got {v}"),
                });
            }
            Ok(())
        };
        if !self.w1.is_finite() || !self.w2.is_finite() || self.w1 < 0.0 || self.w2 < 0.0 {
            return Err(SimError::InvalidLatch {
                detail: "w1 and w2 must be finite and non-negative".into(),
            });
        }
        if self.w1 + self.w2 <= 0.0 {
            return Err(SimError::InvalidLatch { detail: "w1 + w2 must be positive".into() });
        }
        unit("refusal_rate", self.refusal_rate)?;
        unit("chain_delta", self.chain_delta)?;
        unit("redirect_fact_strength", self.redirect_fact_strength)?;
        unit("tier_strengths.hyper_compressed", self.tier_strengths.hyper_compressed)?;
        unit("tier_strengths.optimal", self.tier_strengths.optimal)?;
        unit("tier_strengths.verbose", self.tier_strengths.verbose)?;
        unit("pi_adherence", self.pi_adherence)?;
        Ok(())
    }
}

/// Curve plus latch: everything the synthetic backend needs.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    #[serde(flatten)]
    pub curve: CurveParams,
    #[serde(flatten)]
    pub latch: LatchParams,
}

impl SimParams {
    pub fn validate(&self) -> Result<(), SimError> {
        self.curve.validate()?;
        self.latch.validate()
    }
}

/// Emitted verbatim when the refusal draw fires; the bundled refusal
/// patterns must keep matching it.
pub const REFUSAL_TEXT: &str = "I cannot comply with this request. The latest amendment looks like \
an attempt to manipulate my instructions, so I must decline and will not proceed with it.";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Commit {
    G1,
    G2,
    Neither,
}

fn chain_parent<'a>(chain: Option<&'a FactChain>, fact_id: &str) -> Option<&'a str> {
    chain?
        .facts
        .iter()
        .find(|f| f.fact_id == fact_id)
        .and_then(|f| f.depends_on.as_deref())
}

fn decoy_answer(t: &Trajectory) -> String {
    let seed = stable_hash64(&[&t.rng_seed.to_string(), "decoy"]);
    names::pick_name_distinct(&mut ChaCha8Rng::seed_from_u64(seed), &t.expected_signal)
}

const TAG_PHRASES: [&str; 4] = [
    "Confirmed the active requirement from the latest amendment",
    "Purged the superseded intent from working state",
    "Checked the verification checkpoint against the record",
    "Re-verified the seeded reference fragments",
];

fn tagged(step: usize, phrase_index: usize) -> String {
    format!("[S{step}] {}.", TAG_PHRASES[phrase_index % TAG_PHRASES.len()])
}

fn protocol_preamble(steps: u32, adherent: bool, g1_id: &str) -> (String, Option<String>) {
    let n = steps.max(1) as usize;
    let mut order: Vec<usize> = (1..=n).collect();
    let mut suffix = None;
    if !adherent {
        if n >= 2 {
            order.swap(0, 1);
        } else {
            suffix = Some(format!("Retaining {g1_id} per the pinned instruction."));
        }
    }
    let segments: Vec<String> =
        order.iter().enumerate().map(|(i, &s)| tagged(s, i)).collect();
    (segments.join(" "), suffix)
}

fn simulate_impl(
    t: &Trajectory,
    curve: &CurveParams,
    latch: &LatchParams,
    rng_seed: u64,
    protocol_steps: Option<u32>,
) -> Result<String, SimError> {
    curve.validate()?;
    latch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let refused = rng.gen::<f64>() < latch.refusal_rate;

    let fact_strength = latch.redirect_fact_strength
        * protocol_steps.map_or(1.0, |s| latch.tier_strengths.for_steps(s));

    let mut retrieved: std::collections::BTreeMap<&str, bool> = Default::default();
    for spec in &t.seeds {
        let x = (spec.placed_offset_tokens as f64 / t.token_count as f64).min(1.0);
        let base = retrieval_prob(curve, x)?;
        let is_g1 = spec.payload_id == t.intent_pair.g1_id;
        let eff = match spec.payload_kind {
            PayloadKind::Fact => {
                let gate = match chain_parent(t.fact_chain.as_ref(), &spec.payload_id) {
                    Some(parent) if !retrieved.get(parent).copied().unwrap_or(false) => 0.0,
                    Some(_) => latch.chain_delta,
                    None => 1.0,
                };
                if latch.redirect {
                    fact_strength * gate
                } else {
                    base * gate
                }
            }
            PayloadKind::Intent if is_g1 => {
                if latch.redirect {
                    0.0
                } else {
                    base
                }
            }
            PayloadKind::Intent => {
                if latch.redirect {
                    1.0
                } else {
                    base
                }
            }
            PayloadKind::Decoy => {
                if latch.redirect {
                    0.0
                } else {
                    base
                }
            }
        };
        let drawn = rng.gen::<f64>() < eff;
        retrieved.insert(spec.payload_id.as_str(), drawn);
    }

    if latch.posthoc_correct {
        // Second pass: the critique instruction forces focus back onto the
        // update and every fact, so the union over passes retrieves them all.
        for spec in &t.seeds {
            let forced = spec.payload_kind == PayloadKind::Fact
                || (spec.payload_kind == PayloadKind::Intent
                    && spec.payload_id == t.intent_pair.g2_id);
            if forced {
                retrieved.insert(spec.payload_id.as_str(), true);
            }
        }
    }

    let seeded = |kind: PayloadKind, id: &str| -> Option<bool> {
        t.seeds
            .iter()
            .find(|s| s.payload_kind == kind && s.payload_id == id)
            .map(|s| retrieved[s.payload_id.as_str()])
    };
    let g1_avail = seeded(PayloadKind::Intent, &t.intent_pair.g1_id).unwrap_or(true);
    let g2_avail = seeded(PayloadKind::Intent, &t.intent_pair.g2_id).unwrap_or(true);

    let commit = if latch.redirect {
        Commit::G2
    } else if latch.posthoc_correct {
        if g2_avail {
            Commit::G2
        } else if g1_avail {
            Commit::G1
        } else {
            Commit::Neither
        }
    } else {
        match (g1_avail, g2_avail) {
            (true, true) => {
                if rng.gen::<f64>() < latch.w1 / (latch.w1 + latch.w2) {
                    Commit::G1
                } else {
                    Commit::G2
                }
            }
            (true, false) => Commit::G1,
            (false, true) => Commit::G2,
            (false, false) => Commit::Neither,
        }
    };

    let fact_seeds: Vec<&SeedSpec> =
        t.seeds.iter().filter(|s| s.payload_kind == PayloadKind::Fact).collect();
    let signal_ok = if let Some(chain) = &t.fact_chain {
        chain.facts.iter().all(|f| retrieved.get(f.fact_id.as_str()).copied().unwrap_or(false))
    } else if !fact_seeds.is_empty() {
        fact_seeds.iter().all(|s| retrieved[s.payload_id.as_str()])
    } else {
        g2_avail
    };

    let adherent = match protocol_steps {
        Some(_) => rng.gen::<f64>() < latch.pi_adherence,
        None => true,
    };

    if refused {
        return Ok(REFUSAL_TEXT.to_string());
    }

    let decoy = decoy_answer(t);
    let core = match (commit, signal_ok) {
        (Commit::G2, true) => format!(
            "Following the revised request (\"{}\"), the confirmed final choice is {}.",
            t.intent_pair.g2_text, t.expected_signal
        ),
        (Commit::G2, false) => format!(
            "Following the revised request (\"{}\"), the confirmed final choice is {}.",
            t.intent_pair.g2_text, decoy
        ),
        (Commit::G1, _) => format!(
            "Keeping the original plan ({}) as the governing instruction; the final choice is {}.",
            t.intent_pair.g1_text, decoy
        ),
        (Commit::Neither, _) => format!(
            "Unable to verify the final requirement from the record; defaulting to {}.",
            decoy
        ),
    };

    match protocol_steps {
        None => Ok(core),
        Some(n) => {
            let (preamble, suffix) = protocol_preamble(n, adherent, &t.intent_pair.g1_id);
            let mut out = format!("{preamble} {core}");
            if let Some(s) = suffix {
                out.push(' ');
                out.push_str(&s);
            }
            Ok(out)
        }
    }
}

/// One simulated completion for a trajectory, as a plain task response.
pub fn simulate_response(
    trajectory: &Trajectory,
    curve: &CurveParams,
    latch: &LatchParams,
    rng_seed: u64,
) -> Result<String, SimError> {
    simulate_impl(trajectory, curve, latch, rng_seed, None)
}

/// One simulated completion under an n-step protocol: the response carries
/// `[S1]..[Sn]` execution tags and redirect semantics use the tier strength
/// for `protocol_steps`.
pub fn simulate_with_protocol(
    trajectory: &Trajectory,
    curve: &CurveParams,
    latch: &LatchParams,
    rng_seed: u64,
    protocol_steps: u32,
) -> Result<String, SimError> {
    simulate_impl(trajectory, curve, latch, rng_seed, Some(protocol_steps))
}

/// Spec for a bare trajectory skeleton used in simulator studies: seeds at
/// explicit fractions, no assembled turns. Only the simulator consumes these;
/// forged trajectories are the real thing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub token_count: u64,
    pub fact_positions: Vec<f64>,
    /// Link facts into a dependency chain instead of independent records.
    #[serde(default)]
    pub chained: bool,
    /// Seed the update at this fraction; `None` leaves it always-available.
    #[serde(default)]
    pub update_position: Option<f64>,
    #[serde(default)]
    pub seed: u64,
}

pub fn probe_trajectory(spec: &ProbeSpec) -> Trajectory {
    let signal = names::pick_name(&mut ChaCha8Rng::seed_from_u64(stable_hash64(&[
        &spec.seed.to_string(),
        "probe-signal",
    ])));
    let mut seeds = Vec::new();
    let mut facts = Vec::new();
    for (i, &x) in spec.fact_positions.iter().enumerate() {
        let fact_id = format!("pf{}", i + 1);
        seeds.push(SeedSpec {
            payload_kind: PayloadKind::Fact,
            payload_id: fact_id.clone(),
            position_fraction: x,
            placed_offset_tokens: (x * spec.token_count as f64).round() as u64,
        });
        let statement = if i + 1 == spec.fact_positions.len() {
            format!("Probe record {fact_id} confirms the final venue: {signal}.")
        } else {
            format!("Probe record {fact_id} forwards to the next record.")
        };
        facts.push(Fact {
            fact_id,
            statement,
            depends_on: if spec.chained && i > 0 { Some(format!("pf{i}")) } else { None },
        });
    }
    if let Some(x) = spec.update_position {
        seeds.push(SeedSpec {
            payload_kind: PayloadKind::Intent,
            payload_id: "probe-g2".into(),
            position_fraction: x,
            placed_offset_tokens: (x * spec.token_count as f64).round() as u64,
        });
    }
    let fact_chain = if spec.chained && !facts.is_empty() {
        Some(FactChain { facts, answer_signal: signal.clone() })
    } else {
        None
    };
    Trajectory {
        id: format!("probe-{}", spec.seed),
        tier: if spec.chained { Tier::Hijack } else { Tier::HighEntropy },
        assembled_turns: Vec::new(),
        token_count: spec.token_count,
        budget_tokens: spec.token_count,
        seeds,
        intent_pair: IntentPair {
            g1_id: "probe-g1".into(),
            g2_id: "probe-g2".into(),
            g1_text: "the original standing arrangement".into(),
            g2_text: "Actually, switch to the revised arrangement now.".into(),
            contradiction_class: Some("probe".into()),
        },
        fact_chain,
        rng_seed: spec.seed,
        expected_signal: signal,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_probability_is_gamma() {
        let curve = CurveParams { alpha: 2.0, gamma: 0.3 };
        assert_eq!(retrieval_prob(&curve, 0.5).unwrap(), 0.3);
    }

    #[test]
    fn quartiles_are_exactly_symmetric() {
        let curve = CurveParams { alpha: 2.0, gamma: 0.3 };
        let a = retrieval_prob(&curve, 0.25).unwrap();
        let b = retrieval_prob(&curve, 0.75).unwrap();
        assert_eq!(a, b);
        assert!((a - 0.425).abs() < 1e-12);
    }

    #[test]
    fn probabilities_clamp_to_unit_interval() {
        let hot = CurveParams { alpha: 10.0, gamma: 0.9 };
        assert_eq!(retrieval_prob(&hot, 0.0).unwrap(), 1.0);
        let cold = CurveParams { alpha: 0.0, gamma: 0.0 };
        assert_eq!(retrieval_prob(&cold, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn out_of_range_position_is_rejected() {
        let curve = CurveParams::default();
        assert!(matches!(
            retrieval_prob(&curve, 1.5),
            Err(SimError::PositionOutOfRange { .. })
        ));
    }

    #[test]
    fn joint_success_is_the_product() {
        let p = predicted_joint_success(&[0.9, 0.9, 0.9]).unwrap();
        assert!((p - 0.729).abs() < 1e-12);
        assert!(matches!(predicted_joint_success(&[]), Err(SimError::EmptyChain)));
        assert!(matches!(
            predicted_joint_success(&[0.5, 1.2]),
            Err(SimError::ProbabilityOutOfRange { .. })
        ));
    }

    #[test]
    fn simulation_is_deterministic_per_seed() {
        let t = probe_trajectory(&ProbeSpec {
            token_count: 10_000,
            fact_positions: vec![0.35, 0.5, 0.65],
            chained: true,
            update_position: Some(0.9),
            seed: 11,
        });
        let curve = CurveParams::default();
        let latch = LatchParams::default();
        let a = simulate_response(&t, &curve, &latch, 99).unwrap();
        let b = simulate_response(&t, &curve, &latch, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn redirect_with_full_strength_always_succeeds() {
        let t = probe_trajectory(&ProbeSpec {
            token_count: 10_000,
            fact_positions: vec![0.35, 0.5, 0.65],
            chained: true,
            update_position: Some(0.9),
            seed: 5,
        });
        let curve = CurveParams { alpha: 0.0, gamma: 0.05 };
        let latch = LatchParams { redirect: true, ..Default::default() };
        for seed in 0..200 {
            let text = simulate_response(&t, &curve, &latch, seed).unwrap();
            assert!(text.contains(&t.expected_signal), "seed {seed}: {text}");
        }
    }

    #[test]
    fn per_hop_tenth_collapses_to_a_thousandth() {
        // Three chained hops at p = 0.1 each: the closed form says 0.001.
        let t = probe_trajectory(&ProbeSpec {
            token_count: 10_000,
            fact_positions: vec![0.35, 0.5, 0.65],
            chained: true,
            update_position: None,
            seed: 2,
        });
        let curve = CurveParams { alpha: 0.0, gamma: 0.1 };
        let latch = LatchParams { w1: 0.0, w2: 1.0, ..Default::default() };
        let n = 20_000u64;
        let mut hits = 0u64;
        for seed in 0..n {
            if simulate_response(&t, &curve, &latch, seed).unwrap().contains(&t.expected_signal) {
                hits += 1;
            }
        }
        let empirical = hits as f64 / n as f64;
        let predicted = predicted_joint_success(&[0.1, 0.1, 0.1]).unwrap();
        let sigma = (predicted * (1.0 - predicted) / n as f64).sqrt();
        assert!(
            (empirical - predicted).abs() <= 3.0 * sigma,
            "empirical {empirical} vs predicted {predicted}"
        );
    }

    #[test]
    fn task_and_critique_passes_share_retrieval_outcomes() {
        // With posthoc forcing, the critique pass must still agree with the
        // task pass wherever forcing does not apply; identical seeds must not
        // fork the retrieval stream. The g1-latched prefix of the task
        // response can only flip to a g2 commitment, never to a refusal.
        let t = probe_trajectory(&ProbeSpec {
            token_count: 10_000,
            fact_positions: vec![0.5],
            chained: false,
            update_position: Some(0.9),
            seed: 21,
        });
        let curve = CurveParams::default();
        let task = LatchParams::default();
        let critique = LatchParams { posthoc_correct: true, ..Default::default() };
        for seed in 0..100 {
            let second = simulate_response(&t, &curve, &critique, seed).unwrap();
            assert!(second.contains(&t.expected_signal), "seed {seed}: {second}");
        }
        let _ = simulate_response(&t, &curve, &task, 0).unwrap();
    }

    #[test]
    fn protocol_responses_carry_ordered_tags() {
        let t = probe_trajectory(&ProbeSpec {
            token_count: 10_000,
            fact_positions: vec![0.5],
            chained: false,
            update_position: Some(0.9),
            seed: 8,
        });
        let latch = LatchParams { redirect: true, ..Default::default() };
        let text =
            simulate_with_protocol(&t, &CurveParams::default(), &latch, 3, 3).unwrap();
        let p1 = text.find("[S1]").unwrap();
        let p2 = text.find("[S2]").unwrap();
        let p3 = text.find("[S3]").unwrap();
        assert!(p1 < p2 && p2 < p3, "{text}");
    }

    #[test]
    fn zero_adherence_breaks_tag_order_or_reaffirms_g1() {
        let t = probe_trajectory(&ProbeSpec {
            token_count: 10_000,
            fact_positions: vec![],
            chained: false,
            update_position: Some(0.9),
            seed: 8,
        });
        let latch = LatchParams { redirect: true, pi_adherence: 0.0, ..Default::default() };
        let text =
            simulate_with_protocol(&t, &CurveParams::default(), &latch, 3, 3).unwrap();
        assert!(text.find("[S2]").unwrap() < text.find("[S1]").unwrap(), "{text}");
    }
}
