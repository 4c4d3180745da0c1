//! Acceptance gate: ten checks covering metric closure over the published
//! reference results, simulator laws, forge geometry, scoring routes,
//! significance oracles, pipeline determinism, and the granularity ablation.
//! Each check is one test printing a `[acceptance] ... PASS` line with its
//! measured numbers; tolerances are pinned inline next to each assertion.
//! Every randomized check runs on fixed seeds, so a green suite stays green.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use pivotbench::backend::{CompletionParams, SyntheticBackend};
use pivotbench::corpus::synthetic_corpus;
use pivotbench::forge::{
    generate_update, render_turns, DialogueSource, Forge, ForgeConfig, PayloadKind, Tier,
    Trajectory, Turn, UpdateMode, BUDGET_TOLERANCE, SEED_FRACTION_TOLERANCE,
};
use pivotbench::judge::{
    detect_refusal, score_record, verbatim_audit, Judge, RefusalPatterns, Verdict,
};
use pivotbench::metrics::{
    aggregate_report, apa, fit_attention_curve, mcnemar_exact, paired_significance, pi_rate,
    resilience_lift, MetricsError,
};
use pivotbench::orchestrator::{ablate_granularity, RunConfig};
use pivotbench::sim::{
    predicted_joint_success, probe_trajectory, retrieval_prob, simulate_response,
    simulate_with_protocol, CurveParams, LatchParams, ProbeSpec, SimParams,
};
use pivotbench::strategy::protocol::GranularityTier;
use pivotbench::strategy::{run_reflexion, run_ssrp, StrategyContext, StrategyKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pass(code: &str, detail: String) {
    println!("[acceptance] {code}: PASS ({detail})");
}

fn verdict_fixture(strategy: StrategyKind, index: u64, success: bool) -> Verdict {
    Verdict {
        trajectory_id: format!("t{index:04}"),
        strategy,
        judge_bit: u8::from(success),
        verbatim_hit: success,
        refusal: false,
        pi_adherent: None,
        final_success: success,
        judge_id: "rule-v1".into(),
        judge_reasked: false,
        judge_error: None,
        run_error: None,
    }
}

/// One forged trajectory of the given tier, from the first synthetic
/// dialogue, with the templated update. Fixed seeds end to end.
fn forged(tier: Tier) -> Trajectory {
    let dialogue = &synthetic_corpus(7, 1)[0];
    let pair = generate_update(dialogue, UpdateMode::Templated, None, &CompletionParams::default())
        .expect("templated update");
    Forge::new(ForgeConfig::default(), 42).build(tier, dialogue, &pair).expect("forge")
}

/// The full success predicate a verdict applies to a response: semantic
/// acceptance, verbatim signal hit, no refusal.
fn rule_success(response: &str, trajectory: &Trajectory) -> bool {
    let bit = Judge::Rule
        .judge(response, &trajectory.intent_pair.g2_text)
        .expect("rule judge is infallible")
        .bit;
    bit == 1
        && verbatim_audit(response, &trajectory.expected_signal)
        && !detect_refusal(response, RefusalPatterns::bundled())
}

struct ReferenceRow {
    label: &'static str,
    vanilla_successes: u64,
    protocol_successes: u64,
    printed_vanilla_pct: f64,
    printed_protocol_pct: f64,
    printed_lift_pct: f64,
}

/// Published reference evaluation this harness is built around: per-row
/// success counts out of 1,000 runs, reconstructed from the printed
/// two-decimal rates, plus the printed accuracies and lifts the metric
/// implementations must reproduce.
const REFERENCE_ROWS: [ReferenceRow; 9] = [
    ReferenceRow {
        label: "family-a shallow-retrieval",
        vanilla_successes: 640,
        protocol_successes: 809,
        printed_vanilla_pct: 64.00,
        printed_protocol_pct: 80.90,
        printed_lift_pct: 26.41,
    },
    ReferenceRow {
        label: "family-a high-entropy",
        vanilla_successes: 413,
        protocol_successes: 506,
        printed_vanilla_pct: 41.30,
        printed_protocol_pct: 50.60,
        printed_lift_pct: 22.52,
    },
    ReferenceRow {
        label: "family-b shallow-retrieval",
        vanilla_successes: 422,
        protocol_successes: 439,
        printed_vanilla_pct: 42.20,
        printed_protocol_pct: 43.90,
        printed_lift_pct: 4.03,
    },
    ReferenceRow {
        label: "family-b high-entropy",
        vanilla_successes: 538,
        protocol_successes: 925,
        printed_vanilla_pct: 53.80,
        printed_protocol_pct: 92.50,
        printed_lift_pct: 71.93,
    },
    ReferenceRow {
        label: "family-c shallow-retrieval",
        vanilla_successes: 980,
        protocol_successes: 990,
        printed_vanilla_pct: 98.00,
        printed_protocol_pct: 99.00,
        printed_lift_pct: 1.02,
    },
    ReferenceRow {
        label: "family-c high-entropy",
        vanilla_successes: 310,
        protocol_successes: 490,
        printed_vanilla_pct: 31.00,
        printed_protocol_pct: 49.00,
        printed_lift_pct: 58.06,
    },
    ReferenceRow {
        label: "family-d shallow-retrieval",
        vanilla_successes: 709,
        protocol_successes: 875,
        printed_vanilla_pct: 70.90,
        printed_protocol_pct: 87.50,
        printed_lift_pct: 23.41,
    },
    ReferenceRow {
        label: "family-d high-entropy",
        vanilla_successes: 942,
        protocol_successes: 950,
        printed_vanilla_pct: 94.20,
        printed_protocol_pct: 95.00,
        printed_lift_pct: 0.85,
    },
    ReferenceRow {
        label: "family-d semantic-hijacking",
        vanilla_successes: 1,
        protocol_successes: 716,
        printed_vanilla_pct: 0.10,
        printed_protocol_pct: 71.60,
        printed_lift_pct: 71_500.00,
    },
];

#[test]
fn c01_reported_accuracy_and_lift_closure() {
    let started = Instant::now();
    const N: u64 = 1_000;
    let mut max_dev_pp: f64 = 0.0;
    for row in &REFERENCE_ROWS {
        let vanilla: Vec<Verdict> = (0..N)
            .map(|i| verdict_fixture(StrategyKind::Vanilla, i, i < row.vanilla_successes))
            .collect();
        let protocol: Vec<Verdict> = (0..N)
            .map(|i| verdict_fixture(StrategyKind::Ssrp, i, i < row.protocol_successes))
            .collect();
        let apa_v = apa(&vanilla).expect("vanilla accuracy");
        let apa_s = apa(&protocol).expect("protocol accuracy");
        assert_eq!((apa_v.n_scored, apa_v.successes), (N, row.vanilla_successes), "{}", row.label);
        assert_eq!((apa_s.n_scored, apa_s.successes), (N, row.protocol_successes), "{}", row.label);

        let dev_v = (apa_v.rate * 100.0 - row.printed_vanilla_pct).abs();
        let dev_s = (apa_s.rate * 100.0 - row.printed_protocol_pct).abs();
        let lift = resilience_lift(apa_s.rate, apa_v.rate).expect("nonzero baseline");
        let dev_l = (lift * 100.0 - row.printed_lift_pct).abs();
        // Printed values carry two decimals; 0.01pp is the print tolerance.
        assert!(
            dev_v <= 0.01,
            "{}: vanilla accuracy {:.4}% vs printed {:.2}%",
            row.label,
            apa_v.rate * 100.0,
            row.printed_vanilla_pct
        );
        assert!(
            dev_s <= 0.01,
            "{}: protocol accuracy {:.4}% vs printed {:.2}%",
            row.label,
            apa_s.rate * 100.0,
            row.printed_protocol_pct
        );
        assert!(
            dev_l <= 0.01,
            "{}: lift {:.4}% vs printed {:+.2}%",
            row.label,
            lift * 100.0,
            row.printed_lift_pct
        );
        max_dev_pp = max_dev_pp.max(dev_v).max(dev_s).max(dev_l);
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "closure must finish under 1s, took {elapsed:?}");
    pass(
        "c01 reported accuracy and lift closure",
        format!("9 rows, max deviation {max_dev_pp:.5}pp, {elapsed:?}"),
    );
}

#[test]
fn c02_hijack_cliff_and_protocol_recovery() {
    let started = Instant::now();
    let trajectory = forged(Tier::Hijack);
    // Flat attention floor: every position retrieves at 0.1, so the chained
    // hijack facts collapse multiplicatively.
    let curve = CurveParams { alpha: 0.0, gamma: 0.1 };
    let latch_vanilla = LatchParams::default();

    // Closed form recomputed from the trajectory's own geometry, not from
    // the configured fractions.
    let seed_prob = |payload_id: &str| -> f64 {
        let s = trajectory
            .seeds
            .iter()
            .find(|s| s.payload_id == payload_id)
            .expect("payload is seeded");
        let x = (s.placed_offset_tokens as f64 / trajectory.token_count as f64).min(1.0);
        retrieval_prob(&curve, x).expect("valid position")
    };
    let chain = trajectory.fact_chain.as_ref().expect("hijack carries a fact chain");
    let mut predicted_vanilla = 1.0;
    for fact in &chain.facts {
        predicted_vanilla *= seed_prob(&fact.fact_id);
        if fact.depends_on.is_some() {
            predicted_vanilla *= latch_vanilla.chain_delta;
        }
    }
    predicted_vanilla *= seed_prob(&trajectory.intent_pair.g2_id);
    predicted_vanilla *= latch_vanilla.w2 / (latch_vanilla.w1 + latch_vanilla.w2);

    const N: u64 = 10_000;
    let mut vanilla_hits = 0u64;
    for draw in 0..N {
        let response =
            simulate_response(&trajectory, &curve, &latch_vanilla, 1_000_000 + draw).unwrap();
        if rule_success(&response, &trajectory) {
            vanilla_hits += 1;
        }
    }
    let apa_vanilla = vanilla_hits as f64 / N as f64;
    let sigma_v = (predicted_vanilla * (1.0 - predicted_vanilla) / N as f64).sqrt();
    assert!(apa_vanilla <= 0.005, "cliff: vanilla accuracy {apa_vanilla:.5} exceeds 0.005");
    assert!(
        (apa_vanilla - predicted_vanilla).abs() <= 3.0 * sigma_v,
        "vanilla {apa_vanilla:.6} vs product-collapse prediction {predicted_vanilla:.6} (3 sigma {:.6})",
        3.0 * sigma_v
    );

    // Protocol execution redirects per-fact retrieval to 0.9 at the optimal
    // tier; success then follows the redirected product.
    let latch_protocol = LatchParams {
        redirect: true,
        redirect_fact_strength: 0.9,
        ..LatchParams::default()
    };
    let per_fact = latch_protocol.redirect_fact_strength * latch_protocol.tier_strengths.optimal;
    let mut predicted_protocol = 1.0;
    for fact in &chain.facts {
        predicted_protocol *= per_fact;
        if fact.depends_on.is_some() {
            predicted_protocol *= latch_protocol.chain_delta;
        }
    }
    let mut protocol_hits = 0u64;
    for draw in 0..N {
        let response =
            simulate_with_protocol(&trajectory, &curve, &latch_protocol, 2_000_000 + draw, 3)
                .unwrap();
        if rule_success(&response, &trajectory) {
            protocol_hits += 1;
        }
    }
    let apa_protocol = protocol_hits as f64 / N as f64;
    let sigma_s = (predicted_protocol * (1.0 - predicted_protocol) / N as f64).sqrt();
    assert!(apa_protocol >= 0.7, "recovery: protocol accuracy {apa_protocol:.4} below 0.7");
    assert!(
        (apa_protocol - predicted_protocol).abs() <= 3.0 * sigma_s,
        "protocol {apa_protocol:.4} vs prediction {predicted_protocol:.4} (3 sigma {:.4})",
        3.0 * sigma_s
    );

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "cliff check must finish under 30s, took {elapsed:?}");
    pass(
        "c02 hijack cliff and protocol recovery",
        format!(
            "vanilla {apa_vanilla:.5} (predicted {predicted_vanilla:.5}), protocol {apa_protocol:.4} (predicted {predicted_protocol:.4}), {elapsed:?}"
        ),
    );
}

#[test]
fn c03_joint_collapse_matches_prediction() {
    let started = Instant::now();
    let curve = CurveParams { alpha: 4.0, gamma: 0.0 };
    // w1 = 0: the commitment contest always picks the update, isolating the
    // retrieval product.
    let latch = LatchParams { w1: 0.0, ..LatchParams::default() };
    const DRAWS: u64 = 10_000;
    let mut worst_z: f64 = 0.0;
    for list in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(0xC03_0000 + list);
        let hops = rng.gen_range(1..=5usize);
        let positions: Vec<f64> = (0..hops)
            .map(|_| {
                let p: f64 = rng.gen_range(0.05..0.95);
                // Invert P(x) = alpha (x - 0.5)^2 so each hop lands at its
                // drawn probability.
                0.5 + (p / curve.alpha).sqrt()
            })
            .collect();
        let probe = probe_trajectory(&ProbeSpec {
            token_count: 1_000_000,
            fact_positions: positions,
            chained: false,
            update_position: None,
            seed: list,
        });
        // Placement quantizes to whole tokens; predict from the geometry the
        // simulator actually sees.
        let hop_probs: Vec<f64> = probe
            .seeds
            .iter()
            .filter(|s| s.payload_kind == PayloadKind::Fact)
            .map(|s| {
                let x = (s.placed_offset_tokens as f64 / probe.token_count as f64).min(1.0);
                retrieval_prob(&curve, x).unwrap()
            })
            .collect();
        assert_eq!(hop_probs.len(), hops);
        let predicted = predicted_joint_success(&hop_probs).unwrap();

        let mut hits = 0u64;
        for draw in 0..DRAWS {
            let response =
                simulate_response(&probe, &curve, &latch, list * 7_000_009 + draw).unwrap();
            if verbatim_audit(&response, &probe.expected_signal) {
                hits += 1;
            }
        }
        let empirical = hits as f64 / DRAWS as f64;
        let sigma = (predicted * (1.0 - predicted) / DRAWS as f64).sqrt().max(1e-9);
        let z = (empirical - predicted).abs() / sigma;
        assert!(
            z <= 3.0,
            "list {list} ({hops} hops): empirical {empirical:.5} vs predicted {predicted:.5} is {z:.2} sigma"
        );
        worst_z = worst_z.max(z);
    }
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "joint-collapse check under 2min, took {elapsed:?}");
    pass(
        "c03 joint collapse law",
        format!("100 lists x {DRAWS} draws, worst deviation {worst_z:.2} sigma, {elapsed:?}"),
    );
}

#[test]
fn c04_attention_curve_fit_recovery() {
    let planted = |alpha: f64, gamma: f64, xs: &[f64]| -> Vec<(f64, f64)> {
        xs.iter().map(|&x| (x, alpha * (x - 0.5).powi(2) + gamma)).collect()
    };

    let three = planted(1.9, 0.31, &[0.1, 0.5, 0.9]);
    let fit3 = fit_attention_curve(&three).unwrap();
    assert!(
        (fit3.alpha - 1.9).abs() <= 1e-6 && (fit3.gamma - 0.31).abs() <= 1e-6,
        "3-point recovery: ({:.8}, {:.8})",
        fit3.alpha,
        fit3.gamma
    );
    assert!(fit3.sse <= 1e-12, "noiseless data must fit exactly, sse {:.3e}", fit3.sse);

    let seven = planted(2.2, 0.12, &[0.05, 0.2, 0.35, 0.5, 0.65, 0.8, 0.95]);
    let fit7 = fit_attention_curve(&seven).unwrap();
    assert!(
        (fit7.alpha - 2.2).abs() <= 1e-6 && (fit7.gamma - 0.12).abs() <= 1e-6,
        "7-point recovery: ({:.8}, {:.8})",
        fit7.alpha,
        fit7.gamma
    );
    assert!(fit7.sse <= 1e-12);

    // Two anchors solve the system exactly: the trough anchor sits at basis
    // value zero and pins gamma, the recency anchor then pins alpha.
    let anchors = [(0.5, 0.310), (0.95, 0.709)];
    let fit2 = fit_attention_curve(&anchors).unwrap();
    let gamma_closed = anchors[0].1;
    let alpha_closed = (anchors[1].1 - anchors[0].1) / (0.95f64 - 0.5).powi(2);
    assert!((fit2.gamma - gamma_closed).abs() <= 1e-6, "anchor gamma {:.8}", fit2.gamma);
    assert!((fit2.alpha - alpha_closed).abs() <= 1e-6, "anchor alpha {:.8}", fit2.alpha);
    assert!((alpha_closed - 1.9704).abs() <= 1e-4, "closed form sanity {alpha_closed:.6}");
    assert_eq!(fit2.n_points, 2);

    // Midpoint-symmetric anchors share one basis value; the fit must refuse
    // rather than invent a slope.
    let degenerate = [(0.25, 0.4), (0.75, 0.4)];
    assert!(
        matches!(fit_attention_curve(&degenerate), Err(MetricsError::RankDeficient)),
        "symmetric anchors must be rank-deficient"
    );

    pass(
        "c04 attention curve fit recovery",
        format!("planted pairs exact, two-anchor alpha {:.6}", fit2.alpha),
    );
}

fn count_turns_containing(turns: &[Turn], needle: &str) -> usize {
    turns.iter().filter(|t| t.text.contains(needle)).count()
}

fn audit_geometry(t: &Trajectory, tier: Tier, config: &ForgeConfig, dialogue: &DialogueSource) {
    let id = &t.id;
    // Token accounting re-derived from scratch over the rendered transcript.
    let rendered = render_turns(&t.assembled_turns);
    let recount = rendered.chars().count().div_ceil(4) as u64;
    assert_eq!(recount, t.token_count, "{id}: stored token count disagrees with recount");

    let budget = config.budget_for(tier);
    assert_eq!(t.budget_tokens, budget, "{id}: stored budget");
    let budget_dev = (t.token_count as f64 - budget as f64).abs() / budget as f64;
    assert!(budget_dev <= BUDGET_TOLERANCE, "{id}: budget deviation {budget_dev:.4}");

    for seed in &t.seeds {
        let x = (seed.placed_offset_tokens as f64 / t.token_count as f64).min(1.0);
        let dev = (x - seed.position_fraction).abs();
        assert!(
            dev <= SEED_FRACTION_TOLERANCE + 1e-9,
            "{id}: seed {} placed {dev:.4} off its target fraction",
            seed.payload_id
        );
    }

    // Noise purity: exactly one turn carries the answer signal and exactly
    // one carries the update text, beyond any verbatim source turns.
    assert_eq!(
        count_turns_containing(&t.assembled_turns, &t.expected_signal),
        1,
        "{id}: signal-bearing turns"
    );
    let source_g2 = count_turns_containing(&dialogue.turns, &t.intent_pair.g2_text);
    assert_eq!(
        count_turns_containing(&t.assembled_turns, &t.intent_pair.g2_text),
        1 + source_g2,
        "{id}: update-bearing turns"
    );

    // The archived intent may appear only where the tier plants it: its
    // verbatim source turns, plus the hijack decoy or the equidistant anchor.
    let g1_in_assembly = count_turns_containing(&t.assembled_turns, &t.intent_pair.g1_text);
    let g1_in_source = count_turns_containing(&dialogue.turns, &t.intent_pair.g1_text);
    let expected_g1 = match tier {
        Tier::Shallow | Tier::HighEntropy => g1_in_source,
        Tier::Hijack => g1_in_source + 1,
        Tier::Equidistant => 1,
    };
    assert_eq!(g1_in_assembly, expected_g1, "{id}: archived-intent turns");

    match tier {
        Tier::Hijack => {
            let chain = t.fact_chain.as_ref().expect("hijack chain");
            for fact in &chain.facts {
                assert_eq!(
                    count_turns_containing(&t.assembled_turns, &fact.statement),
                    1,
                    "{id}: chain fact {}",
                    fact.fact_id
                );
            }
        }
        Tier::Equidistant => {
            let xs: Vec<f64> = t
                .seeds
                .iter()
                .filter(|s| s.payload_kind == PayloadKind::Intent)
                .map(|s| s.placed_offset_tokens as f64 / t.token_count as f64)
                .collect();
            assert_eq!(xs.len(), 2, "{id}: two intent anchors");
            let asymmetry = (xs[0] + xs[1] - 1.0).abs();
            assert!(asymmetry <= 0.01, "{id}: anchor asymmetry {asymmetry:.4}");
        }
        _ => {}
    }
}

#[test]
fn c05_trajectory_geometry_audit() {
    let started = Instant::now();
    let config = ForgeConfig::default();
    let forge = Forge::new(ForgeConfig::default(), 42);
    let params = CompletionParams::default();
    let dialogues = synthetic_corpus(11, 200);
    let mut audited = 0u64;
    for dialogue in &dialogues {
        let pair = generate_update(dialogue, UpdateMode::Templated, None, &params).unwrap();
        for tier in Tier::ALL {
            let trajectory = forge.build(tier, dialogue, &pair).unwrap();
            audit_geometry(&trajectory, tier, &config, dialogue);
            audited += 1;
        }
    }
    assert_eq!(audited, 800);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "geometry audit under 1min, took {elapsed:?}");
    pass(
        "c05 trajectory geometry audit",
        format!("200 dialogues x 4 tiers clean, {elapsed:?}"),
    );
}

#[test]
fn c06_critique_recovery_and_refusal_accounting() {
    let trajectory = forged(Tier::Hijack);
    let params = CompletionParams::default();
    let curve = CurveParams { alpha: 2.0, gamma: 0.1 };

    // The check only means something if first-pass retrieval is fallible but
    // the update stays a live event.
    let update_seed = trajectory
        .seeds
        .iter()
        .find(|s| s.payload_id == trajectory.intent_pair.g2_id)
        .expect("update is seeded");
    let x_update =
        (update_seed.placed_offset_tokens as f64 / trajectory.token_count as f64).min(1.0);
    let p_update = retrieval_prob(&curve, x_update).unwrap();
    assert!(p_update >= 0.3, "update retrieval {p_update:.3} too weak for the recovery claim");

    // (a) Self-critique with forced re-focus recovers every run: the second
    // pass retrieves the update and all facts, and its output is what gets
    // scored.
    let critique_backend = SyntheticBackend::new(SimParams {
        curve,
        latch: LatchParams { posthoc_correct: true, ..LatchParams::default() },
    });
    let mut critique_verdicts = Vec::with_capacity(200);
    for seed in 0..200u64 {
        let ctx = StrategyContext::new(params.clone(), 60_000 + seed);
        let record = run_reflexion(&trajectory, &critique_backend, &ctx);
        assert_eq!(record.call_count, 2, "self-critique is exactly two calls");
        assert_eq!(
            record.final_response, record.responses[1],
            "scored response must be the critique output"
        );
        critique_verdicts.push(score_record(
            &record,
            &trajectory,
            &Judge::Rule,
            RefusalPatterns::bundled(),
        ));
    }
    let critique_apa = apa(&critique_verdicts).unwrap();
    assert_eq!(
        (critique_apa.successes, critique_apa.n_scored),
        (200, 200),
        "critique recovery must be exact"
    );
    assert_eq!(critique_apa.rate, 1.0);

    // (b) An injected 18% refusal rate must surface in the verdicts and the
    // aggregate report within two points.
    let refusal_backend = SyntheticBackend::new(SimParams {
        curve,
        latch: LatchParams {
            refusal_rate: 0.18,
            redirect_fact_strength: 0.9,
            ..LatchParams::default()
        },
    });
    const RUNS: u64 = 1_000;
    let mut verdicts = Vec::with_capacity(RUNS as usize);
    for seed in 0..RUNS {
        let ctx = StrategyContext::new(params.clone(), 70_000 + seed);
        let record = run_ssrp(
            &trajectory,
            &refusal_backend,
            &refusal_backend,
            GranularityTier::Optimal,
            &ctx,
        );
        verdicts.push(score_record(&record, &trajectory, &Judge::Rule, RefusalPatterns::bundled()));
    }
    let refused = verdicts.iter().filter(|v| v.refusal).count() as f64 / RUNS as f64;
    assert!(
        (refused - 0.18).abs() <= 0.02,
        "measured refusal rate {refused:.4} vs configured 0.18"
    );

    let tier_of: BTreeMap<String, Tier> = [(trajectory.id.clone(), Tier::Hijack)].into();
    let report = aggregate_report(&verdicts, &tier_of, "synthetic/synthetic").unwrap();
    assert_eq!(report.groups.len(), 1);
    let group = &report.groups[0];
    assert_eq!(group.strategy, StrategyKind::Ssrp);
    assert!(
        (group.refusal_rate - refused).abs() < 1e-12,
        "report refusal rate {:.4} must carry the measured rate {refused:.4}",
        group.refusal_rate
    );
    assert!(report.comparisons.is_empty(), "no baseline group, no lift rows");

    pass(
        "c06 critique recovery and refusal accounting",
        format!("critique accuracy 1.000 over 200 runs, refusal rate {refused:.3} over {RUNS} runs"),
    );
}

#[test]
fn c07_grounding_gap_identity() {
    let trajectory = forged(Tier::Hijack);
    let params = CompletionParams::default();
    // Protocol execution is near-perfectly adherent while per-fact retrieval
    // caps accuracy near 0.89^3: procedurally clean, semantically starved.
    let backend = SyntheticBackend::new(SimParams {
        curve: CurveParams { alpha: 2.0, gamma: 0.1 },
        latch: LatchParams {
            redirect_fact_strength: 0.89,
            pi_adherence: 0.99,
            ..LatchParams::default()
        },
    });
    const RUNS: u64 = 1_000;
    let mut verdicts = Vec::with_capacity(RUNS as usize);
    for seed in 0..RUNS {
        let ctx = StrategyContext::new(params.clone(), 80_000 + seed);
        let record =
            run_ssrp(&trajectory, &backend, &backend, GranularityTier::Optimal, &ctx);
        verdicts.push(score_record(&record, &trajectory, &Judge::Rule, RefusalPatterns::bundled()));
    }
    let tier_of: BTreeMap<String, Tier> = [(trajectory.id.clone(), Tier::Hijack)].into();
    let report = aggregate_report(&verdicts, &tier_of, "synthetic/synthetic").unwrap();
    assert_eq!(report.groups.len(), 1);
    let group = &report.groups[0];

    let pi = group.pi_rate.expect("protocol group carries an adherence rate");
    assert!(pi >= 0.98, "adherence {pi:.4} below the reported band");
    assert!(
        (0.60..=0.75).contains(&group.apa),
        "accuracy {:.4} must sit in the retrieval-limited band",
        group.apa
    );
    let gap = group.grounding_gap.expect("protocol group carries a grounding gap");
    assert_eq!(gap, pi - group.apa, "gap must be the exact difference of the reported fields");
    assert!(gap > 0.2, "procedurally-clean-but-wrong band too narrow: {gap:.4}");
    assert_eq!(pi_rate(&verdicts), Some(pi), "report adherence matches direct recomputation");

    pass(
        "c07 grounding gap identity",
        format!("adherence {pi:.4}, accuracy {:.4}, gap {gap:.4} over {RUNS} runs", group.apa),
    );
}

/// ln Γ(two_x / 2), exact at integers and half-integers by recurrence from
/// Γ(1) = 1 and Γ(1/2) = √π. Deliberately independent of any stats crate.
fn ln_gamma_half(two_x: u64) -> f64 {
    assert!(two_x >= 1);
    if two_x.is_multiple_of(2) {
        let n = two_x / 2;
        (1..n).map(|j| (j as f64).ln()).sum()
    } else {
        let k = (two_x - 1) / 2;
        0.5 * std::f64::consts::PI.ln() + (1..=k).map(|j| (j as f64 - 0.5).ln()).sum::<f64>()
    }
}

/// Two-sided Student-t p-value from the textbook density, integrated with
/// composite Simpson at a step far below the comparison tolerance.
fn student_two_sided_p(t_abs: f64, df: u64) -> f64 {
    let nu = df as f64;
    let ln_norm =
        ln_gamma_half(df + 1) - ln_gamma_half(df) - 0.5 * (nu * std::f64::consts::PI).ln();
    let density = |u: f64| (ln_norm - 0.5 * (nu + 1.0) * (1.0 + u * u / nu).ln()).exp();
    let panels = 200_000usize;
    let h = t_abs / panels as f64;
    let mut acc = density(0.0) + density(t_abs);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * density(i as f64 * h);
    }
    let integral = acc * h / 3.0;
    (1.0 - 2.0 * integral).clamp(0.0, 1.0)
}

#[test]
fn c08_significance_oracles() {
    // Paired t on 20 seeded fixtures, regenerating any degenerate draw
    // (all differences equal) since the statistic is undefined there.
    let mut rng = ChaCha8Rng::seed_from_u64(0xC08);
    let mut worst_p_dev: f64 = 0.0;
    for case in 0..20 {
        let n = rng.gen_range(5..=30usize);
        let pairs: Vec<(bool, bool)> = loop {
            let candidate: Vec<(bool, bool)> =
                (0..n).map(|_| (rng.gen_bool(0.55), rng.gen_bool(0.45))).collect();
            let d0 = candidate[0].0 as i8 - candidate[0].1 as i8;
            if candidate.iter().any(|&(a, b)| a as i8 - b as i8 != d0) {
                break candidate;
            }
        };
        let sig = paired_significance(&pairs).unwrap();
        assert!(!sig.t_degenerate, "case {case}: fixture must be non-degenerate");
        let t_impl = sig.t_statistic.expect("non-degenerate t statistic");

        let diffs: Vec<f64> = pairs.iter().map(|&(a, b)| (a as i8 - b as i8) as f64).collect();
        let nf = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / nf;
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (nf - 1.0);
        let t_oracle = mean / (var.sqrt() / nf.sqrt());
        let p_oracle = student_two_sided_p(t_oracle.abs(), (n - 1) as u64);
        assert!(
            (t_impl - t_oracle).abs() <= 1e-9 * t_oracle.abs().max(1.0),
            "case {case}: t {t_impl} vs oracle {t_oracle}"
        );
        let p_dev = (sig.t_p - p_oracle).abs();
        assert!(p_dev <= 1e-9, "case {case}: p {} vs oracle {p_oracle} (dev {p_dev:.2e})", sig.t_p);
        worst_p_dev = worst_p_dev.max(p_dev);

        let b = pairs.iter().filter(|&&(a, c)| a && !c).count() as u64;
        let c = pairs.iter().filter(|&&(a, c)| !a && c).count() as u64;
        assert_eq!((sig.discordant_b, sig.discordant_c), (b, c), "case {case}: discordant counts");
    }

    // Exact McNemar vs brute-force enumeration of every outcome mask for all
    // discordant totals up to 12.
    let mut enumerated = 0u32;
    for total in 0..=12u64 {
        for b in 0..=total {
            let c = total - b;
            let masks = 1u64 << total;
            let mut at_most = 0u64;
            let mut at_least = 0u64;
            for mask in 0..masks {
                let k = u64::from(mask.count_ones());
                if k <= b {
                    at_most += 1;
                }
                if k >= b {
                    at_least += 1;
                }
            }
            let oracle = (2.0 * at_most.min(at_least) as f64 / masks as f64).min(1.0);
            let got = mcnemar_exact(b, c);
            assert!(
                (got - oracle).abs() <= 1e-12,
                "mcnemar({b}, {c}) = {got} vs enumerated {oracle}"
            );
            enumerated += 1;
        }
    }

    pass(
        "c08 significance oracles",
        format!("20 t fixtures within {worst_p_dev:.2e}, {enumerated} exact McNemar cells"),
    );
}

/// Experiment config for the determinism runs; synthetic backends keep the
/// whole pipeline offline and are covered by the same parallelism-neutrality
/// contract as scripted ones.
fn determinism_config(out_dir: &Path) -> String {
    format!(
        r#"experiment_id = "determinism"
output_dir = "{out}"
global_seed = 42
model_pair = "synthetic/synthetic"
parallelism = 1

[forge]
tiers = ["shallow"]
synthetic_dialogues = 20

[strategies.vanilla]
kind = "synthetic"

[strategies.reflexion]
kind = "synthetic"

[strategies.ssrp]
granularity = "optimal"

[strategies.ssrp.architect]
kind = "synthetic"

[strategies.ssrp.executive]
kind = "synthetic"
"#,
        out = out_dir.display()
    )
}

fn run_cli(config: &Path, args: &[&str]) {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pivotbench"));
    cmd.arg("--config").arg(config);
    cmd.args(args);
    let out = cmd.output().expect("spawn pivotbench");
    assert!(
        out.status.success(),
        "pivotbench {args:?} exited with {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn c09_pipeline_determinism_and_resume() {
    let root = tempfile::tempdir().unwrap();
    let prepare = |name: &str| -> (PathBuf, PathBuf) {
        let out_dir = root.path().join(name);
        let config_path = root.path().join(format!("{name}.toml"));
        std::fs::write(&config_path, determinism_config(&out_dir)).unwrap();
        (config_path, out_dir)
    };
    let (cfg_a, dir_a) = prepare("serial");
    let (cfg_b, dir_b) = prepare("parallel");
    let (cfg_c, dir_c) = prepare("interrupted");
    let (cfg_d, dir_d) = prepare("rederived");

    for cfg in [&cfg_a, &cfg_b, &cfg_c, &cfg_d] {
        run_cli(cfg, &["forge", "build"]);
    }

    run_cli(&cfg_a, &["run"]);
    run_cli(&cfg_b, &["run", "--parallelism", "8"]);

    // Interrupt after 7 of 60 items, then resume to completion.
    run_cli(&cfg_c, &["run", "--max-items", "7"]);
    assert!(
        dir_c.join("runs.partial.jsonl").exists(),
        "interrupted run must leave the partial store"
    );
    assert!(!dir_c.join("runs.jsonl").exists(), "interrupted run must not finalize");
    run_cli(&cfg_c, &["--resume", "run"]);

    run_cli(&cfg_d, &["run"]);

    for cfg in [&cfg_a, &cfg_b, &cfg_c, &cfg_d] {
        run_cli(cfg, &["judge"]);
        run_cli(cfg, &["score"]);
    }

    let artifacts =
        ["trajectories.jsonl", "runs.jsonl", "verdicts.jsonl", "report.json", "report.csv"];
    for name in artifacts {
        let reference = std::fs::read(dir_a.join(name)).unwrap();
        assert!(!reference.is_empty(), "{name} must not be empty");
        for dir in [&dir_b, &dir_c, &dir_d] {
            let other = std::fs::read(dir.join(name)).unwrap();
            assert!(reference == other, "{name} differs under {}", dir.display());
        }
    }
    for dir in [&dir_a, &dir_b, &dir_c, &dir_d] {
        assert!(
            !dir.join("runs.partial.jsonl").exists(),
            "finalized run must drop the partial store in {}",
            dir.display()
        );
    }

    pass(
        "c09 pipeline determinism",
        "20 trajectories x 3 strategies byte-identical across parallelism 1 vs 8, \
         re-derivation, and interrupt+resume, on synthetic backends"
            .into(),
    );
}

#[test]
fn c10_granularity_ablation_ordering() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config_path = dir.path().join("ablation.toml");
    // Verbose protocols pay an attentional-competition penalty (0.8) while
    // hyper-compressed ones lose only a little focus (0.95); a base strength
    // below 1 keeps every per-fact probability a real coin.
    std::fs::write(
        &config_path,
        format!(
            r#"experiment_id = "granularity-ablation"
output_dir = "{out}"
global_seed = 42
model_pair = "synthetic/synthetic"

[forge]
tiers = ["shallow"]
synthetic_dialogues = 50

[strategies.ssrp]
granularity = "optimal"

[strategies.ssrp.architect]
kind = "synthetic"

[strategies.ssrp.executive]
kind = "synthetic"

[simulator]
redirect_fact_strength = 0.85

[simulator.tier_strengths]
hyper_compressed = 0.95
optimal = 1.0
verbose = 0.8
"#,
            out = out_dir.display()
        ),
    )
    .unwrap();
    let config = RunConfig::load(&config_path).unwrap();

    let rows = ablate_granularity(&config, 50).unwrap();
    assert_eq!(rows.len(), 3, "one row per granularity");
    assert_eq!(rows[0].granularity, GranularityTier::HyperCompressed);
    assert_eq!(rows[1].granularity, GranularityTier::Optimal);
    assert_eq!(rows[2].granularity, GranularityTier::Verbose);
    assert_eq!(rows[0].steps, 1, "hyper-compressed protocols are one step");
    assert_eq!(rows[1].steps, 3, "optimal protocols are three steps");
    assert!(rows[2].steps >= 10, "verbose protocols are ten or more steps");
    for row in &rows {
        assert!(row.granularity.admits(row.steps), "steps {} outside tier bounds", row.steps);
        assert_eq!(row.n_scored, 50);
        assert!((row.apa - row.successes as f64 / 50.0).abs() < 1e-12);
    }

    let accuracy = |g: GranularityTier| rows.iter().find(|r| r.granularity == g).unwrap().apa;
    let hyper = accuracy(GranularityTier::HyperCompressed);
    let optimal = accuracy(GranularityTier::Optimal);
    let verbose = accuracy(GranularityTier::Verbose);
    assert!(optimal >= hyper, "saturation: optimal {optimal:.3} vs hyper-compressed {hyper:.3}");
    assert!(hyper > verbose, "decay: hyper-compressed {hyper:.3} vs verbose {verbose:.3}");

    let csv = std::fs::read_to_string(out_dir.join("ablations").join("granularity.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("granularity,steps,apa,successes,n"));
    assert_eq!(lines.count(), 3, "three data rows");

    pass(
        "c10 granularity ablation ordering",
        format!("accuracy hyper {hyper:.3} / optimal {optimal:.3} / verbose {verbose:.3} at steps 1/3/{}", rows[2].steps),
    );
}
