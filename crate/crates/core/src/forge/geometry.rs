//! Positional placement of payloads inside a rendered context.
//!
//! All geometry is computed over the canonical rendering (each turn's text
//! plus a trailing newline, see [`render_turns`](super::types::render_turns)),
//! in chars first and then converted to estimator tokens. Char-level planning
//! is what makes placement exact: token rounding error is at most one token,
//! far inside the 0.02 fraction tolerance at the budgets in use.
//!
//! Two entry points:
//! * [`place_at_fraction`] inserts one payload into an existing block list,
//!   splitting noise blocks at line boundaries when that lands closer.
//! * [`assemble`] is the builders' planner: it lays out fixed and seeded
//!   slots against a total char target and fills the gaps with exact-size
//!   noise turns.

use rand_chacha::ChaCha8Rng;

use crate::hashing::stable_hash64;
use crate::tokens::TokenEstimator;

use super::noise::noise_text_exact;
use super::types::{PayloadKind, SeedSpec, Speaker, Turn, SEED_FRACTION_TOLERANCE};
use super::ForgeError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Dialogue,
    Noise,
    Payload,
}

/// One turn-to-be in a context under construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub kind: BlockKind,
    pub speaker: Speaker,
    pub text: String,
}

impl Block {
    pub fn dialogue(speaker: Speaker, text: impl Into<String>) -> Self {
        Self { kind: BlockKind::Dialogue, speaker, text: text.into() }
    }

    pub fn noise(text: impl Into<String>) -> Self {
        Self { kind: BlockKind::Noise, speaker: Speaker::System, text: text.into() }
    }

    pub fn payload(speaker: Speaker, text: impl Into<String>) -> Self {
        Self { kind: BlockKind::Payload, speaker, text: text.into() }
    }
}

/// Rendered char length of a block: its text plus the turn separator.
fn block_chars(block: &Block) -> u64 {
    block.text.chars().count() as u64 + 1
}

/// Inserts `payload` as its own turn so that it starts as close as possible
/// to fraction `x` of the post-insertion context.
///
/// Candidate insertion points are block boundaries and line boundaries inside
/// noise blocks (splitting a noise block at a newline preserves total rendered
/// length exactly, because the newline becomes the new turn separator).
/// Returns the new block list and the payload's token offset. Fails with
/// [`ForgeError::GeometryConflict`] when no candidate lands within the 0.02
/// fraction tolerance, which happens when fixed content crowds out the target
/// position.
pub fn place_at_fraction(
    blocks: Vec<Block>,
    payload: Block,
    x: f64,
    est: TokenEstimator,
) -> Result<(Vec<Block>, u64), ForgeError> {
    assert!((0.0..=1.0).contains(&x), "fraction must be in [0, 1]");
    let payload_chars = block_chars(&payload);
    let total_after: u64 = blocks.iter().map(block_chars).sum::<u64>() + payload_chars;
    let desired = x * total_after as f64;

    // (insertion index, split char offset within that block's text, prefix chars)
    let mut best: Option<(usize, Option<usize>, u64)> = None;
    let mut consider = |candidate: (usize, Option<usize>, u64)| {
        let better = match best {
            None => true,
            Some((_, _, prev)) => {
                (candidate.2 as f64 - desired).abs() < (prev as f64 - desired).abs()
            }
        };
        if better {
            best = Some(candidate);
        }
    };

    let mut prefix = 0u64;
    for (i, block) in blocks.iter().enumerate() {
        consider((i, None, prefix));
        if block.kind == BlockKind::Noise {
            // Splitting after a line: the prefix grows by the line plus its
            // newline, which becomes the left fragment's turn separator.
            let mut line_prefix = 0usize;
            for (pos, ch) in block.text.char_indices() {
                if ch == '\n' {
                    line_prefix = pos + 1;
                    consider((i, Some(line_prefix), prefix + line_prefix as u64));
                }
            }
            let _ = line_prefix;
        }
        prefix += block_chars(block);
    }
    consider((blocks.len(), None, prefix));

    let (index, split, placed_prefix) = best.expect("at least one insertion candidate exists");
    let offset_tokens = est.estimate_chars(placed_prefix);
    let total_tokens = est.estimate_chars(total_after);
    let achieved = offset_tokens as f64 / total_tokens as f64;
    if (achieved - x).abs() > SEED_FRACTION_TOLERANCE {
        return Err(ForgeError::GeometryConflict {
            detail: format!(
                "nearest insertion point for fraction {x:.3} lands at {achieved:.3}"
            ),
        });
    }

    let count = blocks.len();
    let mut out = Vec::with_capacity(count + 2);
    for (i, block) in blocks.into_iter().enumerate() {
        if i != index {
            out.push(block);
            continue;
        }
        match split {
            None => {
                out.push(payload.clone());
                out.push(block);
            }
            Some(at) => {
                // Left fragment loses its trailing newline; the turn separator
                // replaces it, so total rendered chars are unchanged.
                let left = block.text[..at - 1].to_string();
                let right = block.text[at..].to_string();
                out.push(Block::noise(left));
                out.push(payload.clone());
                out.push(Block::noise(right));
            }
        }
    }
    if index == count {
        out.push(payload);
    }
    Ok((out, offset_tokens))
}

/// One planned element of a trajectory under assembly.
#[derive(Debug, Clone)]
pub enum Slot {
    /// Verbatim content that occupies whatever space it needs.
    Fixed(Turn),
    /// A payload that must start at fraction `x` of the final context.
    Seeded { turn: Turn, kind: PayloadKind, id: String, x: f64 },
}

#[derive(Debug)]
pub struct Assembled {
    pub turns: Vec<Turn>,
    pub seeds: Vec<SeedSpec>,
    pub token_count: u64,
}

/// Lays out `slots` into a context of exactly `budget_tokens * chars_per_token`
/// rendered chars (give or take single-char separator drift), inserting
/// exact-size noise turns before each seeded slot and after the last one.
///
/// Seeded slots must appear in non-decreasing `x` order. Fails with
/// [`ForgeError::BudgetExceeded`] when fixed content alone overruns the
/// budget and [`ForgeError::GeometryConflict`] when preceding content pushes
/// a seed outside its fraction tolerance.
pub fn assemble(
    slots: Vec<Slot>,
    budget_tokens: u64,
    est: TokenEstimator,
    noise_seed: u64,
    forbidden: &[String],
) -> Result<Assembled, ForgeError> {
    let cpt = est.chars_per_token as u64;
    let total_chars = budget_tokens * cpt;

    let mut last_x = 0.0f64;
    for slot in &slots {
        if let Slot::Seeded { x, id, .. } = slot {
            assert!((0.0..=1.0).contains(x), "fraction must be in [0, 1]");
            if *x < last_x {
                return Err(ForgeError::GeometryConflict {
                    detail: format!("seeded slot {id} is out of fraction order"),
                });
            }
            last_x = *x;
        }
    }

    let mut turns: Vec<Turn> = Vec::new();
    let mut seeds: Vec<SeedSpec> = Vec::new();
    let mut acc = 0u64;
    let mut noise_index = 0u64;

    let push_noise = |turns: &mut Vec<Turn>, acc: &mut u64, gap: u64, idx: &mut u64| -> Result<(), ForgeError> {
        // A 0 or 1 char gap cannot hold a turn (the separator alone is one
        // char); skipping it drifts the layout by at most one char.
        if gap < 2 {
            return Ok(());
        }
        let seed = stable_hash64(&[&noise_seed.to_string(), "gap", &idx.to_string()]);
        *idx += 1;
        const MAX_ATTEMPTS: u64 = 16;
        for attempt in 0..MAX_ATTEMPTS {
            let attempt_seed = if attempt == 0 {
                seed
            } else {
                stable_hash64(&[&seed.to_string(), "retry", &attempt.to_string()])
            };
            let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(attempt_seed);
            let text = noise_text_exact(&mut rng, gap - 1);
            if !forbidden.iter().any(|f| !f.is_empty() && text.contains(f.as_str())) {
                *acc += gap;
                turns.push(Turn::system(text));
                return Ok(());
            }
        }
        Err(ForgeError::NoiseConstraint { attempts: MAX_ATTEMPTS })
    };

    for slot in slots {
        match slot {
            Slot::Fixed(turn) => {
                acc += turn.text.chars().count() as u64 + 1;
                turns.push(turn);
            }
            Slot::Seeded { turn, kind, id, x } => {
                let target = (x * total_chars as f64).round() as i64;
                let gap = target - acc as i64;
                if gap >= 2 {
                    push_noise(&mut turns, &mut acc, gap as u64, &mut noise_index)?;
                }
                let offset_tokens = est.estimate_chars(acc);
                let achieved = offset_tokens as f64 / budget_tokens as f64;
                if (achieved - x).abs() > SEED_FRACTION_TOLERANCE {
                    return Err(ForgeError::GeometryConflict {
                        detail: format!(
                            "content before seed {id} ends at fraction {achieved:.3}, requested {x:.3}"
                        ),
                    });
                }
                seeds.push(SeedSpec {
                    payload_kind: kind,
                    payload_id: id,
                    position_fraction: x,
                    placed_offset_tokens: offset_tokens,
                });
                acc += turn.text.chars().count() as u64 + 1;
                turns.push(turn);
            }
        }
    }

    let tail = total_chars as i64 - acc as i64;
    if tail < 0 {
        return Err(ForgeError::BudgetExceeded {
            needed_tokens: est.estimate_chars(acc),
            budget_tokens,
        });
    }
    if tail >= 2 {
        push_noise(&mut turns, &mut acc, tail as u64, &mut noise_index)?;
    }

    let token_count = est.estimate_chars(acc);
    Ok(Assembled { turns, seeds, token_count })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_k_noise_context(est: TokenEstimator) -> Vec<Block> {
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(11);
        let chars = 10_000 * est.chars_per_token as u64 - 1;
        vec![Block::noise(noise_text_exact(&mut rng, chars))]
    }

    #[test]
    fn quartile_placements_land_on_target() {
        let est = TokenEstimator::default();
        for (x, expected) in [(0.25, 2500i64), (0.75, 7500i64)] {
            let blocks = ten_k_noise_context(est);
            let payload = Block::payload(Speaker::User, "marker payload");
            let (placed, offset) = place_at_fraction(blocks, payload, x, est).unwrap();
            assert!((offset as i64 - expected).abs() <= 25, "offset {offset} for x={x}");
            let total: u64 = placed.iter().map(block_chars).sum();
            assert_eq!(est.estimate_chars(total), 10_000 + est.estimate("marker payload\n"));
        }
    }

    #[test]
    fn splitting_noise_preserves_total_chars() {
        let est = TokenEstimator::default();
        let blocks = ten_k_noise_context(est);
        let before: u64 = blocks.iter().map(block_chars).sum();
        let payload = Block::payload(Speaker::User, "marker");
        let payload_chars = block_chars(&payload);
        let (placed, _) = place_at_fraction(blocks, payload, 0.5, est).unwrap();
        let after: u64 = placed.iter().map(block_chars).sum();
        assert_eq!(after, before + payload_chars);
    }

    #[test]
    fn unsplittable_context_conflicts() {
        let est = TokenEstimator::default();
        // One giant dialogue block: the only candidates are its two ends.
        let blocks = vec![Block::dialogue(Speaker::User, "d".repeat(8000))];
        let err = place_at_fraction(blocks, Block::payload(Speaker::User, "p"), 0.5, est)
            .unwrap_err();
        assert!(matches!(err, ForgeError::GeometryConflict { .. }));
    }

    #[test]
    fn assemble_fills_exact_budget() {
        let est = TokenEstimator::default();
        let slots = vec![
            Slot::Fixed(Turn::user("hello there")),
            Slot::Seeded {
                turn: Turn::system("payload one"),
                kind: PayloadKind::Fact,
                id: "f1".into(),
                x: 0.5,
            },
            Slot::Seeded {
                turn: Turn::user("payload two"),
                kind: PayloadKind::Intent,
                id: "g2".into(),
                x: 0.9,
            },
        ];
        let out = assemble(slots, 2000, est, 5, &[]).unwrap();
        assert_eq!(out.token_count, 2000);
        assert_eq!(out.seeds.len(), 2);
        for seed in &out.seeds {
            let frac = seed.placed_offset_tokens as f64 / out.token_count as f64;
            assert!((frac - seed.position_fraction).abs() <= 0.005);
        }
    }

    #[test]
    fn assemble_rejects_oversized_fixed_content() {
        let est = TokenEstimator::default();
        let slots = vec![
            Slot::Fixed(Turn::user("x".repeat(9000))),
            Slot::Seeded {
                turn: Turn::user("late payload"),
                kind: PayloadKind::Intent,
                id: "g2".into(),
                x: 0.9,
            },
        ];
        let err = assemble(slots, 2000, est, 5, &[]).unwrap_err();
        assert!(matches!(err, ForgeError::GeometryConflict { .. } | ForgeError::BudgetExceeded { .. }));
    }
}
