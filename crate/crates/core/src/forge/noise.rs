//! Synthetic system-log noise for context padding.
//!
//! The grammar is deliberately narrow: timestamped lines of dotted lowercase
//! subsystem names, log levels, maintenance verbs, and hex ids. Nothing in it
//! overlaps with intent texts, fact statements, or signal names, and every
//! block is checked against an explicit forbidden list before it is accepted.
//! Blocks are pure ASCII, so char counts equal byte counts.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::hashing::stable_hash64;
use crate::tokens::TokenEstimator;

use super::types::{NoiseBlock, NoiseStyle};
use super::ForgeError;

const SUBSYSTEMS: [&str; 16] = [
    "kernel.io", "netsvc.cache", "storage.gc", "sched.queue", "metrics.agg", "auth.token",
    "repl.stream", "index.merge", "wal.sync", "dns.probe", "tls.rotate", "pool.lease",
    "cron.tick", "quota.scan", "trace.span", "snapshot.diff",
];

const VERBS: [&str; 16] = [
    "rotate", "flush", "sync", "probe", "evict", "handshake", "checkpoint", "rebalance",
    "compact", "expire", "replay", "throttle", "attach", "detach", "scan", "commit",
];

const LEVELS: [&str; 5] = ["TRACE", "DEBUG", "INFO", "NOTICE", "WARN"];

fn log_line<R: Rng>(rng: &mut R) -> String {
    let h = rng.gen_range(0..24u32);
    let m = rng.gen_range(0..60u32);
    let s = rng.gen_range(0..60u32);
    let ms = rng.gen_range(0..1000u32);
    let subsystem = SUBSYSTEMS[rng.gen_range(0..SUBSYSTEMS.len())];
    let level = LEVELS[rng.gen_range(0..LEVELS.len())];
    let verb = VERBS[rng.gen_range(0..VERBS.len())];
    let id: u32 = rng.gen();
    format!("[{h:02}:{m:02}:{s:02}.{ms:03}] {subsystem} {level} {verb} id=0x{id:08x}")
}

/// A filler segment of exactly `chars` ASCII chars, used to land a block on
/// an exact length.
fn pad_segment<R: Rng>(rng: &mut R, chars: usize) -> String {
    if chars == 0 {
        return String::new();
    }
    const PREFIX: &str = "fill 0x";
    if chars <= PREFIX.len() {
        return "#".repeat(chars);
    }
    let mut out = String::with_capacity(chars);
    out.push_str(PREFIX);
    const HEX: &[u8] = b"0123456789abcdef";
    while out.len() < chars {
        out.push(HEX[rng.gen_range(0..16)] as char);
    }
    out
}

/// Noise text of exactly `chars` chars (block-internal newlines included).
pub(crate) fn noise_text_exact<R: Rng>(rng: &mut R, chars: u64) -> String {
    let target = chars as usize;
    let mut out = String::with_capacity(target);
    // Reserve room for the final pad segment so it never ends up zero-width
    // in an awkward spot; 80 chars comfortably exceeds any log line.
    loop {
        let line = log_line(rng);
        let sep = usize::from(!out.is_empty());
        if out.len() + sep + line.len() + 80 > target {
            break;
        }
        if sep == 1 {
            out.push('\n');
        }
        out.push_str(&line);
    }
    let mut remaining = target - out.len();
    if remaining > 0 && !out.is_empty() {
        out.push('\n');
        remaining -= 1;
    }
    out.push_str(&pad_segment(rng, remaining));
    debug_assert_eq!(out.len(), target);
    debug_assert!(out.is_ascii());
    out
}

fn contains_forbidden(text: &str, forbidden: &[String]) -> Option<String> {
    forbidden.iter().find(|f| !f.is_empty() && text.contains(f.as_str())).cloned()
}

/// Builds a noise block whose token estimate equals `target_tokens` exactly
/// (the block is sized to `target_tokens * chars_per_token` chars, which is
/// well inside the 2 percent contract).
///
/// Generation is retried with a perturbed seed if a forbidden string ever
/// appears; with the disjoint grammar that is astronomically unlikely, but
/// the check is what the purity guarantee rests on, not the grammar.
pub fn make_noise(
    rng_seed: u64,
    target_tokens: u64,
    forbidden: &[String],
    est: TokenEstimator,
) -> Result<NoiseBlock, ForgeError> {
    const MAX_ATTEMPTS: u64 = 16;
    let chars = target_tokens * est.chars_per_token as u64;
    for attempt in 0..MAX_ATTEMPTS {
        let seed = if attempt == 0 {
            rng_seed
        } else {
            stable_hash64(&[&rng_seed.to_string(), "retry", &attempt.to_string()])
        };
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let text = noise_text_exact(&mut rng, chars);
        if contains_forbidden(&text, forbidden).is_none() {
            debug_assert_eq!(est.estimate(&text), target_tokens);
            return Ok(NoiseBlock { text, style: NoiseStyle::SystemLog, rng_seed: seed });
        }
    }
    Err(ForgeError::NoiseConstraint { attempts: MAX_ATTEMPTS })
}
