//! Trajectory forging: adversarial long-context construction.

mod builders;
mod geometry;
mod noise;
mod types;
mod update;

pub use builders::{Forge, ForgeConfig};
pub use geometry::{assemble, place_at_fraction, Assembled, Block, BlockKind, Slot};
pub use noise::make_noise;
pub use types::{
    render_turns, DialogueSource, Fact, FactChain, IntentPair, NoiseBlock, NoiseStyle,
    PayloadKind, SeedSpec, Speaker, Tier, Trajectory, Turn, BUDGET_TOLERANCE,
    SEED_FRACTION_TOLERANCE,
};
pub use update::{generate_update, sentence_count, UpdateMode};

#[derive(Debug, thiserror::Error)]
pub enum ForgeError {
    #[error("invalid intent pair: {detail}")]
    InvalidIntentPair { detail: String },

    #[error("invalid fact chain: {detail}")]
    InvalidFactChain { detail: String },

    #[error("invalid trajectory {id}: {detail}")]
    InvalidTrajectory { id: String, detail: String },

    #[error("geometry conflict: {detail}")]
    GeometryConflict { detail: String },

    #[error("content needs {needed_tokens} tokens but the budget is {budget_tokens}")]
    BudgetExceeded { needed_tokens: u64, budget_tokens: u64 },

    #[error("could not generate noise satisfying the forbidden list after {attempts} attempts")]
    NoiseConstraint { attempts: u64 },

    #[error("update generation failed for dialogue {dialogue_id}: {detail}")]
    UpdateGeneration { dialogue_id: String, detail: String },
}
