//! Age of information for a multi-packet status-update source on a
//! memoryless erasure channel with per-slot feedback.
//!
//! A source keeps a monitor fresh by sending updates of `K` packets,
//! one packet attempt per time slot. Each attempt is erased with
//! probability `epsilon`; feedback reveals the outcome immediately.
//! Retransmission is governed by a per-packet cap vector: after `c_j`
//! consecutive erasures of packet `j` the update is abandoned and a
//! fresh one starts. Small caps refresh the payload sooner, large
//! caps avoid throwing away progress; the cap vector trades these
//! off, and this crate measures the trade exactly.
//!
//! * [`analytic`] computes per-cycle moments and both age metrics in
//!   closed form, in `O(K)` per policy.
//! * [`closed_form`] holds named formulas: noiseless and
//!   never-abandon baselines, small-`epsilon` expansions, bounds, and
//!   structural facts about optimal cap vectors.
//! * [`sim`] is a slot-level Monte Carlo simulator with replicated
//!   confidence intervals, used to validate the algebra.
//! * [`opt`] searches cap space exhaustively, with a proven pruning
//!   rule for the peak-age objective, and sweeps curves over
//!   `epsilon` grids.
//!
//! ```
//! use aoi_erasure::{analytic, ErasureChannel, Policy};
//!
//! let policy: Policy = "1,2".parse().unwrap();
//! let channel = ErasureChannel::new(0.5).unwrap();
//! let r = analytic::aoi(&policy, channel);
//! assert!((r.average_aoi - 241.0 / 42.0).abs() < 1e-12);
//! assert!((r.peak_aoi - 7.0).abs() < 1e-12);
//! ```

pub mod analytic;
pub mod closed_form;
pub mod model;
pub mod opt;
pub mod sim;

pub use model::{AoiResult, Cap, ErasureChannel, Error, Policy, UpdateMoments};

/// The guide chapters under `book/src/` double as doc-tests: every
/// code block in the book compiles and runs with the crate's test
/// suite, so the prose can never drift from the API.
#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(model, "../../../book/src/model.md");
    chapter!(engine, "../../../book/src/engine.md");
    chapter!(closed_forms, "../../../book/src/closed-forms.md");
    chapter!(simulation, "../../../book/src/simulation.md");
    chapter!(optimization, "../../../book/src/optimization.md");
    chapter!(cli, "../../../book/src/cli.md");
}
