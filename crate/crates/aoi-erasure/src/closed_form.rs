//! Named formulas and structural facts: baseline policies in closed
//! form, small-`epsilon` expansions, two-sided bounds on the best
//! achievable average age, and cap lower bounds for the peak-age
//! objective.
//!
//! Everything here is a thin, independently checkable layer over the
//! engine in [`crate::analytic`]; the test suites hold each formula
//! against the engine and against exhaustive search.

use crate::analytic;
use crate::model::{Cap, ErasureChannel, Policy};

/// Average age of the zero-tolerance policy `[1, 1, ..., 1]`, which
/// abandons an update on any erasure. Computed through the moment
/// engine; see [`zero_error_audit`] for the closed-form cross-check.
pub fn zero_error_aoi(k: u32, channel: ErasureChannel) -> f64 {
    let policy = Policy::all_ones(k).expect("k >= 1");
    analytic::average_aoi(&analytic::update_moments(&policy, channel))
}

/// Closed-form expansion of [`zero_error_aoi`], assembled from the
/// per-cycle moment identities with `a = (1 - eps)^(-K)`:
/// `E[D] = (a - 1 - K eps)/eps` and
/// `E[D^2] = (2a^2 - (2 + eps + 4K eps) a + (1 + K eps)^2 - 1 + eps)/eps^2`.
/// Agrees with the engine to floating-point accuracy.
pub fn zero_error_aoi_expansion(k: u32, channel: ErasureChannel) -> f64 {
    zero_error_expansion_impl(k, channel, -1.0)
}

/// A mis-transcription of [`zero_error_aoi_expansion`] that flips the
/// sign of the middle numerator term in the final fraction. It is
/// badly wrong (8.5 instead of 2.5 for one packet at `eps = 0.5`) and
/// is retained only so [`zero_error_audit`] can document how the error
/// presents.
pub fn zero_error_aoi_expansion_suspect(k: u32, channel: ErasureChannel) -> f64 {
    zero_error_expansion_impl(k, channel, 1.0)
}

fn zero_error_expansion_impl(k: u32, channel: ErasureChannel, middle_sign: f64) -> f64 {
    assert!(k >= 1, "need at least one packet");
    let eps = channel.epsilon();
    let kf = k as f64;
    if eps == 0.0 {
        return 1.5 * kf;
    }
    let a = (1.0 - eps).powi(-(k as i32));
    1.5 * kf
        + (a - 1.0 - kf * eps) / (2.0 * eps)
        + (a * a + middle_sign * (2.0 * kf * eps + eps) * a + eps - 1.0) / (2.0 * eps * (a - 1.0))
}

/// Engine value, corrected expansion, and the suspect sign-flipped
/// variant for the zero-tolerance policy, side by side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroErrorAudit {
    pub k: u32,
    pub epsilon: f64,
    /// Shipped answer, from the moment engine.
    pub engine: f64,
    /// Corrected closed form; must match the engine.
    pub expansion: f64,
    /// Sign-flipped closed form, kept to document the discrepancy.
    pub suspect_expansion: f64,
}

impl ZeroErrorAudit {
    /// Absolute engine/expansion disagreement; floating-point small.
    pub fn expansion_gap(&self) -> f64 {
        (self.engine - self.expansion).abs()
    }

    /// Absolute error of the suspect variant; large except at `eps = 0`.
    pub fn suspect_gap(&self) -> f64 {
        (self.engine - self.suspect_expansion).abs()
    }
}

impl std::fmt::Display for ZeroErrorAudit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "zero-tolerance audit (K={}, eps={}): engine={:.12}, \
             expansion={:.12} (|gap|={:.3e}), suspect={:.12} (|gap|={:.3e})",
            self.k,
            self.epsilon,
            self.engine,
            self.expansion,
            self.expansion_gap(),
            self.suspect_expansion,
            self.suspect_gap(),
        )
    }
}

/// Evaluates both closed-form variants of the zero-tolerance average
/// age against the engine.
///
/// ```
/// use aoi_erasure::{closed_form::zero_error_audit, ErasureChannel};
/// let audit = zero_error_audit(1, ErasureChannel::new(0.5).unwrap());
/// assert_eq!(audit.engine, 2.5);
/// assert!(audit.expansion_gap() < 1e-12);
/// assert!(audit.suspect_gap() > 5.0); // the flipped sign lands on 8.5
/// ```
pub fn zero_error_audit(k: u32, channel: ErasureChannel) -> ZeroErrorAudit {
    ZeroErrorAudit {
        k,
        epsilon: channel.epsilon(),
        engine: zero_error_aoi(k, channel),
        expansion: zero_error_aoi_expansion(k, channel),
        suspect_expansion: zero_error_aoi_expansion_suspect(k, channel),
    }
}

/// Average age of the infinite-tolerance policy `[inf, ..., inf]`:
/// `3K/2 + eps (3K + 1) / (2 (1 - eps))`.
///
/// ```
/// use aoi_erasure::{closed_form::infinite_error_aoi, ErasureChannel};
/// assert_eq!(infinite_error_aoi(5, ErasureChannel::new(0.5).unwrap()), 15.5);
/// ```
pub fn infinite_error_aoi(k: u32, channel: ErasureChannel) -> f64 {
    assert!(k >= 1, "need at least one packet");
    let eps = channel.epsilon();
    let kf = k as f64;
    1.5 * kf + eps * (3.0 * kf + 1.0) / (2.0 * (1.0 - eps))
}

/// Cap vector that attains the minimum average age to first order as
/// `eps -> 0`: caps 1 for the first two packets and (canonically) 2
/// for the rest. For `K = 2` the representative is `[1, 2]`, for
/// `K = 1` it is `[1]`.
///
/// Only the pattern {which caps are 1} matters to first order; among
/// the equivalent choices for the remaining caps this returns the
/// lexicographically smallest.
pub fn small_eps_optimal_policy(k: u32) -> Policy {
    assert!(k >= 1, "need at least one packet");
    let caps = match k {
        1 => vec![Cap::Finite(1)],
        2 => vec![Cap::Finite(1), Cap::Finite(2)],
        _ => {
            let mut caps = vec![Cap::Finite(2); k as usize];
            caps[0] = Cap::Finite(1);
            caps[1] = Cap::Finite(1);
            caps
        }
    };
    Policy::new(caps).expect("caps validated by construction")
}

/// First-order minimum average age as `eps -> 0`:
/// `3K/2 + eps (3K^2 - 2K + 3)/(2K)` for `K >= 3` and `3 + 5 eps / 2`
/// for `K = 2`. The remainder is `o(eps)`.
///
/// # Panics
///
/// For `k < 2`; the two-branch expansion below starts at two packets.
pub fn small_eps_optimal_aoi(k: u32, channel: ErasureChannel) -> f64 {
    assert!(k >= 2, "expansion defined for two or more packets");
    let eps = channel.epsilon();
    let kf = k as f64;
    if k == 2 {
        3.0 + 2.5 * eps
    } else {
        1.5 * kf + eps * (3.0 * kf * kf - 2.0 * kf + 3.0) / (2.0 * kf)
    }
}

/// Two-sided bounds on the best achievable average age over all
/// policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoiBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `K/(1-eps) (1 + (1-eps)^K / 2) <= min Δ <= K/(1-eps) (3/2 + eps/(2K))`.
/// The upper bound is exactly the infinite-tolerance value.
pub fn aoi_bounds(k: u32, channel: ErasureChannel) -> AoiBounds {
    assert!(k >= 1, "need at least one packet");
    let eps = channel.epsilon();
    let kf = k as f64;
    let base = kf / (1.0 - eps);
    AoiBounds {
        lower: base * (1.0 + (1.0 - eps).powi(k as i32) / 2.0),
        upper: base * (1.5 + eps / (2.0 * kf)),
    }
}

/// First-order minimum peak age as `eps -> 0`: `2K + eps (2K - 1)`.
pub fn small_eps_optimal_paoi(k: u32, channel: ErasureChannel) -> f64 {
    assert!(k >= 1, "need at least one packet");
    let kf = k as f64;
    2.0 * kf + channel.epsilon() * (2.0 * kf - 1.0)
}

/// Ceiling that first snaps values within `1e-9` of an integer, so
/// quotients like `2 / (1 - 0.9)` that land on `20.000000000000004`
/// do not get bumped a whole step up.
fn tolerant_ceil(x: f64) -> u32 {
    let r = x.round();
    let v = if (x - r).abs() < 1e-9 { r } else { x.ceil() };
    v as u32
}

/// For `K = 2`, the peak-optimal second cap lies in
/// `[ceil(1/(1-eps)), ceil((1+eps)/(1-eps))]` (and the first cap is 1).
pub fn paoi_c2_range(channel: ErasureChannel) -> (u32, u32) {
    let eps = channel.epsilon();
    (
        tolerant_ceil(1.0 / (1.0 - eps)),
        tolerant_ceil((1.0 + eps) / (1.0 - eps)),
    )
}

/// Per-coordinate lower bounds on a peak-optimal cap vector:
/// `c_1 = 1` and `c_i >= ceil((i-1)/(1-eps))` for `i >= 2`. The
/// bounds are nondecreasing in `i`, matching the fact that some
/// peak-optimal vector is nondecreasing.
///
/// ```
/// use aoi_erasure::{closed_form::paoi_cap_lower_bounds, ErasureChannel};
/// let lb = paoi_cap_lower_bounds(5, ErasureChannel::new(0.5).unwrap());
/// assert_eq!(lb, vec![1, 2, 4, 6, 8]);
/// ```
pub fn paoi_cap_lower_bounds(k: u32, channel: ErasureChannel) -> Vec<u32> {
    assert!(k >= 1, "need at least one packet");
    let eps = channel.epsilon();
    (1..=k)
        .map(|i| tolerant_ceil((i - 1) as f64 / (1.0 - eps)).max(1))
        .collect()
}

/// The policy built from [`paoi_cap_lower_bounds`] verbatim; a cheap,
/// near-peak-optimal heuristic.
pub fn paoi_lower_bound_policy(k: u32, channel: ErasureChannel) -> Policy {
    let caps = paoi_cap_lower_bounds(k, channel)
        .into_iter()
        .map(Cap::Finite)
        .collect();
    Policy::new(caps).expect("bounds are positive")
}
