//! Domain types shared by every other module: retransmission policies,
//! the erasure channel, and the per-cycle moment summaries that the
//! analytic engine and the simulator both produce.
//!
//! Time is slotted. A status update consists of `K` packets sent in
//! order, one slot per transmission attempt, with instantaneous
//! error-free feedback after each slot. Packet `j` is retransmitted
//! until it gets through or until it has been erased `c_j` times in a
//! row, at which point the whole update is abandoned and a fresh one
//! begins. The vector `c = [c_1, ..., c_K]` is the [`Policy`].

use std::fmt;
use std::str::FromStr;

/// Per-packet retransmission cap: give up on the current update after
/// this many consecutive erasures of one packet, or never.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Cap {
    /// Abandon the update at the `n`-th consecutive erasure (`n >= 1`).
    Finite(u32),
    /// Retransmit forever; the update can only end in success.
    Unbounded,
}

impl Cap {
    /// Finite cap value, if any.
    pub fn finite(self) -> Option<u32> {
        match self {
            Cap::Finite(n) => Some(n),
            Cap::Unbounded => None,
        }
    }

    pub fn is_unbounded(self) -> bool {
        matches!(self, Cap::Unbounded)
    }
}

impl fmt::Display for Cap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cap::Finite(n) => write!(f, "{n}"),
            Cap::Unbounded => write!(f, "inf"),
        }
    }
}

impl FromStr for Cap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("inf") {
            return Ok(Cap::Unbounded);
        }
        match s.parse::<u32>() {
            Ok(n) if n >= 1 => Ok(Cap::Finite(n)),
            _ => Err(Error::BadCapToken(s.to_owned())),
        }
    }
}

/// A validated termination policy: one cap per packet, `K >= 1`,
/// every finite cap at least 1.
///
/// The textual form is a comma-separated cap list, e.g. `"1,2,inf"`;
/// [`Policy::to_string`] and [`str::parse`] round-trip.
///
/// ```
/// use aoi_erasure::Policy;
/// let p: Policy = "1,2,inf".parse().unwrap();
/// assert_eq!(p.k(), 3);
/// assert_eq!(p.to_string(), "1,2,inf");
/// ```
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Policy {
    caps: Vec<Cap>,
}

impl Policy {
    /// Validates a cap vector. Rejects an empty vector and any
    /// `Cap::Finite(0)` constructed by hand.
    pub fn new(caps: Vec<Cap>) -> Result<Self, Error> {
        if caps.is_empty() {
            return Err(Error::EmptyPolicy);
        }
        if caps.iter().any(|c| matches!(c, Cap::Finite(0))) {
            return Err(Error::ZeroCap);
        }
        Ok(Policy { caps })
    }

    /// `[1, 1, ..., 1]`: abandon an update on the first erasure.
    pub fn all_ones(k: u32) -> Result<Self, Error> {
        Self::new(vec![Cap::Finite(1); k as usize])
    }

    /// `[inf, ..., inf]`: never abandon an update.
    pub fn all_unbounded(k: u32) -> Result<Self, Error> {
        Self::new(vec![Cap::Unbounded; k as usize])
    }

    /// Number of packets per update.
    pub fn k(&self) -> u32 {
        self.caps.len() as u32
    }

    pub fn caps(&self) -> &[Cap] {
        &self.caps
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.caps.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let caps = s
            .split(',')
            .map(Cap::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        Policy::new(caps)
    }
}

/// Memoryless symbol-erasure channel: each transmitted packet is
/// erased independently with probability `epsilon`.
///
/// `epsilon = 1` is rejected: no packet would ever get through and
/// every quantity of interest diverges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErasureChannel {
    epsilon: f64,
}

impl ErasureChannel {
    pub fn new(epsilon: f64) -> Result<Self, Error> {
        if !epsilon.is_finite() || !(0.0..1.0).contains(&epsilon) {
            return Err(Error::BadEpsilon(epsilon));
        }
        Ok(ErasureChannel { epsilon })
    }

    pub fn epsilon(self) -> f64 {
        self.epsilon
    }
}

/// First and second moments of the per-cycle building blocks.
///
/// An update *cycle* is the span between two consecutive successful
/// deliveries: a geometric number of failed updates followed by one
/// success. `S` is the duration of the successful update, `d` the
/// duration of a single failed update, and `D` the total time spent
/// on failed updates within the cycle.
///
/// Every producer of this struct keeps the following invariants, and
/// [`UpdateMoments::validate`] checks them:
///
/// * `0 < p <= 1`
/// * `e_s >= K` and `e_s2 >= e_s^2`
/// * `e_d2 >= e_d^2` whenever failures are possible (`p < 1`)
/// * `e_dtot >= 0` and `e_dtot2 >= e_dtot^2`
///
/// When failures are impossible (`p = 1`, e.g. `epsilon = 0` or an
/// all-unbounded policy) the failure moments are zero by convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateMoments {
    /// Probability that an update attempt delivers all `K` packets.
    pub p: f64,
    /// Mean duration of a successful update, `E[S]`.
    pub e_s: f64,
    /// Second moment `E[S^2]`.
    pub e_s2: f64,
    /// Mean duration of one failed update, `E[d]`.
    pub e_d: f64,
    /// Second moment `E[d^2]`.
    pub e_d2: f64,
    /// Mean total failed time per cycle, `E[D]`.
    pub e_dtot: f64,
    /// Second moment `E[D^2]`.
    pub e_dtot2: f64,
}

impl UpdateMoments {
    /// Checks the struct invariants for a `K`-packet source, with a
    /// small relative slack for floating-point round-off. Returns a
    /// description of the first violated invariant.
    pub fn validate(&self, k: u32) -> Result<(), String> {
        // Relative slack; second moments are differences of like-sized terms.
        let tol = 1e-9;
        let ok = |lhs: f64, rhs: f64| lhs >= rhs - tol * rhs.abs().max(1.0);
        if !(self.p > 0.0 && self.p <= 1.0 + 1e-15) {
            return Err(format!("p = {} outside (0, 1]", self.p));
        }
        if !ok(self.e_s, k as f64) {
            return Err(format!("e_s = {} below K = {k}", self.e_s));
        }
        if !ok(self.e_s2, self.e_s * self.e_s) {
            return Err(format!(
                "e_s2 = {} below e_s^2 = {}",
                self.e_s2,
                self.e_s * self.e_s
            ));
        }
        if self.p < 1.0 && !ok(self.e_d2, self.e_d * self.e_d) {
            return Err(format!(
                "e_d2 = {} below e_d^2 = {}",
                self.e_d2,
                self.e_d * self.e_d
            ));
        }
        if self.e_dtot < 0.0 || self.e_dtot.is_nan() {
            return Err(format!("e_dtot = {} negative or NaN", self.e_dtot));
        }
        if !ok(self.e_dtot2, self.e_dtot * self.e_dtot) {
            return Err(format!(
                "e_dtot2 = {} below e_dtot^2 = {}",
                self.e_dtot2,
                self.e_dtot * self.e_dtot
            ));
        }
        for (name, v) in [
            ("p", self.p),
            ("e_s", self.e_s),
            ("e_s2", self.e_s2),
            ("e_d", self.e_d),
            ("e_d2", self.e_d2),
            ("e_dtot", self.e_dtot),
            ("e_dtot2", self.e_dtot2),
        ] {
            if !v.is_finite() {
                return Err(format!("{name} = {v} not finite"));
            }
        }
        Ok(())
    }
}

/// Exact age metrics for one policy on one channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AoiResult {
    /// Time-average age of information, `>= 3K/2`.
    pub average_aoi: f64,
    /// Mean peak age of information, `>= 2K`.
    pub peak_aoi: f64,
}

/// Everything that can go wrong in this crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("a policy needs at least one cap")]
    EmptyPolicy,
    #[error("finite caps must be at least 1")]
    ZeroCap,
    #[error("cap token '{0}' is neither a positive integer nor 'inf'")]
    BadCapToken(String),
    #[error("erasure probability {0} outside [0, 1)")]
    BadEpsilon(f64),
    #[error("enumeration would need about {terms:.1e} terms, over the limit of {limit:.1e}")]
    EnumerationTooLarge { terms: f64, limit: f64 },
    #[error("simulation horizon {horizon} does not exceed warmup {warmup}")]
    BadSimWindow { horizon: u64, warmup: u64 },
    #[error("at least one replication is required")]
    NoReplications,
    #[error(
        "replication {replication} saw fewer than two deliveries; \
         raise the horizon or lower epsilon"
    )]
    NoCompletedCycles { replication: u32 },
    #[error("search space holds about {candidates:.3e} policies, over the limit of {limit:.3e}")]
    SearchSpaceTooLarge { candidates: f64, limit: f64 },
    #[error("coordinate {index} of the search space admits no cap")]
    EmptySearchCoordinate { index: usize },
    #[error("policy has {got} caps but this run needs {expected}")]
    WrongPolicyLength { expected: usize, got: usize },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn policy_validation() {
        assert_eq!(Policy::new(vec![]), Err(Error::EmptyPolicy));
        assert_eq!(
            Policy::new(vec![Cap::Finite(1), Cap::Finite(0)]),
            Err(Error::ZeroCap)
        );
        let p = Policy::new(vec![Cap::Finite(1), Cap::Unbounded]).unwrap();
        assert_eq!(p.k(), 2);
        assert_eq!(p.caps()[1], Cap::Unbounded);
    }

    #[test]
    fn channel_validation() {
        assert!(ErasureChannel::new(0.0).is_ok());
        assert!(ErasureChannel::new(0.999).is_ok());
        assert_eq!(ErasureChannel::new(1.0), Err(Error::BadEpsilon(1.0)));
        assert_eq!(ErasureChannel::new(-0.1), Err(Error::BadEpsilon(-0.1)));
        assert!(ErasureChannel::new(f64::NAN).is_err());
    }

    #[test]
    fn policy_grammar_round_trip() {
        for s in ["1", "1,2,inf", "3,3,3", "inf,inf"] {
            let p: Policy = s.parse().unwrap();
            assert_eq!(p.to_string(), s);
        }
        assert!("".parse::<Policy>().is_err());
        assert!("1,,2".parse::<Policy>().is_err());
        assert!("0,2".parse::<Policy>().is_err());
        assert!("1,-3".parse::<Policy>().is_err());
        assert!("1,2.5".parse::<Policy>().is_err());
    }

    #[test]
    fn cap_ordering_puts_unbounded_last() {
        let mut caps = vec![Cap::Unbounded, Cap::Finite(7), Cap::Finite(2)];
        caps.sort();
        assert_eq!(caps, vec![Cap::Finite(2), Cap::Finite(7), Cap::Unbounded]);
    }

    #[test]
    fn moment_invariant_checker() {
        let good = UpdateMoments {
            p: 0.5,
            e_s: 1.0,
            e_s2: 1.0,
            e_d: 1.0,
            e_d2: 1.0,
            e_dtot: 1.0,
            e_dtot2: 3.0,
        };
        good.validate(1).unwrap();
        let mut bad = good;
        bad.e_s2 = 0.5;
        assert!(bad.validate(1).is_err());
        bad = good;
        bad.p = 0.0;
        assert!(bad.validate(1).is_err());
        bad = good;
        bad.e_s = 0.9;
        assert!(bad.validate(1).is_err());
    }
}
