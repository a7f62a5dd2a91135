//! Exact per-cycle moments and age metrics.
//!
//! The delivery process renews at every successful update. Between two
//! successes a geometric number `M` of failed updates occurs, with
//! `Pr(M = m) = (1 - p)^m p`, so a cycle splits into the total failed
//! time `D` (sum of `M` single-update durations `d`) followed by the
//! successful update's duration `S`. Standard renewal-reward arguments
//! give the two age metrics from the moments of `S` and `D`:
//!
//! ```text
//! avg  = E[S] + (E[S^2]/2 + E[D^2]/2 + E[S] E[D]) / (E[S] + E[D])
//! peak = 2 E[S] + E[D]
//! ```
//!
//! Everything here reduces to per-packet attempt counts. Within an
//! update that reaches packet `j`, the attempts spent on packet `j`
//! follow a geometric law truncated at the cap `c_j`, and attempt
//! counts of different packets are conditionally independent. That
//! factorization makes every moment an `O(K)` sum; the module also
//! carries a direct-enumeration oracle and two telescoping recursions
//! used to cross-check the factorized engine.

use crate::model::{AoiResult, Cap, ErasureChannel, Error, Policy, UpdateMoments};

/// `epsilon^c`, with `Unbounded` mapping to 0. Uses `exp(c ln eps)` so
/// huge caps cannot overflow the exponent; results below `1e-300` are
/// snapped to 0 and from there on the cap behaves exactly like
/// `Unbounded`.
fn cap_erasure_mass(cap: Cap, epsilon: f64) -> f64 {
    let c = match cap {
        Cap::Unbounded => return 0.0,
        Cap::Finite(c) => c,
    };
    if epsilon == 0.0 {
        return 0.0;
    }
    let v = (c as f64 * epsilon.ln()).exp();
    if v < 1e-300 {
        0.0
    } else {
        v
    }
}

/// Moments of the attempts one packet consumes, conditional on the
/// packet getting through within its cap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketAttemptMoments {
    /// `1 - epsilon^c`: probability the packet beats its cap.
    pub success_within_cap: f64,
    /// Conditional mean number of attempts; at most `1/(1 - epsilon)`.
    pub mean_attempts: f64,
    /// Conditional second moment of the attempt count.
    pub second_moment_attempts: f64,
}

/// Closed-form truncated-geometric attempt moments for one packet.
///
/// With `q = epsilon`, the attempt count `T` satisfies
/// `Pr(T = i) = (1 - q) q^(i-1) / (1 - q^c)` for `i = 1..=c`. The
/// moment sums telescope; the unbounded cap is the plain geometric
/// law with mean `1/(1-q)` and second moment `(1+q)/(1-q)^2`.
///
/// ```
/// use aoi_erasure::{analytic::packet_attempt_moments, Cap, ErasureChannel};
/// let ch = ErasureChannel::new(0.5).unwrap();
/// let m = packet_attempt_moments(Cap::Finite(2), ch);
/// assert!((m.mean_attempts - 4.0 / 3.0).abs() < 1e-15);
/// assert!((m.second_moment_attempts - 2.0).abs() < 1e-15);
/// ```
pub fn packet_attempt_moments(cap: Cap, channel: ErasureChannel) -> PacketAttemptMoments {
    let q = channel.epsilon();
    if q == 0.0 {
        return PacketAttemptMoments {
            success_within_cap: 1.0,
            mean_attempts: 1.0,
            second_moment_attempts: 1.0,
        };
    }
    let qc = cap_erasure_mass(cap, q);
    let omq = 1.0 - q;
    if qc == 0.0 {
        return PacketAttemptMoments {
            success_within_cap: 1.0,
            mean_attempts: 1.0 / omq,
            second_moment_attempts: (1.0 + q) / (omq * omq),
        };
    }
    if cap == Cap::Finite(1) {
        // One shot: conditional on success the count is exactly 1.
        return PacketAttemptMoments {
            success_within_cap: omq,
            mean_attempts: 1.0,
            second_moment_attempts: 1.0,
        };
    }
    let c = cap.finite().expect("qc > 0 implies a finite cap") as f64;
    let omqc = 1.0 - qc;
    let mean = 1.0 / omq - c * qc / omqc;
    // Partial sums over i = 0..c of q^i, i q^i, i^2 q^i.
    let a0 = omqc / omq;
    let a1 = (q - c * qc + (c - 1.0) * qc * q) / (omq * omq);
    let a2 = (q + q * q - c * c * qc + (2.0 * c * c - 2.0 * c - 1.0) * qc * q
        - (c - 1.0) * (c - 1.0) * qc * q * q)
        / (omq * omq * omq);
    // E[T^2 | T <= c] with T = i + 1 shifts to a2 + 2 a1 + a0.
    let second = omq * (a2 + 2.0 * a1 + a0) / omqc;
    PacketAttemptMoments {
        success_within_cap: omqc,
        mean_attempts: mean,
        second_moment_attempts: second,
    }
}

/// Same conditional moments by literal summation over `i = 1..=c`.
/// Only sensible for small finite caps; kept as an oracle for the
/// closed form above.
pub fn packet_attempt_moments_by_summation(
    c: u32,
    channel: ErasureChannel,
) -> PacketAttemptMoments {
    let q = channel.epsilon();
    let mut mass = 0.0;
    let mut m1 = 0.0;
    let mut m2 = 0.0;
    let mut qpow = 1.0;
    for i in 1..=c {
        let w = (1.0 - q) * qpow;
        mass += w;
        m1 += w * i as f64;
        m2 += w * (i as f64) * (i as f64);
        qpow *= q;
    }
    PacketAttemptMoments {
        success_within_cap: mass,
        mean_attempts: m1 / mass,
        second_moment_attempts: m2 / mass,
    }
}

/// Probability that a single update delivers all `K` packets:
/// the product of `1 - epsilon^c_j` over the policy.
///
/// ```
/// use aoi_erasure::{analytic::success_prob, ErasureChannel, Policy};
/// let p: Policy = "1,2".parse().unwrap();
/// let ch = ErasureChannel::new(0.5).unwrap();
/// assert!((success_prob(&p, ch) - 0.375).abs() < 1e-15);
/// ```
pub fn success_prob(policy: &Policy, channel: ErasureChannel) -> f64 {
    policy
        .caps()
        .iter()
        .map(|&c| 1.0 - cap_erasure_mass(c, channel.epsilon()))
        .product()
}

/// `(E[S], E[S^2])` for the successful update: means add, and by
/// conditional independence so do variances.
pub fn success_time_moments(policy: &Policy, channel: ErasureChannel) -> (f64, f64) {
    let mut mean = 0.0;
    let mut var = 0.0;
    for &cap in policy.caps() {
        let m = packet_attempt_moments(cap, channel);
        mean += m.mean_attempts;
        var += m.second_moment_attempts - m.mean_attempts * m.mean_attempts;
    }
    (mean, var + mean * mean)
}

/// `(E[d], E[d^2])` for a single failed update.
///
/// A failed update dies at the first packet whose cap fills up:
/// packet `j` with probability `prod_{h<j} (1 - epsilon^c_h) *
/// epsilon^c_j`, after `c_j` slots on packet `j` plus the (truncated
/// geometric) attempts already spent on packets `1..j`. Returns
/// `(0, 0)` when no cap is finite.
pub fn failed_update_moments(policy: &Policy, channel: ErasureChannel) -> (f64, f64) {
    let q = channel.epsilon();
    let mut prefix = 1.0; // probability the update survives packets 1..j
    let mut mean_before = 0.0; // E[attempts on packets 1..j]
    let mut var_before = 0.0;
    let mut mass = 0.0; // total failure probability, built without cancellation
    let mut num1 = 0.0;
    let mut num2 = 0.0;
    for &cap in policy.caps() {
        let qc = cap_erasure_mass(cap, q);
        if qc > 0.0 {
            let c = cap.finite().expect("qc > 0 implies a finite cap") as f64;
            let w = prefix * qc;
            mass += w;
            num1 += w * (c + mean_before);
            num2 += w * (c * c + 2.0 * c * mean_before + var_before + mean_before * mean_before);
        }
        let m = packet_attempt_moments(cap, channel);
        prefix *= 1.0 - qc;
        mean_before += m.mean_attempts;
        var_before += m.second_moment_attempts - m.mean_attempts * m.mean_attempts;
    }
    if mass == 0.0 {
        return (0.0, 0.0);
    }
    (num1 / mass, num2 / mass)
}

/// Moments of `D`, the total failed time per cycle, from the moments
/// of one failed update. `M` is geometric with success parameter `p`,
/// so `E[D] = E[d] (1-p)/p` and
/// `E[D^2] = E[d^2] (1-p)/p + 2 E[D]^2`.
pub fn aggregate_failure_moments(p: f64, e_d: f64, e_d2: f64) -> (f64, f64) {
    if p >= 1.0 {
        return (0.0, 0.0);
    }
    let r = (1.0 - p) / p;
    let e_dtot = r * e_d;
    (e_dtot, r * e_d2 + 2.0 * e_dtot * e_dtot)
}

/// All per-cycle moments for one policy on one channel, via the
/// factorized `O(K)` engine.
///
/// ```
/// use aoi_erasure::{analytic::update_moments, ErasureChannel, Policy};
/// let m = update_moments(&"1".parse::<Policy>().unwrap(),
///                        ErasureChannel::new(0.5).unwrap());
/// assert_eq!(
///     (m.p, m.e_s, m.e_s2, m.e_d, m.e_d2, m.e_dtot, m.e_dtot2),
///     (0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 3.0),
/// );
/// ```
pub fn update_moments(policy: &Policy, channel: ErasureChannel) -> UpdateMoments {
    moments_from_caps(policy.caps(), channel)
}

/// Engine core on a raw cap slice; lets the optimizer score candidate
/// vectors without building a `Policy` per candidate.
pub(crate) fn moments_from_caps(caps: &[Cap], channel: ErasureChannel) -> UpdateMoments {
    let k = caps.len() as f64;
    if channel.epsilon() == 0.0 {
        // Noiseless channel: every update succeeds in exactly K slots.
        return UpdateMoments {
            p: 1.0,
            e_s: k,
            e_s2: k * k,
            e_d: 0.0,
            e_d2: 0.0,
            e_dtot: 0.0,
            e_dtot2: 0.0,
        };
    }
    let q = channel.epsilon();
    let mut p = 1.0;
    let mut mean_s = 0.0;
    let mut var_s = 0.0;
    let mut fail_mass = 0.0;
    let mut fail_num1 = 0.0;
    let mut fail_num2 = 0.0;
    for &cap in caps {
        let qc = cap_erasure_mass(cap, q);
        if qc > 0.0 {
            let c = cap.finite().expect("qc > 0 implies a finite cap") as f64;
            let w = p * qc;
            fail_mass += w;
            fail_num1 += w * (c + mean_s);
            fail_num2 += w * (c * c + 2.0 * c * mean_s + var_s + mean_s * mean_s);
        }
        let m = packet_attempt_moments(cap, channel);
        p *= 1.0 - qc;
        mean_s += m.mean_attempts;
        var_s += m.second_moment_attempts - m.mean_attempts * m.mean_attempts;
    }
    let (e_d, e_d2) = if fail_mass > 0.0 {
        (fail_num1 / fail_mass, fail_num2 / fail_mass)
    } else {
        (0.0, 0.0)
    };
    let (e_dtot, e_dtot2) = aggregate_failure_moments(p, e_d, e_d2);
    UpdateMoments {
        p,
        e_s: mean_s,
        e_s2: var_s + mean_s * mean_s,
        e_d,
        e_d2,
        e_dtot,
        e_dtot2,
    }
}

/// Time-average age of information implied by a moment set.
pub fn average_aoi(m: &UpdateMoments) -> f64 {
    m.e_s + (0.5 * m.e_s2 + 0.5 * m.e_dtot2 + m.e_s * m.e_dtot) / (m.e_s + m.e_dtot)
}

/// Mean peak age of information implied by a moment set.
pub fn peak_aoi(m: &UpdateMoments) -> f64 {
    2.0 * m.e_s + m.e_dtot
}

/// Convenience: both age metrics for one policy.
///
/// ```
/// use aoi_erasure::{analytic::aoi, ErasureChannel, Policy};
/// let r = aoi(&"1".parse::<Policy>().unwrap(), ErasureChannel::new(0.5).unwrap());
/// assert_eq!((r.average_aoi, r.peak_aoi), (2.5, 3.0));
/// ```
pub fn aoi(policy: &Policy, channel: ErasureChannel) -> AoiResult {
    let m = update_moments(policy, channel);
    AoiResult {
        average_aoi: average_aoi(&m),
        peak_aoi: peak_aoi(&m),
    }
}

/// Expected total elapsed time, counting abandoned updates, until the
/// `j`-th packet is first delivered; one entry per `j = 1..=K`.
///
/// Telescopes as `X_j = j/(1-eps) + sum_{i<j} r_{i+1} X_i` with
/// `r_i = eps^{c_i} / (1 - eps^{c_i})`. `X_1 = 1/(1-eps)` no matter
/// what `c_1` is, and `X_K = E[S] + E[D]`, which gives an independent
/// check of the factorized engine.
pub fn cumulative_time_recursion(policy: &Policy, channel: ErasureChannel) -> Vec<f64> {
    let q = channel.epsilon();
    let caps = policy.caps();
    let mut xs = Vec::with_capacity(caps.len());
    let mut acc = 0.0;
    for j in 1..=caps.len() {
        let x = j as f64 / (1.0 - q) + acc;
        if j < caps.len() {
            let qc = cap_erasure_mass(caps[j], q);
            acc += qc / (1.0 - qc) * x;
        }
        xs.push(x);
    }
    xs
}

/// `(E[S(i)], E[D(i)])` for every prefix policy `[c_1..c_i]`,
/// `i = 1..=K`, grown one packet at a time:
///
/// ```text
/// E[S(i+1)] = E[S(i)] + 1/(1-eps) - c eps^c / (1 - eps^c)
/// E[D(i+1)] = (E[D(i)] + eps^c (c + E[S(i)])) / (1 - eps^c)
/// ```
///
/// The last entries must agree with [`update_moments`].
pub fn prefix_moment_recursion(policy: &Policy, channel: ErasureChannel) -> (Vec<f64>, Vec<f64>) {
    let q = channel.epsilon();
    let mut e_s = Vec::with_capacity(policy.caps().len());
    let mut e_dtot = Vec::with_capacity(policy.caps().len());
    let mut s = 0.0;
    let mut d = 0.0;
    for &cap in policy.caps() {
        let qc = cap_erasure_mass(cap, q);
        let c = cap.finite().map_or(0.0, |c| c as f64);
        d = (d + qc * (c + s)) / (1.0 - qc);
        s += 1.0 / (1.0 - q) - c * qc / (1.0 - qc);
        e_s.push(s);
        e_dtot.push(d);
    }
    (e_s, e_dtot)
}

/// Default truncation for unbounded caps in [`brute_force_moments`]:
/// geometric tails beyond this many attempts are dropped.
pub const DEFAULT_TAIL_CUTOFF: u32 = 512;

const MAX_ENUMERATION_TERMS: f64 = 1e7;

/// Direct-enumeration oracle for [`update_moments`]: sums over every
/// per-packet attempt pattern instead of factorizing, and over the
/// number of failed updates per cycle instead of using the geometric
/// identities. Exponential in `K`, so it refuses jobs above about
/// 1e7 terms.
///
/// Attempt counts beyond `min(cap, tail_cutoff)` are dropped; pick a
/// cutoff with `epsilon^tail_cutoff` far below the tolerance in play.
pub fn brute_force_moments(
    policy: &Policy,
    channel: ErasureChannel,
    tail_cutoff: u32,
) -> Result<UpdateMoments, Error> {
    let q = channel.epsilon();
    let caps = policy.caps();
    let limits: Vec<u32> = caps
        .iter()
        .map(|c| c.finite().unwrap_or(tail_cutoff).min(tail_cutoff))
        .collect();
    let terms: f64 = limits.iter().map(|&l| l as f64).product();
    if terms > MAX_ENUMERATION_TERMS {
        return Err(Error::EnumerationTooLarge {
            terms,
            limit: MAX_ENUMERATION_TERMS,
        });
    }

    /// Kahan-compensated accumulator; the walk below adds millions of
    /// like-signed terms and plain summation costs a couple digits.
    #[derive(Default, Clone, Copy)]
    struct Acc {
        sum: f64,
        carry: f64,
    }

    impl Acc {
        fn add(&mut self, x: f64) {
            let y = x - self.carry;
            let t = self.sum + y;
            self.carry = (t - self.sum) - y;
            self.sum = t;
        }
    }

    #[derive(Default)]
    struct Sums {
        p: Acc,
        s1: Acc,
        s2: Acc,
        fail_mass: Acc,
        f1: Acc,
        f2: Acc,
    }

    fn walk(
        caps: &[Cap],
        limits: &[u32],
        q: f64,
        depth: usize,
        weight: f64,
        duration: u64,
        out: &mut Sums,
    ) {
        if depth == caps.len() {
            let dur = duration as f64;
            out.p.add(weight);
            out.s1.add(weight * dur);
            out.s2.add(weight * dur * dur);
            return;
        }
        // Packet `depth` dies here: its cap fills with consecutive erasures.
        if let Cap::Finite(c) = caps[depth] {
            let w = weight * cap_erasure_mass(caps[depth], q);
            if w > 0.0 {
                let dur = (duration + c as u64) as f64;
                out.fail_mass.add(w);
                out.f1.add(w * dur);
                out.f2.add(w * dur * dur);
            }
        }
        // Or it gets through on attempt t.
        let mut qpow = 1.0;
        for t in 1..=limits[depth] {
            walk(
                caps,
                limits,
                q,
                depth + 1,
                weight * (1.0 - q) * qpow,
                duration + t as u64,
                out,
            );
            qpow *= q;
        }
    }

    let mut sums = Sums::default();
    walk(caps, &limits, q, 0, 1.0, 0, &mut sums);

    let p = sums.p.sum;
    let e_s = sums.s1.sum / p;
    let e_s2 = sums.s2.sum / p;
    let fail_mass = sums.fail_mass.sum;
    let (e_d, e_d2) = if fail_mass > 0.0 {
        (sums.f1.sum / fail_mass, sums.f2.sum / fail_mass)
    } else {
        (0.0, 0.0)
    };

    // Aggregate D by explicit summation over the number of failed
    // updates m, truncated once the geometric mass is exhausted.
    let mut e_dtot = 0.0;
    let mut e_dtot2 = 0.0;
    if fail_mass > 0.0 {
        let var_d = e_d2 - e_d * e_d;
        let fail_ratio = fail_mass / (fail_mass + p);
        let mut pm = p / (fail_mass + p); // Pr(M = 0), normalized
        let mut m = 0u64;
        while pm > 1e-18 {
            let mf = m as f64;
            e_dtot += pm * mf * e_d;
            e_dtot2 += pm * (mf * var_d + mf * mf * e_d * e_d);
            pm *= fail_ratio;
            m += 1;
        }
    }

    Ok(UpdateMoments {
        p,
        e_s,
        e_s2,
        e_d,
        e_d2,
        e_dtot,
        e_dtot2,
    })
}
