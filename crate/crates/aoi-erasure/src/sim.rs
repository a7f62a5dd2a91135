//! Slot-level Monte Carlo simulation of the source, channel, and
//! monitor loop.
//!
//! Each replication drives the exact state machine the analysis
//! models: one packet attempt per slot, erased independently with
//! probability `epsilon`, per-packet consecutive-erasure counters,
//! and a fresh update after every abandonment or delivery. An update
//! whose first packet goes out in slot `t` carries generation time
//! `t - 1`, so the age at a delivery in slot `t'` is exactly the
//! update duration `t' - (t - 1)`.
//!
//! The age path is a sawtooth; its time integral over one delivery
//! cycle of width `W` after a delivery of age `S_prev` is the exact
//! trapezoid `W S_prev + W^2/2`. Both the integral (doubled) and the
//! cycle peaks are accumulated in integers, so a noiseless run
//! reproduces `3K/2` and `2K` bit-exactly and every run is perfectly
//! reproducible.
//!
//! Statistics start at the first delivery at or after `warmup` and
//! end at the last delivery inside the horizon; the leading partial
//! cycle (or all of warmup) and the trailing partial cycle are
//! discarded. Replications use independent, deterministically derived
//! RNG streams and are merged in replication order, so results do not
//! depend on thread scheduling.

use rand::distr::{Bernoulli, Distribution};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::model::{Cap, ErasureChannel, Error, Policy, UpdateMoments};

/// Simulation run parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    /// Number of channel uses (slots) per replication.
    pub horizon: u64,
    /// Base RNG seed; replication `i` uses stream `i` of this seed.
    pub seed: u64,
    /// Independent replications; must be at least 1.
    pub replications: u32,
    /// Slots before measurement may start. Statistics begin at the
    /// first delivery at or after this time, so even `warmup = 0`
    /// discards the initial partial cycle.
    pub warmup: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            horizon: 1_000_000,
            seed: 0,
            replications: 20,
            warmup: 0,
        }
    }
}

impl SimConfig {
    fn validate(&self) -> Result<(), Error> {
        if self.replications < 1 {
            return Err(Error::NoReplications);
        }
        if self.horizon <= self.warmup {
            return Err(Error::BadSimWindow {
                horizon: self.horizon,
                warmup: self.warmup,
            });
        }
        Ok(())
    }
}

/// Aggregated simulation output. Confidence halfwidths are 95%,
/// normal-approximated across replication means; a single
/// replication reports halfwidth 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimStats {
    pub avg_aoi_mean: f64,
    pub avg_aoi_ci_halfwidth: f64,
    pub paoi_mean: f64,
    pub paoi_ci_halfwidth: f64,
    /// Successful deliveries over all replications' full runs.
    pub n_successes: u64,
    /// Abandoned updates over all replications' full runs.
    pub n_terminations: u64,
    /// Mean observed successful-update duration.
    pub emp_e_s: f64,
    /// Mean observed per-cycle total failed time.
    pub emp_e_dtot: f64,
}

/// One estimated moment with its 95% halfwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    pub ci_halfwidth: f64,
}

/// Sample counterparts of every [`UpdateMoments`] field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalMoments {
    pub p: MomentEstimate,
    pub e_s: MomentEstimate,
    pub e_s2: MomentEstimate,
    pub e_d: MomentEstimate,
    pub e_d2: MomentEstimate,
    pub e_dtot: MomentEstimate,
    pub e_dtot2: MomentEstimate,
    pub n_successes: u64,
    pub n_terminations: u64,
}

impl EmpiricalMoments {
    /// The point estimates as an [`UpdateMoments`], e.g. to run the
    /// shared invariant checker over simulation output.
    pub fn mean(&self) -> UpdateMoments {
        UpdateMoments {
            p: self.p.value,
            e_s: self.e_s.value,
            e_s2: self.e_s2.value,
            e_d: self.e_d.value,
            e_d2: self.e_d2.value,
            e_dtot: self.e_dtot.value,
            e_dtot2: self.e_dtot2.value,
        }
    }
}

/// Everything one replication produces. Window fields cover the
/// measured span between the first and last counted delivery; run
/// fields cover the whole horizon and satisfy exact slot accounting.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub(crate) struct RunRecord {
    pub n_cycles: u64,
    pub window_slots: u64,
    pub twice_area: u128,
    pub peak_sum: u128,
    pub sum_s: u64,
    pub sum_s2: u128,
    pub n_failed: u64,
    pub sum_d: u64,
    pub sum_d2: u128,
    pub sum_dtot: u64,
    pub sum_dtot2: u128,
    pub sum_s_dtot: u128,
    pub run_successes: u64,
    pub run_terminations: u64,
    pub run_success_slots: u64,
    pub run_failed_slots: u64,
    pub residual_slots: u64,
}

impl RunRecord {
    fn avg_aoi(&self) -> f64 {
        self.twice_area as f64 / (2.0 * self.window_slots as f64)
    }

    fn paoi(&self) -> f64 {
        self.peak_sum as f64 / self.n_cycles as f64
    }
}

pub(crate) fn run_once(
    policy: &Policy,
    channel: ErasureChannel,
    horizon: u64,
    warmup: u64,
    seed: u64,
    stream: u64,
) -> RunRecord {
    let caps = policy.caps();
    let k = caps.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let erasure = Bernoulli::new(channel.epsilon()).expect("epsilon in [0, 1)");

    let mut rec = RunRecord::default();
    let mut gen_time = 0u64; // generation time of the in-flight update
    let mut packet = 0usize;
    let mut consec = 0u32;
    let mut window_start: Option<u64> = None;
    let mut last_delivery = 0u64;
    let mut prev_s = 0u64; // duration of the previous counted delivery
    let mut pend_count = 0u64; // failed updates since the last delivery
    let mut pend_d = 0u64;
    let mut pend_d2 = 0u128;

    for t in 1..=horizon {
        if erasure.sample(&mut rng) {
            consec += 1;
            if Cap::Finite(consec) == caps[packet] {
                // Cap filled: drop the update, start a fresh one next slot.
                let d = t - gen_time;
                rec.run_terminations += 1;
                rec.run_failed_slots += d;
                if window_start.is_some() {
                    pend_count += 1;
                    pend_d += d;
                    pend_d2 += (d as u128) * (d as u128);
                }
                gen_time = t;
                packet = 0;
                consec = 0;
            }
        } else {
            consec = 0;
            packet += 1;
            if packet == k {
                let s = t - gen_time;
                rec.run_successes += 1;
                rec.run_success_slots += s;
                match window_start {
                    None if t >= warmup => {
                        window_start = Some(t);
                        last_delivery = t;
                        prev_s = s;
                    }
                    None => {}
                    Some(_) => {
                        let w = t - last_delivery;
                        debug_assert_eq!(w, pend_d + s);
                        rec.n_cycles += 1;
                        rec.twice_area += (w as u128) * (2 * prev_s + w) as u128;
                        rec.peak_sum += (prev_s + w) as u128;
                        rec.sum_s += s;
                        rec.sum_s2 += (s as u128) * (s as u128);
                        rec.n_failed += pend_count;
                        rec.sum_d += pend_d;
                        rec.sum_d2 += pend_d2;
                        rec.sum_dtot += pend_d;
                        rec.sum_dtot2 += (pend_d as u128) * (pend_d as u128);
                        rec.sum_s_dtot += (s as u128) * (pend_d as u128);
                        last_delivery = t;
                        prev_s = s;
                    }
                }
                pend_count = 0;
                pend_d = 0;
                pend_d2 = 0;
                gen_time = t;
                packet = 0;
                consec = 0;
            }
        }
    }
    // Trailing slots belong to updates that never resolved into a
    // counted cycle; the in-flight update holds the remainder.
    rec.window_slots = window_start.map_or(0, |ws| last_delivery - ws);
    rec.residual_slots = horizon - gen_time;
    rec
}

fn replicate(
    policy: &Policy,
    channel: ErasureChannel,
    config: &SimConfig,
) -> Result<Vec<RunRecord>, Error> {
    config.validate()?;
    let records: Vec<RunRecord> = (0..config.replications)
        .into_par_iter()
        .map(|i| {
            run_once(
                policy,
                channel,
                config.horizon,
                config.warmup,
                config.seed,
                i as u64,
            )
        })
        .collect();
    for (i, rec) in records.iter().enumerate() {
        if rec.n_cycles == 0 {
            return Err(Error::NoCompletedCycles {
                replication: i as u32,
            });
        }
    }
    Ok(records)
}

/// Sample mean and 95% halfwidth across replication-level values.
fn mean_ci(values: &[f64]) -> MomentEstimate {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return MomentEstimate {
            value: mean,
            ci_halfwidth: 0.0,
        };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    MomentEstimate {
        value: mean,
        ci_halfwidth: 1.96 * (var / n).sqrt(),
    }
}

/// Runs `config.replications` seeded replications and reports both
/// age metrics with confidence intervals.
///
/// ```
/// use aoi_erasure::{sim::{simulate, SimConfig}, ErasureChannel, Policy};
/// let cfg = SimConfig { horizon: 10_000, replications: 2, ..SimConfig::default() };
/// let stats = simulate(
///     &"2,1,3".parse::<Policy>().unwrap(),
///     ErasureChannel::new(0.0).unwrap(),
///     &cfg,
/// ).unwrap();
/// assert_eq!(stats.avg_aoi_mean, 4.5); // noiseless sawtooth, K = 3
/// assert_eq!(stats.paoi_mean, 6.0);
/// ```
pub fn simulate(
    policy: &Policy,
    channel: ErasureChannel,
    config: &SimConfig,
) -> Result<SimStats, Error> {
    let records = replicate(policy, channel, config)?;
    let avg: Vec<f64> = records.iter().map(RunRecord::avg_aoi).collect();
    let peak: Vec<f64> = records.iter().map(RunRecord::paoi).collect();
    let e_s: Vec<f64> = records
        .iter()
        .map(|r| r.sum_s as f64 / r.n_cycles as f64)
        .collect();
    let e_dtot: Vec<f64> = records
        .iter()
        .map(|r| r.sum_dtot as f64 / r.n_cycles as f64)
        .collect();
    let avg_e = mean_ci(&avg);
    let peak_e = mean_ci(&peak);
    Ok(SimStats {
        avg_aoi_mean: avg_e.value,
        avg_aoi_ci_halfwidth: avg_e.ci_halfwidth,
        paoi_mean: peak_e.value,
        paoi_ci_halfwidth: peak_e.ci_halfwidth,
        n_successes: records.iter().map(|r| r.run_successes).sum(),
        n_terminations: records.iter().map(|r| r.run_terminations).sum(),
        emp_e_s: mean_ci(&e_s).value,
        emp_e_dtot: mean_ci(&e_dtot).value,
    })
}

/// Same simulation loop, reporting sample versions of all seven
/// moment fields instead of the age metrics.
pub fn empirical_moments(
    policy: &Policy,
    channel: ErasureChannel,
    config: &SimConfig,
) -> Result<EmpiricalMoments, Error> {
    let records = replicate(policy, channel, config)?;
    let per_rep = |f: &dyn Fn(&RunRecord) -> f64| -> MomentEstimate {
        let v: Vec<f64> = records.iter().map(f).collect();
        mean_ci(&v)
    };
    Ok(EmpiricalMoments {
        p: per_rep(&|r| r.n_cycles as f64 / (r.n_cycles + r.n_failed) as f64),
        e_s: per_rep(&|r| r.sum_s as f64 / r.n_cycles as f64),
        e_s2: per_rep(&|r| r.sum_s2 as f64 / r.n_cycles as f64),
        e_d: per_rep(&|r| {
            if r.n_failed == 0 {
                0.0
            } else {
                r.sum_d as f64 / r.n_failed as f64
            }
        }),
        e_d2: per_rep(&|r| {
            if r.n_failed == 0 {
                0.0
            } else {
                r.sum_d2 as f64 / r.n_failed as f64
            }
        }),
        e_dtot: per_rep(&|r| r.sum_dtot as f64 / r.n_cycles as f64),
        e_dtot2: per_rep(&|r| r.sum_dtot2 as f64 / r.n_cycles as f64),
        n_successes: records.iter().map(|r| r.run_successes).sum(),
        n_terminations: records.iter().map(|r| r.run_terminations).sum(),
    })
}

/// Pooled sample correlation between a cycle's successful-update
/// duration `S` and the same cycle's total failed time `D`, plus the
/// number of cycles pooled. The renewal argument treats the two as
/// independent; this should hover within a few `1/sqrt(n)` of zero.
/// Degenerate samples (no failures anywhere) report 0.
pub fn cycle_correlation(
    policy: &Policy,
    channel: ErasureChannel,
    config: &SimConfig,
) -> Result<(f64, u64), Error> {
    let records = replicate(policy, channel, config)?;
    let n: u64 = records.iter().map(|r| r.n_cycles).sum();
    let sum_s: f64 = records.iter().map(|r| r.sum_s as f64).sum();
    let sum_s2: f64 = records.iter().map(|r| r.sum_s2 as f64).sum();
    let sum_d: f64 = records.iter().map(|r| r.sum_dtot as f64).sum();
    let sum_d2: f64 = records.iter().map(|r| r.sum_dtot2 as f64).sum();
    let sum_sd: f64 = records.iter().map(|r| r.sum_s_dtot as f64).sum();
    let nf = n as f64;
    let cov = sum_sd - sum_s * sum_d / nf;
    let var_s = sum_s2 - sum_s * sum_s / nf;
    let var_d = sum_d2 - sum_d * sum_d / nf;
    if var_s <= 0.0 || var_d <= 0.0 {
        return Ok((0.0, n));
    }
    Ok((cov / (var_s * var_d).sqrt(), n))
}
