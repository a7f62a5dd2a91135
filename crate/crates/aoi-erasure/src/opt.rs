//! Exhaustive policy search with structural pruning, plus the sweep
//! and figure-table helpers built on top of it.
//!
//! A search space is a per-coordinate cap domain: finite caps from a
//! coordinate's minimum up to `cap_max` (or a per-coordinate maximum),
//! optionally the unbounded cap, optionally restricted to nondecreasing
//! cap vectors. Candidates are enumerated in lexicographic order
//! (finite caps ascending, then unbounded) and scored with the `O(K)`
//! analytic engine, so even the default 13-value-per-coordinate space
//! is cheap for the `K` this model targets.
//!
//! For the peak objective, two structural facts shrink the space
//! before enumeration: some nondecreasing cap vector is optimal, and
//! every optimal cap obeys a closed-form per-coordinate lower bound
//! (with the first cap pinned to 1). [`prune_bound_paoi`] intersects a
//! space with those constraints; the optimum it finds is the global
//! one over the unpruned space.

use rayon::prelude::*;

use crate::analytic;
use crate::closed_form;
use crate::model::{Cap, ErasureChannel, Error, Policy, UpdateMoments};

/// Which age metric a search minimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    AverageAoi,
    PeakAoi,
}

impl Objective {
    /// Stable machine-readable name, used in CSV output.
    pub fn label(self) -> &'static str {
        match self {
            Objective::AverageAoi => "avg_aoi",
            Objective::PeakAoi => "paoi",
        }
    }

    /// The metric this objective reads off a moment summary.
    pub fn value(self, m: &UpdateMoments) -> f64 {
        match self {
            Objective::AverageAoi => analytic::average_aoi(m),
            Objective::PeakAoi => analytic::peak_aoi(m),
        }
    }
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Per-coordinate cap restriction. `max = None` leaves the upper end
/// to `cap_max` and keeps the unbounded cap eligible; `max = Some(m)`
/// also rules the unbounded cap out, since `inf > m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoordBound {
    pub min: u32,
    pub max: Option<u32>,
}

impl Default for CoordBound {
    fn default() -> Self {
        CoordBound { min: 1, max: None }
    }
}

/// The candidate set an [`optimize`] call enumerates.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSpace {
    pub objective: Objective,
    /// Largest finite cap considered on any coordinate.
    pub cap_max: u32,
    /// Whether the unbounded cap is a candidate value.
    pub include_unbounded: bool,
    /// Restrict to nondecreasing cap vectors. On by default only for
    /// the peak objective, where a nondecreasing optimum is a proven
    /// structural fact; for the average objective it is a heuristic
    /// and stays off so the search remains exact.
    pub monotone_only: bool,
    /// Optional per-coordinate bounds; length must equal `K` when set.
    pub coord_bounds: Option<Vec<CoordBound>>,
    /// Refuse to enumerate more candidates than this.
    pub candidate_limit: f64,
}

impl SearchSpace {
    pub fn new(objective: Objective) -> Self {
        SearchSpace {
            objective,
            cap_max: 12,
            include_unbounded: true,
            monotone_only: matches!(objective, Objective::PeakAoi),
            coord_bounds: None,
            candidate_limit: 1e8,
        }
    }
}

/// Outcome of an exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct OptResult {
    /// Lexicographically smallest minimizer.
    pub best_policy: Policy,
    /// Objective value of `best_policy`, from the analytic engine.
    pub best_value: f64,
    /// Candidates actually scored.
    pub evaluated: u64,
    /// Candidates of the unrestricted `(cap_max + unbounded)^K` grid
    /// that the space's constraints skipped.
    pub pruned: u64,
    /// All minimizers within [`TIE_TOLERANCE`] of the best value, in
    /// lexicographic order (the best policy first), truncated to
    /// [`MAX_REPORTED_TIES`].
    pub ties: Vec<Policy>,
}

/// Two candidates whose objective values differ by at most this are
/// reported as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Upper limit on the tie list in an [`OptResult`]; a noiseless
/// channel ties the whole space, which nobody needs materialized.
pub const MAX_REPORTED_TIES: usize = 64;

/// Finite caps `lo..=hi` (empty when `lo > hi`) plus optionally the
/// unbounded cap.
#[derive(Debug, Clone, Copy)]
struct CoordDomain {
    lo: u32,
    hi: u32,
    unbounded: bool,
}

impl CoordDomain {
    fn finite_len(&self) -> u64 {
        if self.lo > self.hi {
            0
        } else {
            (self.hi - self.lo + 1) as u64
        }
    }
}

/// Expands a space into per-coordinate domains, rejecting coordinates
/// left with no candidate cap.
///
/// Panics if `coord_bounds` is set with a length other than `k`.
fn resolve_domains(k: usize, space: &SearchSpace) -> Result<Vec<CoordDomain>, Error> {
    if k == 0 {
        return Err(Error::EmptyPolicy);
    }
    if let Some(b) = &space.coord_bounds {
        assert_eq!(b.len(), k, "coord_bounds length must equal K");
    }
    (0..k)
        .map(|i| {
            let bound = space
                .coord_bounds
                .as_ref()
                .map_or(CoordBound::default(), |b| b[i]);
            let d = CoordDomain {
                lo: bound.min.max(1),
                hi: bound.max.unwrap_or(space.cap_max).min(space.cap_max),
                unbounded: space.include_unbounded && bound.max.is_none(),
            };
            if d.finite_len() == 0 && !d.unbounded {
                Err(Error::EmptySearchCoordinate { index: i })
            } else {
                Ok(d)
            }
        })
        .collect()
}

/// Exact candidate count for a resolved space. The nondecreasing case
/// is a prefix-sum dynamic program over cap values (with the unbounded
/// cap as a value above every finite one); the unrestricted case is a
/// product.
fn count_candidates(domains: &[CoordDomain], monotone: bool) -> u128 {
    if !monotone {
        return domains.iter().fold(1u128, |acc, d| {
            acc.saturating_mul(d.finite_len() as u128 + d.unbounded as u128)
        });
    }
    let top = domains.iter().map(|d| d.hi).max().unwrap_or(0) as usize;
    // counts[v] = valid prefixes ending with finite cap v (1-based);
    // inf = valid prefixes ending with the unbounded cap, which sits
    // above every finite value in the nondecreasing order.
    let mut counts = vec![0u128; top + 1];
    let mut inf = 0u128;
    for (i, d) in domains.iter().enumerate() {
        if i == 0 {
            for v in d.lo..=d.hi {
                counts[v as usize] = 1;
            }
            inf = d.unbounded as u128;
            continue;
        }
        let mut next = vec![0u128; top + 1];
        let mut prefix = 0u128;
        for v in 1..=top as u32 {
            prefix = prefix.saturating_add(counts[v as usize]);
            if v >= d.lo && v <= d.hi {
                next[v as usize] = prefix;
            }
        }
        inf = if d.unbounded {
            prefix.saturating_add(inf)
        } else {
            0
        };
        counts = next;
    }
    counts
        .iter()
        .fold(0u128, |a, c| a.saturating_add(*c))
        .saturating_add(inf)
}

/// Depth-first enumeration over coordinates `1..K` (coordinate 0 is
/// fixed by the caller), lexicographic, honoring monotonicity.
fn walk_rest(
    domains: &[CoordDomain],
    monotone: bool,
    scratch: &mut Vec<Cap>,
    visit: &mut impl FnMut(&[Cap]),
) {
    let i = scratch.len();
    if i == domains.len() {
        visit(scratch);
        return;
    }
    let d = domains[i];
    let prev = scratch.last().copied();
    let skip_finite = monotone && matches!(prev, Some(Cap::Unbounded));
    if !skip_finite {
        let lo = match prev {
            Some(Cap::Finite(p)) if monotone => d.lo.max(p),
            _ => d.lo,
        };
        for v in lo..=d.hi {
            scratch.push(Cap::Finite(v));
            walk_rest(domains, monotone, scratch, visit);
            scratch.pop();
        }
    }
    if d.unbounded {
        scratch.push(Cap::Unbounded);
        walk_rest(domains, monotone, scratch, visit);
        scratch.pop();
    }
}

/// Per-worker fold state: local minimum and its near-ties.
struct LocalBest {
    evaluated: u64,
    min: f64,
    ties: Vec<(f64, Policy)>,
}

impl LocalBest {
    fn new() -> Self {
        LocalBest {
            evaluated: 0,
            min: f64::INFINITY,
            ties: Vec::new(),
        }
    }

    fn offer(&mut self, value: f64, caps: &[Cap]) {
        self.evaluated += 1;
        if value < self.min {
            self.min = value;
            self.ties.retain(|(v, _)| *v <= value + TIE_TOLERANCE);
        }
        if value <= self.min + TIE_TOLERANCE && self.ties.len() < MAX_REPORTED_TIES {
            self.ties
                .push((value, Policy::new(caps.to_vec()).expect("caps are valid")));
        }
    }
}

/// Minimizes the space's objective over every candidate policy by
/// exhaustive evaluation, in parallel over the first coordinate.
///
/// The reported value always equals the analytic engine's value for
/// the reported policy, and the result is deterministic: ties within
/// [`TIE_TOLERANCE`] resolve to the lexicographically smallest cap
/// vector, with finite caps ascending and the unbounded cap last.
///
/// ```
/// use aoi_erasure::opt::{optimize, Objective, SearchSpace};
/// use aoi_erasure::ErasureChannel;
/// let ch = ErasureChannel::new(0.5).unwrap();
/// let r = optimize(1, ch, &SearchSpace::new(Objective::AverageAoi)).unwrap();
/// assert_eq!(r.best_policy.to_string(), "1");
/// assert_eq!(r.best_value, 2.5); // give up at once: 1.5/p with p = 1/2, plus 1/2
/// ```
pub fn optimize(
    k: usize,
    channel: ErasureChannel,
    space: &SearchSpace,
) -> Result<OptResult, Error> {
    let domains = resolve_domains(k, space)?;
    let candidates = count_candidates(&domains, space.monotone_only);
    if candidates as f64 > space.candidate_limit {
        return Err(Error::SearchSpaceTooLarge {
            candidates: candidates as f64,
            limit: space.candidate_limit,
        });
    }

    let first: Vec<Cap> = {
        let d = domains[0];
        let mut v: Vec<Cap> = (d.lo..=d.hi).map(Cap::Finite).collect();
        if d.unbounded {
            v.push(Cap::Unbounded);
        }
        v
    };

    let objective = space.objective;
    let monotone = space.monotone_only;
    let locals: Vec<LocalBest> = first
        .par_iter()
        .map(|&c0| {
            let mut local = LocalBest::new();
            let mut scratch = Vec::with_capacity(k);
            scratch.push(c0);
            walk_rest(&domains, monotone, &mut scratch, &mut |caps| {
                let value = objective.value(&analytic::moments_from_caps(caps, channel));
                local.offer(value, caps);
            });
            local
        })
        .collect();

    let evaluated: u64 = locals.iter().map(|l| l.evaluated).sum();
    debug_assert_eq!(evaluated as u128, candidates);
    let best = locals.iter().map(|l| l.min).fold(f64::INFINITY, f64::min);
    // Workers only keep ties of their own local minimum, which is at
    // least the global one, so every global tie survives to this merge.
    let mut ties: Vec<(f64, Policy)> = Vec::new();
    for l in &locals {
        for (v, p) in &l.ties {
            if *v <= best + TIE_TOLERANCE && ties.len() < MAX_REPORTED_TIES {
                ties.push((*v, p.clone()));
            }
        }
    }
    let (best_value, best_policy) = ties
        .first()
        .cloned()
        .expect("space was validated non-empty");
    let baseline =
        (space.cap_max as u128 + space.include_unbounded as u128).saturating_pow(k as u32);
    Ok(OptResult {
        best_policy,
        best_value,
        evaluated,
        pruned: u64::try_from(baseline.saturating_sub(evaluated as u128)).unwrap_or(u64::MAX),
        ties: ties.into_iter().map(|(_, p)| p).collect(),
    })
}

/// Narrows a peak-objective space with the proven structure of peak
/// optima: the first cap is 1, each later cap is at least its
/// closed-form lower bound, and caps are nondecreasing. Returns the
/// intersected space; the search outcome over it matches the full
/// space.
///
/// Panics if the space's objective is not [`Objective::PeakAoi`].
pub fn prune_bound_paoi(
    k: usize,
    channel: ErasureChannel,
    space: &SearchSpace,
) -> Result<SearchSpace, Error> {
    assert!(
        matches!(space.objective, Objective::PeakAoi),
        "structural peak-age pruning only applies to the peak objective"
    );
    if k == 0 {
        return Err(Error::EmptyPolicy);
    }
    let lbs = closed_form::paoi_cap_lower_bounds(k as u32, channel);
    let mut bounds: Vec<CoordBound> = lbs
        .iter()
        .enumerate()
        .map(|(i, &lb)| CoordBound {
            min: lb,
            max: if i == 0 { Some(1) } else { None },
        })
        .collect();
    if let Some(old) = &space.coord_bounds {
        assert_eq!(old.len(), k, "coord_bounds length must equal K");
        for (b, o) in bounds.iter_mut().zip(old) {
            b.min = b.min.max(o.min);
            b.max = match (b.max, o.max) {
                (Some(a), Some(c)) => Some(a.min(c)),
                (a, None) => a,
                (None, c) => c,
            };
        }
    }
    Ok(SearchSpace {
        monotone_only: true,
        coord_bounds: Some(bounds),
        ..space.clone()
    })
}

/// How one sweep curve picks its policy at each grid point.
#[derive(Debug, Clone, PartialEq)]
pub enum PolicyChoice {
    /// Evaluate this fixed policy everywhere.
    Fixed(Policy),
    /// Evaluate the closed-form peak lower-bound policy for each
    /// erasure rate.
    PaoiLowerBound,
    /// Search the sweep's space for the best policy at each erasure
    /// rate.
    Auto,
}

/// A labeled curve in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepEntry {
    pub label: String,
    pub choice: PolicyChoice,
}

impl SweepEntry {
    pub fn new(label: &str, choice: PolicyChoice) -> Self {
        SweepEntry {
            label: label.to_owned(),
            choice,
        }
    }
}

/// One evaluated grid point. `policy` is absent only for rows that
/// plot a bound rather than an achievable policy.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub label: String,
    pub policy: Option<Policy>,
    pub value: f64,
}

/// Evaluates every entry across an erasure-rate grid, entry-major, so
/// each curve's rows are contiguous and in grid order.
pub fn sweep(
    k: usize,
    epsilons: &[f64],
    entries: &[SweepEntry],
    space: &SearchSpace,
) -> Result<Vec<SweepRow>, Error> {
    let mut rows = Vec::with_capacity(entries.len() * epsilons.len());
    for entry in entries {
        if let PolicyChoice::Fixed(p) = &entry.choice {
            if p.k() as usize != k {
                return Err(Error::WrongPolicyLength {
                    expected: k,
                    got: p.k() as usize,
                });
            }
        }
        for &eps in epsilons {
            let channel = ErasureChannel::new(eps)?;
            let (policy, value) = match &entry.choice {
                PolicyChoice::Fixed(p) => {
                    let m = analytic::update_moments(p, channel);
                    (p.clone(), space.objective.value(&m))
                }
                PolicyChoice::PaoiLowerBound => {
                    let p = closed_form::paoi_lower_bound_policy(k as u32, channel);
                    let m = analytic::update_moments(&p, channel);
                    (p, space.objective.value(&m))
                }
                PolicyChoice::Auto => {
                    let r = optimize(k, channel, space)?;
                    (r.best_policy, r.best_value)
                }
            };
            rows.push(SweepRow {
                epsilon: eps,
                label: entry.label.clone(),
                policy: Some(policy),
                value,
            });
        }
    }
    Ok(rows)
}

/// The erasure-rate grid the bundled figures use: 0.05 to 0.90 in
/// steps of 0.05.
pub fn default_epsilon_grid() -> Vec<f64> {
    (1..=18).map(|i| i as f64 / 20.0).collect()
}

/// Rows for the average-age comparison figure: the give-up-at-once
/// policy, the never-give-up policy, the mixed `[1, inf, ...]` policy,
/// the searched optimum, and the two closed-form bounds.
pub fn average_aoi_figure(k: usize, epsilons: &[f64]) -> Result<Vec<SweepRow>, Error> {
    let mut entries = vec![
        SweepEntry::new("all-ones", PolicyChoice::Fixed(Policy::all_ones(k as u32)?)),
        SweepEntry::new(
            "all-inf",
            PolicyChoice::Fixed(Policy::all_unbounded(k as u32)?),
        ),
    ];
    if k >= 2 {
        let mut caps = vec![Cap::Finite(1)];
        caps.extend(std::iter::repeat_n(Cap::Unbounded, k - 1));
        entries.push(SweepEntry::new(
            "one-then-inf",
            PolicyChoice::Fixed(Policy::new(caps)?),
        ));
    }
    entries.push(SweepEntry::new("optimal", PolicyChoice::Auto));
    let space = SearchSpace::new(Objective::AverageAoi);
    let mut rows = sweep(k, epsilons, &entries, &space)?;
    for (label, pick) in [("lower-bound", true), ("upper-bound", false)] {
        for &eps in epsilons {
            let channel = ErasureChannel::new(eps)?;
            let b = closed_form::aoi_bounds(k as u32, channel);
            rows.push(SweepRow {
                epsilon: eps,
                label: label.to_owned(),
                policy: None,
                value: if pick { b.lower } else { b.upper },
            });
        }
    }
    Ok(rows)
}

/// Rows for the peak-age comparison figure: the never-give-up policy,
/// the closed-form per-coordinate lower-bound policy, and the searched
/// optimum over a structurally pruned space whose cap ceiling is
/// raised until the lower-bound policy itself is inside the space.
pub fn peak_aoi_figure(k: usize, epsilons: &[f64]) -> Result<Vec<SweepRow>, Error> {
    let entries = vec![
        SweepEntry::new(
            "all-inf",
            PolicyChoice::Fixed(Policy::all_unbounded(k as u32)?),
        ),
        SweepEntry::new("paoi-lb", PolicyChoice::PaoiLowerBound),
    ];
    let space = SearchSpace::new(Objective::PeakAoi);
    let mut rows = sweep(k, epsilons, &entries, &space)?;
    for &eps in epsilons {
        let channel = ErasureChannel::new(eps)?;
        let lb_top = closed_form::paoi_cap_lower_bounds(k as u32, channel)
            .into_iter()
            .max()
            .unwrap_or(1);
        let mut wide = space.clone();
        wide.cap_max = wide.cap_max.max(lb_top + 4);
        let pruned = prune_bound_paoi(k, channel, &wide)?;
        let r = optimize(k, channel, &pruned)?;
        rows.push(SweepRow {
            epsilon: eps,
            label: "optimal".to_owned(),
            policy: Some(r.best_policy),
            value: r.best_value,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::aoi;
    use approx::assert_relative_eq;

    fn ch(eps: f64) -> ErasureChannel {
        ErasureChannel::new(eps).unwrap()
    }

    /// Independent nested-loop search over the K = 2 grid with caps
    /// up to `cap_max` plus the unbounded cap.
    fn naive_best_k2(
        eps: f64,
        cap_max: u32,
        objective: Objective,
        monotone: bool,
    ) -> (Policy, f64, u64) {
        let channel = ch(eps);
        let caps: Vec<Cap> = (1..=cap_max)
            .map(Cap::Finite)
            .chain([Cap::Unbounded])
            .collect();
        let mut best: Option<(Policy, f64)> = None;
        let mut evaluated = 0;
        for &a in &caps {
            for &b in &caps {
                if monotone && b < a {
                    continue;
                }
                evaluated += 1;
                let p = Policy::new(vec![a, b]).unwrap();
                let m = crate::analytic::update_moments(&p, channel);
                let v = objective.value(&m);
                if best.as_ref().is_none_or(|(_, bv)| v < *bv - TIE_TOLERANCE) {
                    best = Some((p, v));
                }
            }
        }
        let (p, v) = best.unwrap();
        (p, v, evaluated)
    }

    #[test]
    fn matches_naive_double_loop() {
        for eps in [0.2, 0.5, 0.8] {
            for objective in [Objective::AverageAoi, Objective::PeakAoi] {
                for monotone in [false, true] {
                    let mut space = SearchSpace::new(objective);
                    space.cap_max = 4;
                    space.monotone_only = monotone;
                    let got = optimize(2, ch(eps), &space).unwrap();
                    let (p, v, n) = naive_best_k2(eps, 4, objective, monotone);
                    assert_eq!(got.best_policy, p, "eps {eps} {objective:?} {monotone}");
                    assert_eq!(got.best_value, v);
                    assert_eq!(got.evaluated, n);
                    assert_eq!(got.pruned, 25 - n);
                }
            }
        }
    }

    #[test]
    fn single_packet_prefers_giving_up_fast() {
        let r = optimize(1, ch(0.5), &SearchSpace::new(Objective::AverageAoi)).unwrap();
        assert_eq!(r.best_policy.to_string(), "1");
        assert_eq!(r.best_value, 2.5);
        let r = optimize(1, ch(0.5), &SearchSpace::new(Objective::PeakAoi)).unwrap();
        assert_eq!(r.best_policy.to_string(), "1");
        assert_eq!(r.best_value, 3.0);
    }

    #[test]
    fn reported_value_equals_engine_value() {
        let r = optimize(3, ch(0.6), &SearchSpace::new(Objective::AverageAoi)).unwrap();
        assert_eq!(r.best_value, aoi(&r.best_policy, ch(0.6)).average_aoi);
        assert_eq!(r.ties[0], r.best_policy);
    }

    #[test]
    fn peak_pruning_is_sound() {
        let channel = ch(0.5);
        let mut full = SearchSpace::new(Objective::PeakAoi);
        full.cap_max = 8;
        full.monotone_only = false; // genuinely exhaustive reference
        let reference = optimize(3, channel, &full).unwrap();

        let mut base = SearchSpace::new(Objective::PeakAoi);
        base.cap_max = 8;
        let pruned_space = prune_bound_paoi(3, channel, &base).unwrap();
        let got = optimize(3, channel, &pruned_space).unwrap();

        assert_eq!(got.best_policy, reference.best_policy);
        assert_eq!(got.best_value, reference.best_value);
        assert!(got.evaluated < reference.evaluated);
        assert!(got.pruned > 0);
    }

    #[test]
    fn pruned_coordinate_ranges() {
        let space = prune_bound_paoi(
            3,
            ch(0.5),
            &SearchSpace {
                cap_max: 8,
                ..SearchSpace::new(Objective::PeakAoi)
            },
        )
        .unwrap();
        assert!(space.monotone_only);
        let b = space.coord_bounds.unwrap();
        assert_eq!(
            b[0],
            CoordBound {
                min: 1,
                max: Some(1)
            }
        );
        assert_eq!(b[1], CoordBound { min: 2, max: None });
        assert_eq!(b[2], CoordBound { min: 4, max: None });
    }

    #[test]
    fn two_packet_peak_cap_in_predicted_range() {
        for eps in [0.3, 0.5, 0.75] {
            let channel = ch(eps);
            let mut space = SearchSpace::new(Objective::PeakAoi);
            space.cap_max = 16;
            space.monotone_only = false;
            let r = optimize(2, channel, &space).unwrap();
            let caps = r.best_policy.caps();
            assert_eq!(caps[0], Cap::Finite(1), "eps {eps}");
            let (lo, hi) = closed_form::paoi_c2_range(channel);
            let c2 = caps[1].finite().expect("optimal second cap is finite");
            assert!(
                (lo..=hi).contains(&c2),
                "eps {eps}: c2 = {c2} outside [{lo}, {hi}]"
            );
        }
    }

    #[test]
    fn small_eps_average_structure() {
        // At eps = 1e-3 the K = 4 optimum over finite caps <= 4 keeps
        // the first two caps at 1 and tracks the first-order expansion.
        let channel = ch(1e-3);
        let mut space = SearchSpace::new(Objective::AverageAoi);
        space.cap_max = 4;
        space.include_unbounded = false;
        let r = optimize(4, channel, &space).unwrap();
        assert_eq!(r.best_policy.to_string(), "1,1,4,4");
        assert_relative_eq!(r.best_value, 6.005381288470237, max_relative = 1e-12);

        // With the unbounded cap in the space the tail prefers it; the
        // leading structure and the value are essentially unchanged.
        space.include_unbounded = true;
        let r = optimize(4, channel, &space).unwrap();
        assert_eq!(r.best_policy.to_string(), "1,1,4,inf");
        assert!((r.best_value - 6.005381288470237).abs() < 1e-10);

        let r5 = optimize(5, channel, &space).unwrap();
        assert_eq!(r5.best_policy.to_string(), "1,1,3,4,inf");
        let predicted = closed_form::small_eps_optimal_aoi(5, channel);
        assert!((r5.best_value - predicted).abs() <= 100.0 * 1e-6);
    }

    #[test]
    fn noiseless_space_ties_everywhere() {
        let mut space = SearchSpace::new(Objective::AverageAoi);
        space.cap_max = 3;
        let r = optimize(2, ch(0.0), &space).unwrap();
        assert_eq!(r.best_policy.to_string(), "1,1");
        assert_eq!(r.best_value, 3.0);
        assert_eq!(r.evaluated, 16);
        assert_eq!(r.ties.len(), 16); // every policy, capped at MAX_REPORTED_TIES
    }

    #[test]
    fn guard_rejects_huge_spaces() {
        let space = SearchSpace {
            monotone_only: false,
            ..SearchSpace::new(Objective::AverageAoi)
        };
        let got = optimize(12, ch(0.5), &space);
        assert!(matches!(got, Err(Error::SearchSpaceTooLarge { .. })));
    }

    #[test]
    fn empty_coordinate_is_reported() {
        let mut space = SearchSpace::new(Objective::PeakAoi);
        space.cap_max = 8;
        space.include_unbounded = false;
        space.coord_bounds = Some(vec![
            CoordBound::default(),
            CoordBound { min: 10, max: None },
        ]);
        let got = optimize(2, ch(0.5), &space);
        assert!(matches!(
            got,
            Err(Error::EmptySearchCoordinate { index: 1 })
        ));
    }

    #[test]
    fn candidate_count_matches_enumeration() {
        for monotone in [false, true] {
            for include_unbounded in [false, true] {
                let space = SearchSpace {
                    cap_max: 5,
                    include_unbounded,
                    monotone_only: monotone,
                    ..SearchSpace::new(Objective::AverageAoi)
                };
                let domains = resolve_domains(3, &space).unwrap();
                let counted = count_candidates(&domains, monotone);
                let r = optimize(3, ch(0.4), &space).unwrap();
                assert_eq!(
                    r.evaluated as u128, counted,
                    "monotone {monotone} unbounded {include_unbounded}"
                );
            }
        }
    }

    #[test]
    fn sweep_rows_are_entry_major_and_consistent() {
        let entries = vec![
            SweepEntry::new(
                "all-ones",
                PolicyChoice::Fixed(Policy::all_ones(2).unwrap()),
            ),
            SweepEntry::new("optimal", PolicyChoice::Auto),
        ];
        let space = SearchSpace {
            cap_max: 6,
            ..SearchSpace::new(Objective::AverageAoi)
        };
        let rows = sweep(2, &[0.2, 0.4], &entries, &space).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(
            rows.iter().map(|r| r.label.as_str()).collect::<Vec<_>>(),
            ["all-ones", "all-ones", "optimal", "optimal"]
        );
        assert_eq!(rows[0].epsilon, 0.2);
        assert_eq!(rows[1].epsilon, 0.4);
        for row in &rows {
            let p = row.policy.as_ref().unwrap();
            let recomputed = aoi(p, ch(row.epsilon)).average_aoi;
            assert_eq!(row.value, recomputed, "row {row:?}");
        }
        // Optimal is never worse than the fixed curve at the same rate.
        assert!(rows[2].value <= rows[0].value);
        assert!(rows[3].value <= rows[1].value);
    }

    #[test]
    fn sweep_rejects_wrong_length_fixed_policy() {
        let entries = vec![SweepEntry::new(
            "bad",
            PolicyChoice::Fixed(Policy::all_ones(3).unwrap()),
        )];
        let got = sweep(
            2,
            &[0.3],
            &entries,
            &SearchSpace::new(Objective::AverageAoi),
        );
        assert!(matches!(
            got,
            Err(Error::WrongPolicyLength {
                expected: 2,
                got: 3
            })
        ));
    }

    #[test]
    fn average_figure_curves_are_ordered() {
        let rows = average_aoi_figure(3, &[0.1, 0.5]).unwrap();
        let value = |label: &str, eps: f64| {
            rows.iter()
                .find(|r| r.label == label && r.epsilon == eps)
                .unwrap_or_else(|| panic!("missing {label} at {eps}"))
                .value
        };
        let labels: std::collections::BTreeSet<_> = rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(
            labels,
            [
                "all-inf",
                "all-ones",
                "lower-bound",
                "one-then-inf",
                "optimal",
                "upper-bound"
            ]
            .into_iter()
            .collect()
        );
        assert_eq!(rows.len(), 12);
        for eps in [0.1, 0.5] {
            let opt = value("optimal", eps);
            assert!(value("lower-bound", eps) <= opt + 1e-12);
            assert!(opt <= value("upper-bound", eps) + 1e-12);
            for achievable in ["all-ones", "all-inf", "one-then-inf"] {
                assert!(
                    opt <= value(achievable, eps) + 1e-12,
                    "{achievable} at {eps}"
                );
            }
            // The never-give-up average matches the upper bound identity.
            assert_relative_eq!(
                value("all-inf", eps),
                value("upper-bound", eps),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn peak_figure_curves_are_ordered() {
        let rows = peak_aoi_figure(3, &[0.3, 0.9]).unwrap();
        assert_eq!(rows.len(), 6);
        let value = |label: &str, eps: f64| {
            rows.iter()
                .find(|r| r.label == label && r.epsilon == eps)
                .unwrap()
                .value
        };
        for eps in [0.3, 0.9] {
            let opt = value("optimal", eps);
            // The lower-bound policy is inside the searched space, so the
            // searched optimum can only improve on it; never-give-up is
            // also dominated.
            assert!(opt <= value("paoi-lb", eps) + 1e-12);
            assert!(opt <= value("all-inf", eps) + 1e-12);
        }
    }

    #[test]
    fn default_grid_shape() {
        let g = default_epsilon_grid();
        assert_eq!(g.len(), 18);
        assert_eq!(g[0], 0.05);
        assert_eq!(g[5], 0.3);
        assert_eq!(g[17], 0.9);
    }
}
