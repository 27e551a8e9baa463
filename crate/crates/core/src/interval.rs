//! One-dimensional closed interval sets and closed-form sub-level solvers.
//!
//! An [`IntervalSet`] is always kept in canonical form: parts sorted by their
//! lower endpoint, pairwise disjoint, and separated by gaps of at least
//! [`MERGE_GAP`]. Everything here is a pure function of its inputs.

use rand::Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Parts closer than this are merged during canonicalization.
pub const MERGE_GAP: f64 = 1e-12;

/// A closed interval `[lo, hi]` with `lo <= hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::InvalidInterval { lo, hi });
        }
        Ok(Self { lo, hi })
    }

    /// Caller guarantees `lo <= hi`.
    pub(crate) fn new_unchecked(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "[{lo}, {hi}]");
        Self { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.hi == self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Intersection with `other`, or `None` when disjoint.
    pub fn clip(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }
}

type Parts = SmallVec<[Interval; 4]>;

/// A finite union of disjoint closed intervals.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct IntervalSet {
    parts: Parts,
}

impl IntervalSet {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_interval(interval: Interval) -> Self {
        let mut parts = Parts::new();
        parts.push(interval);
        Self { parts }
    }

    /// Builds a canonical set from arbitrary (possibly overlapping) parts.
    pub fn from_parts<I: IntoIterator<Item = Interval>>(parts: I) -> Self {
        let mut parts: Parts = parts.into_iter().collect();
        canonicalize(&mut parts);
        Self { parts }
    }

    /// Convenience constructor from `(lo, hi)` pairs.
    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        let parts = pairs
            .iter()
            .map(|&(lo, hi)| Interval::new(lo, hi))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_parts(parts))
    }

    pub fn parts(&self) -> &[Interval] {
        &self.parts
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// Total length of all parts.
    pub fn measure(&self) -> f64 {
        self.parts.iter().map(Interval::len).sum()
    }

    pub fn contains(&self, x: f64) -> bool {
        // Parts are sorted; binary search on the lower endpoint.
        let idx = self.parts.partition_point(|p| p.lo <= x);
        idx > 0 && self.parts[idx - 1].hi >= x
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        let mut parts: Parts = Parts::with_capacity(self.parts.len() + other.parts.len());
        let (mut i, mut j) = (0, 0);
        while i < self.parts.len() || j < other.parts.len() {
            let take_left = j >= other.parts.len()
                || (i < self.parts.len() && self.parts[i].lo <= other.parts[j].lo);
            let next = if take_left {
                i += 1;
                self.parts[i - 1]
            } else {
                j += 1;
                other.parts[j - 1]
            };
            push_merging(&mut parts, next);
        }
        IntervalSet { parts }
    }

    /// Union of many sets at once (one sort instead of repeated merges).
    pub fn union_all<'a, I: IntoIterator<Item = &'a IntervalSet>>(sets: I) -> IntervalSet {
        let mut parts = Parts::new();
        for set in sets {
            parts.extend_from_slice(&set.parts);
        }
        canonicalize(&mut parts);
        IntervalSet { parts }
    }

    pub fn intersect(&self, other: &IntervalSet) -> IntervalSet {
        let mut parts = Parts::new();
        let (mut i, mut j) = (0, 0);
        while i < self.parts.len() && j < other.parts.len() {
            let a = self.parts[i];
            let b = other.parts[j];
            if let Some(c) = a.clip(&b) {
                push_merging(&mut parts, c);
            }
            if a.hi < b.hi {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet { parts }
    }

    pub fn clip(&self, domain: Interval) -> IntervalSet {
        let parts = self.parts.iter().filter_map(|p| p.clip(&domain)).collect();
        IntervalSet { parts }
    }
}

impl From<Interval> for IntervalSet {
    fn from(interval: Interval) -> Self {
        Self::from_interval(interval)
    }
}

fn push_merging(parts: &mut Parts, next: Interval) {
    match parts.last_mut() {
        Some(last) if next.lo - last.hi < MERGE_GAP => {
            last.hi = last.hi.max(next.hi);
        }
        _ => parts.push(next),
    }
}

fn canonicalize(parts: &mut Parts) {
    if parts.len() < 2 {
        return;
    }
    let kept = sort_and_merge(parts);
    parts.truncate(kept);
}

/// Sorts by lower endpoint and merges in place; returns the canonical prefix length.
fn sort_and_merge(parts: &mut [Interval]) -> usize {
    if parts.len() < 2 {
        return parts.len();
    }
    parts.sort_unstable_by(|a, b| a.lo.total_cmp(&b.lo));
    let mut kept = 1;
    for i in 1..parts.len() {
        let next = parts[i];
        let last = &mut parts[kept - 1];
        if next.lo - last.hi < MERGE_GAP {
            last.hi = last.hi.max(next.hi);
        } else {
            parts[kept] = next;
            kept += 1;
        }
    }
    kept
}

/// Writes `current ∩ (⋃ raw)` into `out`. `current` must be canonical; `raw`
/// is reordered. Equivalent to `intersect` with `from_parts(raw)` but without
/// building intermediate sets.
pub(crate) fn intersect_union_into(current: &[Interval], raw: &mut [Interval], out: &mut Vec<Interval>) {
    out.clear();
    let k = sort_and_merge(raw);
    let other = &raw[..k];
    let (mut i, mut j) = (0, 0);
    while i < current.len() && j < other.len() {
        let (a, b) = (current[i], other[j]);
        if let Some(c) = a.clip(&b) {
            match out.last_mut() {
                Some(last) if c.lo - last.hi < MERGE_GAP => last.hi = last.hi.max(c.hi),
                _ => out.push(c),
            }
        }
        if a.hi < b.hi {
            i += 1;
        } else {
            j += 1;
        }
    }
}

/// `{x : weight * (x - center)^2 <= level}` on the whole real line.
pub fn quadratic_sublevel(center: f64, weight: f64, level: f64) -> Result<IntervalSet> {
    if weight.is_nan() || weight <= 0.0 {
        return Err(Error::InvalidPotential(format!(
            "quadratic weight must be positive, got {weight}"
        )));
    }
    if level < 0.0 {
        return Ok(IntervalSet::empty());
    }
    let radius = (level / weight).sqrt();
    Ok(IntervalSet::from_interval(Interval::new_unchecked(
        center - radius,
        center + radius,
    )))
}

/// `{x in domain : w2 * min(cap, (x - center)^2) <= level}`.
pub fn truncated_quadratic_sublevel(
    center: f64,
    w2: f64,
    cap: f64,
    level: f64,
    domain: Interval,
) -> Result<IntervalSet> {
    if w2.is_nan() || w2 <= 0.0 || cap.is_nan() || cap <= 0.0 {
        return Err(Error::InvalidPotential(format!(
            "truncated quadratic needs positive weight and cap, got w2={w2}, cap={cap}"
        )));
    }
    if level >= w2 * cap {
        return Ok(IntervalSet::from_interval(domain));
    }
    Ok(quadratic_sublevel(center, w2, level)?.clip(domain))
}

/// `{x in domain : a x^2 + b x + c <= level}` for any sign of `a`.
pub fn general_quadratic_sublevel(a: f64, b: f64, c: f64, level: f64, domain: Interval) -> IntervalSet {
    let c = c - level;
    let full = IntervalSet::from_interval(domain);
    let upto = |x: f64| {
        if x >= domain.lo {
            IntervalSet::from_interval(Interval::new_unchecked(domain.lo, x.min(domain.hi)))
        } else {
            IntervalSet::empty()
        }
    };
    let from = |x: f64| {
        if x <= domain.hi {
            IntervalSet::from_interval(Interval::new_unchecked(x.max(domain.lo), domain.hi))
        } else {
            IntervalSet::empty()
        }
    };

    if a == 0.0 {
        return if b > 0.0 {
            upto(-c / b)
        } else if b < 0.0 {
            from(-c / b)
        } else if c <= 0.0 {
            full
        } else {
            IntervalSet::empty()
        };
    }

    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        // No real roots: the sign of `a` decides everything.
        return if a > 0.0 { IntervalSet::empty() } else { full };
    }
    // Numerically stable root pair.
    let sq = disc.sqrt();
    let q = -0.5 * (b + b.signum() * sq);
    let (r1, r2) = if q == 0.0 {
        (0.0, 0.0)
    } else {
        let x1 = q / a;
        let x2 = c / q;
        (x1.min(x2), x1.max(x2))
    };
    if a > 0.0 {
        match Interval::new_unchecked(r1, r2).clip(&domain) {
            Some(i) => IntervalSet::from_interval(i),
            None => IntervalSet::empty(),
        }
    } else {
        upto(r1).union(&from(r2))
    }
}

/// Draws a point uniformly from the union of the set's parts.
pub fn sample_uniform<R: Rng + ?Sized>(set: &IntervalSet, rng: &mut R) -> Result<f64> {
    sample_uniform_parts(set.parts(), set.measure(), rng)
}

/// [`sample_uniform`] over canonical parts whose total length is `total`.
pub(crate) fn sample_uniform_parts<R: Rng + ?Sized>(parts: &[Interval], total: f64, rng: &mut R) -> Result<f64> {
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::EmptySlice);
    }
    let mut target = rng.random::<f64>() * total;
    for part in parts {
        let len = part.len();
        if target < len {
            return Ok((part.lo + target).min(part.hi));
        }
        target -= len;
    }
    // Rounding left `target` marginally past the last part.
    let last = parts
        .iter()
        .rev()
        .find(|p| p.len() > 0.0)
        .expect("positive measure implies a non-degenerate part");
    Ok(last.hi)
}
