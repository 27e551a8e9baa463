//! Pairwise Markov random fields over bounded continuous label spaces.
//!
//! The energy of a configuration is the sum of unary terms plus, for every
//! node `s` and every neighbor `t` of `s`, the pairwise term of edge `{s, t}`.
//! Each undirected edge therefore contributes twice to [`MrfGraph::total_energy`].
//!
//! Potentials can report per-coordinate sub-level sets: with every other
//! coordinate held fixed, `{x_k : energy <= level}` as an [`IntervalSet`]
//! clipped to the axis box.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::interval::{
    general_quadratic_sublevel, quadratic_sublevel, Interval, IntervalSet,
};

/// Bounded box a node's label lives in.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelSpace {
    axes: Vec<Interval>,
}

impl LabelSpace {
    pub fn new(axes: Vec<Interval>) -> Result<Self> {
        if axes.is_empty() {
            return Err(Error::Graph("label space needs at least one axis".into()));
        }
        if let Some(axis) = axes.iter().find(|a| !(a.len() > 0.0) || !a.len().is_finite()) {
            return Err(Error::Graph(format!(
                "label axis [{}, {}] must have finite positive length",
                axis.lo(),
                axis.hi()
            )));
        }
        Ok(Self { axes })
    }

    /// `dims` copies of `[lo, hi]`.
    pub fn uniform(dims: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![Interval::new(lo, hi)?; dims])
    }

    pub fn dims(&self) -> usize {
        self.axes.len()
    }

    pub fn axis(&self, k: usize) -> Interval {
        self.axes[k]
    }

    pub fn axes(&self) -> &[Interval] {
        &self.axes
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.axes.len() && self.axes.iter().zip(x).all(|(a, &v)| a.contains(v))
    }
}

/// User-supplied unary energy.
///
/// Implementations that cannot produce bounds keep the default
/// [`sublevel`](CustomUnary::sublevel), which makes the slice sampler fall
/// back to the full axis and rely on its rejection guard.
pub trait CustomUnary: Send + Sync + fmt::Debug {
    fn energy(&self, x: &[f64]) -> f64;

    fn sublevel(&self, axis: usize, _x: &[f64], _level: f64, _domain: Interval) -> Result<IntervalSet> {
        Err(Error::NoBounds { axis })
    }

    /// Whether [`sublevel`](CustomUnary::sublevel) returns the exact set rather than a superset.
    fn exact_bounds(&self) -> bool {
        false
    }
}

/// User-supplied pairwise energy `psi(first, second)`.
pub trait CustomPairwise: Send + Sync + fmt::Debug {
    fn energy(&self, first: &[f64], second: &[f64]) -> f64;

    /// Sub-level set over coordinate `axis` of the argument selected by `side`.
    fn sublevel(
        &self,
        _side: Side,
        axis: usize,
        _first: &[f64],
        _second: &[f64],
        _level: f64,
        _domain: Interval,
    ) -> Result<IntervalSet> {
        Err(Error::NoBounds { axis })
    }

    fn exact_bounds(&self) -> bool {
        false
    }
}

/// Selects which argument of a pairwise potential is being varied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    First,
    Second,
}

/// Result of a single-interval sublevel solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Piece {
    Empty,
    /// The whole axis box.
    Whole,
    Part(Interval),
}

/// Unary potential families.
#[derive(Debug, Clone)]
pub enum Unary {
    /// `weight * |x[..k] - target|^2` where `k = target.len()`; trailing
    /// coordinates are unobserved.
    Quadratic { target: Vec<f64>, weight: f64 },
    /// `weight * min_j |x[..k] - wells[j]|^2`: attraction to the nearest of
    /// several indistinguishable observations.
    NearestWell { wells: Vec<Vec<f64>>, weight: f64 },
    /// Constant zero energy.
    Zero,
    Custom(Arc<dyn CustomUnary>),
}

/// Pairwise potential families. Stored once per undirected edge as
/// `psi(x_a, x_b)` with `a < b`.
#[derive(Debug, Clone)]
pub enum Pairwise {
    /// `weight * |x_a - x_b|^2`.
    Quadratic { weight: f64 },
    /// `weight * min(cap, |x_a - x_b|^2)`.
    TruncatedQuadratic { weight: f64, cap: f64 },
    /// Weak-perspective mesh term over 4-D labels `[px, py, ox, oy]`.
    ///
    /// `offset` is the reference displacement `p_ref_b - p_ref_a`. The
    /// orientation `o` acts as the rotation-and-scale matrix
    /// `[[ox, -oy], [oy, ox]]`, and the energy is `weight` times
    /// `(|p_b - p_a - R_a d|^2 + |p_a - p_b + R_b d|^2) / (2 |d|^2)`.
    WeakPerspective { offset: [f64; 2], weight: f64 },
    Custom(Arc<dyn CustomPairwise>),
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Squared distance over all coordinates except `axis`.
fn sq_dist_except(a: &[f64], b: &[f64], axis: usize) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .filter(|&(k, _)| k != axis)
        .map(|(_, (x, y))| (x - y) * (x - y))
        .sum()
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidPotential(format!("{name} must be positive, got {v}")))
    }
}

/// All-or-nothing sub-level set of a coordinate the energy does not depend on.
fn constant_sublevel(value: f64, level: f64, domain: Interval) -> IntervalSet {
    if value <= level {
        IntervalSet::from_interval(domain)
    } else {
        IntervalSet::empty()
    }
}

/// Sub-level set of a function that is exactly quadratic in coordinate
/// `axis`, recovered from three evaluations around the current value.
fn fitted_quadratic_sublevel(
    x: &[f64],
    axis: usize,
    level: f64,
    domain: Interval,
    mut energy: impl FnMut(&[f64]) -> f64,
) -> IntervalSet {
    let x0 = x[axis];
    let h = 1.0;
    let mut probe = x.to_vec();
    let g0 = energy(&probe);
    probe[axis] = x0 + h;
    let gp = energy(&probe);
    probe[axis] = x0 - h;
    let gm = energy(&probe);
    let a = (gp + gm - 2.0 * g0) / (2.0 * h * h);
    let b = (gp - gm) / (2.0 * h);
    // Solve in the offset variable to avoid cancellation, then shift back.
    let local = Interval::new_unchecked(domain.lo() - x0, domain.hi() - x0);
    let shifted = general_quadratic_sublevel(a, b, g0, level, local);
    IntervalSet::from_parts(shifted.parts().iter().map(|p| {
        Interval::new_unchecked((p.lo() + x0).max(domain.lo()), (p.hi() + x0).min(domain.hi()))
    }))
}

impl Unary {
    pub fn kind(&self) -> &'static str {
        match self {
            Unary::Quadratic { .. } => "quadratic",
            Unary::NearestWell { .. } => "nearest-well",
            Unary::Zero => "zero",
            Unary::Custom(_) => "custom",
        }
    }

    pub fn validate(&self, dims: usize) -> Result<()> {
        match self {
            Unary::Quadratic { target, weight } => {
                check_positive("quadratic unary weight", *weight)?;
                if target.len() > dims {
                    return Err(Error::InvalidPotential(format!(
                        "target has {} coordinates but the label has {dims}",
                        target.len()
                    )));
                }
            }
            Unary::NearestWell { wells, weight } => {
                check_positive("nearest-well weight", *weight)?;
                if wells.is_empty() {
                    return Err(Error::InvalidPotential("nearest-well needs at least one well".into()));
                }
                if wells.iter().any(|w| w.len() > dims || w.len() != wells[0].len()) {
                    return Err(Error::InvalidPotential("inconsistent well dimensions".into()));
                }
            }
            Unary::Zero | Unary::Custom(_) => {}
        }
        Ok(())
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        match self {
            Unary::Quadratic { target, weight } => weight * sq_dist(&x[..target.len()], target),
            Unary::NearestWell { wells, weight } => {
                let nearest = wells
                    .iter()
                    .map(|w| sq_dist(&x[..w.len()], w))
                    .fold(f64::INFINITY, f64::min);
                weight * nearest
            }
            Unary::Zero => 0.0,
            Unary::Custom(c) => c.energy(x),
        }
    }

    pub fn exact_bounds(&self) -> bool {
        match self {
            Unary::Custom(c) => c.exact_bounds(),
            _ => true,
        }
    }

    /// `{x[axis] in domain : energy(x) <= level}` with the other coordinates of `x` fixed.
    pub fn sublevel(&self, axis: usize, x: &[f64], level: f64, domain: Interval) -> Result<IntervalSet> {
        match self {
            Unary::Quadratic { target, weight } => {
                if axis >= target.len() {
                    return Ok(constant_sublevel(self.energy(x), level, domain));
                }
                let rest = sq_dist_except(&x[..target.len()], target, axis);
                Ok(quadratic_sublevel(target[axis], *weight, level - weight * rest)?.clip(domain))
            }
            Unary::NearestWell { wells, weight } => {
                let k = wells[0].len();
                if axis >= k {
                    return Ok(constant_sublevel(self.energy(x), level, domain));
                }
                let pieces = wells
                    .iter()
                    .map(|w| {
                        let rest = sq_dist_except(&x[..k], w, axis);
                        quadratic_sublevel(w[axis], *weight, level - weight * rest)
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(IntervalSet::union_all(&pieces).clip(domain))
            }
            Unary::Zero => Ok(constant_sublevel(0.0, level, domain)),
            Unary::Custom(c) => c.sublevel(axis, x, level, domain).map(|s| s.clip(domain)),
        }
    }

    fn describe(&self) -> String {
        match self {
            Unary::Quadratic { target, weight } => format!("quadratic weight={weight} target={target:?}"),
            Unary::NearestWell { wells, weight } => {
                format!("nearest-well weight={weight} wells={}", wells.len())
            }
            Unary::Zero => "zero".into(),
            Unary::Custom(c) => format!("custom {c:?}"),
        }
    }
}

impl Pairwise {
    pub fn kind(&self) -> &'static str {
        match self {
            Pairwise::Quadratic { .. } => "quadratic",
            Pairwise::TruncatedQuadratic { .. } => "truncated-quadratic",
            Pairwise::WeakPerspective { .. } => "weak-perspective",
            Pairwise::Custom(_) => "custom",
        }
    }

    pub fn validate(&self, dims_a: usize, dims_b: usize) -> Result<()> {
        match self {
            Pairwise::Quadratic { weight } => check_positive("quadratic pair weight", *weight)?,
            Pairwise::TruncatedQuadratic { weight, cap } => {
                check_positive("truncated quadratic weight", *weight)?;
                check_positive("truncated quadratic cap", *cap)?;
            }
            Pairwise::WeakPerspective { offset, weight } => {
                check_positive("weak-perspective weight", *weight)?;
                if offset[0] * offset[0] + offset[1] * offset[1] == 0.0 {
                    return Err(Error::InvalidPotential("reference displacement must be nonzero".into()));
                }
                if dims_a != 4 || dims_b != 4 {
                    return Err(Error::InvalidPotential(
                        "weak-perspective potential needs 4-D labels".into(),
                    ));
                }
            }
            Pairwise::Custom(_) => {}
        }
        if !matches!(self, Pairwise::Custom(_) | Pairwise::WeakPerspective { .. }) && dims_a != dims_b {
            return Err(Error::InvalidPotential("pair endpoints have different dimensions".into()));
        }
        Ok(())
    }

    pub fn energy(&self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Pairwise::Quadratic { weight } => weight * sq_dist(a, b),
            Pairwise::TruncatedQuadratic { weight, cap } => weight * cap.min(sq_dist(a, b)),
            Pairwise::WeakPerspective { offset, weight } => {
                let [dx, dy] = *offset;
                // R_a d and R_b d.
                let (rax, ray) = (a[2] * dx - a[3] * dy, a[3] * dx + a[2] * dy);
                let (rbx, rby) = (b[2] * dx - b[3] * dy, b[3] * dx + b[2] * dy);
                let (ex, ey) = (b[0] - a[0] - rax, b[1] - a[1] - ray);
                let (fx, fy) = (a[0] - b[0] + rbx, a[1] - b[1] + rby);
                let norm = 2.0 * (dx * dx + dy * dy);
                weight * (ex * ex + ey * ey + fx * fx + fy * fy) / norm
            }
            Pairwise::Custom(c) => c.energy(a, b),
        }
    }

    pub fn exact_bounds(&self) -> bool {
        match self {
            Pairwise::Custom(c) => c.exact_bounds(),
            _ => true,
        }
    }

    /// Sub-level set over coordinate `axis` of the argument picked by `side`,
    /// the other argument and the remaining coordinates held fixed.
    pub fn sublevel(
        &self,
        side: Side,
        axis: usize,
        first: &[f64],
        second: &[f64],
        level: f64,
        domain: Interval,
    ) -> Result<IntervalSet> {
        let (var, fixed) = match side {
            Side::First => (first, second),
            Side::Second => (second, first),
        };
        match self {
            Pairwise::Quadratic { weight } => {
                let rest = sq_dist_except(var, fixed, axis);
                Ok(quadratic_sublevel(fixed[axis], *weight, level - weight * rest)?.clip(domain))
            }
            Pairwise::TruncatedQuadratic { weight, cap } => {
                if level >= weight * cap {
                    return Ok(IntervalSet::from_interval(domain));
                }
                let rest = sq_dist_except(var, fixed, axis);
                Ok(quadratic_sublevel(fixed[axis], *weight, level - weight * rest)?.clip(domain))
            }
            Pairwise::WeakPerspective { .. } => {
                let set = match side {
                    Side::First => {
                        fitted_quadratic_sublevel(first, axis, level, domain, |x| self.energy(x, second))
                    }
                    Side::Second => {
                        fitted_quadratic_sublevel(second, axis, level, domain, |x| self.energy(first, x))
                    }
                };
                Ok(set)
            }
            Pairwise::Custom(c) => c
                .sublevel(side, axis, first, second, level, domain)
                .map(|s| s.clip(domain)),
        }
    }

    /// Single-interval shortcut of [`Pairwise::sublevel`] for the quadratic
    /// families; `None` for families that need the general path.
    pub(crate) fn sublevel_piece(
        &self,
        axis: usize,
        var: &[f64],
        fixed: &[f64],
        level: f64,
        domain: Interval,
    ) -> Option<Piece> {
        let weight = match self {
            Pairwise::Quadratic { weight } => *weight,
            Pairwise::TruncatedQuadratic { weight, cap } => {
                if level >= weight * cap {
                    return Some(Piece::Whole);
                }
                *weight
            }
            _ => return None,
        };
        let budget = level - weight * sq_dist_except(var, fixed, axis);
        if budget < 0.0 {
            return Some(Piece::Empty);
        }
        let radius = (budget / weight).sqrt();
        let c = fixed[axis];
        Some(match Interval::new_unchecked(c - radius, c + radius).clip(&domain) {
            Some(part) => Piece::Part(part),
            None => Piece::Empty,
        })
    }

    fn describe(&self) -> String {
        match self {
            Pairwise::Quadratic { weight } => format!("quadratic weight={weight}"),
            Pairwise::TruncatedQuadratic { weight, cap } => {
                format!("truncated-quadratic weight={weight} cap={cap}")
            }
            Pairwise::WeakPerspective { offset, weight } => {
                format!("weak-perspective weight={weight} offset=[{}, {}]", offset[0], offset[1])
            }
            Pairwise::Custom(c) => format!("custom {c:?}"),
        }
    }
}

/// One entry of a node's neighbor list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub node: usize,
    pub edge: usize,
    /// Position of this node within the neighbor's own list.
    pub reverse_slot: usize,
}

#[derive(Debug, Clone)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub potential: Pairwise,
}

/// Immutable pairwise MRF. Build with [`GraphBuilder`].
#[derive(Debug, Clone)]
pub struct MrfGraph {
    spaces: Vec<LabelSpace>,
    unaries: Vec<Unary>,
    edges: Vec<Edge>,
    neighbors: Vec<Vec<Neighbor>>,
}

impl MrfGraph {
    pub fn node_count(&self) -> usize {
        self.spaces.len()
    }

    pub fn space(&self, s: usize) -> &LabelSpace {
        &self.spaces[s]
    }

    pub fn unary(&self, s: usize) -> &Unary {
        &self.unaries[s]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Neighbors of `s`, sorted by node id.
    pub fn neighbors(&self, s: usize) -> &[Neighbor] {
        &self.neighbors[s]
    }

    pub fn exact_bounds(&self) -> bool {
        self.unaries.iter().all(Unary::exact_bounds)
            && self.edges.iter().all(|e| e.potential.exact_bounds())
    }

    /// `psi_{s,t}(x_s, x_t)` for the neighbor of `s` in `slot`, without box checks.
    #[inline]
    pub fn pair_energy(&self, s: usize, slot: usize, x_s: &[f64], x_t: &[f64]) -> f64 {
        let edge = &self.edges[self.neighbors[s][slot].edge];
        if edge.a == s {
            edge.potential.energy(x_s, x_t)
        } else {
            edge.potential.energy(x_t, x_s)
        }
    }

    /// Sub-level set of `psi_{s,t}(., x_t)` over coordinate `axis` of `x_s`.
    pub fn pair_sublevel(
        &self,
        s: usize,
        slot: usize,
        axis: usize,
        x_s: &[f64],
        x_t: &[f64],
        level: f64,
    ) -> Result<IntervalSet> {
        let edge = &self.edges[self.neighbors[s][slot].edge];
        let domain = self.spaces[s].axis(axis);
        if edge.a == s {
            edge.potential.sublevel(Side::First, axis, x_s, x_t, level, domain)
        } else {
            edge.potential.sublevel(Side::Second, axis, x_t, x_s, level, domain)
        }
    }

    /// Fast path of [`MrfGraph::pair_sublevel`]; `None` when the edge's family has no single-interval solver.
    pub(crate) fn pair_sublevel_piece(
        &self,
        s: usize,
        slot: usize,
        axis: usize,
        x_s: &[f64],
        x_t: &[f64],
        level: f64,
    ) -> Option<Piece> {
        let edge = &self.edges[self.neighbors[s][slot].edge];
        edge.potential.sublevel_piece(axis, x_s, x_t, level, self.spaces[s].axis(axis))
    }

    fn check_label(&self, s: usize, x: &[f64]) -> Result<()> {
        if self.spaces[s].contains(x) {
            Ok(())
        } else {
            Err(Error::Domain { node: s, label: x.to_vec() })
        }
    }

    /// Unary energy of node `s`; rejects labels outside its box.
    pub fn energy_unary(&self, s: usize, x: &[f64]) -> Result<f64> {
        self.check_label(s, x)?;
        Ok(self.unaries[s].energy(x))
    }

    /// Pairwise energy between `s` and its neighbor in `slot`; rejects labels outside their boxes.
    pub fn energy_pair(&self, s: usize, slot: usize, x_s: &[f64], x_t: &[f64]) -> Result<f64> {
        self.check_label(s, x_s)?;
        self.check_label(self.neighbors[s][slot].node, x_t)?;
        Ok(self.pair_energy(s, slot, x_s, x_t))
    }

    /// Full energy: unaries plus every ordered neighbor pair, so each
    /// undirected edge is counted twice.
    pub fn total_energy(&self, labels: &[Vec<f64>]) -> Result<f64> {
        if labels.len() != self.node_count() {
            return Err(Error::Shape(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.node_count()
            )));
        }
        let mut total = 0.0;
        for s in 0..self.node_count() {
            total += self.energy_unary(s, &labels[s])?;
            for (slot, nb) in self.neighbors[s].iter().enumerate() {
                total += self.energy_pair(s, slot, &labels[s], &labels[nb.node])?;
            }
        }
        Ok(total)
    }

    /// Unaries plus each undirected edge once: the energy whose min-marginals
    /// max-product message passing computes.
    pub fn objective(&self, labels: &[Vec<f64>]) -> Result<f64> {
        if labels.len() != self.node_count() {
            return Err(Error::Shape(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.node_count()
            )));
        }
        let mut total = 0.0;
        for (s, label) in labels.iter().enumerate() {
            total += self.energy_unary(s, label)?;
        }
        for e in &self.edges {
            self.check_label(e.b, &labels[e.b])?;
            total += e.potential.energy(&labels[e.a], &labels[e.b]);
        }
        Ok(total)
    }

    /// Line-oriented text listing of nodes and edges.
    ///
    /// ```text
    /// nodes <count> edges <count>
    /// node <id> dims <d> box [lo,hi]x... unary <description>
    /// edge <a> <b> <description>
    /// ```
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "nodes {} edges {}", self.node_count(), self.edges.len());
        for s in 0..self.node_count() {
            let boxes: Vec<String> = self.spaces[s]
                .axes()
                .iter()
                .map(|a| format!("[{},{}]", a.lo(), a.hi()))
                .collect();
            let _ = writeln!(
                out,
                "node {s} dims {} box {} unary {}",
                self.spaces[s].dims(),
                boxes.join("x"),
                self.unaries[s].describe()
            );
        }
        for e in &self.edges {
            let _ = writeln!(out, "edge {} {} {}", e.a, e.b, e.potential.describe());
        }
        out
    }
}

#[derive(Debug, Default)]
pub struct GraphBuilder {
    spaces: Vec<LabelSpace>,
    unaries: Vec<Unary>,
    edges: Vec<Edge>,
    edge_ids: HashSet<(usize, usize)>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_node(&mut self, space: LabelSpace, unary: Unary) -> Result<usize> {
        unary.validate(space.dims())?;
        self.spaces.push(space);
        self.unaries.push(unary);
        Ok(self.spaces.len() - 1)
    }

    /// Adds an undirected edge. The potential is read as `psi(x_a, x_b)`
    /// with `a = min(s, t)` and `b = max(s, t)`.
    pub fn add_edge(&mut self, s: usize, t: usize, potential: Pairwise) -> Result<usize> {
        let n = self.spaces.len();
        if s >= n || t >= n {
            return Err(Error::Graph(format!("edge ({s}, {t}) references an unknown node")));
        }
        if s == t {
            return Err(Error::Graph(format!("self-loop on node {s}")));
        }
        let (a, b) = (s.min(t), s.max(t));
        if self.edge_ids.contains(&(a, b)) {
            return Err(Error::Graph(format!("duplicate edge ({a}, {b})")));
        }
        potential.validate(self.spaces[a].dims(), self.spaces[b].dims())?;
        self.edge_ids.insert((a, b));
        self.edges.push(Edge { a, b, potential });
        Ok(self.edges.len() - 1)
    }

    pub fn build(self) -> MrfGraph {
        let n = self.spaces.len();
        let mut lists: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for (id, e) in self.edges.iter().enumerate() {
            lists[e.a].push((e.b, id));
            lists[e.b].push((e.a, id));
        }
        for l in &mut lists {
            l.sort_unstable();
        }
        let neighbors = (0..n)
            .map(|s| {
                lists[s]
                    .iter()
                    .map(|&(t, edge)| Neighbor {
                        node: t,
                        edge,
                        reverse_slot: lists[t]
                            .iter()
                            .position(|&(u, _)| u == s)
                            .expect("neighbor relation is symmetric"),
                    })
                    .collect()
            })
            .collect();
        MrfGraph {
            spaces: self.spaces,
            unaries: self.unaries,
            edges: self.edges,
            neighbors,
        }
    }
}
