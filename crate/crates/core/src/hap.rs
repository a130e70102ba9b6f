//! Homogeneous approximation property.
//!
//! For a frame `{pi(x_j) g}` with dual `{h_j}`, `V(yS) = span{h_j : x_j in yS}`
//! and `P_{S,y}` is the orthogonal projection onto it. The HAP error of a
//! vector `f` on a cell `(y, K)` for a candidate `L` is
//!
//! ```text
//! max_{x in yK} || pi(x) f - P_{KL,y} pi(x) f ||
//! ```
//!
//! and [`find_l`] searches a nested family of candidates for the first `L`
//! whose error stays below `epsilon` on every cell. Each candidate is also
//! scored with the tail bound
//!
//! ```text
//! ( C0/|U| * beta * sum_{x in L^c U} (V_g f)#(x)^2 )^(1/2)
//! ```
//!
//! where `beta` is the Bessel constant of the dual (`1/A` for the canonical
//! dual). The best-approximation step compares against `||h - P h||`.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amalgam::{tail_mass, GroupFunction};
use crate::error::{Error, Result};
use crate::frame::{self, FrameSystem, SpanProjector};
use crate::group::{CompactSet, GroupModel, PointSet};
use crate::hilbert::{HilbertVector, Representation};

/// Slack allowed when comparing observed errors against the tail bound.
pub const BOUND_SLACK: f64 = 1e-9;

/// A member of a family of compact sets, labelled by ball radius.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub radius: u64,
    pub set: CompactSet,
}

impl LabeledSet {
    pub fn ball(group: &GroupModel, radius: u64) -> Self {
        Self { radius, set: group.ball(radius) }
    }

    /// Balls of the given radii.
    pub fn balls(group: &GroupModel, radii: &[u64]) -> Vec<Self> {
        radii.iter().map(|&r| Self::ball(group, r)).collect()
    }
}

/// Which dual frame a certificate was computed with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DualKind {
    Canonical,
    Custom,
}

/// A frame, one of its duals, and the Bessel constant used for tail bounds.
#[derive(Debug, Clone)]
pub struct DualPair {
    pub frame: Arc<FrameSystem>,
    pub duals: Arc<Vec<HilbertVector>>,
    pub kind: DualKind,
    /// Bessel constant of the duals: `1/A` for the canonical dual, the
    /// measured upper bound otherwise.
    pub bessel: f64,
}

impl DualPair {
    pub fn canonical(frame: Arc<FrameSystem>) -> Result<Self> {
        let analysis = frame.analyze()?;
        Ok(Self {
            frame,
            duals: Arc::new(analysis.canonical_dual),
            kind: DualKind::Canonical,
            bessel: 1.0 / analysis.lower,
        })
    }

    /// An arbitrary dual; fails unless it reconstructs.
    pub fn custom(frame: Arc<FrameSystem>, duals: Vec<HilbertVector>) -> Result<Self> {
        let check = frame.verify_dual(&duals)?;
        if !check.ok {
            return Err(Error::InvalidScenario(format!(
                "supplied vectors are not a dual frame (reconstruction error {:e})",
                check.max_error
            )));
        }
        let bessel = frame::upper_bound(frame.dim(), &duals);
        Ok(Self { frame, duals: Arc::new(duals), kind: DualKind::Custom, bessel })
    }
}

#[derive(Debug, Clone)]
pub struct HapScenario {
    pub pair: DualPair,
    pub f: HilbertVector,
    pub epsilon: f64,
    pub u_radius: u64,
    pub k_family: Vec<LabeledSet>,
    pub l_family: Vec<LabeledSet>,
}

impl HapScenario {
    pub fn validate(&self) -> Result<()> {
        let group = self.pair.frame.rep().group();
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidScenario("epsilon must be positive".into()));
        }
        if self.k_family.is_empty() {
            return Err(Error::InvalidScenario("K family is empty".into()));
        }
        if self.l_family.is_empty() {
            return Err(Error::InvalidScenario("L family is empty".into()));
        }
        if self.k_family.iter().chain(&self.l_family).any(|s| s.set.is_empty()) {
            return Err(Error::InvalidScenario("K and L candidates must be nonempty".into()));
        }
        if self.l_family.windows(2).any(|w| !w[0].set.is_subset(&w[1].set)) {
            return Err(Error::InvalidScenario("L family must be nested increasing".into()));
        }
        if self.f.dim() != self.pair.frame.dim() {
            return Err(Error::DimensionMismatch { expected: self.pair.frame.dim(), found: self.f.dim() });
        }
        group.check_neighborhood(&group.ball(self.u_radius))
    }
}

/// One `(y, K, L)` cell of the error table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HapCell {
    pub y: usize,
    pub k_radius: u64,
    pub l_radius: u64,
    /// `None` for boundary cells whose translates leave a truncated carrier.
    pub error: Option<f64>,
}

impl HapCell {
    pub fn is_boundary(&self) -> bool {
        self.error.is_none()
    }
}

/// Aggregate over all cells for one candidate `L`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateSummary {
    pub l_radius: u64,
    pub worst_error: f64,
    pub theoretical_bound: f64,
    pub passed: bool,
    pub boundary_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HapCertificate {
    pub chosen_l_radius: u64,
    pub worst_error: f64,
    pub epsilon: f64,
    pub theoretical_bound: f64,
    pub u_radius: u64,
    pub c0: usize,
    pub dual: DualKind,
    pub candidates: Vec<CandidateSummary>,
    pub table: Vec<HapCell>,
    pub passed: bool,
}

impl HapCertificate {
    pub fn candidate(&self, l_radius: u64) -> Option<&CandidateSummary> {
        self.candidates.iter().find(|c| c.l_radius == l_radius)
    }

    /// Cells recorded for one candidate, in `(y, K)` order.
    pub fn cells_for(&self, l_radius: u64) -> impl Iterator<Item = &HapCell> {
        self.table.iter().filter(move |c| c.l_radius == l_radius)
    }
}

/// `V(yS) = span{h_j : x_j in yS}` as a projector.
pub fn local_subspace(
    group: &GroupModel,
    duals: &[HilbertVector],
    points: &PointSet,
    y: usize,
    s: &CompactSet,
) -> Result<SpanProjector> {
    if duals.len() != points.len() {
        return Err(Error::LengthMismatch { expected: points.len(), found: duals.len() });
    }
    let dim = duals.first().map_or(0, |h| h.dim());
    let ys = group.translate_set(y, s)?;
    let selected: Vec<HilbertVector> =
        points.iter().zip(duals).filter(|(x, _)| ys.contains(**x)).map(|(_, h)| h.clone()).collect();
    if selected.is_empty() {
        return Ok(SpanProjector::zero(dim));
    }
    SpanProjector::new(dim, selected)
}

/// `max_{x in yK} ||pi(x) f - P_{KL,y} pi(x) f||`.
pub fn hap_error(
    pair: &DualPair,
    f: &HilbertVector,
    y: usize,
    k: &CompactSet,
    l: &CompactSet,
) -> Result<f64> {
    if k.is_empty() || l.is_empty() {
        return Err(Error::InvalidScenario("K and L must be nonempty".into()));
    }
    let rep = pair.frame.rep();
    let group = rep.group();
    let kl = group.product_set(k, l)?;
    let p = local_subspace(group, &pair.duals, pair.frame.points(), y, &kl)?;
    let yk = group.translate_set(y, k)?;
    let mut worst = 0.0f64;
    for &x in yk.iter() {
        worst = worst.max(p.residual_norm(&rep.apply(x, f)?));
    }
    Ok(worst)
}

/// `(C0/|U| * bessel * tail_mass(V_g f, U, L))^(1/2)`.
pub fn theoretical_tail_bound(
    rep: &Representation,
    bessel: f64,
    g: &HilbertVector,
    f: &HilbertVector,
    u: &CompactSet,
    l: &CompactSet,
    c0: usize,
) -> Result<f64> {
    let group = rep.group();
    let voice = GroupFunction::from_voice(&rep.voice_transform(g, f)?);
    let c = c0 as f64 / group.measure(u);
    let tail = tail_mass(group, &voice, u, l)?;
    Ok((c * bessel * tail).sqrt())
}

/// Error table over every `y` in the carrier, `K` in the family and `L` in the
/// candidate list, with per-candidate aggregates, and the first passing `L`.
pub fn find_l(scenario: &HapScenario) -> Result<HapCertificate> {
    scenario.validate()?;
    let pair = &scenario.pair;
    let rep = pair.frame.rep().clone();
    let group = rep.group().clone();
    let points = pair.frame.points();
    let u = group.ball(scenario.u_radius);
    let c0 = group.indicator_sum_bound(points, &u)?;

    let moved: Vec<HilbertVector> =
        (0..group.order()).map(|x| rep.apply(x, &scenario.f)).collect::<Result<_>>()?;
    let products = Products::new(&group, &scenario.k_family, &scenario.l_family);

    let per_y: Vec<Vec<HapCell>> = (0..group.order())
        .into_par_iter()
        .map(|y| cells_for_y(scenario, &group, &moved, &products, y))
        .collect::<Result<_>>()?;
    let table: Vec<HapCell> = per_y.into_iter().flatten().collect();

    let mut candidates = Vec::with_capacity(scenario.l_family.len());
    for l in &scenario.l_family {
        let cells = table.iter().filter(|c| c.l_radius == l.radius);
        let (worst_error, boundary_cells) = cells.fold((0.0f64, 0usize), |(w, b), c| match c.error {
            Some(e) => (w.max(e), b),
            None => (w, b + 1),
        });
        let theoretical_bound = theoretical_tail_bound(&rep, pair.bessel, pair.frame.window(), &scenario.f, &u, &l.set, c0)?;
        candidates.push(CandidateSummary {
            l_radius: l.radius,
            worst_error,
            theoretical_bound,
            passed: worst_error < scenario.epsilon,
            boundary_cells,
        });
    }

    let chosen = candidates.iter().find(|c| c.passed).cloned().ok_or_else(|| Error::NoAdmissibleL {
        threshold: scenario.epsilon,
        best: candidates.iter().map(|c| c.worst_error).fold(f64::INFINITY, f64::min),
    })?;
    Ok(HapCertificate {
        chosen_l_radius: chosen.l_radius,
        worst_error: chosen.worst_error,
        epsilon: scenario.epsilon,
        theoretical_bound: chosen.theoretical_bound,
        u_radius: scenario.u_radius,
        c0,
        dual: pair.kind.clone(),
        candidates,
        table,
        passed: true,
    })
}

/// The sets `K L` for every pair of the families. They do not depend on `y`
/// and many pairs share one set, so each distinct set is stored once.
struct Products {
    sets: Vec<CompactSet>,
    masks: Vec<Vec<bool>>,
    /// `slot[k][l]`: index into `sets`, or `None` if `K L` leaves the carrier.
    slot: Vec<Vec<Option<usize>>>,
}

impl Products {
    fn new(group: &GroupModel, k_family: &[LabeledSet], l_family: &[LabeledSet]) -> Self {
        let mut sets: Vec<CompactSet> = Vec::new();
        let slot = k_family
            .iter()
            .map(|k| {
                l_family
                    .iter()
                    .map(|l| {
                        let kl = group.product_set(&k.set, &l.set).ok()?;
                        Some(sets.iter().position(|s| *s == kl).unwrap_or_else(|| {
                            sets.push(kl);
                            sets.len() - 1
                        }))
                    })
                    .collect()
            })
            .collect();
        let masks = sets.iter().map(|s| s.mask(group.order())).collect();
        Self { sets, masks, slot }
    }
}

/// Projector for one distinct `y K L` together with memoised residuals
/// `||pi(x) f - P pi(x) f||`, indexed by `x`.
struct LocalFit {
    projector: SpanProjector,
    residuals: Vec<Option<f64>>,
}

fn cells_for_y(
    scenario: &HapScenario,
    group: &GroupModel,
    moved: &[HilbertVector],
    products: &Products,
    y: usize,
) -> Result<Vec<HapCell>> {
    let pair = &scenario.pair;
    let dim = pair.frame.dim();
    let points = pair.frame.points().as_slice();
    let y_inv = group.inverse(y)?;
    // on a truncation a translate may leave the box; those cells are boundary cells
    let fits = |s: &CompactSet| group.is_cyclic() || group.translate_set(y, s).is_ok();
    let k_fits: Vec<bool> = scenario.k_family.iter().map(|k| fits(&k.set)).collect();

    let mut fits_by_set: Vec<Option<Option<usize>>> = vec![None; products.sets.len()];
    let mut by_selection: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut local: Vec<LocalFit> = Vec::new();
    let mut cells = Vec::with_capacity(scenario.k_family.len() * scenario.l_family.len());
    for (ki, k) in scenario.k_family.iter().enumerate() {
        for (li, l) in scenario.l_family.iter().enumerate() {
            let slot = products.slot[ki][li].filter(|_| k_fits[ki]);
            let fit = match slot {
                None => None,
                Some(u) => match fits_by_set[u] {
                    Some(known) => known,
                    None => {
                        let found = if fits(&products.sets[u]) {
                            // x_j in y K L  iff  y^-1 x_j in K L
                            let mask = &products.masks[u];
                            let selected: Vec<usize> = (0..points.len())
                                .filter(|&j| group.compose(y_inv, points[j]).is_ok_and(|z| mask[z]))
                                .collect();
                            Some(match by_selection.get(&selected) {
                                Some(&idx) => idx,
                                None => {
                                    let gens: Vec<HilbertVector> =
                                        selected.iter().map(|&j| pair.duals[j].clone()).collect();
                                    let projector = if gens.is_empty() {
                                        SpanProjector::zero(dim)
                                    } else {
                                        SpanProjector::new(dim, gens)?
                                    };
                                    local.push(LocalFit { projector, residuals: vec![None; group.order()] });
                                    by_selection.insert(selected, local.len() - 1);
                                    local.len() - 1
                                }
                            })
                        } else {
                            None
                        };
                        fits_by_set[u] = Some(found);
                        found
                    }
                },
            };
            let error = match fit {
                Some(idx) => {
                    let fit = &mut local[idx];
                    let mut worst = 0.0f64;
                    for &kx in k.set.iter() {
                        let x = group.compose(y, kx)?;
                        let r = *fit.residuals[x].get_or_insert_with(|| fit.projector.residual_norm(&moved[x]));
                        worst = worst.max(r);
                    }
                    Some(worst)
                }
                None => None,
            };
            cells.push(HapCell { y, k_radius: k.radius, l_radius: l.radius, error });
        }
    }
    Ok(cells)
}
