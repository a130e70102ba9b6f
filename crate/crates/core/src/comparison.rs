//! Two-frame comparison.
//!
//! `E_g = {pi(x_j) g}` is the given frame with dual `{h_j}`, `E_h = {pi(y_k) h}`
//! the reference frame. For a window `yK` and the set `L` delivered by the HAP
//! search (run on `h` at level `eps ||h||`):
//!
//! * `P` projects onto `span{h_j : x_j in yKL}`,
//! * `Q` projects onto `span{pi(y_k) h : y_k in yK}`,
//! * `T = QPQ`.
//!
//! Each certificate checks `tr T <= rank P <= card{x_j in yKL}` and
//! `||h||^2 (1 - eps) card{y_k in yK} / B <= card{x_j in yKL}` with `B` the
//! upper bound of the reference frame. The lower trace estimate is certified
//! as `tr T >= (1/B) sum_{y_k in yK} <P pi(y_k) h, pi(y_k) h>`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{FrameSystem, SpanProjector};
use crate::group::{CompactSet, Element, GroupModel, PointSet};
use crate::hap::{find_l, DualPair, HapCertificate, HapScenario, LabeledSet};
use crate::hilbert::HilbertVector;
use crate::linalg::{self, CMatrix};

/// Absolute slack on the trace/rank/cardinality inequalities.
pub const CHAIN_SLACK: f64 = 1e-9;
/// Smallest eigenvalue still accepted as positive.
pub const POSITIVITY_SLACK: f64 = 1e-10;
/// Tolerance on `<QPQ v, v> = <P v, v>` for `v` in the range of `Q`.
pub const IDENTITY_SLACK: f64 = 1e-10;

/// Number of indices `j` with `x_j in S`, with multiplicity.
pub fn cardinality_count(points: &PointSet, s: &CompactSet) -> usize {
    points.iter().filter(|&&x| s.contains(x)).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceCheck {
    /// `sum_k <T v_k, v_k>`.
    pub sum: f64,
    pub trace: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
    pub ok: bool,
}

/// `sum/B <= tr T <= sum/A` for a positive `T` and a frame with bounds `(A, B)`.
pub fn trace_bounds_check(t: &CMatrix, vectors: &[HilbertVector], lower: f64, upper: f64) -> Result<TraceCheck> {
    let eig = linalg::hermitian_eigenvalues(t);
    if let Some(&min) = eig.first() {
        if min < -POSITIVITY_SLACK {
            return Err(Error::NotPositive(min));
        }
    }
    let trace: f64 = eig.iter().sum();
    let sum: f64 = vectors.iter().map(|v| linalg::apply(t, v).inner(v).re).sum();
    let scale = trace.abs().max(sum.abs() / lower).max(f64::MIN_POSITIVE);
    let lower_ok = sum / upper <= trace + CHAIN_SLACK * scale;
    let upper_ok = trace <= sum / lower + CHAIN_SLACK * scale;
    Ok(TraceCheck { sum, trace, lower_ok, upper_ok, ok: lower_ok && upper_ok })
}

/// `T = Q P Q` as a dense matrix on the ambient space.
pub fn qpq_operator(p: &SpanProjector, q: &SpanProjector) -> CMatrix {
    let qm = q.matrix();
    &qm * p.matrix() * &qm
}

/// Inputs of the comparison: the given frame with its dual, the reference
/// frame, and the families searched.
#[derive(Debug, Clone)]
pub struct ComparisonScenario {
    pub given: DualPair,
    pub reference: Arc<FrameSystem>,
    pub epsilon: f64,
    pub u_radius: u64,
    pub k_family: Vec<LabeledSet>,
    pub l_family: Vec<LabeledSet>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCertificate {
    pub y: usize,
    pub y_element: Element,
    pub k_radius: u64,
    pub l_radius: u64,
    pub epsilon: f64,
    pub trace_t: f64,
    pub rank_p: usize,
    pub card_x: usize,
    pub card_y: usize,
    pub h_norm_sq: f64,
    /// `||h||^2 (1 - eps) card_y / B_used`.
    pub lhs: f64,
    pub b_used: f64,
    pub b_provenance: String,
    /// The same left side with the upper bound of the dual of `E_g`.
    pub lhs_alt: f64,
    pub b_alt: f64,
    pub b_alt_provenance: String,
    pub final_alt_ok: bool,
    /// `sum_{y_k in yK} <T pi(y_k) h, pi(y_k) h>`.
    pub sum_t: f64,
    /// `sum_{y_k in yK} <P pi(y_k) h, pi(y_k) h>`.
    pub sum_p: f64,
    pub identity_ok: bool,
    /// `(1 - eps) ||h||^2 card_y`.
    pub projection_bound: f64,
    pub projection_ok: bool,
    /// Signed `-(1/B) sum_{y_k in yK} <(I - P) pi(y_k) h, pi(y_k) h>`.
    pub star_term: f64,
    /// `eps ||h||^2 card_y / B`.
    pub star_bound: f64,
    pub star_ok: bool,
    /// `tr T >= sum_p / B_used`.
    pub trace_lower_ok: bool,
    /// Trace inequality for `T` against the whole reference frame.
    pub trace_bounds_ok: bool,
    pub chain_ok: bool,
    pub final_ok: bool,
}

impl ComparisonCertificate {
    pub fn all_ok(&self) -> bool {
        self.chain_ok
            && self.final_ok
            && self.identity_ok
            && self.projection_ok
            && self.star_ok
            && self.trace_lower_ok
            && self.trace_bounds_ok
    }
}

/// A comparison scenario with its frame bounds and HAP-chosen `L` fixed.
#[derive(Debug, Clone)]
pub struct ComparisonContext {
    pub scenario: ComparisonScenario,
    pub given_bounds: (f64, f64),
    pub reference_bounds: (f64, f64),
    pub hap: HapCertificate,
    pub l: LabeledSet,
    h_norm_sq: f64,
    /// Reference atoms `pi(y_k) h`.
    reference_atoms: Vec<HilbertVector>,
}

impl ComparisonContext {
    pub fn prepare(scenario: ComparisonScenario) -> Result<Self> {
        if !(scenario.epsilon > 0.0 && scenario.epsilon < 1.0) {
            return Err(Error::InvalidScenario("comparison epsilon must lie in (0, 1)".into()));
        }
        let given_rep = scenario.given.frame.rep();
        let ref_rep = scenario.reference.rep();
        if given_rep.factors() != ref_rep.factors() {
            return Err(Error::InvalidScenario("given and reference frames use different representations".into()));
        }
        let given_bounds = scenario.given.frame.frame_bounds()?;
        let reference_bounds = scenario.reference.frame_bounds()?;
        let h = scenario.reference.window().clone();
        let h_norm_sq = h.norm_squared();
        let threshold = scenario.epsilon * h.norm();
        let hap_scenario = HapScenario {
            pair: scenario.given.clone(),
            f: h,
            epsilon: threshold,
            u_radius: scenario.u_radius,
            k_family: scenario.k_family.clone(),
            l_family: scenario.l_family.clone(),
        };
        let hap = find_l(&hap_scenario).map_err(|e| match e {
            Error::NoAdmissibleL { .. } => Error::HapPreconditionUnmet { threshold },
            other => other,
        })?;
        let l = scenario
            .l_family
            .iter()
            .find(|l| l.radius == hap.chosen_l_radius)
            .cloned()
            .expect("chosen L comes from the family");
        let reference_atoms = scenario.reference.atoms().to_vec();
        Ok(Self { scenario, given_bounds, reference_bounds, hap, l, h_norm_sq, reference_atoms })
    }

    fn group(&self) -> &GroupModel {
        self.scenario.given.frame.rep().group()
    }

    pub fn certificate(&self, y: usize, k: &LabeledSet) -> Result<ComparisonCertificate> {
        let group = self.group();
        let given = &self.scenario.given;
        let dim = given.frame.dim();
        let eps = self.scenario.epsilon;

        let ykl = group.translate_set(y, &group.product_set(&k.set, &self.l.set)?)?;
        let yk = group.translate_set(y, &k.set)?;

        let x_points = given.frame.points();
        let p_gens: Vec<HilbertVector> = x_points
            .iter()
            .zip(given.duals.iter())
            .filter(|(x, _)| ykl.contains(**x))
            .map(|(_, h)| h.clone())
            .collect();
        let p = SpanProjector::new(dim, p_gens)?;

        let y_points = self.scenario.reference.points();
        let inside: Vec<&HilbertVector> = y_points
            .iter()
            .zip(&self.reference_atoms)
            .filter(|(x, _)| yk.contains(**x))
            .map(|(_, v)| v)
            .collect();
        let q = SpanProjector::new(dim, inside.iter().map(|v| (*v).clone()).collect())?;
        let t = qpq_operator(&p, &q);

        let eig = linalg::hermitian_eigenvalues(&t);
        if let Some(&min) = eig.first() {
            if min < -POSITIVITY_SLACK {
                return Err(Error::NotPositive(min));
            }
        }
        let trace_t: f64 = eig.iter().sum();
        let rank_p = p.rank();
        let card_x = cardinality_count(x_points, &ykl);
        let card_y = inside.len();

        let sum_t: f64 = inside.iter().map(|v| linalg::apply(&t, v).inner(v).re).sum();
        let sum_p: f64 = inside.iter().map(|v| p.apply(v).inner(v).re).sum();
        let defect: f64 = inside.iter().map(|v| v.sub(&p.apply(v)).inner(v).re).sum();

        let (_, b_used) = self.reference_bounds;
        let b_alt = given.bessel;
        let hn = self.h_norm_sq;
        let lhs = hn * (1.0 - eps) * card_y as f64 / b_used;
        let lhs_alt = hn * (1.0 - eps) * card_y as f64 / b_alt;
        let projection_bound = (1.0 - eps) * hn * card_y as f64;
        let star_term = -defect / b_used;
        let star_bound = eps * hn * card_y as f64 / b_used;

        let (a_h, b_h) = self.reference_bounds;
        let trace = trace_bounds_check(&t, &self.reference_atoms, a_h, b_h)?;

        Ok(ComparisonCertificate {
            y,
            y_element: group.element(y).clone(),
            k_radius: k.radius,
            l_radius: self.l.radius,
            epsilon: eps,
            trace_t,
            rank_p,
            card_x,
            card_y,
            h_norm_sq: hn,
            lhs,
            b_used,
            b_provenance: "upper bound of reference frame".into(),
            lhs_alt,
            b_alt,
            b_alt_provenance: "upper bound of dual of E_g".into(),
            final_alt_ok: lhs_alt <= card_x as f64 + CHAIN_SLACK,
            sum_t,
            sum_p,
            identity_ok: (sum_t - sum_p).abs() <= IDENTITY_SLACK,
            projection_bound,
            projection_ok: sum_t >= projection_bound - CHAIN_SLACK,
            star_term,
            star_bound,
            star_ok: star_term.abs() <= star_bound + CHAIN_SLACK,
            trace_lower_ok: trace_t >= sum_p / b_used - CHAIN_SLACK,
            trace_bounds_ok: trace.lower_ok,
            chain_ok: trace_t <= rank_p as f64 + CHAIN_SLACK && rank_p <= card_x,
            final_ok: lhs <= card_x as f64 + CHAIN_SLACK,
        })
    }

    /// Certificates for every `y` in the carrier and every `K` in the family,
    /// ordered by `(y, K)`.
    pub fn certificates(&self) -> Result<Vec<ComparisonCertificate>> {
        let order = self.group().order();
        let rows: Vec<Vec<ComparisonCertificate>> = (0..order)
            .into_par_iter()
            .map(|y| self.scenario.k_family.iter().map(|k| self.certificate(y, k)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        Ok(rows.into_iter().flatten().collect())
    }
}

/// `comparison_certificate(scenario, y, K)` against a prepared context.
pub fn comparison_certificate(ctx: &ComparisonContext, y: usize, k: &LabeledSet) -> Result<ComparisonCertificate> {
    ctx.certificate(y, k)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRow {
    pub y: usize,
    pub y_element: Element,
    pub k_radius: u64,
    pub count: usize,
    pub measure: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensitySummary {
    pub k_radius: u64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub rows: Vec<DensityRow>,
    pub summary: Vec<DensitySummary>,
}

/// `card{x_j in yK} / |K|` for each sampled `y` and each `K`.
pub fn density_report(
    group: &GroupModel,
    points: &PointSet,
    k_family: &[LabeledSet],
    y_sample: &[usize],
) -> Result<DensityReport> {
    let mut rows = Vec::with_capacity(k_family.len() * y_sample.len());
    let mut summary = Vec::with_capacity(k_family.len());
    for k in k_family {
        let measure = group.measure(&k.set);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &y in y_sample {
            let yk = group.translate_set(y, &k.set)?;
            let count = cardinality_count(points, &yk);
            let ratio = count as f64 / measure;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            rows.push(DensityRow { y, y_element: group.element(y).clone(), k_radius: k.radius, count, measure, ratio });
        }
        summary.push(DensitySummary { k_radius: k.radius, min_ratio: lo, max_ratio: hi });
    }
    Ok(DensityReport { rows, summary })
}
