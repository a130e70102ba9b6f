//! Batch execution of scenarios into run reports.

use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::emit::quantize;
use super::scenario::{FrameSpec, Scenario, ScenarioKind};
use crate::amalgam::{tail_mass, GroupFunction, SamplingInstance};
use crate::comparison::{density_report, ComparisonContext, ComparisonScenario};
use crate::frame::{bessel_bound_check, FrameSystem, DUAL_TOLERANCE};
use crate::group::{Element, GroupModel};
use crate::hap::{find_l, DualPair, HapCertificate, HapScenario, LabeledSet, BOUND_SLACK};
use crate::hilbert::HilbertVector;
use crate::Result;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Tolerance for the monotonicity of HAP errors along the `L` chain.
pub const MONOTONE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    /// The check touched a window that leaves a truncated carrier.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub status: CheckStatus,
    pub detail: Option<String>,
}

impl Check {
    fn new(name: impl Into<String>, ok: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
            detail: Some(detail.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub pass_total: usize,
    pub fail_total: usize,
    pub boundary_total: usize,
    pub cell_count: usize,
}

impl Summary {
    pub fn tally(checks: &[Check]) -> Self {
        let count = |s| checks.iter().filter(|c| c.status == s).count();
        Self {
            pass_total: count(CheckStatus::Pass),
            fail_total: count(CheckStatus::Fail),
            boundary_total: count(CheckStatus::Boundary),
            cell_count: checks.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub scenario_id: String,
    pub kind: ScenarioKind,
    /// Seconds since the Unix epoch. Not part of the determinism contract.
    pub timestamp: u64,
    pub version: String,
    pub seed: u64,
    pub error: Option<String>,
    pub checks: Vec<Check>,
    pub certificate: Value,
    pub summary: Summary,
}

impl RunReport {
    /// No failed checks and no error.
    pub fn passed(&self) -> bool {
        self.error.is_none() && self.summary.fail_total == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub parallelism: usize,
    /// Embed canonical dual vectors in frame analysis certificates.
    pub include_duals: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { parallelism: 1, include_duals: false }
    }
}

pub fn run(scenarios: &[Scenario], parallelism: usize) -> Vec<RunReport> {
    run_with(scenarios, RunOptions { parallelism, ..RunOptions::default() })
}

/// Runs every scenario; failures are recorded per report. The output is
/// ordered by scenario id whatever the thread count.
pub fn run_with(scenarios: &[Scenario], options: RunOptions) -> Vec<RunReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.parallelism.max(1))
        .build()
        .expect("thread pool");
    let mut reports: Vec<RunReport> =
        pool.install(|| scenarios.par_iter().map(|s| run_one(s, options)).collect());
    reports.sort_by(|a, b| a.scenario_id.cmp(&b.scenario_id));
    reports
}

pub fn run_one(scenario: &Scenario, options: RunOptions) -> RunReport {
    let outcome = match scenario.kind {
        ScenarioKind::SamplingBound => sampling(scenario),
        ScenarioKind::FrameAnalysis => frame_analysis(scenario, options.include_duals),
        ScenarioKind::Hap => hap(scenario),
        ScenarioKind::Comparison => comparison(scenario),
        ScenarioKind::Density => density(scenario),
    };
    let (checks, certificate, error) = match outcome {
        Ok((checks, certificate)) => (checks, quantize(certificate), None),
        Err(e) => (Vec::new(), Value::Null, Some(e.to_string())),
    };
    RunReport {
        scenario_id: scenario.id.clone(),
        kind: scenario.kind,
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        version: VERSION.to_string(),
        seed: scenario.seed(),
        error,
        summary: Summary::tally(&checks),
        checks,
        certificate,
    }
}

type Outcome = Result<(Vec<Check>, Value)>;

fn element_json(e: &Element) -> Value {
    match e.0.as_slice() {
        [c] => json!(c),
        cs => json!(cs),
    }
}

fn build_frame(spec: &FrameSpec) -> Result<FrameSystem> {
    let rep = Arc::new(spec.rep.build()?);
    let window = spec.window.build(&rep)?;
    let points = spec.points.build(rep.group())?;
    FrameSystem::new(rep, window, points)
}

fn g(x: f64) -> String {
    super::emit::format_g12(x)
}

fn sampling(s: &Scenario) -> Outcome {
    let group = s.resolve_group()?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed());
    let mut checks = Vec::with_capacity(s.trials());
    let mut rows = Vec::with_capacity(s.trials());
    for trial in 0..s.trials() {
        let inst = SamplingInstance::random(&group, s.max_radius(), &mut rng)?;
        let b = inst.check(&group)?;
        let by_definition = group.separation_constant(&inst.points, &inst.u)?;
        let agree = by_definition == b.c0;
        checks.push(Check::new(
            format!("trial {trial}"),
            b.holds && agree,
            format!("lhs {} rhs {} C0 {} (definition {})", g(b.lhs), g(b.rhs), b.c0, by_definition),
        ));
        rows.push(json!({
            "trial": trial,
            "K_radius": inst.k_radius,
            "U_radius": inst.u_radius,
            "points": inst.points.len(),
            "lhs": b.lhs,
            "rhs": b.rhs,
            "C": b.c,
            "C0": b.c0,
            "C0_by_definition": by_definition,
            "integral": b.integral,
            "holds": b.holds,
        }));
    }
    Ok((checks, json!({ "group": group.kind(), "trials": rows })))
}

fn frame_analysis(s: &Scenario, include_duals: bool) -> Outcome {
    let frame = build_frame(s.frame.as_ref().expect("validated"))?;
    let analysis = frame.analyze()?;
    let (a, b) = (analysis.lower, analysis.upper);
    let dual = frame.verify_dual(&analysis.canonical_dual)?;
    let bessel = bessel_bound_check(&analysis.canonical_dual, a, true);
    let tight = b - a <= DUAL_TOLERANCE * b;

    let mut checks = vec![
        Check::new("reconstruction", dual.ok, format!("max error {}", g(dual.max_error))),
        Check::new(
            "dual_bessel_bound",
            bessel.ok.unwrap_or(false),
            format!("dual upper bound {} vs 1/A {}", g(bessel.empirical_b_dual), g(bessel.bound)),
        ),
    ];
    if tight {
        let gap = (bessel.empirical_b_dual - bessel.bound).abs();
        checks.push(Check::new(
            "tight_dual_bessel_equality",
            gap <= DUAL_TOLERANCE * bessel.bound,
            format!("|B_dual - 1/A| = {}", g(gap)),
        ));
    }

    // frame inequality on random vectors
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed());
    let trials = s.trials();
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let coords = (0..frame.dim())
            .map(|_| num_complex::Complex64::new(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)))
            .collect();
        let f = HilbertVector::new(coords);
        let n2 = f.norm_squared();
        let energy: f64 = frame.analysis_coefficients(&f)?.iter().map(|c| c.norm_sqr()).sum();
        worst = worst.max((a * n2 - energy) / (b * n2)).max((energy - b * n2) / (b * n2));
    }
    checks.push(Check::new(
        "frame_inequality",
        worst <= DUAL_TOLERANCE,
        format!("{trials} random vectors, worst relative excess {}", g(worst.max(0.0))),
    ));

    // decay profile of the window's self transform
    let group = frame.rep().group();
    let voice = GroupFunction::from_voice(&frame.rep().voice_transform(frame.window(), frame.window())?);
    let u = group.ball(s.u_radius());
    let profile = (0..=group.diameter())
        .map(|r| Ok(json!({ "L_radius": r, "tail_mass": tail_mass(group, &voice, &u, &group.ball(r))? })))
        .collect::<Result<Vec<Value>>>()?;

    let mut cert = json!({
        "bounds": {
            "A": a,
            "B": b,
            "tight": tight,
            "dual_error": dual.max_error,
            "bessel_B_dual": bessel.empirical_b_dual,
            "bessel_bound": bessel.bound,
            "C0": frame.separation(),
            "atoms": frame.len(),
            "dim": frame.dim(),
        },
        "window_profile": profile,
        "U_radius": s.u_radius(),
    });
    if include_duals {
        cert["duals"] = analysis
            .canonical_dual
            .iter()
            .map(|h| h.coords().iter().map(|c| json!([c.re, c.im])).collect::<Value>())
            .collect();
    }
    Ok((checks, cert))
}

fn families(s: &Scenario, group: &GroupModel) -> (Vec<LabeledSet>, Vec<LabeledSet>) {
    (
        LabeledSet::balls(group, &Scenario::radii(&s.k_radii, group)),
        LabeledSet::balls(group, &Scenario::radii(&s.l_radii, group)),
    )
}

/// Certificate summary in the shared HAP layout; `table` holds the cells of
/// the chosen `L`.
pub fn hap_json(cert: &HapCertificate, group: &GroupModel, with_table: bool) -> Value {
    let mut v = json!({
        "chosen_L_radius": cert.chosen_l_radius,
        "worst_error": cert.worst_error,
        "epsilon": cert.epsilon,
        "theoretical_bound": cert.theoretical_bound,
        "U_radius": cert.u_radius,
        "C0": cert.c0,
        "dual": cert.dual,
        "eq42_convention": "squared",
        "candidates": cert.candidates.iter().map(|c| json!({
            "L_radius": c.l_radius,
            "worst_error": c.worst_error,
            "theoretical_bound": c.theoretical_bound,
            "passed": c.passed,
            "boundary_cells": c.boundary_cells,
        })).collect::<Vec<_>>(),
    });
    if with_table {
        v["table"] = cert
            .cells_for(cert.chosen_l_radius)
            .map(|c| {
                json!({
                    "y": element_json(group.element(c.y)),
                    "K_radius": c.k_radius,
                    "L_radius": c.l_radius,
                    "error": c.error,
                })
            })
            .collect();
    }
    v
}

/// Checks shared by HAP runs: every cell of the chosen `L`, the tail bound
/// for each candidate, and monotonicity along the `L` chain.
pub fn hap_checks(cert: &HapCertificate, group: &GroupModel) -> Vec<Check> {
    let mut checks: Vec<Check> = cert
        .cells_for(cert.chosen_l_radius)
        .map(|c| {
            let name = format!("y={} K={}", group.element(c.y), c.k_radius);
            match c.error {
                Some(e) => Check::new(name, e < cert.epsilon, format!("error {}", g(e))),
                None => Check { name, status: CheckStatus::Boundary, detail: None },
            }
        })
        .collect();
    for c in &cert.candidates {
        checks.push(Check::new(
            format!("tail_bound L={}", c.l_radius),
            c.worst_error <= c.theoretical_bound + BOUND_SLACK,
            format!("worst {} bound {}", g(c.worst_error), g(c.theoretical_bound)),
        ));
    }
    let mut violations = 0usize;
    let mut largest = 0.0f64;
    // the table is grouped by (y, K) with L innermost
    let per_cell = cert.candidates.len();
    for run in cert.table.chunks(per_cell) {
        for w in run.windows(2) {
            if let (Some(a), Some(b)) = (w[0].error, w[1].error) {
                largest = largest.max(b - a);
                if b > a + MONOTONE_SLACK {
                    violations += 1;
                }
            }
        }
    }
    checks.push(Check::new(
        "monotone_in_L",
        violations == 0,
        format!("{violations} increases beyond tolerance, largest step {}", g(largest.max(0.0))),
    ));
    checks
}

fn hap(s: &Scenario) -> Outcome {
    let frame = Arc::new(build_frame(s.frame.as_ref().expect("validated"))?);
    let rep = frame.rep().clone();
    let group = rep.group().clone();
    let f = s.f.as_ref().expect("validated").build(&rep)?;
    let (k_family, l_family) = families(s, &group);
    let scenario = HapScenario {
        pair: DualPair::canonical(frame)?,
        f,
        epsilon: s.epsilon.expect("validated"),
        u_radius: s.u_radius(),
        k_family,
        l_family,
    };
    let cert = find_l(&scenario)?;
    Ok((hap_checks(&cert, &group), hap_json(&cert, &group, true)))
}

fn comparison(s: &Scenario) -> Outcome {
    let given = Arc::new(build_frame(s.frame.as_ref().expect("validated"))?);
    let reference = Arc::new(build_frame(s.reference.as_ref().expect("validated"))?);
    let group = given.rep().group().clone();
    let (k_family, l_family) = families(s, &group);
    let ctx = ComparisonContext::prepare(ComparisonScenario {
        given: DualPair::canonical(given)?,
        reference,
        epsilon: s.epsilon.expect("validated"),
        u_radius: s.u_radius(),
        k_family,
        l_family,
    })?;
    let certs = ctx.certificates()?;
    let checks = certs
        .iter()
        .map(|c| {
            Check::new(
                format!("y={} K={}", c.y_element, c.k_radius),
                c.all_ok(),
                format!("tr T {} <= rank P {} <= card X {}; lhs {} vs card X", g(c.trace_t), c.rank_p, c.card_x, g(c.lhs)),
            )
        })
        .collect();
    let cells: Vec<Value> = certs
        .iter()
        .map(|c| {
            json!({
                "y": element_json(&c.y_element),
                "K_radius": c.k_radius,
                "L_radius": c.l_radius,
                "epsilon": c.epsilon,
                "trace_T": c.trace_t,
                "rank_P": c.rank_p,
                "card_X": c.card_x,
                "card_Y": c.card_y,
                "h_norm_sq": c.h_norm_sq,
                "lhs": c.lhs,
                "B_used": c.b_used,
                "B_provenance": c.b_provenance,
                "lhs_alt": c.lhs_alt,
                "B_alt": c.b_alt,
                "B_alt_provenance": c.b_alt_provenance,
                "final_alt_ok": c.final_alt_ok,
                "sum_T": c.sum_t,
                "sum_P": c.sum_p,
                "identity_ok": c.identity_ok,
                "projection_bound": c.projection_bound,
                "projection_ok": c.projection_ok,
                "star_term": c.star_term,
                "star_bound": c.star_bound,
                "star_ok": c.star_ok,
                "trace_lower_ok": c.trace_lower_ok,
                "trace_bounds_ok": c.trace_bounds_ok,
                "chain_ok": c.chain_ok,
                "final_ok": c.final_ok,
            })
        })
        .collect();
    let cert = json!({
        "hap": hap_json(&ctx.hap, &group, false),
        "given_bounds": { "A": ctx.given_bounds.0, "B": ctx.given_bounds.1 },
        "reference_bounds": { "A": ctx.reference_bounds.0, "B": ctx.reference_bounds.1 },
        "L_radius": ctx.l.radius,
        "cells": cells,
    });
    Ok((checks, cert))
}

fn density(s: &Scenario) -> Outcome {
    let group = s.resolve_group()?;
    let points = match (&s.points, &s.frame) {
        (Some(p), _) => p.build(&group)?,
        (None, Some(frame)) => frame.points.build(&group)?,
        (None, None) => unreachable!("validated"),
    };
    let k_family = LabeledSet::balls(&group, &Scenario::radii(&s.k_radii, &group));
    let ys = match &s.y_sample {
        Some(ys) => ys.iter().map(|y| y.resolve(&group)).collect::<Result<Vec<_>>>()?,
        None => (0..group.order()).collect(),
    };
    let report = density_report(&group, &points, &k_family, &ys)?;
    let checks = report
        .summary
        .iter()
        .map(|r| {
            Check::new(
                format!("K={}", r.k_radius),
                r.min_ratio <= r.max_ratio,
                format!("ratio in [{}, {}]", g(r.min_ratio), g(r.max_ratio)),
            )
        })
        .collect();
    let cert = json!({
        "points": points.len(),
        "rows": report.rows.iter().map(|r| json!({
            "y": element_json(&r.y_element),
            "K_radius": r.k_radius,
            "count": r.count,
            "measure": r.measure,
            "ratio": r.ratio,
        })).collect::<Vec<_>>(),
        "summary": report.summary.iter().map(|r| json!({
            "K_radius": r.k_radius,
            "min_ratio": r.min_ratio,
            "max_ratio": r.max_ratio,
        })).collect::<Vec<_>>(),
    });
    Ok((checks, cert))
}
