//! Scenario files: a JSON array of scenario objects.

use std::collections::BTreeSet;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::group::{Element, GroupKind, GroupModel, PointSet};
use crate::hilbert::{HilbertVector, RepFactor, Representation};

/// Failure to load a scenario file.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid field `{field}`{}: {message}", scenario.as_deref().map(|s| format!(" in scenario {s}")).unwrap_or_default())]
    Validation { scenario: Option<String>, field: String, message: String },
}

impl LoadError {
    fn field(scenario: &str, field: &str, message: impl Into<String>) -> Self {
        LoadError::Validation { scenario: Some(scenario.to_string()), field: field.to_string(), message: message.into() }
    }

    /// The offending field of a validation error.
    pub fn field_name(&self) -> Option<&str> {
        match self {
            LoadError::Validation { field, .. } => Some(field),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    SamplingBound,
    FrameAnalysis,
    Hap,
    Comparison,
    Density,
}

impl ScenarioKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioKind::SamplingBound => "sampling_bound",
            ScenarioKind::FrameAnalysis => "frame_analysis",
            ScenarioKind::Hap => "hap",
            ScenarioKind::Comparison => "comparison",
            ScenarioKind::Density => "density",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RepSpec {
    Translation { n: u32 },
    Gabor { n: u32 },
    Tensor { factors: Vec<RepFactor> },
}

impl RepSpec {
    pub fn build(&self) -> crate::Result<Representation> {
        match self {
            RepSpec::Translation { n } => Representation::translation(*n),
            RepSpec::Gabor { n } => Representation::gabor(*n),
            RepSpec::Tensor { factors } => Representation::new(factors.clone()),
        }
    }
}

/// A vector given by preset name or inline as `[[re, im], ...]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Preset(String),
    Inline(Vec<[f64; 2]>),
}

pub const PRESETS: [&str; 3] = ["dirac0", "flat", "gauss"];

impl VectorSpec {
    pub fn build(&self, rep: &Representation) -> crate::Result<HilbertVector> {
        match self {
            VectorSpec::Preset(name) => rep.preset(name),
            VectorSpec::Inline(pairs) => {
                if pairs.len() != rep.dim() {
                    return Err(crate::Error::DimensionMismatch { expected: rep.dim(), found: pairs.len() });
                }
                Ok(HilbertVector::new(pairs.iter().map(|&[re, im]| Complex64::new(re, im)).collect()))
            }
        }
    }
}

/// A group element as a scalar (rank one) or a coordinate list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CoordSpec {
    Scalar(i64),
    Tuple(Vec<i64>),
}

impl CoordSpec {
    pub fn resolve(&self, group: &GroupModel) -> crate::Result<usize> {
        let element = match self {
            CoordSpec::Scalar(c) => Element(vec![*c]),
            CoordSpec::Tuple(cs) => Element(cs.clone()),
        };
        group.index_of(&element)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub steps: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointsSpec {
    /// Only `"full"` is recognised.
    Named(String),
    Lattice { lattice: LatticeSpec },
    List(Vec<CoordSpec>),
}

impl PointsSpec {
    pub fn build(&self, group: &GroupModel) -> crate::Result<PointSet> {
        match self {
            PointsSpec::Named(name) if name == "full" => Ok(PointSet::full(group)),
            PointsSpec::Named(name) => Err(crate::Error::InvalidScenario(format!("unknown point set `{name}`"))),
            PointsSpec::Lattice { lattice } => PointSet::lattice(group, &lattice.steps),
            PointsSpec::List(coords) => {
                Ok(PointSet::new(coords.iter().map(|c| c.resolve(group)).collect::<crate::Result<_>>()?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSpec {
    pub rep: RepSpec,
    pub window: VectorSpec,
    pub points: PointsSpec,
}

/// One unit of work in a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub kind: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame: Option<FrameSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<FrameSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<VectorSpec>,
    /// Point set for density scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<PointsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_radius: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_radii: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l_radii: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_sample: Option<Vec<CoordSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_radius: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

pub const DEFAULT_TRIALS: usize = 50;
pub const DEFAULT_MAX_RADIUS: u64 = 3;

impl Scenario {
    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn u_radius(&self) -> u64 {
        self.u_radius.unwrap_or(1)
    }

    pub fn trials(&self) -> usize {
        self.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn max_radius(&self) -> u64 {
        self.max_radius.unwrap_or(DEFAULT_MAX_RADIUS)
    }

    /// Radii `0..=diameter` unless given explicitly.
    pub fn radii(given: &Option<Vec<u64>>, group: &GroupModel) -> Vec<u64> {
        given.clone().unwrap_or_else(|| (0..=group.diameter()).collect())
    }

    /// The group the scenario runs on: the frame's group if a frame is
    /// given, otherwise the explicit group descriptor.
    pub fn resolve_group(&self) -> crate::Result<GroupModel> {
        if let Some(frame) = &self.frame {
            return Ok(frame.rep.build()?.group().as_ref().clone());
        }
        match &self.group {
            Some(GroupKind::Cyclic { moduli }) => GroupModel::cyclic(moduli),
            Some(GroupKind::Truncated { half_widths }) => GroupModel::truncated(half_widths),
            None => Err(crate::Error::InvalidScenario("no group".into())),
        }
    }

    /// Structural checks that do not require building any operator.
    pub fn validate(&self) -> Result<(), LoadError> {
        let id = self.id.as_str();
        if id.trim().is_empty() {
            return Err(LoadError::field(id, "id", "must be nonempty"));
        }
        let need = |present: bool, field: &str| {
            if present {
                Ok(())
            } else {
                Err(LoadError::field(id, field, format!("required for kind {}", self.kind.as_str())))
            }
        };
        match self.kind {
            ScenarioKind::SamplingBound => need(self.group.is_some() || self.frame.is_some(), "group")?,
            ScenarioKind::FrameAnalysis => need(self.frame.is_some(), "frame")?,
            ScenarioKind::Hap => {
                need(self.frame.is_some(), "frame")?;
                need(self.f.is_some(), "f")?;
                need(self.epsilon.is_some(), "epsilon")?;
            }
            ScenarioKind::Comparison => {
                need(self.frame.is_some(), "frame")?;
                need(self.reference.is_some(), "reference")?;
                need(self.epsilon.is_some(), "epsilon")?;
            }
            ScenarioKind::Density => {
                need(self.group.is_some() || self.frame.is_some(), "group")?;
                need(self.points.is_some() || self.frame.is_some(), "points")?;
            }
        }
        if let Some(eps) = self.epsilon {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(LoadError::field(id, "epsilon", "must be a positive number"));
            }
            if self.kind == ScenarioKind::Comparison && eps >= 1.0 {
                return Err(LoadError::field(id, "epsilon", "must lie in (0, 1) for comparison"));
            }
        }
        if let (Some(group), Some(frame)) = (&self.group, &self.frame) {
            let rep_group = frame.rep.build().map_err(|e| LoadError::field(id, "frame", e.to_string()))?;
            if rep_group.group().kind() != group {
                return Err(LoadError::field(id, "group", "does not match the frame representation"));
            }
        }
        for (field, radii) in [("k_radii", &self.k_radii), ("l_radii", &self.l_radii)] {
            if let Some(r) = radii {
                if r.is_empty() {
                    return Err(LoadError::field(id, field, "must be nonempty"));
                }
                if field == "l_radii" && r.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(LoadError::field(id, field, "must be strictly increasing"));
                }
            }
        }
        if self.trials == Some(0) {
            return Err(LoadError::field(id, "trials", "must be positive"));
        }
        for (field, spec) in [("frame", &self.frame), ("reference", &self.reference)] {
            if let Some(FrameSpec { window: VectorSpec::Preset(name), .. }) = spec {
                if !PRESETS.contains(&name.as_str()) {
                    return Err(LoadError::field(id, field, format!("unknown window preset `{name}`")));
                }
            }
        }
        if let Some(VectorSpec::Preset(name)) = &self.f {
            if !PRESETS.contains(&name.as_str()) {
                return Err(LoadError::field(id, "f", format!("unknown preset `{name}`")));
            }
        }
        Ok(())
    }
}

/// Parses and validates a scenario array. Ids must be unique.
pub fn parse_scenarios(text: &str) -> Result<Vec<Scenario>, LoadError> {
    let scenarios: Vec<Scenario> = serde_json::from_str(text).map_err(|e| {
        let message = e.to_string();
        // serde reports unknown keys as data errors; surface them by name.
        if let Some(rest) = message.strip_prefix("unknown field `") {
            if let Some(end) = rest.find('`') {
                return LoadError::Validation { scenario: None, field: rest[..end].to_string(), message };
            }
        }
        LoadError::Parse { line: e.line(), column: e.column(), message }
    })?;
    let mut seen = BTreeSet::new();
    for s in &scenarios {
        s.validate()?;
        if !seen.insert(s.id.clone()) {
            return Err(LoadError::field(&s.id, "id", "duplicate scenario id"));
        }
    }
    Ok(scenarios)
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<Vec<Scenario>, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| LoadError::Io { path: path.display().to_string(), message: e.to_string() })?;
    parse_scenarios(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_frame_analysis_file() {
        let text = r#"[{"id": "g4", "kind": "frame_analysis",
            "frame": {"rep": {"kind": "gabor", "n": 4}, "window": "dirac0", "points": "full"}}]"#;
        let s = parse_scenarios(text).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].kind, ScenarioKind::FrameAnalysis);
        assert_eq!(s[0].seed(), 0);
    }

    #[test]
    fn empty_array() {
        assert!(parse_scenarios("[]").unwrap().is_empty());
    }

    #[test]
    fn hap_without_epsilon() {
        let text = r#"[{"id": "h", "kind": "hap", "f": "dirac0",
            "frame": {"rep": {"kind": "gabor", "n": 4}, "window": "gauss", "points": "full"}}]"#;
        let err = parse_scenarios(text).unwrap_err();
        assert_eq!(err.field_name(), Some("epsilon"));
    }

    #[test]
    fn unknown_keys_rejected() {
        let top = r#"[{"id": "a", "kind": "density", "group": {"kind": "cyclic", "moduli": [8]},
            "points": "full", "colour": 3}]"#;
        assert_eq!(parse_scenarios(top).unwrap_err().field_name(), Some("colour"));
        let nested = r#"[{"id": "a", "kind": "frame_analysis",
            "frame": {"rep": {"kind": "gabor", "n": 4, "m": 2}, "window": "flat", "points": "full"}}]"#;
        assert!(parse_scenarios(nested).is_err());
    }

    #[test]
    fn parse_error_has_position() {
        let err = parse_scenarios("[\n  {\"id\": }\n]").unwrap_err();
        match err {
            LoadError::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("expected a parse error, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_rejected() {
        let one = r#"{"id": "d", "kind": "density", "group": {"kind": "cyclic", "moduli": [8]}, "points": "full"}"#;
        let err = parse_scenarios(&format!("[{one}, {one}]")).unwrap_err();
        assert_eq!(err.field_name(), Some("id"));
    }

    #[test]
    fn comparison_epsilon_range() {
        let text = r#"[{"id": "c", "kind": "comparison", "epsilon": 1.5,
            "frame": {"rep": {"kind": "gabor", "n": 4}, "window": "gauss", "points": "full"},
            "reference": {"rep": {"kind": "gabor", "n": 4}, "window": "dirac0", "points": "full"}}]"#;
        assert_eq!(parse_scenarios(text).unwrap_err().field_name(), Some("epsilon"));
    }

    #[test]
    fn point_specs() {
        let g = GroupModel::cyclic(&[4, 4]).unwrap();
        let full: PointsSpec = serde_json::from_str(r#""full""#).unwrap();
        assert_eq!(full.build(&g).unwrap().len(), 16);
        let lattice: PointsSpec = serde_json::from_str(r#"{"lattice": {"steps": [2, 2]}}"#).unwrap();
        assert_eq!(lattice.build(&g).unwrap().len(), 4);
        let list: PointsSpec = serde_json::from_str("[[0, 0], [1, 0], [3, 3]]").unwrap();
        assert_eq!(list.build(&g).unwrap().len(), 3);
        let bad: PointsSpec = serde_json::from_str("[[4, 0]]").unwrap();
        assert!(bad.build(&g).is_err());
    }

    #[test]
    fn inline_vectors() {
        let rep = Representation::translation(2).unwrap();
        let v: VectorSpec = serde_json::from_str("[[1, 0], [0, 1]]").unwrap();
        let h = v.build(&rep).unwrap();
        assert_eq!(h.coords()[1], Complex64::new(0.0, 1.0));
        let short: VectorSpec = serde_json::from_str("[[1, 0]]").unwrap();
        assert!(short.build(&rep).is_err());
    }

    #[test]
    fn group_must_match_frame() {
        let text = r#"[{"id": "x", "kind": "frame_analysis", "group": {"kind": "cyclic", "moduli": [4]},
            "frame": {"rep": {"kind": "gabor", "n": 4}, "window": "flat", "points": "full"}}]"#;
        assert_eq!(parse_scenarios(text).unwrap_err().field_name(), Some("group"));
    }
}
