//! Scenario files: schema, loading with located errors, and assembly of the
//! core objects they describe.

use std::collections::BTreeMap;
use std::fmt;

use liact_core::algebra::AlgebraSpec;
use liact_core::fields::ChartSpec;
use liact_core::group::GroupSpec;
use liact_core::{ActionEngine, FlowOptions, Group, Representation, StructureConstants};
use serde::{Deserialize, Serialize};

use crate::tasks::Task;

fn default_n() -> usize {
    2
}

fn default_sign() -> f64 {
    -1.0
}

fn is_default_n(n: &usize) -> bool {
    *n == default_n()
}

fn is_zero(s: &u64) -> bool {
    *s == 0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub seed: u64,
    #[serde(rename = "grassmann_N", default = "default_n", skip_serializing_if = "is_default_n")]
    pub grassmann_n: usize,
    /// Named constants available inside `rho` expressions.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, f64>,
    pub algebra: AlgebraSpec,
    pub group: GroupSpec,
    pub chart: ChartSpec,
    /// One list of component expressions per basis element.
    pub rho: Vec<Vec<String>>,
    #[serde(default = "default_sign")]
    pub fundamental_sign: f64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub tasks: Vec<Task>,
}

/// Integrator settings and the acceptance thresholds of the checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub integrator: FlowOptions,
    pub validation: f64,
    pub jacobi: f64,
    pub act: f64,
    pub group_law: f64,
    pub recover_rho: f64,
    pub path_independence: f64,
    pub holonomy: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            integrator: FlowOptions::default(),
            validation: 1e-12,
            jacobi: 1e-12,
            act: 1e-8,
            group_law: 1e-8,
            recover_rho: 1e-6,
            path_independence: 1e-8,
            holonomy: 1e-8,
        }
    }
}

/// Why a scenario could not be loaded. `pointer` is a JSON pointer into the
/// document; `offset` a byte offset for syntax errors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LoadError {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pointer: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    pub message: String,
}

impl LoadError {
    fn at(pointer: impl Into<String>, message: impl fmt::Display) -> Self {
        LoadError {
            pointer: Some(pointer.into()),
            offset: None,
            message: message.to_string(),
        }
    }
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.pointer, self.offset) {
            (Some(p), _) => write!(f, "{}: {}", if p.is_empty() { "/" } else { p }, self.message),
            (None, Some(o)) => write!(f, "byte {o}: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for LoadError {}

fn byte_offset(src: &str, line: usize, column: usize) -> usize {
    let before: usize = src.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (before + column.saturating_sub(1)).min(src.len())
}

fn escape_pointer(key: &str) -> String {
    key.replace('~', "~0").replace('/', "~1")
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        match seg {
            Segment::Seq { index } => out.push_str(&format!("/{index}")),
            Segment::Map { key } => out.push_str(&format!("/{}", escape_pointer(key))),
            Segment::Enum { variant } => out.push_str(&format!("/{}", escape_pointer(variant))),
            Segment::Unknown => {}
        }
    }
    out
}

impl Scenario {
    /// Parses a scenario document, reporting syntax errors by byte offset
    /// and schema errors by JSON pointer.
    pub fn from_json(src: &str) -> Result<Self, LoadError> {
        let value: serde_json::Value = serde_json::from_str(src).map_err(|e| LoadError {
            pointer: None,
            offset: Some(byte_offset(src, e.line(), e.column())),
            message: e.to_string(),
        })?;
        let scenario: Scenario = serde_path_to_error::deserialize(value).map_err(|e| LoadError {
            pointer: Some(pointer_of(e.path())),
            offset: None,
            message: e.inner().to_string(),
        })?;
        scenario.build()?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn sc(&self) -> Result<StructureConstants, LoadError> {
        self.algebra.build().map_err(|e| LoadError::at("/algebra", e))
    }

    /// Builds and cross-checks everything the tasks need.
    pub fn build(&self) -> Result<Built, LoadError> {
        if self.grassmann_n > liact_core::grassmann::MAX_GENERATORS {
            return Err(LoadError::at(
                "/grassmann_N",
                format!("at most {} generators", liact_core::grassmann::MAX_GENERATORS),
            ));
        }
        if self.fundamental_sign != 1.0 && self.fundamental_sign != -1.0 {
            return Err(LoadError::at("/fundamental_sign", "must be 1 or -1"));
        }
        let sc = self.sc()?;
        let chart = self.chart.build().map_err(|e| LoadError::at("/chart", e))?;
        let rep = Representation::parse(sc.clone(), chart, &self.rho, &self.params).map_err(|e| LoadError::at("/rho", e))?;
        let group = self.group.build(&sc, self.grassmann_n).map_err(|e| LoadError::at("/group", e))?;
        let engine = ActionEngine::new(rep.clone(), group.clone(), self.fundamental_sign)
            .map_err(|e| LoadError::at("/group", e))?
            .with_options(self.tolerances.integrator);
        let built = Built {
            sc,
            rep,
            group,
            engine,
            n: self.grassmann_n,
            sign: self.fundamental_sign,
            tol: self.tolerances.clone(),
        };
        for (i, task) in self.tasks.iter().enumerate() {
            task.check(&built).map_err(|e| LoadError::at(format!("/tasks/{i}"), e))?;
        }
        Ok(built)
    }
}

/// Core objects assembled from a scenario.
#[derive(Clone, Debug)]
pub struct Built {
    pub sc: StructureConstants,
    pub rep: Representation,
    pub group: Group,
    pub engine: ActionEngine,
    pub n: usize,
    pub sign: f64,
    pub tol: Tolerances,
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "name": "line",
        "algebra": {"dim": 1, "parities": ["even"]},
        "group": {"model": "euclidean", "dim": 1},
        "chart": {"even": ["x"]},
        "rho": [["1"]]
    }"#;

    #[test]
    fn defaults() {
        let s = Scenario::from_json(MINIMAL).unwrap();
        assert_eq!(s.seed, 0);
        assert_eq!(s.grassmann_n, 2);
        assert_eq!(s.fundamental_sign, -1.0);
        assert!(s.tasks.is_empty());
        assert_eq!(Scenario::from_json(&s.to_json()).unwrap(), s);
    }

    #[test]
    fn syntax_error_offset() {
        let src = "{\n  \"name\": \"x\",\n  oops\n}";
        let e = Scenario::from_json(src).unwrap_err();
        assert_eq!(e.pointer, None);
        assert_eq!(e.offset, Some(src.find("oops").unwrap()));
    }

    #[test]
    fn schema_error_pointer() {
        let src = MINIMAL.replace(r#""parities": ["even"]"#, r#""parities": ["up"]"#);
        let e = Scenario::from_json(&src).unwrap_err();
        assert_eq!(e.pointer.as_deref(), Some("/algebra/parities/0"));
        let src = MINIMAL.replace(r#""name": "line","#, r#""name": "line", "colour": 3,"#);
        let e = Scenario::from_json(&src).unwrap_err();
        assert_eq!(e.pointer.as_deref(), Some("/colour"));
        assert!(e.message.contains("colour"));
    }

    #[test]
    fn cross_reference_errors() {
        let src = MINIMAL.replace(r#"[["1"]]"#, r#"[["1", "0"]]"#);
        assert_eq!(Scenario::from_json(&src).unwrap_err().pointer.as_deref(), Some("/rho"));
        let src = MINIMAL.replace(r#""dim": 1}"#, r#""dim": 2}"#);
        assert_eq!(Scenario::from_json(&src).unwrap_err().pointer.as_deref(), Some("/group"));
        let src = MINIMAL.replace(r#""rho""#, r#""tasks": [{"kind": "teleport"}], "rho""#);
        assert_eq!(Scenario::from_json(&src).unwrap_err().pointer.as_deref(), Some("/tasks/0/kind"));
        let src = MINIMAL.replace(r#""rho""#, r#""tasks": [{"kind": "act", "g": [1.0], "m": [0.0, 1.0]}], "rho""#);
        assert_eq!(Scenario::from_json(&src).unwrap_err().pointer.as_deref(), Some("/tasks/0"));
    }
}
