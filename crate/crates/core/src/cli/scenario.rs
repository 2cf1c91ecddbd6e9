//! Scenario files: laboratory units on disk, SI inside.

use super::output::{canonical_json, sha256_hex};
use super::CliError;
use crate::adiabaticity::ReportParams;
use crate::constants::{khz_to_angular, mhz_to_angular, GAUSS, GAUSS_PER_CM, MICRON};
use crate::fields::{AtomState, Branch, FieldConfig};
use crate::interferometer::SequenceSpec;
use crate::Error;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::path::{Path, PathBuf};

/// Field parameters as written in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabFieldConfig {
    pub alpha_gauss_per_cm: f64,
    pub b_mod_gauss: f64,
    pub mod_freq_khz: f64,
    pub rf_freq_mhz: f64,
    pub rabi_freq_khz: f64,
    #[serde(default)]
    pub ellipticity: f64,
    #[serde(default)]
    pub delta_rad: f64,
    #[serde(default = "yes")]
    pub rf_tracking: bool,
}

fn yes() -> bool {
    true
}

impl LabFieldConfig {
    pub fn to_si(&self) -> FieldConfig {
        FieldConfig {
            alpha: self.alpha_gauss_per_cm * GAUSS_PER_CM,
            b_mod: self.b_mod_gauss * GAUSS,
            omega_mod: khz_to_angular(self.mod_freq_khz),
            delta: self.delta_rad,
            omega_rf0: mhz_to_angular(self.rf_freq_mhz),
            rabi0c: khz_to_angular(self.rabi_freq_khz),
            ellipticity: self.ellipticity,
            rf_tracking: self.rf_tracking,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Species {
    #[default]
    Rb87,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchSelection {
    Plus,
    Minus,
    #[default]
    Both,
}

impl BranchSelection {
    pub fn branches(self) -> Vec<Branch> {
        match self {
            BranchSelection::Plus => vec![Branch::Plus],
            BranchSelection::Minus => vec![Branch::Minus],
            BranchSelection::Both => vec![Branch::Plus, Branch::Minus],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    #[serde(default)]
    pub species: Species,
    #[serde(default)]
    pub branch: BranchSelection,
}

impl AtomSpec {
    pub fn atom(&self) -> AtomState {
        let branch = match self.branch {
            BranchSelection::Minus => Branch::Minus,
            _ => Branch::Plus,
        };
        match self.species {
            Species::Rb87 => AtomState::rb87(branch),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Linspace {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Dotted path into the scenario, e.g. `field_config.ellipticity`.
    pub parameter: String,
    #[serde(default)]
    pub values: Option<Vec<Value>>,
    #[serde(default)]
    pub linspace: Option<Linspace>,
    #[serde(default)]
    pub jobs: Option<usize>,
}

impl SweepSpec {
    pub fn sweep_values(&self) -> Vec<Value> {
        match (&self.values, &self.linspace) {
            (Some(v), _) => v.clone(),
            (None, Some(l)) if l.count == 1 => vec![Value::from(l.start)],
            (None, Some(l)) => (0..l.count)
                .map(|k| Value::from(l.start + (l.stop - l.start) * k as f64 / (l.count - 1) as f64))
                .collect(),
            (None, None) => Vec::new(),
        }
    }

    fn problems(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.parameter.split('.').any(str::is_empty) {
            v.push("sweep.parameter must be a dotted key".to_string());
        }
        if self.parameter.split('.').next() == Some("sweep") {
            v.push("sweep.parameter cannot point into the sweep itself".to_string());
        }
        match (&self.values, &self.linspace) {
            (Some(_), Some(_)) => v.push("sweep takes either values or linspace, not both".into()),
            (None, None) => v.push("sweep needs values or linspace".into()),
            (Some(vals), None) if vals.is_empty() => v.push("sweep values must be non-empty".into()),
            (None, Some(l)) if l.count == 0 => v.push("sweep linspace count must be positive".into()),
            _ => {}
        }
        if self.jobs == Some(0) {
            v.push("sweep.jobs must be positive".into());
        }
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Gnuplot,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub directory: PathBuf,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_dir() -> PathBuf {
    PathBuf::from("taap_out")
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            directory: default_dir(),
            formats: default_formats(),
        }
    }
}

impl OutputSpec {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Xy,
    Xz,
    Yz,
}

/// Sample points for a potential map, lengths in micrometres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// Circle at the ring radius (or `radius_um`) and height `z_um`.
    RingLine {
        points: usize,
        #[serde(default)]
        radius_um: Option<f64>,
        #[serde(default)]
        z_um: f64,
    },
    Plane {
        plane: Plane,
        u_min_um: f64,
        u_max_um: f64,
        nu: usize,
        v_min_um: f64,
        v_max_um: f64,
        nv: usize,
        /// Position along the axis normal to the plane.
        #[serde(default)]
        offset_um: f64,
    },
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec::RingLine {
            points: 360,
            radius_um: None,
            z_um: 0.0,
        }
    }
}

/// Safety limit on the number of potential-map points.
pub const MAX_GRID_POINTS: usize = 10_000_000;

impl GridSpec {
    pub fn len(&self) -> usize {
        match self {
            GridSpec::RingLine { points, .. } => *points,
            GridSpec::Plane { nu, nv, .. } => nu.saturating_mul(*nv),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn problems(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.is_empty() {
            v.push("potential_map grid is empty".to_string());
        } else if self.len() > MAX_GRID_POINTS {
            v.push(format!(
                "potential_map grid has {} points, limit is {MAX_GRID_POINTS}",
                self.len()
            ));
        }
        if let GridSpec::RingLine { radius_um: Some(r), .. } = self {
            if !(*r > 0.0) {
                v.push("potential_map radius_um must be positive".into());
            }
        }
        v
    }

    /// Points in metres, row-major with the second axis fastest.
    pub fn points(&self, ring_radius: f64) -> Vec<crate::Vec3> {
        use crate::Vec3;
        let lerp = |a: f64, b: f64, k: usize, n: usize| {
            if n == 1 {
                a
            } else {
                a + (b - a) * k as f64 / (n - 1) as f64
            }
        };
        match *self {
            GridSpec::RingLine {
                points,
                radius_um,
                z_um,
            } => {
                let r = radius_um.map_or(ring_radius, |r| r * MICRON);
                (0..points)
                    .map(|k| Vec3::cylindrical(r, 2.0 * std::f64::consts::PI * k as f64 / points as f64, z_um * MICRON))
                    .collect()
            }
            GridSpec::Plane {
                plane,
                u_min_um,
                u_max_um,
                nu,
                v_min_um,
                v_max_um,
                nv,
                offset_um,
            } => {
                let mut out = Vec::with_capacity(nu * nv);
                for i in 0..nu {
                    let u = lerp(u_min_um, u_max_um, i, nu) * MICRON;
                    for j in 0..nv {
                        let w = lerp(v_min_um, v_max_um, j, nv) * MICRON;
                        let o = offset_um * MICRON;
                        out.push(match plane {
                            Plane::Xy => Vec3::new(u, w, o),
                            Plane::Xz => Vec3::new(u, o, w),
                            Plane::Yz => Vec3::new(o, u, w),
                        });
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialMapSpec {
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default = "yes")]
    pub gravity: bool,
}

impl Default for PotentialMapSpec {
    fn default() -> Self {
        PotentialMapSpec {
            grid: GridSpec::default(),
            gravity: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub field_config: LabFieldConfig,
    #[serde(default)]
    pub atom: AtomSpec,
    pub sequence: SequenceSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub outputs: OutputSpec,
    #[serde(default)]
    pub potential_map: PotentialMapSpec,
    #[serde(default)]
    pub report: ReportParams,
}

/// Validated scenario with SI field parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub file: ScenarioFile,
    pub field: FieldConfig,
    pub atom: AtomState,
    /// Parsed input, kept for sweeps and hashing.
    pub raw: Value,
    /// sha256 of the canonical form of `raw`.
    pub hash: String,
}

impl Scenario {
    pub fn from_value(raw: Value) -> Result<Self, CliError> {
        let file: ScenarioFile = serde_path_to_error::deserialize(raw.clone()).map_err(|e| CliError::Parse {
            context: format!("key `{}`", e.path()),
            message: e.inner().to_string(),
        })?;
        let field = file.field_config.to_si();
        let atom = file.atom.atom();
        let mut problems = Vec::new();
        let mut absorb = |r: crate::Result<()>| {
            if let Err(Error::InvalidConfig(v)) = r {
                problems.extend(v);
            } else if let Err(e) = r {
                problems.push(e.to_string());
            }
        };
        absorb(field.validate());
        absorb(file.sequence.validate());
        absorb(atom.validate());
        problems.extend(file.potential_map.grid.problems());
        if let Some(s) = &file.sweep {
            problems.extend(s.problems());
        }
        let r = &file.report;
        if !(r.n_atoms >= 2.0) {
            problems.push("report.n_atoms must be at least 2".into());
        }
        if !(r.scattering_length >= 0.0) {
            problems.push("report.scattering_length must be non-negative".into());
        }
        if !(r.cycle_time > 0.0) {
            problems.push("report.cycle_time must be positive".into());
        }
        if r.lz_samples == 0 {
            problems.push("report.lz_samples must be positive".into());
        }
        if !problems.is_empty() {
            return Err(CliError::Validation(problems));
        }
        let hash = sha256_hex(canonical_json(&raw).as_bytes());
        Ok(Scenario {
            file,
            field,
            atom,
            raw,
            hash,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let raw: Value = serde_path_to_error::deserialize(de).map_err(|e| CliError::Parse {
            context: format!("line {}, column {}", e.inner().line(), e.inner().column()),
            message: e.inner().to_string(),
        })?;
        Scenario::from_value(raw)
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        // an unreadable scenario is bad input, not an output failure
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
        Scenario::parse(&text)
    }

    /// One scenario per sweep value, with the sweep section removed.
    pub fn sweep_variants(&self) -> Result<Vec<SweepVariant>, CliError> {
        let sweep = self
            .file
            .sweep
            .as_ref()
            .ok_or_else(|| CliError::Validation(vec!["scenario has no sweep section".into()]))?;
        let mut base = self.raw.clone();
        if let Value::Object(m) = &mut base {
            m.remove("sweep");
        }
        let out = sweep
            .sweep_values()
            .into_iter()
            .map(|v| {
                let s = set_dotted(&base, &sweep.parameter, v.clone());
                (v, s.and_then(Scenario::from_value))
            })
            .collect();
        Ok(out)
    }
}

/// Swept value and the scenario it produces.
pub type SweepVariant = (Value, Result<Scenario, CliError>);

/// Copy of `root` with the value at `path` replaced. Every parent object
/// must already exist; the leaf may be new and is then checked by the schema.
pub fn set_dotted(root: &Value, path: &str, value: Value) -> Result<Value, CliError> {
    let mut out = root.clone();
    let keys: Vec<&str> = path.split('.').collect();
    let (leaf, parents) = keys.split_last().expect("split yields at least one item");
    let mut cur = &mut out;
    for (depth, k) in parents.iter().enumerate() {
        cur = cur.get_mut(*k).filter(|v| v.is_object()).ok_or_else(|| {
            CliError::Validation(vec![format!("sweep key `{}` does not exist", keys[..=depth].join("."))])
        })?;
    }
    match cur {
        Value::Object(m) => {
            m.insert((*leaf).to_string(), value);
            Ok(out)
        }
        _ => Err(CliError::Validation(vec![format!("sweep key `{path}` does not exist")])),
    }
}
