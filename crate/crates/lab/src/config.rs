//! JSON experiment configuration.
//!
//! ```json
//! {
//!   "f": {"family": "exp", "a": 2},
//!   "measure": {
//!     "density": {"kind": "expression", "expr": "1 + x"},
//!     "atoms": [{"x": 0.5, "y": 0.5, "mass": "4*pi"}]
//!   },
//!   "grids": [63, 127, 255],
//!   "scheme": "both"
//! }
//! ```
//!
//! `measure` may be replaced by `"measure_file": "m.json"` holding the same
//! object. Relative paths are resolved against the directory of the config
//! file. Any scalar may be written as a number or as a constant expression
//! string (`"4*pi"`).

use std::path::{Path, PathBuf};

use mplab_core::mollify::Profile;
use mplab_core::reduction::ReductionOptions;
use mplab_core::semilinear::SolveOptions;
use mplab_core::{Atom, Bounds, Grid, GridFunction, Measure, Nonlinearity, Point};
use serde::Deserialize;

use crate::expr::{Expr, Var};
use crate::io;

#[derive(Debug, thiserror::Error)]
#[error("config error at `{key}`: {msg}")]
pub struct ConfigError {
    pub key: String,
    pub msg: String,
}

fn cerr(key: impl Into<String>, msg: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.into(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Num(f64),
    Expr(String),
}

impl Scalar {
    fn value(&self, key: &str) -> Result<f64, ConfigError> {
        let v = match self {
            Scalar::Num(v) => *v,
            Scalar::Expr(s) => Expr::constant(s).map_err(|e| cerr(key, e.to_string()))?,
        };
        if !v.is_finite() {
            return Err(cerr(key, "value is not finite"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum FSpec {
    Zero,
    Linear { coef: Scalar },
    Power { p: Scalar },
    OddPower { p: Scalar },
    Exp { a: Scalar },
    ExpFull { a: Scalar },
    /// Expression in `x`, `y`, `u`.
    Custom { expr: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensitySpec {
    Constant { value: Scalar },
    File { path: PathBuf },
    Expression { expr: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub x: Scalar,
    pub y: Scalar,
    pub mass: Scalar,
    /// Written by `reduce`; ignored on input.
    #[serde(default, rename = "radius")]
    pub _radius: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub density: Option<DensitySpec>,
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    /// Summaries written alongside extracted measures; ignored on input.
    #[serde(default, rename = "density_mass")]
    pub _density_mass: Option<f64>,
    #[serde(default, rename = "total_variation")]
    pub _total_variation: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeSel {
    #[default]
    Truncation,
    Mollification,
    Both,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSel {
    #[default]
    Bump,
    Cosine,
}

impl From<ProfileSel> for Profile {
    fn from(p: ProfileSel) -> Profile {
        match p {
            ProfileSel::Bump => Profile::Bump,
            ProfileSel::Cosine => Profile::Cosine,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub rel_tol: f64,
    pub tol_seq_rel: f64,
    pub cg_tol: f64,
    pub max_newton: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        let s = SolveOptions::default();
        Tolerances {
            rel_tol: s.rel_tol,
            tol_seq_rel: ReductionOptions::default().tol_seq_rel,
            cg_tol: s.cg_tol,
            max_newton: s.max_newton,
        }
    }
}

fn default_grids() -> Vec<usize> {
    vec![63]
}

fn default_q() -> f64 {
    1.5
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub f: Option<FSpec>,
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
    #[serde(default)]
    pub measure_file: Option<PathBuf>,
    /// `[x_min, x_max, y_min, y_max]`.
    #[serde(default)]
    pub domain: Option<[f64; 4]>,
    #[serde(default = "default_grids")]
    pub grids: Vec<usize>,
    #[serde(default)]
    pub scheme: SchemeSel,
    #[serde(default)]
    pub truncation_levels: Option<Vec<f64>>,
    #[serde(default)]
    pub mollification_indices: Option<Vec<f64>>,
    #[serde(default)]
    pub mollifier_profile: ProfileSel,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Sobolev exponent for the a priori norm.
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone)]
enum DensitySource {
    Zero,
    Constant(f64),
    Expr(Expr),
    Sampled(io::GridFile),
}

/// A measure description that can be laid down on any grid.
#[derive(Debug, Clone)]
pub struct MeasureDef {
    density: DensitySource,
    atoms: Vec<(f64, f64, f64)>,
}

impl MeasureDef {
    pub fn on(&self, g: Grid) -> mplab_core::Result<Measure> {
        let density = match &self.density {
            DensitySource::Zero => GridFunction::zeros(g),
            DensitySource::Constant(c) => GridFunction::constant(g, *c),
            DensitySource::Expr(e) => GridFunction::from_fn(g, |p| e.eval(p.x, p.y, 0.0))?,
            DensitySource::Sampled(file) => GridFunction::from_fn(g, |p| file.interpolate(p))?,
        };
        let atoms = self.atoms.iter().map(|&(x, y, m)| Atom::new(x, y, m)).collect();
        Measure::new(density, atoms)
    }
}

#[derive(Debug, Clone)]
pub struct Experiment {
    pub f: Option<(Nonlinearity, String)>,
    pub measure: Option<MeasureDef>,
    pub grids: Vec<Grid>,
    pub scheme: SchemeSel,
    pub truncation_levels: Option<Vec<f64>>,
    pub mollification_indices: Option<Vec<f64>>,
    pub profile: Profile,
    pub tolerances: Tolerances,
    pub q: f64,
    pub out: Option<PathBuf>,
    /// SHA-256 of the raw config bytes.
    pub config_hash: String,
}

impl Experiment {
    pub fn f(&self) -> Result<&Nonlinearity, ConfigError> {
        self.f.as_ref().map(|(f, _)| f).ok_or_else(|| cerr("f", "missing"))
    }

    pub fn f_label(&self) -> String {
        self.f.as_ref().map(|(_, l)| l.clone()).unwrap_or_default()
    }

    pub fn measure(&self) -> Result<&MeasureDef, ConfigError> {
        self.measure
            .as_ref()
            .ok_or_else(|| cerr("measure", "missing (give `measure` or `measure_file`)"))
    }

    pub fn solve_options(&self) -> SolveOptions {
        SolveOptions {
            rel_tol: self.tolerances.rel_tol,
            cg_tol: self.tolerances.cg_tol,
            max_newton: self.tolerances.max_newton,
            q: self.q,
            ..SolveOptions::default()
        }
    }

    pub fn reduction_options(&self) -> ReductionOptions {
        ReductionOptions {
            solve: self.solve_options(),
            tol_seq_rel: self.tolerances.tol_seq_rel,
            truncation_levels: self.truncation_levels.clone(),
            schedule: self.mollification_indices.clone(),
            profile: self.profile,
            ..ReductionOptions::default()
        }
    }
}

pub fn load(path: &Path) -> Result<Experiment, ConfigError> {
    let bytes = std::fs::read(path).map_err(|e| cerr("<file>", format!("{}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse(&bytes, &base)
}

pub fn parse(bytes: &[u8], base: &Path) -> Result<Experiment, ConfigError> {
    let raw: RawConfig = from_json(bytes)?;
    resolve(raw, base, io::sha256_hex(bytes))
}

fn from_json<T: serde::de::DeserializeOwned>(bytes: &[u8]) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let key = e.path().to_string();
        let key = if key == "." { "<root>".to_string() } else { key };
        cerr(key, e.into_inner().to_string())
    })
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(cerr(key, format!("must be positive, got {v}")))
    }
}

fn increasing(key: &str, v: &[f64]) -> Result<(), ConfigError> {
    if v.is_empty() {
        return Err(cerr(key, "must not be empty"));
    }
    for (i, &x) in v.iter().enumerate() {
        positive(&format!("{key}[{i}]"), x)?;
    }
    if v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(cerr(key, "must be strictly increasing"));
    }
    Ok(())
}

fn resolve_f(spec: &FSpec) -> Result<(Nonlinearity, String), ConfigError> {
    Ok(match spec {
        FSpec::Zero => (Nonlinearity::Zero, "zero".into()),
        FSpec::Linear { coef } => {
            let c = coef.value("f.coef")?;
            if c < 0.0 {
                return Err(cerr("f.coef", "must be nonnegative (f must be nonincreasing)"));
            }
            (Nonlinearity::Linear { coef: c }, format!("linear coef={c}"))
        }
        FSpec::Power { p } => {
            let p = positive("f.p", p.value("f.p")?)?;
            (Nonlinearity::Power { p }, format!("power p={p}"))
        }
        FSpec::OddPower { p } => {
            let p = positive("f.p", p.value("f.p")?)?;
            (Nonlinearity::OddPower { p }, format!("odd_power p={p}"))
        }
        FSpec::Exp { a } => {
            let a = positive("f.a", a.value("f.a")?)?;
            (Nonlinearity::Exp { a }, format!("exp a={a}"))
        }
        FSpec::ExpFull { a } => {
            let a = positive("f.a", a.value("f.a")?)?;
            (Nonlinearity::ExpFull { a }, format!("exp_full a={a}"))
        }
        FSpec::Custom { expr } => {
            let e = Expr::parse(expr, &[Var::X, Var::Y, Var::U]).map_err(|e| cerr("f.expr", e.to_string()))?;
            let label = expr.clone();
            (
                Nonlinearity::custom(label.clone(), move |p: Point, u: f64| e.eval(p.x, p.y, u)),
                label,
            )
        }
    })
}

fn resolve_measure(spec: &MeasureSpec, key: &str, base: &Path, bounds: &Bounds) -> Result<MeasureDef, ConfigError> {
    let density = match &spec.density {
        None => DensitySource::Zero,
        Some(DensitySpec::Constant { value }) => DensitySource::Constant(value.value(&format!("{key}.density.value"))?),
        Some(DensitySpec::Expression { expr }) => DensitySource::Expr(
            Expr::parse(expr, &[Var::X, Var::Y]).map_err(|e| cerr(format!("{key}.density.expr"), e.to_string()))?,
        ),
        Some(DensitySpec::File { path }) => {
            let k = format!("{key}.density.path");
            let p = base.join(path);
            if !p.exists() {
                return Err(cerr(k, format!("file {} does not exist", p.display())));
            }
            let file = io::read_grid_csv(&p).map_err(|e| cerr(&k, format!("{e:#}")))?;
            DensitySource::Sampled(file.with_default_bounds(*bounds))
        }
    };
    let mut atoms = Vec::new();
    for (i, a) in spec.atoms.iter().enumerate() {
        let k = |f: &str| format!("{key}.atoms[{i}].{f}");
        let (x, y, m) = (a.x.value(&k("x"))?, a.y.value(&k("y"))?, a.mass.value(&k("mass"))?);
        if !bounds.contains(Point::new(x, y)) {
            return Err(cerr(format!("{key}.atoms[{i}]"), format!("({x}, {y}) is not inside the domain")));
        }
        atoms.push((x, y, m));
    }
    Ok(MeasureDef { density, atoms })
}

fn resolve(raw: RawConfig, base: &Path, config_hash: String) -> Result<Experiment, ConfigError> {
    let bounds = match raw.domain {
        None => Bounds::UNIT_SQUARE,
        Some([x0, x1, y0, y1]) => {
            if ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) || x1 <= x0 || y1 <= y0 {
                return Err(cerr("domain", "need x_min < x_max and y_min < y_max"));
            }
            Bounds {
                x_min: x0,
                x_max: x1,
                y_min: y0,
                y_max: y1,
            }
        }
    };
    if raw.grids.is_empty() {
        return Err(cerr("grids", "must not be empty"));
    }
    if raw.grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(cerr("grids", "must be strictly increasing"));
    }
    let mut grids = Vec::new();
    for (i, &n) in raw.grids.iter().enumerate() {
        grids.push(Grid::new(bounds, n).map_err(|e| cerr(format!("grids[{i}]"), e.to_string()))?);
    }
    if let Some(l) = &raw.truncation_levels {
        increasing("truncation_levels", l)?;
    }
    if let Some(l) = &raw.mollification_indices {
        increasing("mollification_indices", l)?;
    }
    let t = &raw.tolerances;
    positive("tolerances.rel_tol", t.rel_tol)?;
    positive("tolerances.tol_seq_rel", t.tol_seq_rel)?;
    positive("tolerances.cg_tol", t.cg_tol)?;
    if t.max_newton == 0 {
        return Err(cerr("tolerances.max_newton", "must be positive"));
    }
    if !(1.0..2.0).contains(&raw.q) {
        return Err(cerr("q", format!("must lie in [1, 2), got {}", raw.q)));
    }
    let f = raw.f.as_ref().map(resolve_f).transpose()?;
    let measure = match (&raw.measure, &raw.measure_file) {
        (Some(_), Some(_)) => return Err(cerr("measure_file", "give either `measure` or `measure_file`, not both")),
        (Some(m), None) => Some(resolve_measure(m, "measure", base, &bounds)?),
        (None, Some(p)) => {
            let path = base.join(p);
            let bytes = std::fs::read(&path)
                .map_err(|e| cerr("measure_file", format!("{}: {e}", path.display())))?;
            let spec: MeasureSpec = from_json(&bytes).map_err(|e| cerr(format!("measure_file:{}", e.key), e.msg))?;
            let mbase = path.parent().map(Path::to_path_buf).unwrap_or_default();
            Some(resolve_measure(&spec, "measure_file", &mbase, &bounds)?)
        }
        (None, None) => None,
    };
    Ok(Experiment {
        f,
        measure,
        grids,
        scheme: raw.scheme,
        truncation_levels: raw.truncation_levels,
        mollification_indices: raw.mollification_indices,
        profile: raw.mollifier_profile.into(),
        tolerances: raw.tolerances,
        q: raw.q,
        out: raw.out.map(|o| base.join(o)),
        config_hash,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse_str(s: &str) -> Result<Experiment, ConfigError> {
        parse(s.as_bytes(), Path::new("."))
    }

    #[test]
    fn minimal_config() {
        let e = parse_str(r#"{"f": {"family": "exp", "a": "2"}, "measure": {"atoms": [{"x": 0.5, "y": 0.5, "mass": "4*pi"}]}}"#).unwrap();
        assert_eq!(e.grids.len(), 1);
        assert_eq!(e.f_label(), "exp a=2");
        let m = e.measure().unwrap().on(e.grids[0]).unwrap();
        assert!((m.atom_mass() - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn errors_name_the_key() {
        let e = parse_str(r#"{"f": {"family": "exp", "b": 2}}"#).unwrap_err();
        assert_eq!(e.key, "f");
        assert!(e.msg.contains("`b`"), "{e}");
        let e = parse_str(r#"{"grids": [63, 31]}"#).unwrap_err();
        assert_eq!(e.key, "grids");
        let e = parse_str(r#"{"f": {"family": "custom", "expr": "-exp(u"}}"#).unwrap_err();
        assert_eq!(e.key, "f.expr");
        let e = parse_str(r#"{"measure": {"atoms": [{"x": 0.5, "y": 1.5, "mass": 1}]}}"#).unwrap_err();
        assert_eq!(e.key, "measure.atoms[0]");
        let e = parse_str(r#"{"tolerances": {"rel_tol": -1}}"#).unwrap_err();
        assert_eq!(e.key, "tolerances.rel_tol");
        let e = parse_str(r#"{"measure": {"density": {"kind": "file", "path": "nope.csv"}}}"#).unwrap_err();
        assert_eq!(e.key, "measure.density.path");
        let e = parse_str(r#"{"scheme": "fast"}"#).unwrap_err();
        assert_eq!(e.key, "scheme");
    }

    #[test]
    fn custom_expression_matches_family() {
        let e = parse_str(r#"{"f": {"family": "custom", "expr": "-max(exp(2*u) - 1, 0)"}}"#).unwrap();
        let f = e.f().unwrap();
        let g = Nonlinearity::Exp { a: 2.0 };
        let p = Point::new(0.5, 0.5);
        for y in [-3.0, -0.1, 0.0, 0.4, 2.0] {
            assert!((f.eval(p, y) - g.eval(p, y)).abs() < 1e-12);
        }
    }
}
