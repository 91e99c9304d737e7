//! Run configuration: flat `section.key = value` text.
//!
//! Lines starting with `#` are comments. Numbers accept scientific notation
//! and `_` digit separators. Keys are case-sensitive.
//!
//! ```text
//! model.kind = lotka_volterra
//! model.R = 2.25
//! model.kappa = 67_113e3
//! thresholds.y_min = 7_000_000
//! grid.ny = 200
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use viability::estimation::FitOptions;
use viability::kernel_grid::{GridSpec, DEFAULT_MAX_ITER};
use viability::viable_control::PolicyKind;
use viability::{lv_model, GrowthModel, LotkaVolterraParams, State, Thresholds};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("`{key}`: {message}")]
    Value { key: String, message: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("unknown key `{0}`")]
    Unknown(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Invalid(#[from] viability::Error),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelConfig {
    LotkaVolterra(LotkaVolterraParams),
    /// Both coefficients equal to 1.
    Identity,
}

impl ModelConfig {
    pub fn lv_params(&self) -> Option<&LotkaVolterraParams> {
        match self {
            ModelConfig::LotkaVolterra(p) => Some(p),
            ModelConfig::Identity => None,
        }
    }

    /// The growth model, valid for prey biomass up to `y_max`.
    pub fn growth_model(&self, y_max: f64) -> viability::Result<GrowthModel> {
        match self {
            ModelConfig::LotkaVolterra(p) => lv_model(p, y_max),
            ModelConfig::Identity => Ok(GrowthModel::identity()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub spec: GridSpec,
    pub max_iter: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulateConfig {
    pub s0: State,
    pub horizon: usize,
    pub policy: PolicyKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub data: Option<PathBuf>,
    pub init: Option<LotkaVolterraParams>,
    pub options: FitOptions,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub svg: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub thresholds: Thresholds,
    pub grid: Option<GridConfig>,
    pub simulate: Option<SimulateConfig>,
    pub fit: Option<FitConfig>,
    pub output: OutputConfig,
}

/// Parses a number, ignoring `_` separators.
pub fn parse_number(raw: &str) -> Option<f64> {
    let cleaned: String = raw.chars().filter(|&c| c != '_').collect();
    if cleaned.is_empty() {
        return None;
    }
    cleaned.parse::<f64>().ok()
}

fn parse_count(raw: &str) -> Option<usize> {
    let x = parse_number(raw)?;
    (x >= 0.0 && x.fract() == 0.0 && x <= usize::MAX as f64).then_some(x as usize)
}

struct Entries {
    map: BTreeMap<String, String>,
    used: Vec<String>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: &str| ConfigError::Syntax {
                line: n + 1,
                message: message.into(),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax("expected `section.key = value`"))?;
            let (key, value) = (key.trim(), value.trim());
            if !key.contains('.') {
                return Err(syntax(&format!("key `{key}` has no section")));
            }
            if map.insert(key.to_string(), value.to_string()).is_some() {
                return Err(syntax(&format!("duplicate key `{key}`")));
            }
        }
        Ok(Self {
            map,
            used: Vec::new(),
        })
    }

    fn has_section(&self, section: &str) -> bool {
        let prefix = format!("{section}.");
        self.map.keys().any(|k| k.starts_with(&prefix))
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        let v = self.map.get(key).cloned();
        if v.is_some() {
            self.used.push(key.to_string());
        }
        v
    }

    fn number(&mut self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.raw(key)
            .map(|v| {
                parse_number(&v).ok_or_else(|| ConfigError::Value {
                    key: key.into(),
                    message: format!("`{v}` is not a number"),
                })
            })
            .transpose()
    }

    fn req_number(&mut self, key: &str) -> Result<f64, ConfigError> {
        self.number(key)?
            .ok_or_else(|| ConfigError::Missing(key.into()))
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        self.raw(key)
            .map(|v| {
                parse_count(&v).ok_or_else(|| ConfigError::Value {
                    key: key.into(),
                    message: format!("`{v}` is not a non-negative integer"),
                })
            })
            .transpose()
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        self.raw(key)
            .map(|v| match v.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(ConfigError::Value {
                    key: key.into(),
                    message: format!("`{v}` is not a boolean"),
                }),
            })
            .transpose()
    }

    fn finish(self) -> Result<(), ConfigError> {
        match self.map.keys().find(|k| !self.used.contains(k)) {
            Some(k) => Err(ConfigError::Unknown(k.clone())),
            None => Ok(()),
        }
    }
}

fn lv_from(e: &mut Entries, prefix: &str) -> Result<Option<LotkaVolterraParams>, ConfigError> {
    let key = |name: &str| format!("{prefix}{name}");
    let (kappa, k) = (e.number(&key("kappa"))?, e.number(&key("K"))?);
    let names = ["R", "L", "alpha", "beta"];
    let mut vals = [None; 4];
    for (slot, name) in vals.iter_mut().zip(names) {
        *slot = e.number(&key(name))?;
    }
    if vals.iter().all(Option::is_none) && kappa.is_none() && k.is_none() {
        return Ok(None);
    }
    let mut got = [0.0; 4];
    for ((g, v), name) in got.iter_mut().zip(vals).zip(names) {
        *g = v.ok_or_else(|| ConfigError::Missing(key(name)))?;
    }
    let [r, l, alpha, beta] = got;
    let p = match (kappa, k) {
        (Some(kappa), None) => LotkaVolterraParams::from_kappa(r, l, alpha, beta, kappa)?,
        (None, Some(k)) => LotkaVolterraParams::new(r, l, alpha, beta, k)?,
        (None, None) => return Err(ConfigError::Missing(key("kappa"))),
        (Some(_), Some(_)) => {
            return Err(ConfigError::Value {
                key: key("K"),
                message: "give either kappa or K, not both".into(),
            })
        }
    };
    Ok(Some(p))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut e = Entries::parse(text)?;

        let kind = e
            .raw("model.kind")
            .unwrap_or_else(|| "lotka_volterra".into());
        let model = match kind.as_str() {
            "lotka_volterra" => ModelConfig::LotkaVolterra(
                lv_from(&mut e, "model.")?.ok_or_else(|| ConfigError::Missing("model.R".into()))?,
            ),
            "identity" => ModelConfig::Identity,
            other => {
                return Err(ConfigError::Value {
                    key: "model.kind".into(),
                    message: format!(
                        "unknown model `{other}` (expected lotka_volterra or identity)"
                    ),
                })
            }
        };

        let thresholds = Thresholds::new(
            e.req_number("thresholds.y_min")?,
            e.req_number("thresholds.z_min")?,
            e.number("thresholds.catch1_min")?.unwrap_or(0.0),
            e.number("thresholds.catch2_min")?.unwrap_or(0.0),
        )?;

        let grid = if e.has_section("grid") {
            let spec = GridSpec {
                y_lo: e.req_number("grid.y_lo")?,
                y_hi: e.req_number("grid.y_hi")?,
                z_lo: e.req_number("grid.z_lo")?,
                z_hi: e.req_number("grid.z_hi")?,
                ny: e
                    .count("grid.ny")?
                    .ok_or_else(|| ConfigError::Missing("grid.ny".into()))?,
                nz: e
                    .count("grid.nz")?
                    .ok_or_else(|| ConfigError::Missing("grid.nz".into()))?,
                control_samples_v: e.count("grid.control_samples_v")?.unwrap_or(32),
                control_samples_w: e.count("grid.control_samples_w")?.unwrap_or(32),
                v_max: e.number("grid.v_max")?.unwrap_or(3.0),
                w_max: e.number("grid.w_max")?.unwrap_or(3.0),
            };
            spec.validate()?;
            let max_iter = e.count("grid.max_iter")?.unwrap_or(DEFAULT_MAX_ITER);
            if max_iter == 0 {
                return Err(ConfigError::Value {
                    key: "grid.max_iter".into(),
                    message: "must be >= 1".into(),
                });
            }
            Some(GridConfig { spec, max_iter })
        } else {
            None
        };

        let simulate = if e.has_section("simulate") {
            let s0 = State::new(e.req_number("simulate.y0")?, e.req_number("simulate.z0")?);
            let horizon = e.count("simulate.horizon")?.unwrap_or(100);
            if horizon == 0 {
                return Err(ConfigError::Value {
                    key: "simulate.horizon".into(),
                    message: "must be >= 1".into(),
                });
            }
            let policy = match e.raw("simulate.policy") {
                Some(p) => p.parse()?,
                None => PolicyKind::MinEffort,
            };
            Some(SimulateConfig {
                s0,
                horizon,
                policy,
            })
        } else {
            None
        };

        let fit = if e.has_section("fit") {
            let defaults = FitOptions::default();
            let options = FitOptions {
                tol: e.number("fit.tol")?.unwrap_or(defaults.tol),
                max_iter: e.count("fit.max_iter")?.unwrap_or(defaults.max_iter),
                h: e.number("fit.h")?.unwrap_or(defaults.h),
            };
            if !(options.tol >= 0.0 && options.h > 0.0) {
                return Err(ConfigError::Value {
                    key: "fit.tol/fit.h".into(),
                    message: "need tol >= 0 and h > 0".into(),
                });
            }
            Some(FitConfig {
                data: e.raw("fit.data").map(PathBuf::from),
                init: lv_from(&mut e, "fit.init.")?,
                options,
            })
        } else {
            None
        };

        let output = OutputConfig {
            dir: e.raw("output.dir").map(PathBuf::from),
            svg: e.boolean("output.svg")?.unwrap_or(false),
        };

        e.finish()?;
        Ok(Self {
            model,
            thresholds,
            grid,
            simulate,
            fit,
            output,
        })
    }

    /// Reads a config file. Relative paths inside it (`fit.data`,
    /// `output.dir`) are resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(fit) = cfg.fit.as_mut() {
            if let Some(d) = fit.data.as_mut() {
                if d.is_relative() {
                    *d = base.join(&*d);
                }
            }
        }
        if let Some(d) = cfg.output.dir.as_mut() {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        Ok(cfg)
    }

    /// Canonical text form: fixed key order, shortest round-trip numbers.
    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        match &self.model {
            ModelConfig::LotkaVolterra(p) => {
                put("model.kind", "lotka_volterra".into());
                put_lv(&mut put, "model.", p);
            }
            ModelConfig::Identity => put("model.kind", "identity".into()),
        }
        let th = &self.thresholds;
        put("thresholds.y_min", th.y_min.to_string());
        put("thresholds.z_min", th.z_min.to_string());
        put("thresholds.catch1_min", th.catch1_min.to_string());
        put("thresholds.catch2_min", th.catch2_min.to_string());
        if let Some(g) = &self.grid {
            let s = &g.spec;
            put("grid.y_lo", s.y_lo.to_string());
            put("grid.y_hi", s.y_hi.to_string());
            put("grid.z_lo", s.z_lo.to_string());
            put("grid.z_hi", s.z_hi.to_string());
            put("grid.ny", s.ny.to_string());
            put("grid.nz", s.nz.to_string());
            put("grid.control_samples_v", s.control_samples_v.to_string());
            put("grid.control_samples_w", s.control_samples_w.to_string());
            put("grid.v_max", s.v_max.to_string());
            put("grid.w_max", s.w_max.to_string());
            put("grid.max_iter", g.max_iter.to_string());
        }
        if let Some(s) = &self.simulate {
            put("simulate.y0", s.s0.y.to_string());
            put("simulate.z0", s.s0.z.to_string());
            put("simulate.horizon", s.horizon.to_string());
            put("simulate.policy", s.policy.to_string());
        }
        if let Some(f) = &self.fit {
            if let Some(d) = &f.data {
                put("fit.data", d.display().to_string());
            }
            if let Some(p) = &f.init {
                put_lv(&mut put, "fit.init.", p);
            }
            put("fit.tol", f.options.tol.to_string());
            put("fit.max_iter", f.options.max_iter.to_string());
            put("fit.h", f.options.h.to_string());
        }
        if let Some(d) = &self.output.dir {
            put("output.dir", d.display().to_string());
        }
        put("output.svg", self.output.svg.to_string());
        out
    }
}

fn put_lv(put: &mut impl FnMut(&str, String), prefix: &str, p: &LotkaVolterraParams) {
    put(&format!("{prefix}R"), p.r().to_string());
    put(&format!("{prefix}L"), p.l().to_string());
    put(&format!("{prefix}alpha"), p.alpha().to_string());
    put(&format!("{prefix}beta"), p.beta().to_string());
    // K is stored; kappa would not round-trip exactly.
    put(&format!("{prefix}K"), p.carrying_capacity().to_string());
}
