//! Run configuration: a TOML subset of `key = value` lines, `#` comments and
//! `[section]` headers. Keys may be written inside their section or bare at
//! the top level. Every problem found is reported, each with its line.
//!
//! ```text
//! scenario = "solve"
//! seed = 7
//!
//! [velocity]
//! dim = 3
//! v_extent = 4.0
//! nodes_per_axis = 9
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::Serialize;
use toml_edit::{Document, Item, Table, Value};

use crate::kernel::{KernelForm, KernelSpec};
use crate::renorm::BetaFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Solve,
    CheckKernel,
    Contraction,
    Uniqueness,
    RenormCheck,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Solve,
        Scenario::CheckKernel,
        Scenario::Contraction,
        Scenario::Uniqueness,
        Scenario::RenormCheck,
    ];

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Solve => "solve",
            Scenario::CheckKernel => "check-kernel",
            Scenario::Contraction => "contraction",
            Scenario::Uniqueness => "uniqueness",
            Scenario::RenormCheck => "renorm-check",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConfigErrorKind {
    Syntax,
    UnknownKey,
    TypeMismatch,
    Constraint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    /// 1-based; 0 when no single line is responsible.
    pub line: usize,
    pub kind: ConfigErrorKind,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "line {}: {}", self.line, self.message)
        } else {
            f.write_str(&self.message)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub seed: u64,
    #[serde(skip)]
    pub output_dir: PathBuf,

    pub dim: usize,
    pub v_extent: f64,
    pub nodes_per_axis: usize,

    /// One node means spatially homogeneous.
    pub x_nodes: usize,
    pub x_period: f64,

    pub sphere_order: usize,

    pub kernel: KernelForm,
    pub strength: f64,
    pub exponent: f64,

    pub horizon: f64,
    pub time_steps: usize,
    pub max_picard_iters: usize,
    pub residual_tol: f64,

    pub amplitude: f64,
    pub width: f64,
    pub drift: [f64; 3],
    pub modulation: f64,

    /// Rescale the kernel so the certified constant equals this value.
    pub target_l: Option<f64>,
    pub pairs: usize,
    pub perturbation_size: f64,
    pub runs: usize,
    pub beta: BetaFunction,

    /// Write a snapshot every this many time nodes; 0 writes the final one only.
    pub snapshot_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: Scenario::Solve,
            seed: 0,
            output_dir: PathBuf::from("kfix-out"),
            dim: 3,
            v_extent: 4.0,
            nodes_per_axis: 9,
            x_nodes: 1,
            x_period: 1.0,
            sphere_order: 6,
            kernel: KernelForm::HardSphere,
            strength: 1.0,
            exponent: 0.5,
            horizon: 0.5,
            time_steps: 4,
            max_picard_iters: 100,
            residual_tol: 1e-10,
            amplitude: 1.0,
            width: 1.0,
            drift: [0.0; 3],
            modulation: 0.2,
            target_l: None,
            pairs: 20,
            perturbation_size: 0.05,
            runs: 3,
            beta: BetaFunction::log1p(),
            snapshot_every: 0,
        }
    }
}

impl RunConfig {
    pub fn kernel_spec(&self) -> KernelSpec {
        match self.kernel {
            KernelForm::HardSphere => KernelSpec::hard_sphere(self.strength, self.dim),
            KernelForm::Maxwell => KernelSpec::maxwell(self.strength),
            KernelForm::VariableHardSphere => {
                KernelSpec::variable_hard_sphere(self.strength, self.exponent)
            }
        }
    }
}

#[derive(Clone, Copy)]
enum Kind {
    Int,
    Float,
    Str,
    FloatList,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::Int => "an integer",
            Kind::Float => "a number",
            Kind::Str => "a quoted string",
            Kind::FloatList => "a list of 2 or 3 numbers",
        }
    }
}

/// `(section, key, type)`; the empty section is the top level.
const KEYS: &[(&str, &str, Kind)] = &[
    ("", "scenario", Kind::Str),
    ("", "seed", Kind::Int),
    ("", "output_dir", Kind::Str),
    ("velocity", "dim", Kind::Int),
    ("velocity", "v_extent", Kind::Float),
    ("velocity", "nodes_per_axis", Kind::Int),
    ("space", "x_nodes", Kind::Int),
    ("space", "x_period", Kind::Float),
    ("sphere", "sphere_order", Kind::Int),
    ("kernel", "kernel", Kind::Str),
    ("kernel", "strength", Kind::Float),
    ("kernel", "exponent", Kind::Float),
    ("solver", "horizon", Kind::Float),
    ("solver", "time_steps", Kind::Int),
    ("solver", "max_picard_iters", Kind::Int),
    ("solver", "residual_tol", Kind::Float),
    ("initial", "amplitude", Kind::Float),
    ("initial", "width", Kind::Float),
    ("initial", "drift", Kind::FloatList),
    ("initial", "modulation", Kind::Float),
    ("experiment", "target_l", Kind::Float),
    ("experiment", "pairs", Kind::Int),
    ("experiment", "perturbation_size", Kind::Float),
    ("experiment", "runs", Kind::Int),
    ("experiment", "beta", Kind::Str),
    ("experiment", "beta_scale", Kind::Float),
    ("experiment", "beta_shift", Kind::Float),
    ("experiment", "beta_k", Kind::Float),
    ("output", "snapshot_every", Kind::Int),
];

#[derive(Debug, Clone)]
enum Typed {
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<f64>),
}

struct Collector<'a> {
    text: &'a str,
    errors: Vec<ConfigError>,
    values: BTreeMap<&'static str, (usize, Typed)>,
}

impl Collector<'_> {
    fn line_of(&self, offset: Option<usize>) -> usize {
        offset.map_or(0, |o| self.text[..o.min(self.text.len())].matches('\n').count() + 1)
    }

    fn push(&mut self, line: usize, kind: ConfigErrorKind, message: String) {
        self.errors.push(ConfigError { line, kind, message });
    }

    fn entry(&mut self, section: &str, table: &Table, key: &str, item: &Item) {
        let offset = table
            .key(key)
            .and_then(|k| k.span())
            .or_else(|| item.span())
            .map(|r| r.start);
        let line = self.line_of(offset);
        let Some(&(home, name, kind)) = KEYS.iter().find(|(_, k, _)| *k == key) else {
            let place = if section.is_empty() {
                String::new()
            } else {
                format!(" in section [{section}]")
            };
            self.push(line, ConfigErrorKind::UnknownKey, format!("unknown key `{key}`{place}"));
            return;
        };
        if !section.is_empty() && section != home {
            let msg = if home.is_empty() {
                format!("key `{key}` belongs at the top level, not in [{section}]")
            } else {
                format!("key `{key}` belongs in section [{home}], not [{section}]")
            };
            self.push(line, ConfigErrorKind::UnknownKey, msg);
            return;
        }
        let Some(value) = item.as_value() else {
            self.push(
                line,
                ConfigErrorKind::TypeMismatch,
                format!("`{key}` must be {}", kind.describe()),
            );
            return;
        };
        match typed(value, kind) {
            Some(t) => {
                self.values.insert(name, (line, t));
            }
            None => self.push(
                line,
                ConfigErrorKind::TypeMismatch,
                format!("`{key}` must be {}, found {}", kind.describe(), value.type_name()),
            ),
        }
    }
}

fn typed(value: &Value, kind: Kind) -> Option<Typed> {
    match kind {
        Kind::Int => value.as_integer().map(Typed::Int),
        Kind::Float => value
            .as_float()
            .or_else(|| value.as_integer().map(|i| i as f64))
            .map(Typed::Float),
        Kind::Str => value.as_str().map(|s| Typed::Str(s.to_string())),
        Kind::FloatList => {
            let arr = value.as_array()?;
            let xs: Option<Vec<f64>> = arr
                .iter()
                .map(|v| v.as_float().or_else(|| v.as_integer().map(|i| i as f64)))
                .collect();
            xs.filter(|x| x.len() == 2 || x.len() == 3).map(Typed::List)
        }
    }
}

/// Validating setter: reads a typed value and applies the constraint.
struct Fill<'a> {
    values: &'a BTreeMap<&'static str, (usize, Typed)>,
    errors: &'a mut Vec<ConfigError>,
}

impl Fill<'_> {
    fn fail(&mut self, line: usize, message: String) {
        self.errors.push(ConfigError {
            line,
            kind: ConfigErrorKind::Constraint,
            message,
        });
    }

    fn float(&mut self, key: &str, slot: &mut f64, ok: impl Fn(f64) -> bool, rule: &str) {
        if let Some((line, Typed::Float(x))) = self.values.get(key) {
            if x.is_finite() && ok(*x) {
                *slot = *x;
            } else {
                self.fail(*line, format!("`{key}` = {x}: {rule}"));
            }
        }
    }

    fn int(&mut self, key: &str, slot: &mut usize, ok: impl Fn(i64) -> bool, rule: &str) {
        if let Some((line, Typed::Int(x))) = self.values.get(key) {
            if *x >= 0 && ok(*x) {
                *slot = *x as usize;
            } else {
                self.fail(*line, format!("`{key}` = {x}: {rule}"));
            }
        }
    }

    fn string(&self, key: &str) -> Option<(usize, String)> {
        match self.values.get(key) {
            Some((line, Typed::Str(s))) => Some((*line, s.clone())),
            _ => None,
        }
    }

    fn line(&self, key: &str) -> usize {
        self.values.get(key).map_or(0, |(l, _)| *l)
    }
}

/// Parses and validates a configuration; returns every error found.
pub fn parse_config(text: &str) -> Result<RunConfig, Vec<ConfigError>> {
    let doc = match Document::parse(text) {
        Ok(d) => d,
        Err(e) => {
            let line = e
                .span()
                .map_or(0, |r| text[..r.start.min(text.len())].matches('\n').count() + 1);
            let detail = e.message().trim().to_string();
            return Err(vec![ConfigError {
                line,
                kind: ConfigErrorKind::Syntax,
                message: format!("syntax error: {detail}"),
            }]);
        }
    };
    let mut c = Collector {
        text,
        errors: Vec::new(),
        values: BTreeMap::new(),
    };
    let root = doc.as_table();
    for (key, item) in root.iter() {
        match item {
            Item::Table(section) => {
                let known = KEYS.iter().any(|(s, _, _)| !s.is_empty() && *s == key);
                if !known {
                    let offset = root.key(key).and_then(|k| k.span()).map(|r| r.start);
                    let line = c.line_of(offset);
                    c.push(line, ConfigErrorKind::UnknownKey, format!("unknown section [{key}]"));
                    continue;
                }
                for (k, it) in section.iter() {
                    c.entry(key, section, k, it);
                }
            }
            _ => c.entry("", root, key, item),
        }
    }
    let Collector {
        mut errors, values, ..
    } = c;
    let mut cfg = RunConfig::default();
    let mut f = Fill {
        values: &values,
        errors: &mut errors,
    };

    if let Some((line, s)) = f.string("scenario") {
        match Scenario::parse(&s) {
            Some(sc) => cfg.scenario = sc,
            None => f.fail(
                line,
                format!(
                    "`scenario` = \"{s}\": expected one of {}",
                    Scenario::ALL.map(|s| s.name()).join(", ")
                ),
            ),
        }
    }
    if let Some((line, Typed::Int(x))) = values.get("seed") {
        if *x >= 0 {
            cfg.seed = *x as u64;
        } else {
            f.fail(*line, format!("`seed` = {x}: must be nonnegative"));
        }
    }
    if let Some((_, s)) = f.string("output_dir") {
        cfg.output_dir = PathBuf::from(s);
    }

    f.int("dim", &mut cfg.dim, |d| d == 2 || d == 3, "must be 2 or 3");
    f.float("v_extent", &mut cfg.v_extent, |x| x > 0.0, "must be positive");
    f.int(
        "nodes_per_axis",
        &mut cfg.nodes_per_axis,
        |n| n >= 5 && n % 2 == 1,
        "must be odd and at least 5 so that v = 0 is a grid node",
    );
    f.int("x_nodes", &mut cfg.x_nodes, |n| n >= 1, "must be at least 1");
    f.float("x_period", &mut cfg.x_period, |x| x > 0.0, "must be positive");
    f.int("sphere_order", &mut cfg.sphere_order, |n| n >= 4, "must be at least 4");
    if let Some((line, s)) = f.string("kernel") {
        match KernelForm::parse(&s) {
            Some(k) => cfg.kernel = k,
            None => f.fail(
                line,
                format!("`kernel` = \"{s}\": expected hard_sphere, maxwell or variable_hard_sphere"),
            ),
        }
    }
    f.float("strength", &mut cfg.strength, |x| x >= 0.0, "must be nonnegative");
    f.float("exponent", &mut cfg.exponent, |x| (0.0..=1.0).contains(&x), "must lie in [0, 1]");
    f.float("horizon", &mut cfg.horizon, |x| x > 0.0, "must be positive");
    f.int("time_steps", &mut cfg.time_steps, |n| n >= 1, "must be at least 1");
    f.int("max_picard_iters", &mut cfg.max_picard_iters, |n| n >= 1, "must be at least 1");
    f.float("residual_tol", &mut cfg.residual_tol, |x| x > 0.0, "must be positive");
    f.float("amplitude", &mut cfg.amplitude, |x| x >= 0.0, "must be nonnegative");
    f.float("width", &mut cfg.width, |x| x > 0.0, "must be positive");
    if let Some((line, Typed::List(xs))) = values.get("drift") {
        if xs.iter().all(|x| x.is_finite()) {
            cfg.drift = [xs[0], xs[1], xs.get(2).copied().unwrap_or(0.0)];
        } else {
            f.fail(*line, "`drift` entries must be finite".into());
        }
    }
    f.float("modulation", &mut cfg.modulation, |x| (0.0..1.0).contains(&x), "must lie in [0, 1)");
    let mut target = f64::NAN;
    f.float("target_l", &mut target, |x| x > 0.0 && x < 1.0, "must lie in (0, 1)");
    if target.is_finite() {
        cfg.target_l = Some(target);
    }
    f.int("pairs", &mut cfg.pairs, |n| n >= 1, "must be at least 1");
    f.float("perturbation_size", &mut cfg.perturbation_size, |x| x > 0.0, "must be positive");
    f.int("runs", &mut cfg.runs, |n| n >= 1, "must be at least 1");
    let (mut scale, mut shift, mut k) = (1.0, 0.0, 10.0);
    f.float("beta_scale", &mut scale, |x| x > 0.0, "must be positive");
    f.float("beta_shift", &mut shift, |_| true, "must be finite");
    f.float("beta_k", &mut k, |x| x > 0.0, "must be positive");
    let beta_name = f.string("beta").map_or("log1p".to_string(), |(_, s)| s);
    match BetaFunction::from_name(&beta_name, scale, shift, k) {
        Ok(b) => cfg.beta = b,
        Err(_) => {
            let line = f.line("beta");
            f.fail(
                line,
                format!("`beta` = \"{beta_name}\": expected log1p, scaled_log1p or custom_rational"),
            );
        }
    }
    f.int("snapshot_every", &mut cfg.snapshot_every, |_| true, "must be nonnegative");

    if errors.is_empty() {
        Ok(cfg)
    } else {
        errors.sort_by_key(|e| e.line);
        Err(errors)
    }
}
