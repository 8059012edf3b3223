//! Scenario files.
//!
//! A scenario is a flat `key = value` document, one entry per line. `#`
//! starts a comment that runs to the end of the line; blank lines are
//! ignored. List-valued keys take comma-separated values, and numbers use
//! the usual decimal or exponent notation (`30`, `1e5`, `2.5e-3`).
//!
//! | key              | type        | default          |
//! |------------------|-------------|------------------|
//! | `name`           | text        | `sweep`          |
//! | `k`              | int list    | required         |
//! | `r`              | int list    | required         |
//! | `n_b`, `n_e`     | int         | `2k` each        |
//! | `delta`          | real list   | required         |
//! | `budget`         | real list   | required         |
//! | `algorithms`     | list of `ao`, `ris_only`, `pa_only` | all three |
//! | `seed`           | u64         | `1`              |
//! | `trials`         | int         | `1000`           |
//! | `noise_variance` | real        | `1e-5`           |
//! | `include_los`    | bool        | `false`          |
//! | `regime`         | `unit_modulus` or `bounded_magnitude` | `unit_modulus` |
//! | `channel`        | `random` or `identity` | `random` |
//! | `output`         | path        | `<name>.csv`     |
//! | `draws`          | int (`L`)   | `1000`           |
//! | `epsilon`        | real        | `0.1`            |
//! | `n_max`          | int         | `20`             |
//! | `starts`         | int         | `1`              |
//! | `gr_policy`      | `first_feasible` or `best_feasible` | `first_feasible` |
//! | `polish`         | bool        | `true`           |
//! | `local_search`   | bool        | `true`           |
//! | `delta_min`      | bool        | `true` when `ris_only` runs |
//!
//! The `identity` channel is a test fixture: `n_b = n_e = r`, both RIS
//! links are `I_r` and every entry of `H_ar` is one, so with equal power
//! Eve's quadratic form is `(P_Σ / σ²) I_r`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ris_core::altopt::Algorithm;
use ris_core::design::GrPolicy;
use ris_core::Regime;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, field: &str, message: impl Into<String>) -> Self {
        Self {
            line: Some(line),
            field: Some(field.to_string()),
            message: message.into(),
        }
    }

    fn field(field: &str, message: impl Into<String>) -> Self {
        Self {
            line: None,
            field: Some(field.to_string()),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.line, &self.field) {
            (Some(l), Some(k)) => write!(f, "line {l}, field `{k}`: {}", self.message),
            (Some(l), None) => write!(f, "line {l}: {}", self.message),
            (None, Some(k)) => write!(f, "field `{k}`: {}", self.message),
            (None, None) => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Random,
    Identity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub k: Vec<usize>,
    pub r: Vec<usize>,
    pub n_b: Option<usize>,
    pub n_e: Option<usize>,
    pub delta: Vec<f64>,
    pub budget: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub seed: u64,
    pub trials: usize,
    pub noise_variance: f64,
    pub include_los: bool,
    pub regime: Regime,
    pub channel: ChannelKind,
    pub output: PathBuf,
    pub draws: usize,
    pub epsilon: f64,
    pub n_max: usize,
    pub starts: usize,
    pub gr_policy: GrPolicy,
    pub polish: bool,
    pub local_search: bool,
    pub delta_min: bool,
}

const KEYS: &[&str] = &[
    "name",
    "k",
    "r",
    "n_b",
    "n_e",
    "delta",
    "budget",
    "algorithms",
    "seed",
    "trials",
    "noise_variance",
    "include_los",
    "regime",
    "channel",
    "output",
    "draws",
    "epsilon",
    "n_max",
    "starts",
    "gr_policy",
    "polish",
    "local_search",
    "delta_min",
];

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn scalar<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse::<T>()
                .map(Some)
                .map_err(|_| ConfigError::at(line, key, format!("expected {what}, got `{v}`"))),
        }
    }

    fn list<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<Vec<T>>, ConfigError> {
        let Some((line, v)) = self.raw(key) else {
            return Ok(None);
        };
        let mut out = Vec::new();
        for (i, item) in v.split(',').enumerate() {
            let item = item.trim();
            if item.is_empty() {
                return Err(ConfigError::at(line, key, format!("empty list item {}", i + 1)));
            }
            out.push(
                item.parse::<T>()
                    .map_err(|_| ConfigError::at(line, key, format!("expected {what}, got `{item}`")))?,
            );
        }
        Ok(Some(out))
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((_, "true")) => Ok(Some(true)),
            Some((_, "false")) => Ok(Some(false)),
            Some((line, v)) => Err(ConfigError::at(line, key, format!("expected true or false, got `{v}`"))),
        }
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)]) -> Result<Option<T>, ConfigError> {
        let Some((line, v)) = self.raw(key) else {
            return Ok(None);
        };
        options
            .iter()
            .find(|(name, _)| *name == v)
            .map(|(_, t)| Some(*t))
            .ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                ConfigError::at(line, key, format!("expected one of {}, got `{v}`", names.join(", ")))
            })
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.map.get(key).map(|(l, _)| *l)
    }
}

fn split_entries(text: &str) -> Result<Entries, ConfigError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(ConfigError {
                line: Some(line),
                field: None,
                message: format!("expected `key = value`, got `{content}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            return Err(ConfigError::at(line, key, "unknown key"));
        }
        if value.is_empty() {
            return Err(ConfigError::at(line, key, "missing value"));
        }
        if let Some((first, _)) = map.get(key) {
            return Err(ConfigError::at(
                line,
                key,
                format!("duplicate key (first set on line {first})"),
            ));
        }
        map.insert(key.to_string(), (line, value.to_string()));
    }
    Ok(Entries { map })
}

const ALGORITHMS: &[(&str, Algorithm)] = &[
    ("ao", Algorithm::Ao),
    ("ris_only", Algorithm::RisOnly),
    ("pa_only", Algorithm::PaOnly),
];

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let e = split_entries(text)?;
        let required = |key: &str| ConfigError::field(key, "required key is missing");

        let name: String = e.scalar("name", "text")?.unwrap_or_else(|| "sweep".to_string());
        let algorithms = match e.raw("algorithms") {
            None => ALGORITHMS.iter().map(|(_, a)| *a).collect(),
            Some((line, v)) => {
                let mut out = Vec::new();
                for item in v.split(',').map(str::trim) {
                    let alg = ALGORITHMS
                        .iter()
                        .find(|(n, _)| *n == item)
                        .map(|(_, a)| *a)
                        .ok_or_else(|| ConfigError::at(line, "algorithms", format!("unknown algorithm `{item}`")))?;
                    if out.contains(&alg) {
                        return Err(ConfigError::at(line, "algorithms", format!("`{item}` listed twice")));
                    }
                    out.push(alg);
                }
                out
            }
        };
        let channel = e
            .choice(
                "channel",
                &[("random", ChannelKind::Random), ("identity", ChannelKind::Identity)],
            )?
            .unwrap_or(ChannelKind::Random);
        let cfg = ScenarioConfig {
            output: e
                .scalar::<String>("output", "path")?
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from(format!("{name}.csv"))),
            name,
            k: e.list("k", "positive integer")?.ok_or_else(|| required("k"))?,
            r: e.list("r", "positive integer")?.ok_or_else(|| required("r"))?,
            n_b: e.scalar("n_b", "positive integer")?,
            n_e: e.scalar("n_e", "positive integer")?,
            delta: e.list("delta", "real number")?.ok_or_else(|| required("delta"))?,
            budget: e.list("budget", "real number")?.ok_or_else(|| required("budget"))?,
            delta_min: e
                .boolean("delta_min")?
                .unwrap_or(algorithms.contains(&Algorithm::RisOnly)),
            algorithms,
            seed: e.scalar("seed", "unsigned 64-bit integer")?.unwrap_or(1),
            trials: e.scalar("trials", "positive integer")?.unwrap_or(1000),
            noise_variance: e.scalar("noise_variance", "real number")?.unwrap_or(1e-5),
            include_los: e.boolean("include_los")?.unwrap_or(false),
            regime: e
                .choice(
                    "regime",
                    &[
                        ("unit_modulus", Regime::UnitModulus),
                        ("bounded_magnitude", Regime::BoundedMagnitude),
                    ],
                )?
                .unwrap_or(Regime::UnitModulus),
            channel,
            draws: e.scalar("draws", "integer greater than 1")?.unwrap_or(1000),
            epsilon: e.scalar("epsilon", "real number")?.unwrap_or(0.1),
            n_max: e.scalar("n_max", "positive integer")?.unwrap_or(20),
            starts: e.scalar("starts", "positive integer")?.unwrap_or(1),
            gr_policy: e
                .choice(
                    "gr_policy",
                    &[
                        ("first_feasible", GrPolicy::FirstFeasible),
                        ("best_feasible", GrPolicy::BestFeasible),
                    ],
                )?
                .unwrap_or(GrPolicy::FirstFeasible),
            polish: e.boolean("polish")?.unwrap_or(true),
            local_search: e.boolean("local_search")?.unwrap_or(true),
        };
        cfg.check(&e)?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|err| ConfigError {
            line: None,
            field: None,
            message: format!("cannot read {}: {err}", path.display()),
        })?;
        Self::parse(&text)
    }

    fn check(&self, e: &Entries) -> Result<(), ConfigError> {
        let fail = |key: &str, msg: String| match e.line(key) {
            Some(l) => ConfigError::at(l, key, msg),
            None => ConfigError::field(key, msg),
        };
        for (key, list) in [("k", &self.k), ("r", &self.r)] {
            if list.contains(&0) {
                return Err(fail(key, "values must be positive".into()));
            }
        }
        for (key, v) in [("n_b", self.n_b), ("n_e", self.n_e)] {
            if v == Some(0) {
                return Err(fail(key, "must be positive".into()));
            }
        }
        if let Some(d) = self.delta.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(fail("delta", format!("values must be finite and nonnegative, got {d}")));
        }
        if let Some(b) = self.budget.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
            return Err(fail("budget", format!("values must be finite and positive, got {b}")));
        }
        if self.algorithms.is_empty() {
            return Err(fail("algorithms", "at least one algorithm is required".into()));
        }
        if self.trials == 0 {
            return Err(fail("trials", "must be at least 1".into()));
        }
        if !(self.noise_variance.is_finite() && self.noise_variance > 0.0) {
            return Err(fail("noise_variance", "must be finite and positive".into()));
        }
        if self.draws < 2 {
            return Err(fail("draws", "must exceed 1".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(fail("epsilon", "must be positive".into()));
        }
        if self.n_max == 0 {
            return Err(fail("n_max", "must be at least 1".into()));
        }
        if self.starts == 0 {
            return Err(fail("starts", "must be at least 1".into()));
        }
        if self.channel == ChannelKind::Identity {
            if self.include_los {
                return Err(fail("channel", "the identity fixture has no direct paths".into()));
            }
            if self.n_b.is_some() || self.n_e.is_some() {
                return Err(fail("channel", "the identity fixture fixes n_b = n_e = r".into()));
            }
        }
        Ok(())
    }

    /// Number of sweep points, before multiplying by algorithms.
    pub fn points(&self) -> usize {
        self.k.len() * self.r.len() * self.budget.len() * self.delta.len()
    }
}
