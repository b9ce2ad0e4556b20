use std::collections::HashMap;
use std::fmt;

use nalgebra::DVector;

use crate::descent::{OptimizerKind, ScheduleKind};
use crate::families::{ExponentialFamily, ScalarFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Equiv,
    CrossEquiv,
    Efficiency,
    Trajectory,
    Identities,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Equiv => "equiv",
            Command::CrossEquiv => "cross-equiv",
            Command::Efficiency => "efficiency",
            Command::Trajectory => "trajectory",
            Command::Identities => "identities",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "equiv" => Some(Command::Equiv),
            "cross-equiv" => Some(Command::CrossEquiv),
            "efficiency" => Some(Command::Efficiency),
            "trajectory" => Some(Command::Trajectory),
            "identities" => Some(Command::Identities),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitChoice {
    FirstObservation,
    /// Mean coordinates.
    Fixed(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub family: String,
    pub dim: usize,
    /// Only for `family=product`.
    pub components: Vec<ScalarFamily>,
    /// True parameter, mean coordinates.
    pub mu: Option<DVector<f64>>,
    pub optimizer: OptimizerKind,
    pub schedule: ScheduleKind,
    pub scale: f64,
    pub horizon: usize,
    pub replicates: usize,
    pub seed: u64,
    pub tolerance: Option<f64>,
    pub samples: usize,
    pub init: InitChoice,
    pub out: Option<String>,
    pub per_replicate: bool,
    pub parallel: bool,
}

impl ExperimentConfig {
    pub fn build_family(&self) -> crate::Result<ExponentialFamily> {
        match self.family.as_str() {
            "product" => ExponentialFamily::product(self.components.clone()),
            name => {
                let scalar = ScalarFamily::from_name(name)
                    .ok_or_else(|| crate::Error::Invalid(format!("unknown family '{name}'")))?;
                ExponentialFamily::iid(scalar, self.dim)
            }
        }
    }

    /// Canonical `key=value` text; parses back to an equal config.
    pub fn to_config_text(&self) -> String {
        let mut lines = vec![
            format!("command={}", self.command.name()),
            format!("family={}", self.family),
        ];
        if self.family == "product" {
            lines.push(format!(
                "components={}",
                self.components.iter().map(|c| c.name()).collect::<Vec<_>>().join(";")
            ));
        } else {
            lines.push(format!("dim={}", self.dim));
        }
        if let Some(mu) = &self.mu {
            lines.push(format!("mu={}", join(mu)));
        }
        lines.push(format!("optimizer={}", self.optimizer.name()));
        lines.push(format!("schedule={}", self.schedule.name()));
        lines.push(format!("scale={}", self.scale));
        lines.push(format!("T={}", self.horizon));
        lines.push(format!("M={}", self.replicates));
        lines.push(format!("seed={}", self.seed));
        if let Some(t) = self.tolerance {
            lines.push(format!("tolerance={t}"));
        }
        lines.push(format!("samples={}", self.samples));
        match &self.init {
            InitChoice::FirstObservation => lines.push("init=first_observation".into()),
            InitChoice::Fixed(v) => {
                lines.push("init=fixed".into());
                lines.push(format!("init_value={}", join(v)));
            }
        }
        if let Some(out) = &self.out {
            lines.push(format!("out={out}"));
        }
        lines.push(format!("per_replicate={}", self.per_replicate));
        lines.push(format!("parallel={}", self.parallel));
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }
}

fn join(v: &DVector<f64>) -> String {
    v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(";")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{} (line {l})", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

const KEYS: &[&str] = &[
    "command",
    "family",
    "dim",
    "components",
    "mu",
    "optimizer",
    "schedule",
    "scale",
    "T",
    "M",
    "seed",
    "tolerance",
    "samples",
    "init",
    "init_value",
    "out",
    "per_replicate",
    "parallel",
];

struct Collector {
    errors: Vec<ConfigError>,
}

impl Collector {
    fn push(&mut self, line: Option<usize>, message: impl Into<String>) {
        self.errors.push(ConfigError {
            line,
            message: message.into(),
        });
    }
}

/// Parses a flat `key=value` document (`#` comments, blank lines ignored,
/// repeated keys rejected) and validates it. Returns every error found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, Vec<ConfigError>> {
    let mut errs = Collector { errors: Vec::new() };
    let mut entries: HashMap<&str, (String, usize)> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            errs.push(Some(line_no), format!("expected key=value, got '{line}'"));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(&key) = KEYS.iter().find(|&&known| known == k) else {
            errs.push(Some(line_no), format!("unknown key '{k}'"));
            continue;
        };
        if let Some((_, first)) = entries.get(key) {
            errs.push(Some(line_no), format!("repeated key '{key}' (first set on line {first})"));
            continue;
        }
        entries.insert(key, (v.to_string(), line_no));
    }

    let get = |k: &str| entries.get(k).map(|(v, l)| (v.as_str(), *l));

    fn number<T: std::str::FromStr>(errs: &mut Collector, key: &str, v: &str, line: usize) -> Option<T> {
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(_) => {
                errs.push(Some(line), format!("malformed number '{v}' for {key}"));
                None
            }
        }
    }

    fn vector(errs: &mut Collector, key: &str, v: &str, line: usize) -> Option<DVector<f64>> {
        let parts: Vec<&str> = v.split([';', ',']).map(str::trim).collect();
        let mut out = Vec::with_capacity(parts.len());
        for p in parts {
            match p.parse::<f64>() {
                Ok(x) if x.is_finite() => out.push(x),
                _ => {
                    errs.push(Some(line), format!("malformed number '{p}' for {key}"));
                    return None;
                }
            }
        }
        Some(DVector::from_vec(out))
    }

    fn boolean(errs: &mut Collector, key: &str, v: &str, line: usize) -> Option<bool> {
        match v {
            "true" | "1" | "yes" => Some(true),
            "false" | "0" | "no" => Some(false),
            _ => {
                errs.push(Some(line), format!("malformed boolean '{v}' for {key}"));
                None
            }
        }
    }

    let command = match get("command") {
        Some((v, l)) => Command::from_name(v).or_else(|| {
            errs.push(Some(l), format!("unknown command '{v}'"));
            None
        }),
        None => {
            errs.push(None, "missing required key 'command'");
            None
        }
    };

    let family = match get("family") {
        Some((v, l)) => {
            if v == "product" || ScalarFamily::from_name(v).is_some() {
                Some(v.to_string())
            } else {
                errs.push(Some(l), format!("unknown family '{v}'"));
                None
            }
        }
        None => {
            errs.push(None, "missing required key 'family'");
            None
        }
    };

    let mut components = Vec::new();
    if let Some((v, l)) = get("components") {
        for name in v.split([';', ',']).map(str::trim) {
            match ScalarFamily::from_name(name) {
                Some(c) => components.push(c),
                None => errs.push(Some(l), format!("unknown family '{name}' in components")),
            }
        }
    }

    let mut dim = 1usize;
    if let Some((v, l)) = get("dim") {
        if let Some(d) = number::<usize>(&mut errs, "dim", v, l) {
            if d == 0 {
                errs.push(Some(l), "dim must be ≥ 1");
            }
            dim = d;
        }
    }
    match family.as_deref() {
        Some("product") => {
            if get("components").is_none() {
                errs.push(None, "family=product requires 'components'");
            } else if let Some((_, l)) = get("dim") {
                if dim != components.len() {
                    errs.push(Some(l), format!("dim={dim} disagrees with {} components", components.len()));
                }
            }
            dim = components.len().max(1);
        }
        Some(_) => {
            if let Some((_, l)) = get("components") {
                errs.push(Some(l), "'components' is only valid with family=product");
            }
        }
        None => {}
    }

    let optimizer = match get("optimizer") {
        Some((v, l)) => OptimizerKind::from_name(v).unwrap_or_else(|| {
            errs.push(Some(l), format!("unknown optimizer '{v}'"));
            OptimizerKind::Natural
        }),
        None => OptimizerKind::Natural,
    };
    let schedule = match get("schedule") {
        Some((v, l)) => ScheduleKind::from_name(v).unwrap_or_else(|| {
            errs.push(Some(l), format!("unknown schedule '{v}'"));
            ScheduleKind::InverseT
        }),
        None => ScheduleKind::InverseT,
    };

    let mut scale = 1.0;
    if let Some((v, l)) = get("scale") {
        if let Some(s) = number::<f64>(&mut errs, "scale", v, l) {
            if !(s > 0.0 && s.is_finite()) {
                errs.push(Some(l), format!("scale must be > 0, got {v}"));
            }
            scale = s;
        }
    }
    let mut horizon = 1000usize;
    if let Some((v, l)) = get("T") {
        if let Some(t) = number::<usize>(&mut errs, "T", v, l) {
            if t == 0 {
                errs.push(Some(l), "T must be ≥ 1");
            }
            horizon = t;
        }
    }
    let mut replicates = 100usize;
    if let Some((v, l)) = get("M") {
        if let Some(m) = number::<usize>(&mut errs, "M", v, l) {
            if m == 0 {
                errs.push(Some(l), "M must be ≥ 1");
            }
            replicates = m;
        }
    }
    let mut seed = 0u64;
    if let Some((v, l)) = get("seed") {
        if let Some(s) = number::<u64>(&mut errs, "seed", v, l) {
            seed = s;
        }
    }
    let mut tolerance = None;
    if let Some((v, l)) = get("tolerance") {
        if let Some(t) = number::<f64>(&mut errs, "tolerance", v, l) {
            if !(t > 0.0 && t.is_finite()) {
                errs.push(Some(l), format!("tolerance must be > 0, got {v}"));
            }
            tolerance = Some(t);
        }
    }
    let mut samples = 1000usize;
    if let Some((v, l)) = get("samples") {
        if let Some(s) = number::<usize>(&mut errs, "samples", v, l) {
            if s == 0 {
                errs.push(Some(l), "samples must be ≥ 1");
            }
            samples = s;
        }
    }
    let mut per_replicate = false;
    if let Some((v, l)) = get("per_replicate") {
        per_replicate = boolean(&mut errs, "per_replicate", v, l).unwrap_or(false);
    }
    let mut parallel = true;
    if let Some((v, l)) = get("parallel") {
        parallel = boolean(&mut errs, "parallel", v, l).unwrap_or(true);
    }
    let out = get("out").map(|(v, _)| v.to_string());

    // Mean-coordinate vectors are checked against the family's open domain.
    let domain_family = family.as_ref().and_then(|name| {
        let cfg_family = if name == "product" {
            if components.is_empty() {
                return None;
            }
            ExponentialFamily::product(components.clone())
        } else {
            ExponentialFamily::iid(ScalarFamily::from_name(name)?, dim.max(1))
        };
        cfg_family.ok()
    });
    let check_mean = |errs: &mut Collector, key: &str, v: &DVector<f64>, line: usize| {
        let Some(fam) = &domain_family else { return };
        if v.len() != fam.dim() {
            errs.push(Some(line), format!("{key} has {} coordinates, family has {}", v.len(), fam.dim()));
            return;
        }
        let domain = fam.pair().dual_domain();
        for (i, (b, &x)) in domain.bounds().iter().zip(v.iter()).enumerate() {
            if !b.contains(x) {
                if fam.dim() == 1 {
                    errs.push(Some(line), format!("{key} outside open domain {b}"));
                } else {
                    errs.push(Some(line), format!("{key} coordinate {i} outside open domain {b}"));
                }
            }
        }
    };

    let mu = match get("mu") {
        Some((v, l)) => vector(&mut errs, "mu", v, l).inspect(|m| check_mean(&mut errs, "mu", m, l)),
        None => {
            if command.is_some_and(|c| c != Command::Identities) {
                errs.push(None, "missing required key 'mu'");
            }
            None
        }
    };

    let init = match get("init") {
        Some(("first_observation", _)) | None => {
            if let Some((_, l)) = get("init_value") {
                errs.push(Some(l), "init_value requires init=fixed");
            }
            InitChoice::FirstObservation
        }
        Some(("fixed", l)) => match get("init_value") {
            Some((v, lv)) => match vector(&mut errs, "init_value", v, lv) {
                Some(x) => {
                    check_mean(&mut errs, "init_value", &x, lv);
                    InitChoice::Fixed(x)
                }
                None => InitChoice::FirstObservation,
            },
            None => {
                errs.push(Some(l), "init=fixed requires init_value");
                InitChoice::FirstObservation
            }
        },
        Some((v, l)) => {
            errs.push(Some(l), format!("unknown init mode '{v}'"));
            InitChoice::FirstObservation
        }
    };

    if !errs.errors.is_empty() {
        return Err(errs.errors);
    }
    Ok(ExperimentConfig {
        command: command.expect("validated"),
        family: family.expect("validated"),
        dim,
        components,
        mu,
        optimizer,
        schedule,
        scale,
        horizon,
        replicates,
        seed,
        tolerance,
        samples,
        init,
        out,
        per_replicate,
        parallel,
    })
}
