//! Experiment configuration: TOML in, fully resolved TOML out.
//!
//! Parsing walks a `toml::Table` by hand so that every error names the
//! offending key path and unknown keys get a spelling suggestion.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sha1::{Digest, Sha1};
use toml::{Table, Value};

use crate::env::GridConfig;
use crate::error::{Error, Result};
use crate::qsim::KappaSchedule;
use crate::trainer::EpsilonSchedule;
use crate::vd::{MixerKind, TargetUpdate};

#[derive(Debug, Clone, PartialEq)]
pub enum EnvConfig {
    Climbing,
    Gridworld(GridConfig),
}

impl EnvConfig {
    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Climbing => "climbing",
            EnvConfig::Gridworld(_) => "gridworld",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Greedy TD target (QMIX/VDN baseline).
    Greedy,
    Qsim,
    /// Uniform weights over the near-greedy set (`κ = 0`, nothing masked).
    QsimMean,
    /// Requires `top_n`.
    QsimTopN,
    /// Encoder ignores the global state.
    QsimNoState,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Greedy, Variant::Qsim, Variant::QsimMean, Variant::QsimTopN, Variant::QsimNoState];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Greedy => "greedy",
            Variant::Qsim => "qsim",
            Variant::QsimMean => "qsim-mean",
            Variant::QsimTopN => "qsim-topn",
            Variant::QsimNoState => "qsim-nostate",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn uses_encoder(self) -> bool {
        self != Variant::Greedy
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig {
    pub agent_hidden: Vec<usize>,
    pub mixer_embed: usize,
    pub hyper_hidden: usize,
    pub ae_hidden: usize,
    pub ae_embed: usize,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self { agent_hidden: vec![64], mixer_embed: 32, hyper_hidden: 64, ae_hidden: 128, ae_embed: 16 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvConfig,
    pub variant: Variant,
    pub mixer: MixerKind,
    pub kappa: KappaSchedule,
    pub threshold: f64,
    pub top_n: Option<usize>,
    pub use_state: bool,
    pub double_q: bool,
    pub gamma: f64,
    pub lr: f64,
    pub grad_clip: Option<f64>,
    pub buffer: usize,
    pub batch_size: usize,
    pub epsilon: EpsilonSchedule,
    pub target_update: TargetUpdate,
    pub reward_standardization: bool,
    pub step_max: u64,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    pub export_embeddings: bool,
    pub network: NetworkConfig,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    /// Defaults for everything except the three required keys.
    pub fn defaults(env: EnvConfig, variant: Variant, seeds: Vec<u64>) -> Self {
        let climbing = env == EnvConfig::Climbing;
        Self {
            env,
            variant,
            mixer: MixerKind::Qmix,
            kappa: KappaSchedule::default(),
            threshold: 0.0,
            top_n: None,
            use_state: true,
            double_q: true,
            gamma: 0.99,
            lr: 0.0005,
            grad_clip: Some(10.0),
            buffer: 5000,
            batch_size: 32,
            epsilon: EpsilonSchedule { start: 1.0, end: 0.05, anneal_steps: if climbing { 50_000 } else { 200_000 } },
            target_update: if climbing { TargetUpdate::Soft { tau: 0.01 } } else { TargetUpdate::Hard { interval: 200 } },
            reward_standardization: climbing,
            step_max: 50_000,
            eval_interval: 1000,
            eval_episodes: 32,
            export_embeddings: false,
            network: NetworkConfig::default(),
            seeds,
            output_dir: PathBuf::from("runs"),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |path: &str, message: &str| Err(Error::Config { path: path.into(), message: message.into() });
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma", "must lie in (0, 1]");
        }
        match self.kappa {
            KappaSchedule::Constant { value } if !(value >= 0.0 && value.is_finite()) => {
                return bad("kappa.value", "must be a finite non-negative number")
            }
            KappaSchedule::Linear { start, end, horizon } => {
                if !(start >= 0.0 && end >= 0.0 && start.is_finite() && end.is_finite()) {
                    return bad("kappa", "start and end must be finite and non-negative");
                }
                if horizon == 0 {
                    return bad("kappa.horizon", "must be positive");
                }
            }
            _ => {}
        }
        if !self.threshold.is_finite() {
            return bad("threshold", "must be finite");
        }
        if self.top_n == Some(0) {
            return bad("top_n", "must be positive");
        }
        if self.variant == Variant::QsimTopN && self.top_n.is_none() {
            return bad("top_n", "required by variant qsim-topn");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be positive");
        }
        if let Some(c) = self.grad_clip {
            if !(c > 0.0 && c.is_finite()) {
                return bad("grad_clip", "must be positive");
            }
        }
        if self.buffer == 0 {
            return bad("buffer", "must be positive");
        }
        if self.batch_size == 0 || self.batch_size > self.buffer {
            return bad("batch_size", "must be positive and at most `buffer`");
        }
        let e = &self.epsilon;
        if !((0.0..=1.0).contains(&e.start) && (0.0..=1.0).contains(&e.end)) {
            return bad("epsilon", "start and end must lie in [0, 1]");
        }
        if e.anneal_steps == 0 {
            return bad("epsilon.anneal_steps", "must be positive");
        }
        match self.target_update {
            TargetUpdate::Hard { interval: 0 } => return bad("target_update.interval", "must be positive"),
            TargetUpdate::Soft { tau } if !(tau > 0.0 && tau <= 1.0) => return bad("target_update.tau", "must lie in (0, 1]"),
            _ => {}
        }
        if self.eval_interval == 0 {
            return bad("eval_interval", "must be positive");
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes", "must be positive");
        }
        let n = &self.network;
        if n.agent_hidden.contains(&0) || [n.mixer_embed, n.hyper_hidden, n.ae_hidden, n.ae_embed].contains(&0) {
            return bad("network", "all widths must be positive");
        }
        if self.seeds.is_empty() {
            return bad("seeds", "must not be empty");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return bad("seeds", "must be distinct");
        }
        if let EnvConfig::Gridworld(g) = &self.env {
            g.validate().map_err(|e| match e {
                Error::Invalid { field, message } => Error::Config { path: field, message },
                other => other,
            })?;
        }
        Ok(())
    }

    /// Fully resolved TOML; `parse_config(&c.echo()) == c`.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let f = |x: f64| format!("{x:?}");
        let _ = writeln!(s, "env = \"{}\"", self.env.name());
        let _ = writeln!(s, "variant = \"{}\"", self.variant.name());
        let _ = writeln!(s, "mixer = \"{}\"", mixer_name(self.mixer));
        let _ = writeln!(s, "threshold = {}", f(self.threshold));
        if let Some(n) = self.top_n {
            let _ = writeln!(s, "top_n = {n}");
        }
        let _ = writeln!(s, "use_state = {}", self.use_state);
        let _ = writeln!(s, "double_q = {}", self.double_q);
        let _ = writeln!(s, "gamma = {}", f(self.gamma));
        let _ = writeln!(s, "lr = {}", f(self.lr));
        match self.grad_clip {
            Some(c) => {
                let _ = writeln!(s, "grad_clip = {}", f(c));
            }
            None => {
                let _ = writeln!(s, "grad_clip = false");
            }
        }
        let _ = writeln!(s, "buffer = {}", self.buffer);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "reward_standardization = {}", self.reward_standardization);
        let _ = writeln!(s, "step_max = {}", self.step_max);
        let _ = writeln!(s, "eval_interval = {}", self.eval_interval);
        let _ = writeln!(s, "eval_episodes = {}", self.eval_episodes);
        let _ = writeln!(s, "export_embeddings = {}", self.export_embeddings);
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let _ = writeln!(s, "seeds = [{}]", seeds.join(", "));
        let _ = writeln!(s, "output_dir = {}", Value::String(self.output_dir.to_string_lossy().into_owned()));

        s.push_str("\n[kappa]\n");
        match self.kappa {
            KappaSchedule::Constant { value } => {
                let _ = writeln!(s, "mode = \"constant\"\nvalue = {}", f(value));
            }
            KappaSchedule::Linear { start, end, horizon } => {
                let _ = writeln!(s, "mode = \"linear\"\nstart = {}\nend = {}\nhorizon = {horizon}", f(start), f(end));
            }
        }
        let e = &self.epsilon;
        let _ = writeln!(s, "\n[epsilon]\nstart = {}\nend = {}\nanneal_steps = {}", f(e.start), f(e.end), e.anneal_steps);
        match self.target_update {
            TargetUpdate::Hard { interval } => {
                let _ = writeln!(s, "\n[target_update]\nmode = \"hard\"\ninterval = {interval}");
            }
            TargetUpdate::Soft { tau } => {
                let _ = writeln!(s, "\n[target_update]\nmode = \"soft\"\ntau = {}", f(tau));
            }
        }
        let n = &self.network;
        let hidden: Vec<String> = n.agent_hidden.iter().map(usize::to_string).collect();
        let _ = writeln!(
            s,
            "\n[network]\nagent_hidden = [{}]\nmixer_embed = {}\nhyper_hidden = {}\nae_hidden = {}\nae_embed = {}",
            hidden.join(", "),
            n.mixer_embed,
            n.hyper_hidden,
            n.ae_hidden,
            n.ae_embed
        );
        if let EnvConfig::Gridworld(g) = &self.env {
            let goals: Vec<String> = g.goals.iter().map(|(x, y)| format!("[{x}, {y}]")).collect();
            let _ = writeln!(
                s,
                "\n[gridworld]\nwidth = {}\nheight = {}\nagents = {}\ngoals = [{}]\nhorizon = {}",
                g.width,
                g.height,
                g.agents,
                goals.join(", "),
                g.horizon
            );
        }
        s
    }

    /// Git-style blob hash of [`Self::echo`].
    pub fn content_hash(&self) -> String {
        blob_hash(self.echo().as_bytes())
    }
}

/// `sha1("blob <len>\0" ‖ bytes)` in lowercase hex.
pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha1::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn mixer_name(m: MixerKind) -> &'static str {
    match m {
        MixerKind::Vdn => "vdn",
        MixerKind::Qmix => "qmix",
    }
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

const TOP_KEYS: &[&str] = &[
    "env",
    "variant",
    "mixer",
    "kappa",
    "threshold",
    "top_n",
    "use_state",
    "double_q",
    "gamma",
    "lr",
    "grad_clip",
    "buffer",
    "batch_size",
    "epsilon",
    "target_update",
    "reward_standardization",
    "step_max",
    "eval_interval",
    "eval_episodes",
    "export_embeddings",
    "network",
    "seeds",
    "output_dir",
    "gridworld",
];

fn cfg_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.into(), message: message.into() }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn check_keys(table: &Table, allowed: &[&str], prefix: &str) -> Result<()> {
    for key in table.keys() {
        if !allowed.contains(&key.as_str()) {
            let best = allowed
                .iter()
                .map(|a| (strsim::jaro_winkler(key, a), *a))
                .max_by(|x, y| x.0.total_cmp(&y.0))
                .filter(|(score, _)| *score >= 0.8)
                .map(|(_, a)| format!("; did you mean `{}`?", join(prefix, a)))
                .unwrap_or_default();
            return Err(cfg_err(&join(prefix, key), format!("unknown key{best}")));
        }
    }
    Ok(())
}

/// Typed, path-aware accessors over one table.
struct Fields<'a> {
    table: &'a Table,
    prefix: &'a str,
}

impl<'a> Fields<'a> {
    fn path(&self, key: &str) -> String {
        join(self.prefix, key)
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.table.get(key)
    }

    fn str(&self, key: &str) -> Result<Option<&'a str>> {
        self.get(key)
            .map(|v| v.as_str().ok_or_else(|| cfg_err(&self.path(key), "expected a string")))
            .transpose()
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| match v {
                Value::Float(x) => Ok(*x),
                Value::Integer(i) => Ok(*i as f64),
                _ => Err(cfg_err(&self.path(key), "expected a number")),
            })
            .transpose()
    }

    fn uint(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| match v {
                Value::Integer(i) if *i >= 0 => Ok(*i as u64),
                _ => Err(cfg_err(&self.path(key), "expected a non-negative integer")),
            })
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.uint(key)?.map(|u| usize::try_from(u).map_err(|_| cfg_err(&self.path(key), "integer too large"))).transpose()
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| v.as_bool().ok_or_else(|| cfg_err(&self.path(key), "expected true or false")))
            .transpose()
    }

    fn uint_list(&self, key: &str) -> Result<Option<Vec<u64>>> {
        let Some(v) = self.get(key) else { return Ok(None) };
        let arr = v.as_array().ok_or_else(|| cfg_err(&self.path(key), "expected an array of integers"))?;
        arr.iter()
            .enumerate()
            .map(|(i, x)| match x {
                Value::Integer(n) if *n >= 0 => Ok(*n as u64),
                _ => Err(cfg_err(&format!("{}[{i}]", self.path(key)), "expected a non-negative integer")),
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    fn table(&self, key: &str) -> Result<Option<&'a Table>> {
        self.get(key)
            .map(|v| v.as_table().ok_or_else(|| cfg_err(&self.path(key), "expected a table")))
            .transpose()
    }
}

fn require<T>(v: Option<T>, path: &str) -> Result<T> {
    v.ok_or_else(|| cfg_err(path, "missing required field"))
}

fn enum_err(path: &str, got: &str, options: &[&str]) -> Error {
    cfg_err(path, format!("invalid value `{got}`; expected one of {}", options.join(", ")))
}

/// Parses and validates TOML text. Missing optional keys take defaults that
/// depend on `env`.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| cfg_err("<document>", e.message().to_string()))?;
    check_keys(&root, TOP_KEYS, "")?;
    let top = Fields { table: &root, prefix: "" };

    let env_name = require(top.str("env")?, "env")?;
    let grid_table = top.table("gridworld")?;
    let env = match env_name {
        "climbing" => {
            if grid_table.is_some() {
                return Err(cfg_err("gridworld", "only valid with env = \"gridworld\""));
            }
            EnvConfig::Climbing
        }
        "gridworld" => EnvConfig::Gridworld(parse_grid(grid_table)?),
        other => return Err(enum_err("env", other, &["climbing", "gridworld"])),
    };
    let variant_name = require(top.str("variant")?, "variant")?;
    let variant = Variant::parse(variant_name)
        .ok_or_else(|| enum_err("variant", variant_name, &Variant::ALL.map(Variant::name)))?;
    let seeds = require(top.uint_list("seeds")?, "seeds")?;

    let mut c = ExperimentConfig::defaults(env, variant, seeds);
    if let Some(m) = top.str("mixer")? {
        c.mixer = match m {
            "vdn" => MixerKind::Vdn,
            "qmix" => MixerKind::Qmix,
            other => return Err(enum_err("mixer", other, &["vdn", "qmix"])),
        };
    }
    if let Some(v) = root.get("kappa") {
        c.kappa = parse_kappa(v)?;
    }
    if let Some(x) = top.float("threshold")? {
        c.threshold = x;
    }
    c.top_n = top.usize("top_n")?;
    if let Some(b) = top.bool("use_state")? {
        c.use_state = b;
    }
    if let Some(b) = top.bool("double_q")? {
        c.double_q = b;
    }
    if let Some(x) = top.float("gamma")? {
        c.gamma = x;
    }
    if let Some(x) = top.float("lr")? {
        c.lr = x;
    }
    match root.get("grad_clip") {
        Some(Value::Boolean(false)) => c.grad_clip = None,
        Some(_) => c.grad_clip = top.float("grad_clip")?,
        None => {}
    }
    if let Some(x) = top.usize("buffer")? {
        c.buffer = x;
    }
    if let Some(x) = top.usize("batch_size")? {
        c.batch_size = x;
    }
    if let Some(t) = top.table("epsilon")? {
        check_keys(t, &["start", "end", "anneal_steps"], "epsilon")?;
        let f = Fields { table: t, prefix: "epsilon" };
        c.epsilon.start = f.float("start")?.unwrap_or(c.epsilon.start);
        c.epsilon.end = f.float("end")?.unwrap_or(c.epsilon.end);
        c.epsilon.anneal_steps = f.uint("anneal_steps")?.unwrap_or(c.epsilon.anneal_steps);
    }
    if let Some(t) = top.table("target_update")? {
        c.target_update = parse_target_update(t)?;
    }
    if let Some(b) = top.bool("reward_standardization")? {
        c.reward_standardization = b;
    }
    if let Some(x) = top.uint("step_max")? {
        c.step_max = x;
    }
    if let Some(x) = top.uint("eval_interval")? {
        c.eval_interval = x;
    }
    if let Some(x) = top.usize("eval_episodes")? {
        c.eval_episodes = x;
    }
    if let Some(b) = top.bool("export_embeddings")? {
        c.export_embeddings = b;
    }
    if let Some(t) = top.table("network")? {
        check_keys(t, &["agent_hidden", "mixer_embed", "hyper_hidden", "ae_hidden", "ae_embed"], "network")?;
        let f = Fields { table: t, prefix: "network" };
        let n = &mut c.network;
        if let Some(h) = f.uint_list("agent_hidden")? {
            n.agent_hidden = h.into_iter().map(|x| x as usize).collect();
        }
        n.mixer_embed = f.usize("mixer_embed")?.unwrap_or(n.mixer_embed);
        n.hyper_hidden = f.usize("hyper_hidden")?.unwrap_or(n.hyper_hidden);
        n.ae_hidden = f.usize("ae_hidden")?.unwrap_or(n.ae_hidden);
        n.ae_embed = f.usize("ae_embed")?.unwrap_or(n.ae_embed);
    }
    if let Some(d) = top.str("output_dir")? {
        c.output_dir = PathBuf::from(d);
    }
    c.validate()?;
    Ok(c)
}

fn parse_kappa(v: &Value) -> Result<KappaSchedule> {
    match v {
        Value::Float(x) => Ok(KappaSchedule::Constant { value: *x }),
        Value::Integer(i) => Ok(KappaSchedule::Constant { value: *i as f64 }),
        Value::Table(t) => {
            let f = Fields { table: t, prefix: "kappa" };
            match f.str("mode")?.unwrap_or("constant") {
                "constant" => {
                    check_keys(t, &["mode", "value"], "kappa")?;
                    Ok(KappaSchedule::Constant { value: require(f.float("value")?, "kappa.value")? })
                }
                "linear" => {
                    check_keys(t, &["mode", "start", "end", "horizon"], "kappa")?;
                    Ok(KappaSchedule::Linear {
                        start: require(f.float("start")?, "kappa.start")?,
                        end: require(f.float("end")?, "kappa.end")?,
                        horizon: require(f.uint("horizon")?, "kappa.horizon")?,
                    })
                }
                other => Err(enum_err("kappa.mode", other, &["constant", "linear"])),
            }
        }
        _ => Err(cfg_err("kappa", "expected a number or a table")),
    }
}

fn parse_target_update(t: &Table) -> Result<TargetUpdate> {
    let f = Fields { table: t, prefix: "target_update" };
    match require(f.str("mode")?, "target_update.mode")? {
        "hard" => {
            check_keys(t, &["mode", "interval"], "target_update")?;
            Ok(TargetUpdate::Hard { interval: require(f.uint("interval")?, "target_update.interval")? })
        }
        "soft" => {
            check_keys(t, &["mode", "tau"], "target_update")?;
            Ok(TargetUpdate::Soft { tau: require(f.float("tau")?, "target_update.tau")? })
        }
        other => Err(enum_err("target_update.mode", other, &["hard", "soft"])),
    }
}

fn parse_grid(t: Option<&Table>) -> Result<GridConfig> {
    let mut g = GridConfig::default();
    let Some(t) = t else { return Ok(g) };
    check_keys(t, &["width", "height", "agents", "goals", "horizon"], "gridworld")?;
    let f = Fields { table: t, prefix: "gridworld" };
    g.width = f.usize("width")?.unwrap_or(g.width);
    g.height = f.usize("height")?.unwrap_or(g.height);
    g.agents = f.usize("agents")?.unwrap_or(g.agents);
    g.horizon = f.usize("horizon")?.unwrap_or(g.horizon);
    if let Some(v) = t.get("goals") {
        let arr = v.as_array().ok_or_else(|| cfg_err("gridworld.goals", "expected an array of [x, y] pairs"))?;
        g.goals = arr
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let path = format!("gridworld.goals[{i}]");
                let xy = p.as_array().filter(|a| a.len() == 2).ok_or_else(|| cfg_err(&path, "expected [x, y]"))?;
                let coord = |v: &Value| match v {
                    Value::Integer(n) if *n >= 0 => Ok(*n as usize),
                    _ => Err(cfg_err(&path, "coordinates must be non-negative integers")),
                };
                Ok((coord(&xy[0])?, coord(&xy[1])?))
            })
            .collect::<Result<Vec<_>>>()?;
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "env = \"climbing\"\nvariant = \"qsim\"\nseeds = [1]\n";

    #[test]
    fn minimal_resolves_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.kappa, KappaSchedule::Constant { value: 3.0 });
        assert_eq!(c.threshold, 0.0);
        assert_eq!(c.lr, 0.0005);
        assert_eq!(c.buffer, 5000);
        assert_eq!(c.gamma, 0.99);
        assert_eq!(c.target_update, TargetUpdate::Soft { tau: 0.01 });
        assert!(c.reward_standardization);
        assert_eq!(c.epsilon.anneal_steps, 50_000);
    }

    #[test]
    fn gridworld_defaults_differ() {
        let c = parse_config("env = \"gridworld\"\nvariant = \"greedy\"\nseeds = [1, 2]\n").unwrap();
        assert_eq!(c.target_update, TargetUpdate::Hard { interval: 200 });
        assert!(!c.reward_standardization);
        assert_eq!(c.env, EnvConfig::Gridworld(GridConfig::default()));
    }

    #[test]
    fn gamma_out_of_range_names_field() {
        let err = parse_config(&format!("{MINIMAL}gamma = 1.5\n")).unwrap_err();
        assert!(matches!(&err, Error::Config { path, .. } if path == "gamma"), "{err}");
    }

    #[test]
    fn unknown_key_suggests() {
        let err = parse_config(&format!("{MINIMAL}kapa = 2.0\n")).unwrap_err().to_string();
        assert!(err.contains("kapa") && err.contains("did you mean `kappa`"), "{err}");
        let err = parse_config(&format!("{MINIMAL}[epsilon]\nanneal = 5\n")).unwrap_err().to_string();
        assert!(err.contains("epsilon.anneal") && err.contains("epsilon.anneal_steps"), "{err}");
    }

    #[test]
    fn missing_and_invalid_enum() {
        let err = parse_config("env = \"climbing\"\nseeds = [1]\n").unwrap_err();
        assert!(matches!(&err, Error::Config { path, .. } if path == "variant"));
        let err = parse_config("env = \"mars\"\nvariant = \"qsim\"\nseeds = [1]\n").unwrap_err();
        assert!(matches!(&err, Error::Config { path, .. } if path == "env"));
    }

    #[test]
    fn topn_requires_n() {
        assert!(parse_config("env = \"climbing\"\nvariant = \"qsim-topn\"\nseeds = [1]\n").is_err());
        let c = parse_config("env = \"climbing\"\nvariant = \"qsim-topn\"\ntop_n = 2\nseeds = [1]\n").unwrap();
        assert_eq!(c.top_n, Some(2));
    }

    #[test]
    fn echo_round_trips() {
        let text = r#"
env = "gridworld"
variant = "qsim"
seeds = [3, 1]
kappa = { mode = "linear", start = 1, end = 10, horizon = 5000 }
threshold = -0.25
grad_clip = false
lr = 1e-4
output_dir = "out dir/\"x\""
[gridworld]
width = 5
goals = [[1, 1]]
[network]
agent_hidden = [32, 16]
"#;
        let c = parse_config(text).unwrap();
        let again = parse_config(&c.echo()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.content_hash(), again.content_hash());
        let m = parse_config(MINIMAL).unwrap();
        assert_eq!(parse_config(&m.echo()).unwrap(), m);
    }

    #[test]
    fn blob_hash_matches_git() {
        // `printf 'hello\n' | git hash-object --stdin`
        assert_eq!(blob_hash(b"hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
    }
}
