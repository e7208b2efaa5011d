//! Line-oriented `key = value` configuration with `[section]` headers.
//!
//! Top-level keys (`command`, `seed`, `output_dir`) come first; each command
//! reads its own section. Every key is typed by a schema and has a default
//! unless marked required.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown key `{key}` in [{section}]")]
    UnknownKey { line: usize, section: String, key: String },
    #[error("line {line}: `{key}` expects {expected}, got `{got}`")]
    Type {
        line: usize,
        key: String,
        expected: &'static str,
        got: String,
    },
    #[error("[{section}] is missing required keys: {}", keys.join(", "))]
    Missing { section: String, keys: Vec<String> },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Command {
    Masks,
    Simulate,
    Reconstruct,
    Psf,
    Sweep,
    Zhang,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Masks,
        Command::Simulate,
        Command::Reconstruct,
        Command::Psf,
        Command::Sweep,
        Command::Zhang,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Masks => "masks",
            Command::Simulate => "simulate",
            Command::Reconstruct => "reconstruct",
            Command::Psf => "psf",
            Command::Sweep => "sweep",
            Command::Zhang => "zhang",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }

    pub fn schema(self) -> &'static [KeySpec] {
        match self {
            Command::Masks => MASKS,
            Command::Simulate => SIMULATE,
            Command::Reconstruct => RECONSTRUCT,
            Command::Psf => PSF,
            Command::Sweep => SWEEP,
            Command::Zhang => ZHANG,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Float,
    Bool,
    Str,
    FloatList,
    StrList,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::Int => "a non-negative integer",
            Kind::Float => "a number",
            Kind::Bool => "true or false",
            Kind::Str => "a string",
            Kind::FloatList => "a comma-separated list of numbers",
            Kind::StrList => "a comma-separated list of names",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(u64),
    Float(f64),
    Bool(bool),
    Str(String),
    FloatList(Vec<f64>),
    StrList(Vec<String>),
}

impl Value {
    pub fn parse(kind: Kind, raw: &str) -> Option<Value> {
        let raw = raw.trim();
        let list = || raw.split(',').map(str::trim).filter(|s| !s.is_empty());
        Some(match kind {
            Kind::Int => Value::Int(raw.replace('_', "").parse().ok()?),
            Kind::Float => Value::Float(parse_float(raw)?),
            Kind::Bool => Value::Bool(match raw {
                "true" | "yes" | "on" => true,
                "false" | "no" | "off" => false,
                _ => return None,
            }),
            Kind::Str if !raw.is_empty() => Value::Str(raw.to_string()),
            Kind::Str => return None,
            Kind::FloatList => Value::FloatList(list().map(parse_float).collect::<Option<_>>()?),
            Kind::StrList => Value::StrList(list().map(String::from).collect()),
        })
    }

    pub fn kind(&self) -> Kind {
        match self {
            Value::Int(_) => Kind::Int,
            Value::Float(_) => Kind::Float,
            Value::Bool(_) => Kind::Bool,
            Value::Str(_) => Kind::Str,
            Value::FloatList(_) => Kind::FloatList,
            Value::StrList(_) => Kind::StrList,
        }
    }
}

fn parse_float(s: &str) -> Option<f64> {
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: Vec<String>| v.join(", ");
        match self {
            Value::Int(v) => write!(f, "{v}"),
            // Display for f64 is the shortest string that parses back exactly
            Value::Float(v) => write!(f, "{v}"),
            Value::Bool(v) => write!(f, "{v}"),
            Value::Str(s) => f.write_str(s),
            Value::FloatList(v) => f.write_str(&join(v.iter().map(|x| x.to_string()).collect())),
            Value::StrList(v) => f.write_str(&join(v.clone())),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub name: &'static str,
    pub kind: Kind,
    /// `None` marks a required key.
    pub default: Option<&'static str>,
}

const fn key(name: &'static str, kind: Kind, default: &'static str) -> KeySpec {
    KeySpec {
        name,
        kind,
        default: Some(default),
    }
}

const fn required(name: &'static str, kind: Kind) -> KeySpec {
    KeySpec {
        name,
        kind,
        default: None,
    }
}

use Kind::*;

const MASKS: &[KeySpec] = &[
    required("family", Str),
    required("n", Int),
    key("j", Int, "256"),
    key("mu_a", Float, "0.5"),
    key("sigma_a", Float, "0.5"),
    key("blur_sigma_px", Float, "1"),
    key("export", Int, "8"),
];

const SIMULATE: &[KeySpec] = &[
    required("family", Str),
    required("n", Int),
    key("j", Int, "1024"),
    key("mu_a", Float, "0.5"),
    key("sigma_a", Float, "0.5"),
    key("blur_sigma_px", Float, "1"),
    key("object", Str, "uniform"),
    key("mu_t", Float, "0.5"),
    key("sigma_t", Float, "0.2887"),
    key("flux_b", Float, "410000"),
    key("t0_s", Float, "0.01"),
    key("noise", Str, "none"),
    key("sigma_p", Float, "1"),
    key("sigma_m", Float, "0"),
];

const RECONSTRUCT: &[KeySpec] = &[
    required("family", Str),
    required("n", Int),
    key("j", Int, "1024"),
    key("mu_a", Float, "0.5"),
    key("sigma_a", Float, "0.5"),
    key("blur_sigma_px", Float, "1"),
    key("object", Str, "uniform"),
    key("mu_t", Float, "0.5"),
    key("sigma_t", Float, "0.2887"),
    key("flux_b", Float, "410000"),
    key("t0_s", Float, "0.01"),
    key("noise", Str, "none"),
    key("sigma_p", Float, "1"),
    key("sigma_m", Float, "0"),
    key("recon", Str, "xc"),
    key("alpha", Float, "1"),
    key("iters", Int, "100"),
    key("buckets", Str, "-"),
];

const PSF: &[KeySpec] = &[
    required("family", Str),
    required("n", Int),
    key("j", Int, "1024"),
    key("mu_a", Float, "0.5"),
    key("sigma_a", Float, "0.5"),
    key("blur_sigma_px", Float, "1"),
    key("fit_radius", Float, "8"),
];

const SWEEP: &[KeySpec] = &[
    key("preset", Str, "none"),
    required("name", Str),
    required("varied", Str),
    required("values", FloatList),
    key("n", Int, "64"),
    key("j", Int, "4096"),
    key("mu_a", Float, "0.5"),
    key("sigma_a", Float, "0.5"),
    key("mu_t", Float, "0.5"),
    key("sigma_t", Float, "0.2887"),
    key("flux_b", Float, "410000"),
    key("t0_s", Float, "0.01"),
    key("tau_s", Float, "82"),
    key("sigma_p", Float, "1"),
    key("sigma_m", Float, "56.2"),
    key("budget", Str, "noise_free"),
    key("families", StrList, "random"),
    key("noise", StrList, "none"),
    key("recon", StrList, "xc"),
    key("alpha", Float, "1"),
    key("iters", Int, "100"),
    key("seeds", Int, "10"),
];

const ZHANG: &[KeySpec] = &[
    key("experiment", Str, "i"),
    key("shutter", Bool, "true"),
    key("j", Int, "10000"),
    key("fov_px", Int, "250"),
    key("t0_s", Float, "0"),
    key("mitigation", Str, "none"),
];

/// Canned sweeps; explicit keys in the section win over the preset.
pub fn preset(name: &str) -> Option<&'static [(&'static str, &'static str)]> {
    Some(match name {
        "none" => &[],
        // constant exposure per mask
        "fig4a" => &[
            ("name", "fig4a"),
            ("varied", "j"),
            ("values", "256, 512, 1024, 2048, 4096, 8192, 16384"),
            ("budget", "constant_t0"),
            ("t0_s", "0.01"),
            ("noise", "both"),
            ("sigma_m", "56.2"),
        ],
        // constant total time, showing the optimum mask count
        "fig4b" => &[
            ("name", "fig4b"),
            ("varied", "j"),
            ("values", "512, 1024, 2048, 2981, 4096, 8192, 16384"),
            ("budget", "constant_tau"),
            ("tau_s", "82"),
            ("noise", "gaussian"),
            ("sigma_m", "56.2"),
        ],
        _ => return None,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Fully resolved keys of the command's section.
    pub params: BTreeMap<String, Value>,
}

impl RunConfig {
    pub fn get(&self, key: &str) -> &Value {
        self.params
            .get(key)
            .unwrap_or_else(|| panic!("key `{key}` is not in the {} schema", self.command.name()))
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        match self.get(key) {
            Value::Int(v) => usize::try_from(*v).map_err(|_| ConfigError::Invalid(format!("`{key}` is too large"))),
            _ => unreachable!("schema types are checked at parse time"),
        }
    }

    pub fn f64(&self, key: &str) -> f64 {
        match self.get(key) {
            Value::Float(v) => *v,
            _ => unreachable!("schema types are checked at parse time"),
        }
    }

    pub fn bool(&self, key: &str) -> bool {
        matches!(self.get(key), Value::Bool(true))
    }

    pub fn str(&self, key: &str) -> &str {
        match self.get(key) {
            Value::Str(s) => s,
            _ => unreachable!("schema types are checked at parse time"),
        }
    }

    pub fn floats(&self, key: &str) -> &[f64] {
        match self.get(key) {
            Value::FloatList(v) => v,
            _ => unreachable!("schema types are checked at parse time"),
        }
    }

    pub fn strs(&self, key: &str) -> &[String] {
        match self.get(key) {
            Value::StrList(v) => v,
            _ => unreachable!("schema types are checked at parse time"),
        }
    }

    /// Canonical text: top-level keys, then the command section with every
    /// key spelled out in schema order.
    pub fn serialize(&self) -> String {
        let mut s = format!(
            "command = {}\nseed = {}\noutput_dir = {}\n\n[{}]\n",
            self.command.name(),
            self.seed,
            self.output_dir.display(),
            self.command.name()
        );
        for spec in self.command.schema() {
            if let Some(v) = self.params.get(spec.name) {
                s.push_str(&format!("{} = {v}\n", spec.name));
            }
        }
        s
    }
}

/// Key/value pairs as written, before schema resolution.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    top: Vec<(usize, String, String)>,
    sections: BTreeMap<String, Vec<(usize, String, String)>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut raw = RawConfig::default();
        let mut current: Option<String> = None;
        for (i, line) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| ConfigError::Syntax {
                    line: lineno,
                    msg: "unterminated section header".into(),
                })?;
                let name = name.trim();
                if Command::parse(name).is_none() {
                    return Err(ConfigError::Syntax {
                        line: lineno,
                        msg: format!("unknown section [{name}]"),
                    });
                }
                raw.sections.entry(name.to_string()).or_default();
                current = Some(name.to_string());
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: lineno,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let entry = (lineno, k.trim().to_string(), v.trim().to_string());
            match &current {
                Some(sec) => raw.sections.get_mut(sec).unwrap().push(entry),
                None => raw.top.push(entry),
            }
        }
        Ok(raw)
    }

    /// Command-line overrides. Line number 0 marks a flag.
    pub fn set_top(&mut self, key: &str, value: &str) {
        self.top.push((0, key.to_string(), value.to_string()));
    }

    pub fn set(&mut self, section: Command, key: &str, value: &str) {
        self.sections
            .entry(section.name().to_string())
            .or_default()
            .push((0, key.to_string(), value.to_string()));
    }

    /// Apply the schema for `command` (or the file's own `command` key).
    pub fn resolve(&self, command: Option<Command>) -> Result<RunConfig, ConfigError> {
        let mut cmd = None;
        let mut seed = 0u64;
        let mut output_dir = PathBuf::from("out");
        for (line, k, v) in &self.top {
            match k.as_str() {
                "command" => {
                    cmd = Some(Command::parse(v).ok_or_else(|| ConfigError::Type {
                        line: *line,
                        key: k.clone(),
                        expected: "a command name",
                        got: v.clone(),
                    })?)
                }
                "seed" => match Value::parse(Kind::Int, v) {
                    Some(Value::Int(s)) => seed = s,
                    _ => {
                        return Err(ConfigError::Type {
                            line: *line,
                            key: k.clone(),
                            expected: Kind::Int.describe(),
                            got: v.clone(),
                        })
                    }
                },
                "output_dir" => output_dir = PathBuf::from(v),
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line: *line,
                        section: "top level".into(),
                        key: k.clone(),
                    })
                }
            }
        }
        let command = command
            .or(cmd)
            .ok_or_else(|| ConfigError::Invalid("no command given".into()))?;
        // every section present is checked, not only the active one
        for (name, entries) in &self.sections {
            let c = Command::parse(name).expect("section names are checked at parse time");
            let params = resolve_section(c, entries)?;
            if c == command {
                return Ok(RunConfig {
                    command,
                    seed,
                    output_dir,
                    params,
                });
            }
        }
        let params = resolve_section(command, &[])?;
        Ok(RunConfig {
            command,
            seed,
            output_dir,
            params,
        })
    }
}

fn resolve_section(cmd: Command, entries: &[(usize, String, String)]) -> Result<BTreeMap<String, Value>, ConfigError> {
    let schema = cmd.schema();
    let spec_of = |k: &str| schema.iter().find(|s| s.name == k);
    let mut given: BTreeMap<&str, (usize, &str)> = BTreeMap::new();
    for (line, k, v) in entries {
        if spec_of(k).is_none() {
            return Err(ConfigError::UnknownKey {
                line: *line,
                section: cmd.name().into(),
                key: k.clone(),
            });
        }
        given.insert(k.as_str(), (*line, v.as_str()));
    }
    let preset_pairs = match given.get("preset") {
        Some(&(line, name)) => preset(name).ok_or_else(|| ConfigError::Type {
            line,
            key: "preset".into(),
            expected: "fig4a, fig4b or none",
            got: name.into(),
        })?,
        None => &[],
    };
    let mut out = BTreeMap::new();
    let mut missing = Vec::new();
    for spec in schema {
        let (line, raw) = match given.get(spec.name) {
            Some(&(line, v)) => (line, v),
            None => match preset_pairs.iter().find(|(k, _)| *k == spec.name) {
                Some(&(_, v)) => (0, v),
                None => match spec.default {
                    Some(d) => (0, d),
                    None => {
                        missing.push(spec.name.to_string());
                        continue;
                    }
                },
            },
        };
        let v = Value::parse(spec.kind, raw).ok_or_else(|| ConfigError::Type {
            line,
            key: spec.name.into(),
            expected: spec.kind.describe(),
            got: raw.into(),
        })?;
        out.insert(spec.name.to_string(), v);
    }
    if !missing.is_empty() {
        return Err(ConfigError::Missing {
            section: cmd.name().into(),
            keys: missing,
        });
    }
    Ok(out)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    RawConfig::parse(text)?.resolve(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_sweep_section_lists_required_keys() {
        let err = parse_config("command = sweep\n[sweep]\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Missing {
                section: "sweep".into(),
                keys: vec!["name".into(), "varied".into(), "values".into()],
            }
        );
        assert!(err.to_string().contains("name, varied, values"));
    }

    #[test]
    fn seed_is_u64() {
        let c = parse_config("command = zhang\nseed = 42\n").unwrap();
        assert_eq!(c.seed, 42);
        let c = parse_config("command = zhang\nseed = 18446744073709551615\n").unwrap();
        assert_eq!(c.seed, u64::MAX);
        assert!(matches!(
            parse_config("command = zhang\nseed = -1\n"),
            Err(ConfigError::Type { line: 2, .. })
        ));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "command = masks\n\n[masks]\nfamily = hadamard\nn = 16\ncolour = red\n";
        assert_eq!(
            parse_config(text).unwrap_err(),
            ConfigError::UnknownKey {
                line: 6,
                section: "masks".into(),
                key: "colour".into()
            }
        );
        let text = "command = masks\n[masks]\nfamily = hadamard\nn = sixteen\n";
        assert!(matches!(parse_config(text), Err(ConfigError::Type { line: 4, .. })));
        assert!(matches!(parse_config("[plot]\n"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("just words\n"), Err(ConfigError::Syntax { line: 1, .. })));
    }

    #[test]
    fn inactive_sections_are_still_checked() {
        let text = "command = zhang\n[masks]\nbogus = 1\n";
        assert!(matches!(parse_config(text), Err(ConfigError::UnknownKey { line: 3, .. })));
    }

    #[test]
    fn presets_fill_and_yield() {
        let c = parse_config("command = sweep\n[sweep]\npreset = fig4b\nseeds = 2\n").unwrap();
        assert_eq!(c.str("name"), "fig4b");
        assert_eq!(c.str("budget"), "constant_tau");
        assert_eq!(c.usize("seeds").unwrap(), 2);
        let c = parse_config("command = sweep\n[sweep]\npreset = fig4b\nname = mine\n").unwrap();
        assert_eq!(c.str("name"), "mine");
    }

    #[test]
    fn overrides_win() {
        let mut raw = RawConfig::parse("command = zhang\nseed = 1\n[zhang]\nshutter = true\n").unwrap();
        raw.set(Command::Zhang, "shutter", "false");
        raw.set_top("seed", "9");
        let c = raw.resolve(None).unwrap();
        assert!(!c.bool("shutter"));
        assert_eq!(c.seed, 9);
    }

    fn arb_value(kind: Kind) -> BoxedStrategy<Value> {
        let name = "[a-z][a-z0-9_./-]{0,12}";
        match kind {
            Int => any::<u64>().prop_map(Value::Int).boxed(),
            Float => prop::num::f64::NORMAL.prop_map(Value::Float).boxed(),
            Bool => any::<bool>().prop_map(Value::Bool).boxed(),
            Str => name.prop_map(Value::Str).boxed(),
            FloatList => prop::collection::vec(-1e6f64..1e6, 0..6).prop_map(Value::FloatList).boxed(),
            StrList => prop::collection::vec(name, 0..4).prop_map(Value::StrList).boxed(),
        }
    }

    fn arb_config() -> impl Strategy<Value = RunConfig> {
        (0..Command::ALL.len(), any::<u64>(), "[a-z][a-z0-9_/]{0,10}")
            .prop_flat_map(|(ci, seed, dir)| {
                let cmd = Command::ALL[ci];
                let values: Vec<_> = cmd.schema().iter().map(|s| arb_value(s.kind)).collect();
                (Just(cmd), Just(seed), Just(dir), values)
            })
            .prop_map(|(command, seed, dir, values)| RunConfig {
                command,
                seed,
                output_dir: PathBuf::from(dir),
                params: command
                    .schema()
                    .iter()
                    .zip(values)
                    .map(|(s, v)| (s.name.to_string(), v))
                    .collect(),
            })
            // a preset name must be one that exists
            .prop_map(|mut c| {
                if c.params.contains_key("preset") {
                    c.params.insert("preset".into(), Value::Str("none".into()));
                }
                c
            })
    }

    proptest! {
        #[test]
        fn round_trip(cfg in arb_config()) {
            let text = cfg.serialize();
            prop_assert_eq!(parse_config(&text).unwrap(), cfg);
        }
    }
}
