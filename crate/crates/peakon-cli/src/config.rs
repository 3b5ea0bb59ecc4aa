//! INI-style run configuration. Flags override file values; every error
//! carries the offending line number.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Simulate,
    SimulateN,
    Classify,
    Verify,
    DesignBreather,
    Catalog,
}

impl Mode {
    fn parse(text: &str) -> Option<Mode> {
        Some(match text {
            "simulate" => Mode::Simulate,
            "simulate-n" => Mode::SimulateN,
            "classify" => Mode::Classify,
            "verify" => Mode::Verify,
            "design-breather" => Mode::DesignBreather,
            "catalog" => Mode::Catalog,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EquationConfig {
    pub f: Option<String>,
    pub g: Option<String>,
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub mode: Option<Mode>,
    pub t0: f64,
    pub horizon: f64,
    pub sample_dt: f64,
    pub init_a: Vec<f64>,
    pub init_x: Vec<f64>,
    pub oscillatory: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            mode: None,
            t0: 0.0,
            horizon: 10.0,
            sample_dt: 0.01,
            init_a: vec![1.0],
            init_x: vec![0.0],
            oscillatory: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub quad_tol: f64,
    pub ode_tol: f64,
    pub eps_ext: f64,
    pub a_max: f64,
    pub gap_min: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            quad_tol: 1e-12,
            ode_tol: 1e-10,
            eps_ext: 1e-9,
            a_max: 1e8,
            gap_min: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputPaths {
    pub csv_path: Option<PathBuf>,
    pub report_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    pub equation: EquationConfig,
    pub run: RunSection,
    pub tolerances: Tolerances,
    pub output: OutputPaths,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line of the offending entry; 0 for file-level problems.
    pub line: usize,
    pub message: String,
}

impl ConfigError {
    fn at(line: usize, message: impl Into<String>) -> Self {
        ConfigError { line, message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(out, "{}", self.message)
        } else {
            write!(out, "line {}: {}", self.line, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Equation,
    Run,
    Tolerances,
    Output,
}

/// Loads a config file. Format: `[section]` headers over `key = value`
/// lines; `#` or `;` start a comment line; values may be double-quoted.
pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ConfigError::at(0, format!("cannot read config: {e}")))?;
    parse_config(&text)
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut section: Option<Section> = None;
    for (idx, raw) in text.lines().enumerate() {
        let no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::at(no, "unterminated section header"))?
                .trim();
            section = Some(match name {
                "equation" => Section::Equation,
                "run" => Section::Run,
                "tolerances" => Section::Tolerances,
                "output" => Section::Output,
                other => {
                    return Err(ConfigError::at(no, format!("unknown section `[{other}]`")))
                }
            });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::at(no, format!("expected `key = value`, found `{line}`")));
        };
        let key = key.trim();
        let value = unquote(value.trim());
        let section = section
            .ok_or_else(|| ConfigError::at(no, format!("key `{key}` appears before any section")))?;
        apply(&mut cfg, section, key, value, no)?;
    }
    if cfg.run.init_a.len() != cfg.run.init_x.len() {
        return Err(ConfigError::at(
            0,
            format!(
                "init_a has {} entries but init_x has {}",
                cfg.run.init_a.len(),
                cfg.run.init_x.len()
            ),
        ));
    }
    Ok(cfg)
}

fn unquote(value: &str) -> &str {
    let b = value.as_bytes();
    if b.len() >= 2 && b[0] == b'"' && b[b.len() - 1] == b'"' {
        &value[1..value.len() - 1]
    } else {
        value
    }
}

fn apply(
    cfg: &mut RunConfig,
    section: Section,
    key: &str,
    value: &str,
    no: usize,
) -> Result<(), ConfigError> {
    match section {
        Section::Equation => match key {
            "f" => cfg.equation.f = Some(value.to_string()),
            "g" => cfg.equation.g = Some(value.to_string()),
            name => {
                cfg.equation.params.insert(name.to_string(), number(key, value, no)?);
            }
        },
        Section::Run => match key {
            "mode" => {
                cfg.run.mode = Some(Mode::parse(value).ok_or_else(|| {
                    ConfigError::at(
                        no,
                        format!(
                            "unknown mode `{value}` (expected simulate, simulate-n, classify, \
                             verify, design-breather or catalog)"
                        ),
                    )
                })?)
            }
            "t0" => cfg.run.t0 = number(key, value, no)?,
            "horizon" => cfg.run.horizon = number(key, value, no)?,
            "sample_dt" => cfg.run.sample_dt = positive(key, value, no)?,
            "init_a" => cfg.run.init_a = number_list(key, value, no)?,
            "init_x" => cfg.run.init_x = number_list(key, value, no)?,
            "oscillatory" => cfg.run.oscillatory = boolean(key, value, no)?,
            other => {
                return Err(ConfigError::at(no, format!("unknown key `{other}` in [run]")))
            }
        },
        Section::Tolerances => match key {
            "quad_tol" => cfg.tolerances.quad_tol = positive(key, value, no)?,
            "ode_tol" => cfg.tolerances.ode_tol = positive(key, value, no)?,
            "eps_ext" => cfg.tolerances.eps_ext = positive(key, value, no)?,
            "a_max" => cfg.tolerances.a_max = positive(key, value, no)?,
            "gap_min" => cfg.tolerances.gap_min = positive(key, value, no)?,
            other => {
                return Err(ConfigError::at(no, format!("unknown key `{other}` in [tolerances]")))
            }
        },
        Section::Output => match key {
            "csv_path" => cfg.output.csv_path = Some(PathBuf::from(value)),
            "report_path" => cfg.output.report_path = Some(PathBuf::from(value)),
            other => {
                return Err(ConfigError::at(no, format!("unknown key `{other}` in [output]")))
            }
        },
    }
    Ok(())
}

fn number(key: &str, value: &str, no: usize) -> Result<f64, ConfigError> {
    let v: f64 = value
        .parse()
        .map_err(|_| ConfigError::at(no, format!("`{key}`: invalid number `{value}`")))?;
    if !v.is_finite() {
        return Err(ConfigError::at(no, format!("`{key}` must be finite")));
    }
    Ok(v)
}

fn positive(key: &str, value: &str, no: usize) -> Result<f64, ConfigError> {
    let v = number(key, value, no)?;
    if !(v > 0.0) {
        return Err(ConfigError::at(no, format!("`{key}` must be positive, got `{value}`")));
    }
    Ok(v)
}

fn boolean(key: &str, value: &str, no: usize) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::at(no, format!("`{key}`: expected true or false, got `{value}`"))),
    }
}

fn number_list(key: &str, value: &str, no: usize) -> Result<Vec<f64>, ConfigError> {
    let items: Result<Vec<f64>, ConfigError> =
        value.split(',').map(|part| number(key, part.trim(), no)).collect();
    let items = items?;
    if items.is_empty() {
        return Err(ConfigError::at(no, format!("`{key}` needs at least one entry")));
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_sections() {
        let cfg = parse_config(
            "# travelling wave\n\
             [equation]\n\
             f = ux\n\
             g = \"u\"\n\
             k = 2.5\n\
             [run]\n\
             mode = simulate\n\
             t0 = -1\n\
             horizon = 4\n\
             sample_dt = 0.5\n\
             init_a = 1.5\n\
             init_x = 0\n\
             oscillatory = true\n\
             [tolerances]\n\
             ode_tol = 1e-8\n\
             [output]\n\
             csv_path = out/run.csv\n",
        )
        .unwrap();
        assert_eq!(cfg.equation.f.as_deref(), Some("ux"));
        assert_eq!(cfg.equation.g.as_deref(), Some("u"));
        assert_eq!(cfg.equation.params["k"], 2.5);
        assert_eq!(cfg.run.mode, Some(Mode::Simulate));
        assert_eq!(cfg.run.t0, -1.0);
        assert_eq!(cfg.run.horizon, 4.0);
        assert_eq!(cfg.run.sample_dt, 0.5);
        assert_eq!(cfg.run.init_a, vec![1.5]);
        assert!(cfg.run.oscillatory);
        assert_eq!(cfg.tolerances.ode_tol, 1e-8);
        assert_eq!(cfg.tolerances.quad_tol, 1e-12);
        assert_eq!(cfg.output.csv_path.as_deref(), Some(Path::new("out/run.csv")));
        assert_eq!(cfg.output.report_path, None);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_config("[run]\nhorizon = soon\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.to_string().contains("invalid number `soon`"), "{err}");

        let err = parse_config("[plotting]\n").unwrap_err();
        assert_eq!(err.line, 1);

        let err = parse_config("f = ux\n").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(err.to_string().contains("before any section"), "{err}");

        let err = parse_config("[run]\nsample_dt = -0.1\n").unwrap_err();
        assert_eq!(err.line, 2);
        assert!(err.to_string().contains("positive"), "{err}");
    }

    #[test]
    fn init_vectors_must_match() {
        let err = parse_config("[run]\ninit_a = 1, 2\ninit_x = 0\n").unwrap_err();
        assert_eq!(err.line, 0);
        assert!(err.to_string().contains("init_a has 2"), "{err}");
    }

    #[test]
    fn comma_lists_parse() {
        let cfg = parse_config("[run]\ninit_a = 0.6, 0.9, 1.2\ninit_x = -4, 0, 4\n").unwrap();
        assert_eq!(cfg.run.init_a, vec![0.6, 0.9, 1.2]);
        assert_eq!(cfg.run.init_x, vec![-4.0, 0.0, 4.0]);
    }
}
