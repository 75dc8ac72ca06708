//! Run configuration: defaults, presets, the `key = value` file grammar,
//! and command-line overrides.
//!
//! Precedence, lowest to highest: built-in defaults, the preset named in the
//! config file, the config file's explicit keys, the `--preset` flag, then
//! individual flags and `--set` overrides.

use blebsim_core::forces::{ParamError, ParamSet};
use blebsim_core::forces::ModelMode;
use blebsim_core::solver::MassMode;
use std::fmt;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{at}: unknown key `{key}`")]
    UnknownKey { at: String, key: String },
    #[error("{at}: bad value for `{key}`: {reason}")]
    BadValue {
        at: String,
        key: String,
        reason: String,
    },
    #[error("{at}: expected `key = value`")]
    Syntax { at: String },
    #[error(
        "unknown preset `{0}` (expected table1, imgdata, weak_linkers, \
         high_tension, high_pressure)"
    )]
    UnknownPreset(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(#[from] ParamError),
    #[error("output_every must be at least 1")]
    BadOutputEvery,
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
}

/// Where the reference surface comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MeshSource {
    /// Refined cube-sphere of unit radius.
    Sphere,
    /// Scaled red-blood-cell-like surface (the blebbing scenario geometry).
    Discocyte,
    /// An `.off` or `.obj` file on disk.
    File(String),
}

impl MeshSource {
    pub fn parse(text: &str) -> MeshSource {
        match text {
            "sphere" => MeshSource::Sphere,
            "discocyte" => MeshSource::Discocyte,
            other => MeshSource::File(other.to_string()),
        }
    }
}

impl fmt::Display for MeshSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshSource::Sphere => f.write_str("sphere"),
            MeshSource::Discocyte => f.write_str("discocyte"),
            MeshSource::File(path) => f.write_str(path),
        }
    }
}

/// Everything a `run` invocation needs, assembled from defaults, preset,
/// config file, and flags.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshSource,
    /// Bisection refinement passes applied to the base mesh.
    pub refine: usize,
    pub params: ParamSet,
    pub output_dir: String,
    /// Snapshot cadence in steps (the initial and final states are always
    /// written).
    pub output_every: usize,
    pub mode: ModelMode,
    pub solver: MassMode,
    /// Name of the last preset applied, if any.
    pub preset: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: MeshSource::Discocyte,
            refine: 6,
            params: ParamSet::table1(),
            output_dir: String::from("out"),
            output_every: 40,
            mode: ModelMode::Sharp,
            solver: MassMode::Consistent,
            preset: None,
        }
    }
}

impl RunConfig {
    /// Final coherence check once all sources have been applied.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params.validate()?;
        if self.output_every == 0 {
            return Err(ConfigError::BadOutputEvery);
        }
        Ok(())
    }

    /// Render as config-file text that [`parse_str`] maps back to the same
    /// configuration. The preset line comes first so explicit keys keep
    /// their override role on re-parse.
    pub fn serialize(&self) -> String {
        let mut text = String::new();
        if let Some(name) = &self.preset {
            let _ = writeln!(text, "preset = {name}");
        }
        let p = &self.params;
        let _ = writeln!(text, "mesh = {}", self.mesh);
        let _ = writeln!(text, "refine = {}", self.refine);
        let _ = writeln!(text, "x0 = {}", p.x0);
        let _ = writeln!(text, "lambda_b = {}", p.lambda_b);
        let _ = writeln!(text, "lambda_l = {}", p.lambda_l);
        let _ = writeln!(text, "l0 = {}", p.l0);
        let _ = writeln!(text, "u_B = {}", p.u_break);
        let _ = writeln!(text, "k_L = {}", p.k_repel);
        let _ = writeln!(text, "u_R = {}", p.u_repel);
        let _ = writeln!(text, "lambda_p = {}", p.lambda_p);
        let _ = writeln!(text, "epsilon = {}", p.epsilon);
        let _ = writeln!(text, "tau = {}", p.tau);
        let _ = writeln!(text, "t_end = {}", p.t_end);
        let _ = writeln!(text, "output_dir = {}", self.output_dir);
        let _ = writeln!(text, "output_every = {}", self.output_every);
        let _ = writeln!(text, "mode = {}", self.mode);
        let _ = writeln!(text, "solver = {}", self.solver);
        text
    }
}

/// Replace the parameter set with a named baseline.
pub fn apply_preset(config: &mut RunConfig, name: &str) -> Result<(), ConfigError> {
    match name {
        "table1" => config.params = ParamSet::table1(),
        "imgdata" => config.params = ParamSet::table2(),
        "weak_linkers" => {
            config.params = ParamSet::table1();
            config.params.lambda_l = 12.0;
        }
        "high_tension" => {
            config.params = ParamSet::table1();
            config.params.x0 = 0.85;
        }
        "high_pressure" => {
            config.params = ParamSet::table1();
            config.params.lambda_p = 30.0;
        }
        other => return Err(ConfigError::UnknownPreset(other.to_string())),
    }
    config.preset = Some(name.to_string());
    Ok(())
}

/// Apply one `key = value` assignment. `at` names the source for error
/// messages (`line 7`, `--set`, `--tau`, ...).
pub fn apply_key(
    config: &mut RunConfig,
    key: &str,
    value: &str,
    at: &str,
) -> Result<(), ConfigError> {
    fn number(at: &str, key: &str, value: &str) -> Result<f64, ConfigError> {
        value.parse::<f64>().map_err(|e| ConfigError::BadValue {
            at: at.to_string(),
            key: key.to_string(),
            reason: e.to_string(),
        })
    }
    fn count(at: &str, key: &str, value: &str) -> Result<usize, ConfigError> {
        value.parse::<usize>().map_err(|e| ConfigError::BadValue {
            at: at.to_string(),
            key: key.to_string(),
            reason: e.to_string(),
        })
    }

    match key {
        "mesh" => config.mesh = MeshSource::parse(value),
        "refine" => config.refine = count(at, key, value)?,
        "x0" => config.params.x0 = number(at, key, value)?,
        "lambda_b" => config.params.lambda_b = number(at, key, value)?,
        "lambda_l" => config.params.lambda_l = number(at, key, value)?,
        "l0" => config.params.l0 = number(at, key, value)?,
        "u_B" => config.params.u_break = number(at, key, value)?,
        "k_L" => config.params.k_repel = number(at, key, value)?,
        "u_R" => config.params.u_repel = number(at, key, value)?,
        "lambda_p" => config.params.lambda_p = number(at, key, value)?,
        "epsilon" => config.params.epsilon = number(at, key, value)?,
        "tau" => config.params.tau = number(at, key, value)?,
        "t_end" => config.params.t_end = number(at, key, value)?,
        "output_dir" => config.output_dir = value.to_string(),
        "output_every" => config.output_every = count(at, key, value)?,
        "mode" => {
            config.mode = value.parse().map_err(|e| ConfigError::BadValue {
                at: at.to_string(),
                key: key.to_string(),
                reason: format!("{e}"),
            })?
        }
        "solver" => {
            config.solver = value.parse().map_err(|e| ConfigError::BadValue {
                at: at.to_string(),
                key: key.to_string(),
                reason: format!("{e}"),
            })?
        }
        "preset" => apply_preset(config, value)?,
        other => {
            return Err(ConfigError::UnknownKey {
                at: at.to_string(),
                key: other.to_string(),
            })
        }
    }
    Ok(())
}

/// Split a config line into `(key, value)`; comments and blank lines give
/// `None`.
fn split_line(raw: &str, at: &str) -> Result<Option<(String, String)>, ConfigError> {
    let content = match raw.find('#') {
        Some(pos) => &raw[..pos],
        None => raw,
    };
    let content = content.trim();
    if content.is_empty() {
        return Ok(None);
    }
    let (key, value) = content
        .split_once('=')
        .ok_or_else(|| ConfigError::Syntax { at: at.to_string() })?;
    Ok(Some((key.trim().to_string(), value.trim().to_string())))
}

/// Apply a config file's text on top of `config`. The file's `preset` line
/// (if any) is applied before its other keys, wherever it appears.
pub fn parse_str(config: &mut RunConfig, text: &str) -> Result<(), ConfigError> {
    let mut assignments = Vec::new();
    for (index, raw) in text.lines().enumerate() {
        let at = format!("line {}", index + 1);
        if let Some((key, value)) = split_line(raw, &at)? {
            if key == "preset" {
                apply_preset(config, &value)?;
            } else {
                assignments.push((key, value, at));
            }
        }
    }
    for (key, value, at) in assignments {
        apply_key(config, &key, &value, &at)?;
    }
    Ok(())
}

/// Apply the config file at `path` on top of `config`.
pub fn parse_file(config: &mut RunConfig, path: &Path) -> Result<(), ConfigError> {
    let text = std::fs::read_to_string(path)?;
    parse_str(config, &text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_keeps_standard_defaults() {
        let mut config = RunConfig::default();
        parse_str(&mut config, "").unwrap();
        let p = config.params;
        assert_eq!(config.mesh, MeshSource::Discocyte);
        assert_eq!(config.refine, 6);
        assert_eq!(p.x0, 0.95);
        assert_eq!(p.lambda_b, 0.005);
        assert_eq!(p.lambda_l, 18.0);
        assert_eq!(p.l0, 0.04);
        assert_eq!(p.u_break, 0.056);
        assert_eq!(p.k_repel, 500.0);
        assert_eq!(p.u_repel, 0.0075);
        assert_eq!(p.lambda_p, 22.5);
        assert_eq!(p.tau, 0.0025);
        assert_eq!(p.t_end, 2.0);
        assert_eq!(config.output_every, 40);
        assert_eq!(config.mode, ModelMode::Sharp);
        assert_eq!(config.solver, MassMode::Consistent);
    }

    #[test]
    fn imgdata_preset_matches_image_derived_parameters() {
        let mut config = RunConfig::default();
        apply_preset(&mut config, "imgdata").unwrap();
        let p = config.params;
        assert_eq!(p.x0, 0.95);
        assert_eq!(p.lambda_b, 0.125);
        assert_eq!(p.lambda_l, 0.72);
        assert_eq!(p.l0, 0.2);
        assert_eq!(p.u_break, 0.28);
        assert_eq!(p.k_repel, 500.0);
        assert_eq!(p.u_repel, 0.15);
        assert_eq!(p.lambda_p, 150.0);
        assert_eq!(p.tau, 0.02);
        assert_eq!(p.t_end, 20.0);
        assert_eq!(config.preset.as_deref(), Some("imgdata"));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let mut config = RunConfig::default();
        let text = "\n# full-line comment\n  tau = 0.01  # trailing comment\n\nrefine = 3\n";
        parse_str(&mut config, text).unwrap();
        assert_eq!(config.params.tau, 0.01);
        assert_eq!(config.refine, 3);
    }

    #[test]
    fn preset_applies_before_explicit_keys_regardless_of_position() {
        let mut config = RunConfig::default();
        parse_str(&mut config, "lambda_l = 3.0\npreset = imgdata\n").unwrap();
        // The explicit key wins even though the preset line came after it.
        assert_eq!(config.params.lambda_l, 3.0);
        assert_eq!(config.params.lambda_p, 150.0);
    }

    #[test]
    fn unknown_keys_fail_loudly() {
        let mut config = RunConfig::default();
        let err = parse_str(&mut config, "lambd_b = 0.1\n").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("unknown key"), "{message}");
        assert!(message.contains("line 1"), "{message}");
    }

    #[test]
    fn bad_values_report_the_line() {
        let mut config = RunConfig::default();
        let err = parse_str(&mut config, "\ntau = fast\n").unwrap_err();
        let message = err.to_string();
        assert!(message.contains("line 2"), "{message}");
        assert!(message.contains("tau"), "{message}");
    }

    #[test]
    fn missing_equals_sign_is_a_syntax_error() {
        let mut config = RunConfig::default();
        let err = parse_str(&mut config, "tau 0.01\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { .. }), "{err}");
    }

    #[test]
    fn threshold_order_violation_is_caught_by_validate() {
        let mut config = RunConfig::default();
        parse_str(&mut config, "u_R = 0.5\n").unwrap();
        let err = config.validate().unwrap_err();
        assert!(
            matches!(err, ConfigError::InvariantViolation(_)),
            "{err}"
        );
    }

    #[test]
    fn serialized_config_reparses_to_the_same_config() {
        let mut config = RunConfig::default();
        apply_preset(&mut config, "weak_linkers").unwrap();
        config.mesh = MeshSource::File(String::from("cell.off"));
        config.refine = 2;
        config.params.tau = 0.00125;
        config.params.epsilon = 0.003;
        config.mode = ModelMode::Regularized;
        config.solver = MassMode::Lumped;
        config.output_dir = String::from("frames");
        config.output_every = 7;

        let text = config.serialize();
        let mut reparsed = RunConfig::default();
        parse_str(&mut reparsed, &text).unwrap();
        assert_eq!(reparsed, config);

        // And the round trip is a fixed point of serialization itself.
        assert_eq!(reparsed.serialize(), text);
    }

    #[test]
    fn every_documented_preset_resolves() {
        for name in [
            "table1",
            "imgdata",
            "weak_linkers",
            "high_tension",
            "high_pressure",
        ] {
            let mut config = RunConfig::default();
            apply_preset(&mut config, name).unwrap();
            config.validate().unwrap();
        }
        let mut config = RunConfig::default();
        assert!(apply_preset(&mut config, "table3").is_err());
    }
}
