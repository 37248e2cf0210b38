//! Run configuration: a flat `key = value` document (or a flat JSON object)
//! merged with command-line flags.

use std::collections::BTreeMap;

use poissonproj::bench::{BenchmarkConfig, IntensityId, Selection};
use poissonproj::selection::{LogBase, PartitionRule, PenaltySpec};
use poissonproj::{BasisFamily, CovariateKind, CovariateProcess, Quadrature};

use crate::CliError;

pub const KEYS: &[&str] = &[
    "n",
    "replicates",
    "design",
    "ar_coefficient",
    "noise_sd",
    "intensity",
    "family",
    "selection",
    "penalty",
    "xi",
    "kappa",
    "cells",
    "strict_partition",
    "log_base",
    "seed",
    "panels",
    "grid",
    "ns",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

fn usage<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Usage(msg.into()))
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_flat(text)
        }
    }

    /// One `key = value` per line; blank lines and `#` comments are ignored.
    pub fn parse_flat(text: &str) -> Result<Self, CliError> {
        let mut s = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("config line {}: expected `key = value`", lineno + 1));
            };
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }

    pub fn parse_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config JSON: {e}")))?;
        let Some(obj) = value.as_object() else {
            return usage("config JSON must be an object");
        };
        let mut s = Self::default();
        for (k, v) in obj {
            let text = match v {
                serde_json::Value::String(t) => t.clone(),
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                serde_json::Value::Array(items) => items
                    .iter()
                    .map(|i| match i {
                        serde_json::Value::String(t) => t.clone(),
                        other => other.to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(","),
                _ => return usage(format!("config key `{k}` has an unsupported value")),
            };
            s.set(k, &text)?;
        }
        Ok(s)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        if !KEYS.contains(&key) {
            return usage(format!("unknown config key `{key}`"));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::Usage(format!("invalid value `{v}` for `{key}`"))),
        }
    }

    fn required<T: std::str::FromStr>(&self, key: &str, context: &str) -> Result<T, CliError> {
        self.parsed(key)?
            .ok_or_else(|| CliError::Usage(format!("`{key}` is required {context}")))
    }

    pub fn design(&self) -> Result<CovariateProcess, CliError> {
        let mut spec = match self.get("design").unwrap_or("iid") {
            "iid" => CovariateProcess::iid(),
            "mixing" => CovariateProcess::mixing(),
            other => return usage(format!("unknown design `{other}` (iid|mixing)")),
        };
        if let Some(a) = self.parsed("ar_coefficient")? {
            spec.ar_coefficient = a;
        }
        if let Some(s) = self.parsed("noise_sd")? {
            spec.noise_sd = s;
        }
        if spec.kind == CovariateKind::IidUniform
            && (self.get("ar_coefficient").is_some() || self.get("noise_sd").is_some())
        {
            return usage("ar_coefficient/noise_sd only apply to the mixing design");
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn intensity(&self) -> Result<IntensityId, CliError> {
        parse_intensity(self.get("intensity").unwrap_or("piecewise"))
    }

    pub fn family(&self) -> Result<BasisFamily, CliError> {
        parse_family(self.get("family").unwrap_or("hist"))
    }

    pub fn penalty(&self) -> Result<PenaltySpec, CliError> {
        let Some(name) = self.get("penalty") else {
            return usage("`penalty` is required (known-xi|plugin|dependent|practical)");
        };
        let partition = PartitionRule {
            cells: self.parsed("cells")?,
            strict: self.parsed("strict_partition")?.unwrap_or(false),
        };
        let log_base = match self.get("log_base").unwrap_or("natural") {
            "natural" | "ln" => LogBase::Natural,
            "binary" | "log2" => LogBase::Binary,
            other => return usage(format!("unknown log base `{other}` (natural|binary)")),
        };
        let spec = match name {
            "known-xi" => PenaltySpec::KnownXi {
                xi: self.required("xi", "for the known-xi penalty")?,
            },
            "plugin" => PenaltySpec::Plugin { partition },
            "dependent" => PenaltySpec::Dependent { partition },
            "practical" => PenaltySpec::Practical {
                xi: self.required("xi", "for the practical penalty")?,
                kappa: self.required("kappa", "for the practical penalty")?,
                log_base,
            },
            other => return usage(format!("unknown penalty `{other}`")),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn selection(&self) -> Result<Selection, CliError> {
        match self.get("selection").unwrap_or("penalized") {
            "penalized" => Ok(Selection::Penalized {
                penalty: self.penalty()?,
            }),
            "oracle" => Ok(Selection::Oracle),
            other => match other.strip_prefix("fixed:").map(str::parse) {
                Some(Ok(index)) => Ok(Selection::Fixed { index }),
                _ => usage(format!("unknown selection `{other}` (penalized|oracle|fixed:<m>)")),
            },
        }
    }

    /// Benchmark configuration; `n` may be supplied by the caller (rate studies).
    pub fn benchmark(&self, default_replicates: usize, n: Option<usize>) -> Result<BenchmarkConfig, CliError> {
        let n = match n {
            Some(n) => n,
            None => self.required("n", "")?,
        };
        let config = BenchmarkConfig {
            n,
            replicates: self.parsed("replicates")?.unwrap_or(default_replicates),
            design: self.design()?,
            intensity: self.intensity()?,
            family: self.family()?,
            selection: self.selection()?,
            master_seed: self.parsed("seed")?.unwrap_or(0),
            quadrature: Quadrature::simpson(self.parsed("panels")?.unwrap_or(4096))?,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn ns(&self) -> Result<Vec<usize>, CliError> {
        let Some(list) = self.get("ns") else {
            return usage("`ns` is required for rate studies");
        };
        list.split(',')
            .map(|t| {
                t.trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("invalid sample size `{t}` in ns")))
            })
            .collect()
    }
}

pub fn parse_intensity(text: &str) -> Result<IntensityId, CliError> {
    let id = if text == "piecewise" {
        IntensityId::Piecewise
    } else if let Some(c) = text.strip_prefix("const:") {
        let value = c
            .parse()
            .map_err(|_| CliError::Usage(format!("invalid constant `{c}`")))?;
        IntensityId::Constant { value }
    } else if let Some(rest) = text.strip_prefix("cosine:") {
        let parts: Vec<f64> = rest
            .split(':')
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| CliError::Usage(format!("invalid cosine intensity `{text}`")))?;
        let [level, amplitude] = parts[..] else {
            return usage("cosine intensity is `cosine:<level>:<amplitude>`");
        };
        IntensityId::Cosine { level, amplitude }
    } else {
        return usage(format!("unknown intensity `{text}` (piecewise|const:<c>|cosine:<a>:<b>)"));
    };
    id.build()?;
    Ok(id)
}

pub fn parse_family(text: &str) -> Result<BasisFamily, CliError> {
    match text {
        "hist" | "histogram" => Ok(BasisFamily::DyadicHistogram),
        "trig" | "trigonometric" => Ok(BasisFamily::Trigonometric),
        other => usage(format!("unknown family `{other}` (trig|hist)")),
    }
}
