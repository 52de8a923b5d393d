//! Run configuration: a JSON document, overridden by environment variables
//! (output directory, thread count) and then by command-line flags.

use clap::Args;
use manyscat_core::{Complex64, Error, Result};
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

pub const ENV_OUTPUT_DIR: &str = "MANYSCAT_OUTPUT_DIR";
pub const ENV_THREADS: &str = "MANYSCAT_THREADS";

/// A complex scalar written either as a number or as `[re, im]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComplexValue {
    Real(f64),
    Pair([f64; 2]),
}

impl ComplexValue {
    pub fn value(self) -> Complex64 {
        match self {
            ComplexValue::Real(r) => Complex64::new(r, 0.0),
            ComplexValue::Pair([r, i]) => Complex64::new(r, i),
        }
    }
}

impl std::str::FromStr for ComplexValue {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let num = |t: &str| t.parse::<f64>().map_err(|_| format!("cannot parse '{t}' as a number"));
        match parts.as_slice() {
            [r] => Ok(ComplexValue::Real(num(r)?)),
            [r, i] => Ok(ComplexValue::Pair([num(r)?, num(i)?])),
            _ => Err(format!("expected 're' or 're,im', got '{s}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CouplingArg {
    Full,
    Leading,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SolverArg {
    Auto,
    Dense,
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

/// Every field is optional in the document; defaults are filled per command.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub k: Option<f64>,
    pub alpha: Option<[f64; 3]>,
    pub kappa: Option<f64>,
    pub kappa1: Option<f64>,
    pub a: Option<f64>,
    pub a_sweep: Option<Vec<f64>>,
    pub h: Option<ComplexValue>,
    pub h_file: Option<PathBuf>,
    pub density: Option<f64>,
    pub density_file: Option<PathBuf>,
    pub p: Option<ComplexValue>,
    pub p_file: Option<PathBuf>,
    pub nsq: Option<ComplexValue>,
    pub nsq_file: Option<PathBuf>,
    pub n0sq: Option<ComplexValue>,
    pub n_const: Option<f64>,
    pub domain: Option<BoxSpec>,
    pub cube_side: Option<f64>,
    pub spacing_prefactor: Option<f64>,
    pub resolution: Option<usize>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub tol: Option<f64>,
    pub coupling: Option<CouplingArg>,
    pub solver: Option<SolverArg>,
    pub dense_threshold: Option<usize>,
    pub near_field_guard: Option<f64>,
    pub probe_offset: Option<f64>,
    pub probe_points: Option<usize>,
    pub l_max: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub deterministic: Option<bool>,
}

/// Flags mirroring [`RunConfig`]; any flag given wins over the document.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON configuration document.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub k: Option<f64>,
    /// Incident direction as `x,y,z`.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub alpha: Option<Vec<f64>>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub kappa1: Option<f64>,
    #[arg(long)]
    pub a: Option<f64>,
    /// Radii as a comma-separated list.
    #[arg(long, value_delimiter = ',')]
    pub a_sweep: Option<Vec<f64>>,
    /// Constant impedance weight `re` or `re,im`.
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<ComplexValue>,
    #[arg(long)]
    pub h_file: Option<PathBuf>,
    #[arg(long)]
    pub density: Option<f64>,
    #[arg(long)]
    pub density_file: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub p: Option<ComplexValue>,
    #[arg(long)]
    pub p_file: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub nsq: Option<ComplexValue>,
    #[arg(long)]
    pub nsq_file: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    pub n0sq: Option<ComplexValue>,
    #[arg(long)]
    pub n_const: Option<f64>,
    #[arg(long)]
    pub cube_side: Option<f64>,
    #[arg(long)]
    pub spacing_prefactor: Option<f64>,
    #[arg(long)]
    pub resolution: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum)]
    pub coupling: Option<CouplingArg>,
    #[arg(long, value_enum)]
    pub solver: Option<SolverArg>,
    #[arg(long)]
    pub dense_threshold: Option<usize>,
    #[arg(long)]
    pub near_field_guard: Option<f64>,
    #[arg(long)]
    pub probe_offset: Option<f64>,
    #[arg(long)]
    pub probe_points: Option<usize>,
    #[arg(long)]
    pub l_max: Option<usize>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Fixed-order reductions for bit-reproducible output.
    #[arg(long)]
    pub deterministic: bool,
}

macro_rules! take {
    ($cfg:ident, $ov:ident, $($field:ident),*) => {
        $( if $ov.$field.is_some() { $cfg.$field = $ov.$field.clone(); } )*
    };
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Domain(format!("invalid configuration: {e}")))
    }

    /// Document, then environment, then flags.
    pub fn assemble(ov: &Overrides, env: impl Fn(&str) -> Option<String>) -> Result<Self> {
        let mut cfg = match &ov.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                Self::from_json(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(dir) = env(ENV_OUTPUT_DIR) {
            cfg.output_dir = Some(PathBuf::from(dir));
        }
        if let Some(t) = env(ENV_THREADS) {
            let n = t
                .parse()
                .map_err(|_| Error::Domain(format!("{ENV_THREADS} must be a positive integer, got '{t}'")))?;
            cfg.threads = Some(n);
        }
        take!(
            cfg,
            ov,
            k,
            kappa,
            kappa1,
            a,
            a_sweep,
            h,
            h_file,
            density,
            density_file,
            p,
            p_file,
            nsq,
            nsq_file,
            n0sq,
            n_const,
            cube_side,
            spacing_prefactor,
            resolution,
            seed,
            seeds,
            tol,
            coupling,
            solver,
            dense_threshold,
            near_field_guard,
            probe_offset,
            probe_points,
            l_max,
            output_dir,
            threads
        );
        if let Some(v) = &ov.alpha {
            cfg.alpha = Some([v[0], v[1], v[2]]);
        }
        if ov.deterministic {
            cfg.deterministic = Some(true);
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_values_parse_both_forms() {
        assert_eq!("1.5".parse::<ComplexValue>().unwrap().value(), Complex64::new(1.5, 0.0));
        assert_eq!(
            "1,-0.5".parse::<ComplexValue>().unwrap().value(),
            Complex64::new(1.0, -0.5)
        );
        assert!("1,2,3".parse::<ComplexValue>().is_err());
        let c: RunConfig = RunConfig::from_json(r#"{"h": [1, -2], "p": 3}"#).unwrap();
        assert_eq!(c.h.unwrap().value(), Complex64::new(1.0, -2.0));
        assert_eq!(c.p.unwrap().value(), Complex64::new(3.0, 0.0));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"kapa": 0.5}"#).is_err());
    }

    #[test]
    fn precedence_is_document_env_flags() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"a": 0.1, "seed": 3, "output_dir": "doc"}"#).unwrap();
        let ov = Overrides {
            config: Some(path),
            seed: Some(9),
            ..Default::default()
        };
        let env = |k: &str| (k == ENV_OUTPUT_DIR).then(|| "from-env".to_string());
        let c = RunConfig::assemble(&ov, env).unwrap();
        assert_eq!(c.a, Some(0.1));
        assert_eq!(c.seed, Some(9));
        assert_eq!(c.output_dir, Some(PathBuf::from("from-env")));
    }
}
