//! TOML configuration files.
//!
//! ```toml
//! [hurst]                       # required
//! family = "sin"                # constant | affine | sin | logistic
//! h0 = 0.7
//! h1 = 0.1
//! phase = 0.0
//!
//! [payoff]                      # call | abs | quadratic
//! kind = "call"
//! a = 0.0
//!
//! [simulator]
//! kind = "volterra"             # volterra | cholesky | moving_average
//! oversample = 8
//!
//! [experiment]
//! n_grid = [64, 128, 256, 512]
//! replications = 5000
//! seed = 1
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Unknown keys are rejected with the line and column of the offending entry.
//! The machine-readable schema lives in `schema/config.schema.json`.

use std::fs;
use std::path::{Path, PathBuf};

use std::collections::BTreeMap;

use serde::Deserialize;
use toml::{Spanned, Value};

use crate::drivers::moving_average::DEFAULT_TRUNCATION;
use crate::drivers::{SimulatorKind, DEFAULT_OVERSAMPLE};
use crate::error::{Error, Result};
use crate::experiments::{ExperimentConfig, DEFAULT_CONST_TOL, DEFAULT_SLOPE_TOL};
use crate::hurst::HurstFunction;
use crate::payoff::{make_abs_payoff, make_call_payoff, make_quadratic_payoff_on, ConvexPayoff, QUADRATIC_SUPPORT};
use crate::theory::{DEFAULT_DELTA, DEFAULT_REL_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigFile {
    pub hurst: HurstSpec,
    /// Optional here so that commands which need a payoff can tell "absent"
    /// from "defaulted"; see [`ConfigFile::payoff_or_default`].
    pub payoff: Option<PayoffSpec>,
    pub simulator: SimulatorSpec,
    pub experiment: ExperimentSpec,
    pub output: OutputSpec,
}

/// The tagged sections are read as spanned key maps and converted by hand:
/// serde's internally tagged enums buffer their input and lose positions.
type SpannedTable = Spanned<BTreeMap<Spanned<String>, Spanned<Value>>>;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    hurst: SpannedTable,
    #[serde(default)]
    payoff: Option<SpannedTable>,
    #[serde(default)]
    simulator: SimulatorSpec,
    #[serde(default)]
    experiment: ExperimentSpec,
    #[serde(default)]
    output: OutputSpec,
}

/// Reads one tagged section, reporting every problem at its source position.
struct TaggedSection<'a> {
    text: &'a str,
    section: &'static str,
    tag: &'static str,
    table: &'a SpannedTable,
}

impl<'a> TaggedSection<'a> {
    fn error(&self, span: std::ops::Range<usize>, msg: impl std::fmt::Display) -> Error {
        let (line, col) = line_col(self.text, span.start);
        Error::Config(format!("line {line}, column {col}: [{}] {msg}", self.section))
    }

    fn entry(&self, key: &str) -> Option<(&'a Spanned<String>, &'a Spanned<Value>)> {
        self.table.get_ref().iter().find(|(k, _)| k.get_ref() == key)
    }

    fn variant(&self) -> Result<&'a str> {
        match self.entry(self.tag) {
            Some((_, v)) => v
                .get_ref()
                .as_str()
                .ok_or_else(|| self.error(v.span(), format!("`{}` must be a string", self.tag))),
            None => Err(self.error(self.table.span(), format!("missing field `{}`", self.tag))),
        }
    }

    /// Rejects keys outside `allowed` (the tag is always allowed).
    fn only(&self, variant: &str, allowed: &[&str]) -> Result<()> {
        for k in self.table.get_ref().keys() {
            let key = k.get_ref().as_str();
            if key != self.tag && !allowed.contains(&key) {
                return Err(self.error(
                    k.span(),
                    format!("unknown field `{key}` for {} = \"{variant}\", expected one of {allowed:?}", self.tag),
                ));
            }
        }
        Ok(())
    }

    fn number(&self, key: &str) -> Result<Option<f64>> {
        let Some((_, v)) = self.entry(key) else { return Ok(None) };
        match v.get_ref() {
            Value::Float(x) => Ok(Some(*x)),
            Value::Integer(i) => Ok(Some(*i as f64)),
            _ => Err(self.error(v.span(), format!("`{key}` must be a number"))),
        }
    }

    fn required(&self, key: &str) -> Result<f64> {
        self.number(key)?.ok_or_else(|| self.error(self.table.span(), format!("missing field `{key}`")))
    }

    fn pair(&self, key: &str) -> Result<Option<[f64; 2]>> {
        let Some((_, v)) = self.entry(key) else { return Ok(None) };
        let bad = || self.error(v.span(), format!("`{key}` must be an array of two numbers"));
        let arr = v.get_ref().as_array().ok_or_else(bad)?;
        let nums: Vec<f64> = arr
            .iter()
            .map(|x| x.as_float().or_else(|| x.as_integer().map(|i| i as f64)))
            .collect::<Option<_>>()
            .ok_or_else(bad)?;
        <[f64; 2]>::try_from(nums).map(Some).map_err(|_| bad())
    }

    fn unknown_variant(&self, got: &str, expected: &[&str]) -> Error {
        let span = self.entry(self.tag).map(|(_, v)| v.span()).unwrap_or_else(|| self.table.span());
        self.error(span, format!("unknown {} `{got}`, expected one of {expected:?}", self.tag))
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn hurst_from(s: &TaggedSection) -> Result<HurstSpec> {
    let family = s.variant()?;
    let spec = match family {
        "constant" => {
            s.only(family, &["h", "alpha"])?;
            HurstSpec::Constant { h: s.required("h")?, alpha: s.number("alpha")? }
        }
        "affine" => {
            s.only(family, &["h0", "slope", "alpha"])?;
            HurstSpec::Affine { h0: s.required("h0")?, slope: s.required("slope")?, alpha: s.number("alpha")? }
        }
        "sin" => {
            s.only(family, &["h0", "h1", "phase", "alpha"])?;
            HurstSpec::Sin {
                h0: s.required("h0")?,
                h1: s.required("h1")?,
                phase: s.number("phase")?.unwrap_or(0.0),
                alpha: s.number("alpha")?,
            }
        }
        "logistic" => {
            s.only(family, &["lo", "hi", "center", "steepness", "alpha"])?;
            HurstSpec::Logistic {
                lo: s.required("lo")?,
                hi: s.required("hi")?,
                center: s.required("center")?,
                steepness: s.required("steepness")?,
                alpha: s.number("alpha")?,
            }
        }
        other => return Err(s.unknown_variant(other, &["constant", "affine", "sin", "logistic"])),
    };
    Ok(spec)
}

fn payoff_from(s: &TaggedSection) -> Result<PayoffSpec> {
    let kind = s.variant()?;
    let spec = match kind {
        "call" => {
            s.only(kind, &["a"])?;
            PayoffSpec::Call { a: s.number("a")?.unwrap_or(0.0) }
        }
        "abs" => {
            s.only(kind, &["a"])?;
            PayoffSpec::Abs { a: s.number("a")?.unwrap_or(0.0) }
        }
        "quadratic" => {
            s.only(kind, &["support"])?;
            PayoffSpec::Quadratic { support: s.pair("support")? }
        }
        other => return Err(s.unknown_variant(other, &["call", "abs", "quadratic"])),
    };
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq)]
pub enum HurstSpec {
    Constant {
        h: f64,
        alpha: Option<f64>,
    },
    Affine {
        h0: f64,
        slope: f64,
        alpha: Option<f64>,
    },
    Sin {
        h0: f64,
        h1: f64,
        phase: f64,
        alpha: Option<f64>,
    },
    Logistic {
        lo: f64,
        hi: f64,
        center: f64,
        steepness: f64,
        alpha: Option<f64>,
    },
}

impl HurstSpec {
    pub fn build(&self) -> Result<HurstFunction> {
        let (h, alpha) = match *self {
            HurstSpec::Constant { h, alpha } => (HurstFunction::constant(h)?, alpha),
            HurstSpec::Affine { h0, slope, alpha } => (HurstFunction::affine(h0, slope)?, alpha),
            HurstSpec::Sin { h0, h1, phase, alpha } => (HurstFunction::sinusoidal(h0, h1, phase)?, alpha),
            HurstSpec::Logistic { lo, hi, center, steepness, alpha } => {
                (HurstFunction::logistic(lo, hi, center, steepness)?, alpha)
            }
        };
        match alpha {
            Some(a) => h.with_alpha(a),
            None => Ok(h),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PayoffSpec {
    Call { a: f64 },
    Abs { a: f64 },
    Quadratic { support: Option<[f64; 2]> },
}

impl Default for PayoffSpec {
    fn default() -> Self {
        PayoffSpec::Call { a: 0.0 }
    }
}

impl PayoffSpec {
    pub fn build(&self) -> Result<ConvexPayoff> {
        Ok(match *self {
            PayoffSpec::Call { a } => make_call_payoff(a),
            PayoffSpec::Abs { a } => make_abs_payoff(a),
            PayoffSpec::Quadratic { support } => {
                let [lo, hi] = support.unwrap_or([QUADRATIC_SUPPORT.0, QUADRATIC_SUPPORT.1]);
                make_quadratic_payoff_on(lo, hi)?
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulatorSpec {
    pub kind: SimulatorKind,
    pub oversample: usize,
    pub truncation: f64,
}

impl Default for SimulatorSpec {
    fn default() -> Self {
        Self { kind: SimulatorKind::Volterra, oversample: DEFAULT_OVERSAMPLE, truncation: DEFAULT_TRUNCATION }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub delta_htilde: f64,
    pub slope_tol: f64,
    pub const_tol: f64,
    pub rel_tol: f64,
    /// Worker cap; results do not depend on it.
    pub threads: Option<usize>,
    /// Accept a Hurst function whose advisory (A2) check failed.
    pub force: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            n_grid: vec![64, 128, 256, 512],
            replications: 5000,
            seed: 1,
            delta_htilde: DEFAULT_DELTA,
            slope_tol: DEFAULT_SLOPE_TOL,
            const_tol: DEFAULT_CONST_TOL,
            rel_tol: DEFAULT_REL_TOL,
            threads: None,
            force: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: PathBuf::from(".") }
    }
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let section = |section, tag, table| TaggedSection { text, section, tag, table };
        let hurst = hurst_from(&section("hurst", "family", &raw.hurst))?;
        let payoff = raw.payoff.as_ref().map(|t| payoff_from(&section("payoff", "kind", t))).transpose()?;
        Ok(Self { hurst, payoff, simulator: raw.simulator, experiment: raw.experiment, output: raw.output })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn payoff_or_default(&self) -> PayoffSpec {
        self.payoff.clone().unwrap_or_default()
    }

    /// Builds the experiment; fails with a config error if `[payoff]` is absent.
    pub fn experiment_config(&self) -> Result<ExperimentConfig> {
        let payoff = self
            .payoff
            .clone()
            .ok_or_else(|| Error::Config("a convergence study needs an explicit [payoff] section".into()))?;
        self.experiment_config_with_payoff(payoff)
    }

    /// Builds the experiment with `payoff` in place of the `[payoff]` section.
    pub fn experiment_config_with_payoff(&self, payoff: PayoffSpec) -> Result<ExperimentConfig> {
        let e = &self.experiment;
        let mut c = ExperimentConfig::new(self.hurst.build()?, payoff.build()?, self.simulator.kind);
        c.n_grid = e.n_grid.clone();
        c.replications = e.replications;
        c.master_seed = e.seed;
        c.oversample = self.simulator.oversample;
        c.truncation = self.simulator.truncation;
        c.delta_htilde = e.delta_htilde;
        c.slope_tol = e.slope_tol;
        c.const_tol = e.const_tol;
        c.rel_tol = e.rel_tol;
        c.threads = e.threads;
        c.force = e.force;
        c.validate()?;
        Ok(c)
    }
}
