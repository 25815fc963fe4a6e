//! Argument definitions and parsing helpers.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::memory::{DeltaSpec, MemorySpec, ZetaSpec};
use crate::scaling::TimescaleMode;
use crate::walk::{InnovationSpec, SamplerMode};

const DEFAULT_OUT: &str = "rvwalk-out";

#[derive(Parser, Debug)]
#[command(name = "rvwalk", version, about = "Step-reinforced random walks with regularly varying memory")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify (memory, p) into its regime and print the predicted scale.
    Regime(RegimeArgs),
    /// Simulate a batch of walks and write their checkpoints.
    Simulate(SimulateArgs),
    /// Run a verification suite, or `all`.
    Verify(VerifyArgs),
    /// Write the deterministic sequences and, optionally, the exact moments.
    Tables(TablesArgs),
    /// Exploratory time scales for critical examples.
    Timescale(TimescaleArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum Family {
    #[value(alias = "power-law")]
    Power,
    ContinuedProduct,
    #[value(alias = "log-modulated")]
    Logmod,
    SlowGrowth,
    Table,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ZetaKind {
    Zero,
    Power,
    Loglog,
}

#[derive(Args, Clone, Debug, Serialize)]
pub struct MemoryArgs {
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    #[arg(long, allow_hyphen_values = true)]
    pub gamma: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<f64>,
    #[arg(long, value_enum)]
    pub zeta: Option<ZetaKind>,
    #[arg(long, allow_hyphen_values = true)]
    pub kappa: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<f64>,
    /// File of memory weights separated by whitespace or commas (family `table`).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Memory spec as JSON, or `@path` to a JSON file. Overrides the other memory flags.
    #[arg(long)]
    pub spec_json: Option<String>,
}

impl MemoryArgs {
    pub fn to_spec(&self) -> Result<MemorySpec> {
        if let Some(j) = &self.spec_json {
            let text = match j.strip_prefix('@') {
                Some(path) => std::fs::read_to_string(path)?,
                None => j.clone(),
            };
            return MemorySpec::from_json(&text);
        }
        let family = self.family.ok_or_else(|| Error::InvalidInput("--family or --spec-json is required".into()))?;
        let gamma = self.gamma.ok_or_else(|| Error::InvalidInput("--gamma is required".into()))?;
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::InvalidInput(format!("--{name} is required for this family")));
        let spec = match family {
            Family::Power => MemorySpec::power_law(gamma),
            Family::ContinuedProduct => MemorySpec::continued_product(gamma),
            Family::Logmod => {
                let zeta = match self.zeta.unwrap_or(ZetaKind::Zero) {
                    ZetaKind::Zero => ZetaSpec::Zero,
                    ZetaKind::Power => ZetaSpec::Power { kappa: need(self.kappa, "kappa")?, rho: need(self.rho, "rho")? },
                    ZetaKind::Loglog => ZetaSpec::LogLog { kappa: need(self.kappa, "kappa")? },
                };
                MemorySpec::log_modulated(gamma, need(self.alpha, "alpha")?, zeta)
            }
            Family::SlowGrowth => MemorySpec::SlowGrowth { gamma, delta: DeltaSpec::PowerLogGap { alpha: need(self.alpha, "alpha")? } },
            Family::Table => {
                let path = self.table.as_ref().ok_or_else(|| Error::InvalidInput("--table is required for family table".into()))?;
                let values = std::fs::read_to_string(path)?
                    .split(|c: char| c.is_whitespace() || c == ',')
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<f64>().map_err(|e| Error::InvalidInput(format!("bad table entry {s:?}: {e}"))))
                    .collect::<Result<Vec<f64>>>()?;
                MemorySpec::custom_table(gamma, values)?
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct RegimeArgs {
    #[command(flatten)]
    pub memory: MemoryArgs,
    #[arg(long)]
    pub p: f64,
    /// Print the report as JSON.
    #[arg(long)]
    pub json: bool,
    #[arg(long, default_value = DEFAULT_OUT)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SamplerArg {
    Auto,
    Fenwick,
    Prefix,
    Uniform,
}

impl From<SamplerArg> for SamplerMode {
    fn from(s: SamplerArg) -> Self {
        match s {
            SamplerArg::Auto => SamplerMode::Auto,
            SamplerArg::Fenwick => SamplerMode::Fenwick,
            SamplerArg::Prefix => SamplerMode::Prefix,
            SamplerArg::Uniform => SamplerMode::Uniform,
        }
    }
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub memory: MemoryArgs,
    #[arg(long)]
    pub p: f64,
    /// Steps per walk.
    #[arg(long)]
    pub n: u64,
    #[arg(long, default_value_t = 1)]
    pub replicas: usize,
    #[arg(long, env = "RVWALK_SEED", default_value_t = 42)]
    pub seed: u64,
    /// `end`, `all`, `geometric:k`, `linear:k` or `list:a,b,...`.
    #[arg(long, default_value = "end")]
    pub checkpoints: String,
    /// Add M, L and N columns.
    #[arg(long)]
    pub record_martingales: bool,
    /// `rademacher`, `normal`, `pareto:<tail index>`, inline JSON or `@path`.
    #[arg(long, default_value = "rademacher")]
    pub innovation: String,
    #[arg(long, value_enum, default_value = "auto")]
    pub sampler: SamplerArg,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Cap on bytes allocated by the batch.
    #[arg(long)]
    pub memory_cap: Option<u64>,
    /// Write the little-endian binary format instead of CSV.
    #[arg(long)]
    pub binary: bool,
    #[arg(long, default_value = DEFAULT_OUT)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct VerifyArgs {
    /// Suite name or `all`.
    pub suite: String,
    /// Reduced problem sizes.
    #[arg(long)]
    pub quick: bool,
    #[arg(long, env = "RVWALK_SEED", default_value_t = 20240917)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Standard errors allowed in moment comparisons.
    #[arg(long, default_value_t = 4.0)]
    pub z: f64,
    /// Minimum p-value for goodness-of-fit tests.
    #[arg(long, default_value_t = 1e-3)]
    pub min_p: f64,
    /// Emit a gnuplot script next to each plot CSV.
    #[arg(long)]
    pub gnuplot: bool,
    #[arg(long, default_value = DEFAULT_OUT)]
    pub out_dir: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct TablesArgs {
    #[command(flatten)]
    pub memory: MemoryArgs,
    #[arg(long)]
    pub p: f64,
    /// Last index.
    #[arg(long)]
    pub n: u64,
    /// Also write exact moments.
    #[arg(long)]
    pub moments: bool,
    /// Innovation law for the moments; Rademacher adds the fourth-moment columns.
    #[arg(long, default_value = "rademacher")]
    pub innovation: String,
    #[arg(long)]
    pub gnuplot: bool,
    #[arg(long, default_value = DEFAULT_OUT)]
    pub out_dir: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ModeArg {
    Exponential,
    BrownianTuned,
}

impl From<ModeArg> for TimescaleMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Exponential => TimescaleMode::Exponential,
            ModeArg::BrownianTuned => TimescaleMode::BrownianTuned,
        }
    }
}

/// Cataloged critical examples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ExampleId {
    /// Power-law memory, `sigma_n^2 ~ n log n`.
    Nlogn,
    /// Log-modulated with `alpha = -(gamma+1)` and zero zeta.
    ZetaZero,
    /// Log-modulated with `alpha = -(gamma+1)` and power zeta (needs kappa, rho).
    ZetaPower,
    /// Log-modulated with `alpha = -(gamma+1)` and log-log zeta (needs kappa).
    Loglog,
    /// Log-modulated with `alpha = kappa = -(gamma+1)`.
    Logloglog,
    /// Slowly growing memory with `alpha` (default 0.5).
    Lighter,
}

#[derive(Args, Debug, Serialize)]
#[command(args_override_self = true)]
pub struct TimescaleArgs {
    #[command(flatten)]
    pub memory: MemoryArgs,
    /// Cataloged example; `--gamma` defaults to 0.
    #[arg(long, value_enum)]
    pub example: Option<ExampleId>,
    #[arg(long, value_enum, default_value = "exponential")]
    pub mode: ModeArg,
    /// Base index.
    #[arg(long)]
    pub n: u64,
    /// Comma-separated times.
    #[arg(long, default_value = "1,2")]
    pub t: String,
    /// Walks for the empirical correlations; 0 only prints the time scale.
    #[arg(long, default_value_t = 0)]
    pub replicas: usize,
    #[arg(long, env = "RVWALK_SEED", default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Refuse time scales that need more steps than this.
    #[arg(long, default_value_t = 100_000_000)]
    pub max_steps: u64,
    #[arg(long, default_value = DEFAULT_OUT)]
    pub out_dir: PathBuf,
}

impl TimescaleArgs {
    pub fn resolve_spec(&self) -> Result<MemorySpec> {
        let Some(ex) = self.example else {
            return self.memory.to_spec();
        };
        let gamma = self.memory.gamma.unwrap_or(0.0);
        let crit = -(gamma + 1.0);
        let need = |v: Option<f64>, name: &str| v.ok_or_else(|| Error::InvalidInput(format!("--{name} is required for this example")));
        let spec = match ex {
            ExampleId::Nlogn => MemorySpec::power_law(gamma),
            ExampleId::ZetaZero => MemorySpec::log_modulated(gamma, crit, ZetaSpec::Zero),
            ExampleId::ZetaPower => MemorySpec::log_modulated(
                gamma,
                crit,
                ZetaSpec::Power { kappa: need(self.memory.kappa, "kappa")?, rho: need(self.memory.rho, "rho")? },
            ),
            ExampleId::Loglog => MemorySpec::log_modulated(gamma, crit, ZetaSpec::LogLog { kappa: need(self.memory.kappa, "kappa")? }),
            ExampleId::Logloglog => MemorySpec::log_modulated(gamma, crit, ZetaSpec::LogLog { kappa: crit }),
            ExampleId::Lighter => MemorySpec::slow_growth(gamma, self.memory.alpha.unwrap_or(0.5)),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug, Serialize)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
    /// Directory for the reproduced files.
    #[arg(long)]
    pub out_dir: PathBuf,
}

pub fn parse_innovation(text: &str) -> Result<InnovationSpec> {
    let spec = match text {
        "rademacher" => InnovationSpec::Rademacher,
        "normal" | "standard-normal" | "gaussian" => InnovationSpec::StandardNormal,
        t if t.starts_with("pareto:") => {
            let k = t["pareto:".len()..]
                .parse::<f64>()
                .map_err(|e| Error::InvalidInput(format!("bad tail index in {t:?}: {e}")))?;
            InnovationSpec::SymmetricPareto { tail_index: k }
        }
        t if t.starts_with('@') => serde_json::from_str(&std::fs::read_to_string(&t[1..])?)?,
        t if t.trim_start().starts_with('{') => serde_json::from_str(t)?,
        t => return Err(Error::InvalidInput(format!("unknown innovation {t:?}"))),
    };
    spec.validate()?;
    Ok(spec)
}

pub fn parse_list(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| Error::InvalidInput(format!("bad number {s:?}: {e}"))))
        .collect()
}

/// Raw arguments with the contents of `--config <file>` inserted right after the
/// subcommand, so that explicit flags, which come later, win.
pub fn merge_config(raw: &[String]) -> Result<Vec<String>> {
    let mut rest = Vec::with_capacity(raw.len());
    let mut config = None;
    let mut it = raw.iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = Some(it.next().ok_or_else(|| Error::InvalidInput("--config needs a path".into()))?.clone());
        } else if let Some(p) = a.strip_prefix("--config=") {
            config = Some(p.to_string());
        } else {
            rest.push(a.clone());
        }
    }
    let Some(path) = config else {
        return Ok(rest);
    };
    let value: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path)?)?;
    let obj = value.as_object().ok_or_else(|| Error::InvalidInput("config file must hold a JSON object".into()))?;
    let mut injected = Vec::new();
    for (k, v) in obj {
        let flag = if k == "spec" { "--spec-json".to_string() } else { format!("--{}", k.replace('_', "-")) };
        match v {
            serde_json::Value::Bool(true) => injected.push(flag),
            serde_json::Value::Bool(false) | serde_json::Value::Null => {}
            serde_json::Value::String(s) => injected.extend([flag, s.clone()]),
            serde_json::Value::Number(n) => injected.extend([flag, n.to_string()]),
            serde_json::Value::Array(items) => {
                let joined: Vec<String> = items
                    .iter()
                    .map(|i| match i {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                injected.extend([flag, joined.join(",")]);
            }
            serde_json::Value::Object(_) => injected.extend([flag, v.to_string()]),
        }
    }
    if rest.len() < 2 {
        return Err(Error::InvalidInput("--config needs a subcommand".into()));
    }
    let mut out = rest[..2].to_vec();
    out.extend(injected);
    out.extend_from_slice(&rest[2..]);
    Ok(out)
}

/// Drop every `--out-dir` occurrence.
pub fn strip_out_dir(args: &[String]) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.iter();
    while let Some(a) = it.next() {
        if a == "--out-dir" {
            it.next();
        } else if !a.starts_with("--out-dir=") {
            out.push(a.clone());
        }
    }
    out
}

/// Record the resolved seed so that replays do not depend on the environment.
pub fn pin_seed(argv: &mut Vec<String>, seed: u64) {
    argv.push("--seed".into());
    argv.push(seed.to_string());
}

pub fn gnuplot_series(csv: &str, series: &[&str]) -> String {
    let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\nset logscale x\nset xlabel 'n'\n");
    let plots: Vec<String> = series
        .iter()
        .map(|name| format!("'{csv}' using 2:(strcol(1) eq '{name}' ? $3 : 1/0) with linespoints title '{name}'"))
        .collect();
    s.push_str(&format!("plot {}\npause -1\n", plots.join(", \\\n     ")));
    s
}

pub fn gnuplot_tables(with_moments: bool) -> String {
    let mut s = String::from(
        "set datafile separator ','\nset logscale xy\nset xlabel 'n'\n\
         plot 'sequences.csv' using 1:6 skip 1 with lines title 'sigma_sq', \\\n     \
         'sequences.csv' using 1:5 skip 1 with lines title 'v_sq'\npause -1\n",
    );
    if with_moments {
        s.push_str("plot 'moments.csv' using 1:2 skip 1 with lines title 'E_S_sq', \\\n     'moments.csv' using 1:3 skip 1 with lines title 'E_M_sq'\npause -1\n");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(a: &[&str]) -> Vec<String> {
        a.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn out_dir_is_stripped() {
        assert_eq!(strip_out_dir(&v(&["simulate", "--out-dir", "x", "--p", "0.5", "--out-dir=y"])), v(&["simulate", "--p", "0.5"]));
    }

    #[test]
    fn innovations_parse() {
        assert_eq!(parse_innovation("rademacher").unwrap(), InnovationSpec::Rademacher);
        assert_eq!(parse_innovation("pareto:3").unwrap(), InnovationSpec::SymmetricPareto { tail_index: 3.0 });
        assert!(parse_innovation("pareto:0.5").is_err());
        assert!(parse_innovation("cauchy").is_err());
    }
}
