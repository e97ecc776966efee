//! Merges the optional `key = value` config file with command-line flags.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Axioms,
    Metric,
    Classify,
    Noise,
    Rawnsley,
    Toeplitz,
}

impl Command {
    /// Tolerance names the command understands, with their defaults.
    pub fn tolerances(self) -> &'static [(&'static str, f64)] {
        match self {
            // minimum fitted orders in ℏ
            Command::Axioms => &[("r1", 0.8), ("r2", 0.8), ("r3", 1.8), ("r4", 0.8), ("r5", 0.8)],
            // relative error of the total against its closed form; slack below 2π
            Command::Metric => &[("total", 0.05), ("least", 0.05)],
            Command::Classify => &[("t", 0.05), ("mu", 0.05), ("exponent", 1.8)],
            Command::Noise => &[("slack", 1e-10), ("variance", 1e-10)],
            // coefficient error of r against its expected form at the finest level
            Command::Rawnsley => &[("r", 0.2), ("density", 1e-10)],
            Command::Toeplitz => &[("identity", 1e-10)],
        }
    }
}

/// Batch experiments on Berezin-Toeplitz quantizations of the sphere.
///
/// Settings may also come from `--config FILE` with one `key = value` per
/// line (keys as the long flag names, `tol.<name>` for tolerances); flags
/// override the file. Tolerances are set with `--tol.<name>=<value>`.
#[derive(Debug, Parser)]
#[command(name = "bt-lab", version)]
pub struct Cli {
    #[arg(value_enum)]
    pub command: Command,
    /// standard | heat:<t> | markov[:<rho>] | twist[:<v>] | metaplectic
    #[arg(long)]
    pub quantizer: Option<String>,
    /// Comma-separated levels, e.g. 16,32,64.
    #[arg(long)]
    pub k: Option<String>,
    /// First test function, e.g. `z` or `x*y + P2`.
    #[arg(long)]
    pub f: Option<String>,
    /// Second test function.
    #[arg(long)]
    pub g: Option<String>,
    /// Smearing form: iso:<s>, zz:<s> or a CSV path.
    #[arg(long)]
    pub rho: Option<String>,
    /// Heat parameter.
    #[arg(long)]
    pub t: Option<String>,
    /// Vector field: rot:<a>,<b>,<c> and/or grad:<function>, joined by `;`.
    #[arg(long)]
    pub v: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Multiplier table (k,l,m_l,alpha_l) to classify instead of a quantizer.
    #[arg(long)]
    pub multipliers: Option<PathBuf>,
    /// Randomized trials per level.
    #[arg(long)]
    pub trials: Option<String>,
    /// Minimal exact degree of the quadrature grid carrying metric output.
    #[arg(long)]
    pub grid: Option<String>,
}

/// Fully resolved settings for one run.
#[derive(Debug, Clone)]
pub struct Settings {
    pub command: Command,
    pub quantizer: String,
    pub ks: Vec<usize>,
    pub f: String,
    pub g: String,
    pub rho: Option<String>,
    pub t: Option<f64>,
    pub v: Option<String>,
    pub seed: u64,
    pub out: PathBuf,
    pub multipliers: Option<PathBuf>,
    pub trials: usize,
    pub grid: usize,
    pub tol: BTreeMap<String, f64>,
}

impl Settings {
    pub fn tol(&self, name: &str) -> f64 {
        self.tol[name]
    }
}

/// `(name, value)` tolerance overrides as given on the command line.
pub type ToleranceArgs = Vec<(String, String)>;

/// Splits `--tol.<name>[=value]` arguments off before clap sees the rest.
pub fn split_tolerances(args: Vec<String>) -> Result<(Vec<String>, ToleranceArgs)> {
    let mut rest = Vec::new();
    let mut tols = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if let Some(spec) = a.strip_prefix("--tol.") {
            let (name, value) = match spec.split_once('=') {
                Some((n, v)) => (n.to_string(), v.to_string()),
                None => {
                    let v = it.next().with_context(|| format!("--tol.{spec} needs a value"))?;
                    (spec.to_string(), v)
                }
            };
            tols.push((name, value));
        } else {
            rest.push(a);
        }
    }
    Ok((rest, tols))
}

fn read_config(path: &PathBuf) -> Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut map = BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected `key = value`", path.display(), n + 1);
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().ok().with_context(|| format!("invalid value `{value}` for {key}"))
}

pub fn parse_levels(value: &str) -> Result<Vec<usize>> {
    let ks: Vec<usize> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num("k", s))
        .collect::<Result<_>>()?;
    if ks.is_empty() {
        bail!("the k list is empty");
    }
    if let Some(k) = ks.iter().find(|&&k| k < 2) {
        bail!("level {k} is below the minimum of 2");
    }
    Ok(ks)
}

const CONFIG_KEYS: [&str; 12] = [
    "quantizer", "k", "f", "g", "rho", "t", "v", "seed", "out", "multipliers", "trials", "grid",
];

/// Resolves flags over the config file over defaults. Any error here is a
/// usage error.
pub fn resolve(cli: Cli, cli_tols: ToleranceArgs) -> Result<Settings> {
    let file = match &cli.config {
        Some(p) => read_config(p)?,
        None => BTreeMap::new(),
    };
    for key in file.keys() {
        if !CONFIG_KEYS.contains(&key.as_str()) && !key.starts_with("tol.") {
            bail!("unknown config key `{key}`");
        }
    }
    let pick = |flag: &Option<String>, key: &str| flag.clone().or_else(|| file.get(key).cloned());
    let pick_path = |flag: &Option<PathBuf>, key: &str| flag.clone().or_else(|| file.get(key).map(PathBuf::from));

    let command = cli.command;
    let default_ks = match command {
        Command::Axioms => "16,32,64",
        Command::Metric => "64,128",
        Command::Classify => "32,64,128",
        Command::Noise => "2,4,8",
        Command::Rawnsley => "16,32,64",
        Command::Toeplitz => "8",
    };
    let ks = parse_levels(&pick(&cli.k, "k").unwrap_or_else(|| default_ks.into()))?;

    let mut tol: BTreeMap<String, f64> = command.tolerances().iter().map(|(n, v)| (n.to_string(), *v)).collect();
    let from_file = file
        .iter()
        .filter_map(|(k, v)| k.strip_prefix("tol.").map(|n| (n.to_string(), v.clone())));
    for (name, value) in from_file.chain(cli_tols) {
        if !tol.contains_key(&name) {
            let known: Vec<&str> = command.tolerances().iter().map(|(n, _)| *n).collect();
            bail!("unknown tolerance `{name}` for this command (known: {})", known.join(", "));
        }
        let v: f64 = parse_num(&format!("tol.{name}"), &value)?;
        if !v.is_finite() {
            bail!("tolerance tol.{name} must be finite");
        }
        tol.insert(name, v);
    }

    Ok(Settings {
        command,
        quantizer: pick(&cli.quantizer, "quantizer").unwrap_or_else(|| "standard".into()),
        ks,
        f: pick(&cli.f, "f").unwrap_or_else(|| "z".into()),
        g: pick(&cli.g, "g").unwrap_or_else(|| "P2".into()),
        rho: pick(&cli.rho, "rho"),
        t: pick(&cli.t, "t").map(|v| parse_num("t", &v)).transpose()?,
        v: pick(&cli.v, "v"),
        seed: pick(&cli.seed, "seed").map(|v| parse_num("seed", &v)).transpose()?.unwrap_or(0),
        out: pick_path(&cli.out, "out").unwrap_or_else(|| PathBuf::from("out")),
        multipliers: pick_path(&cli.multipliers, "multipliers"),
        trials: pick(&cli.trials, "trials").map(|v| parse_num("trials", &v)).transpose()?.unwrap_or(334),
        grid: pick(&cli.grid, "grid").map(|v| parse_num("grid", &v)).transpose()?.unwrap_or(16),
        tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_flags_are_split_off() {
        let args = ["bt-lab", "axioms", "--tol.r3=1.5", "--k", "8,16", "--tol.r1", "0.7"];
        let (rest, tols) = split_tolerances(args.iter().map(|s| s.to_string()).collect()).unwrap();
        assert_eq!(rest, ["bt-lab", "axioms", "--k", "8,16"]);
        assert_eq!(tols, [("r3".into(), "1.5".into()), ("r1".into(), "0.7".into())]);
    }

    #[test]
    fn level_lists() {
        assert_eq!(parse_levels("8, 16,32").unwrap(), [8, 16, 32]);
        assert!(parse_levels("").is_err());
        assert!(parse_levels("1,4").is_err());
        assert!(parse_levels("4,x").is_err());
    }
}
