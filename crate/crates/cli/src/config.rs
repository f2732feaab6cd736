//! Flat `key = value` run configuration merged with command-line overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use coopfield::experiments::{uniform_grid, Solver};
use coopfield::montecarlo::ChainConfig;
use coopfield::{GameParams, RiskMode};

use crate::error::{CliError, CliResult};

/// Every accepted key, as spelled in config files and (with `--`) on the
/// command line.
pub const KEYS: &[&str] = &[
    "n",
    "b",
    "c",
    "c-high",
    "gamma",
    "mode",
    "solver",
    "beta-grid",
    "window",
    "steps",
    "burn-in",
    "thinning",
    "seed",
    "format",
    "output",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

/// Parses `key = value` lines. `#` starts a comment; blank lines are skipped.
pub fn parse_config_text(text: &str) -> CliResult<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::Usage(format!("config line {}: expected `key = value`, got `{line}`", lineno + 1))
        })?;
        let (key, value) = (key.trim(), value.trim());
        check_key(key)?;
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::Usage(format!(
                "config line {}: duplicate key `{key}`",
                lineno + 1
            )));
        }
    }
    Ok(map)
}

fn check_key(key: &str) -> CliResult<()> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(CliError::Usage(format!(
            "unknown key `{key}` (known keys: {})",
            KEYS.join(", ")
        )))
    }
}

/// Applies command-line values on top of the file values. Each key may be
/// given at most once on the command line.
pub fn merge(
    mut file: BTreeMap<String, String>,
    cli: &[(&str, &[String])],
) -> CliResult<(BTreeMap<String, String>, BTreeSet<String>)> {
    let mut explicit: BTreeSet<String> = file.keys().cloned().collect();
    for &(key, values) in cli {
        check_key(key)?;
        match values {
            [] => {}
            [v] => {
                file.insert(key.to_string(), v.clone());
                explicit.insert(key.to_string());
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "duplicate key `--{key}` given {} times ({})",
                    values.len(),
                    values.join(", ")
                )))
            }
        }
    }
    Ok((file, explicit))
}

/// Validated run plan.
#[derive(Debug, Clone)]
pub struct Plan {
    pub params: GameParams,
    pub c_high: Option<f64>,
    pub mode: RiskMode,
    pub solvers: Vec<Solver>,
    pub betas: Vec<f64>,
    pub window: Option<(f64, f64)>,
    pub chain: ChainConfig,
    pub format: Format,
    pub output: Option<PathBuf>,
    /// Keys set by the file or the command line rather than by default.
    pub explicit: BTreeSet<String>,
}

fn invalid(key: &str, constraint: &str, value: &str) -> CliError {
    CliError::Usage(format!("invalid value for `{key}`: {constraint} (got `{value}`)"))
}

fn real(map: &BTreeMap<String, String>, key: &str, default: f64) -> CliResult<f64> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v
            .parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| invalid(key, "expected a finite number", v)),
    }
}

fn integer(map: &BTreeMap<String, String>, key: &str) -> CliResult<Option<u64>> {
    map.get(key)
        .map(|v| {
            v.replace('_', "")
                .parse::<u64>()
                .or_else(|_| {
                    // accept 1e6-style literals when they are whole numbers
                    v.parse::<f64>()
                        .ok()
                        .filter(|x| x.fract() == 0.0 && *x >= 0.0 && *x < 1.8e19)
                        .map(|x| x as u64)
                        .ok_or(())
                })
                .map_err(|_| invalid(key, "expected a non-negative integer", v))
        })
        .transpose()
}

/// `lo:hi:step` or an explicit comma-separated list.
pub fn parse_grid(key: &str, v: &str) -> CliResult<Vec<f64>> {
    let parts: Vec<&str> = v.split(':').collect();
    if parts.len() == 3 {
        let nums: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| invalid(key, "expected lo:hi:step", v))?;
        return uniform_grid(nums[0], nums[1], nums[2])
            .map_err(|_| invalid(key, "expected lo <= hi and step > 0", v));
    }
    let list: Vec<f64> = v
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| invalid(key, "expected lo:hi:step or a comma-separated list", v))?;
    if list.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid(key, "grid must be sorted ascending", v));
    }
    Ok(list)
}

fn parse_window(key: &str, v: &str) -> CliResult<(f64, f64)> {
    let (lo, hi) = v
        .split_once(':')
        .and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)))
        .ok_or_else(|| invalid(key, "expected lo:hi", v))?;
    if !(lo < hi) {
        return Err(invalid(key, "expected lo < hi", v));
    }
    Ok((lo, hi))
}

/// Config key naming a model parameter, for diagnostics.
fn key_for(name: &str) -> &str {
    match name {
        "n_players" => "n",
        "benefit" => "b",
        "cost" => "c",
        "punishment" => "gamma",
        other => other,
    }
}

pub fn build_plan(map: &BTreeMap<String, String>, explicit: BTreeSet<String>) -> CliResult<Plan> {
    let n = integer(map, "n")?.unwrap_or(1024) as usize;
    let b = real(map, "b", 1.0)?;
    let c = real(map, "c", 0.75)?;
    let gamma = real(map, "gamma", 0.0)?;
    let params = GameParams::new(n, b, c, gamma).map_err(|e| match e {
        coopfield::Error::Parameter {
            name,
            constraint,
            value,
        } => CliError::Usage(format!(
            "invalid value for `{}`: {name} {constraint} (got `{value}`)",
            key_for(name)
        )),
        other => other.into(),
    })?;
    let c_high = map
        .get("c-high")
        .map(|_| real(map, "c-high", 0.0))
        .transpose()?;
    if let Some(ch) = c_high {
        if !(ch >= c) {
            return Err(invalid("c-high", "must not be below c", &ch.to_string()));
        }
    }
    let mode: RiskMode = match map.get("mode") {
        None => RiskMode::MeanFieldClosedForm,
        Some(v) => v
            .parse()
            .map_err(|_| invalid("mode", "must be one of bare, mean-field, self-consistent", v))?,
    };
    if mode == RiskMode::Bare && gamma > 0.0 {
        return Err(invalid("mode", "bare risk mode requires gamma = 0", "bare"));
    }
    let solvers: Vec<Solver> = match map.get("solver") {
        None => vec![Solver::Exact],
        Some(v) => v
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<Solver>()
                    .map_err(|_| invalid("solver", "must be a list of mc, exact, series, digamma", v))
            })
            .collect::<CliResult<_>>()?,
    };
    let betas = match map.get("beta-grid") {
        None => uniform_grid(0.0, 5.0, 0.1)?,
        Some(v) => parse_grid("beta-grid", v)?,
    };
    if let Some(beta) = betas.iter().find(|b| !(**b >= 0.0)) {
        return Err(invalid("beta-grid", "inverse temperatures must be non-negative", &beta.to_string()));
    }
    let window = map.get("window").map(|v| parse_window("window", v)).transpose()?;

    // default: 1e6 recorded proposals after 1e5 of burn-in
    let mut chain = match integer(map, "steps")? {
        Some(steps) => ChainConfig::with_steps(steps),
        None => {
            let mut c = ChainConfig::with_steps(1_100_000);
            c.burn_in = 100_000;
            c
        }
    };
    if let Some(burn) = integer(map, "burn-in")? {
        chain.burn_in = burn;
    }
    if let Some(t) = integer(map, "thinning")? {
        if t == 0 {
            return Err(invalid("thinning", "must be at least 1", "0"));
        }
        chain.thinning = Some(t);
    }
    chain.seed = integer(map, "seed")?.unwrap_or(0);
    if chain.burn_in >= chain.steps {
        return Err(invalid(
            "burn-in",
            "must be smaller than steps",
            &chain.burn_in.to_string(),
        ));
    }
    let format = match map.get("format").map(String::as_str) {
        None | Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        Some(v) => return Err(invalid("format", "must be csv or json", v)),
    };
    let output = map.get("output").map(PathBuf::from);
    Ok(Plan {
        params,
        c_high,
        mode,
        solvers,
        betas,
        window,
        chain,
        format,
        output,
        explicit,
    })
}
