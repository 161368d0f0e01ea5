//! Flat `key = value` experiment files. `#` starts a comment.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use temporal_im::influence::BoundaryKind;
use temporal_im::model::{trotterize, HamiltonianParams, InitialState, ModelSpec, TrotterOrder};
use temporal_im::observables::SeriesMode;

use crate::error::{CliError, CliResult};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    FloquetCzz,
    HamiltonianImpurity,
    Quench,
    Dtc,
    EntropyScan,
    OracleCheck,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::FloquetCzz => "floquet-czz",
            Self::HamiltonianImpurity => "hamiltonian-impurity",
            Self::Quench => "quench",
            Self::Dtc => "dtc",
            Self::EntropyScan => "entropy-scan",
            Self::OracleCheck => "oracle-check",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "floquet-czz" => Self::FloquetCzz,
            "hamiltonian-impurity" => Self::HamiltonianImpurity,
            "quench" => Self::Quench,
            "dtc" => Self::Dtc,
            "entropy-scan" => Self::EntropyScan,
            "oracle-check" => Self::OracleCheck,
            other => return Err(CliError::config(format!("unknown experiment `{other}`"))),
        })
    }
}

/// Circuit family used to turn parameters into a [`ModelSpec`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Kicked Ising circuit with `T` periods (optionally Trotter angles
    /// when `eps > 0`).
    Floquet,
    /// Hamiltonian evolution up to time `t_max` in steps of `eps`.
    Trotter,
    /// Disordered kicked chain.
    Dtc,
}

impl FromStr for Family {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        match s {
            "floquet" => Ok(Self::Floquet),
            "trotter" => Ok(Self::Trotter),
            "dtc" => Ok(Self::Dtc),
            other => Err(CliError::config(format!("unknown family `{other}`"))),
        }
    }
}

/// Numeric model parameters; absent keys stay `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Params {
    pub j: Option<f64>,
    pub g: Option<f64>,
    pub h: Option<f64>,
    pub eps: Option<f64>,
    pub eps_kick: Option<f64>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    /// Number of periods.
    pub steps: Option<usize>,
    /// Physical final time.
    pub t_max: Option<f64>,
}

impl Params {
    fn need<T: Copy>(v: Option<T>, key: &str, family: Family) -> CliResult<T> {
        v.ok_or_else(|| CliError::config(format!("`{key}` is required for the {family:?} family")))
    }

    pub fn spec(&self, family: Family, initial: InitialState, order: TrotterOrder) -> CliResult<ModelSpec> {
        let mut spec = match family {
            Family::Floquet => {
                let (j, g, h) = (Self::need(self.j, "J", family)?, Self::need(self.g, "g", family)?, Self::need(self.h, "h", family)?);
                let s = ModelSpec::floquet(j, g, h, Self::need(self.steps, "T_max", family)?);
                ModelSpec { eps: self.eps.unwrap_or(0.0), ..s }
            }
            Family::Trotter => {
                let params = HamiltonianParams {
                    j: Self::need(self.j, "J", family)?,
                    g: Self::need(self.g, "g", family)?,
                    h: Self::need(self.h, "h", family)?,
                };
                trotterize(params, Self::need(self.t_max, "t_max", family)?, Self::need(self.eps, "eps", family)?)?
            }
            Family::Dtc => ModelSpec::dtc(
                Self::need(self.eps_kick, "eps_kick", family)?,
                Self::need(self.h, "h", family)?,
                Self::need(self.steps, "T_max", family)?,
            ),
        };
        match (self.alpha, self.beta) {
            (Some(a), Some(b)) => spec = spec.with_impurity(a, b),
            (None, None) => {}
            _ => return Err(CliError::config("`alpha` and `beta` must be given together")),
        }
        spec = spec.with_initial_state(initial).with_trotter_order(order);
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScanParam {
    J,
    G,
    H,
    Eps,
    EpsKick,
    Steps,
    TMax,
}

impl FromStr for ScanParam {
    type Err = CliError;

    fn from_str(s: &str) -> CliResult<Self> {
        Ok(match s {
            "J" => Self::J,
            "g" => Self::G,
            "h" => Self::H,
            "eps" => Self::Eps,
            "eps_kick" => Self::EpsKick,
            "T_max" => Self::Steps,
            "t_max" => Self::TMax,
            other => return Err(CliError::config(format!("cannot scan `{other}`"))),
        })
    }
}

impl ScanParam {
    pub fn apply(self, p: &Params, x: f64) -> CliResult<Params> {
        let mut p = *p;
        match self {
            Self::J => p.j = Some(x),
            Self::G => p.g = Some(x),
            Self::H => p.h = Some(x),
            Self::Eps => p.eps = Some(x),
            Self::EpsKick => p.eps_kick = Some(x),
            Self::TMax => p.t_max = Some(x),
            Self::Steps => {
                if x < 1.0 || x.fract() != 0.0 {
                    return Err(CliError::config(format!("T_max scan value {x} is not a positive integer")));
                }
                p.steps = Some(x as usize);
            }
        }
        Ok(p)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub family: Family,
    pub params: Params,
    /// Bond-dimension caps; `None` is unbounded.
    pub chis: Vec<Option<usize>>,
    pub cutoff: f64,
    pub boundaries: Vec<BoundaryKind>,
    pub mode: SeriesMode,
    pub preserve_weak_bonds: bool,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    /// Longest time of the Monte Carlo oracle (dtc only).
    pub mc_t_max: Option<usize>,
    pub initial_state: InitialState,
    pub trotter_order: TrotterOrder,
    pub scan: Option<(ScanParam, Vec<f64>)>,
    pub checkpoint: bool,
    pub out: Option<PathBuf>,
    /// Key/value pairs as read, for the manifest.
    pub echo: Vec<(String, String)>,
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> CliResult<T> {
    v.parse().map_err(|_| CliError::config(format!("`{key}`: cannot parse `{v}`")))
}

fn parse_list<T>(key: &str, v: &str, f: impl Fn(&str) -> CliResult<T>) -> CliResult<Vec<T>> {
    let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::config(format!("`{key}` is an empty list")));
    }
    items.into_iter().map(f).collect()
}

fn parse_bool(key: &str, v: &str) -> CliResult<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(CliError::config(format!("`{key}`: expected true or false, got `{v}`"))),
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        Self::parse_with_seed(text, None)
    }

    /// Like [`parse`](Self::parse), with a command-line seed taking precedence
    /// over the file before validation.
    pub fn parse_with_seed(text: &str, seed: Option<u64>) -> CliResult<Self> {
        let mut echo: Vec<(String, String)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::config(format!("line {}: expected key = value", n + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if echo.iter().any(|(e, _)| e == k) {
                return Err(CliError::config(format!("line {}: duplicate key `{k}`", n + 1)));
            }
            echo.push((k.to_string(), v.to_string()));
        }
        let experiment: Experiment = echo
            .iter()
            .find(|(k, _)| k == "experiment")
            .ok_or_else(|| CliError::config("missing `experiment`"))?
            .1
            .parse()?;
        let mut cfg = Self {
            experiment,
            family: match experiment {
                Experiment::HamiltonianImpurity | Experiment::Quench => Family::Trotter,
                Experiment::Dtc => Family::Dtc,
                _ => Family::Floquet,
            },
            params: Params::default(),
            chis: vec![None],
            cutoff: 1e-12,
            boundaries: vec![BoundaryKind::Open],
            mode: SeriesMode::Fresh,
            preserve_weak_bonds: false,
            tol: None,
            seed: None,
            samples: None,
            mc_t_max: None,
            initial_state: if experiment == Experiment::Quench {
                InitialState::ZPolarizedUp
            } else {
                InitialState::InfiniteTemperature
            },
            trotter_order: TrotterOrder::Second,
            scan: None,
            checkpoint: false,
            out: None,
            echo: Vec::new(),
        };
        let mut scan_param = None;
        let mut scan_values = None;
        for (k, v) in &echo {
            let p = &mut cfg.params;
            match k.as_str() {
                "experiment" => {}
                "family" => cfg.family = v.parse()?,
                "J" => p.j = Some(parse_num(k, v)?),
                "g" => p.g = Some(parse_num(k, v)?),
                "h" => p.h = Some(parse_num(k, v)?),
                "eps" => p.eps = Some(parse_num(k, v)?),
                "eps_kick" => p.eps_kick = Some(parse_num(k, v)?),
                "alpha" => p.alpha = Some(parse_num(k, v)?),
                "beta" => p.beta = Some(parse_num(k, v)?),
                "T_max" => p.steps = Some(parse_num(k, v)?),
                "t_max" => p.t_max = Some(parse_num(k, v)?),
                "chi" => {
                    cfg.chis = parse_list(k, v, |s| match s {
                        "none" | "inf" => Ok(None),
                        _ => parse_num::<usize>(k, s).and_then(|c| {
                            if c == 0 {
                                Err(CliError::config("`chi` values must be positive"))
                            } else {
                                Ok(Some(c))
                            }
                        }),
                    })?
                }
                "cutoff" => cfg.cutoff = parse_num(k, v)?,
                "boundary" => cfg.boundaries = parse_list(k, v, |s| s.parse::<BoundaryKind>().map_err(CliError::from))?,
                "mode" => {
                    cfg.mode = match v.as_str() {
                        "fresh" => SeriesMode::Fresh,
                        "shared" => SeriesMode::Shared,
                        _ => return Err(CliError::config(format!("`mode`: expected fresh or shared, got `{v}`"))),
                    }
                }
                "preserve_weak_bonds" => cfg.preserve_weak_bonds = parse_bool(k, v)?,
                "tol" => cfg.tol = Some(parse_num(k, v)?),
                "seed" => cfg.seed = Some(parse_num(k, v)?),
                "samples" => cfg.samples = Some(parse_num(k, v)?),
                "mc_t_max" => cfg.mc_t_max = Some(parse_num(k, v)?),
                "initial_state" => cfg.initial_state = v.parse()?,
                "trotter_order" => {
                    cfg.trotter_order = match v.as_str() {
                        "1" => TrotterOrder::First,
                        "2" => TrotterOrder::Second,
                        _ => return Err(CliError::config(format!("`trotter_order`: expected 1 or 2, got `{v}`"))),
                    }
                }
                "scan" => scan_param = Some(v.parse::<ScanParam>()?),
                "scan_values" => scan_values = Some(parse_list(k, v, |s| parse_num::<f64>(k, s))?),
                "checkpoint" => cfg.checkpoint = parse_bool(k, v)?,
                "out" => cfg.out = Some(PathBuf::from(v)),
                other => return Err(CliError::config(format!("unknown key `{other}`"))),
            }
        }
        cfg.scan = match (scan_param, scan_values) {
            (Some(p), Some(v)) => Some((p, v)),
            (None, None) => None,
            _ => return Err(CliError::config("`scan` and `scan_values` must be given together")),
        };
        cfg.echo = echo;
        if seed.is_some() {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        if !(self.cutoff >= 0.0) {
            return Err(CliError::config("`cutoff` must be non-negative"));
        }
        let needs_seed = self.family == Family::Dtc || self.samples.is_some();
        if needs_seed && self.seed.is_none() && self.experiment != Experiment::OracleCheck {
            return Err(CliError::config("`seed` is required for disordered or Monte Carlo runs"));
        }
        match self.experiment {
            Experiment::EntropyScan => {
                let (param, values) =
                    self.scan.as_ref().ok_or_else(|| CliError::config("entropy-scan needs `scan` and `scan_values`"))?;
                for &x in values {
                    param.apply(&self.params, x)?.spec(self.family, self.initial_state, self.trotter_order)?;
                }
            }
            Experiment::OracleCheck => {
                if let Some(t) = self.params.steps {
                    if t == 0 {
                        return Err(CliError::config("`T_max` must be positive"));
                    }
                }
            }
            Experiment::HamiltonianImpurity => {
                if self.params.alpha.is_none() {
                    return Err(CliError::config("hamiltonian-impurity needs `alpha` and `beta`"));
                }
                self.spec()?;
            }
            Experiment::Dtc => {
                self.spec()?;
                if let (Some(s), Some(t)) = (self.samples, self.mc_t_max) {
                    if s < 2 || t == 0 {
                        return Err(CliError::config("Monte Carlo needs `samples` ≥ 2 and `mc_t_max` ≥ 1"));
                    }
                } else if self.samples.is_some() != self.mc_t_max.is_some() {
                    return Err(CliError::config("`samples` and `mc_t_max` must be given together"));
                }
            }
            _ => {
                self.spec()?;
            }
        }
        Ok(())
    }

    /// Model of non-scan experiments.
    pub fn spec(&self) -> CliResult<ModelSpec> {
        self.params.spec(self.family, self.initial_state, self.trotter_order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let cfg = ExperimentConfig::parse(
            "# header\nexperiment = floquet-czz\nJ = 0.8  # coupling\ng = 0.7236\nh = 0.6472\nT_max = 6\nchi = 32, 64\nboundary = open, pd\n",
        )
        .unwrap();
        assert_eq!(cfg.chis, vec![Some(32), Some(64)]);
        assert_eq!(cfg.boundaries, vec![BoundaryKind::Open, BoundaryKind::PerfectDephaser]);
        assert_eq!(cfg.spec().unwrap().t, 6);
    }

    #[test]
    fn missing_fields_are_config_errors() {
        let e = ExperimentConfig::parse("experiment = floquet-czz\nJ = 1\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        let e = ExperimentConfig::parse("experiment = dtc\neps_kick = 0.1\nh = 0.3\nT_max = 4\n").unwrap_err();
        assert!(e.message.contains("seed"));
        assert!(ExperimentConfig::parse("experiment = quench\nbogus = 1\n").is_err());
        assert!(ExperimentConfig::parse("experiment = floquet-czz\nJ = 1\nJ = 2\n").is_err());
    }

    #[test]
    fn unbounded_chi_spellings() {
        let cfg = ExperimentConfig::parse("experiment = floquet-czz\nJ=1\ng=1\nh=0\nT_max=2\nchi = none, inf, 8\n").unwrap();
        assert_eq!(cfg.chis, vec![None, None, Some(8)]);
    }
}
