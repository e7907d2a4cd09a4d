//! Experiment harness behind the `pathcalc` binary.
//!
//! Every subcommand reads a flat `key = value` configuration: built-in defaults,
//! then an optional `--config` file, then `--set key=value` and `--seed` flags.
//! Unknown keys are rejected. Output is CSV preceded by `#` comment lines that
//! record the resolved configuration; the body depends only on that configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use rayon::prelude::*;

use crate::deriv::{d_gamma, d_horizontal, d_space, numerical_derivatives, recover_gradient, relation_residual};
use crate::deriv::{DerivativeReport, DerivativeSource, LadderConfig, SpaceQuotient};
use crate::error::{Error, ErrorCategory, Result};
use crate::fk::{benchmark, estimate_f, fk_residual};
use crate::functional::probe::{probe_boundedness_preserving, probe_lipschitz, probe_non_anticipative};
use crate::functional::{builtin, direction, DirectionField, FunctionalWithDerivatives, VectorFunctional};
use crate::ito::{ito_residual, median, partition_sums, quadratic_covariation, PartitionSequence};
use crate::path::{uniform_grid, GridPath, InterpMode};
use crate::pathology::{constraint_direction, counterexample, gamma_star, standard_points};
use crate::rng::brownian_path;

#[derive(Debug, Parser)]
#[command(name = "pathcalc", version, about = "Pathwise functional calculus experiments with CSV output")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Flat `key = value` file; blank lines and `#` comments are ignored.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable and applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Master seed for every random draw; overrides `seed` from any other source.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the CSV here instead of standard output.
    #[arg(long, short, value_name = "FILE")]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the path-dependent flow dy = γ(t, y) dt and print the path.
    Flow(RunArgs),
    /// Difference-quotient ladder for a directional, horizontal or spatial derivative.
    Deriv(RunArgs),
    /// Residual of D^γF = DF + ⟨∇F, γ⟩ over functionals, directions and times.
    Relation(RunArgs),
    /// Recover the vertical gradient from directional derivatives.
    #[command(name = "recover-grad")]
    RecoverGrad(RunArgs),
    /// Verdict table for the running-average counterexample.
    Counterexample(RunArgs),
    /// Functional Itô residual across partition levels.
    #[command(name = "ito-check")]
    ItoCheck(RunArgs),
    /// Terminal quadratic variation across partition levels.
    Qv(RunArgs),
    /// Averaged-endpoint sums and the Stratonovich chain rule.
    Stratonovich(RunArgs),
    /// Monte Carlo Feynman–Kac estimates against a closed form.
    #[command(name = "feynman-kac")]
    FeynmanKac(RunArgs),
    /// Randomized checks of non-anticipativity, boundedness and Lipschitz bounds.
    Probe(RunArgs),
}

impl Command {
    pub fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::Flow(a) => (Experiment::Flow, a),
            Command::Deriv(a) => (Experiment::Deriv, a),
            Command::Relation(a) => (Experiment::Relation, a),
            Command::RecoverGrad(a) => (Experiment::RecoverGrad, a),
            Command::Counterexample(a) => (Experiment::Counterexample, a),
            Command::ItoCheck(a) => (Experiment::ItoCheck, a),
            Command::Qv(a) => (Experiment::Qv, a),
            Command::Stratonovich(a) => (Experiment::Stratonovich, a),
            Command::FeynmanKac(a) => (Experiment::FeynmanKac, a),
            Command::Probe(a) => (Experiment::Probe, a),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Flow,
    Deriv,
    Relation,
    RecoverGrad,
    Counterexample,
    ItoCheck,
    Qv,
    Stratonovich,
    FeynmanKac,
    Probe,
}

pub const EXPERIMENTS: &[Experiment] = &[
    Experiment::Flow,
    Experiment::Deriv,
    Experiment::Relation,
    Experiment::RecoverGrad,
    Experiment::Counterexample,
    Experiment::ItoCheck,
    Experiment::Qv,
    Experiment::Stratonovich,
    Experiment::FeynmanKac,
    Experiment::Probe,
];

/// `(key, default, description)`.
type Key = (&'static str, &'static str, &'static str);

const SEED: Key = ("seed", "42", "master seed");

const PATH_KEYS: &[Key] = &[
    ("path", "linear", "input path: constant, linear, brownian or file"),
    ("path_file", "", "CSV with header t,v1,...,vd when path = file"),
    ("path_mode", "linear", "interpolation of generated or loaded paths: linear or cadlag_hold"),
    ("dim", "1", "path dimension for generated paths"),
    ("horizon", "1", "horizon T of generated paths"),
    ("path_start", "0", "value at time 0 of generated paths"),
    ("path_slope", "1", "slope of the linear path"),
    ("path_cells", "1024", "uniform cells of generated paths"),
];

const LADDER_KEYS: &[Key] = &[
    ("eta0", "0.01", "largest ladder scale"),
    ("ladder_ratio", "0.5", "geometric ratio between ladder scales"),
    ("ladder_count", "20", "number of ladder scales"),
    ("ladder_tail", "5", "trailing quotients used for the verdict"),
];

const PARTITION_KEYS: &[Key] = &[
    ("levels", "6..12", "partition levels: a range a..b or a comma list"),
    ("partition", "dyadic", "partition family: dyadic or uniform"),
    ("n_paths", "1", "number of Brownian paths (path = brownian only)"),
];

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Flow => "flow",
            Experiment::Deriv => "deriv",
            Experiment::Relation => "relation",
            Experiment::RecoverGrad => "recover-grad",
            Experiment::Counterexample => "counterexample",
            Experiment::ItoCheck => "ito-check",
            Experiment::Qv => "qv",
            Experiment::Stratonovich => "stratonovich",
            Experiment::FeynmanKac => "feynman-kac",
            Experiment::Probe => "probe",
        }
    }

    fn own_keys(self) -> &'static [Key] {
        match self {
            Experiment::Flow => &[
                ("start", "0", "flow start time s"),
                ("until", "1", "flow end time"),
                ("direction", "eval", "direction field name or const:a,b,..."),
                ("substep", "1e-4", "extension grid step"),
                ("window", "", "Picard window bound (empty for 1/(2K))"),
                ("tol", "1e-10", "Picard tolerance"),
                ("max_iters", "100", "Picard sweeps per window"),
                ("init", "constant", "Picard start: constant or euler"),
                ("scheme", "picard", "picard or euler"),
            ],
            Experiment::Deriv => &[
                ("functional", "square", "catalog functional"),
                ("direction", "one", "direction for kind = gamma"),
                ("kind", "gamma", "gamma, horizontal, space_central or space_forward"),
                ("axis", "0", "component for spatial quotients"),
                ("t", "0.5", "evaluation time"),
            ],
            Experiment::Relation => &[
                ("functionals", "eval,square,integral", "catalog functionals"),
                ("directions", "one,eval,running_avg", "direction fields"),
                ("times", "0.25,0.5,0.75", "evaluation times"),
                ("source", "numerical", "DF and gradient source: numerical or coded"),
            ],
            Experiment::RecoverGrad => &[
                ("functional", "square", "catalog functional"),
                ("directions", "canonical", "`canonical` or directions separated by `;`"),
                ("t", "0.5", "evaluation time"),
            ],
            Experiment::Counterexample => &[("ladders", "true", "append the quotient ladders")],
            Experiment::ItoCheck => &[("functional", "exp", "catalog functional with coded derivatives")],
            Experiment::Qv => &[],
            Experiment::Stratonovich => &[("integrand", "square", "integrand G(x) = x^2 (square), x (eval) or 1 (one)")],
            Experiment::FeynmanKac => &[
                ("benchmark", "gaussian", "gaussian, drifted, discounted, deterministic or corrupted"),
                ("times", "0,0.25,0.5,0.75", "start times"),
                ("n_paths", "10000", "Monte Carlo paths"),
                ("step", "0.01", "Euler–Maruyama step"),
                ("source", "coded", "derivatives for the residual: coded or numerical"),
            ],
            Experiment::Probe => &[
                ("functional", "eval", "catalog functional"),
                ("direction", "eval", "direction for the Lipschitz probe"),
                ("probe", "all", "non_anticipative, boundedness, lipschitz or all"),
                ("samples", "1000", "random samples per probe"),
                ("box_radius", "1", "box radius for the boundedness probe"),
                ("t_min", "0", "smallest time for the Lipschitz probe"),
            ],
        }
    }

    fn uses_path(self) -> bool {
        !matches!(self, Experiment::Counterexample | Experiment::Probe)
    }

    fn uses_ladder(self) -> bool {
        matches!(self, Experiment::Deriv | Experiment::Relation | Experiment::RecoverGrad | Experiment::Counterexample)
    }

    fn uses_partitions(self) -> bool {
        matches!(self, Experiment::ItoCheck | Experiment::Qv | Experiment::Stratonovich)
    }

    /// Defaults that differ from the shared key tables.
    fn default_overrides(self) -> &'static [(&'static str, &'static str)] {
        match self {
            Experiment::Flow => &[("path", "constant"), ("path_start", "1")],
            Experiment::ItoCheck | Experiment::Qv | Experiment::Stratonovich => {
                &[("path", "brownian"), ("path_cells", "65536")]
            }
            Experiment::FeynmanKac => &[("path_start", "0.5"), ("path_slope", "0.2"), ("path_cells", "64")],
            _ => &[],
        }
    }

    /// Every accepted key with its default and description.
    pub fn keys(self) -> Vec<Key> {
        let mut keys = vec![SEED];
        if self.uses_path() {
            keys.extend_from_slice(PATH_KEYS);
        }
        if self.uses_ladder() {
            keys.extend_from_slice(LADDER_KEYS);
        }
        if self.uses_partitions() {
            keys.extend_from_slice(PARTITION_KEYS);
        }
        for k in self.own_keys() {
            keys.retain(|e| e.0 != k.0);
            keys.push(*k);
        }
        for (name, default) in self.default_overrides() {
            if let Some(e) = keys.iter_mut().find(|e| e.0 == *name) {
                e.1 = default;
            }
        }
        if self == Experiment::Probe {
            keys.extend_from_slice(&[PATH_KEYS[3], PATH_KEYS[4]]);
        }
        keys
    }

    fn key_help(self) -> String {
        let mut s = String::from("Configuration keys (default in brackets):\n");
        for (k, d, h) in self.keys() {
            let _ = writeln!(s, "  {k:<14} {h} [{d}]");
        }
        s
    }
}

/// The resolved configuration of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub params: BTreeMap<String, String>,
    pub output: Option<PathBuf>,
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::config(format!("config line {} is not `key = value`: {raw}", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Defaults, then `file` entries, then `sets`, then `seed`.
    pub fn resolve(
        experiment: Experiment,
        file: Option<&str>,
        sets: &[String],
        seed: Option<u64>,
        output: Option<PathBuf>,
    ) -> Result<Self> {
        let keys = experiment.keys();
        let mut params: BTreeMap<String, String> = keys.iter().map(|(k, d, _)| (k.to_string(), d.to_string())).collect();
        let mut assign = |k: String, v: String, origin: &str| -> Result<()> {
            if !params.contains_key(&k) {
                return Err(Error::config(format!("unknown key `{k}` for `{}` ({origin})", experiment.name())));
            }
            params.insert(k, v);
            Ok(())
        };
        if let Some(text) = file {
            for (k, v) in parse_config_text(text)? {
                assign(k, v, "config file")?;
            }
        }
        for s in sets {
            let (k, v) = s.split_once('=').ok_or_else(|| Error::config(format!("--set expects KEY=VALUE, got `{s}`")))?;
            assign(k.trim().to_string(), v.trim().to_string(), "--set")?;
        }
        if let Some(seed) = seed {
            assign("seed".into(), seed.to_string(), "--seed")?;
        }
        Ok(ExperimentConfig { experiment, params, output })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.params.get(key).map(String::as_str).expect("key validated at resolution")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T> {
        let v = self.raw(key);
        v.parse().map_err(|_| Error::config(format!("cannot parse `{key} = {v}`")))
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|_| Error::config(format!("cannot parse `{s}` in `{key}`"))))
            .collect()
    }

    fn names(&self, key: &str, sep: char) -> Vec<String> {
        self.raw(key).split(sep).map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            v => Err(Error::config(format!("`{key}` must be true or false, got `{v}`"))),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.get("seed")
    }

    /// `#` lines naming the experiment and every resolved key.
    pub fn header(&self) -> String {
        let mut s = format!("# pathcalc {}\n", self.experiment.name());
        for (k, v) in &self.params {
            let _ = writeln!(s, "# {k} = {v}");
        }
        s
    }

    fn ladder(&self) -> Result<LadderConfig> {
        let cfg = LadderConfig {
            eta0: self.get("eta0")?,
            ratio: self.get("ladder_ratio")?,
            count: self.get("ladder_count")?,
            tail: self.get("ladder_tail")?,
            ..LadderConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn mode(&self) -> Result<InterpMode> {
        self.raw("path_mode").parse()
    }

    fn dim(&self) -> Result<usize> {
        let d: usize = self.get("dim")?;
        if d == 0 {
            return Err(Error::config("dim must be at least 1"));
        }
        Ok(d)
    }

    /// The input path; `index` selects the Brownian substream.
    fn path(&self, index: u64) -> Result<GridPath> {
        let mode = self.mode()?;
        let kind = self.raw("path");
        if kind == "file" {
            let file = self.raw("path_file");
            if file.is_empty() {
                return Err(Error::config("path = file needs path_file"));
            }
            return read_path_csv(Path::new(file), mode);
        }
        let d = self.dim()?;
        let horizon: f64 = self.get("horizon")?;
        let cells: usize = self.get("path_cells")?;
        if !(horizon > 0.0) || cells == 0 {
            return Err(Error::config("generated paths need horizon > 0 and path_cells ≥ 1"));
        }
        let start: f64 = self.get("path_start")?;
        match kind {
            "constant" => GridPath::from_fn(uniform_grid(cells, horizon), d, mode, |_| vec![start; d]),
            "linear" => {
                let slope: f64 = self.get("path_slope")?;
                GridPath::from_fn(uniform_grid(cells, horizon), d, mode, |s| vec![start + slope * s; d])
            }
            "brownian" => Ok(brownian_path(self.seed()?, index, cells, horizon, &vec![start; d])),
            other => Err(Error::config(format!("unknown path kind `{other}`"))),
        }
    }

    /// The input paths of a partition experiment.
    fn paths(&self) -> Result<Vec<GridPath>> {
        let n: usize = self.get("n_paths")?;
        if n == 0 {
            return Err(Error::config("n_paths must be at least 1"));
        }
        if n > 1 && self.raw("path") != "brownian" {
            return Err(Error::config("n_paths > 1 needs path = brownian"));
        }
        (0..n as u64).into_par_iter().map(|i| self.path(i)).collect()
    }

    fn levels(&self) -> Result<Vec<usize>> {
        let v = self.raw("levels");
        if let Some((a, b)) = v.split_once("..") {
            let a: usize = a.trim().parse().map_err(|_| Error::config(format!("bad level range `{v}`")))?;
            let b: usize = b.trim().parse().map_err(|_| Error::config(format!("bad level range `{v}`")))?;
            if a > b {
                return Err(Error::config(format!("empty level range `{v}`")));
            }
            Ok((a..=b).collect())
        } else {
            self.list("levels")
        }
    }

    fn partition(&self, horizon: f64) -> Result<PartitionSequence> {
        match self.raw("partition") {
            "dyadic" => Ok(PartitionSequence::dyadic(horizon)),
            "uniform" => Ok(PartitionSequence::uniform(horizon)),
            other => Err(Error::config(format!("unknown partition family `{other}`"))),
        }
    }
}

pub fn read_path_csv(file: &Path, mode: InterpMode) -> Result<GridPath> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(file)?;
    let headers = r.headers()?.clone();
    let d = headers.len().saturating_sub(1);
    if d == 0 || &headers[0] != "t" {
        return Err(Error::InvalidPath(format!("{}: header must be t,v1,...,vd", file.display())));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut nums = rec.iter().map(|s| s.parse::<f64>().map_err(|_| Error::InvalidPath(format!("bad number `{s}`"))));
        times.push(nums.next().unwrap_or_else(|| Err(Error::InvalidPath("empty row".into())))?);
        for v in nums {
            values.push(v?);
        }
    }
    GridPath::from_flat(times, values, d, mode)
}

/// `t,v1,...,vd`, one row per grid time.
pub fn path_csv(x: &GridPath) -> String {
    let mut s = String::from("t");
    for k in 1..=x.dim() {
        let _ = write!(s, ",v{k}");
    }
    s.push('\n');
    for (i, t) in x.times().iter().enumerate() {
        let _ = write!(s, "{t}");
        for v in x.value(i) {
            let _ = write!(s, ",{v}");
        }
        s.push('\n');
    }
    s
}

pub fn write_path_csv(file: &Path, x: &GridPath) -> Result<()> {
    fs::write(file, path_csv(x))?;
    Ok(())
}

fn functional(name: &str, dim: usize) -> Result<FunctionalWithDerivatives> {
    let f = builtin(name)?;
    if f.dim != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: f.dim });
    }
    Ok(f)
}

fn report_csv(r: &DerivativeReport) -> Result<String> {
    let mut buf = Vec::new();
    r.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("CSV output is UTF-8"))
}

fn run_flow(c: &ExperimentConfig) -> Result<String> {
    use crate::flow::{euler_flow, solve_flow, FlowConfig, PicardInit};
    let x = c.path(0)?;
    let gamma = direction(c.raw("direction"), x.dim())?;
    let (s, until, substep): (f64, f64, f64) = (c.get("start")?, c.get("until")?, c.get("substep")?);
    let window = match c.raw("window") {
        "" => None,
        _ => Some(c.get("window")?),
    };
    let init = match c.raw("init") {
        "constant" => PicardInit::Constant,
        "euler" => PicardInit::Euler,
        other => return Err(Error::config(format!("unknown Picard init `{other}`"))),
    };
    let sol = match c.raw("scheme") {
        "picard" => {
            let cfg = FlowConfig { substep: Some(substep), window, picard_tol: c.get("tol")?, max_iters: c.get("max_iters")?, init };
            solve_flow(&x, s, &gamma, until, &cfg)?
        }
        "euler" => euler_flow(&x, s, &gamma, until, substep)?,
        other => return Err(Error::config(format!("unknown scheme `{other}`"))),
    };
    Ok(path_csv(&sol.path))
}

fn run_deriv(c: &ExperimentConfig) -> Result<String> {
    let x = c.path(0)?;
    let f = functional(c.raw("functional"), x.dim())?;
    let cfg = c.ladder()?;
    let t: f64 = c.get("t")?;
    let report = match c.raw("kind") {
        "gamma" => d_gamma(&f.base, &direction(c.raw("direction"), x.dim())?, t, &x, &cfg)?,
        "horizontal" => d_horizontal(&f.base, t, &x, &cfg)?,
        "space_central" => d_space(&f.base, c.get("axis")?, t, &x, &cfg, SpaceQuotient::Central)?,
        "space_forward" => d_space(&f.base, c.get("axis")?, t, &x, &cfg, SpaceQuotient::Forward)?,
        other => return Err(Error::config(format!("unknown derivative kind `{other}`"))),
    };
    report_csv(&report)
}

fn run_relation(c: &ExperimentConfig) -> Result<String> {
    let x = c.path(0)?;
    let cfg = c.ladder()?;
    let source = match c.raw("source") {
        "numerical" => DerivativeSource::Numerical,
        "coded" => DerivativeSource::Coded,
        other => return Err(Error::config(format!("unknown derivative source `{other}`"))),
    };
    let times: Vec<f64> = c.list("times")?;
    let mut cells = Vec::new();
    for fname in c.names("functionals", ',') {
        let f = functional(&fname, x.dim())?;
        for gname in c.names("directions", ',') {
            let g = direction(&gname, x.dim())?;
            for &t in &times {
                cells.push((fname.clone(), f.clone(), gname.clone(), g.clone(), t));
            }
        }
    }
    let rows = cells
        .par_iter()
        .map(|(fname, f, gname, g, t)| Ok(format!("{fname},{gname},{t},{}\n", relation_residual(f, source, g, *t, &x, &cfg)?)))
        .collect::<Result<Vec<String>>>()?;
    Ok(std::iter::once("functional,direction,t,residual\n".to_string()).chain(rows).collect())
}

fn run_recover(c: &ExperimentConfig) -> Result<String> {
    let x = c.path(0)?;
    let d = x.dim();
    let f = functional(c.raw("functional"), d)?;
    let cfg = c.ladder()?;
    let t: f64 = c.get("t")?;
    let gammas: Vec<DirectionField> = if c.raw("directions") == "canonical" {
        (0..d)
            .map(|i| {
                let mut e = vec![0.0; d];
                e[i] = 1.0;
                DirectionField::constant(e)
            })
            .collect()
    } else {
        c.names("directions", ';').iter().map(|n| direction(n, d)).collect::<Result<_>>()?
    };
    let grad = recover_gradient(&f.base, &gammas, t, &x, &cfg)?;
    let mut s = String::from("axis,recovered,d_space,difference\n");
    for (i, g) in grad.iter().enumerate() {
        let reference = d_space(&f.base, i, t, &x, &cfg, SpaceQuotient::Central)?.require(format!("∂_{}F", i + 1))?;
        let _ = writeln!(s, "{i},{g},{reference},{}", g - reference);
    }
    Ok(s)
}

fn run_counterexample(c: &ExperimentConfig) -> Result<String> {
    let cfg = c.ladder()?;
    let cx = counterexample();
    let directions: [(&str, Option<DirectionField>); 3] =
        [("horizontal", None), ("constraint", Some(constraint_direction())), ("gamma_star", Some(gamma_star()))];
    let mut cells = Vec::new();
    for (pid, t0, x) in standard_points() {
        for (gid, g) in &directions {
            cells.push((pid, t0, x.clone(), *gid, g.clone()));
        }
    }
    let reports = cells
        .par_iter()
        .map(|(_, t0, x, _, g)| match g {
            Some(g) => d_gamma(&cx, g, *t0, x, &cfg),
            None => d_horizontal(&cx, *t0, x, &cfg),
        })
        .collect::<Result<Vec<DerivativeReport>>>()?;
    let mut s = String::from("t0,path_id,gamma_id,verdict,estimate\n");
    for ((pid, t0, _, gid, _), r) in cells.iter().zip(&reports) {
        let _ = writeln!(s, "{t0},{pid},{gid},{},{}", r.verdict, r.estimate);
    }
    if c.flag("ladders")? {
        s.push_str("# ladders\nt0,path_id,gamma_id,eta,quotient\n");
        for ((pid, t0, _, gid, _), r) in cells.iter().zip(&reports) {
            for (eta, q) in r.ladder.etas.iter().zip(&r.ladder.quotients) {
                let _ = writeln!(s, "{t0},{pid},{gid},{eta},{q}");
            }
        }
    }
    Ok(s)
}

/// Median over paths of `stat(path, level)` for every level.
fn per_level(c: &ExperimentConfig, stat: impl Fn(&GridPath, &PartitionSequence, usize) -> Result<f64> + Sync) -> Result<Vec<(usize, f64, f64)>> {
    let paths = c.paths()?;
    let levels = c.levels()?;
    let pi = c.partition(paths[0].horizon())?;
    levels
        .iter()
        .map(|&n| {
            let vals = paths.par_iter().map(|x| stat(x, &pi, n)).collect::<Result<Vec<f64>>>()?;
            Ok((n, pi.mesh(n)?, median(&vals)))
        })
        .collect()
}

fn run_ito(c: &ExperimentConfig) -> Result<String> {
    let d = if c.raw("path") == "file" { c.path(0)?.dim() } else { c.dim()? };
    let f = functional(c.raw("functional"), d)?;
    let rows = per_level(c, |x, pi, n| Ok(ito_residual(&f, x, pi, n)?.abs()))?;
    let mut s = String::from("level,mesh,residual\n");
    for (n, mesh, r) in rows {
        let _ = writeln!(s, "{n},{mesh},{r}");
    }
    Ok(s)
}

fn run_qv(c: &ExperimentConfig) -> Result<String> {
    let rows = per_level(c, |x, pi, n| {
        let qv = quadratic_covariation(x, pi, n)?;
        Ok((0..x.dim()).map(|k| qv.terminal()[k * x.dim() + k]).sum())
    })?;
    let mut s = String::from("level,qv_T\n");
    for (n, _, q) in rows {
        let _ = writeln!(s, "{n},{q}");
    }
    Ok(s)
}

fn run_stratonovich(c: &ExperimentConfig) -> Result<String> {
    let (g, primitive): (fn(f64) -> f64, fn(f64) -> f64) = match c.raw("integrand") {
        "square" => (|v| v * v, |v| v * v * v / 3.0),
        "eval" => (|v| v, |v| v * v / 2.0),
        "one" => (|_| 1.0, |v| v),
        other => return Err(Error::config(format!("unknown integrand `{other}`"))),
    };
    let integrand = VectorFunctional::new(c.raw("integrand"), 1, move |t, x| vec![g(x.eval_comp(t, 0))]);
    let paths = c.paths()?;
    if paths[0].dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: paths[0].dim() });
    }
    let pi = c.partition(paths[0].horizon())?;
    let mut s = String::from("level,mesh,chain_residual,bridge_residual\n");
    for n in c.levels()? {
        let stats = paths
            .par_iter()
            .map(|x| {
                let sums = partition_sums(&integrand, x, &pi, n)?;
                let target = primitive(x.eval_comp(x.horizon(), 0)) - primitive(x.value_comp(0, 0));
                Ok(((sums.stratonovich - target).abs(), (sums.stratonovich - sums.ito - 0.5 * sums.covariation).abs()))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        let chain = median(&stats.iter().map(|p| p.0).collect::<Vec<_>>());
        let bridge = stats.iter().map(|p| p.1).fold(0.0, f64::max);
        let _ = writeln!(s, "{n},{},{chain},{bridge}", pi.mesh(n)?);
    }
    Ok(s)
}

fn run_feynman_kac(c: &ExperimentConfig) -> Result<String> {
    let b = benchmark(c.raw("benchmark"))?;
    let x = c.path(0)?;
    let (n_paths, step, seed): (usize, f64, u64) = (c.get("n_paths")?, c.get("step")?, c.seed()?);
    let solution = match c.raw("source") {
        "coded" => b.solution.clone(),
        "numerical" => numerical_derivatives(b.solution.base.clone(), b.spec.dim()),
        other => return Err(Error::config(format!("unknown derivative source `{other}`"))),
    };
    let mut s = String::from("t,f_mc,stderr,f_exact,residual\n");
    for t in c.list::<f64>("times")? {
        let est = estimate_f(&b.spec, t, &x, n_paths, step, seed)?;
        let exact = b.solution.eval(t, x.stop(t)?.path());
        let residual = fk_residual(&solution, &b.spec, t, &x)?;
        let _ = writeln!(s, "{t},{},{},{exact},{residual}", est.mean, est.stderr);
    }
    Ok(s)
}

fn run_probe(c: &ExperimentConfig) -> Result<String> {
    let dim = c.dim()?;
    let horizon: f64 = c.get("horizon")?;
    let samples: usize = c.get("samples")?;
    let seed = c.seed()?;
    let which = c.raw("probe");
    if !["all", "non_anticipative", "boundedness", "lipschitz"].contains(&which) {
        return Err(Error::config(format!("unknown probe `{which}`")));
    }
    let wants = |p: &str| which == "all" || which == p;
    let mut s = String::from("probe,target,samples,passed,statistic\n");
    if wants("non_anticipative") {
        let f = functional(c.raw("functional"), dim)?;
        let r = probe_non_anticipative(&f.base, dim, horizon, samples, seed);
        let _ = writeln!(s, "non_anticipative,{},{samples},{},{}", c.raw("functional"), r.passed(), r.worst);
    }
    if wants("boundedness") {
        let f = functional(c.raw("functional"), dim)?;
        let r = probe_boundedness_preserving(&f.base, dim, horizon, c.get("box_radius")?, samples, seed);
        let _ = writeln!(s, "boundedness,{},{samples},{},{}", c.raw("functional"), !r.flagged, r.max_abs);
    }
    if wants("lipschitz") {
        let g = direction(c.raw("direction"), dim)?;
        let r = probe_lipschitz(&g, horizon, c.get("t_min")?, samples, seed);
        let _ = writeln!(s, "lipschitz,{},{samples},{},{}", c.raw("direction"), r.passed(), r.max_ratio);
    }
    Ok(s)
}

/// The CSV body of one run.
pub fn run_body(c: &ExperimentConfig) -> Result<String> {
    match c.experiment {
        Experiment::Flow => run_flow(c),
        Experiment::Deriv => run_deriv(c),
        Experiment::Relation => run_relation(c),
        Experiment::RecoverGrad => run_recover(c),
        Experiment::Counterexample => run_counterexample(c),
        Experiment::ItoCheck => run_ito(c),
        Experiment::Qv => run_qv(c),
        Experiment::Stratonovich => run_stratonovich(c),
        Experiment::FeynmanKac => run_feynman_kac(c),
        Experiment::Probe => run_probe(c),
    }
}

/// Header plus body, written to the configured output or returned for stdout.
pub fn run(c: &ExperimentConfig) -> Result<String> {
    let text = c.header() + &run_body(c)?;
    if let Some(out) = &c.output {
        fs::write(out, &text)?;
    }
    Ok(text)
}

pub fn exit_code(category: ErrorCategory) -> i32 {
    match category {
        ErrorCategory::Validation => 2,
        ErrorCategory::Numerical => 3,
        ErrorCategory::Io => 4,
    }
}

fn category_name(category: ErrorCategory) -> &'static str {
    match category {
        ErrorCategory::Validation => "validation",
        ErrorCategory::Numerical => "numerical",
        ErrorCategory::Io => "io",
    }
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let mut cmd = Cli::command();
    for e in EXPERIMENTS {
        cmd = cmd.mut_subcommand(e.name(), |s| s.after_help(e.key_help()));
    }
    let matches = match cmd.try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let cli = Cli::from_arg_matches(&matches).expect("matches come from the same definition");
    let (experiment, args) = cli.command.split();
    let outcome = (|| {
        let file = args.config.as_ref().map(fs::read_to_string).transpose()?;
        let cfg = ExperimentConfig::resolve(experiment, file.as_deref(), &args.set, args.seed, args.output.clone())?;
        run(&cfg)
    })();
    match outcome {
        Ok(text) => {
            if args.output.is_none() {
                print!("{text}");
            }
            0
        }
        Err(e) => {
            let cat = e.category();
            eprintln!("error[{}]: {e}", category_name(cat));
            exit_code(cat)
        }
    }
}
