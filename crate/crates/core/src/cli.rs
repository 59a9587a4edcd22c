//! Command-line front end.
//!
//! Reports go to stdout as single-line JSON (the `report` bundle is
//! indented). Failures print one JSON error line to stderr and exit with 2
//! for bad arguments or domain errors and 3 for numerical or witness failures.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::capacity::ring_capacity_radial;
use crate::criterion::classify_uniqueness;
use crate::error::Error;
use crate::finsler::{GradNormKind, PolarGrid};
use crate::green::{
    comparison_witness, eval_candidate, minimal_gradient, nonuniqueness_witness, normalization_levels,
    ComparisonSettings, Extent, GreenCandidate, LipschitzProfile, VariationalSettings, WitnessSettings,
    NORMALIZATION_SPREAD,
};
use crate::harnack::{iteration_constants, oscillation_decay, Probe};
use crate::io::{load_field, save_field, to_json, to_json_pretty, write_profile_csv};
use crate::report::{self, CRITERIA};
use crate::solver::{
    minimize_p_energy, superlevel_mask, BoundaryCondition, SolveSpec, DEFAULT_SCHEDULE, DEFAULT_TOL,
};
use crate::weights::{MeasureProfile, WeightModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_FAILURE: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "greenforge", version, about = "p-harmonic Green functions, capacities and uniqueness diagnostics")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify uniqueness of Green functions for a radial weight.
    Criterion {
        #[arg(long)]
        weight: String,
        #[arg(long)]
        p: f64,
        /// Also write the ball-measure profile as CSV.
        #[arg(long)]
        profile_out: Option<PathBuf>,
    },
    /// Closed-form capacity of the ring B_r in B_R.
    Capacity {
        #[arg(long)]
        weight: String,
        #[arg(long)]
        p: f64,
        #[arg(long)]
        r: f64,
        #[arg(long = "R")]
        big_r: f64,
    },
    /// Minimize the discrete p-energy described by a JSON spec.
    Solve {
        /// JSON spec file.
        #[arg(long)]
        spec: PathBuf,
        /// Where to write the minimizer as CSV.
        #[arg(long)]
        field_out: Option<PathBuf>,
    },
    /// Evaluate or normalize explicit Green candidates.
    Green {
        #[command(subcommand)]
        action: GreenAction,
    },
    /// Nonuniqueness and comparison witnesses.
    Witness {
        #[command(subcommand)]
        action: WitnessAction,
    },
    /// Iterated Harnack constants and optional decay probe of a field.
    Harnack {
        #[arg(long = "A")]
        a: f64,
        #[arg(long)]
        lambda: f64,
        /// Field CSV to probe.
        #[arg(long)]
        probe: Option<PathBuf>,
        /// Probe ball center `x,y`.
        #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.5, 0.0])]
        center: Vec<f64>,
        #[arg(long, default_value_t = 0.4)]
        radius: f64,
        #[arg(long, value_delimiter = ',', default_values_t = [0.2, 0.1, 0.05])]
        deltas: Vec<f64>,
        /// Sample only the boundary circles of the probe balls.
        #[arg(long)]
        circle: bool,
    },
    /// Run acceptance criteria and bundle the results.
    Report {
        /// Criteria to run, e.g. `5,7,8`; all by default.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u8>,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProfileArg {
    Zero,
    Triangle,
}

impl ProfileArg {
    fn build(self, n: usize) -> crate::Result<LipschitzProfile> {
        match self {
            ProfileArg::Zero => LipschitzProfile::zero(n),
            ProfileArg::Triangle => LipschitzProfile::triangle(n),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CandidateArgs {
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// Domain radius; omit for the whole plane.
    #[arg(long = "R")]
    big_r: Option<f64>,
    #[arg(long, value_enum, default_value_t = ProfileArg::Zero)]
    profile: ProfileArg,
    /// Angular samples of the profile.
    #[arg(long, default_value_t = 64)]
    n: usize,
}

impl CandidateArgs {
    fn build(&self) -> crate::Result<GreenCandidate> {
        let extent = match self.big_r {
            Some(r) => Extent::Bounded(r),
            None => Extent::Unbounded,
        };
        GreenCandidate::new(self.p, self.alpha, extent, self.profile.build(self.n)?)
    }
}

#[derive(Debug, Subcommand)]
pub enum GreenAction {
    /// Value and minimal gradient at a point.
    Eval {
        #[command(flatten)]
        candidate: CandidateArgs,
        #[arg(long)]
        r: f64,
        #[arg(long, default_value_t = 0.0)]
        theta: f64,
        /// Normalization constant multiplying the candidate.
        #[arg(long)]
        normalization: Option<f64>,
    },
    /// Variational normalization constant from several levels.
    Normalize {
        #[command(flatten)]
        candidate: CandidateArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
        levels: Vec<f64>,
        /// Radial cells of the variational grids.
        #[arg(long, default_value_t = 128)]
        m: usize,
    },
}

#[derive(Debug, Subcommand)]
pub enum WitnessAction {
    /// Two profiles giving distinct normalized Green functions.
    Nonuniqueness {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long = "R", default_value_t = 1.0)]
        big_r: f64,
        #[arg(long, value_enum, default_value_t = ProfileArg::Zero)]
        f1: ProfileArg,
        #[arg(long, value_enum, default_value_t = ProfileArg::Triangle)]
        f2: ProfileArg,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 128)]
        m: usize,
    },
    /// Failure of the strong comparison principle.
    Comparison {
        #[arg(long)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[arg(long, value_enum, default_value_t = ProfileArg::Triangle)]
        f2: ProfileArg,
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 128)]
        m: usize,
    },
}

/// Input of the `solve` subcommand.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveFile {
    pub weight: String,
    pub p: f64,
    pub norm: NormName,
    pub grid: GridSpec,
    pub bc: BcSpec,
    #[serde(default = "default_schedule")]
    pub schedule: Vec<f64>,
    #[serde(default = "default_tol")]
    pub tol: f64,
    pub max_iterations: Option<usize>,
}

fn default_schedule() -> Vec<f64> {
    DEFAULT_SCHEDULE.to_vec()
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormName {
    Euclid,
    Finsler,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "N")]
    pub n: usize,
    pub r0: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BcSpec {
    /// Inner ring 1, outer ring 0.
    Ring,
    /// Inner and outer rings from a field CSV on the same grid.
    Dirichlet { field: PathBuf },
    /// `{u >= level}` of a field CSV held at 1.
    Superlevel { field: PathBuf, level: f64 },
}

#[derive(Debug, Serialize)]
struct SolveOutput {
    energy: f64,
    error_estimate: f64,
    iterations: usize,
    stages: Vec<crate::solver::StageReport>,
}

#[derive(Debug, Serialize)]
struct EvalOutput {
    r: f64,
    theta: f64,
    value: f64,
    minimal_gradient: f64,
}

#[derive(Debug, Serialize)]
struct NormalizeOutput {
    #[serde(rename = "A")]
    a: f64,
    spread: f64,
    spread_bound: f64,
    levels: Vec<crate::green::LevelNormalization>,
}

#[derive(Debug, Serialize)]
struct HarnackOutput {
    constants: crate::harnack::HarnackConstants,
    decay: Option<crate::harnack::DecayTrace>,
    /// `1 + C0 δ^α` at each probed `δ`.
    bound: Option<Vec<f64>>,
}

#[derive(Debug, Serialize)]
struct ErrorLine<'a> {
    error: ErrorBody<'a>,
}

#[derive(Debug, Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    message: String,
    exit_code: i32,
}

/// Outcome of a subcommand that ran to completion but certifies nothing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Refused(String);

fn classify(err: &anyhow::Error) -> (&'static str, i32) {
    if err.downcast_ref::<Refused>().is_some() {
        return ("refused", EXIT_FAILURE);
    }
    match err.downcast_ref::<Error>() {
        Some(e) if e.is_numerical_failure() => ("numerical", EXIT_FAILURE),
        Some(Error::Parse(_)) => ("parse", EXIT_USAGE),
        Some(Error::Io(_) | Error::Csv(_) | Error::Json(_)) => ("io", EXIT_USAGE),
        Some(Error::GenerationRange { .. } | Error::Range(_)) => ("range", EXIT_USAGE),
        Some(_) => ("domain", EXIT_USAGE),
        None if err.downcast_ref::<serde_json::Error>().is_some() => ("parse", EXIT_USAGE),
        None => ("io", EXIT_USAGE),
    }
}

fn emit(out: &mut dyn Write, json: String) -> anyhow::Result<()> {
    writeln!(out, "{json}")?;
    Ok(())
}

fn solve(spec_path: &PathBuf, field_out: Option<&PathBuf>, out: &mut dyn Write) -> anyhow::Result<()> {
    let text = std::fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let file: SolveFile = serde_json::from_str(&text).map_err(Error::from)?;
    let model: WeightModel = file.weight.parse()?;
    let profile = MeasureProfile::new(model)?;
    let grid = PolarGrid::new(file.grid.r0, file.grid.big_r, file.grid.m, file.grid.n)?;
    let load = |path: &PathBuf| -> anyhow::Result<_> {
        let f = load_field(path).with_context(|| format!("loading {}", path.display()))?;
        if f.grid() != &grid {
            return Err(Error::Domain(format!("{} is not on the solve grid", path.display())).into());
        }
        Ok(f)
    };
    let bc = match &file.bc {
        BcSpec::Ring => BoundaryCondition::CapacitaryRing,
        BcSpec::Dirichlet { field } => BoundaryCondition::Dirichlet(load(field)?),
        BcSpec::Superlevel { field, level } => BoundaryCondition::SuperlevelInner(superlevel_mask(&load(field)?, *level)),
    };
    let kind = match file.norm {
        NormName::Euclid => GradNormKind::Euclidean,
        NormName::Finsler => GradNormKind::FinslerMax,
    };
    let mut spec = SolveSpec::new(grid, file.p, kind, profile, bc);
    spec.schedule = file.schedule;
    spec.tol = file.tol;
    if let Some(k) = file.max_iterations {
        spec.max_iterations = k;
    }
    let sol = minimize_p_energy(&spec)?;
    if let Some(path) = field_out {
        save_field(&sol.field, path).with_context(|| format!("writing {}", path.display()))?;
    }
    emit(
        out,
        to_json(&SolveOutput {
            energy: sol.capacity.value,
            error_estimate: sol.capacity.error_estimate,
            iterations: sol.iterations,
            stages: sol.stages,
        })?,
    )
}

fn dispatch(cfg: RunConfig, out: &mut dyn Write) -> anyhow::Result<()> {
    match cfg.command {
        Command::Criterion { weight, p, profile_out } => {
            let profile = MeasureProfile::new(weight.parse::<WeightModel>()?)?;
            if let Some(path) = profile_out {
                write_profile_csv(&profile, BufWriter::new(File::create(&path)?))?;
            }
            emit(out, to_json(&classify_uniqueness(&profile, p)?)?)
        }
        Command::Capacity { weight, p, r, big_r } => {
            let profile = MeasureProfile::new(weight.parse::<WeightModel>()?)?;
            emit(out, to_json(&ring_capacity_radial(&profile, p, r, big_r)?)?)
        }
        Command::Solve { spec, field_out } => solve(&spec, field_out.as_ref(), out),
        Command::Green { action } => match action {
            GreenAction::Eval {
                candidate,
                r,
                theta,
                normalization,
            } => {
                let mut c = candidate.build()?;
                if let Some(a) = normalization {
                    c = c.with_normalization(a);
                }
                emit(
                    out,
                    to_json(&EvalOutput {
                        r,
                        theta,
                        value: eval_candidate(&c, r, theta)?,
                        minimal_gradient: minimal_gradient(&c, r, theta)?,
                    })?,
                )
            }
            GreenAction::Normalize { candidate, levels, m } => {
                let c = candidate.build()?;
                let settings = VariationalSettings {
                    m,
                    ..Default::default()
                };
                let n = normalization_levels(&c, &levels, &settings)?;
                emit(
                    out,
                    to_json(&NormalizeOutput {
                        a: n.a,
                        spread: n.spread,
                        spread_bound: NORMALIZATION_SPREAD,
                        levels: n.levels.clone(),
                    })?,
                )?;
                if n.spread > NORMALIZATION_SPREAD {
                    return Err(Error::Normalization {
                        spread: n.spread,
                        bound: NORMALIZATION_SPREAD,
                    }
                    .into());
                }
                Ok(())
            }
        },
        Command::Witness { action } => match action {
            WitnessAction::Nonuniqueness {
                p,
                alpha,
                big_r,
                f1,
                f2,
                n,
                m,
            } => {
                let mut settings = WitnessSettings::default();
                settings.variational.m = m;
                let w = nonuniqueness_witness(p, alpha, big_r, &f1.build(n)?, &f2.build(n)?, &settings)?;
                emit(out, to_json(&w)?)?;
                match w.refused {
                    Some(why) => Err(Refused(why).into()),
                    None => Ok(()),
                }
            }
            WitnessAction::Comparison { p, alpha, f2, n, m } => {
                let settings = ComparisonSettings {
                    m,
                    ..Default::default()
                };
                let w = comparison_witness(p, alpha, &f2.build(n)?, &settings)?;
                emit(out, to_json(&w)?)?;
                match w.refused {
                    Some(why) => Err(Refused(why).into()),
                    None => Ok(()),
                }
            }
        },
        Command::Harnack {
            a,
            lambda,
            probe,
            center,
            radius,
            deltas,
            circle,
        } => {
            let constants = iteration_constants(a, lambda)?;
            let decay = match probe {
                Some(path) => {
                    let field = load_field(&path).with_context(|| format!("loading {}", path.display()))?;
                    let at = (center[0], center[1]);
                    let shape = if circle { Probe::circle(at, radius) } else { Probe::disc(at, radius) };
                    Some(oscillation_decay(&field, &shape, &deltas)?)
                }
                None => None,
            };
            let bound = decay
                .as_ref()
                .map(|d| d.points.iter().map(|x| constants.ratio_bound(x.delta)).collect());
            emit(out, to_json(&HarnackOutput { constants, decay, bound })?)
        }
        Command::Report { only, out: path } => {
            let ids = if only.is_empty() { CRITERIA.to_vec() } else { only };
            if let Some(bad) = ids.iter().find(|id| !CRITERIA.contains(id)) {
                return Err(Error::Domain(format!("no acceptance criterion {bad}")).into());
            }
            let rep = report::run(&ids);
            let text = to_json_pretty(&rep)?;
            if let Some(path) = path {
                std::fs::write(&path, format!("{text}\n")).with_context(|| format!("writing {}", path.display()))?;
            }
            emit(out, text)?;
            if !rep.passed {
                let failed: Vec<String> = rep.criteria.iter().filter(|c| !c.passed).map(|c| c.id.to_string()).collect();
                return Err(Refused(format!("failed criteria: {}", failed.join(", "))).into());
            }
            Ok(())
        }
    }
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(args) {
        Ok(cfg) => cfg,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return EXIT_OK;
            }
            let message = e.to_string();
            let line = ErrorLine {
                error: ErrorBody {
                    kind: "usage",
                    message: message
                        .lines()
                        .take_while(|l| !l.trim().is_empty())
                        .map(str::trim)
                        .collect::<Vec<_>>()
                        .join(" "),
                    exit_code: EXIT_USAGE,
                },
            };
            let _ = writeln!(err, "{}", serde_json::to_string(&line).expect("plain strings serialize"));
            return EXIT_USAGE;
        }
    };
    match dispatch(cfg, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let (kind, code) = classify(&e);
            let line = ErrorLine {
                error: ErrorBody {
                    kind,
                    message: format!("{e:#}").replace('\n', " "),
                    exit_code: code,
                },
            };
            let _ = writeln!(err, "{}", serde_json::to_string(&line).expect("plain strings serialize"));
            code
        }
    }
}
