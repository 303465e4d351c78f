//! Command-line entry point: reproducible seeded runs with file outputs.
//!
//! Every command writes its primary output plus a `<output>.manifest.json`
//! sidecar recording the command line, master seed, tool version, output
//! paths, and wall-clock time, which is enough to reproduce the run
//! byte-for-byte (single-threaded; `--jobs` only changes scheduling, not
//! results). All files are written to a temporary name and atomically
//! renamed, so a failing run leaves no partial outputs.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, invalid
//! parameters, unreadable inputs), 2 on numerical failures (diverged fits,
//! vanishing probabilities, solver breakdowns).
//!
//! The two-qubit Clifford group table is enumerated once per process; set
//! `MIPT_TRAJ_CACHE` to a directory to persist it across runs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::analysis::{
    self, amplification_gadget, data_collapse, eval_bounds_report, failure_probability_bound,
    fit_exponential, infidelity_sweep, sweep_mutual_info, Branch, CollapsePoint, CollapseResult,
    ExpFit, GadgetMode, PolyTerm, Stat, SweepSettings,
};
use crate::circuit::{self, CircuitSpec, GateFamily, TrajectoryRecord};
use crate::dqite::{self, LearnedPostselection, QiteConfig, Tomography};
use crate::{dense, Error, Result};

#[derive(Parser)]
#[command(name = "mipt", version, about = "Measured random circuits and deterministic postselection via imaginary-time evolution", max_term_width = 100)]
struct Cli {
    /// Master seed; all per-trajectory randomness is derived from it by a
    /// counter-based split, so results are independent of --jobs.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads for sweeps (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one measured brickwork trajectory and record it to a
    /// .traj.json file.
    Record(RecordArgs),
    /// Sweep ensemble mutual information I(A,C)(r) over measurement rates
    /// (CSV).
    Mutualinfo(MutualinfoArgs),
    /// Finite-size data collapse of cluster correlations at r = n/16 (JSON).
    Collapse(CollapseArgs),
    /// Replay a recorded trajectory with measurements replaced by learned
    /// unitaries (JSON report + learned-unitary file).
    Replay(ReplayArgs),
    /// Infidelity of learned postselection versus imaginary time and domain
    /// radius (CSV).
    #[command(name = "fidelity-sweep")]
    FidelitySweep(FidelitySweepArgs),
    /// Evaluate the error-budget and runtime formulas (JSON).
    Bounds(BoundsArgs),
    /// Run the ancilla amplification gadget (JSON).
    Amplify(AmplifyArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyArg {
    Clifford,
    Haar,
}

impl From<FamilyArg> for GateFamily {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Clifford => GateFamily::Clifford,
            FamilyArg::Haar => GateFamily::Haar,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StatArg {
    Median,
    Mean,
}

impl From<StatArg> for Stat {
    fn from(s: StatArg) -> Self {
        match s {
            StatArg::Median => Stat::Median,
            StatArg::Mean => Stat::Mean,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TomographyArg {
    Exact,
    Sampled,
}

#[derive(Args)]
struct TomographyOpts {
    /// How Pauli expectations on the learning domain are obtained.
    #[arg(long, value_enum, default_value_t = TomographyArg::Exact)]
    tomography: TomographyArg,

    /// Shots per Pauli expectation in sampled tomography.
    #[arg(long, default_value_t = 1024)]
    shots: u64,
}

impl TomographyOpts {
    fn resolve(&self) -> Tomography {
        match self.tomography {
            TomographyArg::Exact => Tomography::Exact,
            TomographyArg::Sampled => Tomography::Sampled { shots: self.shots },
        }
    }
}

#[derive(Args)]
struct RecordArgs {
    /// Qubit count (even).
    #[arg(long)]
    n: usize,

    /// Brickwork layer count.
    #[arg(long)]
    layers: usize,

    /// Measurement rate per qubit per layer gap.
    #[arg(long)]
    p: f64,

    #[arg(long, value_enum, default_value_t = FamilyArg::Clifford)]
    family: FamilyArg,

    /// Output path (default: traj_n<n>_L<L>_p<p>_<family>_s<seed>.traj.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MutualinfoArgs {
    #[arg(long, default_value_t = 64)]
    n: usize,

    #[arg(long, default_value_t = 64)]
    layers: usize,

    /// Measurement rates, space separated.
    #[arg(long, num_args = 1.., default_values_t = [0.05, 0.5])]
    p: Vec<f64>,

    /// Cluster radii, space separated.
    #[arg(long, num_args = 1.., default_values_t = [1usize, 2, 4, 8, 16])]
    r: Vec<usize>,

    /// Trajectories per measurement rate.
    #[arg(long, default_value_t = 200)]
    traj: usize,

    #[arg(long, value_enum, default_value_t = StatArg::Median)]
    stat: StatArg,

    #[arg(long, default_value = "mutualinfo.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct CollapseArgs {
    /// System sizes (each divisible by 16; r = n/16).
    #[arg(long, num_args = 1.., default_values_t = [32usize, 64, 128])]
    n: Vec<usize>,

    /// Measurement rates on both sides of p_c.
    #[arg(long, num_args = 1.., default_values_t = [0.05, 0.08, 0.11, 0.14, 0.20, 0.24, 0.28, 0.32])]
    p: Vec<f64>,

    /// Trajectories per (n, p) point.
    #[arg(long, default_value_t = 200)]
    traj: usize,

    /// Critical measurement rate separating the branches.
    #[arg(long, default_value_t = 0.16)]
    p_c: f64,

    /// Lower end of the ν search interval.
    #[arg(long, default_value_t = 0.3)]
    nu_lo: f64,

    /// Upper end of the ν search interval.
    #[arg(long, default_value_t = 3.0)]
    nu_hi: f64,

    #[arg(long, value_enum, default_value_t = StatArg::Median)]
    stat: StatArg,

    /// Skip the circuit sweep and generate input data from a planted master
    /// curve with this exponent (self-test mode).
    #[arg(long)]
    synthetic_nu: Option<f64>,

    #[arg(long, default_value = "collapse.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ReplayArgs {
    /// Recorded trajectory (.traj.json, dense family).
    #[arg(long)]
    record: PathBuf,

    /// Total trace-distance budget ε.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,

    /// Learning-domain radius.
    #[arg(long, default_value_t = 2)]
    r: usize,

    /// Trotter step of imaginary time.
    #[arg(long, default_value_t = 0.1)]
    dtau: f64,

    /// Tikhonov regularization of the step solve.
    #[arg(long, default_value_t = 1e-8)]
    lambda: f64,

    /// Fixed imaginary time per measurement. When absent, β is chosen per
    /// measurement from the gap bound with the measured Born probability
    /// (natural-log convention).
    #[arg(long)]
    beta: Option<f64>,

    #[command(flatten)]
    tomo: TomographyOpts,

    /// Previously learned unitaries; skips learning and replays them
    /// verbatim.
    #[arg(long)]
    learned: Option<PathBuf>,

    /// Report path; the learned unitaries go to <out>.learned.json.
    #[arg(long, default_value = "replay.json")]
    out: PathBuf,
}

#[derive(Args)]
struct FidelitySweepArgs {
    #[arg(long, default_value_t = 10)]
    n: usize,

    #[arg(long, default_value_t = 10)]
    layers: usize,

    /// Measurement rates, space separated.
    #[arg(long, num_args = 1.., default_values_t = [0.5, 0.1])]
    p: Vec<f64>,

    /// Learning-domain radii, space separated.
    #[arg(long, num_args = 1.., default_values_t = [1usize, 2, 3])]
    r: Vec<usize>,

    /// Imaginary-time grid as start:stop:step.
    #[arg(long, default_value = "0:3:0.25")]
    beta: String,

    #[arg(long, default_value_t = 0.1)]
    dtau: f64,

    #[arg(long, default_value_t = 1e-8)]
    lambda: f64,

    #[command(flatten)]
    tomo: TomographyOpts,

    /// Trajectories per measurement rate.
    #[arg(long, default_value_t = 20)]
    traj: usize,

    #[arg(long, default_value = "fidelity.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct BoundsArgs {
    /// Born probability P of the postselected outcome.
    #[arg(long)]
    p: f64,

    /// Number of postselected measurements M.
    #[arg(long, default_value_t = 1)]
    m: usize,

    /// Total trace-distance budget ε.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,

    /// Spectral gap Δ of the outcome Hamiltonian.
    #[arg(long, default_value_t = 2.0)]
    gap: f64,

    #[arg(long, default_value_t = 0.1)]
    dtau: f64,

    /// System size for the failure-probability bound.
    #[arg(long)]
    n: Option<usize>,

    /// Threshold polynomial terms coeff:n_deg:m_deg (repeatable); with --n,
    /// adds the failure bound for δ = 1/(M·poly(n, M)).
    #[arg(long)]
    poly: Vec<String>,

    #[arg(long, default_value = "bounds.json")]
    out: PathBuf,
}

#[derive(Args)]
struct AmplifyArgs {
    /// Branch weight-ratio exponent: small/large branch weight = 2^-k_amp.
    #[arg(long, default_value_t = 4)]
    k_amp: u32,

    /// Ancilla count.
    #[arg(long, default_value_t = 12)]
    m: usize,

    /// Postselect ancillas exactly or by learned unitaries.
    #[arg(long, value_enum, default_value_t = GadgetModeArg::Exact)]
    mode: GadgetModeArg,

    /// Imaginary time per ancilla (dqite mode).
    #[arg(long, default_value_t = 8.0)]
    beta: f64,

    #[arg(long, default_value_t = 0.05)]
    dtau: f64,

    /// Learning-domain radius (dqite mode).
    #[arg(long, default_value_t = 2)]
    r: usize,

    #[arg(long, default_value = "amplify.json")]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum GadgetModeArg {
    Exact,
    Dqite,
}

// ---------------------------------------------------------------------------
// plumbing
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RunManifest {
    command: String,
    argv: Vec<String>,
    master_seed: u64,
    version: String,
    output_paths: Vec<String>,
    wall_clock_seconds: f64,
}

/// 17 significant digits, enough to round-trip any f64.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("bad output path {}", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Parses an inclusive "start:stop:step" grid.
fn parse_grid(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "grid must be start:stop:step, got {s:?}"
        )));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad grid number {t:?}")))
        })
        .collect::<Result<_>>()?;
    let (start, stop, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || stop < start {
        return Err(Error::InvalidArgument(
            "grid needs stop >= start and step > 0".into(),
        ));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| start + i as f64 * step).collect())
}

fn parse_poly_term(s: &str) -> Result<PolyTerm> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "poly term must be coeff:n_deg:m_deg, got {s:?}"
        )));
    }
    let coeff: f64 = parts[0]
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad coefficient {:?}", parts[0])))?;
    let n_deg: u32 = parts[1]
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad n degree {:?}", parts[1])))?;
    let m_deg: u32 = parts[2]
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("bad M degree {:?}", parts[2])))?;
    Ok(PolyTerm {
        coeff,
        n_deg,
        m_deg,
    })
}

/// 1 for malformed inputs and invalid parameters, 2 for numerical failures.
fn classify(err: &Error) -> u8 {
    match err {
        Error::InvalidSpec(_)
        | Error::InvalidConfig(_)
        | Error::InvalidArgument(_)
        | Error::InvalidRegion(_)
        | Error::QubitOutOfRange(..)
        | Error::EqualQubits(_)
        | Error::GateIndexOutOfRange(_)
        | Error::RegionTooLarge(..)
        | Error::VersionMismatch(..)
        | Error::MalformedRecord(_)
        | Error::Io(_)
        | Error::Serde(_) => 1,
        _ => 2,
    }
}

pub fn run() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(jobs) = cli.jobs {
        // a later global-pool builder call fails harmlessly once one exists
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global();
    }
    let started = Instant::now();
    let command_name = match &cli.command {
        Command::Record(_) => "record",
        Command::Mutualinfo(_) => "mutualinfo",
        Command::Collapse(_) => "collapse",
        Command::Replay(_) => "replay",
        Command::FidelitySweep(_) => "fidelity-sweep",
        Command::Bounds(_) => "bounds",
        Command::Amplify(_) => "amplify",
    };
    let outcome = dispatch(&cli);
    match outcome {
        Ok(outputs) => {
            let manifest = RunManifest {
                command: command_name.to_string(),
                argv: std::env::args().collect(),
                master_seed: cli.seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                output_paths: outputs.iter().map(|p| p.display().to_string()).collect(),
                wall_clock_seconds: started.elapsed().as_secs_f64(),
            };
            let sidecar = match outputs.first() {
                Some(first) => PathBuf::from(format!("{}.manifest.json", first.display())),
                None => PathBuf::from(format!("{command_name}.manifest.json")),
            };
            if let Err(e) = write_json(&sidecar, &manifest) {
                eprintln!("error: failed to write manifest: {e}");
                return ExitCode::from(classify(&e));
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(classify(&e))
        }
    }
}

fn dispatch(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Record(args) => cmd_record(args, cli.seed),
        Command::Mutualinfo(args) => cmd_mutualinfo(args, cli.seed),
        Command::Collapse(args) => cmd_collapse(args, cli.seed),
        Command::Replay(args) => cmd_replay(args, cli.seed),
        Command::FidelitySweep(args) => cmd_fidelity_sweep(args, cli.seed),
        Command::Bounds(args) => cmd_bounds(args),
        Command::Amplify(args) => cmd_amplify(args, cli.seed),
    }
}

// ---------------------------------------------------------------------------
// commands
// ---------------------------------------------------------------------------

fn cmd_record(args: &RecordArgs, seed: u64) -> Result<Vec<PathBuf>> {
    let family: GateFamily = args.family.into();
    let spec = CircuitSpec::new(args.n, args.layers, args.p, family, seed);
    let (record, _) = circuit::generate_and_record(&spec)?;
    let out = args.out.clone().unwrap_or_else(|| {
        let fam = match family {
            GateFamily::Clifford => "clifford",
            GateFamily::Haar => "haar",
        };
        PathBuf::from(format!(
            "traj_n{}_L{}_p{}_{}_s{}.traj.json",
            args.n, args.layers, args.p, fam, seed
        ))
    });
    write_atomic(&out, &circuit::serialize(&record)?)?;
    println!(
        "recorded {} gates, {} measurements -> {}",
        record.gates.len(),
        record.measurements.len(),
        out.display()
    );
    Ok(vec![out])
}

fn cmd_mutualinfo(args: &MutualinfoArgs, seed: u64) -> Result<Vec<PathBuf>> {
    let curves = sweep_mutual_info(
        args.n,
        args.layers,
        &args.p,
        &args.r,
        args.traj,
        args.stat.into(),
        seed,
    )?;
    let mut csv = String::from("n,L,p,r,stat,value,stderr,n_traj\n");
    for curve in &curves {
        let stat = match curve.stat {
            Stat::Median => "median",
            Stat::Mean => "mean",
        };
        for (i, &r) in curve.r_values.iter().enumerate() {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                curve.n,
                curve.layers,
                fmt17(curve.p),
                r,
                stat,
                fmt17(curve.values[i]),
                fmt17(curve.stderr[i]),
                curve.n_traj
            ));
        }
    }
    write_atomic(&args.out, csv.as_bytes())?;
    println!(
        "{} curves x {} radii -> {}",
        curves.len(),
        args.r.len(),
        args.out.display()
    );
    Ok(vec![args.out.clone()])
}

#[derive(Serialize)]
struct BranchReport {
    collapse: CollapseResult,
    /// Stretched-exponential fit of the master curve at the optimal ν
    /// (offset pinned to 0 on the area branch).
    master_fit: Option<ExpFit>,
}

#[derive(Serialize)]
struct CollapseReport {
    p_c: f64,
    stat: Stat,
    n_traj: usize,
    synthetic_nu: Option<f64>,
    points: Vec<CollapsePoint>,
    area: Option<BranchReport>,
    volume: Option<BranchReport>,
}

fn branch_report(
    points: &[CollapsePoint],
    p_c: f64,
    branch: Branch,
    nu_lo: f64,
    nu_hi: f64,
    seed: u64,
) -> Result<Option<BranchReport>> {
    let subset: Vec<CollapsePoint> = points
        .iter()
        .filter(|pt| match branch {
            Branch::Area => pt.p > p_c,
            Branch::Volume => pt.p < p_c,
        })
        .copied()
        .collect();
    let mut sizes: Vec<usize> = subset.iter().map(|pt| pt.n).collect();
    sizes.sort_unstable();
    sizes.dedup();
    if sizes.len() < 3 {
        return Ok(None);
    }
    let collapse = data_collapse(&subset, p_c, branch, nu_lo, nu_hi)?;
    let master_fit = if subset.len() >= 5 {
        let xs: Vec<f64> = subset
            .iter()
            .map(|pt| ((pt.p - p_c) * (pt.n as f64).powf(1.0 / collapse.nu)).abs())
            .collect();
        let ys: Vec<f64> = subset.iter().map(|pt| pt.value).collect();
        fit_exponential(&xs, &ys, branch == Branch::Area, seed).ok()
    } else {
        None
    };
    Ok(Some(BranchReport {
        collapse,
        master_fit,
    }))
}

fn cmd_collapse(args: &CollapseArgs, seed: u64) -> Result<Vec<PathBuf>> {
    for &n in &args.n {
        if n % 16 != 0 {
            return Err(Error::InvalidArgument(format!(
                "n = {n} is not divisible by 16 (cluster radius is r = n/16)"
            )));
        }
    }
    let mut points = Vec::new();
    match args.synthetic_nu {
        Some(nu_star) => {
            if !(nu_star > 0.0) {
                return Err(Error::InvalidArgument("synthetic ν must be positive".into()));
            }
            let g = |x: f64| 2.0 * (-0.8 * x.abs().powf(1.2)).exp() + 0.1;
            for &n in &args.n {
                for &p in &args.p {
                    let x = (p - args.p_c) * (n as f64).powf(1.0 / nu_star);
                    points.push(CollapsePoint { n, p, value: g(x) });
                }
            }
        }
        None => {
            for &n in &args.n {
                let curves = sweep_mutual_info(
                    n,
                    n,
                    &args.p,
                    &[n / 16],
                    args.traj,
                    args.stat.into(),
                    seed,
                )?;
                for curve in curves {
                    points.push(CollapsePoint {
                        n,
                        p: curve.p,
                        value: curve.values[0],
                    });
                }
            }
        }
    }
    let report = CollapseReport {
        p_c: args.p_c,
        stat: args.stat.into(),
        n_traj: args.traj,
        synthetic_nu: args.synthetic_nu,
        points: points.clone(),
        area: branch_report(&points, args.p_c, Branch::Area, args.nu_lo, args.nu_hi, seed)?,
        volume: branch_report(
            &points,
            args.p_c,
            Branch::Volume,
            args.nu_lo,
            args.nu_hi,
            seed,
        )?,
    };
    write_json(&args.out, &report)?;
    for (label, branch) in [("area", &report.area), ("volume", &report.volume)] {
        match branch {
            Some(b) => println!(
                "{label}: nu = {:.4}, residual = {:.4e}{}",
                b.collapse.nu,
                b.collapse.residual,
                if b.collapse.degenerate { " (degenerate)" } else { "" }
            ),
            None => println!("{label}: not enough system sizes on this side of p_c"),
        }
    }
    Ok(vec![args.out.clone()])
}

#[derive(Serialize)]
struct ReplayReport {
    record: String,
    epsilon: f64,
    /// Per-measurement trace-distance budget ε/(2M).
    epsilon_beta: f64,
    adaptive_beta: bool,
    measurement_count: usize,
    /// |⟨ψ_replayed|ψ_reference⟩|² against the force-projected reference.
    final_fidelity: f64,
    /// True when every per-measurement infidelity stayed within ε/(2M).
    budget_met: bool,
    diagnostics: Vec<dqite::MeasurementDiagnostic>,
}

fn cmd_replay(args: &ReplayArgs, seed: u64) -> Result<Vec<PathBuf>> {
    let record: TrajectoryRecord = circuit::deserialize(&fs::read(&args.record)?)?;
    let stored: Option<Vec<LearnedPostselection>> = match &args.learned {
        Some(path) => Some(serde_json::from_slice(&fs::read(path)?)?),
        None => None,
    };
    let adaptive = args.beta.is_none();
    let config = QiteConfig {
        beta: args.beta.unwrap_or(1.0).max(args.dtau),
        dtau: args.dtau,
        r: args.r,
        lambda: args.lambda,
        tomography: args.tomo.resolve(),
    };
    let result = dqite::replay_trajectory(
        &record,
        &config,
        args.epsilon,
        adaptive,
        stored.as_deref(),
        seed,
    )?;
    let reference = circuit::replay_reference(&record)?;
    let reference = reference.dense().ok_or_else(|| {
        Error::InvalidConfig("learned replay requires a dense-family record".into())
    })?;
    let final_fidelity = dense::fidelity(&result.state, reference)?;
    let report = ReplayReport {
        record: args.record.display().to_string(),
        epsilon: args.epsilon,
        epsilon_beta: result.epsilon_beta,
        adaptive_beta: adaptive,
        measurement_count: result.diagnostics.len(),
        final_fidelity,
        budget_met: result.diagnostics.iter().all(|d| !d.budget_exceeded),
        diagnostics: result.diagnostics.clone(),
    };
    let learned_out = PathBuf::from(format!("{}.learned.json", args.out.display()));
    write_json(&args.out, &report)?;
    write_json(&learned_out, &result.learned)?;
    println!(
        "replayed {} measurements, final fidelity {:.6} -> {}",
        report.measurement_count,
        final_fidelity,
        args.out.display()
    );
    Ok(vec![args.out.clone(), learned_out])
}

fn cmd_fidelity_sweep(args: &FidelitySweepArgs, seed: u64) -> Result<Vec<PathBuf>> {
    let betas = parse_grid(&args.beta)?;
    let settings = SweepSettings {
        n: args.n,
        layers: args.layers,
        p_values: args.p.clone(),
        r_values: args.r.clone(),
        betas,
        dtau: args.dtau,
        lambda: args.lambda,
        tomography: args.tomo.resolve(),
        n_traj: args.traj,
        master_seed: seed,
    };
    let rows = infidelity_sweep(&settings)?;
    let mut csv =
        String::from("n,L,p,r,beta,trajectory_id,infidelity,exact_reference,born_p\n");
    for row in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            row.n,
            row.layers,
            fmt17(row.p),
            row.r,
            fmt17(row.beta),
            row.trajectory,
            fmt17(row.infidelity),
            fmt17(row.exact_reference),
            fmt17(row.born_p)
        ));
    }
    write_atomic(&args.out, csv.as_bytes())?;
    println!("{} rows -> {}", rows.len(), args.out.display());
    Ok(vec![args.out.clone()])
}

#[derive(Serialize)]
struct BoundsOutput {
    report: analysis::BoundsReport,
    failure: Option<analysis::FailureBound>,
}

fn cmd_bounds(args: &BoundsArgs) -> Result<Vec<PathBuf>> {
    if !(args.p > 0.0 && args.p <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Born probability must be in (0, 1], got {}",
            args.p
        )));
    }
    let report = eval_bounds_report(args.p, args.m, args.epsilon, args.gap, args.dtau)?;
    let failure = match (args.n, args.poly.is_empty()) {
        (Some(n), false) => {
            let terms: Vec<PolyTerm> = args
                .poly
                .iter()
                .map(|s| parse_poly_term(s))
                .collect::<Result<_>>()?;
            Some(failure_probability_bound(args.m, n, &terms)?)
        }
        (None, false) | (Some(_), true) => {
            return Err(Error::InvalidArgument(
                "the failure bound needs both --n and --poly".into(),
            ));
        }
        (None, true) => None,
    };
    let output = BoundsOutput { report, failure };
    write_json(&args.out, &output)?;
    println!(
        "beta = {}, n_beta = {}, total runtime ~ {:.4e} -> {}",
        fmt17(output.report.beta),
        output.report.n_beta,
        output.report.total_runtime,
        args.out.display()
    );
    Ok(vec![args.out.clone()])
}

fn cmd_amplify(args: &AmplifyArgs, seed: u64) -> Result<Vec<PathBuf>> {
    let mode = match args.mode {
        GadgetModeArg::Exact => GadgetMode::ExactProjection,
        GadgetModeArg::Dqite => GadgetMode::Dqite(QiteConfig {
            beta: args.beta,
            dtau: args.dtau,
            r: args.r,
            lambda: 1e-8,
            tomography: Tomography::Exact,
        }),
    };
    let result = amplification_gadget(args.k_amp, args.m, &mode, seed)?;
    write_json(&args.out, &result)?;
    for (k, (&got, &want)) in result
        .step_probabilities
        .iter()
        .zip(&result.predicted_probabilities)
        .enumerate()
    {
        println!("step {k}: born = {} (predicted {})", fmt17(got), fmt17(want));
    }
    println!(
        "final fidelity to the amplified branch: {} -> {}",
        fmt17(result.final_fidelity),
        args.out.display()
    );
    Ok(vec![args.out.clone()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing_is_inclusive() {
        let grid = parse_grid("0:3:0.25").unwrap();
        assert_eq!(grid.len(), 13);
        assert_eq!(grid[0], 0.0);
        assert!((grid[12] - 3.0).abs() < 1e-12);
        assert!(parse_grid("1:0:0.5").is_err());
        assert!(parse_grid("0:1:0").is_err());
        assert!(parse_grid("nope").is_err());
    }

    #[test]
    fn poly_terms_parse() {
        let t = parse_poly_term("1:1:1").unwrap();
        assert_eq!((t.coeff, t.n_deg, t.m_deg), (1.0, 1, 1));
        assert!(parse_poly_term("1:1").is_err());
        assert!(parse_poly_term("x:1:1").is_err());
    }

    #[test]
    fn float_format_round_trips() {
        for &x in &[0.1, 1.0 / 3.0, 2.68e-15, 123456.789] {
            let s = fmt17(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
    }
}
