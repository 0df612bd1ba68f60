use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cwlab::config::{parse_list, RunConfig};
use cwlab::geodesy::cw_csv;
use cwlab::harness::{self, RunReport};
use cwlab::report::VerificationReport;
use cwlab::Error;

#[derive(Parser)]
#[command(name = "cwlab", version, about = "Verification suites for a Clifford-Wolf homogeneous quotient of Sp(2)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// so(7), G2, root planes, the sp(2) subalgebra and Phi.
    VerifyStructure(Common),
    /// Constant-length Killing field statistics.
    VerifyCk(Common),
    /// Isometric right algebra, centralizer and orbit ranks.
    VerifyOrbit(Common),
    /// Displacement of the cyclic left translations across the s sweep.
    ExperimentCw(Common),
    /// Every suite, written to one JSON report.
    ReportAll(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Key = value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated deformation parameters.
    #[arg(long = "s", value_name = "LIST")]
    s: Option<String>,
    /// Order parameter of the cyclic group (order 2n+1).
    #[arg(long)]
    n: Option<usize>,
    /// JSON report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Structure file to reuse (created when missing).
    #[arg(long = "structure-file")]
    structure_file: Option<PathBuf>,
    /// Sample count for the selected suite.
    #[arg(long)]
    samples: Option<usize>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

enum Kind {
    Structure,
    Ck,
    Orbit,
    Cw,
    All,
}

fn build_config(c: &Common, kind: &Kind) -> Result<RunConfig, Error> {
    let mut cfg = match &c.config {
        Some(p) => RunConfig::load(p).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("cannot read {path}: {source}")),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(s) = &c.s {
        cfg.s_values = parse_list("--s", s)?;
    }
    if let Some(n) = c.n {
        cfg.n = n;
    }
    if let Some(out) = &c.out {
        cfg.out = Some(out.clone());
    }
    if let Some(p) = &c.structure_file {
        cfg.structure_file = Some(p.clone());
    }
    if let Some(j) = c.jobs {
        cfg.jobs = Some(j);
    }
    if let Some(n) = c.samples {
        match kind {
            Kind::Ck => cfg.ck.samples = n,
            Kind::Orbit => cfg.orbit.samples = n,
            Kind::Cw => cfg.cw.samples = n,
            Kind::All => {
                cfg.ck.samples = n;
                cfg.orbit.samples = n;
                cfg.cw.samples = n;
            }
            Kind::Structure => {}
        }
    }
    if matches!(kind, Kind::All) && cfg.out.is_none() {
        cfg.out = Some(PathBuf::from("cwlab-report.json"));
    }
    if matches!(kind, Kind::Cw | Kind::All) && cfg.csv.is_none() {
        cfg.csv = Some(cfg.out.as_ref().map(|o| o.with_extension("csv")).unwrap_or_else(|| PathBuf::from("cw_displacements.csv")));
    }
    cfg.validate()?;
    for p in [&cfg.out, &cfg.csv, &cfg.structure_file].into_iter().flatten() {
        check_parent(p)?;
    }
    Ok(cfg)
}

fn check_parent(p: &Path) -> Result<(), Error> {
    match p.parent() {
        Some(dir) if !dir.as_os_str().is_empty() && !dir.is_dir() => {
            Err(Error::Config(format!("output directory {} does not exist", dir.display())))
        }
        _ => Ok(()),
    }
}

fn run(kind: &Kind, cfg: &RunConfig) -> Result<RunReport, Error> {
    let st = harness::obtain_structure(cfg)?;
    let (suites, experiments) = match kind {
        Kind::Structure => (harness::structure_reports(&st, cfg), Vec::new()),
        Kind::Ck => (harness::ck_reports(&st, cfg), Vec::new()),
        Kind::Orbit => (harness::orbit_reports(&st, cfg), Vec::new()),
        Kind::Cw => harness::cw_reports(&st, cfg),
        Kind::All => {
            let mut all = harness::structure_reports(&st, cfg);
            all.extend(harness::ck_reports(&st, cfg));
            all.extend(harness::orbit_reports(&st, cfg));
            all.extend(harness::geodesy_reports(&st, cfg));
            let (cw, ex) = harness::cw_reports(&st, cfg);
            all.extend(cw);
            (all, ex)
        }
    };
    if let Some(csv) = &cfg.csv {
        if !experiments.is_empty() {
            harness::write_file(csv, &cw_csv(&experiments))?;
        }
    }
    let report = RunReport::new(cfg, suites);
    if let Some(out) = &cfg.out {
        harness::write_file(out, &serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}

fn print(reports: &[VerificationReport]) {
    for r in reports {
        for line in r.summary_lines() {
            println!("{line}");
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match &cli.command {
        Command::VerifyStructure(c) => (Kind::Structure, c),
        Command::VerifyCk(c) => (Kind::Ck, c),
        Command::VerifyOrbit(c) => (Kind::Orbit, c),
        Command::ExperimentCw(c) => (Kind::Cw, c),
        Command::ReportAll(c) => (Kind::All, c),
    };
    let cfg = match build_config(common, &kind) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("cwlab: {e}");
            return ExitCode::from(2);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = cfg.jobs {
        pool = pool.num_threads(j);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("cwlab: cannot start worker pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(&kind, &cfg)) {
        Ok(report) => {
            print(&report.suites);
            let failed = report.suites.iter().filter(|r| !r.passed()).count();
            println!("{} suites, {} not passing", report.suites.len(), failed);
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e @ (Error::Config(_) | Error::Io { .. } | Error::InvalidArgument(_))) => {
            eprintln!("cwlab: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("cwlab: {e}");
            ExitCode::from(1)
        }
    }
}
