use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stvenant_lab::export::{default_root, write_outcome};
use stvenant_lab::runner::{certify_scenario, run_scenario, CertificateSummary};
use stvenant_lab::{scenarios, LabError, ScenarioSpec};

#[derive(Parser)]
#[command(
    name = "stvenant",
    version,
    about = "PI boundary control experiments on the Saint-Venant equations"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run scenarios given by bundled name or file path.
    Run {
        targets: Vec<String>,
        /// Run every bundled scenario.
        #[arg(long)]
        all: bool,
        /// Override a field, e.g. `grid.n=101` or `controller.k_p=2`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Output root (default `$STVENANT_OUT` or `./stvenant-out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run scenarios concurrently.
        #[arg(long)]
        parallel: bool,
    },
    /// List bundled scenarios.
    List,
    /// Show a bundled scenario.
    Describe { name: String },
    /// Build the certificate only.
    Certify {
        target: String,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn run_one(spec: &ScenarioSpec, root: &PathBuf) -> Result<String, LabError> {
    let outcome = run_scenario(spec)?;
    let dir = write_outcome(root, &outcome)?;
    let mut report = String::new();
    for a in &outcome.summary.assertions {
        let mark = if a.pass { "ok  " } else { "FAIL" };
        report.push_str(&format!(
            "  {mark} {}: expected {}, got {}\n",
            a.name, a.expected, a.actual
        ));
    }
    report.push_str(&format!("  artifacts in {}\n", dir.display()));
    print!("{}:\n{report}", spec.name);
    outcome.status().map(|()| report)
}

fn run(
    targets: Vec<String>,
    all: bool,
    overrides: &[String],
    out: Option<PathBuf>,
    parallel: bool,
) -> i32 {
    let mut names = targets;
    if all {
        names.extend(scenarios::names().map(String::from));
    }
    if names.is_empty() {
        eprintln!("nothing to run: give scenario names or files, or --all");
        return 2;
    }
    let mut specs = Vec::new();
    for n in &names {
        match scenarios::load(n, overrides) {
            Ok(s) => specs.push(s),
            Err(e) => {
                eprintln!("{n}: {e}");
                return e.exit_code();
            }
        }
    }
    let root = out.unwrap_or_else(default_root);
    let results: Vec<Result<String, LabError>> = if parallel {
        std::thread::scope(|s| {
            let handles: Vec<_> = specs
                .iter()
                .map(|spec| s.spawn(|| run_one(spec, &root)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scenario thread panicked"))
                .collect()
        })
    } else {
        specs.iter().map(|spec| run_one(spec, &root)).collect()
    };
    let mut code = 0;
    for (spec, r) in specs.iter().zip(results) {
        if let Err(e) = r {
            eprintln!("{}: {e}", spec.name);
            if code == 0 {
                code = e.exit_code();
            }
        }
    }
    code
}

fn certify(target: &str, overrides: &[String]) -> Result<(), LabError> {
    let spec = scenarios::load(target, overrides)?;
    let (_, _, cert) = certify_scenario(&spec)?;
    println!(
        "{}",
        serde_json::to_string_pretty(&CertificateSummary::from(&cert))?
    );
    if spec.expect.certificate_valid == Some(true) && !cert.valid {
        return Err(LabError::CertificateInfeasible(
            cert.diagnostic.unwrap_or_default(),
        ));
    }
    Ok(())
}

fn main() -> ExitCode {
    let code = match Cli::parse().cmd {
        Cmd::Run {
            targets,
            all,
            overrides,
            out,
            parallel,
        } => run(targets, all, &overrides, out, parallel),
        Cmd::List => {
            print!("{}", scenarios::list());
            0
        }
        Cmd::Describe { name } => match scenarios::describe(&name) {
            Ok(text) => {
                print!("{text}");
                0
            }
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        },
        Cmd::Certify { target, overrides } => match certify(&target, &overrides) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("{e}");
                e.exit_code()
            }
        },
    };
    ExitCode::from(code as u8)
}
