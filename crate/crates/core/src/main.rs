use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use curlforge::io::{run, Command, Outcome, RunOptions};

/// Nonlinear magnetostatic curl systems on multiply-connected domains.
///
/// Exit codes: 0 success, 2 compatibility violation, 3 solver failure,
/// 4 config or input error. Set CURLFORGE_LOG (error, warn, info, debug) for
/// log output on stderr.
#[derive(Parser)]
#[command(name = "curlforge", version)]
struct Cli {
    /// Worker threads for assembly and sampling.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the configured mesh and write it with a quality report.
    Mesh(Common),
    /// Compute the harmonic bases and print their dimensions.
    Harmonic(Common),
    /// Sample the constitutive conditions and the data compatibility checks.
    Check(Common),
    /// Solve the configured boundary value problem.
    Solve(Common),
    /// Aggregate summary.csv files into a table with convergence rates.
    Report {
        /// summary.csv files or run directories.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = ".")]
        output: PathBuf,
    },
}

#[derive(Args, Clone)]
struct Common {
    /// Config file; several run concurrently, each into its own subdirectory.
    #[arg(long, required = true)]
    config: Vec<PathBuf>,
    #[arg(long, default_value = "curlforge-out")]
    output: PathBuf,
    /// Overrides solver.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Config override such as tol=1e-10 or solver.bvp.xi_budget=400.
    #[arg(long = "tol-override", value_name = "K=V")]
    tol_override: Vec<String>,
}

fn run_one(cmd: &Command, path: &Path, opts: &RunOptions) -> Outcome {
    match std::fs::read_to_string(path) {
        Ok(text) => run(cmd, Some(&text), opts),
        Err(e) => Outcome { code: 4, message: format!("error: {}: {e}", path.display()) },
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CURLFORGE_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 4 } else { 0 });
        }
    };
    #[cfg(feature = "parallel")]
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(4);
        }
    }
    let (cmd, common) = match cli.cmd {
        Cmd::Mesh(c) => (Command::Mesh, c),
        Cmd::Harmonic(c) => (Command::Harmonic, c),
        Cmd::Check(c) => (Command::Check, c),
        Cmd::Solve(c) => (Command::Solve, c),
        Cmd::Report { inputs, output } => {
            let out = run(&Command::Report(inputs), None, &RunOptions { output, threads: cli.threads, ..Default::default() });
            println!("{}", out.message.trim_end());
            return ExitCode::from(out.code as u8);
        }
    };
    let opts = |output: PathBuf| RunOptions { output, seed: common.seed, overrides: common.tol_override.clone(), threads: cli.threads };
    if common.config.len() == 1 {
        let out = run_one(&cmd, &common.config[0], &opts(common.output.clone()));
        println!("{}", out.message.trim_end());
        return ExitCode::from(out.code as u8);
    }
    // batch: independent jobs with isolated output directories
    let results: Vec<(String, Outcome)> = std::thread::scope(|sc| {
        let handles: Vec<_> = common
            .config
            .iter()
            .map(|path| {
                let stem = path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
                let o = opts(common.output.join(&stem));
                let cmd = &cmd;
                sc.spawn(move || (stem, run_one(cmd, path, &o)))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("job thread")).collect()
    });
    let mut code = 0;
    for (stem, out) in results {
        println!("[{stem}] exit {}\n{}", out.code, out.message.trim_end());
        code = code.max(out.code);
    }
    ExitCode::from(code as u8)
}
