use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use deepsense_cli::commands::{analyze, load_config, parse_tables, simulate, CliError};
use deepsense_cli::serve::{ServeOptions, Server};
use deepsense_cli::{error_line, exit};

#[derive(Parser)]
#[command(name = "deepsense", version, about = "Deep-pressure elbow angle feedback: simulate, serve, analyze")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a synthetic cohort and write one log per participant.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Number of participants.
        #[arg(long)]
        n: usize,
        /// Master seed; defaults to the config's session seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Host live sessions for the participant UI.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long)]
        out: PathBuf,
        /// Directory with the built UI bundle.
        #[arg(long)]
        assets: Option<PathBuf>,
        /// Exit after the first session.
        #[arg(long)]
        once: bool,
    },
    /// Build result tables from session logs.
    Analyze {
        /// Log files or directories of `session_*.csv` files.
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// all, or a comma-separated subset of calibration,summary,angle,force,learning.
        #[arg(long, value_delimiter = ',', default_value = "all")]
        tables: Vec<String>,
    },
    /// Check a config file and print it with defaults filled in.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(e: CliError) -> ExitCode {
    for line in e.lines() {
        eprintln!("{line}");
    }
    ExitCode::from(e.code())
}

fn run(cmd: Cmd) -> Result<u8, CliError> {
    match cmd {
        Cmd::Simulate { config, n, seed, out } => {
            let cfg = load_config(config.as_deref())?;
            let seed = seed.unwrap_or(cfg.session.seed);
            let report = simulate(&cfg, n, seed, &out)?;
            print!("{}", report.text);
            println!("wrote {} logs and {}", report.logs.len(), report.summary.display());
            Ok(exit::OK)
        }
        Cmd::Serve {
            config,
            port,
            host,
            out,
            assets,
            once,
        } => {
            let cfg = load_config(config.as_deref())?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| CliError::Runtime(e.into()))?;
            rt.block_on(async {
                let server = Server::bind(ServeOptions {
                    cfg,
                    addr: SocketAddr::new(host, port),
                    out_dir: out,
                    assets,
                    once,
                })
                .await?;
                let addr = server.local_addr().map_err(anyhow::Error::from)?;
                println!("listening on http://{addr}");
                let _ = std::io::stdout().flush();
                server.run().await
            })?;
            Ok(exit::OK)
        }
        Cmd::Analyze { inputs, out, tables } => {
            let kinds = parse_tables(&tables)?;
            let report = analyze(&inputs, &out, &kinds)?;
            for line in report.error_lines() {
                eprintln!("{line}");
            }
            for p in &report.written {
                println!("wrote {}", p.display());
            }
            println!(
                "{} logs read, {} skipped, {} tables written",
                report.logs,
                report.file_errors.len(),
                report.written.len()
            );
            Ok(report.exit_code())
        }
        Cmd::Validate { config } => {
            let cfg = load_config(Some(&config))?;
            print!("{}", cfg.to_toml_string());
            Ok(exit::OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ");
            eprintln!("{}", error_line("usage", None, first));
            eprint!("{e}");
            return ExitCode::from(exit::USAGE);
        }
    };
    match run(cli.cmd) {
        Ok(code) => ExitCode::from(code),
        Err(e) => fail(e),
    }
}
