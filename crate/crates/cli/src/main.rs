use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use sg2d_cli::{parse_config, resolve_out_dir, run};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Subcommand {
    Sigma,
    Green,
    ChaosMoments,
    ChaosScan,
    GibbsSample,
    Logz,
    Evolve,
    Invariance,
    InvarianceParabolic,
    DpdCheck,
    Picard,
}

/// Renormalized sine-Gordon experiments on the two-dimensional torus.
#[derive(Debug, Parser)]
#[command(name = "sg2d", version)]
struct Args {
    #[arg(value_enum)]
    subcommand: Subcommand,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the replica count.
    #[arg(long)]
    replicas: Option<usize>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let name = args.subcommand.to_possible_value().expect("named variant").get_name().to_string();
    let env_out = std::env::var_os("SG2D_OUT_DIR").map(PathBuf::from);
    let cfg = match parse_config(&args.config) {
        Ok(mut cfg) => {
            if let Some(seed) = args.seed {
                cfg.seed = seed;
            }
            if let Some(r) = args.replicas {
                cfg.replicas = r;
            }
            Some(cfg)
        }
        Err(e) => {
            eprintln!("sg2d: {e}");
            None
        }
    };
    let out = resolve_out_dir(args.out, env_out, cfg.as_ref());
    let outcome = run(&name, cfg.as_ref(), &out);
    for failure in &outcome.manifest.failures {
        eprintln!("sg2d: check failed: {failure}");
    }
    if let Some(e) = &outcome.manifest.error {
        eprintln!("sg2d: {e}");
    }
    println!("{}", out.join(format!("{name}.manifest.json")).display());
    ExitCode::from(outcome.exit_code as u8)
}
