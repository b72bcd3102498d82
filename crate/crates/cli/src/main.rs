mod args;
mod commands;
mod config;
mod failure;

use std::process::ExitCode;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::config::Config;
use crate::failure::UsageError;

pub(crate) fn version_line() -> &'static str {
    static LINE: std::sync::OnceLock<String> = std::sync::OnceLock::new();
    LINE.get_or_init(|| {
        format!(
            "{} (library {}, model format {})",
            env!("CARGO_PKG_VERSION"),
            meshless::VERSION,
            meshless::model::MODEL_FORMAT_VERSION
        )
    })
}

/// OpenBLAS picks its kernels when the library loads, before `main` runs, and
/// some versions mis-factor with the kernels they choose for AVX-512 parts. Unless
/// the user chose a core type, restart once with the AVX2 kernels selected.
#[cfg(all(unix, target_arch = "x86_64"))]
fn pin_blas_kernels() {
    use std::os::unix::process::CommandExt;
    const VAR: &str = "OPENBLAS_CORETYPE";
    if std::env::var_os(VAR).is_some() || !std::is_x86_feature_detected!("avx2") {
        return;
    }
    let Ok(exe) = std::env::current_exe() else {
        return;
    };
    // exec only returns on failure; carry on and let the solver self-check report it.
    let _ = std::process::Command::new(exe)
        .args(std::env::args_os().skip(1))
        .env(VAR, "Haswell")
        .exec();
}

#[cfg(not(all(unix, target_arch = "x86_64")))]
fn pin_blas_kernels() {}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    if let Some(n) = cli.threads.or(cfg.threads) {
        if n == 0 {
            return Err(UsageError("thread count must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()?;
    }
    match &cli.command {
        Command::Reconstruct(a) => commands::reconstruct(a, &cfg),
        Command::Sweep(a) => commands::sweep(a, &cfg),
        Command::Volume(a) => commands::volume(a, &cfg),
        Command::Gen(a) => commands::gen(a, &cfg),
    }
}

fn main() -> ExitCode {
    pin_blas_kernels();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(failure::exit_code(&e))
        }
    }
}
