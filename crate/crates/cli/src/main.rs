mod args;
mod commands;
mod error;
mod load;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use args::{Cli, Command};
use error::{CliError, CliResult};
use output::OutDir;

/// `manifest.json`: the parsed command plus every resolved setting.
#[derive(Serialize, Deserialize)]
struct Manifest {
    version: String,
    command: Command,
    #[serde(default)]
    resolved: Value,
}

fn read_manifest(path: &Path) -> CliResult<Command> {
    let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
    let m: Manifest = serde_json::from_str(&text).map_err(|e| CliError::malformed(path, e))?;
    Ok(m.command)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        if !bayes_ergm::par::configure_threads(t) {
            log::warn!("--threads ignored: built without parallel support or pool already set");
        }
    }
    let command = match (&cli.from_manifest, cli.command) {
        (Some(_), Some(_)) => return Err(CliError::Usage("--from-manifest takes no subcommand".into())),
        (Some(p), None) => read_manifest(p)?,
        (None, Some(c)) => c,
        (None, None) => return Err(CliError::Usage("no subcommand given; see --help".into())),
    };
    let out = OutDir::create(&cli.out.unwrap_or_else(|| PathBuf::from(".")))?;
    log::info!("running {}", command.name());
    let resolved = match &command {
        Command::Fit(a) => commands::fit(a, &out)?,
        Command::FitMissing(a) => commands::fit_missing(a, &out)?,
        Command::Evidence(a) => commands::evidence(a, &out)?,
        Command::Compare(a) => commands::compare_cmd(a, &out)?,
        Command::Gof(a) => commands::gof(a, &out)?,
        Command::Simulate(a) => commands::simulate(a, &out)?,
        Command::Mple(a) => commands::mple_cmd(a, &out)?,
    };
    let manifest = Manifest { version: env!("CARGO_PKG_VERSION").into(), command, resolved };
    out.write_json("manifest.json", &manifest)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error[{}]: {msg}", e.category());
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        super::Cli::command().debug_assert();
    }
}
