use clap::Parser;

fn main() -> std::process::ExitCode {
    phaselab::cli::run(phaselab::cli::Cli::parse())
}
