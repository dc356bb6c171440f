use std::process::ExitCode;

fn main() -> ExitCode {
    amoeba_cli::run_command(std::env::args_os())
}
