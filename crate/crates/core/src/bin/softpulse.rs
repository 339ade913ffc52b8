use std::process::ExitCode;

fn main() -> ExitCode {
    softpulse::cli::main_with_args(std::env::args_os())
}
