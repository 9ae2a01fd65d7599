use std::process::ExitCode;

fn main() -> ExitCode {
    kinetic::cli::run(std::env::args_os())
}
