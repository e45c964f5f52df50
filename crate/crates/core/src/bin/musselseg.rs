use std::process::ExitCode;

fn main() -> ExitCode {
    musselseg::cli::main_with_args(std::env::args_os())
}
