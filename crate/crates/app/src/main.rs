use std::process::ExitCode;

fn main() -> ExitCode {
    greenval::cli::main_with_args(std::env::args_os())
}
