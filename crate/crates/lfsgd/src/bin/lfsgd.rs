use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(lfsgd::harness::main_with_args(std::env::args_os().collect()))
}
