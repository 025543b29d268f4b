use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(kds::cli::main_with_args(std::env::args_os()))
}
