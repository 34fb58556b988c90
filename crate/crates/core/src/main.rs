use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ada2ms::cli::main_with_args(std::env::args_os()).code())
}
