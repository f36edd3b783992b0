use std::process::ExitCode;

fn main() -> ExitCode {
    obl::cli::main()
}
