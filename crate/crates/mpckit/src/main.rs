use std::process::ExitCode;

fn main() -> ExitCode {
    mpckit::cli::main()
}
