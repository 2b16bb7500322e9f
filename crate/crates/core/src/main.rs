fn main() -> std::process::ExitCode {
    zeromode::cli::main_with_args(std::env::args_os())
}
