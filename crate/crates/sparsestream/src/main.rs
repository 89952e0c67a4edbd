fn main() -> std::process::ExitCode {
    sparsestream::cli::main_with_args(std::env::args_os())
}
