fn main() -> std::process::ExitCode {
    underwrite_core::cli::main()
}
