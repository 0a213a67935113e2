fn main() -> std::process::ExitCode {
    sbr_core::cli::main()
}
