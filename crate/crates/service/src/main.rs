fn main() -> std::process::ExitCode {
    deixis_service::cli::main()
}
