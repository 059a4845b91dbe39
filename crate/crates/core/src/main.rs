fn main() -> std::process::ExitCode {
    coherence_pmp::cli::main()
}
