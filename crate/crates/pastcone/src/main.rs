fn main() -> std::process::ExitCode {
    pastcone::cli::main_entry()
}
