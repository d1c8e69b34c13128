fn main() {
    std::process::exit(cvqkd::cli::main_exit_code());
}
