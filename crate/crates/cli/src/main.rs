fn main() {
    std::process::exit(adastep_cli::run_from_env());
}
