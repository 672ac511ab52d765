fn main() { std::process::exit(lppsim::cli::run_from_env()); }
