fn main() {
    percept_mc::cli::init_logging();
    std::process::exit(percept_mc::cli::run(std::env::args_os()));
}
