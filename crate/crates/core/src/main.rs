fn main() {
    mmray::cli::init_logging();
    std::process::exit(mmray::cli::run(std::env::args_os()));
}
