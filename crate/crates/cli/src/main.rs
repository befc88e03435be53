fn main() {
    std::process::exit(sociometry_cli::run(std::env::args_os()));
}
