fn main() {
    std::process::exit(pulled_fronts_cli::run(std::env::args_os()));
}
