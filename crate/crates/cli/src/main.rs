fn main() {
    std::process::exit(wsop_cli::run(std::env::args_os()));
}
