fn main() {
    std::process::exit(mixwass_cli::run(std::env::args_os()));
}
