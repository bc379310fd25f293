fn main() {
    std::process::exit(querycat_cli::run(std::env::args_os()));
}
