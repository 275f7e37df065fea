fn main() {
    std::process::exit(capeval::cli::run(std::env::args_os()));
}
