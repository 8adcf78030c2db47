fn main() {
    std::process::exit(phs::cli::run(std::env::args_os()));
}
