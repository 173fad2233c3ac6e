fn main() {
    std::process::exit(ruinlab::cli::run(std::env::args_os()));
}
