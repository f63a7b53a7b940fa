fn main() {
    std::process::exit(projlab::cli::run(std::env::args_os()));
}
