fn main() {
    std::process::exit(radonmap::cli::run(std::env::args_os()));
}
