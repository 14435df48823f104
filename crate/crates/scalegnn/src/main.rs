fn main() {
    std::process::exit(scalegnn::cli::run(std::env::args_os()));
}
