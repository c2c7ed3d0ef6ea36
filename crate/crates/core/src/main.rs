fn main() {
    std::process::exit(ionscatter::cli::run(std::env::args_os()));
}
