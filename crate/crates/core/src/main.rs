fn main() {
    std::process::exit(subelliptic::cli::run(std::env::args_os()));
}
