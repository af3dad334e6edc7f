fn main() {
    std::process::exit(spincat::cli::run(std::env::args_os()));
}
