fn main() {
    std::process::exit(taap::cli::run(std::env::args_os()));
}
