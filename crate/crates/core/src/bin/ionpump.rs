fn main() {
    std::process::exit(ionpump::cli::run(std::env::args_os()));
}
