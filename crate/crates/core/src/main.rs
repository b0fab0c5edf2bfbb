fn main() {
    std::process::exit(dudley::cli::run(std::env::args_os()));
}
