fn main() {
    std::process::exit(evontology::cli::run(std::env::args_os()));
}
