fn main() {
    std::process::exit(tod_emotion::cli::run(std::env::args_os()));
}
