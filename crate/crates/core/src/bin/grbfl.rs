fn main() {
    std::process::exit(grbfl::cli::run(std::env::args_os()));
}
