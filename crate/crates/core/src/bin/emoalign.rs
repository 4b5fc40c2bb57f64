fn main() {
    std::process::exit(emoalign::cli::run(std::env::args_os()));
}
