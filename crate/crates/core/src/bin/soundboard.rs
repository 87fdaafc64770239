fn main() {
    std::process::exit(soundboard::cli::cli_main(std::env::args_os()));
}
