fn main() {
    std::process::exit(sharecut::cli::main_with(std::env::args_os()));
}
