fn main() {
    std::process::exit(wwbie_cli::main_with(std::env::args_os()));
}
