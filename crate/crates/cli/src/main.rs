fn main() {
    std::process::exit(tessera_cli::run(std::env::args_os()));
}
