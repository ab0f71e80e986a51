fn main() {
    std::process::exit(lednet_cli::run(std::env::args_os()));
}
