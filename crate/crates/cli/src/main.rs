fn main() {
    std::process::exit(pcas_cli::main_with(std::env::args_os()));
}
