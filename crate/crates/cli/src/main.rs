fn main() {
    std::process::exit(stifprep_cli::run(std::env::args_os()));
}
