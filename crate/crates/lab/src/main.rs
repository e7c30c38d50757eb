fn main() {
    std::process::exit(bdre_lab::cli::run_cli(std::env::args_os()));
}
