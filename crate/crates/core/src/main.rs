fn main() {
    std::process::exit(dctk::cli::run_command(std::env::args_os()));
}
