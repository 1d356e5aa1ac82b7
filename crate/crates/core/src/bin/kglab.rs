fn main() {
    std::process::exit(kglab::cli::run_command(std::env::args_os()));
}
