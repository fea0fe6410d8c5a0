fn main() {
    std::process::exit(minsurf::interface::cli::run_command(std::env::args_os()));
}
