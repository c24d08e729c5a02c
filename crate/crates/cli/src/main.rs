fn main() {
    std::process::exit(lexphase_cli::run_from_args(std::env::args_os()));
}
