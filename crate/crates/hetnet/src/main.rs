fn main() {
    std::process::exit(mec_hetnet::cli::run_from_args(std::env::args_os()));
}
