fn main() {
    std::process::exit(gutp::cli::dispatch(std::env::args_os()));
}
