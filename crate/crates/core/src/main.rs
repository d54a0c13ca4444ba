fn main() {
    std::process::exit(noisecal::cli::run(std::env::args_os()));
}
