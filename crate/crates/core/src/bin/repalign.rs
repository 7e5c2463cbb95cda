fn main() {
    std::process::exit(repalign::cli::run(std::env::args_os()));
}
