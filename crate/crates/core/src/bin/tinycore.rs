fn main() {
    std::process::exit(tinycore::cli::run(std::env::args_os()));
}
