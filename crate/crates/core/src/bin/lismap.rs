fn main() {
    std::process::exit(lismap::cli::run(std::env::args_os()));
}
