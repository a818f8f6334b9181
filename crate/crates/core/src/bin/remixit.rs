fn main() {
    std::process::exit(remixit::cli::run(std::env::args_os()));
}
