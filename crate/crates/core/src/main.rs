fn main() {
    std::process::exit(perturbkit::cli::run(std::env::args_os()));
}
