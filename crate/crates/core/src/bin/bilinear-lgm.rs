fn main() {
    std::process::exit(bilinear_lgm::cli::run(std::env::args_os()));
}
