fn main() {
    std::process::exit(qgauss::cli::run(std::env::args_os()));
}
