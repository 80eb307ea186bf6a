fn main() {
    std::process::exit(dwellcert::cli::run(std::env::args_os()));
}
