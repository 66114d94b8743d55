fn main() {
    std::process::exit(spsoft::cli::run(std::env::args_os()));
}
