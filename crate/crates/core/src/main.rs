fn main() {
    std::process::exit(nqdreg::cli::run(std::env::args_os()));
}
