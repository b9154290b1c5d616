fn main() {
    std::process::exit(qlint::cli::run());
}
