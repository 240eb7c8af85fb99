fn main() {
    std::process::exit(flipblur_cli::run());
}
