fn main() {
    std::process::exit(bradyscore::cli::run());
}
