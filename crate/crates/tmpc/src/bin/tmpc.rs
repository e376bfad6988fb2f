fn main() {
    std::process::exit(tmpc::cli::run());
}
