fn main() {
    std::process::exit(damq::cli::main());
}
