fn main() {
    std::process::exit(ginibre_overlap::cli::main());
}
