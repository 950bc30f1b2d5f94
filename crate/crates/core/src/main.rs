fn main() {
    std::process::exit(idsearch::cli::main());
}
