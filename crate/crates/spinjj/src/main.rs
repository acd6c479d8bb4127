fn main() {
    std::process::exit(spinjj::cli::main_entry());
}
