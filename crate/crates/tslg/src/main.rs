fn main() {
    std::process::exit(tslg::cli::main());
}
