fn main() {
    std::process::exit(levy_spde::cli::main_entry(std::env::args_os()));
}
