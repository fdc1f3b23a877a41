fn main() {
    std::process::exit(acer_core::cli::run(std::env::args_os()));
}
