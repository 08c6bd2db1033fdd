fn main() {
    std::process::exit(udfgrid::cli::run(std::env::args_os()));
}
