fn main() {
    std::process::exit(geoecs::cli::run(std::env::args_os()));
}
