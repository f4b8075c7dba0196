fn main() {
    std::process::exit(geoprior::cli::run(std::env::args_os()));
}
