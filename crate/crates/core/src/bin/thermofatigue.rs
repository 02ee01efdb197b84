fn main() {
    std::process::exit(thermofatigue::cli::run(std::env::args_os()));
}
