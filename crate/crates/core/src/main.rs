fn main() {
    std::process::exit(isoscope::cli::run(std::env::args_os()));
}
