fn main() {
    std::process::exit(okpz::cli::dispatch(std::env::args()));
}
