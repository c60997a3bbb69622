fn main() { std::process::exit(coolwalk::cli::run(std::env::args().skip(1).collect())); }
