fn main() { geodyn::cli::run(); }
