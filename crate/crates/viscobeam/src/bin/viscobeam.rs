fn main() { viscobeam::cli::run(); }
