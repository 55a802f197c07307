fn main() {
    std::process::exit(chisel::cli::main_with_args(std::env::args_os()));
}
