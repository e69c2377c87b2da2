fn main() {
    std::process::exit(spcavrp::cli::main_with_args(std::env::args_os()));
}
