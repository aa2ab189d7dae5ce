fn main() {
    std::process::exit(gp_hierarchy::cli::main_from_args(std::env::args_os()));
}
