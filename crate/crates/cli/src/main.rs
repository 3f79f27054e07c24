fn main() {
    std::process::exit(sparsescene_cli::run(std::env::args_os()));
}
