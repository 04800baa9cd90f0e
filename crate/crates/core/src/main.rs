fn main() {
    let stdin = std::io::stdin();
    let code = unsafe_props::cli::run(std::env::args_os(), stdin.lock(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
