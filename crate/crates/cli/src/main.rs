fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    let args: Vec<String> = std::env::args().collect();
    let code = regionseq_cli::run(args, &mut std::io::stdout().lock());
    std::process::exit(code);
}
