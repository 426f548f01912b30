fn main() {
    if let Some(n) = std::env::var("NETCLEAR_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: could not cap threads: {e}");
        }
    }
    std::process::exit(netclear_cli::app::run_cli(std::env::args_os()));
}
