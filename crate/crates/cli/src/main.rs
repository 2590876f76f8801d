use clap::Parser;
use salkit_cli::{init_threads, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = init_threads().and_then(|()| run(cli)) {
        eprintln!("salkit: {e}");
        std::process::exit(e.exit_code());
    }
}
