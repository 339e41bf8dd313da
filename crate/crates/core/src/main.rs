use clap::Parser;

use thermograph::cli::{configure_threads, run, RunConfig};

fn main() {
    let cfg = RunConfig::parse();
    configure_threads();
    std::process::exit(run(&cfg));
}
