use clap::Parser;
use torus_phase::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
