use clap::Parser;

use brillouin_qc::cli::{run, Args};

fn main() {
    std::process::exit(run(Args::parse()));
}
