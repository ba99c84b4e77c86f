use clap::Parser;
use plsa_vw::cli::{run, Cli};

fn main() -> anyhow::Result<()> {
    run(Cli::parse())
}
