use clap::Parser;

fn main() {
    let args = pblap_core::cli::Args::parse();
    std::process::exit(pblap_core::cli::main_with(args));
}
