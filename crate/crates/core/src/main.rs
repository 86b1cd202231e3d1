use clap::Parser;

fn main() {
    let cli = ergomix::cli::Cli::parse();
    std::process::exit(ergomix::cli::main_with(cli));
}
