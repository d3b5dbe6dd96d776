use clap::Parser;

fn main() {
    let cli = qsim_lab::Cli::parse();
    if let Err(f) = qsim_lab::execute(cli) {
        eprintln!("error: {}", f.message());
        std::process::exit(f.code());
    }
}
