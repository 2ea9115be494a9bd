use clap::Parser;

fn main() {
    let args = mrhs_cli::Args::parse();
    let code = mrhs_cli::run(&args, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
