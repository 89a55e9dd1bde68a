use clap::Parser;

use hwpareto::cli::{run, Cli};
use hwpareto::exit;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli, argv) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
