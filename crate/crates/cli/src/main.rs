use clap::Parser;
use torusflow_cli::{execute, split_dotted, Cli};

fn main() {
    let (args, dotted) = split_dotted(std::env::args_os());
    let cli = Cli::parse_from(args);
    let env: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with(torusflow_cli::config::ENV_PREFIX)).collect();
    let code = match execute(cli, &dotted, env) {
        Ok((outcome, line)) => {
            println!("{line}");
            if let Some(m) = outcome.message {
                eprintln!("torusflow: {m}");
            }
            outcome.exit_code
        }
        Err(e) => {
            eprintln!("torusflow: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
