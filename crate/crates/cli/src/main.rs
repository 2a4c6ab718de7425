use clap::Parser;

use pointerlab_cli::{execute, Cli, Command};

fn main() {
    let cli = Cli::parse();
    let Command::Run(args) = cli.command;
    let result = args.resolve().and_then(|cfg| {
        let manifest = execute(&cfg)?;
        println!("{} -> {}", manifest.experiment, cfg.out.display());
        for c in &manifest.criteria {
            println!("  {} {}: {} ({})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.value, c.threshold);
        }
        Ok(())
    });
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
