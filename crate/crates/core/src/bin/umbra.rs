use clap::Parser;

fn main() {
    let cli = umbra_core::cli::Cli::parse();
    if let Err(err) = umbra_core::cli::run(cli) {
        let payload = serde_json::json!({
            "error": { "kind": err.kind(), "message": err.to_string() }
        });
        eprintln!("{payload}");
        std::process::exit(1);
    }
}
