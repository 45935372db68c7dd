// NaN-rejecting `!(a > b)` checks are intentional.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod config;
mod experiments;
mod output;
mod svg;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = config::Args::parse();
    let result = config::RunConfig::resolve(args).and_then(|cfg| experiments::run(&cfg));
    match result {
        Ok(out) => {
            for path in out.written() {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(err) => {
            let chain: Vec<String> = err.chain().map(|e| e.to_string()).collect();
            let doc = serde_json::json!({ "error": err.to_string(), "causes": chain });
            eprintln!("{doc}");
            ExitCode::FAILURE
        }
    }
}
