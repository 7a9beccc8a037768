use std::process::ExitCode;

use anyhow::Context;

fn main() -> ExitCode {
    let inv = match spinprice_cli::parse_cli(std::env::args_os()) {
        Ok(inv) => inv,
        Err(e) => e.exit(),
    };
    match execute(&inv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn execute(inv: &spinprice_cli::Invocation) -> anyhow::Result<()> {
    eprintln!(
        "{:?}: N={} d={} sweeps={} replicas={} seed={}",
        inv.experiment,
        inv.config.n_nodes,
        inv.config.effective_dimension(),
        inv.config.sweeps,
        inv.config.replicas,
        inv.config.seed
    );
    let records = spinprice_cli::run(inv).context("experiment failed")?;
    let paths = spinprice_cli::write_records(&records, &inv.output)?;
    for p in paths {
        println!("{}", p.display());
    }
    Ok(())
}
