//! Runs a shipped config at a shortened horizon and prints the final means.
//!
//! `cargo run --release --example run_config -- examples/configs/two_process_n16_b8.toml 2000`

use std::path::{Path, PathBuf};

use rmab::harness::{run, RunConfig};

fn main() -> rmab::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = PathBuf::from(
        args.next()
            .unwrap_or_else(|| "examples/configs/two_process_n16_b8.toml".into()),
    );
    let horizon: u64 = args
        .next()
        .map_or(2000, |h| h.parse().expect("horizon must be an integer"));
    let mut cfg = RunConfig::load(&path)?;
    cfg.horizon = horizon;
    cfg.seeds.truncate(3);
    let out = std::env::temp_dir().join("rmab_run_config");
    let summary = run(&cfg, path.parent().unwrap_or(Path::new(".")), &out)?;
    println!("config hash {}", cfg.hash());
    for (alg, finals) in &summary.finals {
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!("{:>16}: {mean:.3}", alg.to_string());
    }
    println!("{} files in {}", summary.files.len(), out.display());
    Ok(())
}
