//! Writes a synthetic two-layer gravity survey and a matching run config.
//!
//! cargo run --release -p layermc --example synthetic_gravity -- demo

use std::path::PathBuf;

use layermc::synthetic::Survey;

fn main() -> layermc::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "demo".into()));
    let path = Survey::default().write(&dir)?;
    println!("wrote {}", path.display());
    Ok(())
}
