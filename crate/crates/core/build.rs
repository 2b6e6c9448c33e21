// Precomputes the default 256-entry inverse square root table.

use std::env;
use std::fs;
use std::path::Path;

fn main() {
    const BITS: u32 = 8;
    const FRAC: u32 = 30;
    let n = 1u32 << BITS;
    let entries: Vec<String> = (0..n)
        .map(|i| {
            // right edge of bucket i over m in [1, 2)
            let m = 1.0 + (i + 1) as f64 / n as f64;
            let v = (2f64.powi(FRAC as i32) / m.sqrt()).round_ties_even() as u32;
            v.to_string()
        })
        .collect();
    let src = format!(
        "pub(crate) const DEFAULT_LUT_BITS: u32 = {BITS};\npub(crate) const DEFAULT_LUT: [u32; {n}] = [{}];\n",
        entries.join(", ")
    );
    let out = Path::new(&env::var("OUT_DIR").unwrap()).join("isrn_lut.rs");
    fs::write(out, src).unwrap();
    println!("cargo:rerun-if-changed=build.rs");
}
