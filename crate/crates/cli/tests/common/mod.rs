#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::process::{Command, Output};

use mcse_core::noise::standard_normal_pair;
use mcse_core::rng::SeedStreams;

pub fn mcse(out_dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mcse"))
        .arg("--out-dir")
        .arg(out_dir)
        .args(args)
        .env_remove("MCSE_OUT_DIR")
        .env_remove("RUST_LOG")
        .output()
        .expect("binary runs")
}

pub fn ok(out_dir: &Path, args: &[&str]) -> Output {
    let out = mcse(out_dir, args);
    assert!(
        out.status.success(),
        "mcse {args:?} failed with {:?}\n{}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Every file under `dir`, keyed by path relative to it.
pub fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                files.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    files
}

/// Pitch CSV with `n` fastballs per pitcher drawn around the zone centre,
/// plus a few sliders that the default filter drops.
pub fn pitch_csv(pitchers: &[(&str, [f64; 3])], n: usize, seed: u64) -> String {
    let mut rng = SeedStreams::new(seed).stream("pitch-csv");
    let mut s = String::from("game_date,pitcher,pitch_type,plate_x,plate_z\n");
    for (name, [sx, sz, rho]) in pitchers {
        for i in 0..n + 5 {
            let z = standard_normal_pair(&mut rng);
            let x = sx * z[0];
            let h = 2.5 + sz * (rho * z[0] + (1.0 - rho * rho).sqrt() * z[1]);
            let kind = if i < n { "FF" } else { "SL" };
            writeln!(s, "2023-04-01,{name},{kind},{x:.4},{h:.4}").unwrap();
        }
    }
    s
}
