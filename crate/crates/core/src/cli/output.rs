//! Result files: JSON records, CSV sweep tables, gnuplot scripts and binary
//! spinor snapshots. Every file is written to a temporary name and renamed.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::Result;
use crate::grid::SpinorField;
use crate::sweep::{Detection, SweepRecord};

pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// `dir/command` or, when a record of that name exists, the first free
/// `dir/command-2`, `dir/command-3`, … Earlier records are never replaced.
pub fn unique_stem(dir: &Path, command: &str) -> PathBuf {
    let free = |stem: &PathBuf| !stem.with_extension("json").exists();
    let first = dir.join(command);
    if free(&first) {
        return first;
    }
    (2..)
        .map(|i| dir.join(format!("{command}-{i}")))
        .find(free)
        .expect("unbounded search")
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

/// Header `t,lambda_min,next_gap,bs_top_1..k,nullity,localization`.
pub fn sweep_csv(records: &[SweepRecord], k: usize) -> String {
    let mut out = String::from("t,lambda_min,next_gap");
    for i in 1..=k {
        write!(out, ",bs_top_{i}").unwrap();
    }
    out.push_str(",nullity,localization\n");
    for r in records {
        write!(out, "{:e},{},{}", r.t, cell(r.lambda_min), cell(r.next_gap)).unwrap();
        for i in 0..k {
            write!(out, ",{}", cell(r.bs_top.get(i).copied())).unwrap();
        }
        let nullity = r.nullity.map(|n| n.to_string()).unwrap_or_default();
        writeln!(out, ",{nullity},{}", cell(r.localization)).unwrap();
    }
    out
}

/// Two panels over `t`: `λ_min` on a log scale and the top Birman–Schwinger
/// eigenvalues, with detected couplings marked.
pub fn gnuplot_script(csv_name: &str, image_name: &str, k: usize, detections: &[Detection]) -> String {
    let mut s = String::new();
    writeln!(s, "set datafile separator ','").unwrap();
    writeln!(s, "set terminal pngcairo size 900,900").unwrap();
    writeln!(s, "set output '{image_name}'").unwrap();
    writeln!(s, "set multiplot layout 2,1").unwrap();
    writeln!(s, "set xlabel 't'").unwrap();
    for d in detections {
        writeln!(s, "set arrow from {:e}, graph 0 to {:e}, graph 1 nohead dashtype 2", d.t_star, d.t_star).unwrap();
    }
    writeln!(s, "set logscale y").unwrap();
    writeln!(s, "set ylabel 'lambda_min'").unwrap();
    writeln!(s, "plot '{csv_name}' using 1:2 skip 1 with linespoints title 'lambda_min'").unwrap();
    writeln!(s, "unset logscale y").unwrap();
    writeln!(s, "set ylabel 'mu'").unwrap();
    let curves: Vec<String> = (0..k)
        .map(|i| format!("'{csv_name}' using 1:{} skip 1 with linespoints title 'bs_top_{}'", 4 + i, i + 1))
        .collect();
    writeln!(s, "plot {}, 1 with lines dashtype 3 title ''", curves.join(", ")).unwrap();
    writeln!(s, "unset multiplot").unwrap();
    s
}

/// Little-endian: `N` as u64, `L` as f64, then the two components as
/// interleaved (re, im) f64 pairs, x-fastest.
pub fn spinor_bytes(psi: &SpinorField) -> Vec<u8> {
    let grid = psi.grid();
    let mut out = Vec::with_capacity(16 + 16 * psi.as_slice().len());
    out.extend_from_slice(&(grid.points_per_axis() as u64).to_le_bytes());
    out.extend_from_slice(&grid.half_width().to_le_bytes());
    for v in psi.as_slice() {
        out.extend_from_slice(&v.re.to_le_bytes());
        out.extend_from_slice(&v.im.to_le_bytes());
    }
    out
}
