//! CSV formatting and plot scripts.

use std::fs;
use std::io;
use std::path::Path;

use tipscan_core::bifurcation::Surface;
use tipscan_core::hullscan::HullReport;
use tipscan_core::ivp::Trajectory;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_text(path: &Path, text: &str) -> io::Result<()> {
    fs::write(path, text)
}

pub fn write_trace(path: &Path, tr: &Trajectory) -> io::Result<()> {
    let mut body = String::from("t,y\n");
    for (t, y) in tr.times.iter().zip(&tr.values) {
        body.push_str(&num(*t));
        body.push(',');
        body.push_str(&num(*y));
        body.push('\n');
    }
    write_text(path, &body)
}

pub fn surface_csv(s: &Surface) -> String {
    let mut body = String::from("axis1,axis2,lambda_star,verdict,bracket_width,iterations\n");
    for c in &s.cells {
        body.push_str(&format!(
            "{},{},{},{},{},{}\n",
            num(c.axis1),
            num(c.axis2),
            opt_num(c.lambda_star),
            c.verdict.map(|v| v.label()).unwrap_or("error"),
            opt_num(c.bracket_width),
            c.iterations
        ));
    }
    body
}

pub fn hull_csv(r: &HullReport) -> String {
    let mut body = String::from("s,d_inf,lambda_inf");
    if r.lambda_c.is_some() {
        body.push_str(",lambda_c");
    }
    body.push_str(",excluded\n");
    for (k, s) in r.s_grid.iter().enumerate() {
        body.push_str(&format!("{},{},{}", num(*s), num(r.d_inf[k]), opt_num(r.lambda_inf[k])));
        if let Some(lc) = &r.lambda_c {
            body.push(',');
            body.push_str(&opt_num(lc[k]));
        }
        body.push_str(if r.near_zero_cells.contains(&k) { ",1\n" } else { ",0\n" });
    }
    body
}

pub const CLASSIFY_GP: &str = "\
set datafile separator ','
set key autotitle columnhead
set xlabel 't'
set ylabel 'y'
plot 'attractor.csv' using 1:2 with lines title 'attractor', \\
     'repeller.csv' using 1:2 with lines title 'repeller'
";

pub const SURFACE_GP: &str = "\
set datafile separator ','
set xlabel 'c'
set ylabel 'second axis'
set zlabel 'lambda*'
set dgrid3d
set hidden3d
splot 'surface.csv' every ::1 using 1:2:3 with lines title 'lambda*'
";

pub const HULL_GP: &str = "\
set datafile separator ','
set xlabel 's'
set xzeroaxis
plot 'hull.csv' every ::1 using 1:2 with lines title 'd_inf', \\
     'hull.csv' every ::1 using 1:3 with lines title 'lambda_inf'
";
