//! CSV rows, profile snapshots, metadata and plot scripts.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::solver::RadialProfile;

/// One CSV row; the field order is the column order.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Row {
    #[serde(rename = "N")]
    pub n: u32,
    pub s: f64,
    pub p: f64,
    pub omega: f64,
    pub eps: f64,
    pub theta: Option<f64>,
    pub tau: Option<f64>,
    pub mu: Option<f64>,
    pub feasible: bool,
    pub margin: Option<f64>,
    pub energy: Option<f64>,
    pub residual: Option<f64>,
    pub gamma_fit: Option<f64>,
    pub gamma_pred_lo: Option<f64>,
    pub gamma_pred_hi: Option<f64>,
    pub r_squared: Option<f64>,
    pub verdict: String,
    pub wall_seconds: f64,
    pub error_class: String,
}

pub const COLUMNS: &str =
    "N,s,p,omega,eps,theta,tau,mu,feasible,margin,energy,residual,gamma_fit,gamma_pred_lo,gamma_pred_hi,r_squared,verdict,wall_seconds,error_class";

pub fn write_csv(path: &Path, rows: &[Row]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::Error::Io(e.to_string()))?;
    for row in rows {
        w.serialize(row).map_err(|e| crate::Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Two columns `radius value`: grid nodes, then the tail closure sampled
/// out to `8·R_max`.
pub fn write_profile(path: &Path, profile: &RadialProfile) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# radius value")?;
    for (r, u) in profile.grid.nodes.iter().zip(&profile.values) {
        writeln!(f, "{r:.12e} {u:.12e}")?;
    }
    let r_max = profile.grid.r_max;
    for k in 1..=12 {
        let r = r_max * (0.25 * k as f64).exp2();
        writeln!(f, "{r:.12e} {:.12e}", profile.eval(r))?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| crate::Error::Io(e.to_string()))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// Gnuplot script drawing the profile with the fitted power law.
pub fn profile_plot_script(profile_file: &str, gamma: f64, anchor: (f64, f64)) -> String {
    let (r0, u0) = anchor;
    format!(
        "set terminal pngcairo size 900,600\n\
         set output 'profile.png'\n\
         set logscale xy\n\
         set xlabel 'r'\n\
         set ylabel 'u(r)'\n\
         set key top right\n\
         plot '{profile_file}' using 1:2 with lines lw 2 title 'u', \\\n     \
         {u0:e}*(x/{r0:e})**(-{gamma}) with lines dt 2 title 'r^{{-{gamma:.3}}}'\n"
    )
}

/// Gnuplot script drawing fitted against predicted exponents over `p`.
pub fn sweep_plot_script(csv_file: &str) -> String {
    format!(
        "set terminal pngcairo size 900,600\n\
         set output 'sweep.png'\n\
         set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'p'\n\
         set ylabel 'tail exponent'\n\
         plot '{csv_file}' using 3:13 with points pt 7 title 'fitted', \\\n     \
         '' using 3:14 with points pt 6 title 'predicted (lower)', \\\n     \
         '' using 3:15 with points pt 4 title 'predicted (upper)'\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_the_schema() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_csv(&path, &[Row::default()]).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().next().unwrap(), COLUMNS);
    }
}
