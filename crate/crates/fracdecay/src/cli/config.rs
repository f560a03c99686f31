//! Experiment configuration: TOML with sections `[params]`, `[potential]`,
//! `[solver]`, `[sweep]`, `[output]` and a top-level `seed`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::{self, Q};
use crate::model::{Potential, ProblemParams};
use crate::solver::SolverSettings;

/// A number given either as a TOML float/integer or as a string such as
/// `"2/5"`; keeps the exact rational alongside the float.
#[derive(Debug, Clone, PartialEq)]
pub struct Exact {
    pub value: f64,
    pub rational: Q,
}

impl Exact {
    pub fn from_f64(x: f64) -> Exact {
        Exact {
            value: x,
            rational: exponents::rational(x),
        }
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.rational)
    }
}

impl Serialize for Exact {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        if *self.rational.denom() == 1.into() || exponents::rational(self.value) == self.rational {
            ser.serialize_f64(self.value)
        } else {
            ser.serialize_str(&self.rational.to_string())
        }
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Float(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Int(i) => Ok(Exact::from_f64(i as f64)),
            Raw::Float(x) if x.is_finite() => Ok(Exact::from_f64(x)),
            Raw::Float(x) => Err(serde::de::Error::custom(format!("non-finite number {x}"))),
            Raw::Text(t) => {
                let rational = exponents::parse_rational(&t).map_err(serde::de::Error::custom)?;
                Ok(Exact {
                    value: exponents::to_f64(&rational),
                    rational,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParamsConfig {
    #[serde(rename = "N")]
    pub n: u32,
    pub s: Exact,
    pub p: Exact,
    /// Fixed `ε`; when absent `solve` bisects over `eps_range`.
    pub eps: Option<f64>,
    pub eps_range: [f64; 2],
}

impl Default for ParamsConfig {
    fn default() -> Self {
        ParamsConfig {
            n: 1,
            s: Exact::from_f64(0.4),
            p: Exact::from_f64(3.0),
            eps: None,
            eps_range: [0.002, 0.5],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKindConfig {
    Power,
    Log,
    Compact,
    Tabulated,
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialKindConfig,
    pub omega: Exact,
    pub delta: f64,
    pub well_radius: f64,
    /// Support radius of the `compact` kind.
    pub r_cut: f64,
    /// Value of the `constant` kind.
    pub value: f64,
    /// Two-column (radius, value) file for the `tabulated` kind.
    pub table: Option<PathBuf>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig {
            kind: PotentialKindConfig::Power,
            omega: Exact::from_f64(0.0),
            delta: 0.25,
            well_radius: 1.0,
            r_cut: 2.0,
            value: 1.0,
            table: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub q: f64,
    pub r_max: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub refit_every: usize,
    pub self_test: bool,
    pub bisection_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverSettings::default();
        SolverConfig {
            m: d.m,
            q: d.q,
            r_max: d.r_max,
            tol: d.tol,
            max_iter: d.max_iter,
            refit_every: d.refit_every,
            self_test: d.self_test,
            bisection_steps: d.bisection_steps,
        }
    }
}

/// Either an explicit list or `{ from, to, count, log }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values {
    List(Vec<f64>),
    Range {
        from: f64,
        to: f64,
        count: usize,
        #[serde(default)]
        log: bool,
    },
}

impl Values {
    pub fn expand(&self) -> Result<Vec<f64>> {
        let v = match self {
            Values::List(v) => v.clone(),
            Values::Range { from, to, count, log } => {
                if *count == 0 || (*log && !(*from > 0.0 && *to > 0.0)) {
                    return Err(Error::Config(format!("bad range {self:?}")));
                }
                (0..*count)
                    .map(|k| {
                        let t = if *count == 1 { 0.0 } else { k as f64 / (*count - 1) as f64 };
                        if *log {
                            (from.ln() + t * (to.ln() - from.ln())).exp()
                        } else {
                            from + t * (to - from)
                        }
                    })
                    .collect()
            }
        };
        if v.is_empty() {
            return Err(Error::Config("empty sweep list".into()));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub p: Option<Values>,
    pub omega: Option<Values>,
    pub eps: Option<Values>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: bool,
    pub plot: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("out"),
            csv: true,
            plot: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub params: ParamsConfig,
    pub potential: PotentialConfig,
    pub solver: SolverConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 7,
            params: ParamsConfig::default(),
            potential: PotentialConfig::default(),
            solver: SolverConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Documented keys: `(key, default, meaning)`.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "7", "seed for randomized directions (selftest)"),
    ("params.N", "1", "space dimension"),
    ("params.s", "0.4", "fractional order in (0, 1); number or \"a/b\""),
    ("params.p", "3", "exponent in (2, 2N/(N-2s)); number or \"a/b\""),
    ("params.eps", "unset", "fixed eps; unset means bisection over eps_range"),
    ("params.eps_range", "[0.002, 0.5]", "eps bracket for the de-penalization bisection"),
    ("potential.kind", "\"power\"", "power | log | compact | tabulated | constant"),
    ("potential.omega", "0", "decay rate of V (power, tabulated)"),
    ("potential.delta", "0.25", "well depth, V = (1 + delta min((r/R)^2, 1)) (1 + r^2)^(-omega/2)"),
    ("potential.well_radius", "1", "radius R of the well"),
    ("potential.r_cut", "2", "support radius (compact)"),
    ("potential.value", "1", "value (constant)"),
    ("potential.table", "unset", "two-column radius/value file (tabulated)"),
    ("solver.M", "512", "number of grid intervals"),
    ("solver.q", "3", "grid grading exponent"),
    ("solver.r_max", "1000", "truncation radius"),
    ("solver.tol", "1e-6", "residual tolerance relative to sup u"),
    ("solver.max_iter", "2000", "iteration cap"),
    ("solver.refit_every", "25", "tail exponent re-fit period"),
    ("solver.self_test", "true", "check the assembled operator on a power weight"),
    ("solver.bisection_steps", "5", "eps bisection steps"),
    ("sweep.p", "[params.p]", "list, or { from, to, count, log }"),
    ("sweep.omega", "[potential.omega]", "list, or { from, to, count, log }"),
    ("sweep.eps", "[params.eps or 0.01]", "list, or { from, to, count, log }"),
    ("output.dir", "\"out\"", "output directory"),
    ("output.csv", "true", "write CSV rows"),
    ("output.plot", "false", "write a gnuplot script next to the data"),
];

/// The key reference as printed by `--keys`.
pub fn key_reference() -> String {
    let width = KEYS.iter().map(|k| k.0.len()).max().unwrap_or(0);
    let mut out = String::from("# key reference (TOML; sections are the part before the dot)\n");
    for (key, default, meaning) in KEYS {
        out.push_str(&format!("{key:<width$}  default {default:<22} {meaning}\n"));
    }
    out
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(t) = &cfg.potential.table {
            if t.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                cfg.potential.table = Some(base.join(t));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let s = &self.solver;
        if !(s.tol > 0.0) {
            return bad(format!("solver.tol must be positive, got {}", s.tol));
        }
        if s.max_iter == 0 || s.refit_every == 0 {
            return bad("solver.max_iter and solver.refit_every must be positive".into());
        }
        let [lo, hi] = self.params.eps_range;
        if !(lo > 0.0 && lo <= hi) {
            return bad(format!("params.eps_range must satisfy 0 < lo <= hi, got [{lo}, {hi}]"));
        }
        if let Some(e) = self.params.eps {
            if !(e > 0.0) {
                return bad(format!("params.eps must be positive, got {e}"));
            }
        }
        let pot = &self.potential;
        if !(pot.well_radius > 0.0) {
            return bad("potential.well_radius must be positive".into());
        }
        match pot.kind {
            PotentialKindConfig::Tabulated => match &pot.table {
                Some(t) if t.exists() => {}
                Some(t) => return bad(format!("potential.table {} does not exist", t.display())),
                None => return bad("potential.kind = \"tabulated\" needs potential.table".into()),
            },
            PotentialKindConfig::Compact if !(pot.r_cut > 0.0) => {
                return bad("potential.r_cut must be positive".into());
            }
            _ => {}
        }
        for (name, v) in [("p", &self.sweep.p), ("omega", &self.sweep.omega), ("eps", &self.sweep.eps)] {
            if let Some(v) = v {
                v.expand().map_err(|e| Error::Config(format!("sweep.{name}: {e}")))?;
            }
        }
        Ok(())
    }

    /// Problem parameters; `eps` is the fixed value or the top of the range.
    pub fn problem(&self) -> ProblemParams {
        let eps = self.params.eps.unwrap_or(self.params.eps_range[1]);
        ProblemParams::new(self.params.n, self.params.s.value, self.params.p.value, eps)
    }

    pub fn settings(&self) -> SolverSettings {
        let c = &self.solver;
        let [lo, hi] = match self.params.eps {
            Some(e) => [e, e],
            None => self.params.eps_range,
        };
        SolverSettings {
            m: c.m,
            q: c.q,
            r_max: c.r_max,
            tol: c.tol,
            max_iter: c.max_iter,
            refit_every: c.refit_every,
            self_test: c.self_test,
            eps_min: lo,
            eps_max: hi,
            bisection_steps: c.bisection_steps,
        }
    }

    /// The configured potential with decay rate `omega`.
    pub fn potential_with(&self, omega: f64) -> Result<Potential> {
        let c = &self.potential;
        Ok(match c.kind {
            PotentialKindConfig::Power => Potential::power_decay(omega, c.delta, c.well_radius),
            PotentialKindConfig::Log => Potential::log_decay(c.delta, c.well_radius),
            PotentialKindConfig::Compact => Potential::compact_support(c.delta, c.well_radius, c.r_cut),
            PotentialKindConfig::Constant => Potential::constant(c.value),
            PotentialKindConfig::Tabulated => {
                let path = c.table.as_ref().ok_or_else(|| Error::Config("missing potential.table".into()))?;
                let (radii, values) = read_table(path)?;
                Potential::tabulated(radii, values, omega, c.well_radius)
            }
        })
    }

    pub fn potential(&self) -> Result<Potential> {
        self.potential_with(self.potential.omega.value)
    }
}

/// Two whitespace-separated columns; `#` starts a comment.
pub fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let (mut radii, mut values) = (Vec::new(), Vec::new());
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<f64> = line
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), k + 1)))?;
        if cols.len() != 2 {
            return Err(Error::Config(format!("{}:{}: expected two columns", path.display(), k + 1)));
        }
        radii.push(cols[0]);
        values.push(cols[1]);
    }
    if radii.len() < 2 || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config(format!(
            "{}: need at least two rows with strictly increasing radii",
            path.display()
        )));
    }
    Ok((radii, values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_cover_the_reference() {
        let text = toml::to_string(&ExperimentConfig::default()).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, ExperimentConfig::default());
        for (key, _, _) in KEYS {
            let leaf = key.rsplit('.').next().unwrap();
            let optional = matches!(*key, "params.eps" | "potential.table" | "sweep.p" | "sweep.omega" | "sweep.eps");
            assert!(optional || text.contains(&format!("{leaf} =")), "{key} missing from\n{text}");
        }
    }

    #[test]
    fn rationals_and_ranges_parse() {
        let cfg: ExperimentConfig = toml::from_str(
            "[params]\nN = 3\ns = \"1/2\"\np = 2.75\n[sweep]\np = [2.5, 2.75]\neps = { from = 0.01, to = 0.1, count = 3, log = true }\n",
        )
        .unwrap();
        assert_eq!(cfg.params.s.rational.to_string(), "1/2");
        assert_eq!(cfg.params.p.rational.to_string(), "11/4");
        let e = cfg.sweep.eps.unwrap().expand().unwrap();
        assert!((e[1] - 0.001f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(toml::from_str::<ExperimentConfig>("[params]\nn = 3\n").is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.solver.tol = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::default();
        cfg.potential.kind = PotentialKindConfig::Tabulated;
        cfg.potential.table = Some(PathBuf::from("/nonexistent/table.txt"));
        assert!(cfg.validate().is_err());
    }
}
