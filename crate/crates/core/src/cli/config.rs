//! `key = value` run configuration.
//!
//! ```text
//! # comments start with '#'
//! mode    = compare            # analytic | oracle-direct | oracle-vectorized | compare | limit-cycle
//! omega   = 1
//! mu      = 0.3
//! nu      = 0.1
//! force   = harmonic           # zero | harmonic | sampled-file
//! f0      = 0.2
//! Omega   = 0.9
//! initial = coherent(0.5+0.1i) # vacuum | coherent(z) | thermal(u) | thermal-coherent(z, u) | fock(n)
//! N       = 40
//! t_max   = 10
//! n_steps = 200
//! ```

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::Tolerances;
use crate::lindblad::{ForceSpec, OscillatorParams, SampledForce};
use crate::ode::StepControl;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Analytic,
    OracleDirect,
    OracleVectorized,
    Compare,
    LimitCycle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Direct,
    Vectorized,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialState {
    Vacuum,
    Coherent(C64),
    Thermal(f64),
    ThermalCoherent(C64, f64),
    Fock(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub params: OscillatorParams,
    pub initial: InitialState,
    pub dim: usize,
    pub t_max: f64,
    pub n_steps: usize,
    /// Oracle used by `compare` and `limit-cycle`; direct when unset.
    pub oracle: Option<OracleKind>,
    pub control: StepControl,
    pub tolerances: Tolerances,
    pub compare_tol: f64,
    pub limit_cycle_tol: f64,
    pub output: Option<PathBuf>,
}

const KNOWN_KEYS: &[&str] = &[
    "mode",
    "omega",
    "mu",
    "nu",
    "force",
    "f0",
    "Omega",
    "force_file",
    "initial",
    "N",
    "t_max",
    "n_steps",
    "oracle",
    "rtol",
    "atol",
    "herm_tol",
    "trace_tol",
    "pos_tol",
    "tail_tol",
    "compare_tol",
    "limit_cycle_tol",
    "output",
];

fn config_err(line: Option<usize>, message: impl Into<String>) -> Error {
    Error::Config { line, message: message.into() }
}

struct Entries {
    map: HashMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(Some(line_no), format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(config_err(Some(line_no), format!("unknown key `{key}`")));
            }
            if value.is_empty() {
                return Err(config_err(Some(line_no), format!("empty value for `{key}`")));
            }
            if let Some((first, _)) = map.get(key) {
                return Err(config_err(
                    Some(line_no),
                    format!("duplicate key `{key}` (first set at line {first})"),
                ));
            }
            map.insert(key.to_string(), (line_no, value.to_string()));
        }
        Ok(Self { map })
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.map.get(key).map(|(l, _)| *l)
    }

    fn optional(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn required(&self, key: &str) -> Result<(usize, &str)> {
        self.optional(key).ok_or_else(|| config_err(None, format!("missing required key `{key}`")))
    }

    fn real(&self, key: &str) -> Result<f64> {
        let (line, v) = self.required(key)?;
        parse_real(v).map_err(|m| config_err(Some(line), format!("`{key}`: {m}")))
    }

    fn real_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.optional(key) {
            None => Ok(default),
            Some((line, v)) => parse_real(v).map_err(|m| config_err(Some(line), format!("`{key}`: {m}"))),
        }
    }

    fn count(&self, key: &str) -> Result<(usize, usize)> {
        let (line, v) = self.required(key)?;
        let n = v
            .parse::<usize>()
            .map_err(|_| config_err(Some(line), format!("`{key}`: expected a non-negative integer, got `{v}`")))?;
        Ok((line, n))
    }
}

fn parse_real(s: &str) -> std::result::Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("expected a finite number, got `{s}`")),
    }
}

/// Parses `1.5`, `-0.2i`, `0.3+0.4i`, `1e-3-2e-2i`.
pub fn parse_complex(s: &str) -> std::result::Result<C64, String> {
    let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    let bad = || format!("expected a complex number like `0.5+0.2i`, got `{s}`");
    let Some(body) = compact.strip_suffix('i') else {
        return parse_real(&compact).map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(k) => (&body[..k], &body[k..]),
        None => ("0", body),
    };
    let im = match im {
        "" | "+" => "1",
        "-" => "-1",
        other => other,
    };
    let re = parse_real(re).map_err(|_| bad())?;
    let im = parse_real(im.strip_prefix('+').unwrap_or(im)).map_err(|_| bad())?;
    Ok(C64::new(re, im))
}

fn call_args<'a>(value: &'a str, name: &str) -> Option<Vec<&'a str>> {
    let inner = value.strip_prefix(name)?.trim_start().strip_prefix('(')?.strip_suffix(')')?;
    Some(inner.split(',').map(str::trim).collect())
}

pub fn parse_initial(value: &str) -> std::result::Result<InitialState, String> {
    let v = value.trim();
    if v == "vacuum" {
        return Ok(InitialState::Vacuum);
    }
    // longest name first so `thermal` does not shadow `thermal-coherent`
    if let Some(args) = call_args(v, "thermal-coherent") {
        if let [z, u] = args.as_slice() {
            return Ok(InitialState::ThermalCoherent(parse_complex(z)?, parse_real(u)?));
        }
        return Err(format!("thermal-coherent takes two arguments, got `{v}`"));
    }
    if let Some(args) = call_args(v, "coherent") {
        if let [z] = args.as_slice() {
            return Ok(InitialState::Coherent(parse_complex(z)?));
        }
    }
    if let Some(args) = call_args(v, "thermal") {
        if let [u] = args.as_slice() {
            return Ok(InitialState::Thermal(parse_real(u)?));
        }
    }
    if let Some(args) = call_args(v, "fock") {
        if let [n] = args.as_slice() {
            return n.parse().map(InitialState::Fock).map_err(|_| format!("fock level must be an integer, got `{n}`"));
        }
    }
    Err(format!(
        "unknown initial state `{v}` (expected vacuum, coherent(z), thermal(u), thermal-coherent(z, u) or fock(n))"
    ))
}

/// Reads a two-column `t,f` CSV; a non-numeric first line is taken as a header.
pub fn load_sampled_force(path: &Path) -> std::result::Result<SampledForce, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match cols.as_slice() {
            [t, f] => t.parse::<f64>().ok().zip(f.parse::<f64>().ok()),
            _ => None,
        };
        match parsed {
            Some((t, f)) => {
                times.push(t);
                values.push(f);
            }
            None if idx == 0 => continue,
            None => return Err(format!("{}:{}: expected `t,f`, got `{line}`", path.display(), idx + 1)),
        }
    }
    SampledForce::new(times, values).map_err(|e| format!("{}: {e}", path.display()))
}

fn parse_force(entries: &Entries, base_dir: &Path) -> Result<ForceSpec> {
    let (line, kind) = entries.required("force")?;
    let force = match kind {
        "zero" => ForceSpec::Zero,
        "harmonic" => ForceSpec::Harmonic { f0: entries.real("f0")?, omega_drive: entries.real("Omega")? },
        "sampled-file" => {
            let (file_line, file) = entries.required("force_file")?;
            let path = base_dir.join(file);
            ForceSpec::Sampled(load_sampled_force(&path).map_err(|m| config_err(Some(file_line), m))?)
        }
        other => {
            return Err(config_err(
                Some(line),
                format!("unknown force `{other}` (expected zero, harmonic or sampled-file)"),
            ))
        }
    };
    for key in ["f0", "Omega"] {
        if kind != "harmonic" {
            if let Some(l) = entries.line(key) {
                return Err(config_err(Some(l), format!("`{key}` only applies to force = harmonic")));
            }
        }
    }
    if kind != "sampled-file" {
        if let Some(l) = entries.line("force_file") {
            return Err(config_err(Some(l), "`force_file` only applies to force = sampled-file"));
        }
    }
    Ok(force)
}

/// Parses and validates a configuration. Relative paths resolve against
/// `base_dir`.
pub fn parse_config(text: &str, base_dir: &Path) -> Result<RunConfig> {
    let entries = Entries::parse(text)?;

    let (mode_line, mode) = entries.required("mode")?;
    let mode = match mode {
        "analytic" => Mode::Analytic,
        "oracle-direct" => Mode::OracleDirect,
        "oracle-vectorized" => Mode::OracleVectorized,
        "compare" => Mode::Compare,
        "limit-cycle" => Mode::LimitCycle,
        other => return Err(config_err(Some(mode_line), format!("unknown mode `{other}`"))),
    };

    let omega = entries.real("omega")?;
    let mu = entries.real("mu")?;
    let nu = entries.real("nu")?;
    let force = parse_force(&entries, base_dir)?;
    let params = OscillatorParams::new(omega, mu, nu, force).map_err(|e| {
        let line = entries.line("nu").or(entries.line("mu"));
        config_err(line, e.to_string())
    })?;
    if mode == Mode::LimitCycle && matches!(params.force(), ForceSpec::Sampled(_)) {
        return Err(config_err(entries.line("force"), "limit-cycle mode needs force = zero or harmonic"));
    }

    let (init_line, init) = entries.required("initial")?;
    let initial = parse_initial(init).map_err(|m| config_err(Some(init_line), m))?;

    let (dim_line, dim) = entries.count("N")?;
    if dim < 2 {
        return Err(config_err(Some(dim_line), format!("N must be at least 2, got {dim}")));
    }
    match initial {
        InitialState::Fock(n) if n >= dim => {
            return Err(config_err(Some(init_line), format!("fock({n}) needs N > {n}")));
        }
        InitialState::Thermal(u) | InitialState::ThermalCoherent(_, u) if !(0.0..1.0).contains(&u) => {
            return Err(config_err(Some(init_line), format!("thermal weight u = {u} must lie in [0, 1)")));
        }
        _ => {}
    }

    let t_max = entries.real("t_max")?;
    if t_max <= 0.0 {
        return Err(config_err(entries.line("t_max"), format!("t_max must be positive, got {t_max}")));
    }
    let (steps_line, n_steps) = entries.count("n_steps")?;
    if n_steps < 1 {
        return Err(config_err(Some(steps_line), "n_steps must be at least 1"));
    }

    let oracle = match entries.optional("oracle") {
        None => None,
        Some((_, "direct")) => Some(OracleKind::Direct),
        Some((_, "vectorized")) => Some(OracleKind::Vectorized),
        Some((l, other)) => {
            return Err(config_err(Some(l), format!("unknown oracle `{other}` (expected direct or vectorized)")))
        }
    };
    if oracle.is_some() && !matches!(mode, Mode::Compare | Mode::LimitCycle) {
        return Err(config_err(entries.line("oracle"), "`oracle` only applies to compare and limit-cycle modes"));
    }

    let defaults = StepControl::default();
    let control = StepControl::with_tolerances(entries.real_or("rtol", defaults.rtol)?, entries.real_or("atol", defaults.atol)?);
    let tol = Tolerances::default();
    let tolerances = Tolerances {
        herm_tol: entries.real_or("herm_tol", tol.herm_tol)?,
        trace_tol: entries.real_or("trace_tol", tol.trace_tol)?,
        pos_tol: entries.real_or("pos_tol", tol.pos_tol)?,
        tail_tol: entries.real_or("tail_tol", tol.tail_tol)?,
    };
    for key in ["rtol", "atol", "herm_tol", "trace_tol", "pos_tol", "tail_tol", "compare_tol", "limit_cycle_tol"] {
        if let Some((l, v)) = entries.optional(key) {
            if v.parse::<f64>().map_or(true, |x| x <= 0.0) {
                return Err(config_err(Some(l), format!("`{key}` must be positive")));
            }
        }
    }

    Ok(RunConfig {
        mode,
        params,
        initial,
        dim,
        t_max,
        n_steps,
        oracle,
        control,
        tolerances,
        compare_tol: entries.real_or("compare_tol", 1e-6)?,
        limit_cycle_tol: entries.real_or("limit_cycle_tol", 1e-4)?,
        output: entries.optional("output").map(|(_, v)| base_dir.join(v)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
mode = analytic
omega = 1
mu = 0.3
nu = 0.1
force = zero
initial = vacuum
N = 40
t_max = 10
n_steps = 200
";

    fn parse(text: &str) -> Result<RunConfig> {
        parse_config(text, Path::new("."))
    }

    fn line_of(e: Error) -> Option<usize> {
        match e {
            Error::Config { line, .. } => line,
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.mode, Mode::Analytic);
        assert_eq!(c.dim, 40);
        assert_eq!(c.n_steps, 200);
        assert_eq!(c.initial, InitialState::Vacuum);
        assert_eq!(c.params.mu(), 0.3);
        assert!(c.params.force().is_zero());
        assert_eq!(c.compare_tol, 1e-6);
        assert_eq!(c.limit_cycle_tol, 1e-4);
        assert_eq!(c.tolerances, Tolerances::default());
    }

    #[test]
    fn gain_above_loss_is_rejected() {
        let text = MINIMAL.replace("mu = 0.3", "mu = 0.1").replace("nu = 0.1", "nu = 0.3");
        let e = parse(&text).unwrap_err();
        assert!(e.to_string().contains("requires mu > nu"), "{e}");
        assert_eq!(line_of(e), Some(4));
    }

    #[test]
    fn duplicate_key_reports_second_occurrence() {
        let text = format!("{MINIMAL}mu = 0.5\n");
        let e = parse(&text).unwrap_err();
        assert!(e.to_string().contains("duplicate key `mu`"));
        assert_eq!(line_of(e), Some(10));
    }

    #[test]
    fn unknown_and_missing_keys() {
        let e = parse(&format!("{MINIMAL}colour = blue\n")).unwrap_err();
        assert_eq!(line_of(e), Some(10));
        let e = parse(&MINIMAL.replace("t_max = 10\n", "")).unwrap_err();
        assert!(e.to_string().contains("missing required key `t_max`"));
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = format!("# header\n\n{}", MINIMAL.replace("N = 40", "N = 12   # small"));
        assert_eq!(parse(&text).unwrap().dim, 12);
    }

    #[test]
    fn harmonic_force_needs_amplitude() {
        let text = MINIMAL.replace("force = zero", "force = harmonic\nf0 = 0.2");
        assert!(parse(&text).unwrap_err().to_string().contains("`Omega`"));
        let text = MINIMAL.replace("force = zero", "force = harmonic\nf0 = 0.2\nOmega = 0.9");
        assert_eq!(
            *parse(&text).unwrap().params.force(),
            ForceSpec::Harmonic { f0: 0.2, omega_drive: 0.9 }
        );
        let text = MINIMAL.replace("force = zero", "force = zero\nf0 = 0.2");
        assert_eq!(line_of(parse(&text).unwrap_err()), Some(6));
    }

    #[test]
    fn bad_values_carry_lines() {
        assert_eq!(line_of(parse(&MINIMAL.replace("N = 40", "N = 1")).unwrap_err()), Some(7));
        assert_eq!(line_of(parse(&MINIMAL.replace("t_max = 10", "t_max = -1")).unwrap_err()), Some(8));
        assert_eq!(line_of(parse(&MINIMAL.replace("n_steps = 200", "n_steps = 0")).unwrap_err()), Some(9));
        assert_eq!(line_of(parse(&MINIMAL.replace("omega = 1", "omega = fast")).unwrap_err()), Some(2));
        assert_eq!(line_of(parse(&MINIMAL.replace("initial = vacuum", "initial = fock(40)")).unwrap_err()), Some(6));
        assert_eq!(line_of(parse(&MINIMAL.replace("mode = analytic", "mode = guess")).unwrap_err()), Some(1));
        assert_eq!(line_of(parse(&format!("{MINIMAL}oracle = direct\n")).unwrap_err()), Some(10));
    }

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("0.5").unwrap(), C64::new(0.5, 0.0));
        assert_eq!(parse_complex("0.3+0.4i").unwrap(), C64::new(0.3, 0.4));
        assert_eq!(parse_complex("-0.2i").unwrap(), C64::new(0.0, -0.2));
        assert_eq!(parse_complex("1e-3 - 2e-2i").unwrap(), C64::new(1e-3, -2e-2));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert!(parse_complex("1+2j").is_err());
    }

    #[test]
    fn initial_states() {
        assert_eq!(parse_initial("coherent(0.5)").unwrap(), InitialState::Coherent(C64::new(0.5, 0.0)));
        assert_eq!(parse_initial("thermal(0.4)").unwrap(), InitialState::Thermal(0.4));
        assert_eq!(
            parse_initial("thermal-coherent(0.1-0.2i, 0.3)").unwrap(),
            InitialState::ThermalCoherent(C64::new(0.1, -0.2), 0.3)
        );
        assert_eq!(parse_initial("fock(3)").unwrap(), InitialState::Fock(3));
        assert!(parse_initial("squeezed(0.1)").is_err());
        assert!(parse_initial("thermal-coherent(0.1)").is_err());
    }

    #[test]
    fn sampled_force_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("f.csv"), "t,f\n0,0.1\n1,0.2\n2,-0.1\n").unwrap();
        let text = MINIMAL.replace("force = zero", "force = sampled-file\nforce_file = f.csv");
        let c = parse_config(&text, dir.path()).unwrap();
        match c.params.force() {
            ForceSpec::Sampled(s) => assert_eq!(s.values(), &[0.1, 0.2, -0.1]),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("force = zero", "force = sampled-file\nforce_file = missing.csv");
        assert_eq!(line_of(parse_config(&text, dir.path()).unwrap_err()), Some(6));
    }
}
