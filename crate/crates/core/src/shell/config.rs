//! Sectioned key/value configuration documents.
//!
//! ```text
//! # comment
//! [angles]
//! theta1 = pi/3
//! [frame]
//! beta = 0.2
//! ```
//!
//! Numbers are arithmetic expressions over decimals, `pi` and `sqrt(..)`.
//! Complex amplitudes are written `re, im`.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::engine::{EngineError, InterpretationMode, MeasurementScheme, ProtocolConfig, ResetState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}, column {}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigErrorKind {
    Syntax,
    Range,
    UnknownKey,
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("{} error at {at}: {message}", self.kind_str())]
pub struct ConfigError {
    pub kind: ConfigErrorKind,
    pub at: Location,
    pub message: String,
}

impl ConfigError {
    fn new(kind: ConfigErrorKind, at: Location, message: impl Into<String>) -> Self {
        Self { kind, at, message: message.into() }
    }

    fn kind_str(&self) -> &'static str {
        match self.kind {
            ConfigErrorKind::Syntax => "syntax",
            ConfigErrorKind::Range => "range",
            ConfigErrorKind::UnknownKey => "unknown-key",
        }
    }
}

const KEYS: &[(&str, &[&str])] = &[
    ("state", &["alpha", "beta", "s0"]),
    ("angles", &["theta1", "theta2", "alice_basis"]),
    ("coupling", &["g", "w"]),
    ("geometry", &["t0", "t1", "t2", "t3", "x_a"]),
    ("frame", &["beta"]),
    ("mode", &["interpretation", "scheme"]),
    ("runs", &["trials", "seed"]),
];

struct Entry<'a> {
    value: &'a str,
    key_at: Location,
    value_at: Location,
}

pub fn parse_config(text: &str) -> Result<ProtocolConfig, ConfigError> {
    use ConfigErrorKind::*;
    let mut entries: HashMap<(String, String), Entry> = HashMap::new();
    let mut section: Option<(String, Location)> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let at = Location { line, column: indent + 1 };
        if let Some(rest) = trimmed.strip_prefix('[') {
            let Some(name) = rest.strip_suffix(']') else {
                return Err(ConfigError::new(Syntax, at, "section header missing closing ']'"));
            };
            let name = name.trim();
            if !KEYS.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::new(UnknownKey, at, format!("unknown section [{name}]")));
            }
            section = Some((name.to_string(), at));
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(ConfigError::new(Syntax, at, "expected `key = value`"));
        };
        let key = content[..eq].trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(ConfigError::new(Syntax, at, format!("invalid key `{key}`")));
        }
        let Some((sec, _)) = &section else {
            return Err(ConfigError::new(Syntax, at, format!("key `{key}` appears before any section header")));
        };
        let allowed = KEYS.iter().find(|(s, _)| s == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !allowed.contains(&key) {
            return Err(ConfigError::new(UnknownKey, at, format!("unknown key `{key}` in section [{sec}]")));
        }
        let value_raw = &content[eq + 1..];
        let value = value_raw.trim();
        let value_at = Location { line, column: eq + 2 + (value_raw.len() - value_raw.trim_start().len()) };
        if value.is_empty() {
            return Err(ConfigError::new(Syntax, value_at, format!("missing value for `{key}`")));
        }
        let id = (sec.clone(), key.to_string());
        if let Some(prev) = entries.get(&id) {
            return Err(ConfigError::new(
                Syntax,
                at,
                format!("duplicate key `{key}` in [{sec}]: first defined at {}, redefined at {at}", prev.key_at),
            ));
        }
        entries.insert(id, Entry { value, key_at: at, value_at });
    }

    let mut c = ProtocolConfig::default();
    let get = |s: &str, k: &str| entries.get(&(s.to_string(), k.to_string()));
    let real = |s: &str, k: &str, target: &mut f64| -> Result<(), ConfigError> {
        if let Some(e) = get(s, k) {
            *target = eval_real(e.value).map_err(|m| ConfigError::new(Syntax, e.value_at, format!("{k}: {m}")))?;
        }
        Ok(())
    };
    let complex = |k: &str, target: &mut C64| -> Result<(), ConfigError> {
        if let Some(e) = get("state", k) {
            *target = eval_complex(e.value).map_err(|m| ConfigError::new(Syntax, e.value_at, format!("{k}: {m}")))?;
        }
        Ok(())
    };
    complex("alpha", &mut c.alpha)?;
    complex("beta", &mut c.beta)?;
    if let Some(e) = get("state", "s0") {
        c.s0 = match e.value {
            "plus" => ResetState::Plus,
            "minus" => ResetState::Minus,
            "plus_x" => ResetState::PlusX,
            v => return Err(ConfigError::new(Syntax, e.value_at, format!("s0: expected plus|minus|plus_x, got `{v}`"))),
        };
    }
    real("angles", "theta1", &mut c.theta1)?;
    real("angles", "theta2", &mut c.theta2)?;
    real("angles", "alice_basis", &mut c.alice_basis_angle)?;
    real("coupling", "g", &mut c.g)?;
    real("coupling", "w", &mut c.w)?;
    real("geometry", "t0", &mut c.geometry.t0)?;
    real("geometry", "t1", &mut c.geometry.t1)?;
    real("geometry", "t2", &mut c.geometry.t2)?;
    real("geometry", "t3", &mut c.geometry.t3)?;
    real("geometry", "x_a", &mut c.geometry.x_a)?;
    real("frame", "beta", &mut c.boost)?;
    if let Some(e) = get("mode", "interpretation") {
        c.mode = match e.value {
            "unitary_lab" => InterpretationMode::UnitaryLab,
            "objective_collapse" => InterpretationMode::ObjectiveCollapse,
            v => {
                return Err(ConfigError::new(
                    Syntax,
                    e.value_at,
                    format!("interpretation: expected unitary_lab|objective_collapse, got `{v}`"),
                ))
            }
        };
    }
    if let Some(e) = get("mode", "scheme") {
        c.scheme = match e.value {
            "weak" => MeasurementScheme::Weak,
            "projective" => MeasurementScheme::Projective,
            v => return Err(ConfigError::new(Syntax, e.value_at, format!("scheme: expected weak|projective, got `{v}`"))),
        };
    }
    for (k, target) in [("trials", &mut c.trials), ("seed", &mut c.seed)] {
        if let Some(e) = get("runs", k) {
            *target = e
                .value
                .replace('_', "")
                .parse()
                .map_err(|_| ConfigError::new(Syntax, e.value_at, format!("{k}: expected a non-negative integer")))?;
        }
    }

    let range = |s: &str, k: &str, ok: bool, msg: String| -> Result<(), ConfigError> {
        if ok {
            return Ok(());
        }
        let at = get(s, k).map(|e| e.value_at).unwrap_or(Location { line: 0, column: 0 });
        Err(ConfigError::new(Range, at, format!("[{s}] {k}: {msg}")))
    };
    range("frame", "beta", c.boost.abs() < 1.0, format!("|beta| = {} must be < 1", c.boost.abs()))?;
    range("runs", "trials", c.trials >= 1, "trials must be at least 1".into())?;
    range("coupling", "w", c.w > 0.0, format!("w = {} must be positive", c.w))?;
    for k in ["theta1", "theta2"] {
        let t = if k == "theta1" { c.theta1 } else { c.theta2 };
        range("angles", k, (0.0..=std::f64::consts::PI).contains(&t), format!("{t} outside [0, pi]"))?;
    }
    let norm = c.alpha.norm_sqr() + c.beta.norm_sqr();
    let amp_key = if get("state", "beta").is_some() { "beta" } else { "alpha" };
    range("state", amp_key, (norm - 1.0).abs() <= crate::qmath::ALGEBRA_TOL, format!("|alpha|^2 + |beta|^2 = {norm}, must be 1"))?;
    c.validate().map_err(|e| match e {
        EngineError::Configuration(m) => ConfigError::new(Range, Location { line: 0, column: 0 }, m),
        other => ConfigError::new(Range, Location { line: 0, column: 0 }, other.to_string()),
    })?;
    Ok(c)
}

/// Prints `config` in the document format; numbers use the shortest
/// representation that parses back to the same value.
pub fn print_config(c: &ProtocolConfig) -> String {
    let cx = |z: C64| format!("{:?}, {:?}", z.re, z.im);
    let g = &c.geometry;
    let mut s = String::new();
    let _ = writeln!(s, "[state]\nalpha = {}\nbeta = {}\ns0 = {}", cx(c.alpha), cx(c.beta), c.s0.as_str());
    let _ = writeln!(
        s,
        "\n[angles]\ntheta1 = {:?}\ntheta2 = {:?}\nalice_basis = {:?}",
        c.theta1, c.theta2, c.alice_basis_angle
    );
    let _ = writeln!(s, "\n[coupling]\ng = {:?}\nw = {:?}", c.g, c.w);
    let _ = writeln!(s, "\n[geometry]\nt0 = {:?}\nt1 = {:?}\nt2 = {:?}\nt3 = {:?}\nx_a = {:?}", g.t0, g.t1, g.t2, g.t3, g.x_a);
    let _ = writeln!(s, "\n[frame]\nbeta = {:?}", c.boost);
    let _ = writeln!(s, "\n[mode]\ninterpretation = {}\nscheme = {}", c.mode.as_str(), c.scheme.as_str());
    let _ = writeln!(s, "\n[runs]\ntrials = {}\nseed = {}", c.trials, c.seed);
    s
}

fn eval_complex(text: &str) -> Result<C64, String> {
    let mut parts = text.split(',');
    let re = eval_real(parts.next().unwrap_or(""))?;
    let im = match parts.next() {
        Some(p) => eval_real(p)?,
        None => 0.0,
    };
    if parts.next().is_some() {
        return Err("complex values take the form `re, im`".into());
    }
    Ok(C64::new(re, im))
}

/// Evaluates `+ - * /`, parentheses, `pi` and `sqrt(..)` over decimals.
pub fn eval_real(text: &str) -> Result<f64, String> {
    let mut p = Expr { s: text.as_bytes(), i: 0 };
    let v = p.sum()?;
    p.ws();
    if p.i != p.s.len() {
        return Err(format!("unexpected `{}` at offset {}", &text[p.i..], p.i));
    }
    if !v.is_finite() {
        return Err(format!("`{}` is not finite", text.trim()));
    }
    Ok(v)
}

struct Expr<'a> {
    s: &'a [u8],
    i: usize,
}

impl Expr<'_> {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, c: u8) -> bool {
        self.ws();
        if self.s.get(self.i) == Some(&c) {
            self.i += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<f64, String> {
        let mut v = self.product()?;
        loop {
            if self.eat(b'+') {
                v += self.product()?;
            } else if self.eat(b'-') {
                v -= self.product()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn product(&mut self) -> Result<f64, String> {
        let mut v = self.unary()?;
        loop {
            if self.eat(b'*') {
                v *= self.unary()?;
            } else if self.eat(b'/') {
                v /= self.unary()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn unary(&mut self) -> Result<f64, String> {
        if self.eat(b'-') {
            return Ok(-self.unary()?);
        }
        if self.eat(b'+') {
            return self.unary();
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<f64, String> {
        self.ws();
        if self.eat(b'(') {
            let v = self.sum()?;
            return if self.eat(b')') { Ok(v) } else { Err("missing ')'".into()) };
        }
        let start = self.i;
        if self.s[start..].starts_with(b"pi") {
            self.i += 2;
            return Ok(std::f64::consts::PI);
        }
        if self.s[start..].starts_with(b"sqrt") {
            self.i += 4;
            if !self.eat(b'(') {
                return Err("expected '(' after sqrt".into());
            }
            let v = self.sum()?;
            if !self.eat(b')') {
                return Err("missing ')'".into());
            }
            return Ok(v.sqrt());
        }
        while self.i < self.s.len() {
            let c = self.s[self.i];
            let exp_sign = (c == b'+' || c == b'-') && self.i > start && matches!(self.s[self.i - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.i += 1;
            } else {
                break;
            }
        }
        let tok = std::str::from_utf8(&self.s[start..self.i]).expect("ascii");
        if tok.is_empty() {
            return Err(match self.s.get(start) {
                Some(&c) => format!("unexpected `{}`", c as char),
                None => "expected a number".into(),
            });
        }
        tok.parse().map_err(|_| format!("invalid number `{tok}`"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn minimal_document_gets_defaults() {
        let c = parse_config("[frame]\nbeta = 0\n").unwrap();
        assert_eq!(c, ProtocolConfig::default());
    }

    #[test]
    fn expressions() {
        assert_eq!(eval_real("pi/2").unwrap(), FRAC_PI_2);
        assert_eq!(eval_real("2*pi/3").unwrap(), 2.0 * PI / 3.0);
        assert_eq!(eval_real(" -0.25 ").unwrap(), -0.25);
        assert_eq!(eval_real("1e-3").unwrap(), 1e-3);
        assert_eq!(eval_real("1/sqrt(2)").unwrap(), 1.0 / 2f64.sqrt());
        assert_eq!(eval_real("(1 + 2) * 3").unwrap(), 9.0);
        assert!(eval_real("pi pi").is_err());
        assert!(eval_real("1/0").is_err());
        assert_eq!(eval_complex("0, 1/sqrt(2)").unwrap(), C64::new(0.0, 1.0 / 2f64.sqrt()));
    }

    #[test]
    fn beta_out_of_range_names_key() {
        let e = parse_config("[frame]\nbeta = 1.5\n").unwrap_err();
        assert_eq!(e.kind, ConfigErrorKind::Range);
        assert!(e.message.contains("beta"));
        assert_eq!(e.at, Location { line: 2, column: 8 });
    }

    #[test]
    fn duplicate_key_reports_both_locations() {
        let e = parse_config("[coupling]\ng = 0.1\nw = 1\n  g = 0.2\n").unwrap_err();
        assert_eq!(e.kind, ConfigErrorKind::Syntax);
        assert!(e.message.contains("line 2, column 1"), "{}", e.message);
        assert!(e.message.contains("line 4, column 3"), "{}", e.message);
    }

    #[test]
    fn unknown_keys_and_sections() {
        assert_eq!(parse_config("[frame]\nvelocity = 0.2\n").unwrap_err().kind, ConfigErrorKind::UnknownKey);
        assert_eq!(parse_config("[lab]\n").unwrap_err().kind, ConfigErrorKind::UnknownKey);
        assert_eq!(parse_config("beta = 0.2\n").unwrap_err().kind, ConfigErrorKind::Syntax);
        assert_eq!(parse_config("[frame\n").unwrap_err().kind, ConfigErrorKind::Syntax);
        assert_eq!(parse_config("[frame]\nbeta 0.2\n").unwrap_err().kind, ConfigErrorKind::Syntax);
    }

    #[test]
    fn range_checks() {
        assert_eq!(parse_config("[runs]\ntrials = 0\n").unwrap_err().kind, ConfigErrorKind::Range);
        assert_eq!(parse_config("[coupling]\nw = 0\n").unwrap_err().kind, ConfigErrorKind::Range);
        assert_eq!(parse_config("[angles]\ntheta1 = 4\n").unwrap_err().kind, ConfigErrorKind::Range);
        let e = parse_config("[state]\nalpha = 1\n").unwrap_err();
        assert_eq!((e.kind, e.at.line), (ConfigErrorKind::Range, 2));
    }

    #[test]
    fn full_document() {
        let text = "\
# projective run in the moving frame
[state]
alpha = 0.6
beta = 0, 0.8
s0 = plus_x
[angles]
theta1 = pi/2 ; inline comment
alice_basis = 0
[mode]
interpretation = objective_collapse
scheme = projective
[runs]
trials = 1_000
seed = 42
";
        let c = parse_config(text).unwrap();
        assert_eq!(c.beta, C64::new(0.0, 0.8));
        assert_eq!(c.s0, ResetState::PlusX);
        assert_eq!(c.theta1, FRAC_PI_2);
        assert_eq!(c.mode, InterpretationMode::ObjectiveCollapse);
        assert_eq!(c.scheme, MeasurementScheme::Projective);
        assert_eq!((c.trials, c.seed), (1000, 42));
    }

    #[test]
    fn print_round_trips() {
        let mut c = ProtocolConfig::default().with_boost(-0.35).with_angles(0.1, 3.0);
        c.alpha = C64::new(0.6, 0.0);
        c.beta = C64::new(0.0, -0.8);
        c.g = 1e-7;
        c.seed = u64::MAX;
        assert_eq!(parse_config(&print_config(&c)).unwrap(), c);
        let d = ProtocolConfig::default();
        assert_eq!(parse_config(&print_config(&d)).unwrap(), d);
    }
}
