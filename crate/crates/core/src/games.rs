//! Game data model, Bell-operator construction, the built-in example games,
//! and the line-oriented game-file format.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::algebra::{Generator, Mode, Monomial, NCPolynomial, Schema};

#[derive(Debug, Error)]
pub enum GameError {
    #[error("line {0}: {1}")]
    Parse(usize, String),
    #[error("invalid game: {0}")]
    Invalid(String),
    #[error("unknown builtin game '{0}'")]
    UnknownBuiltin(String),
}

/// Payoff data of a game. The correlator form carries sparse coefficients on
/// full-correlator terms plus optional marginal and constant terms; its
/// generators are +/-1 observables, or fixed-outcome projectors when
/// `mode == Projector` (the I3322 convention).
#[derive(Debug, Clone, PartialEq)]
pub enum GameForm {
    Probability {
        /// Distribution over setting tuples; nonnegative, sums to 1.
        pi: BTreeMap<Vec<u8>, f64>,
        /// Payoff V(a|s) in [0,1]; omitted entries are 0.
        v: BTreeMap<(Vec<u8>, Vec<u8>), f64>,
    },
    Correlator {
        mode: Mode,
        /// Coefficients on full-correlator terms, keyed by setting tuple.
        full: BTreeMap<Vec<u8>, f64>,
        /// Coefficients on single-party marginal terms (party, setting).
        marginals: BTreeMap<(u8, u8), f64>,
        constant: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    pub name: String,
    pub num_parties: usize,
    /// settings[j] = number of settings of party j.
    pub settings: Vec<usize>,
    /// outcomes[j][s] = number of outcomes of party j's setting s.
    pub outcomes: Vec<Vec<usize>>,
    pub form: GameForm,
}

/// The game part of `q_nu`: a Hermitian polynomial whose operator norm
/// bounds the game value, plus a constant offset absorbed from `const` lines.
#[derive(Debug, Clone)]
pub struct BellOperator {
    pub polynomial: NCPolynomial,
    pub offset: f64,
    pub mode: Mode,
}

impl Game {
    pub fn mode(&self) -> Mode {
        match &self.form {
            GameForm::Probability { .. } => Mode::Projector,
            GameForm::Correlator { mode, .. } => *mode,
        }
    }

    pub fn schema(&self) -> Schema {
        Schema {
            mode: self.mode(),
            settings: self.settings.clone(),
            outcomes: self.outcomes.iter().map(|o| o.to_vec()).collect(),
        }
    }

    /// The generator universe the relaxation bases are built from.
    /// Probability form uses every (setting, outcome) projector; the
    /// correlator form uses one symbol per setting: a +/-1 observable, or
    /// the outcome-0 projector in projector mode.
    pub fn generators(&self) -> Vec<Generator> {
        let mut gens = Vec::new();
        match &self.form {
            GameForm::Probability { .. } => {
                for (p, &ns) in self.settings.iter().enumerate() {
                    for s in 0..ns {
                        for a in 0..self.outcomes[p][s] {
                            gens.push(Generator::projector(p as u8, s as u8, a as u8));
                        }
                    }
                }
            }
            GameForm::Correlator { mode, .. } => {
                for (p, &ns) in self.settings.iter().enumerate() {
                    for s in 0..ns {
                        gens.push(match mode {
                            Mode::Observable => Generator::observable(p as u8, s as u8),
                            Mode::Projector => Generator::projector(p as u8, s as u8, 0),
                        });
                    }
                }
            }
        }
        gens
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.num_parties == 0 || self.settings.len() != self.num_parties {
            return Err(GameError::Invalid("inconsistent party count".into()));
        }
        if self.outcomes.len() != self.num_parties
            || self
                .outcomes
                .iter()
                .zip(&self.settings)
                .any(|(o, &ns)| o.len() != ns)
        {
            return Err(GameError::Invalid("inconsistent outcome table".into()));
        }
        match &self.form {
            GameForm::Probability { pi, v } => {
                let total: f64 = pi.values().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(GameError::Invalid(format!(
                        "pi sums to {total} (expected 1 within 1e-12)"
                    )));
                }
                for (s, &p) in pi {
                    if p < 0.0 {
                        return Err(GameError::Invalid("pi has a negative entry".into()));
                    }
                    self.check_setting_tuple(s)?;
                }
                for ((s, a), &val) in v {
                    self.check_setting_tuple(s)?;
                    for (j, (&aj, &sj)) in a.iter().zip(s.iter()).enumerate() {
                        if aj as usize >= self.outcomes[j][sj as usize] {
                            return Err(GameError::Invalid(format!(
                                "outcome {aj} out of range for party {j}"
                            )));
                        }
                    }
                    if !(0.0..=1.0).contains(&val) {
                        return Err(GameError::Invalid(format!(
                            "payoff {val} outside [0,1]"
                        )));
                    }
                }
            }
            GameForm::Correlator { full, marginals, .. } => {
                if self.outcomes.iter().flatten().any(|&m| m != 2) {
                    return Err(GameError::Invalid(
                        "correlator form requires two outcomes everywhere".into(),
                    ));
                }
                for s in full.keys() {
                    self.check_setting_tuple(s)?;
                }
                for &(p, s) in marginals.keys() {
                    if p as usize >= self.num_parties || s as usize >= self.settings[p as usize] {
                        return Err(GameError::Invalid(format!(
                            "marginal index ({p},{s}) out of range"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_setting_tuple(&self, s: &[u8]) -> Result<(), GameError> {
        if s.len() != self.num_parties {
            return Err(GameError::Invalid("setting tuple of wrong arity".into()));
        }
        for (j, &sj) in s.iter().enumerate() {
            if sj as usize >= self.settings[j] {
                return Err(GameError::Invalid(format!(
                    "setting {sj} out of range for party {j}"
                )));
            }
        }
        Ok(())
    }

    /// Assemble the Bell operator. Probability form: coefficient
    /// pi(s)V(a|s) on the projector monomial X_{s_1}^{a_1}...X_{s_N}^{a_N};
    /// correlator form: the stated coefficients on products of per-party
    /// symbols.
    pub fn bell_operator(&self) -> Result<BellOperator, GameError> {
        self.validate()?;
        let mode = self.mode();
        let mut poly = NCPolynomial::zero();
        let mut offset = 0.0;
        match &self.form {
            GameForm::Probability { pi, v } => {
                for ((s, a), &val) in v {
                    let p = pi.get(s).copied().unwrap_or(0.0);
                    let c = p * val;
                    if c == 0.0 {
                        continue;
                    }
                    let word: Vec<Generator> = s
                        .iter()
                        .zip(a.iter())
                        .enumerate()
                        .map(|(j, (&sj, &aj))| Generator::projector(j as u8, sj, aj))
                        .collect();
                    let m = Monomial::reduce(mode, &word)
                        .map_err(|e| GameError::Invalid(e.to_string()))?;
                    poly.add_term(m, c);
                }
            }
            GameForm::Correlator { mode, full, marginals, constant } => {
                for (s, &c) in full {
                    let word: Vec<Generator> = s
                        .iter()
                        .enumerate()
                        .map(|(j, &sj)| match mode {
                            Mode::Observable => Generator::observable(j as u8, sj),
                            Mode::Projector => Generator::projector(j as u8, sj, 0),
                        })
                        .collect();
                    let m = Monomial::reduce(*mode, &word)
                        .map_err(|e| GameError::Invalid(e.to_string()))?;
                    poly.add_term(m, c);
                }
                for (&(p, s), &c) in marginals {
                    let g = match mode {
                        Mode::Observable => Generator::observable(p, s),
                        Mode::Projector => Generator::projector(p, s, 0),
                    };
                    let m = Monomial::reduce(*mode, &[g])
                        .map_err(|e| GameError::Invalid(e.to_string()))?;
                    poly.add_term(m, c);
                }
                offset = *constant;
            }
        }
        Ok(BellOperator { polynomial: poly, offset, mode })
    }
}

/// The CHSH game in probability form: uniform questions,
/// win iff a XOR b = s AND t. Classical value 3/4.
fn chsh_game() -> Game {
    let mut pi = BTreeMap::new();
    let mut v = BTreeMap::new();
    for s in 0..2u8 {
        for t in 0..2u8 {
            pi.insert(vec![s, t], 0.25);
            for a in 0..2u8 {
                for b in 0..2u8 {
                    if (a ^ b) == (s & t) {
                        v.insert((vec![s, t], vec![a, b]), 1.0);
                    }
                }
            }
        }
    }
    Game {
        name: "chsh-game".into(),
        num_parties: 2,
        settings: vec![2, 2],
        outcomes: vec![vec![2, 2], vec![2, 2]],
        form: GameForm::Probability { pi, v },
    }
}

/// The CHSH correlator functional A1B1 + A1B2 + A2B1 - A2B2.
fn chsh_correlator() -> Game {
    let mut full = BTreeMap::new();
    full.insert(vec![0u8, 0u8], 1.0);
    full.insert(vec![0u8, 1u8], 1.0);
    full.insert(vec![1u8, 0u8], 1.0);
    full.insert(vec![1u8, 1u8], -1.0);
    Game {
        name: "chsh-correlator".into(),
        num_parties: 2,
        settings: vec![2, 2],
        outcomes: vec![vec![2, 2], vec![2, 2]],
        form: GameForm::Correlator {
            mode: Mode::Observable,
            full,
            marginals: BTreeMap::new(),
            constant: 0.0,
        },
    }
}

/// The I3322 functional over outcome-0 projectors:
/// A1(B1+B2+B3) + A2(B1+B2-B3) + A3(B1-B2) - A1 - 2 B1 - B2.
fn i3322() -> Game {
    let mut full = BTreeMap::new();
    let coeffs: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [1.0, 1.0, -1.0], [1.0, -1.0, 0.0]];
    for (s, row) in coeffs.iter().enumerate() {
        for (t, &c) in row.iter().enumerate() {
            if c != 0.0 {
                full.insert(vec![s as u8, t as u8], c);
            }
        }
    }
    let mut marginals = BTreeMap::new();
    marginals.insert((0u8, 0u8), -1.0);
    marginals.insert((1u8, 0u8), -2.0);
    marginals.insert((1u8, 1u8), -1.0);
    Game {
        name: "i3322".into(),
        num_parties: 2,
        settings: vec![3, 3],
        outcomes: vec![vec![2, 2, 2], vec![2, 2, 2]],
        form: GameForm::Correlator {
            mode: Mode::Projector,
            full,
            marginals,
            constant: 0.0,
        },
    }
}

/// Yao's tripartite functional
/// A1B2C3 + A2B3C1 + A3B1C2 - A1B3C2 - A2B1C3 - A3B2C1.
fn yao() -> Game {
    let mut full = BTreeMap::new();
    full.insert(vec![0u8, 1, 2], 1.0);
    full.insert(vec![1u8, 2, 0], 1.0);
    full.insert(vec![2u8, 0, 1], 1.0);
    full.insert(vec![0u8, 2, 1], -1.0);
    full.insert(vec![1u8, 0, 2], -1.0);
    full.insert(vec![2u8, 1, 0], -1.0);
    Game {
        name: "yao".into(),
        num_parties: 3,
        settings: vec![3, 3, 3],
        outcomes: vec![vec![2, 2, 2], vec![2, 2, 2], vec![2, 2, 2]],
        form: GameForm::Correlator {
            mode: Mode::Observable,
            full,
            marginals: BTreeMap::new(),
            constant: 0.0,
        },
    }
}

pub const BUILTIN_NAMES: &[&str] = &["chsh-game", "chsh-correlator", "i3322", "yao"];

pub fn builtin(name: &str) -> Result<Game, GameError> {
    match name {
        "chsh-game" => Ok(chsh_game()),
        "chsh-correlator" => Ok(chsh_correlator()),
        "i3322" => Ok(i3322()),
        "yao" => Ok(yao()),
        other => Err(GameError::UnknownBuiltin(other.to_string())),
    }
}

/// Notes produced while parsing (applied defaults and the like).
#[derive(Debug, Default, Clone)]
pub struct ParseReport {
    pub notes: Vec<String>,
}

pub fn parse_game(text: &str) -> Result<(Game, ParseReport), GameError> {
    let mut report = ParseReport::default();
    let mut name = String::from("unnamed");
    let mut form_kind: Option<&str> = None;
    let mut mode = None;
    let mut parties: Option<usize> = None;
    let mut settings: Option<Vec<usize>> = None;
    let mut uniform_outcomes: Option<usize> = None;
    let mut outcome_lines: Vec<(usize, usize, usize)> = Vec::new();
    let mut pi: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    let mut v: BTreeMap<(Vec<u8>, Vec<u8>), f64> = BTreeMap::new();
    let mut full: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
    let mut marginals: BTreeMap<(u8, u8), f64> = BTreeMap::new();
    let mut constant = 0.0f64;
    let mut saw_pi = false;

    let err = |ln: usize, msg: String| GameError::Parse(ln, msg);
    for (idx, raw) in text.lines().enumerate() {
        let ln = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let parse_f = |t: &str| {
            t.parse::<f64>()
                .map_err(|_| err(ln, format!("bad number '{t}'")))
        };
        let parse_u = |t: &str| {
            t.parse::<usize>()
                .map_err(|_| err(ln, format!("bad index '{t}'")))
        };
        match toks[0] {
            "game" => {
                name = toks.get(1).ok_or_else(|| err(ln, "missing name".into()))?.to_string();
            }
            "form" => match toks.get(1) {
                Some(&"probability") => form_kind = Some("probability"),
                Some(&"correlator") => form_kind = Some("correlator"),
                _ => return Err(err(ln, "form must be probability|correlator".into())),
            },
            "mode" => match toks.get(1) {
                Some(&"observable") => mode = Some(Mode::Observable),
                Some(&"projector") => mode = Some(Mode::Projector),
                _ => return Err(err(ln, "mode must be observable|projector".into())),
            },
            "parties" => {
                parties = Some(parse_u(toks.get(1).ok_or_else(|| err(ln, "missing count".into()))?)?);
            }
            "settings" => {
                let vals: Result<Vec<usize>, _> = toks[1..].iter().map(|t| parse_u(t)).collect();
                settings = Some(vals?);
            }
            "outcomes" => match toks.len() {
                2 => uniform_outcomes = Some(parse_u(toks[1])?),
                4 => outcome_lines.push((parse_u(toks[1])?, parse_u(toks[2])?, parse_u(toks[3])?)),
                _ => return Err(err(ln, "outcomes takes 1 or 3 arguments".into())),
            },
            "pi" => {
                let np = parties.ok_or_else(|| err(ln, "pi before parties".into()))?;
                if toks.len() != np + 2 {
                    return Err(err(ln, format!("pi needs {np} indices and a value")));
                }
                let s: Result<Vec<u8>, _> =
                    toks[1..=np].iter().map(|t| parse_u(t).map(|x| x as u8)).collect();
                let s = s?;
                let val = parse_f(toks[np + 1])?;
                if pi.insert(s, val).is_some() {
                    return Err(err(ln, "duplicate pi line".into()));
                }
                saw_pi = true;
            }
            "v" => {
                let np = parties.ok_or_else(|| err(ln, "v before parties".into()))?;
                if toks.len() != 2 * np + 2 {
                    return Err(err(ln, format!("v needs {} indices and a value", 2 * np)));
                }
                let s: Result<Vec<u8>, _> =
                    toks[1..=np].iter().map(|t| parse_u(t).map(|x| x as u8)).collect();
                let a: Result<Vec<u8>, _> = toks[np + 1..=2 * np]
                    .iter()
                    .map(|t| parse_u(t).map(|x| x as u8))
                    .collect();
                let val = parse_f(toks[2 * np + 1])?;
                if v.insert((s?, a?), val).is_some() {
                    return Err(err(ln, "duplicate v line".into()));
                }
            }
            "c" => {
                let np = parties.ok_or_else(|| err(ln, "c before parties".into()))?;
                if toks.len() != np + 2 {
                    return Err(err(ln, format!("c needs {np} indices and a value")));
                }
                let s: Result<Vec<u8>, _> =
                    toks[1..=np].iter().map(|t| parse_u(t).map(|x| x as u8)).collect();
                let val = parse_f(toks[np + 1])?;
                if full.insert(s?, val).is_some() {
                    return Err(err(ln, "duplicate c line".into()));
                }
            }
            "m" => {
                if toks.len() != 4 {
                    return Err(err(ln, "m needs party, setting, value".into()));
                }
                let p = parse_u(toks[1])? as u8;
                let s = parse_u(toks[2])? as u8;
                let val = parse_f(toks[3])?;
                if marginals.insert((p, s), val).is_some() {
                    return Err(err(ln, "duplicate m line".into()));
                }
            }
            "const" => {
                constant = parse_f(toks.get(1).ok_or_else(|| err(ln, "missing value".into()))?)?;
            }
            other => return Err(err(ln, format!("unknown directive '{other}'"))),
        }
    }

    let num_parties = parties.ok_or_else(|| GameError::Parse(0, "missing 'parties' line".into()))?;
    let settings = settings.ok_or_else(|| GameError::Parse(0, "missing 'settings' line".into()))?;
    if settings.len() != num_parties {
        return Err(GameError::Invalid("settings arity != parties".into()));
    }
    let mut outcomes: Vec<Vec<usize>> = settings
        .iter()
        .map(|&ns| vec![uniform_outcomes.unwrap_or(2); ns])
        .collect();
    for (p, s, m) in outcome_lines {
        if p >= num_parties || s >= settings[p] {
            return Err(GameError::Invalid(format!("outcomes index ({p},{s}) out of range")));
        }
        outcomes[p][s] = m;
    }

    let form = match form_kind.ok_or_else(|| GameError::Parse(0, "missing 'form' line".into()))? {
        "probability" => {
            if !saw_pi {
                let count: usize = settings.iter().product();
                let p = 1.0 / count as f64;
                let mut stack = vec![Vec::new()];
                for &ns in &settings {
                    let mut next = Vec::new();
                    for prefix in stack {
                        for s in 0..ns {
                            let mut t: Vec<u8> = prefix.clone();
                            t.push(s as u8);
                            next.push(t);
                        }
                    }
                    stack = next;
                }
                for t in stack {
                    pi.insert(t, p);
                }
                report.notes.push("pi omitted; uniform distribution applied".into());
            }
            GameForm::Probability { pi, v }
        }
        _ => GameForm::Correlator {
            mode: mode.unwrap_or(Mode::Observable),
            full,
            marginals,
            constant,
        },
    };

    let game = Game { name, num_parties, settings, outcomes, form };
    game.validate()?;
    Ok((game, report))
}

pub fn serialize_game(g: &Game) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "game {}", g.name);
    match &g.form {
        GameForm::Probability { .. } => {
            let _ = writeln!(out, "form probability");
        }
        GameForm::Correlator { mode, .. } => {
            let _ = writeln!(out, "form correlator");
            let m = match mode {
                Mode::Observable => "observable",
                Mode::Projector => "projector",
            };
            let _ = writeln!(out, "mode {m}");
        }
    }
    let _ = writeln!(out, "parties {}", g.num_parties);
    let s_list: Vec<String> = g.settings.iter().map(|s| s.to_string()).collect();
    let _ = writeln!(out, "settings {}", s_list.join(" "));
    for (p, row) in g.outcomes.iter().enumerate() {
        for (s, m) in row.iter().enumerate() {
            let _ = writeln!(out, "outcomes {p} {s} {m}");
        }
    }
    match &g.form {
        GameForm::Probability { pi, v } => {
            for (s, val) in pi {
                let idx: Vec<String> = s.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(out, "pi {} {:.17e}", idx.join(" "), val);
            }
            for ((s, a), val) in v {
                let si: Vec<String> = s.iter().map(|x| x.to_string()).collect();
                let ai: Vec<String> = a.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(out, "v {} {} {:.17e}", si.join(" "), ai.join(" "), val);
            }
        }
        GameForm::Correlator { full, marginals, constant, .. } => {
            for (s, val) in full {
                let idx: Vec<String> = s.iter().map(|x| x.to_string()).collect();
                let _ = writeln!(out, "c {} {:.17e}", idx.join(" "), val);
            }
            for ((p, s), val) in marginals {
                let _ = writeln!(out, "m {p} {s} {:.17e}", val);
            }
            if *constant != 0.0 {
                let _ = writeln!(out, "const {:.17e}", constant);
            }
        }
    }
    out
}
