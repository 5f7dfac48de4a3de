//! SDPA sparse format (.dat-s) writer and reader.
//!
//! The format describes min c.x s.t. sum_i x_i F_i - F0 >= 0, so the
//! F0 stored on disk is the negation of ours (we keep F0 + sum x_k Fk >= 0).
//! Standard-form problems are translated to the inequality form before
//! export; the reader always produces an inequality-form problem.

use std::fmt::Write as _;
use std::path::Path;

use super::problem::{SdpError, SdpForm, SdpProblem, SparseSym};

fn fmt_val(v: f64) -> String {
    // 17 significant digits round-trips every f64 exactly
    format!("{v:.16e}")
}

pub fn write_sdpa_string(problem: &SdpProblem) -> Result<String, SdpError> {
    problem.validate()?;
    let p = match problem.form {
        SdpForm::Inequality => problem.clone(),
        SdpForm::Standard => problem.translate(),
    };
    let mut out = String::new();
    writeln!(out, "{}", p.constraints.len()).unwrap();
    writeln!(out, "{}", p.block_sizes.len()).unwrap();
    let sizes: Vec<String> = p.block_sizes.iter().map(|s| s.to_string()).collect();
    writeln!(out, "{}", sizes.join(" ")).unwrap();
    let costs: Vec<String> = p.scalars.iter().map(|&v| fmt_val(v)).collect();
    writeln!(out, "{}", costs.join(" ")).unwrap();

    let layout = super::problem::BlockLayout::new(&p.block_sizes);
    let mut emit = |k: usize, m: &SparseSym, negate: bool| {
        let mut mm = m.clone();
        mm.normalize();
        for &(i, j, v) in &mm.entries {
            let (b, li) = layout.locate(i);
            let (_, lj) = layout.locate(j);
            let v = if negate { -v } else { v };
            writeln!(out, "{} {} {} {} {}", k, b + 1, li + 1, lj + 1, fmt_val(v)).unwrap();
        }
    };
    emit(0, &p.cost_matrix, true);
    let constraints = p.constraints.clone();
    for (k, f) in constraints.iter().enumerate() {
        emit(k + 1, f, false);
    }
    Ok(out)
}

pub fn export_sdpa(problem: &SdpProblem, path: &Path) -> Result<(), SdpError> {
    let s = write_sdpa_string(problem)?;
    std::fs::write(path, s)?;
    Ok(())
}

pub fn parse_sdpa(text: &str) -> Result<SdpProblem, SdpError> {
    // Skip comment lines ("..." title lines or lines starting with * or ")
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('*') && !t.starts_with('"')
        });

    let mut next = |what: &str| -> Result<(usize, &str), SdpError> {
        lines
            .next()
            .map(|(n, l)| (n + 1, l))
            .ok_or_else(|| SdpError::SdpaParse(0, format!("missing {what}")))
    };

    let (ln, l) = next("constraint count")?;
    let m: usize = l
        .trim()
        .split_whitespace()
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| SdpError::SdpaParse(ln, "bad constraint count".into()))?;

    let (ln, l) = next("block count")?;
    let nblocks: usize = l
        .trim()
        .split_whitespace()
        .next()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| SdpError::SdpaParse(ln, "bad block count".into()))?;

    let (ln, l) = next("block sizes")?;
    let sizes: Vec<usize> = l
        .split(|c: char| c.is_whitespace() || c == ',' || c == '(' || c == ')' || c == '{' || c == '}')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<i64>()
                .map(|v| v.unsigned_abs() as usize)
                .map_err(|_| SdpError::SdpaParse(ln, format!("bad block size '{t}'")))
        })
        .collect::<Result<_, _>>()?;
    if sizes.len() != nblocks {
        return Err(SdpError::SdpaParse(
            ln,
            format!("expected {nblocks} block sizes, got {}", sizes.len()),
        ));
    }
    let n: usize = sizes.iter().sum();

    let (ln, l) = next("cost vector")?;
    let scalars: Vec<f64> = l
        .split(|c: char| c.is_whitespace() || c == ',' || c == '(' || c == ')' || c == '{' || c == '}')
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| SdpError::SdpaParse(ln, format!("bad cost '{t}'")))
        })
        .collect::<Result<_, _>>()?;
    if scalars.len() != m {
        return Err(SdpError::SdpaParse(
            ln,
            format!("expected {m} costs, got {}", scalars.len()),
        ));
    }

    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0usize, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();

    let mut f0 = SparseSym::new(n);
    let mut fs: Vec<SparseSym> = (0..m).map(|_| SparseSym::new(n)).collect();
    for (n0, line) in lines {
        let ln = n0 + 1;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 5 {
            return Err(SdpError::SdpaParse(ln, "expected 5 fields".into()));
        }
        let k: usize = toks[0]
            .parse()
            .map_err(|_| SdpError::SdpaParse(ln, "bad matrix index".into()))?;
        let blk: usize = toks[1]
            .parse()
            .map_err(|_| SdpError::SdpaParse(ln, "bad block index".into()))?;
        let i: usize = toks[2]
            .parse()
            .map_err(|_| SdpError::SdpaParse(ln, "bad row".into()))?;
        let j: usize = toks[3]
            .parse()
            .map_err(|_| SdpError::SdpaParse(ln, "bad col".into()))?;
        let v: f64 = toks[4]
            .parse()
            .map_err(|_| SdpError::SdpaParse(ln, "bad value".into()))?;
        if k > m || blk == 0 || blk > nblocks {
            return Err(SdpError::SdpaParse(ln, "index out of range".into()));
        }
        if i == 0 || j == 0 || i > sizes[blk - 1] || j > sizes[blk - 1] {
            return Err(SdpError::SdpaParse(ln, "entry out of block range".into()));
        }
        let gi = offsets[blk - 1] + i - 1;
        let gj = offsets[blk - 1] + j - 1;
        if k == 0 {
            f0.push(gi, gj, -v);
        } else {
            fs[k - 1].push(gi, gj, v);
        }
    }

    let p = SdpProblem {
        form: SdpForm::Inequality,
        block_sizes: sizes,
        cost_matrix: f0,
        constraints: fs,
        scalars,
    };
    p.validate()?;
    Ok(p)
}

pub fn read_sdpa(path: &Path) -> Result<SdpProblem, SdpError> {
    let text = std::fs::read_to_string(path)?;
    parse_sdpa(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem() -> SdpProblem {
        let mut f0 = SparseSym::new(1);
        f0.push(0, 0, -2.5);
        let mut f1 = SparseSym::new(1);
        f1.push(0, 0, 1.0);
        SdpProblem {
            form: SdpForm::Inequality,
            block_sizes: vec![1],
            cost_matrix: f0,
            constraints: vec![f1],
            scalars: vec![1.0],
        }
    }

    #[test]
    fn trivial_export_is_five_lines_and_deterministic() {
        let s1 = write_sdpa_string(&scalar_problem()).unwrap();
        let s2 = write_sdpa_string(&scalar_problem()).unwrap();
        assert_eq!(s1, s2);
        assert_eq!(s1.lines().count(), 6); // 4 header lines + F0 entry + F1 entry
        let mut lines = s1.lines();
        assert_eq!(lines.next(), Some("1"));
        assert_eq!(lines.next(), Some("1"));
        assert_eq!(lines.next(), Some("1"));
    }

    #[test]
    fn round_trip_equal() {
        let mut p = scalar_problem();
        p.normalize();
        let s = write_sdpa_string(&p).unwrap();
        let q = parse_sdpa(&s).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn round_trip_multiblock_exact_bits() {
        let mut f0 = SparseSym::new(5);
        f0.push(0, 1, std::f64::consts::SQRT_2);
        f0.push(2, 2, -1.0 / 3.0);
        f0.push(3, 4, 1e-17);
        let mut f1 = SparseSym::new(5);
        f1.push(0, 0, 0.1);
        f1.push(3, 3, -7.25);
        let mut f2 = SparseSym::new(5);
        f2.push(4, 4, std::f64::consts::PI);
        let mut p = SdpProblem {
            form: SdpForm::Inequality,
            block_sizes: vec![2, 1, 2],
            cost_matrix: f0,
            constraints: vec![f1, f2],
            scalars: vec![1.0 / 7.0, -2.0],
        };
        p.normalize();
        let s = write_sdpa_string(&p).unwrap();
        let q = parse_sdpa(&s).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn standard_form_exports_via_translate() {
        let mut p = scalar_problem();
        p.form = SdpForm::Standard;
        let s = write_sdpa_string(&p).unwrap();
        let q = parse_sdpa(&s).unwrap();
        assert_eq!(q.form, SdpForm::Inequality);
        assert_eq!(q.cost_matrix, p.cost_matrix);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "1\n1\n1\n1.0\n1 1 1 1 not_a_number\n";
        match parse_sdpa(text) {
            Err(SdpError::SdpaParse(5, _)) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }
}
