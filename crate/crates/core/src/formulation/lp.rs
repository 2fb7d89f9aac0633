//! CPLEX LP text: writer and a reader for the subset the writer emits
//! (plus the usual alternative spellings of senses and section headers).

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::formulation::{Constraint, MilpModel, Sense, VarKind, Variable};

const LINE_WIDTH: usize = 100;

struct Wrapper {
    out: String,
    line_len: usize,
}

impl Wrapper {
    fn start(&mut self, head: &str) {
        self.out.push(' ');
        self.out.push_str(head);
        self.line_len = head.len() + 1;
    }

    fn push(&mut self, token: &str) {
        if self.line_len + token.len() + 1 > LINE_WIDTH {
            self.out.push_str("\n  ");
            self.line_len = 2;
        } else {
            self.out.push(' ');
            self.line_len += 1;
        }
        self.out.push_str(token);
        self.line_len += token.len();
    }

    fn end(&mut self) {
        self.out.push('\n');
        self.line_len = 0;
    }
}

fn push_terms(w: &mut Wrapper, model: &MilpModel, terms: &[(usize, f64)]) {
    if terms.is_empty() {
        w.push("0");
        return;
    }
    for (i, c) in terms {
        let sign = if c.is_sign_negative() { "-" } else { "+" };
        w.push(&format!("{sign} {} {}", c.abs(), model.variables[*i].name));
    }
}

fn number(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v}")
    }
}

/// Writes the model as CPLEX LP text. Floats use shortest round-trip
/// formatting, so reading the text back reproduces every coefficient.
pub fn export_lp(model: &MilpModel) -> String {
    let mut w = Wrapper {
        out: String::from("\\ vecop placement model\nMinimize\n"),
        line_len: 0,
    };
    w.start("obj:");
    push_terms(&mut w, model, &model.objective);
    w.end();
    w.out.push_str("Subject To\n");
    for c in &model.constraints {
        w.start(&format!("{}:", c.name));
        if c.terms.is_empty() {
            // keeps the row well-formed when every coefficient vanished
            match model.variables.first() {
                Some(v) => w.push(&format!("0 {}", v.name)),
                None => w.push("0"),
            }
        } else {
            push_terms(&mut w, model, &c.terms);
        }
        w.push(c.sense.as_str());
        w.push(&number(c.rhs));
        w.end();
    }
    w.out.push_str("Bounds\n");
    for v in model.variables.iter().filter(|v| v.kind == VarKind::Continuous) {
        let _ = if v.upper == f64::INFINITY {
            writeln!(w.out, " {} >= {}", v.name, number(v.lower))
        } else {
            writeln!(w.out, " {} <= {} <= {}", number(v.lower), v.name, number(v.upper))
        };
    }
    let binaries: Vec<&Variable> = model.variables.iter().filter(|v| v.kind == VarKind::Binary).collect();
    if !binaries.is_empty() {
        w.out.push_str("Binary\n");
        for v in binaries {
            let _ = writeln!(w.out, " {}", v.name);
        }
    }
    w.out.push_str("End\n");
    w.out
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Name(String),
    Num(f64),
    Sign(f64),
    Colon,
    Sense(Sense),
}

fn tokenize(text: &str, line: usize, out: &mut Vec<(Tok, usize)>) -> Result<()> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let is_special = |c: char| c.is_whitespace() || matches!(c, ':' | '+' | '-' | '<' | '>' | '=');
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == ':' {
            out.push((Tok::Colon, line));
            i += 1;
        } else if c == '+' || c == '-' {
            out.push((Tok::Sign(if c == '-' { -1.0 } else { 1.0 }), line));
            i += 1;
        } else if matches!(c, '<' | '>' | '=') {
            let mut op = String::from(c);
            if i + 1 < chars.len() && matches!(chars[i + 1], '<' | '>' | '=') {
                op.push(chars[i + 1]);
                i += 1;
            }
            i += 1;
            let sense = match op.as_str() {
                "<" | "<=" | "=<" => Sense::Le,
                ">" | ">=" | "=>" => Sense::Ge,
                "=" | "==" => Sense::Eq,
                _ => {
                    return Err(Error::LpParse {
                        line,
                        message: format!("unknown operator {op:?}"),
                    })
                }
            };
            out.push((Tok::Sense(sense), line));
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && matches!(chars[i], 'e' | 'E') {
                let mut j = i + 1;
                if j < chars.len() && matches!(chars[j], '+' | '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let v = s.parse::<f64>().map_err(|_| Error::LpParse {
                line,
                message: format!("bad number {s:?}"),
            })?;
            out.push((Tok::Num(v), line));
        } else {
            let start = i;
            while i < chars.len() && !is_special(chars[i]) {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            match s.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => out.push((Tok::Num(f64::INFINITY), line)),
                _ => out.push((Tok::Name(s), line)),
            }
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Objective,
    Constraints,
    Bounds,
    Binary,
    End,
}

fn section_header(line: &str) -> Option<Section> {
    let lower = line.trim().to_ascii_lowercase();
    let compact: String = lower.split_whitespace().collect::<Vec<_>>().join(" ");
    match compact.as_str() {
        "minimize" | "minimise" | "minimum" | "min" => Some(Section::Objective),
        "subject to" | "such that" | "st" | "s.t." => Some(Section::Constraints),
        "bounds" | "bound" => Some(Section::Bounds),
        "binary" | "binaries" | "bin" => Some(Section::Binary),
        "end" => Some(Section::End),
        _ => None,
    }
}

struct Reader {
    model: MilpModel,
    index: BTreeMap<String, usize>,
}

impl Reader {
    fn var(&mut self, name: &str) -> usize {
        if let Some(i) = self.index.get(name) {
            return *i;
        }
        let i = self.model.variables.len();
        self.model.variables.push(Variable {
            name: name.to_string(),
            kind: VarKind::Continuous,
            lower: 0.0,
            upper: f64::INFINITY,
        });
        self.index.insert(name.to_string(), i);
        i
    }

    /// Parses `[sign] [coef] name` terms and bare constants until a sense
    /// token or the end of `toks`; returns the terms and the stop position.
    fn expression(&mut self, toks: &[(Tok, usize)], mut pos: usize) -> Result<(Vec<(usize, f64)>, usize)> {
        let mut terms = Vec::new();
        while pos < toks.len() {
            let mut sign = 1.0;
            let mut saw_sign = false;
            while let Some((Tok::Sign(s), _)) = toks.get(pos) {
                sign *= s;
                saw_sign = true;
                pos += 1;
            }
            match toks.get(pos) {
                Some((Tok::Num(v), _)) => {
                    let coef = sign * v;
                    pos += 1;
                    if let Some((Tok::Name(n), _)) = toks.get(pos) {
                        let i = self.var(n);
                        terms.push((i, coef));
                        pos += 1;
                    } else if coef != 0.0 {
                        return Err(Error::LpParse {
                            line: toks[pos - 1].1,
                            message: "constant terms are not supported".into(),
                        });
                    }
                }
                Some((Tok::Name(n), _)) => {
                    let i = self.var(n);
                    terms.push((i, sign));
                    pos += 1;
                }
                Some((Tok::Sense(_), line)) if saw_sign => {
                    return Err(Error::LpParse {
                        line: *line,
                        message: "dangling sign".into(),
                    })
                }
                Some((Tok::Sense(_), _)) => break,
                Some((t, line)) => {
                    return Err(Error::LpParse {
                        line: *line,
                        message: format!("unexpected token {t:?}"),
                    })
                }
                None => {
                    return Err(Error::LpParse {
                        line: toks.last().map(|t| t.1).unwrap_or(0),
                        message: "unexpected end of expression".into(),
                    })
                }
            }
        }
        Ok((terms, pos))
    }
}

fn signed_number(toks: &[(Tok, usize)], mut pos: usize, line: usize) -> Result<(f64, usize)> {
    let mut sign = 1.0;
    while let Some((Tok::Sign(s), _)) = toks.get(pos) {
        sign *= s;
        pos += 1;
    }
    match toks.get(pos) {
        Some((Tok::Num(v), _)) => Ok((sign * v, pos + 1)),
        _ => Err(Error::LpParse {
            line,
            message: "expected a number".into(),
        }),
    }
}

fn drop_label(toks: &[(Tok, usize)]) -> (Option<String>, usize) {
    match (toks.first(), toks.get(1)) {
        (Some((Tok::Name(n), _)), Some((Tok::Colon, _))) => (Some(n.clone()), 2),
        _ => (None, 0),
    }
}

/// Parses CPLEX LP text produced by [`export_lp`] (or hand-written in the
/// same dialect). Errors carry 1-based line numbers.
pub fn read_lp(text: &str) -> Result<MilpModel> {
    let mut section = Section::None;
    let mut objective_toks = Vec::new();
    let mut constraint_toks = Vec::new();
    let mut bound_lines: Vec<(Vec<(Tok, usize)>, usize)> = Vec::new();
    let mut binary_toks = Vec::new();
    let mut last_line = 0;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        last_line = line;
        let content = raw.split('\\').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        if let Some(s) = section_header(content) {
            if s == Section::Objective && section != Section::None {
                return Err(Error::LpParse {
                    line,
                    message: "objective section out of order".into(),
                });
            }
            section = s;
            continue;
        }
        let lower = content.trim().to_ascii_lowercase();
        if lower.starts_with("maximize") || lower.starts_with("maximise") || lower == "max" {
            return Err(Error::LpParse {
                line,
                message: "only minimization models are supported".into(),
            });
        }
        if matches!(lower.as_str(), "general" | "generals" | "gen" | "semi-continuous" | "sos") {
            return Err(Error::LpParse {
                line,
                message: format!("unsupported section {:?}", content.trim()),
            });
        }
        match section {
            Section::None => {
                return Err(Error::LpParse {
                    line,
                    message: "content before the objective section".into(),
                })
            }
            Section::Objective => tokenize(content, line, &mut objective_toks)?,
            Section::Constraints => tokenize(content, line, &mut constraint_toks)?,
            Section::Bounds => {
                let mut toks = Vec::new();
                tokenize(content, line, &mut toks)?;
                bound_lines.push((toks, line));
            }
            Section::Binary => tokenize(content, line, &mut binary_toks)?,
            Section::End => {
                return Err(Error::LpParse {
                    line,
                    message: "content after End".into(),
                })
            }
        }
    }
    if section != Section::End {
        return Err(Error::LpParse {
            line: last_line,
            message: "missing End".into(),
        });
    }

    let mut r = Reader {
        model: MilpModel::default(),
        index: BTreeMap::new(),
    };

    let (_, start) = drop_label(&objective_toks);
    let (objective, stop) = r.expression(&objective_toks, start)?;
    if stop != objective_toks.len() {
        return Err(Error::LpParse {
            line: objective_toks[stop].1,
            message: "objective cannot carry a sense".into(),
        });
    }
    r.model.objective = objective;

    let mut pos = 0;
    let mut unnamed = 0;
    while pos < constraint_toks.len() {
        let line = constraint_toks[pos].1;
        let (label, skip) = drop_label(&constraint_toks[pos..]);
        pos += skip;
        let (terms, stop) = r.expression(&constraint_toks, pos)?;
        let sense = match constraint_toks.get(stop) {
            Some((Tok::Sense(s), _)) => *s,
            _ => {
                return Err(Error::LpParse {
                    line,
                    message: "constraint without a sense".into(),
                })
            }
        };
        let (rhs, next) = signed_number(&constraint_toks, stop + 1, line)?;
        pos = next;
        let name = label.unwrap_or_else(|| {
            unnamed += 1;
            format!("R{unnamed}")
        });
        r.model.constraints.push(Constraint {
            name,
            terms: terms.into_iter().filter(|(_, c)| *c != 0.0).collect(),
            sense,
            rhs,
        });
    }

    for (toks, line) in &bound_lines {
        apply_bound(&mut r, toks, *line)?;
    }

    for (t, line) in &binary_toks {
        match t {
            Tok::Name(n) => {
                let i = r.var(n);
                let v = &mut r.model.variables[i];
                v.kind = VarKind::Binary;
                v.lower = 0.0;
                v.upper = 1.0;
            }
            other => {
                return Err(Error::LpParse {
                    line: *line,
                    message: format!("expected a variable name, got {other:?}"),
                })
            }
        }
    }
    Ok(r.model)
}

fn apply_bound(r: &mut Reader, toks: &[(Tok, usize)], line: usize) -> Result<()> {
    let bad = || Error::LpParse {
        line,
        message: "malformed bound".into(),
    };
    if let [(Tok::Name(n), _), (Tok::Name(free), _)] = toks {
        if free.eq_ignore_ascii_case("free") {
            let i = r.var(n);
            r.model.variables[i].lower = f64::NEG_INFINITY;
            r.model.variables[i].upper = f64::INFINITY;
            return Ok(());
        }
        return Err(bad());
    }
    if let Some((Tok::Name(n), _)) = toks.first() {
        // x <op> v
        let sense = match toks.get(1) {
            Some((Tok::Sense(s), _)) => *s,
            _ => return Err(bad()),
        };
        let (v, end) = signed_number(toks, 2, line)?;
        if end != toks.len() {
            return Err(bad());
        }
        let i = r.var(n);
        let var = &mut r.model.variables[i];
        match sense {
            Sense::Le => var.upper = v,
            Sense::Ge => var.lower = v,
            Sense::Eq => {
                var.lower = v;
                var.upper = v;
            }
        }
        return Ok(());
    }
    // lo <op> x [<op> hi]
    let (first, pos) = signed_number(toks, 0, line)?;
    let sense = match toks.get(pos) {
        Some((Tok::Sense(s), _)) => *s,
        _ => return Err(bad()),
    };
    let name = match toks.get(pos + 1) {
        Some((Tok::Name(n), _)) => n.clone(),
        _ => return Err(bad()),
    };
    let i = r.var(&name);
    let apply = |var: &mut Variable, sense: Sense, v: f64, var_on_left: bool| match (sense, var_on_left) {
        (Sense::Le, false) | (Sense::Ge, true) => var.lower = v,
        (Sense::Ge, false) | (Sense::Le, true) => var.upper = v,
        (Sense::Eq, _) => {
            var.lower = v;
            var.upper = v;
        }
    };
    apply(&mut r.model.variables[i], sense, first, false);
    if pos + 2 < toks.len() {
        let sense2 = match toks.get(pos + 2) {
            Some((Tok::Sense(s), _)) => *s,
            _ => return Err(bad()),
        };
        let (second, end) = signed_number(toks, pos + 3, line)?;
        if end != toks.len() {
            return Err(bad());
        }
        apply(&mut r.model.variables[i], sense2, second, true);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::{formulate, Instance};
    use crate::scenario::{default_scenario, ObjectiveWeights};

    #[test]
    fn empty_model_is_minimal_text() {
        let text = export_lp(&MilpModel::default());
        assert!(text.contains("Minimize\n obj: 0\n"));
        assert!(text.ends_with("End\n"));
        let back = read_lp(&text).unwrap();
        assert!(back.structurally_equal(&MilpModel::default(), 1e-12));
    }

    #[test]
    fn binaries_are_listed() {
        let inst = Instance::new(default_scenario()).unwrap();
        let m = formulate(&inst, &ObjectiveWeights::power_only()).unwrap();
        let text = export_lp(&m);
        let binary = text.split("Binary\n").nth(1).unwrap();
        assert!(binary.lines().any(|l| l.trim() == "y_d1_v1"));
        assert!(!binary.lines().any(|l| l.trim() == "x_d1_v1"));
        assert!(text.lines().all(|l| l.len() <= 510));
    }

    #[test]
    fn round_trip_default_model() {
        let inst = Instance::new(default_scenario()).unwrap();
        let m = formulate(&inst, &ObjectiveWeights::custom(0.04, 700.0)).unwrap();
        let back = read_lp(&export_lp(&m)).unwrap();
        assert!(m.structurally_equal(&back, 1e-12));
        let mut tweaked = back.clone();
        tweaked.constraints[0].rhs += 1e-6;
        assert!(!m.structurally_equal(&tweaked, 1e-12));
    }

    #[test]
    fn hand_written_dialect() {
        let text = "\\ comment\nMINIMIZE\n obj: 2 x + 3.5e-1 y - z\nsubject to\n c1: x + y >= 1\n c2: x - 2 z =< -1.5\n\
                    bounds\n -inf <= z <= 4\n x <= 10\n w free\nbinaries\n y\nend\n";
        let m = read_lp(text).unwrap();
        let idx = m.variable_index();
        assert_eq!(m.variables[idx["y"]].kind, VarKind::Binary);
        assert_eq!(m.variables[idx["z"]].lower, f64::NEG_INFINITY);
        assert_eq!(m.variables[idx["x"]].upper, 10.0);
        assert_eq!(m.constraints[1].rhs, -1.5);
        assert_eq!(m.constraints[1].sense, Sense::Le);
        assert!(m.objective.contains(&(idx["y"], 0.35)));
    }

    #[test]
    fn parse_errors_report_lines() {
        let err = read_lp("Minimize\n obj: x\nSubject To\n c1: x + >= 1\nEnd\n").unwrap_err();
        assert!(matches!(err, Error::LpParse { line: 4, .. }), "{err:?}");
        let err = read_lp("Minimize\n obj: x\n").unwrap_err();
        assert!(matches!(err, Error::LpParse { .. }));
    }
}
