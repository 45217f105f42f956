//! Lexer, parser and static checker for query programs.

use regex::{Regex, RegexBuilder};

use super::ast::*;
use super::RangerError;

const REGEX_SIZE_LIMIT: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(u64),
    Hex(u64),
    Float(f64),
    Str(String),
    Pipe,
    Slash,
    Comma,
    LBracket,
    RBracket,
    Semi,
    Op(CmpOp),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Hex(v) => format!("`{v:#x}`"),
            Tok::Float(v) => format!("`{v:?}`"),
            Tok::Str(s) => format!("string {}", quote(s)),
            Tok::Pipe => "`|`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Comma => "`,`".into(),
            Tok::LBracket => "`[`".into(),
            Tok::RBracket => "`]`".into(),
            Tok::Semi => "`;`".into(),
            Tok::Op(op) => format!("`{}`", op.symbol()),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn perr(position: usize, message: impl Into<String>) -> RangerError {
    RangerError::Parse { position, message: message.into() }
}

fn is_word(c: u8) -> bool {
    c.is_ascii_alphanumeric() || c == b'_'
}

fn lex_number(s: &[u8], start: usize) -> Result<(Tok, usize), RangerError> {
    let text = |a: usize, b: usize| std::str::from_utf8(&s[a..b]).unwrap();
    if s[start] == b'0' && matches!(s.get(start + 1), Some(b'x' | b'X')) && s.get(start + 2).is_some_and(u8::is_ascii_hexdigit) {
        let mut i = start + 2;
        while i < s.len() && s[i].is_ascii_hexdigit() {
            i += 1;
        }
        if i < s.len() && is_word(s[i]) {
            return Err(perr(start, format!("malformed hex literal `{}`", text(start, i + 1))));
        }
        let v = u64::from_str_radix(text(start + 2, i), 16)
            .map_err(|_| perr(start, "hex literal does not fit in 64 bits"))?;
        return Ok((Tok::Hex(v), i));
    }
    let mut i = start;
    while i < s.len() && is_word(s[i]) {
        i += 1;
    }
    let run = text(start, i);
    let all_digits = run.bytes().all(|c| c.is_ascii_digit());
    let mut end = i;
    let mut float = false;
    if all_digits && s.get(i) == Some(&b'.') && s.get(i + 1).is_some_and(u8::is_ascii_digit) {
        float = true;
        end = i + 1;
        while end < s.len() && s[end].is_ascii_digit() {
            end += 1;
        }
        if matches!(s.get(end), Some(b'e' | b'E')) {
            let mut j = end + 1;
            if matches!(s.get(j), Some(b'+' | b'-')) {
                j += 1;
            }
            if s.get(j).is_some_and(u8::is_ascii_digit) {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                end = j;
            }
        }
    } else if !all_digits {
        let bytes = run.as_bytes();
        let e = bytes.iter().position(|c| *c == b'e' || *c == b'E');
        let digits_then_e = e.is_some_and(|e| e > 0 && bytes[..e].iter().all(u8::is_ascii_digit));
        if digits_then_e {
            let e = e.unwrap();
            if e + 1 < bytes.len() && bytes[e + 1..].iter().all(u8::is_ascii_digit) {
                float = true;
            } else if e + 1 == bytes.len()
                && matches!(s.get(i), Some(b'+' | b'-'))
                && s.get(i + 1).is_some_and(u8::is_ascii_digit)
            {
                float = true;
                end = i + 1;
                while end < s.len() && s[end].is_ascii_digit() {
                    end += 1;
                }
            }
        }
        if !float {
            return Ok((Tok::Ident(run.to_string()), i));
        }
    }
    if float {
        let v: f64 = text(start, end).parse().map_err(|_| perr(start, "malformed number"))?;
        if !v.is_finite() {
            return Err(perr(start, "number out of range"));
        }
        return Ok((Tok::Float(v), end));
    }
    let v: u64 = run.parse().map_err(|_| perr(start, "integer does not fit in 64 bits"))?;
    Ok((Tok::Int(v), i))
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, RangerError> {
    let s = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < s.len() {
        let c = s[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let single = match c {
            b'|' => Some(Tok::Pipe),
            b'/' => Some(Tok::Slash),
            b',' => Some(Tok::Comma),
            b'[' => Some(Tok::LBracket),
            b']' => Some(Tok::RBracket),
            b';' => Some(Tok::Semi),
            _ => None,
        };
        if let Some(t) = single {
            out.push((t, start));
            i += 1;
            continue;
        }
        match c {
            b'=' => {
                i += if s.get(i + 1) == Some(&b'=') { 2 } else { 1 };
                out.push((Tok::Op(CmpOp::Eq), start));
            }
            b'!' if s.get(i + 1) == Some(&b'=') => {
                i += 2;
                out.push((Tok::Op(CmpOp::Ne), start));
            }
            b'<' | b'>' => {
                let eq = s.get(i + 1) == Some(&b'=');
                let op = match (c, eq) {
                    (b'<', false) => CmpOp::Lt,
                    (b'<', true) => CmpOp::Le,
                    (_, false) => CmpOp::Gt,
                    (_, true) => CmpOp::Ge,
                };
                i += if eq { 2 } else { 1 };
                out.push((Tok::Op(op), start));
            }
            b'"' => {
                let mut buf = String::new();
                i += 1;
                loop {
                    let Some(&ch) = s.get(i) else {
                        return Err(perr(start, "unterminated string literal"));
                    };
                    match ch {
                        b'"' => {
                            i += 1;
                            break;
                        }
                        b'\\' => {
                            let esc = s.get(i + 1).copied();
                            buf.push(match esc {
                                Some(b'"') => '"',
                                Some(b'\\') => '\\',
                                Some(b'n') => '\n',
                                Some(b't') => '\t',
                                _ => return Err(perr(i, "unknown escape in string literal")),
                            });
                            i += 2;
                        }
                        _ => {
                            let rest = &src[i..];
                            let ch = rest.chars().next().unwrap();
                            buf.push(ch);
                            i += ch.len_utf8();
                        }
                    }
                }
                out.push((Tok::Str(buf), start));
            }
            b'-' if s.get(i + 1).is_some_and(u8::is_ascii_digit) => {
                let (tok, end) = lex_number(s, i + 1)?;
                let v = match tok {
                    Tok::Int(v) => v as f64,
                    Tok::Float(v) => v,
                    _ => return Err(perr(start, "only decimal numbers may be negative")),
                };
                out.push((Tok::Float(-v), start));
                i = end;
            }
            c if c.is_ascii_digit() => {
                let (tok, end) = lex_number(s, i)?;
                out.push((tok, start));
                i = end;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < s.len() && is_word(s[i]) {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
            }
            _ => {
                let rest = &src[i..];
                let ch = rest.chars().next().unwrap();
                let op = match ch {
                    '≠' => Some(CmpOp::Ne),
                    '≤' => Some(CmpOp::Le),
                    '≥' => Some(CmpOp::Ge),
                    _ => None,
                };
                match op {
                    Some(op) => {
                        out.push((Tok::Op(op), start));
                        i += ch.len_utf8();
                    }
                    None => return Err(perr(start, format!("unexpected character `{ch}`"))),
                }
            }
        }
    }
    out.push((Tok::Eof, src.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

const STAGE_KEYWORDS: &str = "filter, group_by, aggregate, sort, limit, extract or emit";

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.at].clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expected(&self, what: &str) -> RangerError {
        perr(self.pos(), format!("expected {what}, found {}", self.peek().describe()))
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), RangerError> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            Err(self.expected(what))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), RangerError> {
        match self.peek().clone() {
            Tok::Ident(s) => Ok((s, self.bump().1)),
            _ => Err(self.expected(what)),
        }
    }

    fn name(&mut self, what: &str) -> Result<String, RangerError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            Tok::Int(v) => {
                self.bump();
                Ok(v.to_string())
            }
            _ => Err(self.expected(what)),
        }
    }

    fn column(&mut self) -> Result<Column, RangerError> {
        let (name, _) = self.ident("a column name")?;
        Column::from_name(&name).ok_or_else(|| unknown_column(&name))
    }

    fn literal(&mut self) -> Result<Literal, RangerError> {
        let lit = match self.peek().clone() {
            Tok::Int(v) => Literal::Int(v),
            Tok::Hex(v) => Literal::Hex(v),
            Tok::Float(v) => Literal::Float(v),
            Tok::Str(s) => Literal::Str(s),
            Tok::Ident(s) if s == "null" => Literal::Null,
            _ => return Err(self.expected("a literal (number, 0x hex, \"string\" or null)")),
        };
        self.bump();
        Ok(lit)
    }

    fn source(&mut self) -> Result<Source, RangerError> {
        let (kw, pos) = match self.peek().clone() {
            Tok::Ident(s) if s == "from" || s == "metadata" => (s, self.bump().1),
            _ => return Err(self.expected("`from` or `metadata`")),
        };
        let first = self.name("a trace name such as lbm/lru")?;
        let (workload, policy) = if *self.peek() == Tok::Slash {
            self.bump();
            (first, self.name("a policy name after `/`")?)
        } else {
            match first.split_once("_evictions_") {
                Some((w, p)) if !w.is_empty() && !p.is_empty() => (w.to_string(), p.to_string()),
                _ => return Err(perr(pos, format!("expected `workload/policy` after `{kw}`, found `{first}`"))),
            }
        };
        Ok(if kw == "from" { Source::Trace { workload, policy } } else { Source::Metadata { workload, policy } })
    }

    fn stage(&mut self, kw: &str) -> Result<Stage, RangerError> {
        Ok(match kw {
            "filter" => {
                let column = self.column()?;
                match self.peek().clone() {
                    Tok::Op(op) => {
                        self.bump();
                        Stage::Filter { column, op, value: self.literal()? }
                    }
                    Tok::Ident(s) if s == "in" => {
                        self.bump();
                        self.expect(Tok::LBracket, "`[`")?;
                        let mut values = vec![self.literal()?];
                        while *self.peek() == Tok::Comma {
                            self.bump();
                            values.push(self.literal()?);
                        }
                        self.expect(Tok::RBracket, "`,` or `]`")?;
                        Stage::FilterIn { column, values }
                    }
                    _ => return Err(self.expected("a comparison (=, !=, <, <=, >, >=) or `in`")),
                }
            }
            "group_by" => Stage::GroupBy(self.column()?),
            "aggregate" => {
                let mut aggs = vec![self.aggregate()?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    aggs.push(self.aggregate()?);
                }
                Stage::Aggregate(aggs)
            }
            "sort" => {
                let (name, _) = self.ident("a sort key (column, key, value or count)")?;
                let key = match name.as_str() {
                    "key" => SortKey::Key,
                    "value" => SortKey::Value,
                    "count" => SortKey::Count,
                    other => SortKey::Column(Column::from_name(other).ok_or_else(|| unknown_column(other))?),
                };
                let descending = match self.peek().clone() {
                    Tok::Ident(s) if s == "asc" || s == "desc" => {
                        self.bump();
                        s == "desc"
                    }
                    _ => false,
                };
                Stage::Sort { key, descending }
            }
            "limit" => match self.peek().clone() {
                Tok::Int(n) => {
                    self.bump();
                    Stage::Limit(usize::try_from(n).unwrap_or(usize::MAX))
                }
                _ => return Err(self.expected("a row count")),
            },
            "extract" => match self.peek().clone() {
                Tok::Str(re) => {
                    self.bump();
                    Stage::Extract(re)
                }
                _ => return Err(self.expected("a quoted regular expression")),
            },
            other => return Err(perr(self.toks[self.at - 1].1, format!("expected {STAGE_KEYWORDS}, found `{other}`"))),
        })
    }

    fn aggregate(&mut self) -> Result<Aggregate, RangerError> {
        let (name, pos) = self.ident("an aggregate (count, sum, mean, std, min, max, rate_pct)")?;
        let func = AggFn::from_name(&name)
            .ok_or_else(|| perr(pos, format!("expected an aggregate (count, sum, mean, std, min, max, rate_pct), found `{name}`")))?;
        // `count` alone counts rows; any other function names its column
        let column = if func != AggFn::Count || matches!(self.peek(), Tok::Ident(_)) {
            Some(self.column()?)
        } else {
            None
        };
        Ok(Aggregate { func, column })
    }

    fn program(&mut self) -> Result<(QueryProgram, Vec<usize>), RangerError> {
        let source = self.source()?;
        let mut stages = Vec::new();
        let mut positions = Vec::new();
        loop {
            self.expect(Tok::Pipe, "`|` followed by a stage")?;
            let (kw, pos) = self.ident(STAGE_KEYWORDS)?;
            if kw == "emit" {
                let emit = match self.peek().clone() {
                    Tok::Str(s) => {
                        self.bump();
                        s
                    }
                    _ => return Err(self.expected("a quoted emit template")),
                };
                positions.push(pos);
                return Ok((QueryProgram { source, stages, emit }, positions));
            }
            stages.push(self.stage(&kw)?);
            positions.push(pos);
        }
    }
}

fn unknown_column(name: &str) -> RangerError {
    let known: Vec<&str> = Column::ALL.iter().map(|c| c.name()).collect();
    RangerError::Schema {
        column: name.to_string(),
        message: format!("unknown column `{name}`; available columns: {}", known.join(", ")),
    }
}

/// Parses one or more `;`-separated programs and checks each one.
pub fn parse_script(text: &str) -> Result<Script, RangerError> {
    let mut p = Parser { toks: lex(text)?, at: 0 };
    let mut programs = Vec::new();
    loop {
        let (prog, positions) = p.program()?;
        check_program(&prog).map_err(|(stage, e)| match e {
            RangerError::Parse { message, .. } => RangerError::Parse { position: positions[stage], message },
            other => other,
        })?;
        programs.push(prog);
        match p.peek() {
            Tok::Semi => {
                p.bump();
                if *p.peek() == Tok::Eof {
                    break;
                }
            }
            Tok::Eof => break,
            _ => return Err(p.expected("`|`, `;` or end of input")),
        }
    }
    Ok(Script { programs })
}

/// Parses exactly one program.
pub fn parse_program(text: &str) -> Result<QueryProgram, RangerError> {
    let mut script = parse_script(text)?;
    if script.programs.len() != 1 {
        return Err(perr(0, format!("expected one program, found {}", script.programs.len())));
    }
    Ok(script.programs.remove(0))
}

/// Intermediate result shape between stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Shape {
    Rows,
    Groups,
    Table { aggs: usize, grouped: bool },
    Text,
    Captured,
}

pub(crate) fn compile_regex(re: &str) -> Result<Regex, String> {
    let compiled = RegexBuilder::new(re)
        .size_limit(REGEX_SIZE_LIMIT)
        .dfa_size_limit(REGEX_SIZE_LIMIT)
        .build()
        .map_err(|e| format!("invalid regex: {e}"))?;
    if compiled.captures_len() != 2 {
        return Err(format!("regex must have exactly one capture group, found {}", compiled.captures_len() - 1));
    }
    Ok(compiled)
}

fn literal_fits(column: Column, op: Option<CmpOp>, lit: &Literal) -> Result<(), String> {
    let ordering = op.is_some_and(|o| !matches!(o, CmpOp::Eq | CmpOp::Ne));
    match (column.kind(), lit) {
        (_, Literal::Null) if ordering => Err("null can only be compared with = or !=".into()),
        (_, Literal::Null) => Ok(()),
        (ColumnKind::Hex, Literal::Hex(_) | Literal::Int(_)) => Ok(()),
        (ColumnKind::Int, Literal::Int(_) | Literal::Hex(_) | Literal::Float(_)) => Ok(()),
        (ColumnKind::Str, Literal::Str(_)) => Ok(()),
        (kind, lit) => Err(format!("column `{column}` holds {} values and cannot be compared with {lit}", kind_name(kind))),
    }
}

fn kind_name(k: ColumnKind) -> &'static str {
    match k {
        ColumnKind::Hex => "hex",
        ColumnKind::Int => "integer",
        ColumnKind::Str => "string",
        ColumnKind::List => "list",
    }
}

fn scalar(column: Column, what: &str) -> Result<(), RangerError> {
    if column.kind() == ColumnKind::List {
        return Err(RangerError::Schema {
            column: column.name().to_string(),
            message: format!("column `{column}` is a list and cannot be used in {what}"),
        });
    }
    Ok(())
}

fn invalid(msg: impl Into<String>) -> RangerError {
    perr(0, msg)
}

fn check_stage(shape: Shape, stage: &Stage) -> Result<Shape, RangerError> {
    let wrong = |what: &str| invalid(format!("`{stage}` cannot follow {what}"));
    let describe = |s: Shape| match s {
        Shape::Rows => "record rows",
        Shape::Groups => "group_by",
        Shape::Table { .. } => "aggregate",
        Shape::Text => "a metadata source",
        Shape::Captured => "extract",
    };
    match stage {
        Stage::Filter { column, op, value } => {
            if shape != Shape::Rows {
                return Err(wrong(describe(shape)));
            }
            scalar(*column, "filter")?;
            literal_fits(*column, Some(*op), value).map_err(|m| RangerError::Schema { column: column.name().into(), message: m })?;
            Ok(Shape::Rows)
        }
        Stage::FilterIn { column, values } => {
            if shape != Shape::Rows {
                return Err(wrong(describe(shape)));
            }
            if values.is_empty() {
                return Err(invalid("`in` needs at least one value"));
            }
            scalar(*column, "filter")?;
            for v in values {
                literal_fits(*column, None, v).map_err(|m| RangerError::Schema { column: column.name().into(), message: m })?;
            }
            Ok(Shape::Rows)
        }
        Stage::GroupBy(column) => {
            if shape != Shape::Rows {
                return Err(wrong(describe(shape)));
            }
            scalar(*column, "group_by")?;
            Ok(Shape::Groups)
        }
        Stage::Aggregate(aggs) => {
            let grouped = match shape {
                Shape::Rows => false,
                Shape::Groups => true,
                _ => return Err(wrong(describe(shape))),
            };
            if aggs.is_empty() {
                return Err(invalid("aggregate needs at least one function"));
            }
            for a in aggs {
                match (a.func, a.column) {
                    (AggFn::Count, None) => {}
                    (AggFn::Count, Some(c)) => scalar(c, "count")?,
                    (f, None) => return Err(invalid(format!("`{}` needs a column", f.name()))),
                    (AggFn::Min | AggFn::Max, Some(c)) if c.is_numeric() => {}
                    (_, Some(c)) if c.kind() == ColumnKind::Int => {}
                    (f, Some(c)) => {
                        return Err(RangerError::Schema {
                            column: c.name().into(),
                            message: format!("`{}` needs an integer column, `{c}` holds {} values", f.name(), kind_name(c.kind())),
                        })
                    }
                }
            }
            Ok(Shape::Table { aggs: aggs.len(), grouped })
        }
        Stage::Sort { key, .. } => match (shape, key) {
            (Shape::Rows, SortKey::Column(c)) => {
                scalar(*c, "sort")?;
                Ok(shape)
            }
            (Shape::Groups, SortKey::Key | SortKey::Count) => Ok(shape),
            (Shape::Table { grouped: true, .. }, SortKey::Key) => Ok(shape),
            (Shape::Table { .. }, SortKey::Value) => Ok(shape),
            _ => Err(invalid(format!("`{stage}` is not valid after {}", describe(shape)))),
        },
        Stage::Limit(_) => match shape {
            Shape::Rows | Shape::Groups | Shape::Table { .. } => Ok(shape),
            _ => Err(wrong(describe(shape))),
        },
        Stage::Extract(re) => {
            if shape != Shape::Text {
                return Err(invalid("extract applies only to a metadata source"));
            }
            compile_regex(re).map_err(invalid)?;
            Ok(Shape::Captured)
        }
    }
}

/// A piece of an emit template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Part {
    Text(String),
    Slot(String),
}

pub(crate) fn template_parts(t: &str) -> Result<Vec<Part>, String> {
    let mut parts = Vec::new();
    let mut text = String::new();
    let mut chars = t.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                text.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                text.push('}');
            }
            '{' => {
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(ch) if ch.is_ascii_alphanumeric() || ch == '_' => name.push(ch),
                        _ => return Err("unterminated or malformed `{placeholder}` in emit template".into()),
                    }
                }
                if !text.is_empty() {
                    parts.push(Part::Text(std::mem::take(&mut text)));
                }
                parts.push(Part::Slot(name));
            }
            '}' => return Err("unmatched `}` in emit template; write `}}` for a literal brace".into()),
            c => text.push(c),
        }
    }
    if !text.is_empty() {
        parts.push(Part::Text(text));
    }
    Ok(parts)
}

fn check_slot(shape: Shape, name: &str) -> Result<(), String> {
    let ok = match name {
        "value" => matches!(shape, Shape::Table { .. } | Shape::Captured),
        "count" => matches!(shape, Shape::Rows | Shape::Groups | Shape::Table { .. }),
        "rows" => !matches!(shape, Shape::Captured),
        "keys" | "top_key" => matches!(shape, Shape::Groups | Shape::Table { grouped: true, .. }),
        "top_value" => matches!(shape, Shape::Table { .. }),
        n if !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()) => {
            let i: usize = n.parse().unwrap_or(usize::MAX);
            match shape {
                Shape::Table { aggs, .. } => i < aggs,
                Shape::Captured => i == 0,
                _ => false,
            }
        }
        _ => return Err(format!("unknown placeholder `{{{name}}}`; use {{0}}, {{1}}, {{value}}, {{count}}, {{rows}}, {{keys}}, {{top_key}} or {{top_value}}")),
    };
    if ok {
        Ok(())
    } else {
        Err(format!("placeholder `{{{name}}}` has no value at this point of the pipeline"))
    }
}

/// Statically checks stage order, column types, regexes and placeholders.
/// Errors carry the index of the offending stage (`stages.len()` for emit).
pub(crate) fn check_program(p: &QueryProgram) -> Result<Shape, (usize, RangerError)> {
    let mut shape = match p.source {
        Source::Trace { .. } => Shape::Rows,
        Source::Metadata { .. } => Shape::Text,
    };
    for (i, st) in p.stages.iter().enumerate() {
        shape = check_stage(shape, st).map_err(|e| (i, e))?;
    }
    let emit_err = |m: String| (p.stages.len(), invalid(m));
    for part in template_parts(&p.emit).map_err(emit_err)? {
        if let Part::Slot(name) = part {
            check_slot(shape, &name).map_err(emit_err)?;
        }
    }
    Ok(shape)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRAMMAR_FIXTURE: &str =
        r#"from mcf/lru | filter program_counter = 0x4037ba | aggregate rate_pct is_miss | emit "The miss rate for PC 0x4037ba is {0}%""#;

    #[test]
    fn grammar_fixture_round_trips() {
        let p = parse_program(GRAMMAR_FIXTURE).unwrap();
        assert_eq!(p.source, Source::Trace { workload: "mcf".into(), policy: "lru".into() });
        assert_eq!(
            p.stages,
            vec![
                Stage::Filter { column: Column::ProgramCounter, op: CmpOp::Eq, value: Literal::Hex(0x4037ba) },
                Stage::Aggregate(vec![Aggregate { func: AggFn::RatePct, column: Some(Column::IsMiss) }]),
            ]
        );
        assert_eq!(p.to_string(), GRAMMAR_FIXTURE);
        assert_eq!(parse_program(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn empty_input_errors_at_zero() {
        match parse_program("") {
            Err(RangerError::Parse { position: 0, message }) => assert!(message.contains("`from` or `metadata`"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_column_is_schema_error() {
        match parse_program(r#"from mcf/lru | filter foo = 1 | emit "x""#) {
            Err(RangerError::Schema { column, .. }) => assert_eq!(column, "foo"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn list_columns_are_rejected() {
        let e = parse_program(r#"from a/b | group_by current_cache_lines | aggregate count | emit "{0}""#).unwrap_err();
        assert!(matches!(e, RangerError::Schema { ref column, .. } if column == "current_cache_lines"), "{e:?}");
    }

    #[test]
    fn positions_point_at_the_problem() {
        let src = r#"from a/b | aggregate count | filter is_miss = 1 | emit "{0}""#;
        match parse_program(src) {
            Err(RangerError::Parse { position, .. }) => assert_eq!(&src[position..position + 6], "filter"),
            other => panic!("{other:?}"),
        }
        let src = "from a/b | frobnicate";
        match parse_program(src) {
            Err(RangerError::Parse { position, message }) => {
                assert_eq!(position, 11);
                assert!(message.contains("frobnicate"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn literals_and_operators() {
        let p = parse_program(
            r#"from 505_mcf/lru | filter accessed_address_reuse_distance_numeric >= 1.5e3 | filter evict != "Cache Hit" | filter evicted_address = null | filter cache_set_id in [1, 0x2, 3] | filter is_miss ≤ -1 | emit "{count}""#,
        )
        .unwrap();
        assert_eq!(p.source.canonical_id(), "505_mcf_evictions_lru");
        assert_eq!(p.stages.len(), 5);
        assert!(matches!(p.stages[0], Stage::Filter { op: CmpOp::Ge, value: Literal::Float(v), .. } if v == 1500.0));
        assert!(matches!(p.stages[4], Stage::Filter { op: CmpOp::Le, value: Literal::Float(v), .. } if v == -1.0));
        assert_eq!(parse_program(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn type_mismatches() {
        for src in [
            r#"from a/b | filter evict = 3 | emit "x""#,
            r#"from a/b | filter program_counter = "x" | emit "x""#,
            r#"from a/b | aggregate mean function_name | emit "{0}""#,
            r#"from a/b | filter evicted_address < null | emit "x""#,
        ] {
            assert!(matches!(parse_program(src), Err(RangerError::Schema { .. })), "{src}");
        }
        for src in [
            r#"from a/b | extract "(x)" | emit "{0}""#,
            r#"metadata a/b | extract "x" | emit "{0}""#,
            r#"metadata a/b | extract "([0-9.]+)% miss rate" | emit "{1}""#,
            r#"from a/b | emit "{0}""#,
            r#"from a/b | emit "{bogus}""#,
            r#"from a/b | emit "{""#,
            r#"from a/b | aggregate count | sort key desc | emit "{0}""#,
            r#"from a/b | group_by evict | emit "{top_value}""#,
        ] {
            assert!(matches!(parse_program(src), Err(RangerError::Parse { .. })), "{src}");
        }
    }

    #[test]
    fn scripts_and_canonical_sources() {
        let s = parse_script(
            "from g_evictions_lru | aggregate count | emit \"{0}\";\nmetadata g/belady | extract \"([0-9.]+)% miss rate\" | emit \"{value}\";",
        )
        .unwrap();
        assert_eq!(s.programs.len(), 2);
        assert_eq!(parse_script(&s.to_string()).unwrap(), s);
        assert!(parse_program(&s.to_string()).is_err());
    }

    #[test]
    fn fenced_and_escaped_strings() {
        let p = parse_program(r#"from a/b | emit "say \"hi\" {{literal}} \\ done""#).unwrap();
        assert_eq!(p.emit, r#"say "hi" {{literal}} \ done"#);
        assert_eq!(parse_program(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn malformed_numbers() {
        assert!(matches!(parse_program("from a/b | limit 0x12g"), Err(RangerError::Parse { .. })));
        assert!(matches!(parse_program("from a/b | limit 99999999999999999999999"), Err(RangerError::Parse { .. })));
        assert!(matches!(parse_program("from a/b | limit 1e999"), Err(RangerError::Parse { .. })));
    }
}
