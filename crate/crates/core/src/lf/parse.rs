use crate::schema::{KbSchema, OperationSlot, CONST_RELATION};

use super::{Formula, LfError, LogicalForm, Term};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Sym(String),
    Open,
    Close,
    Comma,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, LfError> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b'(' => out.push((Tok::Open, i)),
            b')' => out.push((Tok::Close, i)),
            b',' => out.push((Tok::Comma, i)),
            c if c.is_ascii_whitespace() => {}
            b'<' => {
                let start = i;
                while i < bytes.len() && bytes[i] != b'>' {
                    if matches!(bytes[i], b'(' | b')' | b',') || bytes[i].is_ascii_whitespace() {
                        return Err(LfError::SyntaxError {
                            pos: i,
                            message: "unterminated placeholder".into(),
                        });
                    }
                    i += 1;
                }
                if i == bytes.len() {
                    return Err(LfError::SyntaxError {
                        pos: i,
                        message: "unterminated placeholder".into(),
                    });
                }
                out.push((Tok::Sym(text[start..=i].to_string()), start));
            }
            c if c.is_ascii_alphanumeric() || c == b'_' || c == b'-' || c == b'.' => {
                let start = i;
                while i + 1 < bytes.len()
                    && (bytes[i + 1].is_ascii_alphanumeric()
                        || matches!(bytes[i + 1], b'_' | b'-' | b'.'))
                {
                    i += 1;
                }
                out.push((Tok::Sym(text[start..=i].to_string()), start));
            }
            _ => {
                return Err(LfError::SyntaxError {
                    pos: i,
                    message: format!(
                        "unexpected character `{}`",
                        text[i..].chars().next().unwrap()
                    ),
                })
            }
        }
        i += 1;
    }
    Ok(out)
}

/// Untyped Prolog term.
#[derive(Debug)]
enum Raw {
    Atom(String, usize),
    Compound(String, Vec<Raw>, usize),
    Tuple(Vec<Raw>, usize),
}

impl Raw {
    fn pos(&self) -> usize {
        match self {
            Raw::Atom(_, p) | Raw::Compound(_, _, p) | Raw::Tuple(_, p) => *p,
        }
    }
}

struct Reader {
    toks: Vec<(Tok, usize)>,
    at: usize,
    end: usize,
}

impl Reader {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.at).map(|(t, _)| t)
    }

    fn pos(&self) -> usize {
        self.toks.get(self.at).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn error<T>(&self, message: &str) -> Result<T, LfError> {
        let found = match self.peek() {
            None => "end of input".to_string(),
            Some(Tok::Sym(s)) => format!("`{s}`"),
            Some(Tok::Open) => "`(`".into(),
            Some(Tok::Close) => "`)`".into(),
            Some(Tok::Comma) => "`,`".into(),
        };
        Err(LfError::SyntaxError {
            pos: self.pos(),
            message: format!("{message}, found {found}"),
        })
    }

    /// Comma-separated terms up to and including the closing paren.
    fn args(&mut self) -> Result<Vec<Raw>, LfError> {
        let mut args = vec![self.term()?];
        loop {
            match self.peek() {
                Some(Tok::Comma) => {
                    self.at += 1;
                    args.push(self.term()?);
                }
                Some(Tok::Close) => {
                    self.at += 1;
                    return Ok(args);
                }
                _ => return self.error("expected `,` or `)`"),
            }
        }
    }

    fn term(&mut self) -> Result<Raw, LfError> {
        let pos = self.pos();
        match self.peek().cloned() {
            Some(Tok::Open) => {
                self.at += 1;
                if self.peek() == Some(&Tok::Close) {
                    self.at += 1;
                    return Ok(Raw::Tuple(Vec::new(), pos));
                }
                Ok(Raw::Tuple(self.args()?, pos))
            }
            Some(Tok::Sym(s)) => {
                self.at += 1;
                if self.peek() == Some(&Tok::Open) {
                    self.at += 1;
                    Ok(Raw::Compound(s, self.args()?, pos))
                } else {
                    Ok(Raw::Atom(s, pos))
                }
            }
            _ => self.error("expected a term"),
        }
    }
}

fn is_variable(s: &str) -> bool {
    s.starts_with(|c: char| c.is_ascii_uppercase())
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

struct Interpreter<'a> {
    schema: &'a KbSchema,
    strict: bool,
}

impl Interpreter<'_> {
    fn unknown<T>(&self, name: &str, pos: usize) -> Result<T, LfError> {
        Err(LfError::UnknownSymbol {
            pos,
            name: name.to_string(),
        })
    }

    fn syntax<T>(&self, pos: usize, message: &str) -> Result<T, LfError> {
        Err(LfError::SyntaxError {
            pos,
            message: message.to_string(),
        })
    }

    fn variable(&self, raw: &Raw) -> Result<String, LfError> {
        match raw {
            Raw::Atom(s, _) if is_variable(s) => Ok(s.clone()),
            other => self.syntax(other.pos(), "expected a variable"),
        }
    }

    fn entity(&self, ctor: &str, args: &[Raw], pos: usize) -> Result<Term, LfError> {
        let [Raw::Atom(name, npos)] = args else {
            return self.syntax(pos, "entity literal takes one name");
        };
        if is_variable(name) {
            return self.syntax(*npos, "entity name must not be a variable");
        }
        let ty = match self.schema.type_for_constructor(ctor) {
            Some(t) => t.to_string(),
            None if !self.strict && ctor.len() > 2 && ctor.ends_with("id") => {
                ctor[..ctor.len() - 2].to_string()
            }
            None => return self.unknown(ctor, pos),
        };
        if self.strict && self.schema.entity_type(name) != Some(ty.as_str()) {
            return self.unknown(name, *npos);
        }
        Ok(Term::Entity {
            ty,
            name: name.clone(),
        })
    }

    fn term(&self, raw: &Raw) -> Result<Term, LfError> {
        match raw {
            Raw::Atom(s, _) if is_variable(s) => Ok(Term::Var(s.clone())),
            Raw::Compound(ctor, args, pos) => self.entity(ctor, args, *pos),
            other => self.syntax(other.pos(), "expected a variable or entity literal"),
        }
    }

    fn formula(&self, raw: &Raw) -> Result<Formula, LfError> {
        match raw {
            Raw::Tuple(items, _) => {
                let mut out = Vec::new();
                for item in items {
                    match self.formula(item)? {
                        Formula::Conj(inner) => out.extend(inner),
                        f => out.push(f),
                    }
                }
                Ok(Formula::from_items(out))
            }
            Raw::Atom(s, pos) => self.syntax(*pos, &format!("`{s}` is not a goal")),
            Raw::Compound(name, args, pos) => {
                if name == CONST_RELATION {
                    let [v, e] = args.as_slice() else {
                        return self.syntax(*pos, "const takes two arguments");
                    };
                    let var = self.variable(v)?;
                    let Raw::Compound(ctor, eargs, epos) = e else {
                        return self.syntax(e.pos(), "expected an entity literal");
                    };
                    let Term::Entity { ty, name } = self.entity(ctor, eargs, *epos)? else {
                        unreachable!()
                    };
                    return Ok(Formula::Const { var, ty, name });
                }
                if let Some(decl) = self.schema.operation(name) {
                    if args.len() != decl.layout.len() {
                        return self.syntax(
                            *pos,
                            &format!("`{name}` takes {} arguments", decl.layout.len()),
                        );
                    }
                    let mut roles = Vec::new();
                    let mut body = None;
                    let mut body_index = 0;
                    for (i, (slot, arg)) in decl.layout.iter().zip(args).enumerate() {
                        match slot {
                            OperationSlot::Role(r) => roles.push((r.clone(), self.variable(arg)?)),
                            OperationSlot::Body => {
                                body_index = i;
                                body = Some(self.formula(arg)?);
                            }
                        }
                    }
                    return Ok(Formula::Operator {
                        op: name.clone(),
                        roles,
                        body_index,
                        body: Box::new(body.expect("layout has a body")),
                    });
                }
                match args.as_slice() {
                    [arg] => {
                        if self.strict && !self.schema.has_type(name) {
                            return self.unknown(name, *pos);
                        }
                        Ok(Formula::TypePred {
                            ty: name.clone(),
                            arg: self.term(arg)?,
                        })
                    }
                    [a, b] => {
                        if self.strict && self.schema.relation(name).is_none() {
                            return self.unknown(name, *pos);
                        }
                        Ok(Formula::Relation {
                            rel: name.clone(),
                            arg1: self.term(a)?,
                            arg2: self.term(b)?,
                        })
                    }
                    _ => self.unknown(name, *pos),
                }
            }
        }
    }
}

fn parse_with(text: &str, schema: &KbSchema, strict: bool) -> Result<LogicalForm, LfError> {
    let toks = lex(text)?;
    let mut reader = Reader {
        toks,
        at: 0,
        end: text.len(),
    };
    let raw = reader.term()?;
    if reader.at != reader.toks.len() {
        return reader.error("expected end of input");
    }
    let Raw::Compound(head, args, pos) = &raw else {
        return Err(LfError::SyntaxError {
            pos: raw.pos(),
            message: "expected `answer(...)`".into(),
        });
    };
    if head != "answer" || args.len() != 2 {
        return Err(LfError::SyntaxError {
            pos: *pos,
            message: "expected `answer(Var, Body)`".into(),
        });
    }
    let interp = Interpreter { schema, strict };
    Ok(LogicalForm {
        answer: interp.variable(&args[0])?,
        body: interp.formula(&args[1])?,
    })
}

/// Parses logical-form text. Operator layouts come from `schema`; other
/// symbols are accepted as written.
pub fn parse_lf(text: &str, schema: &KbSchema) -> Result<LogicalForm, LfError> {
    parse_with(text, schema, false)
}

/// Like [`parse_lf`], but every type, relation and entity must resolve in
/// `schema`.
pub fn parse_lf_strict(text: &str, schema: &KbSchema) -> Result<LogicalForm, LfError> {
    parse_with(text, schema, true)
}
