use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use super::ast::*;
use super::lexer::{lex, Tok, Token};
use super::KernelError;

const TYPES: [&str; 4] = ["double", "float", "int", "long"];
const RESERVED: [&str; 8] = ["if", "else", "for", "const", "double", "float", "int", "long"];

/// Parses kernel source text.
pub fn parse(code: &str) -> Result<KernelAst, KernelError> {
    let mut p = Parser {
        toks: lex(code)?,
        pos: 0,
    };
    let mut statements = Vec::new();
    while p.peek() != &Tok::Eof {
        if let Some(s) = p.stmt()? {
            statements.push(s);
        }
    }
    Ok(KernelAst { statements })
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn here(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, KernelError> {
        let t = self.here();
        Err(KernelError::Syntax {
            line: t.line,
            col: t.col,
            message: message.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => alloc::format!("`{s}`"),
            Tok::Float(x) => alloc::format!("`{x}`"),
            Tok::Int(x) => alloc::format!("`{x}`"),
            Tok::Punct(p) => alloc::format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), KernelError> {
        if self.eat(p) {
            Ok(())
        } else {
            self.error(alloc::format!("expected `{p}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> Result<String, KernelError> {
        match self.peek() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => self.error(alloc::format!("expected identifier, found {}", self.describe())),
        }
    }

    fn starts_decl(&self) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == "const" || TYPES.contains(&s.as_str()))
    }

    fn stmt(&mut self) -> Result<Option<Stmt>, KernelError> {
        if self.eat(";") {
            return Ok(None);
        }
        if self.eat("{") {
            let mut body = Vec::new();
            while !self.eat("}") {
                if self.peek() == &Tok::Eof {
                    return self.error("expected `}`, found end of input");
                }
                if let Some(s) = self.stmt()? {
                    body.push(s);
                }
            }
            return Ok(Some(Stmt::Block(body)));
        }
        if self.is_word("if") {
            self.bump();
            self.expect("(")?;
            let cond = self.expr()?;
            self.expect(")")?;
            let then = Box::new(self.body()?);
            let otherwise = if self.is_word("else") {
                self.bump();
                Some(Box::new(self.body()?))
            } else {
                None
            };
            return Ok(Some(Stmt::If { cond, then, otherwise }));
        }
        if self.is_word("for") {
            self.bump();
            self.expect("(")?;
            let init = if self.is_punct(";") {
                None
            } else if self.starts_decl() {
                Some(Box::new(self.decl()?))
            } else {
                Some(Box::new(self.simple()?))
            };
            self.expect(";")?;
            let cond = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect(";")?;
            let step = if self.is_punct(")") {
                None
            } else {
                Some(Box::new(self.simple()?))
            };
            self.expect(")")?;
            let body = Box::new(self.body()?);
            return Ok(Some(Stmt::For { init, cond, step, body }));
        }
        if self.is_word("else") {
            return self.error("`else` without `if`");
        }
        let s = if self.starts_decl() {
            self.decl()?
        } else {
            self.simple()?
        };
        self.expect(";")?;
        Ok(Some(s))
    }

    /// Statement used as an `if`/`for` body; an empty `;` becomes an empty block.
    fn body(&mut self) -> Result<Stmt, KernelError> {
        Ok(self.stmt()?.unwrap_or(Stmt::Block(Vec::new())))
    }

    fn decl(&mut self) -> Result<Stmt, KernelError> {
        let mut constant = false;
        if self.is_word("const") {
            self.bump();
            constant = true;
        }
        let ty = match self.peek() {
            Tok::Ident(s) if s == "double" => Ty::Double,
            Tok::Ident(s) if s == "float" => Ty::Float,
            Tok::Ident(s) if s == "int" => Ty::Int,
            Tok::Ident(s) if s == "long" => Ty::Long,
            _ => return self.error(alloc::format!("expected a type, found {}", self.describe())),
        };
        self.bump();
        let mut vars = Vec::new();
        loop {
            let name = self.ident()?;
            let init = if self.eat("=") { Some(self.expr()?) } else { None };
            vars.push((name, init));
            if !self.eat(",") {
                break;
            }
        }
        Ok(Stmt::Decl { ty, constant, vars })
    }

    /// Assignment, increment/decrement or expression statement.
    fn simple(&mut self) -> Result<Stmt, KernelError> {
        for (p, delta) in [("++", 1i8), ("--", -1i8)] {
            if self.eat(p) {
                let place = self.place_of_next()?;
                return Ok(Stmt::Step { place, delta });
            }
        }
        let start = self.pos;
        let e = self.expr()?;
        let op = match self.peek() {
            Tok::Punct("=") => Some(AssignOp::Set),
            Tok::Punct("+=") => Some(AssignOp::Add),
            Tok::Punct("-=") => Some(AssignOp::Sub),
            Tok::Punct("*=") => Some(AssignOp::Mul),
            Tok::Punct("/=") => Some(AssignOp::Div),
            _ => None,
        };
        let postfix = match self.peek() {
            Tok::Punct("++") => Some(1i8),
            Tok::Punct("--") => Some(-1i8),
            _ => None,
        };
        if op.is_none() && postfix.is_none() {
            return Ok(Stmt::Expr(e));
        }
        let Some(place) = to_place(e) else {
            self.pos = start;
            return self.error("left-hand side is not assignable");
        };
        self.bump();
        if let Some(delta) = postfix {
            return Ok(Stmt::Step { place, delta });
        }
        let value = self.expr()?;
        Ok(Stmt::Assign {
            place,
            op: op.expect("checked above"),
            value,
        })
    }

    fn place_of_next(&mut self) -> Result<Place, KernelError> {
        let start = self.pos;
        let e = self.unary()?;
        to_place(e).map_or_else(
            || {
                self.pos = start;
                self.error("operand of `++`/`--` is not assignable")
            },
            Ok,
        )
    }

    fn expr(&mut self) -> Result<Expr, KernelError> {
        let c = self.binary(0)?;
        if self.eat("?") {
            let a = self.expr()?;
            self.expect(":")?;
            let b = self.expr()?;
            return Ok(Expr::Ternary(Box::new(c), Box::new(a), Box::new(b)));
        }
        Ok(c)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, KernelError> {
        let mut lhs = self.unary()?;
        loop {
            let (op, prec) = match self.peek() {
                Tok::Punct("||") => (BinOp::Or, 1),
                Tok::Punct("&&") => (BinOp::And, 2),
                Tok::Punct("==") => (BinOp::Eq, 3),
                Tok::Punct("!=") => (BinOp::Ne, 3),
                Tok::Punct("<") => (BinOp::Lt, 4),
                Tok::Punct("<=") => (BinOp::Le, 4),
                Tok::Punct(">") => (BinOp::Gt, 4),
                Tok::Punct(">=") => (BinOp::Ge, 4),
                Tok::Punct("+") => (BinOp::Add, 5),
                Tok::Punct("-") => (BinOp::Sub, 5),
                Tok::Punct("*") => (BinOp::Mul, 6),
                Tok::Punct("/") => (BinOp::Div, 6),
                _ => break,
            };
            if prec < min_prec {
                break;
            }
            self.bump();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, KernelError> {
        let op = match self.peek() {
            Tok::Punct("-") => UnOp::Neg,
            Tok::Punct("+") => UnOp::Plus,
            Tok::Punct("!") => UnOp::Not,
            _ => return self.primary(),
        };
        self.bump();
        Ok(Expr::Unary(op, Box::new(self.unary()?)))
    }

    fn primary(&mut self) -> Result<Expr, KernelError> {
        match self.peek().clone() {
            Tok::Float(x) => {
                self.bump();
                Ok(Expr::Float(x))
            }
            Tok::Int(x) => {
                self.bump();
                Ok(Expr::Int(x))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect(")")?;
                Ok(e)
            }
            Tok::Ident(_) => {
                let (line, col) = (self.here().line, self.here().col);
                let name = self.ident()?;
                if self.is_punct("(") {
                    let func = match name.as_str() {
                        "sqrt" => Builtin::Sqrt,
                        _ => return Err(KernelError::UnknownBuiltin { line, col, name }),
                    };
                    self.bump();
                    let mut args = Vec::new();
                    if !self.eat(")") {
                        loop {
                            args.push(self.expr()?);
                            if self.eat(")") {
                                break;
                            }
                            self.expect(",")?;
                        }
                    }
                    if args.len() != 1 {
                        return Err(KernelError::Syntax {
                            line,
                            col,
                            message: alloc::format!("`{name}` takes 1 argument, got {}", args.len()),
                        });
                    }
                    return Ok(Expr::Call(func, args));
                }
                if self.is_punct(".") {
                    self.bump();
                    let side = match self.peek() {
                        Tok::Ident(s) if s == "i" => Side::I,
                        Tok::Ident(s) if s == "j" => Side::J,
                        _ => return self.error(alloc::format!("expected `i` or `j`, found {}", self.describe())),
                    };
                    self.bump();
                    self.expect("[")?;
                    let index = Box::new(self.expr()?);
                    self.expect("]")?;
                    return Ok(Expr::Prop { name, side, index });
                }
                if self.eat("[") {
                    let index = Box::new(self.expr()?);
                    self.expect("]")?;
                    return Ok(Expr::Index { name, index });
                }
                Ok(Expr::Ident(name))
            }
            _ if matches!(self.peek_at(0), Tok::Eof) => self.error("unexpected end of input"),
            _ => self.error(alloc::format!("expected an expression, found {}", self.describe())),
        }
    }
}

fn to_place(e: Expr) -> Option<Place> {
    match e {
        Expr::Ident(name) => Some(Place::Ident(name)),
        Expr::Prop { name, side, index } => Some(Place::Prop {
            name,
            side,
            index: *index,
        }),
        Expr::Index { name, index } => Some(Place::Index { name, index: *index }),
        _ => None,
    }
}
