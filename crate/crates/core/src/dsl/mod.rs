//! A small C-like kernel language.
//!
//! Kernel text is parsed to a [`KernelAst`](ast::KernelAst), constants are
//! substituted, and the result is compiled to a form with a static access
//! plan. [`DslKernel`] plugs compiled kernels into the loop engine.
//!
//! ```
//! use partloop_core::dsl::{DslKernel, KernelSource};
//! use partloop_core::{AccessBinding, AccessMode, Constant, Domain, Engine, ScalarArray, State};
//!
//! let mut state = State::new(Domain::cubic(1.0).unwrap(), 3);
//! let mut total = ScalarArray::float("total", 1);
//! let src = KernelSource::new("count", "total += scale;", vec![Constant::new("scale", 0.5)]);
//! let kernel = DslKernel::new(&src).unwrap();
//! Engine::serial()
//!     .particle_loop(&mut state, &kernel, &mut [AccessBinding::global("total", &mut total, AccessMode::Inc)])
//!     .unwrap();
//! assert_eq!(total.value(0), 1.5);
//! ```

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub mod ast;
mod compile;
pub mod kernels;
mod lexer;
mod parser;

pub use compile::{CompiledKernel, PlanEntry, Site, Usage};
pub use parser::parse;

use crate::data::Constant;
use crate::engine::{Invoke, Kernel, LoopKind, SlotInfo};
use crate::error::{Error, Result};
use ast::{Expr, KernelAst, Place, Stmt};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("syntax error at {line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },

    #[error("unknown builtin `{name}` at {line}:{col} (only `sqrt` is available)")]
    UnknownBuiltin { line: usize, col: usize, name: String },

    #[error("{0}")]
    Semantic(String),

    #[error("constant `{0}` is defined more than once")]
    DuplicateConstant(String),

    #[error("constant `{0}` has the same label as a loop binding")]
    ConstantShadowsBinding(String),
}

/// Kernel text plus the constants substituted into it.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSource {
    pub name: String,
    pub code: String,
    pub constants: Vec<Constant>,
}

impl KernelSource {
    pub fn new(name: impl Into<String>, code: impl Into<String>, constants: Vec<Constant>) -> Self {
        Self {
            name: name.into(),
            code: code.into(),
            constants,
        }
    }
}

fn check_distinct(constants: &[Constant]) -> Result<(), KernelError> {
    for (k, c) in constants.iter().enumerate() {
        if constants[..k].iter().any(|d| d.label() == c.label()) {
            return Err(KernelError::DuplicateConstant(c.label().into()));
        }
    }
    Ok(())
}

/// Replaces every free occurrence of each constant label with its literal
/// value. Locals declared with the same name shadow the constant.
pub fn bind_constants(ast: &KernelAst, constants: &[Constant]) -> Result<KernelAst, KernelError> {
    check_distinct(constants)?;
    let mut b = Binder {
        constants,
        scopes: vec![Vec::new()],
    };
    Ok(KernelAst {
        statements: b.stmts(&ast.statements)?,
    })
}

struct Binder<'c> {
    constants: &'c [Constant],
    scopes: Vec<Vec<String>>,
}

impl Binder<'_> {
    fn value(&self, name: &str) -> Option<Expr> {
        if self.scopes.iter().any(|s| s.iter().any(|l| l == name)) {
            return None;
        }
        self.constants
            .iter()
            .find(|c| c.label() == name)
            .map(|c| compile::literal(c.value()))
    }

    fn stmts(&mut self, stmts: &[Stmt]) -> Result<Vec<Stmt>, KernelError> {
        stmts.iter().map(|s| self.stmt(s)).collect()
    }

    fn scoped(&mut self, s: &Stmt) -> Result<Box<Stmt>, KernelError> {
        self.scopes.push(Vec::new());
        let out = self.stmt(s);
        self.scopes.pop();
        Ok(Box::new(out?))
    }

    fn stmt(&mut self, s: &Stmt) -> Result<Stmt, KernelError> {
        Ok(match s {
            Stmt::Decl { ty, constant, vars } => {
                let mut out = Vec::with_capacity(vars.len());
                for (name, init) in vars {
                    let init = init.as_ref().map(|e| self.expr(e));
                    self.scopes.last_mut().expect("open scope").push(name.clone());
                    out.push((name.clone(), init));
                }
                Stmt::Decl {
                    ty: *ty,
                    constant: *constant,
                    vars: out,
                }
            }
            Stmt::Assign { place, op, value } => Stmt::Assign {
                place: self.place(place)?,
                op: *op,
                value: self.expr(value),
            },
            Stmt::Step { place, delta } => Stmt::Step {
                place: self.place(place)?,
                delta: *delta,
            },
            Stmt::If { cond, then, otherwise } => Stmt::If {
                cond: self.expr(cond),
                then: self.scoped(then)?,
                otherwise: match otherwise {
                    Some(s) => Some(self.scoped(s)?),
                    None => None,
                },
            },
            Stmt::For { init, cond, step, body } => {
                self.scopes.push(Vec::new());
                let out = (|| {
                    let init = match init {
                        Some(s) => Some(Box::new(self.stmt(s)?)),
                        None => None,
                    };
                    let cond = cond.as_ref().map(|c| self.expr(c));
                    let step = match step {
                        Some(s) => Some(Box::new(self.stmt(s)?)),
                        None => None,
                    };
                    let body = self.scoped(body)?;
                    Ok(Stmt::For { init, cond, step, body })
                })();
                self.scopes.pop();
                out?
            }
            Stmt::Block(stmts) => {
                self.scopes.push(Vec::new());
                let out = self.stmts(stmts);
                self.scopes.pop();
                Stmt::Block(out?)
            }
            Stmt::Expr(e) => Stmt::Expr(self.expr(e)),
        })
    }

    fn place(&mut self, p: &Place) -> Result<Place, KernelError> {
        Ok(match p {
            Place::Ident(name) => {
                if self.value(name).is_some() {
                    return Err(KernelError::Semantic(alloc::format!("assignment to constant `{name}`")));
                }
                Place::Ident(name.clone())
            }
            Place::Prop { name, side, index } => Place::Prop {
                name: name.clone(),
                side: *side,
                index: self.expr(index),
            },
            Place::Index { name, index } => Place::Index {
                name: name.clone(),
                index: self.expr(index),
            },
        })
    }

    fn expr(&self, e: &Expr) -> Expr {
        let b = |e: &Expr| Box::new(self.expr(e));
        match e {
            Expr::Ident(name) => self.value(name).unwrap_or_else(|| e.clone()),
            Expr::Float(_) | Expr::Int(_) => e.clone(),
            Expr::Prop { name, side, index } => Expr::Prop {
                name: name.clone(),
                side: *side,
                index: b(index),
            },
            Expr::Index { name, index } => Expr::Index {
                name: name.clone(),
                index: b(index),
            },
            Expr::Unary(op, a) => Expr::Unary(*op, b(a)),
            Expr::Binary(op, x, y) => Expr::Binary(*op, b(x), b(y)),
            Expr::Ternary(c, x, y) => Expr::Ternary(b(c), b(x), b(y)),
            Expr::Call(f, args) => Expr::Call(*f, args.iter().map(|a| self.expr(a)).collect()),
        }
    }
}

/// A text kernel ready for [`Engine`](crate::Engine) loops.
#[derive(Clone, Debug)]
pub struct DslKernel {
    name: String,
    constants: Vec<Constant>,
    compiled: CompiledKernel,
}

impl DslKernel {
    pub fn new(source: &KernelSource) -> Result<Self, KernelError> {
        let ast = parse(&source.code)?;
        let bound = bind_constants(&ast, &source.constants)?;
        Ok(Self {
            name: source.name.clone(),
            constants: source.constants.clone(),
            compiled: CompiledKernel::compile(&bound, &[])?,
        })
    }

    pub fn from_code(code: &str, constants: &[Constant]) -> Result<Self, KernelError> {
        Self::new(&KernelSource::new("kernel", code, constants.to_vec()))
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn compiled(&self) -> &CompiledKernel {
        &self.compiled
    }

    /// Static access plan (label, site, usage), sorted.
    pub fn plan(&self) -> &[PlanEntry] {
        self.compiled.plan()
    }
}

impl Kernel for DslKernel {
    fn link<'k>(&'k self, slots: &[SlotInfo<'_>], kind: LoopKind) -> Result<Box<dyn Invoke + 'k>> {
        if let Some(c) = self
            .constants
            .iter()
            .find(|c| slots.iter().any(|s| s.label == c.label()))
        {
            return Err(Error::Kernel(KernelError::ConstantShadowsBinding(c.label().into())));
        }
        let map = self.compiled.link(slots, kind)?;
        Ok(Box::new(compile::Linked {
            kernel: &self.compiled,
            map,
        }))
    }
}
