//! Name resolution, static access plans, linking and evaluation.

use alloc::boxed::Box;
use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::ast::*;
use super::KernelError;
use crate::data::{Constant, Scalar};
use crate::engine::{Ctx, Env, Invoke, LoopKind, SlotInfo, SlotKind};
use crate::error::{AccessAction, Error, Result};
use crate::math;

/// Where an access lands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Site {
    I,
    J,
    Global,
}

/// What an access does.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Usage {
    Read,
    Write,
    Inc,
}

/// One entry of a kernel's static access plan.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PlanEntry {
    pub label: String,
    pub site: Site,
    pub usage: Usage,
}

#[derive(Clone, Debug, PartialEq)]
enum CExpr {
    Num(f64),
    Local(usize),
    Load {
        label: usize,
        site: Site,
        index: Box<CExpr>,
    },
    Un(UnOp, Box<CExpr>),
    Bin(BinOp, Box<CExpr>, Box<CExpr>),
    Tern(Box<CExpr>, Box<CExpr>, Box<CExpr>),
    Sqrt(Box<CExpr>),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum StoreOp {
    Set,
    Inc,
}

#[derive(Clone, Debug, PartialEq)]
enum CStmt {
    SetLocal {
        slot: usize,
        integer: bool,
        value: CExpr,
    },
    Store {
        label: usize,
        global: bool,
        op: StoreOp,
        index: CExpr,
        value: CExpr,
    },
    /// `X op= e` for `*=`/`/=`: the index is evaluated once.
    Update {
        label: usize,
        global: bool,
        op: BinOp,
        index: CExpr,
        value: CExpr,
    },
    If {
        cond: CExpr,
        then: Vec<CStmt>,
        otherwise: Vec<CStmt>,
    },
    For {
        init: Vec<CStmt>,
        cond: Option<CExpr>,
        step: Vec<CStmt>,
        body: Vec<CStmt>,
    },
    Eval(CExpr),
}

/// A kernel with locals resolved to frame slots and external names
/// resolved to label indices, plus its static access plan.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledKernel {
    labels: Vec<String>,
    plan: Vec<PlanEntry>,
    body: Vec<CStmt>,
    nlocals: usize,
}

struct Local {
    name: String,
    slot: usize,
    integer: bool,
    constant: bool,
}

struct Compiler<'c> {
    scopes: Vec<Vec<Local>>,
    nlocals: usize,
    labels: Vec<String>,
    plan: BTreeSet<PlanEntry>,
    constants: &'c [Constant],
}

fn semantic<T>(msg: String) -> Result<T, KernelError> {
    Err(KernelError::Semantic(msg))
}

impl Compiler<'_> {
    fn lookup(&self, name: &str) -> Option<&Local> {
        self.scopes
            .iter()
            .rev()
            .flat_map(|s| s.iter().rev())
            .find(|l| l.name == name)
    }

    fn label(&mut self, name: &str, site: Site, usage: Usage) -> usize {
        self.plan.insert(PlanEntry {
            label: name.to_string(),
            site,
            usage,
        });
        match self.labels.iter().position(|l| l == name) {
            Some(k) => k,
            None => {
                self.labels.push(name.to_string());
                self.labels.len() - 1
            }
        }
    }

    fn constant(&self, name: &str) -> Option<f64> {
        self.constants
            .iter()
            .find(|c| c.label() == name)
            .map(|c| c.value().as_f64())
    }

    fn expr(&mut self, e: &Expr) -> Result<CExpr, KernelError> {
        Ok(match e {
            Expr::Float(x) => CExpr::Num(*x),
            Expr::Int(x) => CExpr::Num(*x as f64),
            Expr::Ident(name) => {
                if let Some(l) = self.lookup(name) {
                    CExpr::Local(l.slot)
                } else if let Some(x) = self.constant(name) {
                    CExpr::Num(x)
                } else {
                    let label = self.label(name, Site::Global, Usage::Read);
                    CExpr::Load {
                        label,
                        site: Site::Global,
                        index: Box::new(CExpr::Num(0.0)),
                    }
                }
            }
            Expr::Prop { name, side, index } => {
                self.no_local(name)?;
                let index = Box::new(self.expr(index)?);
                let site = match side {
                    Side::I => Site::I,
                    Side::J => Site::J,
                };
                let label = self.label(name, site, Usage::Read);
                CExpr::Load { label, site, index }
            }
            Expr::Index { name, index } => {
                self.no_local(name)?;
                let index = Box::new(self.expr(index)?);
                let label = self.label(name, Site::Global, Usage::Read);
                CExpr::Load {
                    label,
                    site: Site::Global,
                    index,
                }
            }
            Expr::Unary(op, a) => CExpr::Un(*op, Box::new(self.expr(a)?)),
            Expr::Binary(op, a, b) => CExpr::Bin(*op, Box::new(self.expr(a)?), Box::new(self.expr(b)?)),
            Expr::Ternary(c, a, b) => CExpr::Tern(
                Box::new(self.expr(c)?),
                Box::new(self.expr(a)?),
                Box::new(self.expr(b)?),
            ),
            Expr::Call(Builtin::Sqrt, args) => CExpr::Sqrt(Box::new(self.expr(&args[0])?)),
        })
    }

    fn no_local(&self, name: &str) -> Result<(), KernelError> {
        if self.lookup(name).is_some() {
            return semantic(alloc::format!("local `{name}` cannot be indexed"));
        }
        Ok(())
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<Vec<CStmt>, KernelError> {
        self.scopes.push(Vec::new());
        let mut out = Vec::new();
        for s in stmts {
            self.stmt(s, &mut out)?;
        }
        self.scopes.pop();
        Ok(out)
    }

    fn scoped(&mut self, s: &Stmt) -> Result<Vec<CStmt>, KernelError> {
        self.block(core::slice::from_ref(s))
    }

    fn stmt(&mut self, s: &Stmt, out: &mut Vec<CStmt>) -> Result<(), KernelError> {
        match s {
            Stmt::Decl { ty, constant, vars } => {
                for (name, init) in vars {
                    let value = match init {
                        Some(e) => Some(self.expr(e)?),
                        None => None,
                    };
                    let scope = self.scopes.last_mut().expect("open scope");
                    if scope.iter().any(|l| &l.name == name) {
                        return semantic(alloc::format!("`{name}` is declared twice in one scope"));
                    }
                    let slot = self.nlocals;
                    self.nlocals += 1;
                    scope.push(Local {
                        name: name.clone(),
                        slot,
                        integer: ty.is_integer(),
                        constant: *constant,
                    });
                    out.push(CStmt::SetLocal {
                        slot,
                        integer: ty.is_integer(),
                        value: value.unwrap_or(CExpr::Num(0.0)),
                    });
                }
            }
            Stmt::Assign { place, op, value } => {
                let value = self.expr(value)?;
                out.push(self.assign(place, *op, value)?);
            }
            Stmt::Step { place, delta } => {
                let op = if *delta > 0 { AssignOp::Add } else { AssignOp::Sub };
                out.push(self.assign(place, op, CExpr::Num(1.0))?);
            }
            Stmt::If { cond, then, otherwise } => {
                let cond = self.expr(cond)?;
                let then = self.scoped(then)?;
                let otherwise = match otherwise {
                    Some(s) => self.scoped(s)?,
                    None => Vec::new(),
                };
                out.push(CStmt::If { cond, then, otherwise });
            }
            Stmt::For { init, cond, step, body } => {
                self.scopes.push(Vec::new());
                let mut init_c = Vec::new();
                if let Some(i) = init {
                    self.stmt(i, &mut init_c)?;
                }
                let cond = match cond {
                    Some(c) => Some(self.expr(c)?),
                    None => None,
                };
                let mut step_c = Vec::new();
                if let Some(s) = step {
                    self.stmt(s, &mut step_c)?;
                }
                let body = self.scoped(body)?;
                self.scopes.pop();
                out.push(CStmt::For {
                    init: init_c,
                    cond,
                    step: step_c,
                    body,
                });
            }
            Stmt::Block(stmts) => {
                let b = self.block(stmts)?;
                out.extend(b);
            }
            Stmt::Expr(e) => {
                let e = self.expr(e)?;
                out.push(CStmt::Eval(e));
            }
        }
        Ok(())
    }

    fn assign(&mut self, place: &Place, op: AssignOp, value: CExpr) -> Result<CStmt, KernelError> {
        let (name, site, index) = match place {
            Place::Ident(name) => {
                if let Some(l) = self.lookup(name) {
                    if l.constant {
                        return semantic(alloc::format!("assignment to const local `{name}`"));
                    }
                    let (slot, integer) = (l.slot, l.integer);
                    let value = match op {
                        AssignOp::Set => value,
                        _ => CExpr::Bin(bin_of(op), Box::new(CExpr::Local(slot)), Box::new(value)),
                    };
                    return Ok(CStmt::SetLocal { slot, integer, value });
                }
                if self.constant(name).is_some() {
                    return semantic(alloc::format!("assignment to constant `{name}`"));
                }
                (name, Site::Global, CExpr::Num(0.0))
            }
            Place::Prop { name, side, index } => {
                self.no_local(name)?;
                if *side == Side::J {
                    return semantic(alloc::format!("`{name}.j` is read-only; kernels write particle i only"));
                }
                (name, Site::I, self.expr(index)?)
            }
            Place::Index { name, index } => {
                self.no_local(name)?;
                (name, Site::Global, self.expr(index)?)
            }
        };
        let global = site == Site::Global;
        Ok(match op {
            AssignOp::Set => CStmt::Store {
                label: self.label(name, site, Usage::Write),
                global,
                op: StoreOp::Set,
                index,
                value,
            },
            AssignOp::Add => CStmt::Store {
                label: self.label(name, site, Usage::Inc),
                global,
                op: StoreOp::Inc,
                index,
                value,
            },
            AssignOp::Sub => CStmt::Store {
                label: self.label(name, site, Usage::Inc),
                global,
                op: StoreOp::Inc,
                index,
                value: CExpr::Un(UnOp::Neg, Box::new(value)),
            },
            AssignOp::Mul | AssignOp::Div => {
                self.label(name, site, Usage::Read);
                CStmt::Update {
                    label: self.label(name, site, Usage::Write),
                    global,
                    op: bin_of(op),
                    index,
                    value,
                }
            }
        })
    }
}

fn bin_of(op: AssignOp) -> BinOp {
    match op {
        AssignOp::Add => BinOp::Add,
        AssignOp::Sub => BinOp::Sub,
        AssignOp::Mul => BinOp::Mul,
        AssignOp::Div => BinOp::Div,
        AssignOp::Set => unreachable!("plain assignment has no operator"),
    }
}

impl CompiledKernel {
    /// Resolves names. Identifiers that are neither locals nor in
    /// `constants` refer to globals (component 0).
    pub fn compile(ast: &KernelAst, constants: &[Constant]) -> Result<Self, KernelError> {
        let mut c = Compiler {
            scopes: Vec::new(),
            nlocals: 0,
            labels: Vec::new(),
            plan: BTreeSet::new(),
            constants,
        };
        let body = c.block(&ast.statements)?;
        Ok(Self {
            labels: c.labels,
            plan: c.plan.into_iter().collect(),
            body,
            nlocals: c.nlocals,
        })
    }

    /// Sorted, deduplicated static access plan.
    pub fn plan(&self) -> &[PlanEntry] {
        &self.plan
    }

    /// External labels in first-use order; `eval` maps these to slots.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn nlocals(&self) -> usize {
        self.nlocals
    }

    /// Maps each label to a slot and checks the plan against the bound
    /// modes, loop kind and slot kinds.
    pub fn link(&self, slots: &[SlotInfo<'_>], kind: LoopKind) -> Result<Vec<usize>> {
        let map = self
            .labels
            .iter()
            .map(|l| {
                slots
                    .iter()
                    .position(|s| s.label == l)
                    .ok_or_else(|| Error::UnboundLabel(l.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        for e in &self.plan {
            let s = slots.iter().find(|s| s.label == e.label).expect("mapped above");
            let particle = s.kind == SlotKind::Particle;
            if particle == (e.site == Site::Global) {
                return Err(Error::SlotKind(e.label.clone()));
            }
            if e.site == Site::J && kind != LoopKind::Pair {
                return Err(Error::NotPairLoop(e.label.clone()));
            }
            let (ok, action) = match (e.usage, e.site) {
                (Usage::Read, Site::I) => (s.mode.can_read(), AccessAction::ReadI),
                (Usage::Read, Site::J) => (s.mode.can_read(), AccessAction::ReadJ),
                (Usage::Read, Site::Global) => (s.mode.can_read(), AccessAction::ReadGlobal),
                (Usage::Write, Site::Global) => (s.mode.can_write(), AccessAction::WriteGlobal),
                (Usage::Inc, Site::Global) => (s.mode.can_increment(), AccessAction::IncrementGlobal),
                (Usage::Write, _) => (s.mode.can_write(), AccessAction::Write),
                (Usage::Inc, _) => (s.mode.can_increment(), AccessAction::Increment),
            };
            if !ok {
                return Err(Error::AccessViolation {
                    label: e.label.clone(),
                    mode: s.mode,
                    action,
                });
            }
        }
        Ok(map)
    }

    /// Runs the kernel once against `env`, with labels mapped to slots by
    /// `map`.
    pub fn eval<E: Env + ?Sized>(&self, map: &[usize], env: &mut E) -> Result<()> {
        let mut buf = [0.0f64; 32];
        let mut heap;
        let frame: &mut [f64] = if self.nlocals <= buf.len() {
            &mut buf[..self.nlocals]
        } else {
            heap = vec![0.0; self.nlocals];
            &mut heap
        };
        let mut m = Machine {
            labels: &self.labels,
            map,
            frame,
            env,
        };
        m.run(&self.body)
    }
}

struct Machine<'m, E: ?Sized> {
    labels: &'m [String],
    map: &'m [usize],
    frame: &'m mut [f64],
    env: &'m mut E,
}

#[inline]
fn truth(x: f64) -> bool {
    x != 0.0
}

#[inline]
fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

impl<E: Env + ?Sized> Machine<'_, E> {
    fn component(&self, label: usize, x: f64) -> Result<usize> {
        if x >= 0.0 && math::trunc(x) == x && x < usize::MAX as f64 {
            Ok(x as usize)
        } else {
            Err(Error::ComponentIndex {
                label: self.labels[label].clone(),
                index: x,
            })
        }
    }

    fn run(&mut self, body: &[CStmt]) -> Result<()> {
        for s in body {
            self.stmt(s)?;
        }
        Ok(())
    }

    fn stmt(&mut self, s: &CStmt) -> Result<()> {
        match s {
            CStmt::SetLocal { slot, integer, value } => {
                let x = self.expr(value)?;
                self.frame[*slot] = if *integer { math::trunc(x) } else { x };
            }
            CStmt::Store {
                label,
                global,
                op,
                index,
                value,
            } => {
                let r = self.expr(index)?;
                let r = self.component(*label, r)?;
                let x = self.expr(value)?;
                let slot = self.map[*label];
                match (global, op) {
                    (false, StoreOp::Set) => self.env.write_i(slot, r, x)?,
                    (false, StoreOp::Inc) => self.env.inc_i(slot, r, x)?,
                    (true, StoreOp::Set) => self.env.write_global(slot, r, x)?,
                    (true, StoreOp::Inc) => self.env.inc_global(slot, r, x)?,
                }
            }
            CStmt::Update {
                label,
                global,
                op,
                index,
                value,
            } => {
                let r = self.expr(index)?;
                let r = self.component(*label, r)?;
                let x = self.expr(value)?;
                let slot = self.map[*label];
                if *global {
                    let old = self.env.read_global(slot, r)?;
                    self.env.write_global(slot, r, binary(*op, old, x))?;
                } else {
                    let old = self.env.read_i(slot, r)?;
                    self.env.write_i(slot, r, binary(*op, old, x))?;
                }
            }
            CStmt::If { cond, then, otherwise } => {
                if truth(self.expr(cond)?) {
                    self.run(then)?;
                } else {
                    self.run(otherwise)?;
                }
            }
            CStmt::For { init, cond, step, body } => {
                self.run(init)?;
                loop {
                    if let Some(c) = cond {
                        if !truth(self.expr(c)?) {
                            break;
                        }
                    }
                    self.run(body)?;
                    self.run(step)?;
                }
            }
            CStmt::Eval(e) => {
                self.expr(e)?;
            }
        }
        Ok(())
    }

    fn expr(&mut self, e: &CExpr) -> Result<f64> {
        Ok(match e {
            CExpr::Num(x) => *x,
            CExpr::Local(k) => self.frame[*k],
            CExpr::Load { label, site, index } => {
                let r = self.expr(index)?;
                let r = self.component(*label, r)?;
                let slot = self.map[*label];
                match site {
                    Site::I => self.env.read_i(slot, r)?,
                    Site::J => self.env.read_j(slot, r)?,
                    Site::Global => self.env.read_global(slot, r)?,
                }
            }
            CExpr::Un(op, a) => {
                let a = self.expr(a)?;
                match op {
                    UnOp::Neg => -a,
                    UnOp::Plus => a,
                    UnOp::Not => flag(!truth(a)),
                }
            }
            CExpr::Bin(BinOp::And, a, b) => flag(truth(self.expr(a)?) && truth(self.expr(b)?)),
            CExpr::Bin(BinOp::Or, a, b) => flag(truth(self.expr(a)?) || truth(self.expr(b)?)),
            CExpr::Bin(op, a, b) => {
                let a = self.expr(a)?;
                let b = self.expr(b)?;
                binary(*op, a, b)
            }
            CExpr::Tern(c, a, b) => {
                if truth(self.expr(c)?) {
                    self.expr(a)?
                } else {
                    self.expr(b)?
                }
            }
            CExpr::Sqrt(a) => math::sqrt(self.expr(a)?),
        })
    }
}

#[inline]
fn binary(op: BinOp, a: f64, b: f64) -> f64 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
        BinOp::Lt => flag(a < b),
        BinOp::Le => flag(a <= b),
        BinOp::Gt => flag(a > b),
        BinOp::Ge => flag(a >= b),
        BinOp::Eq => flag(a == b),
        BinOp::Ne => flag(a != b),
        BinOp::And => flag(truth(a) && truth(b)),
        BinOp::Or => flag(truth(a) || truth(b)),
    }
}

/// A compiled kernel bound to one loop's slots.
pub(crate) struct Linked<'k> {
    pub(crate) kernel: &'k CompiledKernel,
    pub(crate) map: Vec<usize>,
}

impl Invoke for Linked<'_> {
    fn invoke(&self, ctx: &mut Ctx<'_, '_>) -> Result<()> {
        self.kernel.eval(&self.map, ctx)
    }
}

pub(crate) fn literal(value: Scalar) -> Expr {
    match value {
        Scalar::Float(x) => Expr::Float(x),
        Scalar::Int(x) => Expr::Int(x),
    }
}
