use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

/// Parsed kernel: a flat list of top-level statements.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KernelAst {
    pub statements: Vec<Stmt>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ty {
    Double,
    Float,
    Int,
    Long,
}

impl Ty {
    pub fn is_integer(self) -> bool {
        matches!(self, Ty::Int | Ty::Long)
    }
}

/// Which particle of the pair a property access refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    I,
    J,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Plus,
    Not,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Builtin {
    Sqrt,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Float(f64),
    Int(i64),
    /// Local, constant or bare global name.
    Ident(String),
    /// `X.i[e]` or `X.j[e]`.
    Prop {
        name: String,
        side: Side,
        index: Box<Expr>,
    },
    /// `G[e]` on a global.
    Index {
        name: String,
        index: Box<Expr>,
    },
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    Call(Builtin, Vec<Expr>),
}

/// Assignable location.
#[derive(Clone, Debug, PartialEq)]
pub enum Place {
    Ident(String),
    Prop { name: String, side: Side, index: Expr },
    Index { name: String, index: Expr },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    Decl {
        ty: Ty,
        constant: bool,
        vars: Vec<(String, Option<Expr>)>,
    },
    Assign {
        place: Place,
        op: AssignOp,
        value: Expr,
    },
    /// `++x`, `x++` (delta 1) or the decrements (delta -1).
    Step {
        place: Place,
        delta: i8,
    },
    If {
        cond: Expr,
        then: Box<Stmt>,
        otherwise: Option<Box<Stmt>>,
    },
    For {
        init: Option<Box<Stmt>>,
        cond: Option<Expr>,
        step: Option<Box<Stmt>>,
        body: Box<Stmt>,
    },
    Block(Vec<Stmt>),
    Expr(Expr),
}
