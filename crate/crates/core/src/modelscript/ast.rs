use std::fmt;

use super::SourceSpan;

#[derive(Debug, Clone, PartialEq)]
pub struct Ident {
    pub name: String,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arg {
    pub name: Option<Ident>,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Number(f64),
    Ident(String),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call { name: Ident, args: Vec<Arg> },
    Tuple(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamDecl {
    pub name: Ident,
    pub init: f64,
    pub bounds: Option<(f64, f64)>,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LetDecl {
    pub name: Ident,
    pub expr: Expr,
    pub span: SourceSpan,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Item {
    Param(ParamDecl),
    Let(LetDecl),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Program {
    pub items: Vec<Item>,
    pub output: Expr,
}

impl Program {
    pub fn lets(&self) -> impl Iterator<Item = &LetDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Let(l) => Some(l),
            Item::Param(_) => None,
        })
    }

    pub fn params(&self) -> impl Iterator<Item = &ParamDecl> {
        self.items.iter().filter_map(|i| match i {
            Item::Param(p) => Some(p),
            Item::Let(_) => None,
        })
    }

    /// Copy with every span zeroed, for structural comparison.
    pub fn without_spans(&self) -> Program {
        let z = SourceSpan::default();
        let id = |i: &Ident| Ident { name: i.name.clone(), span: z };
        Program {
            items: self
                .items
                .iter()
                .map(|it| match it {
                    Item::Param(p) => Item::Param(ParamDecl { name: id(&p.name), init: p.init, bounds: p.bounds, span: z }),
                    Item::Let(l) => Item::Let(LetDecl { name: id(&l.name), expr: l.expr.without_spans(), span: z }),
                })
                .collect(),
            output: self.output.without_spans(),
        }
    }
}

impl Expr {
    pub fn without_spans(&self) -> Expr {
        let z = SourceSpan::default();
        let kind = match &self.kind {
            ExprKind::Number(v) => ExprKind::Number(*v),
            ExprKind::Ident(s) => ExprKind::Ident(s.clone()),
            ExprKind::Neg(e) => ExprKind::Neg(Box::new(e.without_spans())),
            ExprKind::Binary(op, a, b) => ExprKind::Binary(*op, Box::new(a.without_spans()), Box::new(b.without_spans())),
            ExprKind::Call { name, args } => ExprKind::Call {
                name: Ident { name: name.name.clone(), span: z },
                args: args
                    .iter()
                    .map(|a| Arg {
                        name: a.name.as_ref().map(|n| Ident { name: n.name.clone(), span: z }),
                        value: a.value.without_spans(),
                    })
                    .collect(),
            },
            ExprKind::Tuple(v) => ExprKind::Tuple(v.iter().map(Expr::without_spans).collect()),
        };
        Expr { kind, span: z }
    }

    /// 3 for atoms and negation, else the operator's precedence.
    fn precedence(&self) -> u8 {
        match &self.kind {
            ExprKind::Binary(op, ..) => op.precedence(),
            _ => 3,
        }
    }
}

fn paren(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Number(v) => write!(f, "{v}"),
            ExprKind::Ident(s) => f.write_str(s),
            ExprKind::Neg(e) => {
                f.write_str("-")?;
                // `-(-x)` rather than `--x`
                let wrap = e.precedence() < 3 || matches!(e.kind, ExprKind::Neg(_));
                paren(f, e, wrap)
            }
            ExprKind::Binary(op, a, b) => {
                paren(f, a, a.precedence() < op.precedence())?;
                write!(f, " {} ", op.symbol())?;
                paren(f, b, b.precedence() <= op.precedence())
            }
            ExprKind::Call { name, args } => {
                write!(f, "{}(", name.name)?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    if let Some(n) = &a.name {
                        write!(f, "{}=", n.name)?;
                    }
                    write!(f, "{}", a.value)?;
                }
                f.write_str(")")
            }
            ExprKind::Tuple(v) => {
                f.write_str("(")?;
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{e}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for item in &self.items {
            match item {
                Item::Param(p) => {
                    write!(f, "param {} = {}", p.name.name, p.init)?;
                    if let Some((lo, hi)) = p.bounds {
                        write!(f, " in [{lo}, {hi}]")?;
                    }
                    f.write_str(";\n")?;
                }
                Item::Let(l) => writeln!(f, "let {} = {};", l.name.name, l.expr)?,
            }
        }
        writeln!(f, "output {};", self.output)
    }
}
