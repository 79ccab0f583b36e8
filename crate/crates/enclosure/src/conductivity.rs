//! Conductivity models: smooth background γ₀ plus piecewise-constant
//! inclusion contrast.
//!
//! The background is either the constant 1 or a closed-form expression over a
//! small vocabulary (constants, coordinates, sums, products, exponentials,
//! and a smooth compactly supported bump), restricted so that γ₀ − 1 vanishes
//! outside a stated support box. Expressions carry exact first and second
//! derivatives via forward-mode jets, which the Liouville transform needs.

use crate::error::{Error, Result};
use crate::geom::{Rect, Vec2};
use crate::grid::Grid;
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Expression language
// ---------------------------------------------------------------------------

/// Value with first and second partial derivatives at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Jet2 {
    pub fn constant(c: f64) -> Self {
        Jet2 {
            v: c,
            dx: 0.0,
            dy: 0.0,
            dxx: 0.0,
            dxy: 0.0,
            dyy: 0.0,
        }
    }

    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dxy: self.dxy + o.dxy,
            dyy: self.dyy + o.dyy,
        }
    }

    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v - o.v,
            dx: self.dx - o.dx,
            dy: self.dy - o.dy,
            dxx: self.dxx - o.dxx,
            dxy: self.dxy - o.dxy,
            dyy: self.dyy - o.dyy,
        }
    }

    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
            dxx: self.dxx * o.v + 2.0 * self.dx * o.dx + self.v * o.dxx,
            dxy: self.dxy * o.v + self.dx * o.dy + self.dy * o.dx + self.v * o.dxy,
            dyy: self.dyy * o.v + 2.0 * self.dy * o.dy + self.v * o.dyy,
        }
    }

    fn neg(self) -> Jet2 {
        Jet2 {
            v: -self.v,
            dx: -self.dx,
            dy: -self.dy,
            dxx: -self.dxx,
            dxy: -self.dxy,
            dyy: -self.dyy,
        }
    }

    /// Chain rule for a scalar function with given first/second derivative.
    fn compose(self, f: f64, f1: f64, f2: f64) -> Jet2 {
        Jet2 {
            v: f,
            dx: f1 * self.dx,
            dy: f1 * self.dy,
            dxx: f2 * self.dx * self.dx + f1 * self.dxx,
            dxy: f2 * self.dx * self.dy + f1 * self.dxy,
            dyy: f2 * self.dy * self.dy + f1 * self.dyy,
        }
    }

    fn exp(self) -> Jet2 {
        let e = self.v.exp();
        self.compose(e, e, e)
    }

    /// Laplacian from the stored second derivatives.
    pub fn laplacian(&self) -> f64 {
        self.dxx + self.dyy
    }
}

/// Closed-form expression node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expr {
    Const(f64),
    X,
    Y,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    Exp(Box<Expr>),
    /// Smooth compactly supported bump of its argument q:
    /// exp(1 − 1/(1 − q)) for q < 1, and exactly 0 for q ≥ 1.
    Bump(Box<Expr>),
    /// Integer power (sugar for repeated products).
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn eval_jet(&self, x: f64, y: f64) -> Jet2 {
        match self {
            Expr::Const(c) => Jet2::constant(*c),
            Expr::X => Jet2 {
                v: x,
                dx: 1.0,
                dy: 0.0,
                dxx: 0.0,
                dxy: 0.0,
                dyy: 0.0,
            },
            Expr::Y => Jet2 {
                v: y,
                dx: 0.0,
                dy: 1.0,
                dxx: 0.0,
                dxy: 0.0,
                dyy: 0.0,
            },
            Expr::Add(a, b) => a.eval_jet(x, y).add(b.eval_jet(x, y)),
            Expr::Sub(a, b) => a.eval_jet(x, y).sub(b.eval_jet(x, y)),
            Expr::Mul(a, b) => a.eval_jet(x, y).mul(b.eval_jet(x, y)),
            Expr::Neg(a) => a.eval_jet(x, y).neg(),
            Expr::Exp(a) => a.eval_jet(x, y).exp(),
            Expr::Bump(a) => {
                let q = a.eval_jet(x, y);
                if q.v >= 1.0 - 1e-12 {
                    Jet2::constant(0.0)
                } else {
                    // m(q) = exp(1 - 1/(1-q)); m' = m * (-1/(1-q)^2);
                    // m'' = m * (1/(1-q)^4 - 2/(1-q)^3).
                    let s = 1.0 / (1.0 - q.v);
                    let m = (1.0 - s).exp();
                    let m1 = -m * s * s;
                    let m2 = m * (s * s * s * s - 2.0 * s * s * s);
                    q.compose(m, m1, m2)
                }
            }
            Expr::Pow(a, n) => {
                let base = a.eval_jet(x, y);
                let mut acc = Jet2::constant(1.0);
                for _ in 0..*n {
                    acc = acc.mul(base);
                }
                acc
            }
        }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.eval_jet(x, y).v
    }
}

/// Parse an expression from a string (used by config files).
///
/// Grammar: sums/differences of terms, terms are products of factors, factors
/// are numbers, `x`, `y`, parenthesized expressions, `exp(e)`, `bump(e)`,
/// unary minus, and `f^n` integer powers.
pub fn parse_expr(src: &str) -> Result<Expr> {
    let tokens = tokenize(src)?;
    let mut p = Parser { tokens, pos: 0 };
    let e = p.parse_sum()?;
    if p.pos != p.tokens.len() {
        return Err(Error::Expr(format!(
            "unexpected trailing input near token {}",
            p.pos
        )));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn tokenize(src: &str) -> Result<Vec<Tok>> {
    let mut out = Vec::new();
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\n' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1;
            }
            '-' => {
                out.push(Tok::Minus);
                i += 1;
            }
            '*' => {
                out.push(Tok::Star);
                i += 1;
            }
            '/' => {
                out.push(Tok::Slash);
                i += 1;
            }
            '^' => {
                out.push(Tok::Caret);
                i += 1;
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1;
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1;
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < bytes.len()
                    && (bytes[i].is_ascii_digit()
                        || bytes[i] == '.'
                        || bytes[i] == 'e'
                        || bytes[i] == 'E'
                        || ((bytes[i] == '+' || bytes[i] == '-')
                            && i > start
                            && (bytes[i - 1] == 'e' || bytes[i - 1] == 'E')))
                {
                    i += 1;
                }
                let s: String = bytes[start..i].iter().collect();
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::Expr(format!("bad number literal {s:?}")))?;
                out.push(Tok::Num(v));
            }
            c if c.is_ascii_alphabetic() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                out.push(Tok::Ident(bytes[start..i].iter().collect()));
            }
            other => return Err(Error::Expr(format!("unexpected character {other:?}"))),
        }
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, t: Tok) -> Result<()> {
        match self.next() {
            Some(got) if got == t => Ok(()),
            got => Err(Error::Expr(format!("expected {t:?}, got {got:?}"))),
        }
    }

    fn parse_sum(&mut self) -> Result<Expr> {
        let mut acc = self.parse_product()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    let rhs = self.parse_product()?;
                    acc = Expr::Add(Box::new(acc), Box::new(rhs));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    let rhs = self.parse_product()?;
                    acc = Expr::Sub(Box::new(acc), Box::new(rhs));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_product(&mut self) -> Result<Expr> {
        let mut acc = self.parse_power()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    let rhs = self.parse_power()?;
                    acc = Expr::Mul(Box::new(acc), Box::new(rhs));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    // Division only by numeric literals keeps the vocabulary
                    // closed under exact differentiation.
                    match self.parse_power()? {
                        Expr::Const(c) if c != 0.0 => {
                            acc = Expr::Mul(Box::new(acc), Box::new(Expr::Const(1.0 / c)));
                        }
                        other => {
                            return Err(Error::Expr(format!(
                                "division is only supported by nonzero constants, got {other:?}"
                            )))
                        }
                    }
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_power(&mut self) -> Result<Expr> {
        let base = self.parse_atom()?;
        if let Some(Tok::Caret) = self.peek() {
            self.pos += 1;
            match self.next() {
                Some(Tok::Num(n)) if n >= 0.0 && n.fract() == 0.0 && n <= 16.0 => {
                    Ok(Expr::Pow(Box::new(base), n as u32))
                }
                got => Err(Error::Expr(format!(
                    "exponent must be a small nonnegative integer, got {got:?}"
                ))),
            }
        } else {
            Ok(base)
        }
    }

    fn parse_atom(&mut self) -> Result<Expr> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Expr::Const(v)),
            Some(Tok::Minus) => Ok(Expr::Neg(Box::new(self.parse_power()?))),
            Some(Tok::LParen) => {
                let e = self.parse_sum()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "x" => Ok(Expr::X),
                "y" => Ok(Expr::Y),
                "exp" | "bump" => {
                    self.expect(Tok::LParen)?;
                    let arg = self.parse_sum()?;
                    self.expect(Tok::RParen)?;
                    Ok(if name == "exp" {
                        Expr::Exp(Box::new(arg))
                    } else {
                        Expr::Bump(Box::new(arg))
                    })
                }
                other => Err(Error::Expr(format!("unknown identifier {other:?}"))),
            },
            got => Err(Error::Expr(format!("unexpected token {got:?}"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Background conductivity
// ---------------------------------------------------------------------------

/// Background conductivity γ₀.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Gamma0 {
    /// γ₀ ≡ 1.
    One,
    /// Closed-form expression, with γ₀ − 1 forced to zero outside the
    /// support box.
    Expr { expr: Expr, support: Rect },
}

impl Gamma0 {
    pub fn is_one(&self) -> bool {
        matches!(self, Gamma0::One)
    }

    pub fn support_box(&self) -> Option<Rect> {
        match self {
            Gamma0::One => None,
            Gamma0::Expr { support, .. } => Some(*support),
        }
    }

    pub fn eval(&self, p: Vec2) -> f64 {
        match self {
            Gamma0::One => 1.0,
            Gamma0::Expr { expr, support } => {
                if support.contains(p) {
                    expr.eval(p.x, p.y)
                } else {
                    1.0
                }
            }
        }
    }

    pub fn eval_jet(&self, p: Vec2) -> Jet2 {
        match self {
            Gamma0::One => Jet2::constant(1.0),
            Gamma0::Expr { expr, support } => {
                if support.contains(p) {
                    expr.eval_jet(p.x, p.y)
                } else {
                    Jet2::constant(1.0)
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Inclusions
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InclusionShape {
    Disk { cx: f64, cy: f64, radius: f64 },
    Polygon { vertices: Vec<(f64, f64)> },
}

/// One inclusion: geometry plus scalar contrast k (γ = k γ₀ inside).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionSpec {
    pub shape: InclusionShape,
    pub contrast: f64,
}

impl InclusionSpec {
    pub fn contains(&self, p: Vec2) -> bool {
        match &self.shape {
            InclusionShape::Disk { cx, cy, radius } => {
                (p - Vec2::new(*cx, *cy)).norm() <= *radius
            }
            InclusionShape::Polygon { vertices } => point_in_polygon(p, vertices),
        }
    }

    /// Support function h(ω) = sup_{x in D} x·ω.
    pub fn support(&self, omega: Vec2) -> f64 {
        match &self.shape {
            InclusionShape::Disk { cx, cy, radius } => {
                Vec2::new(*cx, *cy).dot(omega) + radius
            }
            InclusionShape::Polygon { vertices } => vertices
                .iter()
                .map(|&(x, y)| Vec2::new(x, y).dot(omega))
                .fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Largest signed distance of the inclusion closure to ∂Ω; positive when
    /// strictly inside.
    pub fn margin_to(&self, domain: &crate::grid::DomainSpec) -> f64 {
        match &self.shape {
            InclusionShape::Disk { cx, cy, radius } => {
                -domain.signed_distance(Vec2::new(*cx, *cy)) - radius
            }
            InclusionShape::Polygon { vertices } => vertices
                .iter()
                .map(|&(x, y)| -domain.signed_distance(Vec2::new(x, y)))
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Contrast regime: Some(true) for (A2) k > 1, Some(false) for (A1)
    /// 0 < k < 1, None for the degenerate k = 1.
    pub fn regime(&self) -> Option<bool> {
        if self.contrast > 1.0 {
            Some(true)
        } else if self.contrast > 0.0 && self.contrast < 1.0 {
            Some(false)
        } else {
            None
        }
    }
}

fn point_in_polygon(p: Vec2, vertices: &[(f64, f64)]) -> bool {
    // Even-odd ray casting; adequate for convex inclusion polygons.
    let n = vertices.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (xi, yi) = vertices[i];
        let (xj, yj) = vertices[j];
        if ((yi > p.y) != (yj > p.y))
            && (p.x < (xj - xi) * (p.y - yi) / (yj - yi) + xi)
        {
            inside = !inside;
        }
        j = i;
    }
    inside
}

// ---------------------------------------------------------------------------
// Full model and sampled field
// ---------------------------------------------------------------------------

/// Complete conductivity description of the body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConductivityModel {
    pub domain: crate::grid::DomainSpec,
    pub gamma0: Gamma0,
    pub inclusions: Vec<InclusionSpec>,
}

impl ConductivityModel {
    /// Validate geometry and coefficient assumptions. Returns warnings for
    /// conditions that are suspicious but still runnable (k = 1 contrast).
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        for (idx, inc) in self.inclusions.iter().enumerate() {
            let margin = inc.margin_to(&self.domain);
            if margin <= 0.0 {
                return Err(Error::Model(format!(
                    "inclusion {idx} touches or crosses the domain boundary (margin {margin:.3e})"
                )));
            }
            if inc.contrast <= 0.0 {
                return Err(Error::Model(format!(
                    "inclusion {idx} contrast {} must be positive",
                    inc.contrast
                )));
            }
            if inc.regime().is_none() {
                warnings.push(format!(
                    "inclusion {idx} has unit contrast; it is invisible to the jump conditions"
                ));
            }
        }
        if let Gamma0::Expr { expr, support } = &self.gamma0 {
            if support.width() <= 0.0 || support.height() <= 0.0 {
                return Err(Error::Model("gamma0 support box is degenerate".into()));
            }
            // Spot-check positivity on a coarse lattice.
            for j in 0..21 {
                for i in 0..21 {
                    let p = Vec2::new(
                        support.x0 + support.width() * i as f64 / 20.0,
                        support.y0 + support.height() * j as f64 / 20.0,
                    );
                    let v = expr.eval(p.x, p.y);
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::Model(format!(
                            "gamma0 is not positive at ({:.3}, {:.3}): {v}",
                            p.x, p.y
                        )));
                    }
                }
            }
        }
        Ok(warnings)
    }

    pub fn gamma0_at(&self, p: Vec2) -> f64 {
        self.gamma0.eval(p)
    }

    /// Full conductivity at a point (background times contrast).
    pub fn gamma_at(&self, p: Vec2) -> f64 {
        let g0 = self.gamma0.eval(p);
        for inc in &self.inclusions {
            if inc.contains(p) {
                return inc.contrast * g0;
            }
        }
        g0
    }

    /// Copy of the model with all inclusions removed.
    pub fn background_only(&self) -> ConductivityModel {
        ConductivityModel {
            domain: self.domain,
            gamma0: self.gamma0.clone(),
            inclusions: Vec::new(),
        }
    }
}

/// Cellwise-sampled conductivity.
#[derive(Debug, Clone)]
pub struct ConductivityField {
    pub values: Vec<f64>,
    pub min_value: f64,
    pub max_value: f64,
}

/// Sample the conductivity at cell centers. A cell is inside an inclusion
/// iff its center is (no partial-volume fractions).
pub fn sample_conductivity(grid: &Grid, model: &ConductivityModel) -> Result<ConductivityField> {
    model.validate()?;
    let mut values = vec![1.0; grid.n_cells()];
    let mut min_value = f64::INFINITY;
    let mut max_value = f64::NEG_INFINITY;
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let idx = grid.idx(i, j);
            if !grid.active[idx] {
                continue;
            }
            let v = model.gamma_at(grid.cell_center(i, j));
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Model(format!(
                    "sampled conductivity nonpositive at cell ({i}, {j}): {v}"
                )));
            }
            values[idx] = v;
            min_value = min_value.min(v);
            max_value = max_value.max(v);
        }
    }
    Ok(ConductivityField {
        values,
        min_value,
        max_value,
    })
}
