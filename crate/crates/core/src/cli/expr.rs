//! Closed-form space-time expressions for initial data and sources.
//!
//! Grammar: numbers, `x y z t`, `pi`, `+ - * / ^`, unary minus, parentheses and
//! the functions `sin cos exp sqrt`. `^` is right-associative and binds
//! tighter than unary minus (`-x^2 = -(x^2)`).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

/// A parsed expression in `x, y, z, t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
}

fn tokenize(s: &str) -> Result<Vec<Tok>> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = i;
                i += 1;
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    i += 1;
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                } else {
                    i = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v = text.parse().map_err(|_| Error::Expression(format!("bad number '{text}'")))?;
            out.push(Tok::Num(v));
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Tok::Ident(chars[start..i].iter().collect()));
        } else if "+-*/^(),".contains(c) {
            out.push(Tok::Op(c));
            i += 1;
        } else {
            return Err(Error::Expression(format!("unexpected character '{c}' in '{s}'")));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn eat(&mut self, op: char) -> bool {
        if self.peek() == Some(&Tok::Op(op)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Node> {
        let mut lhs = self.product()?;
        loop {
            let op = if self.eat('+') {
                '+'
            } else if self.eat('-') {
                '-'
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.product()?));
        }
    }

    fn product(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = if self.eat('*') {
                '*'
            } else if self.eat('/') {
                '/'
            } else {
                return Ok(lhs);
            };
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            let exp = self.unary()?;
            return Ok(Node::Bin('^', Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        let tok = self.peek().cloned().ok_or_else(|| Error::Expression("unexpected end of expression".into()))?;
        self.pos += 1;
        match tok {
            Tok::Num(v) => Ok(Node::Num(v)),
            Tok::Op('(') => {
                let inner = self.sum()?;
                if !self.eat(')') {
                    return Err(Error::Expression("missing ')'".into()));
                }
                Ok(inner)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Node::Var(0)),
                "y" => Ok(Node::Var(1)),
                "z" => Ok(Node::Var(2)),
                "t" => Ok(Node::Var(3)),
                "pi" => Ok(Node::Num(std::f64::consts::PI)),
                "sin" | "cos" | "exp" | "sqrt" => {
                    let f = match name.as_str() {
                        "sin" => Func::Sin,
                        "cos" => Func::Cos,
                        "exp" => Func::Exp,
                        _ => Func::Sqrt,
                    };
                    if !self.eat('(') {
                        return Err(Error::Expression(format!("'{name}' must be followed by '('")));
                    }
                    let arg = self.sum()?;
                    if !self.eat(')') {
                        return Err(Error::Expression("missing ')'".into()));
                    }
                    Ok(Node::Call(f, Box::new(arg)))
                }
                _ => Err(Error::Expression(format!("unknown identifier '{name}'"))),
            },
            Tok::Op(c) => Err(Error::Expression(format!("unexpected '{c}'"))),
        }
    }
}

fn eval(node: &Node, v: &[f64; 4]) -> f64 {
    match node {
        Node::Num(c) => *c,
        Node::Var(i) => v[*i],
        Node::Neg(a) => -eval(a, v),
        Node::Call(f, a) => {
            let x = eval(a, v);
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Sqrt => x.sqrt(),
            }
        }
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, v), eval(b, v));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
    }
}

impl Expr {
    pub fn parse(s: &str) -> Result<Self> {
        let mut p = Parser { toks: tokenize(s)?, pos: 0 };
        if p.toks.is_empty() {
            return Err(Error::Expression("empty expression".into()));
        }
        let root = p.sum()?;
        if p.pos != p.toks.len() {
            return Err(Error::Expression(format!("trailing input in '{s}'")));
        }
        Ok(Expr { source: s.trim().to_string(), root })
    }

    pub fn eval(&self, p: &[f64; 3], t: f64) -> f64 {
        eval(&self.root, &[p[0], p[1], p[2], t])
    }

    /// True when the expression is the literal constant zero.
    pub fn is_zero(&self) -> bool {
        self.root == Node::Num(0.0)
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn at(s: &str, x: f64, y: f64, z: f64, t: f64) -> f64 {
        Expr::parse(s).unwrap().eval(&[x, y, z], t)
    }

    #[test]
    fn precedence() {
        assert_eq!(at("1 + 2 * 3", 0.0, 0.0, 0.0, 0.0), 7.0);
        assert_eq!(at("2 ^ 3 ^ 2", 0.0, 0.0, 0.0, 0.0), 512.0);
        assert_eq!(at("-x^2", 3.0, 0.0, 0.0, 0.0), -9.0);
        assert_eq!(at("(1 - 2) * 3", 0.0, 0.0, 0.0, 0.0), -3.0);
        assert_eq!(at("8 / 4 / 2", 0.0, 0.0, 0.0, 0.0), 1.0);
        assert_eq!(at("1.5e2 + 2E-1", 0.0, 0.0, 0.0, 0.0), 150.2);
    }

    #[test]
    fn preset_initial_data() {
        let (x, y, z) = (0.3, 0.7, 0.2);
        let v = at("sin(pi*x)*sin(pi*y)*sin(pi*z)*exp(x)*cos(y)*z", x, y, z, 0.0);
        let r = (PI * x).sin() * (PI * y).sin() * (PI * z).sin() * x.exp() * y.cos() * z;
        assert!((v - r).abs() < 1e-15);
        assert_eq!(at("exp(-t)", 0.0, 0.0, 0.0, 1.0), (-1.0f64).exp());
    }

    #[test]
    fn errors() {
        for bad in ["", "1 +", "sin x", "foo", "(1", "1)", "2 $ 3", "x y"] {
            assert!(Expr::parse(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn zero_detection() {
        assert!(Expr::parse("0").unwrap().is_zero());
        assert!(!Expr::parse("0*x").unwrap().is_zero());
    }

    proptest! {
        #[test]
        fn linear_combinations(a in -10.0..10.0f64, b in -10.0..10.0f64, x in -2.0..2.0f64, y in -2.0..2.0f64) {
            let s = format!("({a:e})*x - ({b:e})*y");
            let v = at(&s, x, y, 0.0, 0.0);
            prop_assert!((v - (a * x - b * y)).abs() <= 1e-12 * (1.0 + (a * x).abs() + (b * y).abs()));
        }
    }
}
