//! Run configuration: flat `key = value` files, presets and overrides.

use std::fmt::Write as _;
use std::path::PathBuf;

use super::expr::Expr;
use crate::error::{Error, Result};

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dim: usize,
    pub n: usize,
    pub k: usize,
    /// `c = 1/a` with `a` the diffusivity.
    pub c: f64,
    pub tau: f64,
    pub dt: f64,
    pub t_final: f64,
    pub problem: String,
    pub u0: Expr,
    pub f: Expr,
    pub r_list: Vec<usize>,
    pub out: PathBuf,
    pub cadence: usize,
    pub store_flux: bool,
    pub seed: u64,
    pub r_max: Option<usize>,
}

pub const PRESETS: [&str; 4] = ["2d-paper", "3d-paper", "3d-small", "small"];

const U0_2D: &str = "sin(pi*x)*sin(pi*y)*exp(x)*cos(y)";
const U0_3D: &str = "sin(pi*x)*sin(pi*y)*sin(pi*z)*exp(x)*cos(y)*z";

impl RunConfig {
    /// The 2D reference setup with diffusivity `a = 0.01`.
    pub fn paper_2d() -> Self {
        RunConfig {
            dim: 2,
            n: 32,
            k: 1,
            c: 100.0,
            tau: 1.0,
            dt: 0.001,
            t_final: 1.0,
            problem: "2d-paper".into(),
            u0: Expr::parse(U0_2D).expect("valid"),
            f: Expr::parse("0").expect("valid"),
            r_list: vec![7, 10, 13, 16, 20],
            out: PathBuf::from("out"),
            cadence: 1,
            store_flux: true,
            seed: 0,
            r_max: None,
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let base = Self::paper_2d();
        Ok(match name {
            "2d-paper" => base,
            "3d-paper" => RunConfig {
                dim: 3,
                n: 16,
                problem: "3d-paper".into(),
                u0: Expr::parse(U0_3D).expect("valid"),
                r_list: vec![3, 6, 9, 12, 15],
                store_flux: false,
                ..base
            },
            "3d-small" => RunConfig { n: 8, ..Self::preset("3d-paper")? },
            "small" => RunConfig { n: 4, dt: 0.02, r_list: vec![1, 3, 5, 7], ..base },
            _ => {
                return Err(Error::Config(format!("unknown preset '{name}' (known: {})", PRESETS.join(", "))));
            }
        })
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("{key}: cannot parse '{value}' as {what}"));
        let uint = || value.parse::<usize>().map_err(|_| bad("a non-negative integer"));
        let real = || value.parse::<f64>().map_err(|_| bad("a number"));
        match key.trim() {
            "dim" => self.dim = uint()?,
            "n" => self.n = uint()?,
            "k" => self.k = uint()?,
            "c" => self.c = real()?,
            "a" => self.c = 1.0 / real()?,
            "tau" => self.tau = real()?,
            "dt" => self.dt = real()?,
            "t_final" | "T" => self.t_final = real()?,
            "problem" => self.problem = value.to_string(),
            "u0" => self.u0 = Expr::parse(value)?,
            "f" => self.f = Expr::parse(value)?,
            "r_list" => self.r_list = parse_r_list(value)?,
            "out" => self.out = PathBuf::from(value),
            "cadence" => self.cadence = uint()?,
            "store_flux" => {
                self.store_flux = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(bad("a boolean")),
                }
            }
            "seed" => self.seed = value.parse().map_err(|_| bad("an integer"))?,
            "r_max" => self.r_max = if value == "none" { None } else { Some(uint()?) },
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies a `key = value` file; `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
            self.set(k.trim(), v)?;
        }
        Ok(())
    }

    /// For the manufactured problem, fills in `u0` and `f` for the exact
    /// solution `exp(-t) prod sin(pi x_i)`.
    pub fn resolve_problem(&mut self) -> Result<()> {
        if self.problem == "manufactured" {
            let u = if self.dim == 3 { "sin(pi*x)*sin(pi*y)*sin(pi*z)" } else { "sin(pi*x)*sin(pi*y)" };
            let a = 1.0 / self.c;
            let coef = a * self.dim as f64 * std::f64::consts::PI.powi(2) - 1.0;
            self.u0 = Expr::parse(u)?;
            self.f = Expr::parse(&format!("({coef:e})*exp(-t)*{u}"))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.dim != 2 && self.dim != 3 {
            return fail(format!("dim must be 2 or 3, got {}", self.dim));
        }
        if self.n == 0 {
            return fail("n must be at least 1".into());
        }
        if self.k > 6 {
            return fail(format!("k must be at most 6, got {}", self.k));
        }
        for (name, v) in [("c", self.c), ("tau", self.tau), ("dt", self.dt), ("t_final", self.t_final)] {
            if !(v > 0.0) || !v.is_finite() {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if self.cadence == 0 {
            return fail("cadence must be at least 1".into());
        }
        if self.r_list.contains(&0) {
            return fail("r_list entries must be at least 1".into());
        }
        crate::fom::step_count(self.dt, self.t_final).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// `key = value` text that [`RunConfig::apply_text`] reads back.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "n = {}", self.n);
        let _ = writeln!(s, "k = {}", self.k);
        let _ = writeln!(s, "c = {:e}", self.c);
        let _ = writeln!(s, "tau = {:e}", self.tau);
        let _ = writeln!(s, "dt = {:e}", self.dt);
        let _ = writeln!(s, "t_final = {:e}", self.t_final);
        let _ = writeln!(s, "problem = {}", self.problem);
        let _ = writeln!(s, "u0 = {}", self.u0.source());
        let _ = writeln!(s, "f = {}", self.f.source());
        let r: Vec<String> = self.r_list.iter().map(|r| r.to_string()).collect();
        let _ = writeln!(s, "r_list = {}", r.join(","));
        let _ = writeln!(s, "out = {}", self.out.display());
        let _ = writeln!(s, "cadence = {}", self.cadence);
        let _ = writeln!(s, "store_flux = {}", self.store_flux);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "r_max = {}", self.r_max.map_or("none".to_string(), |r| r.to_string()));
        s
    }
}

pub fn parse_r_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|p| p.trim())
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<usize>().map_err(|_| Error::Config(format!("bad r value '{p}'"))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        for p in PRESETS {
            RunConfig::preset(p).unwrap().validate().unwrap();
        }
        let c = RunConfig::preset("3d-paper").unwrap();
        assert_eq!((c.dim, c.n, c.r_list.clone()), (3, 16, vec![3, 6, 9, 12, 15]));
        assert!(RunConfig::preset("4d").is_err());
    }

    #[test]
    fn text_round_trip() {
        let mut c = RunConfig::preset("3d-small").unwrap();
        c.r_max = Some(30);
        c.set("f", "exp(-t)*x").unwrap();
        let mut back = RunConfig::paper_2d();
        back.apply_text(&c.to_text()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn diffusivity_key_sets_inverse() {
        let mut c = RunConfig::paper_2d();
        c.apply_text("a = 0.5  # diffusivity\n\n").unwrap();
        assert_eq!(c.c, 2.0);
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = RunConfig::paper_2d();
        assert!(c.set("dt", "abc").is_err());
        assert!(c.set("colour", "red").is_err());
        assert!(c.apply_text("dt 0.1").is_err());
        c.set("dt", "-0.1").unwrap();
        assert!(c.validate().is_err());
        let mut c = RunConfig::paper_2d();
        c.set("dt", "0.3").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn manufactured_source() {
        let mut c = RunConfig::paper_2d();
        c.set("problem", "manufactured").unwrap();
        c.set("c", "1").unwrap();
        c.resolve_problem().unwrap();
        let p = [0.25, 0.5, 0.0];
        let u = c.u0.eval(&p, 0.0);
        let pi2 = std::f64::consts::PI.powi(2);
        assert!((c.f.eval(&p, 0.0) - (2.0 * pi2 - 1.0) * u).abs() < 1e-12);
    }
}
