use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkKind {
    Ackley,
    Alpine1,
    Hartmann3,
    Hartmann6,
    Dropwave,
    Levy,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 6] = [
        BenchmarkKind::Ackley,
        BenchmarkKind::Alpine1,
        BenchmarkKind::Hartmann3,
        BenchmarkKind::Hartmann6,
        BenchmarkKind::Dropwave,
        BenchmarkKind::Levy,
    ];

    /// Dimension the function is defined for, if fixed.
    pub fn fixed_dimension(self) -> Option<usize> {
        match self {
            BenchmarkKind::Hartmann3 => Some(3),
            BenchmarkKind::Hartmann6 => Some(6),
            BenchmarkKind::Dropwave => Some(2),
            _ => None,
        }
    }

    /// Box the unit cube is stretched onto.
    pub fn default_bounds(self) -> (f64, f64) {
        match self {
            BenchmarkKind::Ackley => (-32.768, 32.768),
            BenchmarkKind::Alpine1 => (-10.0, 10.0),
            BenchmarkKind::Hartmann3 | BenchmarkKind::Hartmann6 => (0.0, 1.0),
            BenchmarkKind::Dropwave => (-5.12, 5.12),
            BenchmarkKind::Levy => (-10.0, 10.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Ackley => "ackley",
            BenchmarkKind::Alpine1 => "alpine1",
            BenchmarkKind::Hartmann3 => "hartmann3",
            BenchmarkKind::Hartmann6 => "hartmann6",
            BenchmarkKind::Dropwave => "dropwave",
            BenchmarkKind::Levy => "levy",
        }
    }
}

/// A minimization benchmark. [`BenchmarkFunction::utility`] negates it so
/// larger is better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkFunction {
    pub kind: BenchmarkKind,
    pub dimension: usize,
    /// Overrides the default evaluation box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<(f64, f64)>,
}

const H3_A: [[f64; 3]; 4] = [
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
];
const H3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];
const H6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const H6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];
const H_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];

impl BenchmarkFunction {
    pub fn new(kind: BenchmarkKind, dimension: usize) -> Result<Self> {
        let f = BenchmarkFunction {
            kind,
            dimension,
            bounds: None,
        };
        f.validate()?;
        Ok(f)
    }

    /// Uses the function's own dimension, or `d` when it has none.
    pub fn natural(kind: BenchmarkKind, d: usize) -> Self {
        BenchmarkFunction {
            kind,
            dimension: kind.fixed_dimension().unwrap_or(d),
            bounds: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::input("benchmark dimension must be at least 1"));
        }
        if let Some(d) = self.kind.fixed_dimension() {
            if d != self.dimension {
                return Err(Error::input(format!(
                    "{} is defined for dimension {d}, not {}",
                    self.kind.name(),
                    self.dimension
                )));
            }
        }
        if let Some((lo, hi)) = self.bounds {
            if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                return Err(Error::input("benchmark bounds must satisfy lo < hi"));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds.unwrap_or_else(|| self.kind.default_bounds())
    }

    /// Raw function value.
    pub fn evaluate<T: Scalar>(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dimension {
            return Err(Error::input(format!(
                "{} expects {} inputs, got {}",
                self.kind.name(),
                self.dimension,
                x.len()
            )));
        }
        Ok(raw(self.kind, x))
    }

    pub fn utility<T: Scalar>(&self, x: &[T]) -> Result<T> {
        self.evaluate(x).map(|v| -v)
    }

    /// Maps a point of the unit cube onto the evaluation box.
    pub fn from_unit<T: Scalar>(&self, u: &[T]) -> Vec<T> {
        let (lo, hi) = self.bounds();
        u.iter().map(|&v| T::lit(lo) + v * T::lit(hi - lo)).collect()
    }
}

/// Free-function form of [`BenchmarkFunction::evaluate`].
pub fn evaluate_benchmark<T: Scalar>(f: &BenchmarkFunction, x: &[T]) -> Result<T> {
    f.evaluate(x)
}

fn raw<T: Scalar>(kind: BenchmarkKind, x: &[T]) -> T {
    let d = T::lit(x.len() as f64);
    let pi = T::pi();
    match kind {
        BenchmarkKind::Ackley => {
            let (a, b, c) = (T::lit(20.0), T::lit(0.2), T::two_pi());
            let sq = x.iter().fold(T::zero(), |s, &v| s + v * v) / d;
            let cs = x.iter().fold(T::zero(), |s, &v| s + (c * v).cos()) / d;
            -a * (-b * sq.sqrt()).exp() - cs.exp() + a + T::e()
        }
        BenchmarkKind::Alpine1 => x
            .iter()
            .fold(T::zero(), |s, &v| s + (v * v.sin() + T::lit(0.1) * v).abs()),
        BenchmarkKind::Hartmann3 => hartmann(x, &H3_A, &H3_P),
        BenchmarkKind::Hartmann6 => hartmann(x, &H6_A, &H6_P),
        BenchmarkKind::Dropwave => {
            let r2 = x[0] * x[0] + x[1] * x[1];
            -(T::one() + (T::lit(12.0) * r2.sqrt()).cos()) / (T::lit(0.5) * r2 + T::lit(2.0))
        }
        BenchmarkKind::Levy => {
            let w: Vec<T> = x.iter().map(|&v| T::one() + (v - T::one()) / T::lit(4.0)).collect();
            let n = w.len();
            let mut s = (pi * w[0]).sin().powi(2);
            for wi in &w[..n - 1] {
                s += (*wi - T::one()).powi(2) * (T::one() + T::lit(10.0) * (pi * *wi + T::one()).sin().powi(2));
            }
            let wd = w[n - 1];
            s + (wd - T::one()).powi(2) * (T::one() + (T::two_pi() * wd).sin().powi(2))
        }
    }
}

fn hartmann<T: Scalar, const D: usize>(x: &[T], a: &[[f64; D]; 4], p: &[[f64; D]; 4]) -> T {
    let mut s = T::zero();
    for i in 0..4 {
        let mut inner = T::zero();
        for j in 0..D {
            let t = x[j] - T::lit(p[i][j]);
            inner += T::lit(a[i][j]) * t * t;
        }
        s += T::lit(H_ALPHA[i]) * (-inner).exp();
    }
    -s
}
