//! Dense univariate polynomials, used to build the piecewise-polynomial
//! cutoff profiles with exact derivatives and antiderivatives.

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Poly(pub Vec<f64>);

impl Poly {
    pub fn constant(c: f64) -> Self {
        Poly(vec![c])
    }

    /// `a + b t`
    pub fn linear(a: f64, b: f64) -> Self {
        Poly(vec![a, b])
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    }

    pub fn derivative(&self) -> Poly {
        if self.0.len() <= 1 {
            return Poly::constant(0.0);
        }
        Poly(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, &c)| c * k as f64)
                .collect(),
        )
    }

    /// Antiderivative vanishing at 0.
    pub fn integral(&self) -> Poly {
        let mut out = Vec::with_capacity(self.0.len() + 1);
        out.push(0.0);
        out.extend(self.0.iter().enumerate().map(|(k, &c)| c / (k + 1) as f64));
        Poly(out)
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = vec![0.0; self.0.len() + other.0.len() - 1];
        for (i, &a) in self.0.iter().enumerate() {
            for (j, &b) in other.0.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly(out)
    }

    pub fn scale(&self, s: f64) -> Poly {
        Poly(self.0.iter().map(|c| c * s).collect())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let n = self.0.len().max(other.0.len());
        Poly(
            (0..n)
                .map(|k| self.0.get(k).copied().unwrap_or(0.0) + other.0.get(k).copied().unwrap_or(0.0))
                .collect(),
        )
    }

    /// `1 - self`
    pub fn one_minus(&self) -> Poly {
        Poly::constant(1.0).add(&self.scale(-1.0))
    }
}

/// Value, first and second derivative of a polynomial at `t`.
pub(crate) fn jet(p: &Poly, dp: &Poly, ddp: &Poly, t: f64) -> [f64; 3] {
    [p.eval(t), dp.eval(t), ddp.eval(t)]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn calculus_round_trip() {
        let p = Poly(vec![1.0, -2.0, 0.5, 3.0]);
        let back = p.integral().derivative();
        for (a, b) in p.0.iter().zip(&back.0) {
            assert!((a - b).abs() < 1e-15);
        }
        // (1 + t)(1 - t) = 1 - t^2
        let q = Poly::linear(1.0, 1.0).mul(&Poly::linear(1.0, -1.0));
        assert_eq!(q.0, vec![1.0, 0.0, -1.0]);
        assert!((q.eval(0.5) - 0.75).abs() < 1e-15);
    }
}
