use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sparse real polynomial in `nvars` variables, keyed by exponent vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialText", into = "PolynomialText")]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coeff: f64,
    pub powers: Vec<u32>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialText {
    pub nvars: usize,
    #[serde(default)]
    pub terms: Vec<Term>,
}

impl TryFrom<PolynomialText> for Polynomial {
    type Error = Error;

    fn try_from(t: PolynomialText) -> Result<Self> {
        let mut p = Polynomial::zero(t.nvars);
        for term in t.terms {
            if term.powers.len() != t.nvars {
                return Err(Error::DimensionMismatch {
                    expected: t.nvars,
                    found: term.powers.len(),
                });
            }
            p.add_term(term.powers, term.coeff);
        }
        Ok(p)
    }
}

impl From<Polynomial> for PolynomialText {
    fn from(p: Polynomial) -> Self {
        PolynomialText {
            nvars: p.nvars,
            terms: p
                .terms
                .into_iter()
                .map(|(powers, coeff)| Term { coeff, powers })
                .collect(),
        }
    }
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Polynomial::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        let mut powers = vec![0; nvars];
        powers[i] = 1;
        Polynomial::monomial(powers, 1.0)
    }

    pub fn monomial(powers: Vec<u32>, coeff: f64) -> Self {
        let mut p = Polynomial::zero(powers.len());
        p.add_term(powers, coeff);
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &f64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree, 0 for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(|k| k.iter().sum()).max().unwrap_or(0)
    }

    fn add_term(&mut self, powers: Vec<u32>, coeff: f64) {
        if coeff == 0.0 {
            return;
        }
        let e = self.terms.entry(powers).or_insert(0.0);
        *e += coeff;
        if *e == 0.0 {
            self.terms.retain(|_, c| *c != 0.0);
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        self.terms
            .iter()
            .map(|(k, c)| c * k.iter().zip(x).map(|(&e, &xi)| xi.powi(e as i32)).product::<f64>())
            .sum()
    }

    /// Exact `∂/∂x_i`.
    pub fn derivative(&self, i: usize) -> Polynomial {
        let mut p = Polynomial::zero(self.nvars);
        for (k, c) in &self.terms {
            if k[i] > 0 {
                let mut k2 = k.clone();
                k2[i] -= 1;
                p.add_term(k2, c * k[i] as f64);
            }
        }
        p
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nvars).map(|i| self.derivative(i).eval(x)).collect()
    }

    pub fn scale(&self, a: f64) -> Polynomial {
        let mut p = Polynomial::zero(self.nvars);
        for (k, c) in &self.terms {
            p.add_term(k.clone(), a * c);
        }
        p
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_vars(other)?;
        let mut p = self.clone();
        for (k, c) in &other.terms {
            p.add_term(k.clone(), *c);
        }
        Ok(p)
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Polynomial> {
        self.check_vars(other)?;
        let mut p = Polynomial::zero(self.nvars);
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let k = ka.iter().zip(kb).map(|(a, b)| a + b).collect();
                p.add_term(k, ca * cb);
            }
        }
        Ok(p)
    }

    fn check_vars(&self, other: &Polynomial) -> Result<()> {
        if self.nvars != other.nvars {
            return Err(Error::DimensionMismatch {
                expected: self.nvars,
                found: other.nvars,
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_of_cubic() {
        // p = 2x³y + y² - 5
        let p = Polynomial::monomial(vec![3, 1], 2.0)
            .add(&Polynomial::monomial(vec![0, 2], 1.0))
            .unwrap()
            .add(&Polynomial::constant(2, -5.0))
            .unwrap();
        assert_eq!(p.derivative(0), Polynomial::monomial(vec![2, 1], 6.0));
        let dy = Polynomial::monomial(vec![3, 0], 2.0)
            .add(&Polynomial::monomial(vec![0, 1], 2.0))
            .unwrap();
        assert_eq!(p.derivative(1), dy);
        assert_eq!(p.eval(&[1.0, 2.0]), 4.0 + 4.0 - 5.0);
        assert_eq!(p.degree(), 4);
    }

    #[test]
    fn cancellation_removes_terms() {
        let x = Polynomial::var(2, 0);
        assert!(x.add(&x.scale(-1.0)).unwrap().is_zero());
    }

    #[test]
    fn text_round_trip() {
        let p = Polynomial::monomial(vec![1, 2], -0.5).mul(&Polynomial::var(2, 1)).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(p, q);
        assert!(serde_json::from_str::<Polynomial>(r#"{"nvars":2,"terms":[{"coeff":1,"powers":[1]}]}"#).is_err());
    }
}
