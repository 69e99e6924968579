//! Sparse multivariate polynomials with rational coefficients.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Zero};

use crate::rational::Q;

/// Polynomial in `nvars` variables `x_0 … x_{nvars-1}`. Terms are keyed by
/// dense exponent vectors and zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, Q>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, value: Q) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], value);
        p
    }

    pub fn var(nvars: usize, index: usize) -> Self {
        assert!(index < nvars, "variable index out of range");
        let mut exps = vec![0; nvars];
        exps[index] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(exps, Q::one());
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Vec<u32>, Q)>) -> Self {
        let mut p = Self::zero(nvars);
        for (exps, coef) in terms {
            assert_eq!(exps.len(), nvars, "exponent vector length");
            p.add_term(exps, coef);
        }
        p
    }

    /// Linear form `Σ coefs[i]·x_i`.
    pub fn linear(coefs: &[Q]) -> Self {
        let nvars = coefs.len();
        let mut p = Self::zero(nvars);
        for (i, c) in coefs.iter().enumerate() {
            let mut exps = vec![0; nvars];
            exps[i] = 1;
            p.add_term(exps, c.clone());
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Vec<u32>, &Q)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// The value if the polynomial has no non-constant terms.
    pub fn as_constant(&self) -> Option<Q> {
        match self.terms.len() {
            0 => Some(Q::zero()),
            1 => {
                let (exps, c) = self.terms.iter().next()?;
                exps.iter().all(|&e| e == 0).then(|| c.clone())
            }
            _ => None,
        }
    }

    pub fn degree(&self) -> u32 {
        self.terms
            .keys()
            .map(|e| e.iter().sum())
            .max()
            .unwrap_or(0)
    }

    pub fn add_term(&mut self, exps: Vec<u32>, coef: Q) {
        if coef.is_zero() {
            return;
        }
        let entry = self.terms.entry(exps);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coef);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += coef;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn scale(&self, factor: &Q) -> Self {
        if factor.is_zero() {
            return Self::zero(self.nvars);
        }
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .map(|(e, c)| (e.clone(), c * factor))
                .collect(),
        }
    }

    pub fn derivative(&self, var: usize) -> Self {
        let mut out = Self::zero(self.nvars);
        for (exps, coef) in &self.terms {
            let e = exps[var];
            if e == 0 {
                continue;
            }
            let mut lowered = exps.clone();
            lowered[var] -= 1;
            out.add_term(lowered, coef * Q::from_integer(e.into()));
        }
        out
    }

    pub fn eval(&self, point: &[Q]) -> Q {
        assert_eq!(point.len(), self.nvars);
        self.terms
            .iter()
            .map(|(exps, coef)| {
                exps.iter()
                    .zip(point)
                    .filter(|(&e, _)| e > 0)
                    .fold(coef.clone(), |acc, (&e, x)| acc * pow(x, e))
            })
            .sum()
    }

    /// Substitutes `x_i := subs[i]`; all substitutes share one variable set.
    pub fn compose(&self, subs: &[Polynomial]) -> Polynomial {
        assert_eq!(subs.len(), self.nvars);
        let target = subs.first().map_or(0, Polynomial::nvars);
        let mut powers: Vec<Vec<Polynomial>> = subs
            .iter()
            .map(|s| vec![Polynomial::constant(target, Q::one()), s.clone()])
            .collect();
        let mut out = Polynomial::zero(target);
        for (exps, coef) in &self.terms {
            let mut term = Polynomial::constant(target, coef.clone());
            for (i, &e) in exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = &powers[i][powers[i].len() - 1] * &subs[i];
                    powers[i].push(next);
                }
                term = &term * &powers[i][e as usize];
            }
            out = &out + &term;
        }
        out
    }
}

fn pow(x: &Q, e: u32) -> Q {
    (0..e).fold(Q::one(), |acc, _| acc * x)
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(e, c)| (e.clone(), -c)).collect(),
        }
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        assert_eq!(self.nvars, rhs.nvars);
        let mut out = Polynomial::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let exps = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(exps, ca * cb);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};

    fn p2(terms: &[((u32, u32), i64)]) -> Polynomial {
        Polynomial::from_terms(2, terms.iter().map(|&((a, b), c)| (vec![a, b], int(c))))
    }

    #[test]
    fn arithmetic_and_cancellation() {
        let x = Polynomial::var(2, 0);
        let y = Polynomial::var(2, 1);
        let sum = &x + &y;
        let diff = &x - &y;
        assert_eq!(&sum * &diff, p2(&[((2, 0), 1), ((0, 2), -1)]));
        assert!((&sum - &sum).is_zero());
        assert_eq!(Polynomial::constant(2, int(0)), Polynomial::zero(2));
    }

    #[test]
    fn derivative_kills_constants() {
        let c = Polynomial::constant(3, frac(7, 2));
        assert!(c.derivative(0).is_zero());
        let p = p2(&[((3, 1), 2), ((0, 1), 5)]);
        assert_eq!(p.derivative(0), p2(&[((2, 1), 6)]));
        assert_eq!(p.derivative(1), p2(&[((3, 0), 2), ((0, 0), 5)]));
    }

    #[test]
    fn eval_and_compose() {
        let p = p2(&[((2, 0), 1), ((1, 1), 3), ((0, 0), -1)]);
        assert_eq!(p.eval(&[int(2), int(1)]), int(4 + 6 - 1));
        // x := u + v, y := u - v in two new variables.
        let u = Polynomial::var(2, 0);
        let v = Polynomial::var(2, 1);
        let composed = p.compose(&[&u + &v, &u - &v]);
        for (a, b) in [(1, 2), (-3, 5), (0, 0)] {
            let (a, b) = (int(a), int(b));
            let direct = p.eval(&[&a + &b, &a - &b]);
            assert_eq!(composed.eval(&[a, b]), direct);
        }
    }

    #[test]
    fn constant_detection() {
        assert_eq!(Polynomial::zero(1).as_constant(), Some(int(0)));
        assert_eq!(Polynomial::constant(1, int(4)).as_constant(), Some(int(4)));
        assert_eq!(Polynomial::var(1, 0).as_constant(), None);
    }
}
