//! Left partial derivatives.

use std::collections::HashMap;

use super::{BinaryOp, CoordinateSystem, Kind, SuperExpr, UnaryOp};
use crate::error::{Error, Result};
use crate::grassmann::Parity;

impl SuperExpr {
    /// Left derivative `∂f/∂x^index` for a coordinate of parity `parity`.
    ///
    /// Products follow the graded Leibniz rule
    /// `∂(ab) = (∂a) b + (−1)^{ε ε(a)} a ∂b`; an odd coordinate therefore
    /// needs a homogeneous left factor.
    pub fn partial(&self, index: usize, parity: Parity) -> Result<SuperExpr> {
        let eps = match parity {
            Parity::Even => 0,
            Parity::Odd => 1,
            Parity::Inhomogeneous => {
                return Err(Error::Inhomogeneous("coordinates must be even or odd".into()))
            }
        };
        let mut memo = HashMap::new();
        self.partial_memo(index, eps, &mut memo)
    }

    /// Derivative with respect to a named coordinate of `coords`.
    pub fn differentiate(&self, coords: &CoordinateSystem, name: &str) -> Result<SuperExpr> {
        let index = coords
            .index_of(name)
            .ok_or_else(|| Error::UnknownIdentifier(name.to_string()))?;
        self.partial(index, coords.parity(index))
    }

    fn partial_memo(
        &self,
        index: usize,
        eps: u8,
        memo: &mut HashMap<*const (), SuperExpr>,
    ) -> Result<SuperExpr> {
        if let Some(done) = memo.get(&self.node_id()) {
            return Ok(done.clone());
        }
        let out = match self.kind() {
            Kind::Const(_) => SuperExpr::zero(),
            Kind::Var { index: i, .. } => {
                if *i == index {
                    SuperExpr::one()
                } else {
                    SuperExpr::zero()
                }
            }
            Kind::Unary(op, a) => {
                let da = a.partial_memo(index, eps, memo)?;
                if da.is_zero() {
                    SuperExpr::zero()
                } else {
                    match op {
                        UnaryOp::Neg => da.neg(),
                        UnaryOp::Sin => a.cos().mul(&da),
                        UnaryOp::Cos => a.sin().mul(&da).neg(),
                        UnaryOp::Exp => a.exp().mul(&da),
                        UnaryOp::Log => da.div(a),
                    }
                }
            }
            Kind::Binary(op, a, b) => {
                let da = a.partial_memo(index, eps, memo)?;
                let db = b.partial_memo(index, eps, memo)?;
                match op {
                    BinaryOp::Add => da.add(&db),
                    BinaryOp::Sub => da.sub(&db),
                    BinaryOp::Mul => {
                        let right = if db.is_zero() {
                            SuperExpr::zero()
                        } else {
                            let sign = leibniz_sign(a, eps)?;
                            a.mul(&db).scale(sign)
                        };
                        da.mul(b).add(&right)
                    }
                    BinaryOp::Div => {
                        // b is even: ∂(a/b) = ∂a/b − (−1)^{ε ε(a)} a ∂b / b²
                        let left = da.div(b);
                        if db.is_zero() {
                            left
                        } else {
                            let sign = leibniz_sign(a, eps)?;
                            left.sub(&a.mul(&db).div(&b.pow(2)).scale(sign))
                        }
                    }
                }
            }
            Kind::Pow(a, n) => match a.parity() {
                Parity::Odd => {
                    if *n == 1 {
                        a.partial_memo(index, eps, memo)?
                    } else {
                        SuperExpr::zero()
                    }
                }
                _ if *n == 1 => a.partial_memo(index, eps, memo)?,
                Parity::Even => {
                    let da = a.partial_memo(index, eps, memo)?;
                    a.pow(n - 1).scale(f64::from(*n)).mul(&da)
                }
                Parity::Inhomogeneous => {
                    // Expand one factor: a^n = a · a^{n-1}.
                    let rest = SuperExpr::raw_pow(a.clone(), n - 1);
                    let product = SuperExpr::raw_binary(BinaryOp::Mul, a.clone(), rest);
                    product.partial_memo(index, eps, memo)?
                }
            },
        };
        memo.insert(self.node_id(), out.clone());
        Ok(out)
    }
}

fn leibniz_sign(a: &SuperExpr, eps: u8) -> Result<f64> {
    if eps == 0 || a.is_zero() {
        return Ok(1.0);
    }
    match a.parity() {
        Parity::Even => Ok(1.0),
        Parity::Odd => Ok(-1.0),
        Parity::Inhomogeneous => Err(Error::Inhomogeneous(format!(
            "odd derivative through inhomogeneous left factor {a}"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grassmann::GrassmannNumber;

    fn coords() -> CoordinateSystem {
        CoordinateSystem::new(&["x1"], &["xi1", "xi2"]).unwrap()
    }

    #[test]
    fn odd_derivatives_of_monomials() {
        let c = coords();
        let e = SuperExpr::parse("xi1*xi2", &c).unwrap();
        assert_eq!(e.differentiate(&c, "xi1").unwrap().to_string(), "xi2");
        assert_eq!(e.differentiate(&c, "xi2").unwrap().to_string(), "-xi1");
        let e = SuperExpr::parse("x1^2*xi1", &c).unwrap();
        assert_eq!(e.differentiate(&c, "x1").unwrap().to_string(), "2*x1*xi1");
    }

    #[test]
    fn odd_derivatives_anticommute() {
        let c = coords();
        let e = SuperExpr::parse("x1*xi1*xi2 + 3*xi2*xi1*exp(x1)", &c).unwrap();
        let d12 = e.differentiate(&c, "xi2").unwrap().differentiate(&c, "xi1").unwrap();
        let d21 = e.differentiate(&c, "xi1").unwrap().differentiate(&c, "xi2").unwrap();
        let g = 2;
        let p = vec![
            GrassmannNumber::scalar(g, 0.7),
            GrassmannNumber::generator(g, 1).unwrap(),
            GrassmannNumber::generator(g, 2).unwrap(),
        ];
        let a = d12.evaluate(&p).unwrap();
        let b = d21.evaluate(&p).unwrap();
        assert!((&a + &b).norm_max() < 1e-14);
    }

    #[test]
    fn quotient_and_chain_rules() {
        let c = coords();
        let e = SuperExpr::parse("xi1/(1 + x1)", &c).unwrap();
        let d = e.differentiate(&c, "x1").unwrap();
        let g = 2;
        let t1 = GrassmannNumber::generator(g, 1).unwrap();
        let p = vec![GrassmannNumber::scalar(g, 1.0), t1.clone(), GrassmannNumber::zero(g)];
        let got = d.evaluate(&p).unwrap();
        assert!(got.distance(&t1.scale(-0.25)) < 1e-15);
        let e = SuperExpr::parse("log(x1)", &c).unwrap();
        let d = e.differentiate(&c, "x1").unwrap();
        let p = vec![GrassmannNumber::scalar(g, 4.0), t1, GrassmannNumber::zero(g)];
        assert!((d.evaluate(&p).unwrap().body() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn inhomogeneous_left_factor_is_rejected() {
        let c = coords();
        let e = SuperExpr::parse("(x1 + xi1)*xi2", &c).unwrap();
        assert!(matches!(e.differentiate(&c, "xi2"), Err(Error::Inhomogeneous(_))));
        assert!(e.differentiate(&c, "x1").is_ok());
    }
}
