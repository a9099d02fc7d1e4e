//! Straight-line evaluation of expression batches with common
//! subexpressions shared.

use std::collections::HashMap;

use super::{bind_var, eval_binary, eval_unary, BinaryOp, Kind, SuperExpr, UnaryOp};
use crate::error::Result;
use crate::grassmann::{GrassmannNumber, Parity};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum Instr {
    Const(u64),
    Var(usize, Parity),
    Unary(UnaryOp, usize),
    Binary(BinaryOp, usize, usize),
    Pow(usize, u32),
}

/// A compiled list of expressions evaluated in one pass.
#[derive(Clone, Debug)]
pub struct Tape {
    instrs: Vec<Instr>,
    names: HashMap<usize, String>,
    outputs: Vec<usize>,
}

struct Builder {
    instrs: Vec<Instr>,
    interned: HashMap<Instr, usize>,
    by_node: HashMap<*const (), usize>,
    names: HashMap<usize, String>,
}

impl Builder {
    fn push(&mut self, instr: Instr) -> usize {
        if let Some(&slot) = self.interned.get(&instr) {
            return slot;
        }
        let slot = self.instrs.len();
        self.instrs.push(instr.clone());
        self.interned.insert(instr, slot);
        slot
    }

    fn lower(&mut self, e: &SuperExpr) -> usize {
        if let Some(&slot) = self.by_node.get(&e.node_id()) {
            return slot;
        }
        let instr = match e.kind() {
            Kind::Const(c) => Instr::Const(c.to_bits()),
            Kind::Var { index, name, parity } => {
                self.names.insert(*index, name.to_string());
                Instr::Var(*index, *parity)
            }
            Kind::Unary(op, a) => Instr::Unary(*op, self.lower(a)),
            Kind::Binary(op, a, b) => {
                let a = self.lower(a);
                let b = self.lower(b);
                Instr::Binary(*op, a, b)
            }
            Kind::Pow(a, n) => Instr::Pow(self.lower(a), *n),
        };
        let slot = self.push(instr);
        self.by_node.insert(e.node_id(), slot);
        slot
    }
}

impl Tape {
    pub fn compile(exprs: &[SuperExpr]) -> Tape {
        let mut b = Builder {
            instrs: Vec::new(),
            interned: HashMap::new(),
            by_node: HashMap::new(),
            names: HashMap::new(),
        };
        let outputs = exprs.iter().map(|e| b.lower(e)).collect();
        Tape {
            instrs: b.instrs,
            names: b.names,
            outputs,
        }
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn outputs(&self) -> usize {
        self.outputs.len()
    }

    /// Evaluates every compiled expression at `values`.
    pub fn eval(&self, values: &[GrassmannNumber]) -> Result<Vec<GrassmannNumber>> {
        let generators = values.first().map_or(0, |v| v.generators());
        let mut slots: Vec<GrassmannNumber> = Vec::with_capacity(self.instrs.len());
        for instr in &self.instrs {
            let v = match instr {
                Instr::Const(bits) => GrassmannNumber::scalar(generators, f64::from_bits(*bits)),
                Instr::Var(index, parity) => {
                    let name = self.names.get(index).map_or("?", String::as_str);
                    bind_var(values, *index, name, *parity)?.clone()
                }
                Instr::Unary(op, a) => eval_unary(*op, &slots[*a])?,
                Instr::Binary(op, a, b) => eval_binary(*op, &slots[*a], &slots[*b])?,
                Instr::Pow(a, n) => slots[*a].powi(*n),
            };
            slots.push(v);
        }
        Ok(self.outputs.iter().map(|&i| slots[i].clone()).collect())
    }
}
