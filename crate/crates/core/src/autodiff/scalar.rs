//! Reverse-mode scalar differentiation on a thread-local tape.
//!
//! A [`Var`] is a value plus an index into the tape of the current thread.
//! Open a [`ScalarTape`] before creating inputs; dropping it clears the tape.
//! Only one tape may be open per thread at a time.

use std::cell::RefCell;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

use crate::geom::Real;

const CONST: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Entry {
    parents: [(u32, f64); 2],
}

thread_local! {
    static TAPE: RefCell<Vec<Entry>> = const { RefCell::new(Vec::new()) };
    static OPEN: RefCell<bool> = const { RefCell::new(false) };
}

#[derive(Clone, Copy, Debug)]
pub struct Var {
    id: u32,
    v: f64,
}

fn push(parents: [(u32, f64); 2], v: f64) -> Var {
    if parents[0].0 == CONST && parents[1].0 == CONST {
        return Var { id: CONST, v };
    }
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let id = t.len() as u32;
        t.push(Entry { parents });
        Var { id, v }
    })
}

fn unary(a: Var, d: f64, v: f64) -> Var {
    push([(a.id, d), (CONST, 0.0)], v)
}

fn binary(a: Var, da: f64, b: Var, db: f64, v: f64) -> Var {
    push([(a.id, da), (b.id, db)], v)
}

/// Guard owning the thread-local tape for the duration of one evaluation.
pub struct ScalarTape {
    _private: (),
}

impl ScalarTape {
    /// Clears and opens the tape. Panics if another tape is open on this thread.
    pub fn new() -> Self {
        OPEN.with(|o| {
            let mut o = o.borrow_mut();
            assert!(!*o, "a ScalarTape is already open on this thread");
            *o = true;
        });
        TAPE.with(|t| t.borrow_mut().clear());
        Self { _private: () }
    }

    pub fn input(&self, v: f64) -> Var {
        TAPE.with(|t| {
            let mut t = t.borrow_mut();
            let id = t.len() as u32;
            t.push(Entry {
                parents: [(CONST, 0.0), (CONST, 0.0)],
            });
            Var { id, v }
        })
    }

    pub fn inputs(&self, vs: &[f64]) -> Vec<Var> {
        vs.iter().map(|&v| self.input(v)).collect()
    }

    pub fn len(&self) -> usize {
        TAPE.with(|t| t.borrow().len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Gradient of `output` with respect to each of `inputs`.
    pub fn gradient(&self, output: Var, inputs: &[Var]) -> Vec<f64> {
        if output.id == CONST {
            return vec![0.0; inputs.len()];
        }
        TAPE.with(|t| {
            let t = t.borrow();
            let mut adj = vec![0.0; output.id as usize + 1];
            adj[output.id as usize] = 1.0;
            for i in (0..=output.id as usize).rev() {
                let a = adj[i];
                if a == 0.0 {
                    continue;
                }
                for &(p, d) in &t[i].parents {
                    if p != CONST {
                        adj[p as usize] += a * d;
                    }
                }
            }
            inputs
                .iter()
                .map(|x| {
                    if x.id == CONST || x.id as usize >= adj.len() {
                        0.0
                    } else {
                        adj[x.id as usize]
                    }
                })
                .collect()
        })
    }
}

impl Default for ScalarTape {
    fn default() -> Self {
        Self::new()
    }
}

impl Drop for ScalarTape {
    fn drop(&mut self) {
        TAPE.with(|t| {
            let mut t = t.borrow_mut();
            t.clear();
            t.shrink_to(1 << 16);
        });
        OPEN.with(|o| *o.borrow_mut() = false);
    }
}

impl Var {
    pub fn constant(v: f64) -> Self {
        Var { id: CONST, v }
    }

    pub fn value(self) -> f64 {
        self.v
    }
}

impl Add for Var {
    type Output = Var;
    fn add(self, o: Var) -> Var {
        binary(self, 1.0, o, 1.0, self.v + o.v)
    }
}

impl Sub for Var {
    type Output = Var;
    fn sub(self, o: Var) -> Var {
        binary(self, 1.0, o, -1.0, self.v - o.v)
    }
}

impl Mul for Var {
    type Output = Var;
    fn mul(self, o: Var) -> Var {
        binary(self, o.v, o, self.v, self.v * o.v)
    }
}

impl Div for Var {
    type Output = Var;
    fn div(self, o: Var) -> Var {
        let q = self.v / o.v;
        binary(self, 1.0 / o.v, o, -q / o.v, q)
    }
}

impl Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        unary(self, -1.0, -self.v)
    }
}

impl AddAssign for Var {
    fn add_assign(&mut self, o: Var) {
        *self = *self + o;
    }
}

impl Real for Var {
    fn cst(v: f64) -> Self {
        Var::constant(v)
    }
    fn val(self) -> f64 {
        self.v
    }
    fn sqrt(self) -> Self {
        let s = self.v.sqrt();
        unary(self, 0.5 / s, s)
    }
    fn sin(self) -> Self {
        unary(self, self.v.cos(), self.v.sin())
    }
    fn cos(self) -> Self {
        unary(self, -self.v.sin(), self.v.cos())
    }
    fn exp(self) -> Self {
        let e = self.v.exp();
        unary(self, e, e)
    }
    fn ln(self) -> Self {
        unary(self, 1.0 / self.v, self.v.ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_gradient() {
        let tape = ScalarTape::new();
        let x = tape.input(3.0);
        let y = tape.input(-2.0);
        // f = x^2 y + sin(x) / y
        let f = x * x * y + x.sin() / y;
        let g = tape.gradient(f, &[x, y]);
        let (xv, yv) = (3.0f64, -2.0f64);
        assert!((g[0] - (2.0 * xv * yv + xv.cos() / yv)).abs() < 1e-12);
        assert!((g[1] - (xv * xv - xv.sin() / (yv * yv))).abs() < 1e-12);
    }

    #[test]
    fn constants_stay_off_tape() {
        let tape = ScalarTape::new();
        let c = Var::cst(2.0) * Var::cst(4.0);
        assert_eq!(c.value(), 8.0);
        assert!(tape.is_empty());
        let x = tape.input(1.0);
        let g = tape.gradient(c, &[x]);
        assert_eq!(g, vec![0.0]);
    }

    #[test]
    fn max_follows_branch() {
        let tape = ScalarTape::new();
        let x = tape.input(0.5);
        let f = Real::max(x, Var::cst(0.0)).square();
        assert!((tape.gradient(f, &[x])[0] - 1.0).abs() < 1e-12);
    }
}
