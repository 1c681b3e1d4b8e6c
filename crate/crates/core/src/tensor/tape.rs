use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{sigmoid, softmax_unchecked, Gradients, ParamId, ParamStore};
use crate::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Probabilities below this are clamped before taking a log.
pub const PROB_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatVec(Var, Var),
    MatTVec(Var, Var),
    Add(Var, Var),
    AddRows(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    ScaleBy(Var, Var),
    OneMinus(Var),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Concat(Vec<Var>),
    Slice(Var, usize),
    Row(Var, usize),
    StackRows(Vec<Var>),
    Outer(Var, Var),
    Pad(Var),
    Scatter(Var, Vec<usize>),
    LogPick(Var, usize),
    MinSum(Var, Var),
    Sum(Vec<Var>),
}

#[derive(Debug, Clone)]
struct Node {
    rows: usize,
    cols: usize,
    // empty for parameter leaves, whose values live in the store
    value: Vec<f64>,
    op: Op,
}

/// Append-only record of a forward computation.
///
/// Nodes are stored in creation order, which is a topological order, so
/// [`Tape::backward`] is a single reverse sweep. Parameter leaves borrow
/// their values from the store instead of copying them.
pub struct Tape<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_vars: Vec<Option<Var>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
            param_vars: vec![None; params.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, op: Op) -> Var {
        debug_assert!(matches!(op, Op::Param(_)) || value.len() == rows * cols);
        self.nodes.push(Node {
            rows,
            cols,
            value,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        let node = &self.nodes[v.0];
        match node.op {
            Op::Param(id) => self.params.values(id),
            _ => &node.value,
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        let val = self.value(v);
        assert_eq!(val.len(), 1, "scalar() on a non-scalar node");
        val[0]
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn size(&self, v: Var) -> usize {
        let (r, c) = self.shape(v);
        r * c
    }

    pub fn leaf(&mut self, rows: usize, cols: usize, value: Vec<f64>) -> Var {
        assert_eq!(value.len(), rows * cols, "leaf shape");
        self.push(rows, cols, value, Op::Leaf)
    }

    pub fn vector(&mut self, value: Vec<f64>) -> Var {
        let n = value.len();
        self.push(n, 1, value, Op::Leaf)
    }

    pub fn constant(&mut self, v: f64) -> Var {
        self.push(1, 1, vec![v], Op::Leaf)
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.vector(vec![0.0; n])
    }

    /// Leaf for a parameter. Repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(v) = self.param_vars[id.0] {
            return v;
        }
        let t = self.params.get(id);
        let v = self.push(t.rows, t.cols, Vec::new(), Op::Param(id));
        self.param_vars[id.0] = Some(v);
        v
    }

    /// `m x` for `m: r x c`, `x: c`.
    pub fn matvec(&mut self, m: Var, x: Var) -> Var {
        let (r, c) = self.shape(m);
        assert_eq!(self.size(x), c, "matvec: {r}x{c} times {}", self.size(x));
        let (mv, xv) = (self.value(m), self.value(x));
        let out = mv.chunks_exact(c).map(|row| dot(row, xv)).collect();
        self.push(r, 1, out, Op::MatVec(m, x))
    }

    /// `mᵀ x` for `m: r x c`, `x: r`.
    pub fn matvec_t(&mut self, m: Var, x: Var) -> Var {
        let (r, c) = self.shape(m);
        assert_eq!(
            self.size(x),
            r,
            "matvec_t: ({r}x{c})ᵀ times {}",
            self.size(x)
        );
        let (mv, xv) = (self.value(m), self.value(x));
        let mut out = vec![0.0; c];
        for (row, &xi) in mv.chunks_exact(c).zip(xv) {
            axpy(&mut out, xi, row);
        }
        self.push(c, 1, out, Op::MatTVec(m, x))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(self.size(b), r * c, "add: size mismatch");
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        self.push(r, c, out, Op::Add(a, b))
    }

    /// Adds vector `v` to every row of `m`.
    pub fn add_rows(&mut self, m: Var, v: Var) -> Var {
        let (r, c) = self.shape(m);
        assert_eq!(self.size(v), c, "add_rows: size mismatch");
        let vv = self.value(v);
        let mut out = self.value(m).to_vec();
        for row in out.chunks_exact_mut(c) {
            row.iter_mut().zip(vv).for_each(|(x, y)| *x += y);
        }
        self.push(r, c, out, Op::AddRows(m, v))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (r, c) = self.shape(a);
        assert_eq!(self.size(b), r * c, "mul: size mismatch");
        let out = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x * y)
            .collect();
        self.push(r, c, out, Op::Mul(a, b))
    }

    /// Multiplies by a constant; no gradient flows to `c`.
    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let (r, k) = self.shape(a);
        let out = self.value(a).iter().map(|x| x * c).collect();
        self.push(r, k, out, Op::Scale(a, c))
    }

    /// Multiplies `x` by the scalar node `s`.
    pub fn scale_by(&mut self, x: Var, s: Var) -> Var {
        let (r, c) = self.shape(x);
        let sv = self.scalar(s);
        let out = self.value(x).iter().map(|v| v * sv).collect();
        self.push(r, c, out, Op::ScaleBy(x, s))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().map(|x| 1.0 - x).collect();
        self.push(r, c, out, Op::OneMinus(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().map(|&x| libm::tanh(x)).collect();
        self.push(r, c, out, Op::Tanh(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let (r, c) = self.shape(a);
        let out = self.value(a).iter().map(|&x| sigmoid(x)).collect();
        self.push(r, c, out, Op::Sigmoid(a))
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let n = self.size(a);
        assert!(n > 0, "softmax of empty vector");
        let out = softmax_unchecked(self.value(a));
        self.push(n, 1, out, Op::Softmax(a))
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut out = Vec::with_capacity(parts.iter().map(|&p| self.size(p)).sum());
        for &p in parts {
            out.extend_from_slice(self.value(p));
        }
        let n = out.len();
        self.push(n, 1, out, Op::Concat(parts.to_vec()))
    }

    pub fn slice(&mut self, a: Var, start: usize, len: usize) -> Var {
        assert!(start + len <= self.size(a), "slice out of range");
        let out = self.value(a)[start..start + len].to_vec();
        self.push(len, 1, out, Op::Slice(a, start))
    }

    /// Row `r` of matrix `m` as a vector (embedding lookup).
    pub fn row(&mut self, m: Var, r: usize) -> Var {
        let (rows, c) = self.shape(m);
        assert!(r < rows, "row {r} of {rows}");
        let out = self.value(m)[r * c..(r + 1) * c].to_vec();
        self.push(c, 1, out, Op::Row(m, r))
    }

    pub fn stack_rows(&mut self, rows: &[Var]) -> Var {
        assert!(!rows.is_empty(), "stack_rows of nothing");
        let c = self.size(rows[0]);
        let mut out = Vec::with_capacity(rows.len() * c);
        for &r in rows {
            assert_eq!(self.size(r), c, "stack_rows: ragged rows");
            out.extend_from_slice(self.value(r));
        }
        self.push(rows.len(), c, out, Op::StackRows(rows.to_vec()))
    }

    /// `a bᵀ` for vectors `a: n`, `b: m`.
    pub fn outer(&mut self, a: Var, b: Var) -> Var {
        let (n, m) = (self.size(a), self.size(b));
        let (av, bv) = (self.value(a), self.value(b));
        let mut out = Vec::with_capacity(n * m);
        for &x in av {
            out.extend(bv.iter().map(|y| x * y));
        }
        self.push(n, m, out, Op::Outer(a, b))
    }

    /// Extends a vector with zeros up to `len`.
    pub fn pad(&mut self, a: Var, len: usize) -> Var {
        assert!(len >= self.size(a), "pad shorter than input");
        let mut out = self.value(a).to_vec();
        out.resize(len, 0.0);
        self.push(len, 1, out, Op::Pad(a))
    }

    /// `out[ids[i]] += a[i]` over a zero vector of length `len`.
    pub fn scatter(&mut self, a: Var, ids: &[usize], len: usize) -> Var {
        assert_eq!(self.size(a), ids.len(), "scatter: one id per entry");
        let mut out = vec![0.0; len];
        for (&id, &x) in ids.iter().zip(self.value(a)) {
            out[id] += x;
        }
        self.push(len, 1, out, Op::Scatter(a, ids.to_vec()))
    }

    /// `ln(max(p[idx], PROB_FLOOR))`.
    pub fn log_pick(&mut self, p: Var, idx: usize) -> Var {
        let v = self.value(p)[idx].max(PROB_FLOOR);
        self.push(1, 1, vec![libm::log(v)], Op::LogPick(p, idx))
    }

    /// `Σ_i min(a_i, b_i)`.
    pub fn min_sum(&mut self, a: Var, b: Var) -> Var {
        assert_eq!(self.size(a), self.size(b), "min_sum: size mismatch");
        let s = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x.min(*y))
            .sum();
        self.push(1, 1, vec![s], Op::MinSum(a, b))
    }

    /// Sum of scalar nodes. An empty list yields a zero constant.
    pub fn sum(&mut self, terms: &[Var]) -> Var {
        if terms.is_empty() {
            return self.constant(0.0);
        }
        let s = terms.iter().map(|&t| self.scalar(t)).sum();
        self.push(1, 1, vec![s], Op::Sum(terms.to_vec()))
    }

    /// Reverse sweep from scalar `loss`; returns adjoints for every parameter
    /// in the store (zeros for parameters the loss does not touch).
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.size(loss) != 1 {
            return Err(Error::Shape(format!(
                "loss must be scalar, got {:?}",
                self.shape(loss)
            )));
        }
        if !self.scalar(loss).is_finite() {
            return Err(Error::NonFinite("loss"));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        let mut out = Gradients::zeros(self.params);

        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => {
                    out.per_param[id.0]
                        .iter_mut()
                        .zip(&g)
                        .for_each(|(a, b)| *a += b);
                }
                &Op::MatVec(m, x) => {
                    let c = node_cols(self, m);
                    let (mv, xv) = (self.value(m), self.value(x));
                    let gm = acc(&mut grads, m, self);
                    for (row, &gi) in gm.chunks_exact_mut(c).zip(&g) {
                        axpy(row, gi, xv);
                    }
                    let gx = acc(&mut grads, x, self);
                    for (row, &gi) in mv.chunks_exact(c).zip(&g) {
                        axpy(gx, gi, row);
                    }
                }
                &Op::MatTVec(m, x) => {
                    let c = node_cols(self, m);
                    let (mv, xv) = (self.value(m), self.value(x));
                    let gm = acc(&mut grads, m, self);
                    for (row, &xi) in gm.chunks_exact_mut(c).zip(xv) {
                        axpy(row, xi, &g);
                    }
                    let gx = acc(&mut grads, x, self);
                    for (gxi, row) in gx.iter_mut().zip(mv.chunks_exact(c)) {
                        *gxi += dot(row, &g);
                    }
                }
                &Op::Add(a, b) => {
                    add_into(acc(&mut grads, a, self), &g);
                    add_into(acc(&mut grads, b, self), &g);
                }
                &Op::AddRows(m, v) => {
                    add_into(acc(&mut grads, m, self), &g);
                    let gv = acc(&mut grads, v, self);
                    for row in g.chunks_exact(node.cols) {
                        add_into(gv, row);
                    }
                }
                &Op::Mul(a, b) => {
                    let (av, bv) = (self.value(a), self.value(b));
                    let ga = acc(&mut grads, a, self);
                    for ((x, gi), y) in ga.iter_mut().zip(&g).zip(bv) {
                        *x += gi * y;
                    }
                    let gb = acc(&mut grads, b, self);
                    for ((x, gi), y) in gb.iter_mut().zip(&g).zip(av) {
                        *x += gi * y;
                    }
                }
                &Op::Scale(a, c) => axpy(acc(&mut grads, a, self), c, &g),
                &Op::ScaleBy(x, s) => {
                    let sv = self.scalar(s);
                    let xv = self.value(x);
                    axpy(acc(&mut grads, x, self), sv, &g);
                    acc(&mut grads, s, self)[0] += dot(xv, &g);
                }
                &Op::OneMinus(a) => axpy(acc(&mut grads, a, self), -1.0, &g),
                &Op::Tanh(a) => {
                    let ga = acc(&mut grads, a, self);
                    for ((x, gi), y) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *x += gi * (1.0 - y * y);
                    }
                }
                &Op::Sigmoid(a) => {
                    let ga = acc(&mut grads, a, self);
                    for ((x, gi), y) in ga.iter_mut().zip(&g).zip(&node.value) {
                        *x += gi * y * (1.0 - y);
                    }
                }
                &Op::Softmax(a) => {
                    let y = &node.value;
                    let inner = dot(&g, y);
                    let ga = acc(&mut grads, a, self);
                    for ((x, gi), yi) in ga.iter_mut().zip(&g).zip(y) {
                        *x += yi * (gi - inner);
                    }
                }
                Op::Concat(parts) => {
                    let mut off = 0;
                    for &p in parts {
                        let n = self.size(p);
                        add_into(acc(&mut grads, p, self), &g[off..off + n]);
                        off += n;
                    }
                }
                &Op::Slice(a, start) => {
                    let ga = acc(&mut grads, a, self);
                    add_into(&mut ga[start..start + g.len()], &g);
                }
                &Op::Row(m, r) => {
                    let c = node.rows;
                    let gm = acc(&mut grads, m, self);
                    add_into(&mut gm[r * c..(r + 1) * c], &g);
                }
                Op::StackRows(rows) => {
                    for (&r, chunk) in rows.iter().zip(g.chunks_exact(node.cols)) {
                        add_into(acc(&mut grads, r, self), chunk);
                    }
                }
                &Op::Outer(a, b) => {
                    let (av, bv) = (self.value(a), self.value(b));
                    let m = bv.len();
                    let ga = acc(&mut grads, a, self);
                    for (x, row) in ga.iter_mut().zip(g.chunks_exact(m)) {
                        *x += dot(row, bv);
                    }
                    let gb = acc(&mut grads, b, self);
                    for (row, &ai) in g.chunks_exact(m).zip(av) {
                        axpy(gb, ai, row);
                    }
                }
                &Op::Pad(a) => {
                    let n = self.size(a);
                    add_into(acc(&mut grads, a, self), &g[..n]);
                }
                Op::Scatter(a, ids) => {
                    let ga = acc(&mut grads, *a, self);
                    for (x, &id) in ga.iter_mut().zip(ids) {
                        *x += g[id];
                    }
                }
                &Op::LogPick(p, idx) => {
                    let pv = self.value(p)[idx];
                    if pv > PROB_FLOOR {
                        acc(&mut grads, p, self)[idx] += g[0] / pv;
                    }
                }
                &Op::MinSum(a, b) => {
                    let (av, bv) = (self.value(a), self.value(b));
                    let pick_a: Vec<bool> = av.iter().zip(bv).map(|(x, y)| x <= y).collect();
                    let ga = acc(&mut grads, a, self);
                    for (x, &p) in ga.iter_mut().zip(&pick_a) {
                        if p {
                            *x += g[0];
                        }
                    }
                    let gb = acc(&mut grads, b, self);
                    for (x, &p) in gb.iter_mut().zip(&pick_a) {
                        if !p {
                            *x += g[0];
                        }
                    }
                }
                Op::Sum(terms) => {
                    for &t in terms {
                        acc(&mut grads, t, self)[0] += g[0];
                    }
                }
            }
        }
        if !out.is_finite() {
            return Err(Error::NonFinite("gradient"));
        }
        Ok(out)
    }
}

fn node_cols(tape: &Tape<'_>, v: Var) -> usize {
    tape.nodes[v.0].cols
}

fn acc<'g>(grads: &'g mut [Option<Vec<f64>>], v: Var, tape: &Tape<'_>) -> &'g mut [f64] {
    grads[v.0].get_or_insert_with(|| vec![0.0; tape.size(v)])
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

fn add_into(y: &mut [f64], x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += xi);
}

/// One LSTM step with gates stacked as `[input, forget, candidate, output]`
/// in `w: 4H x (D + H)` and `b: 4H`, applied to `[x ⊕ h]`.
pub fn lstm_cell(
    tape: &mut Tape<'_>,
    x: Var,
    h: Var,
    c: Var,
    w: Var,
    b: Var,
) -> Result<(Var, Var)> {
    let hidden = tape.size(h);
    let (rows, cols) = tape.shape(w);
    if tape.size(c) != hidden
        || rows != 4 * hidden
        || cols != tape.size(x) + hidden
        || tape.size(b) != 4 * hidden
    {
        return Err(Error::Shape(format!(
            "lstm: w {rows}x{cols}, b {}, x {}, h {hidden}, c {}",
            tape.size(b),
            tape.size(x),
            tape.size(c)
        )));
    }
    let xh = tape.concat(&[x, h]);
    let z = tape.matvec(w, xh);
    let z = tape.add(z, b);
    let gate = |tape: &mut Tape<'_>, k: usize| tape.slice(z, k * hidden, hidden);
    let (i, f, g, o) = (gate(tape, 0), gate(tape, 1), gate(tape, 2), gate(tape, 3));
    let i = tape.sigmoid(i);
    let f = tape.sigmoid(f);
    let g = tape.tanh(g);
    let o = tape.sigmoid(o);
    let keep = tape.mul(f, c);
    let write = tape.mul(i, g);
    let c_new = tape.add(keep, write);
    let squashed = tape.tanh(c_new);
    let h_new = tape.mul(o, squashed);
    Ok((h_new, c_new))
}
