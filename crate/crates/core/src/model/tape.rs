//! Reverse-mode differentiation over dense f64 matrices.
//!
//! A [`Tape`] records one forward computation. Parameters are borrowed,
//! never copied, so many tapes can share one parameter set across threads.
//! Every value is a 2-D array; scalars are 1×1 and score vectors are n×1.

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Mask(Var, Array2<f64>),
    Scale(Var, f64),
    Gather(Var, Vec<usize>),
    /// Per output cell, the source row holding the max (`usize::MAX` if none).
    ScatterMax(Var, Array2<usize>),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Gelu(Var),
    Tanh(Var),
    Sigmoid(Var),
    LayerNorm(Var, Vec<f64>),
    ColMax(Var, Vec<usize>),
    RowDot(Var, Var),
    LogSoftmax(Var, Vec<Vec<usize>>),
    Sum(Vec<Var>),
}

struct Node {
    value: Option<Array2<f64>>,
    op: Op,
}

pub struct Tape<'p> {
    params: &'p [Array2<f64>],
    nodes: Vec<Node>,
}

/// Gradients of one scalar output, per parameter (absent when unused).
#[derive(Debug, Clone)]
pub struct Gradients {
    pub params: Vec<Option<Array2<f64>>>,
}

impl<'p> Tape<'p> {
    pub fn new(params: &'p [Array2<f64>]) -> Self {
        Tape { params, nodes: Vec::new() }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value: Some(value), op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        match (&self.nodes[v.0].value, &self.nodes[v.0].op) {
            (Some(x), _) => x,
            (None, Op::Param(i)) => &self.params[*i],
            (None, _) => unreachable!("only parameters are stored by reference"),
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Hash of every max-selection made so far. Two evaluations with equal
    /// signatures lie on the same smooth piece of the function.
    pub fn selection_signature(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for n in &self.nodes {
            match &n.op {
                Op::ScatterMax(_, arg) => arg.iter().for_each(|a| a.hash(&mut h)),
                Op::ColMax(_, arg) => arg.hash(&mut h),
                _ => {}
            }
        }
        h.finish()
    }

    pub fn constant(&mut self, x: Array2<f64>) -> Var {
        self.push(x, Op::Constant)
    }

    pub fn param(&mut self, i: usize) -> Var {
        self.nodes.push(Node { value: None, op: Op::Param(i) });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let y = self.value(a).dot(self.value(b));
        self.push(y, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let y = self.value(a) + self.value(b);
        self.push(y, Op::Add(a, b))
    }

    /// `x + b` with the 1×m row `b` broadcast over the rows of `x`.
    pub fn add_row(&mut self, x: Var, b: Var) -> Var {
        let y = self.value(x) + self.value(b);
        self.push(y, Op::AddRow(x, b))
    }

    pub fn mul_row(&mut self, x: Var, w: Var) -> Var {
        let y = self.value(x) * self.value(w);
        self.push(y, Op::MulRow(x, w))
    }

    /// Elementwise product with a constant (dropout masks).
    pub fn mask(&mut self, x: Var, m: Array2<f64>) -> Var {
        let y = self.value(x) * &m;
        self.push(y, Op::Mask(x, m))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let y = self.value(x) * c;
        self.push(y, Op::Scale(x, c))
    }

    pub fn gather(&mut self, x: Var, rows: Vec<usize>) -> Var {
        let y = self.value(x).select(Axis(0), &rows);
        self.push(y, Op::Gather(x, rows))
    }

    /// Row-wise max of `x` grouped by `targets` into `n` output rows; rows
    /// that receive nothing are zero.
    pub fn scatter_max(&mut self, x: Var, targets: &[usize], n: usize) -> Var {
        let xv = self.value(x);
        let m = xv.ncols();
        assert_eq!(xv.nrows(), targets.len(), "scatter_max: one target per row");
        let mut y = Array2::<f64>::zeros((n, m));
        let mut arg = Array2::<usize>::from_elem((n, m), usize::MAX);
        for (r, &t) in targets.iter().enumerate() {
            let row = xv.row(r);
            for c in 0..m {
                if arg[[t, c]] == usize::MAX || row[c] > y[[t, c]] {
                    y[[t, c]] = row[c];
                    arg[[t, c]] = r;
                }
            }
        }
        self.push(y, Op::ScatterMax(x, arg))
    }

    pub fn concat_cols(&mut self, xs: &[Var]) -> Var {
        let views: Vec<ArrayView2<f64>> = xs.iter().map(|v| self.value(*v).view()).collect();
        let y = concatenate(Axis(1), &views).expect("concat_cols: row counts differ");
        self.push(y, Op::ConcatCols(xs.to_vec()))
    }

    pub fn concat_rows(&mut self, xs: &[Var]) -> Var {
        let views: Vec<ArrayView2<f64>> = xs.iter().map(|v| self.value(*v).view()).collect();
        let y = concatenate(Axis(0), &views).expect("concat_rows: column counts differ");
        self.push(y, Op::ConcatRows(xs.to_vec()))
    }

    /// GELU, tanh approximation.
    pub fn gelu(&mut self, x: Var) -> Var {
        let y = self.value(x).mapv(|v| 0.5 * v * (1.0 + (GELU_C * (v + 0.044715 * v * v * v)).tanh()));
        self.push(y, Op::Gelu(x))
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let y = self.value(x).mapv(f64::tanh);
        self.push(y, Op::Tanh(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let y = self.value(x).mapv(|v| 1.0 / (1.0 + (-v).exp()));
        self.push(y, Op::Sigmoid(x))
    }

    /// Row-wise normalisation to zero mean and unit variance (no affine part).
    pub fn layer_norm(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let d = xv.ncols() as f64;
        let mut y = xv.clone();
        let mut inv = Vec::with_capacity(xv.nrows());
        for mut row in y.rows_mut() {
            let mu = row.sum() / d;
            let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d;
            let is = 1.0 / (var + LN_EPS).sqrt();
            row.mapv_inplace(|v| (v - mu) * is);
            inv.push(is);
        }
        self.push(y, Op::LayerNorm(x, inv))
    }

    /// Column-wise max, giving a 1×m row.
    pub fn col_max(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        assert!(xv.nrows() > 0, "col_max of an empty matrix");
        let mut arg = vec![0; xv.ncols()];
        let mut y = xv.slice(s![0..1, ..]).to_owned();
        for (r, row) in xv.rows().into_iter().enumerate().skip(1) {
            for c in 0..row.len() {
                if row[c] > y[[0, c]] {
                    y[[0, c]] = row[c];
                    arg[c] = r;
                }
            }
        }
        self.push(y, Op::ColMax(x, arg))
    }

    /// Row-wise inner products, giving an n×1 column.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Var {
        let y = (self.value(a) * self.value(b)).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.push(y, Op::RowDot(a, b))
    }

    /// Log-softmax of a column within each group; the groups must partition
    /// the rows.
    pub fn log_softmax(&mut self, x: Var, groups: Vec<Vec<usize>>) -> Var {
        let xv = self.value(x);
        debug_assert_eq!(groups.iter().map(Vec::len).sum::<usize>(), xv.nrows());
        let mut y = xv.clone();
        for g in &groups {
            let mx = g.iter().map(|&i| xv[[i, 0]]).fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + g.iter().map(|&i| (xv[[i, 0]] - mx).exp()).sum::<f64>().ln();
            for &i in g {
                y[[i, 0]] = xv[[i, 0]] - lse;
            }
        }
        self.push(y, Op::LogSoftmax(x, groups))
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let mut y = self.value(xs[0]).clone();
        for v in &xs[1..] {
            y += self.value(*v);
        }
        self.push(y, Op::Sum(xs.to_vec()))
    }

    /// Gradients of the scalar `out` with respect to every parameter.
    pub fn backward(&self, out: Var) -> Gradients {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut pgrads: Vec<Option<Array2<f64>>> = (0..self.params.len()).map(|_| None).collect();
        grads[out.0] = Some(Array2::ones(self.value(out).raw_dim()));
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            match &self.nodes[i].op {
                Op::Constant => {}
                Op::Param(p) => accumulate(&mut pgrads[*p], g),
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads[b.0], g.clone());
                    accumulate(&mut grads[a.0], g);
                }
                Op::AddRow(x, b) => {
                    accumulate(&mut grads[b.0], g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    accumulate(&mut grads[x.0], g);
                }
                Op::MulRow(x, w) => {
                    let gw = (&g * self.value(*x)).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let gx = &g * self.value(*w);
                    accumulate(&mut grads[w.0], gw);
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Mask(x, m) => accumulate(&mut grads[x.0], g * m),
                Op::Scale(x, c) => accumulate(&mut grads[x.0], g * *c),
                Op::Gather(x, rows) => {
                    let mut gx = Array2::zeros(self.value(*x).raw_dim());
                    for (r, &src) in rows.iter().enumerate() {
                        let mut dst = gx.row_mut(src);
                        dst += &g.row(r);
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::ScatterMax(x, arg) => {
                    let mut gx = Array2::zeros(self.value(*x).raw_dim());
                    for ((t, c), &r) in arg.indexed_iter() {
                        if r != usize::MAX {
                            gx[[r, c]] += g[[t, c]];
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::ConcatCols(xs) => {
                    let mut off = 0;
                    for v in xs {
                        let w = self.value(*v).ncols();
                        accumulate(&mut grads[v.0], g.slice(s![.., off..off + w]).to_owned());
                        off += w;
                    }
                }
                Op::ConcatRows(xs) => {
                    let mut off = 0;
                    for v in xs {
                        let h = self.value(*v).nrows();
                        accumulate(&mut grads[v.0], g.slice(s![off..off + h, ..]).to_owned());
                        off += h;
                    }
                }
                Op::Gelu(x) => {
                    let mut gx = g;
                    gx.zip_mut_with(self.value(*x), |gi, &v| {
                        let u = GELU_C * (v + 0.044715 * v * v * v);
                        let t = u.tanh();
                        let du = GELU_C * (1.0 + 3.0 * 0.044715 * v * v);
                        *gi *= 0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * du;
                    });
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Tanh(x) => {
                    let mut gx = g;
                    gx.zip_mut_with(self.value(Var(i)), |gi, &y| *gi *= 1.0 - y * y);
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Sigmoid(x) => {
                    let mut gx = g;
                    gx.zip_mut_with(self.value(Var(i)), |gi, &y| *gi *= y * (1.0 - y));
                    accumulate(&mut grads[x.0], gx);
                }
                Op::LayerNorm(x, inv) => {
                    let y = self.value(Var(i));
                    let d = y.ncols() as f64;
                    let mut gx = g;
                    for (r, mut row) in gx.rows_mut().into_iter().enumerate() {
                        let yr = y.row(r);
                        let mg = row.sum() / d;
                        let mgy = row.iter().zip(yr.iter()).map(|(a, b)| a * b).sum::<f64>() / d;
                        for c in 0..row.len() {
                            row[c] = inv[r] * (row[c] - mg - yr[c] * mgy);
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::ColMax(x, arg) => {
                    let mut gx = Array2::zeros(self.value(*x).raw_dim());
                    for (c, &r) in arg.iter().enumerate() {
                        gx[[r, c]] += g[[0, c]];
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::RowDot(a, b) => {
                    let ga = self.value(*b) * &g;
                    let gb = self.value(*a) * &g;
                    accumulate(&mut grads[a.0], ga);
                    accumulate(&mut grads[b.0], gb);
                }
                Op::LogSoftmax(x, groups) => {
                    let y = self.value(Var(i));
                    let mut gx = g.clone();
                    for grp in groups {
                        let total: f64 = grp.iter().map(|&r| g[[r, 0]]).sum();
                        for &r in grp {
                            gx[[r, 0]] = g[[r, 0]] - y[[r, 0]].exp() * total;
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Sum(xs) => {
                    for v in xs {
                        accumulate(&mut grads[v.0], g.clone());
                    }
                }
            }
        }
        Gradients { params: pgrads }
    }
}

fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
    match slot {
        Some(x) => *x += &g,
        None => *slot = Some(g),
    }
}

impl Gradients {
    pub fn zeros_like(params: &[Array2<f64>]) -> Self {
        Gradients { params: params.iter().map(|p| Some(Array2::zeros(p.raw_dim()))).collect() }
    }

    /// Adds `other * weight` into `self`.
    pub fn add_scaled(&mut self, other: &Gradients, weight: f64) {
        for (a, b) in self.params.iter_mut().zip(&other.params) {
            if let Some(b) = b {
                match a {
                    Some(a) => a.scaled_add(weight, b),
                    None => *a = Some(b * weight),
                }
            }
        }
    }

    pub fn get(&self, i: usize) -> Option<&Array2<f64>> {
        self.params[i].as_ref()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn numeric(params: &mut [Array2<f64>], f: &dyn Fn(&[Array2<f64>]) -> f64) -> Vec<Array2<f64>> {
        let h = 1e-6;
        let mut out = Vec::new();
        for p in 0..params.len() {
            let mut g = Array2::zeros(params[p].raw_dim());
            for idx in 0..params[p].len() {
                let (r, c) = (idx / params[p].ncols(), idx % params[p].ncols());
                let orig = params[p][[r, c]];
                params[p][[r, c]] = orig + h;
                let fp = f(params);
                params[p][[r, c]] = orig - h;
                let fm = f(params);
                params[p][[r, c]] = orig;
                g[[r, c]] = (fp - fm) / (2.0 * h);
            }
            out.push(g);
        }
        out
    }

    fn composite(ps: &[Array2<f64>]) -> (Tape<'_>, Var) {
        let mut t = Tape::new(ps);
        let x = t.param(0);
        let w = t.param(1);
        let b = t.param(2);
        let h = t.matmul(x, w);
        let h = t.add_row(h, b);
        let h = t.gelu(h);
        let h = t.layer_norm(h);
        let h = t.mul_row(h, b);
        let m = t.scatter_max(h, &[0, 0, 1], 3);
        let m = t.tanh(m);
        let q = t.col_max(m);
        let qq = t.gather(q, vec![0, 0, 0]);
        let cat = t.concat_cols(&[m, qq]);
        let s = t.sigmoid(cat);
        let d = t.row_dot(s, cat);
        let both = t.concat_rows(&[d, d]);
        let lp = t.log_softmax(both, vec![vec![0, 2, 4], vec![1, 3, 5]]);
        let a = t.gather(lp, vec![1]);
        let c = t.gather(lp, vec![4]);
        let l = t.sum(&[a, c]);
        let l = t.scale(l, -1.0);
        (t, l)
    }

    #[test]
    fn matches_finite_differences() {
        let mut ps = vec![
            array![[0.3, -0.2], [0.5, 0.1], [-0.4, 0.9]],
            array![[0.7, -0.3, 0.2], [0.1, 0.8, -0.6]],
            array![[0.2, -0.1, 0.4]],
        ];
        let (t, l) = composite(&ps);
        let grads = t.backward(l);
        let num = numeric(&mut ps, &|p| {
            let (t, l) = composite(p);
            t.scalar(l)
        });
        for (i, n) in num.iter().enumerate() {
            let a = grads.get(i).unwrap();
            let err = (a - n).mapv(f64::abs).fold(0.0f64, |m, v| m.max(*v));
            assert!(err < 1e-6, "param {i}: {a} vs {n}");
        }
    }

    #[test]
    fn empty_scatter_rows_are_zero() {
        let ps = vec![array![[1.0, -2.0]]];
        let mut t = Tape::new(&ps);
        let x = t.param(0);
        let y = t.scatter_max(x, &[1], 3);
        assert_eq!(t.value(y), &array![[0.0, 0.0], [1.0, -2.0], [0.0, 0.0]]);
    }
}
