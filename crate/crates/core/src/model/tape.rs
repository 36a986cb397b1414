//! Reverse-mode automatic differentiation over small row-major matrices.

use std::fmt::Debug;

use num_traits::Float;

/// Floating-point element type of model tensors.
pub trait Scalar: Float + Debug + Send + Sync + 'static {}

impl<T: Float + Debug + Send + Sync + 'static> Scalar for T {}

pub(crate) fn lit<T: Scalar>(x: f64) -> T {
    T::from(x).expect("representable constant")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(rows * cols, data.len(), "tensor shape mismatch");
        Tensor { rows, cols, data }
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn add_assign(&mut self, other: &Tensor<T>) {
        debug_assert_eq!(self.data.len(), other.data.len());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + *b;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

/// Named trainable tensors and their gradient accumulators.
#[derive(Debug, Clone)]
pub struct Params<T> {
    pub names: Vec<String>,
    pub values: Vec<Tensor<T>>,
}

impl<T: Scalar> Params<T> {
    pub fn new() -> Self {
        Params {
            names: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor<T>) -> ParamId {
        self.names.push(name.into());
        self.values.push(value);
        ParamId(self.values.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor<T> {
        &self.values[id.0]
    }

    pub fn find(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn zero_grads(&self) -> Vec<Tensor<T>> {
        self.values
            .iter()
            .map(|v| Tensor::zeros(v.rows, v.cols))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

impl<T: Scalar> Default for Params<T> {
    fn default() -> Self {
        Self::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op<T> {
    Input,
    Embed {
        table: ParamId,
        ids: Vec<usize>,
    },
    Linear {
        x: Var,
        w: ParamId,
        b: Option<ParamId>,
    },
    Add(Var, Var),
    Mul(Var, Var),
    OneMinus(Var),
    Sigmoid(Var),
    Tanh(Var),
    Concat(Vec<Var>),
    Stack(Vec<Var>),
    SliceCols {
        x: Var,
        start: usize,
    },
    Row {
        x: Var,
        r: usize,
    },
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Softmax(Var),
    Mask {
        x: Var,
        mask: Vec<T>,
    },
    PickSum {
        x: Var,
        idx: Vec<usize>,
    },
    Log(Var),
    Scale(Var, T),
    Sum(Vec<Var>),
}

struct Node<T> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Records operations on tensors for one forward pass. Parameters are read
/// from a [`Params`] store and never copied into the tape.
pub struct Tape<'p, T> {
    params: &'p Params<T>,
    nodes: Vec<Node<T>>,
}

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p Params<T>) -> Self {
        Tape {
            params,
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> T {
        self.nodes[v.0].value.data[0]
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn input(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Input)
    }

    pub fn embed(&mut self, table: ParamId, ids: &[usize]) -> Var {
        let t = self.params.get(table);
        let mut out = Tensor::zeros(ids.len(), t.cols);
        for (r, &id) in ids.iter().enumerate() {
            out.row_mut(r).copy_from_slice(t.row(id));
        }
        self.push(
            out,
            Op::Embed {
                table,
                ids: ids.to_vec(),
            },
        )
    }

    /// `x · W (+ b)` with `W` of shape `in × out`.
    pub fn linear(&mut self, x: Var, w: ParamId, b: Option<ParamId>) -> Var {
        let xv = &self.nodes[x.0].value;
        let wv = self.params.get(w);
        assert_eq!(
            xv.cols, wv.rows,
            "linear: input width {} vs weight rows {}",
            xv.cols, wv.rows
        );
        let mut out = Tensor::zeros(xv.rows, wv.cols);
        for r in 0..xv.rows {
            let o = &mut out.data[r * wv.cols..(r + 1) * wv.cols];
            if let Some(b) = b {
                o.copy_from_slice(&self.params.get(b).data);
            }
            for (k, &xk) in xv.row(r).iter().enumerate() {
                if xk == T::zero() {
                    continue;
                }
                for (oj, &wj) in o.iter_mut().zip(wv.row(k)) {
                    *oj = *oj + xk * wj;
                }
            }
        }
        self.push(out, Op::Linear { x, w, b })
    }

    fn zip_with(&mut self, a: Var, b: Var, f: impl Fn(T, T) -> T, op: Op<T>) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(
            (av.rows, av.cols),
            (bv.rows, bv.cols),
            "elementwise shape mismatch"
        );
        let data = av
            .data
            .iter()
            .zip(&bv.data)
            .map(|(x, y)| f(*x, *y))
            .collect();
        let out = Tensor::from_vec(av.rows, av.cols, data);
        self.push(out, op)
    }

    fn map(&mut self, a: Var, f: impl Fn(T) -> T, op: Op<T>) -> Var {
        let av = &self.nodes[a.0].value;
        let out = Tensor::from_vec(av.rows, av.cols, av.data.iter().map(|x| f(*x)).collect());
        self.push(out, op)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        self.zip_with(a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn one_minus(&mut self, a: Var) -> Var {
        self.map(a, |x| T::one() - x, Op::OneMinus(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.map(a, |x| T::one() / (T::one() + (-x).exp()), Op::Sigmoid(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        self.map(a, |x| x.tanh(), Op::Tanh(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.map(a, |x| x.ln(), Op::Log(a))
    }

    pub fn scale(&mut self, a: Var, c: T) -> Var {
        self.map(a, |x| x * c, Op::Scale(a, c))
    }

    /// Column-wise concatenation of equal-height tensors.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let rows = self.nodes[parts[0].0].value.rows;
        let cols: usize = parts.iter().map(|p| self.nodes[p.0].value.cols).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let mut off = 0;
            for p in parts {
                let v = &self.nodes[p.0].value;
                assert_eq!(v.rows, rows, "concat: row count mismatch");
                out.data[r * cols + off..r * cols + off + v.cols].copy_from_slice(v.row(r));
                off += v.cols;
            }
        }
        self.push(out, Op::Concat(parts.to_vec()))
    }

    /// Row-wise concatenation of equal-width tensors.
    pub fn stack(&mut self, parts: &[Var]) -> Var {
        let cols = self.nodes[parts[0].0].value.cols;
        let mut data = Vec::new();
        for p in parts {
            let v = &self.nodes[p.0].value;
            assert_eq!(v.cols, cols, "stack: column count mismatch");
            data.extend_from_slice(&v.data);
        }
        let rows = data.len() / cols.max(1);
        self.push(
            Tensor::from_vec(rows, cols, data),
            Op::Stack(parts.to_vec()),
        )
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Var {
        let v = &self.nodes[x.0].value;
        let mut out = Tensor::zeros(v.rows, len);
        for r in 0..v.rows {
            out.row_mut(r)
                .copy_from_slice(&v.row(r)[start..start + len]);
        }
        self.push(out, Op::SliceCols { x, start })
    }

    pub fn row(&mut self, x: Var, r: usize) -> Var {
        let v = &self.nodes[x.0].value;
        let out = Tensor::from_vec(1, v.cols, v.row(r).to_vec());
        self.push(out, Op::Row { x, r })
    }

    /// `a · b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.cols, bv.rows, "matmul shape mismatch");
        let mut out = Tensor::zeros(av.rows, bv.cols);
        for i in 0..av.rows {
            for (k, &aik) in av.row(i).iter().enumerate() {
                let o = &mut out.data[i * bv.cols..(i + 1) * bv.cols];
                for (oj, &bkj) in o.iter_mut().zip(bv.row(k)) {
                    *oj = *oj + aik * bkj;
                }
            }
        }
        self.push(out, Op::MatMul(a, b))
    }

    /// `a · bᵀ`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(av.cols, bv.cols, "matmul_t shape mismatch");
        let mut out = Tensor::zeros(av.rows, bv.rows);
        for i in 0..av.rows {
            for j in 0..bv.rows {
                out.data[i * bv.rows + j] = dot(av.row(i), bv.row(j));
            }
        }
        self.push(out, Op::MatMulT(a, b))
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, x: Var) -> Var {
        let v = &self.nodes[x.0].value;
        let mut out = v.clone();
        for r in 0..v.rows {
            softmax_in_place(out.row_mut(r));
        }
        self.push(out, Op::Softmax(x))
    }

    /// Elementwise product with a constant mask (dropout).
    pub fn mask(&mut self, x: Var, mask: Vec<T>) -> Var {
        let v = &self.nodes[x.0].value;
        assert_eq!(v.data.len(), mask.len(), "mask size mismatch");
        let data = v.data.iter().zip(&mask).map(|(a, m)| *a * *m).collect();
        let out = Tensor::from_vec(v.rows, v.cols, data);
        self.push(out, Op::Mask { x, mask })
    }

    /// Sum of the selected flat entries, as a 1×1 tensor.
    pub fn pick_sum(&mut self, x: Var, idx: &[usize]) -> Var {
        let v = &self.nodes[x.0].value;
        let s = idx.iter().fold(T::zero(), |acc, &i| acc + v.data[i]);
        self.push(
            Tensor::from_vec(1, 1, vec![s]),
            Op::PickSum {
                x,
                idx: idx.to_vec(),
            },
        )
    }

    /// Sum of equal-shape tensors.
    pub fn sum(&mut self, parts: &[Var]) -> Var {
        let first = &self.nodes[parts[0].0].value;
        let mut out = first.clone();
        for p in &parts[1..] {
            out.add_assign(&self.nodes[p.0].value);
        }
        self.push(out, Op::Sum(parts.to_vec()))
    }

    /// Back-propagates from the scalar `root`, adding parameter gradients
    /// into `grads`.
    pub fn backward(&self, root: Var, grads: &mut [Tensor<T>]) {
        let mut g: Vec<Option<Tensor<T>>> = (0..=root.0).map(|_| None).collect();
        let rv = &self.nodes[root.0].value;
        g[root.0] = Some(Tensor::from_vec(rv.rows, rv.cols, vec![T::one(); rv.len()]));
        for i in (0..=root.0).rev() {
            let Some(dy) = g[i].take() else { continue };
            let node = &self.nodes[i];
            let y = &node.value;
            match &node.op {
                Op::Input => {}
                Op::Embed { table, ids } => {
                    let gt = &mut grads[table.0];
                    for (r, &id) in ids.iter().enumerate() {
                        for (a, b) in gt.row_mut(id).iter_mut().zip(dy.row(r)) {
                            *a = *a + *b;
                        }
                    }
                }
                Op::Linear { x, w, b } => {
                    let xv = &self.nodes[x.0].value;
                    let wv = self.params.get(*w);
                    let mut dx = Tensor::zeros(xv.rows, xv.cols);
                    for r in 0..xv.rows {
                        let dyr = dy.row(r);
                        for k in 0..xv.cols {
                            dx.data[r * xv.cols + k] = dot(dyr, wv.row(k));
                        }
                    }
                    let gw = &mut grads[w.0];
                    for r in 0..xv.rows {
                        let dyr = dy.row(r);
                        for (k, &xk) in xv.row(r).iter().enumerate() {
                            if xk == T::zero() {
                                continue;
                            }
                            for (a, &d) in gw.row_mut(k).iter_mut().zip(dyr) {
                                *a = *a + xk * d;
                            }
                        }
                    }
                    if let Some(b) = b {
                        let gb = &mut grads[b.0];
                        for r in 0..dy.rows {
                            for (a, &d) in gb.data.iter_mut().zip(dy.row(r)) {
                                *a = *a + d;
                            }
                        }
                    }
                    accumulate(&mut g, *x, dx);
                }
                Op::Add(a, b) => {
                    accumulate(&mut g, *a, dy.clone());
                    accumulate(&mut g, *b, dy);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    accumulate(&mut g, *a, elementwise(&dy, bv, |d, x| d * x));
                    accumulate(&mut g, *b, elementwise(&dy, av, |d, x| d * x));
                }
                Op::OneMinus(a) => accumulate(&mut g, *a, map_t(&dy, |d| -d)),
                Op::Sigmoid(a) => accumulate(
                    &mut g,
                    *a,
                    elementwise(&dy, y, |d, s| d * s * (T::one() - s)),
                ),
                Op::Tanh(a) => accumulate(
                    &mut g,
                    *a,
                    elementwise(&dy, y, |d, t| d * (T::one() - t * t)),
                ),
                Op::Log(a) => {
                    let av = &self.nodes[a.0].value;
                    accumulate(&mut g, *a, elementwise(&dy, av, |d, x| d / x));
                }
                Op::Scale(a, c) => accumulate(&mut g, *a, map_t(&dy, |d| d * *c)),
                Op::Concat(parts) => {
                    let mut off = 0;
                    for p in parts {
                        let w = self.nodes[p.0].value.cols;
                        let mut part = Tensor::zeros(dy.rows, w);
                        for r in 0..dy.rows {
                            part.row_mut(r).copy_from_slice(&dy.row(r)[off..off + w]);
                        }
                        off += w;
                        accumulate(&mut g, *p, part);
                    }
                }
                Op::Stack(parts) => {
                    let mut r0 = 0;
                    for p in parts {
                        let h = self.nodes[p.0].value.rows;
                        let data = dy.data[r0 * dy.cols..(r0 + h) * dy.cols].to_vec();
                        r0 += h;
                        accumulate(&mut g, *p, Tensor::from_vec(h, dy.cols, data));
                    }
                }
                Op::SliceCols { x, start } => {
                    let xv = &self.nodes[x.0].value;
                    let mut dx = Tensor::zeros(xv.rows, xv.cols);
                    for r in 0..xv.rows {
                        dx.row_mut(r)[*start..*start + dy.cols].copy_from_slice(dy.row(r));
                    }
                    accumulate(&mut g, *x, dx);
                }
                Op::Row { x, r } => {
                    let xv = &self.nodes[x.0].value;
                    let mut dx = Tensor::zeros(xv.rows, xv.cols);
                    dx.row_mut(*r).copy_from_slice(&dy.data);
                    accumulate(&mut g, *x, dx);
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let mut da = Tensor::zeros(av.rows, av.cols);
                    let mut db = Tensor::zeros(bv.rows, bv.cols);
                    for i in 0..av.rows {
                        let dyi = dy.row(i);
                        for k in 0..av.cols {
                            da.data[i * av.cols + k] = dot(dyi, bv.row(k));
                            let aik = av.data[i * av.cols + k];
                            for (d, &v) in db.row_mut(k).iter_mut().zip(dyi) {
                                *d = *d + aik * v;
                            }
                        }
                    }
                    accumulate(&mut g, *a, da);
                    accumulate(&mut g, *b, db);
                }
                Op::MatMulT(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let mut da = Tensor::zeros(av.rows, av.cols);
                    let mut db = Tensor::zeros(bv.rows, bv.cols);
                    for i in 0..av.rows {
                        for j in 0..bv.rows {
                            let d = dy.data[i * bv.rows + j];
                            if d == T::zero() {
                                continue;
                            }
                            for (x, &v) in da.row_mut(i).iter_mut().zip(bv.row(j)) {
                                *x = *x + d * v;
                            }
                            for (x, &v) in db.row_mut(j).iter_mut().zip(av.row(i)) {
                                *x = *x + d * v;
                            }
                        }
                    }
                    accumulate(&mut g, *a, da);
                    accumulate(&mut g, *b, db);
                }
                Op::Softmax(x) => {
                    let mut dx = Tensor::zeros(y.rows, y.cols);
                    for r in 0..y.rows {
                        let (yr, dyr) = (y.row(r), dy.row(r));
                        let s = dot(yr, dyr);
                        for ((o, &yi), &di) in dx.row_mut(r).iter_mut().zip(yr).zip(dyr) {
                            *o = yi * (di - s);
                        }
                    }
                    accumulate(&mut g, *x, dx);
                }
                Op::Mask { x, mask } => {
                    let data = dy.data.iter().zip(mask).map(|(d, m)| *d * *m).collect();
                    accumulate(&mut g, *x, Tensor::from_vec(dy.rows, dy.cols, data));
                }
                Op::PickSum { x, idx } => {
                    let xv = &self.nodes[x.0].value;
                    let mut dx = Tensor::zeros(xv.rows, xv.cols);
                    for &k in idx {
                        dx.data[k] = dx.data[k] + dy.data[0];
                    }
                    accumulate(&mut g, *x, dx);
                }
                Op::Sum(parts) => {
                    for p in parts {
                        accumulate(&mut g, *p, dy.clone());
                    }
                }
            }
        }
    }
}

fn accumulate<T: Scalar>(g: &mut [Option<Tensor<T>>], v: Var, d: Tensor<T>) {
    match &mut g[v.0] {
        Some(existing) => existing.add_assign(&d),
        slot @ None => *slot = Some(d),
    }
}

fn elementwise<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>, f: impl Fn(T, T) -> T) -> Tensor<T> {
    Tensor::from_vec(
        a.rows,
        a.cols,
        a.data.iter().zip(&b.data).map(|(x, y)| f(*x, *y)).collect(),
    )
}

fn map_t<T: Scalar>(a: &Tensor<T>, f: impl Fn(T) -> T) -> Tensor<T> {
    Tensor::from_vec(a.rows, a.cols, a.data.iter().map(|x| f(*x)).collect())
}

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + *x * *y)
}

pub(crate) fn softmax_in_place<T: Scalar>(row: &mut [T]) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in row.iter_mut() {
        *x = (*x - max).exp();
        sum = sum + *x;
    }
    for x in row.iter_mut() {
        *x = *x / sum;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central-difference check of every op against a scalar objective.
    #[test]
    fn ops_match_finite_differences() {
        let mut params: Params<f64> = Params::new();
        let w = params.add(
            "w",
            Tensor::from_vec(3, 2, vec![0.3, -0.2, 0.5, 0.1, -0.4, 0.7]),
        );
        let b = params.add("b", Tensor::from_vec(1, 2, vec![0.05, -0.1]));
        let e = params.add(
            "e",
            Tensor::from_vec(4, 3, (0..12).map(|i| (i as f64 * 0.37).sin()).collect()),
        );

        let objective = |params: &Params<f64>, grads: Option<&mut Vec<Tensor<f64>>>| -> f64 {
            let mut t = Tape::new(params);
            let x = t.embed(e, &[2, 0, 3]);
            let h = t.linear(x, w, Some(b));
            let s = t.sigmoid(h);
            let th = t.tanh(h);
            let m = t.mul(s, th);
            let om = t.one_minus(s);
            let a = t.add(m, om);
            let c = t.concat(&[a, x]);
            let r0 = t.row(c, 1);
            let k = t.slice_cols(c, 1, 3);
            let sc = t.matmul_t(r0, c);
            let p = t.softmax(sc);
            let ctx = t.matmul(p, k);
            let r3 = t.slice_cols(r0, 2, 3);
            let st = t.stack(&[ctx, r3]);
            let mk = t.mask(
                st,
                (0..st_len(&t, st))
                    .map(|i| if i % 3 == 0 { 0.0 } else { 2.0 })
                    .collect(),
            );
            let q = t.softmax(mk);
            let pick = t.pick_sum(q, &[0, 2, 5]);
            let pick2 = t.pick_sum(p, &[1]);
            let lg = t.log(pick);
            let lg2 = t.log(pick2);
            let tot = t.sum(&[lg, lg2]);
            let out = t.scale(tot, -0.5);
            let val = t.scalar(out);
            if let Some(gr) = grads {
                t.backward(out, gr);
            }
            val
        };
        fn st_len(t: &Tape<'_, f64>, v: Var) -> usize {
            t.value(v).len()
        }

        let mut grads = params.zero_grads();
        objective(&params, Some(&mut grads));
        let h = 1e-6;
        for (pid, g) in grads.iter().enumerate() {
            for k in 0..g.len() {
                let mut plus = params.clone();
                plus.values[pid].data[k] += h;
                let mut minus = params.clone();
                minus.values[pid].data[k] -= h;
                let numeric = (objective(&plus, None) - objective(&minus, None)) / (2.0 * h);
                let analytic = g.data[k];
                let denom = numeric.abs().max(analytic.abs()).max(1e-8);
                assert!(
                    (numeric - analytic).abs() / denom < 1e-6,
                    "param {pid}[{k}]: {numeric} vs {analytic}"
                );
            }
        }
    }
}
