//! Reverse-mode automatic differentiation over dense `f64` matrices.
//!
//! A [`Tape`] records every operation of one forward pass; [`Tape::backward`]
//! walks it in reverse and returns the gradient of a scalar node with respect
//! to every parameter that was read.

use ndarray::{s, Array1, Array2, Axis, Zip};

/// Handle to a node on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)
const GELU_A: f64 = 0.044_715;
pub const LAYER_NORM_EPS: f64 = 1e-5;

#[derive(Debug)]
enum Op {
    Input,
    Param,
    MatMul(Var, Var),
    /// `a · bᵀ`
    MatMulT(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    /// `a + b` with `b` a single row broadcast over the rows of `a`.
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Exp(Var),
    Square(Var),
    /// Keeps `tanh(c (x + a x³))` for the backward pass.
    Gelu(Var, Array2<f64>),
    Sigmoid(Var),
    SoftmaxRows(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        xhat: Array2<f64>,
        rstd: Array1<f64>,
    },
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    MeanAll(Var),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    params: Vec<(usize, Var)>,
}

fn gelu_tanh(x: f64) -> f64 {
    // tanh(u) = 1 - 2 / (e^{2u} + 1), one exp instead of libm tanh
    let u = GELU_C * (x + GELU_A * x * x * x);
    if u.abs() > 20.0 {
        return u.signum();
    }
    1.0 - 2.0 / ((2.0 * u).exp() + 1.0)
}

/// Tanh-approximated GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + gelu_tanh(x))
}

fn gelu_grad(x: f64, t: f64) -> f64 {
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_A * x * x)
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_rows(x: &Array2<f64>) -> Array2<f64> {
    let mut out = x.clone();
    for mut row in out.rows_mut() {
        let m = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let sum = row.sum();
        row /= sum;
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    /// A constant with no gradient.
    pub fn input(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Input)
    }

    /// A differentiable leaf bound to parameter slot `id`; repeated reads
    /// of the same slot share one node.
    pub fn param(&mut self, id: usize, value: &Array2<f64>) -> Var {
        if let Some(&(_, v)) = self.params.iter().find(|(p, _)| *p == id) {
            return v;
        }
        let v = self.push(value.clone(), Op::Param);
        self.params.push((id, v));
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(&self.value(b).t());
        self.push(value, Op::MatMulT(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        self.push(value, Op::Mul(a, b))
    }

    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        assert_eq!(self.value(row).nrows(), 1, "add_row expects a single row");
        let value = self.value(a) + self.value(row);
        self.push(value, Op::AddRow(a, row))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a) * k;
        self.push(value, Op::Scale(a, k))
    }

    pub fn add_scalar(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a) + k;
        self.push(value, Op::AddScalar(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::exp);
        self.push(value, Op::Exp(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x * x);
        self.push(value, Op::Square(a))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let t = x.mapv(gelu_tanh);
        let value = ndarray::Zip::from(x).and(&t).map_collect(|&x, &t| 0.5 * x * (1.0 + t));
        self.push(value, Op::Gelu(a, t))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        self.push(value, Op::SoftmaxRows(a))
    }

    /// Row-wise layer normalization with affine `gamma`/`beta` rows.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let xv = self.value(x);
        let n = xv.ncols() as f64;
        let mean = xv.sum_axis(Axis(1)) / n;
        let centered = xv - &mean.view().insert_axis(Axis(1));
        let var = centered.mapv(|v| v * v).sum_axis(Axis(1)) / n;
        let rstd = var.mapv(|v| 1.0 / (v + LAYER_NORM_EPS).sqrt());
        let xhat = centered * &rstd.view().insert_axis(Axis(1));
        let value = &xhat * self.value(gamma) + self.value(beta);
        self.push(
            value,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                rstd,
            },
        )
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let value = self.value(a).slice(s![.., start..start + len]).to_owned();
        self.push(value, Op::SliceCols(a, start))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("row counts must agree");
        self.push(value, Op::ConcatCols(parts.to_vec()))
    }

    /// Mean over every entry, as a 1×1 node.
    pub fn mean_all(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).mean().unwrap_or(0.0));
        self.push(value, Op::MeanAll(a))
    }

    /// Gradients of the scalar `root` with respect to every parameter read
    /// on this tape, as `(slot, gradient)` pairs in first-read order.
    pub fn backward(&self, root: Var) -> Vec<(usize, Array2<f64>)> {
        assert_eq!(self.value(root).dim(), (1, 1), "backward needs a scalar root");
        let mut grads: Vec<Option<Array2<f64>>> = (0..=root.0).map(|_| None).collect();
        grads[root.0] = Some(Array2::ones((1, 1)));

        fn acc(grads: &mut [Option<Array2<f64>>], v: Var, g: Array2<f64>) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &g,
                slot => *slot = Some(g),
            }
        }

        for i in (0..=root.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param => {
                    grads[i] = Some(g);
                }
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    let ga = g.dot(self.value(*b));
                    let gb = g.t().dot(self.value(*a));
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    acc(&mut grads, *b, g.clone());
                    acc(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    acc(&mut grads, *b, -&g);
                    acc(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let ga = &g * self.value(*b);
                    let gb = &g * self.value(*a);
                    acc(&mut grads, *a, ga);
                    acc(&mut grads, *b, gb);
                }
                Op::AddRow(a, row) => {
                    acc(&mut grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *a, g);
                }
                Op::Scale(a, k) => acc(&mut grads, *a, g * *k),
                Op::AddScalar(a) => acc(&mut grads, *a, g),
                Op::Exp(a) => acc(&mut grads, *a, g * &node.value),
                Op::Square(a) => acc(&mut grads, *a, g * self.value(*a) * 2.0),
                Op::Gelu(a, t) => {
                    let mut ga = g;
                    Zip::from(&mut ga)
                        .and(self.value(*a))
                        .and(t)
                        .for_each(|gv, &x, &t| *gv *= gelu_grad(x, t));
                    acc(&mut grads, *a, ga);
                }
                Op::Sigmoid(a) => {
                    let mut ga = g;
                    Zip::from(&mut ga).and(&node.value).for_each(|gv, &y| *gv *= y * (1.0 - y));
                    acc(&mut grads, *a, ga);
                }
                Op::SoftmaxRows(a) => {
                    let y = &node.value;
                    let dot = (&g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                    let ga = y * &(g - &dot);
                    acc(&mut grads, *a, ga);
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    rstd,
                } => {
                    let n = xhat.ncols() as f64;
                    acc(&mut grads, *beta, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
                    acc(&mut grads, *gamma, (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0)));
                    let dxhat = &g * self.value(*gamma);
                    let mean_d = dxhat.sum_axis(Axis(1)).insert_axis(Axis(1)) / n;
                    let mean_dx = (&dxhat * xhat).sum_axis(Axis(1)).insert_axis(Axis(1)) / n;
                    let gx = (dxhat - &mean_d - &(xhat * &mean_dx)) * &rstd.view().insert_axis(Axis(1));
                    acc(&mut grads, *x, gx);
                }
                Op::SliceCols(a, start) => {
                    let mut ga = Array2::zeros(self.value(*a).raw_dim());
                    let w = g.ncols();
                    ga.slice_mut(s![.., *start..*start + w]).assign(&g);
                    acc(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        acc(&mut grads, *p, g.slice(s![.., start..start + w]).to_owned());
                        start += w;
                    }
                }
                Op::MeanAll(a) => {
                    let av = self.value(*a);
                    let k = g[[0, 0]] / av.len().max(1) as f64;
                    acc(&mut grads, *a, Array2::from_elem(av.raw_dim(), k));
                }
            }
        }

        self.params
            .iter()
            .map(|&(id, v)| {
                let g = grads
                    .get_mut(v.0)
                    .and_then(Option::take)
                    .unwrap_or_else(|| Array2::zeros(self.value(v).raw_dim()));
                (id, g)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn numeric_grad(f: impl Fn(&Array2<f64>) -> f64, x: &Array2<f64>) -> Array2<f64> {
        let eps = 1e-6;
        let mut g = Array2::zeros(x.raw_dim());
        for idx in 0..x.len() {
            let (r, c) = (idx / x.ncols(), idx % x.ncols());
            let mut xp = x.clone();
            xp[[r, c]] += eps;
            let mut xm = x.clone();
            xm[[r, c]] -= eps;
            g[[r, c]] = (f(&xp) - f(&xm)) / (2.0 * eps);
        }
        g
    }

    fn check(build: impl Fn(&mut Tape, Var) -> Var, x: Array2<f64>) {
        let eval = |xv: &Array2<f64>| {
            let mut t = Tape::new();
            let v = t.param(0, xv);
            let out = build(&mut t, v);
            t.scalar(out)
        };
        let mut t = Tape::new();
        let v = t.param(0, &x);
        let out = build(&mut t, v);
        let g = t.backward(out).remove(0).1;
        let n = numeric_grad(eval, &x);
        for (a, b) in g.iter().zip(n.iter()) {
            assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()), "analytic {a} vs numeric {b}");
        }
    }

    fn sample() -> Array2<f64> {
        array![[0.3, -1.2, 0.7], [1.1, 0.4, -0.5]]
    }

    #[test]
    fn elementwise_gradients() {
        check(|t, x| { let y = t.gelu(x); t.mean_all(y) }, sample());
        check(|t, x| { let y = t.sigmoid(x); let y = t.square(y); t.mean_all(y) }, sample());
        check(|t, x| { let y = t.exp(x); let y = t.mul(y, x); t.mean_all(y) }, sample());
        check(|t, x| { let y = t.scale(x, -2.5); let y = t.add_scalar(y, 1.0); let y = t.square(y); t.mean_all(y) }, sample());
    }

    #[test]
    fn matrix_gradients() {
        let w = array![[0.5, -0.3], [0.2, 0.9], [-0.7, 0.1]];
        check(
            |t, x| {
                let wv = t.input(w.clone());
                let y = t.matmul(x, wv);
                let v = t.input(array![[0.1, 0.4], [-0.6, 0.3], [0.8, -0.2], [0.05, 0.7]]);
                let z = t.matmul_t(y, v);
                let z2 = t.matmul_t(y, y);
                let z = t.concat_cols(&[z, z2]);
                let z = t.square(z);
                t.mean_all(z)
            },
            sample(),
        );
        check(
            |t, x| {
                let y = t.softmax_rows(x);
                let c = t.input(array![[1.0, 2.0, -1.0], [0.5, 0.0, 3.0]]);
                let y = t.mul(y, c);
                t.mean_all(y)
            },
            sample(),
        );
        check(
            |t, x| {
                let a = t.slice_cols(x, 1, 2);
                let b = t.slice_cols(x, 0, 1);
                let c = t.concat_cols(&[a, b, a]);
                let c = t.square(c);
                t.mean_all(c)
            },
            sample(),
        );
    }

    #[test]
    fn layer_norm_gradient() {
        let c = array![[1.0, 2.0, -1.0], [0.5, 0.0, 3.0]];
        check(
            |t, x| {
                let g = t.input(array![[1.5, 0.5, -1.0]]);
                let b = t.input(array![[0.1, 0.2, 0.3]]);
                let y = t.layer_norm(x, g, b);
                let cv = t.input(c.clone());
                let y = t.mul(y, cv);
                t.mean_all(y)
            },
            sample(),
        );
        // gradient with respect to the affine row itself
        check(
            |t, g| {
                let x = t.input(sample());
                let b = t.input(array![[0.0, 0.0, 0.0]]);
                let y = t.layer_norm(x, g, b);
                let y = t.square(y);
                t.mean_all(y)
            },
            array![[1.5, 0.5, -1.0]],
        );
    }

    #[test]
    fn add_row_broadcast_gradient() {
        check(
            |t, r| {
                let x = t.input(sample());
                let y = t.add_row(x, r);
                let y = t.square(y);
                t.mean_all(y)
            },
            array![[0.2, -0.4, 1.0]],
        );
    }

    #[test]
    fn shared_param_reads_accumulate() {
        let mut t = Tape::new();
        let x = array![[2.0]];
        let a = t.param(3, &x);
        let b = t.param(3, &x);
        assert_eq!(a, b);
        let y = t.mul(a, b);
        let g = t.backward(y);
        assert_eq!(g.len(), 1);
        assert_eq!(g[0].0, 3);
        assert!((g[0].1[[0, 0]] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn gelu_matches_the_tanh_formula() {
        for x in [-30.0, -3.0, -0.5, 0.0, 0.7, 2.0, 40.0] {
            let reference = 0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh());
            assert!((gelu(x) - reference).abs() < 1e-14, "{x}");
        }
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
    }
}
