//! Layer primitives with forward and backward passes.
//!
//! Everything is generic over the float type: production inference and
//! training run in f32, while gradient checking instantiates the same code
//! at f64 where central finite differences are meaningful.

use ndarray::{s, Array1, Array2, Array3, Axis, NdFloat};

/// One layer of the network. Dense and Conv1d carry parameters; the rest
/// are pure shape or activation transforms.
#[derive(Debug, Clone)]
pub(crate) enum Layer<F> {
    /// `(B, T, C)` -> `(B, T*C)`, time-major.
    Flatten,
    Relu,
    /// `(B, T, C)` -> `(B, C)`, mean over time.
    GlobalAvgPool,
    Dense {
        w: Array2<F>, // (in, out)
        b: Array1<F>,
    },
    /// Valid (unpadded) temporal convolution, stride 1, channels last.
    /// Weights are stored `(kernel * in_ch, out_ch)` for matrix multiply.
    Conv1d {
        w: Array2<F>,
        b: Array1<F>,
        kernel: usize,
        in_ch: usize,
        out_ch: usize,
    },
}

/// Activations flowing between layers.
#[derive(Debug, Clone)]
pub(crate) enum Act<F> {
    Mat(Array2<F>),
    Seq(Array3<F>),
}

impl<F: NdFloat> Act<F> {
    pub(crate) fn mat(self) -> Array2<F> {
        match self {
            Act::Mat(m) => m,
            Act::Seq(_) => panic!("expected matrix activation"),
        }
    }
}

/// Gradient of one parametered layer, shaped like its parameters.
#[derive(Debug, Clone)]
pub(crate) struct ParamGrad<F> {
    pub w: Array2<F>,
    pub b: Array1<F>,
}

/// Unfolds `(B, T, C)` into the `(B*T_out, kernel*C)` patch matrix of a
/// valid convolution.
fn im2col<F: NdFloat>(x: &Array3<F>, kernel: usize) -> Array2<F> {
    let (batch, t, c) = x.dim();
    let t_out = t - kernel + 1;
    let mut cols = Array2::zeros((batch * t_out, kernel * c));
    for b in 0..batch {
        for to in 0..t_out {
            let patch = x.slice(s![b, to..to + kernel, ..]);
            let mut row = cols.row_mut(b * t_out + to);
            let dst = row.as_slice_mut().expect("standard layout");
            if let Some(src) = patch.to_slice() {
                dst.copy_from_slice(src);
            } else {
                for (k, &v) in patch.iter().enumerate() {
                    dst[k] = v;
                }
            }
        }
    }
    cols
}

impl<F: NdFloat> Layer<F> {
    pub(crate) fn forward(&self, input: &Act<F>) -> Act<F> {
        match (self, input) {
            (Layer::Flatten, Act::Seq(x)) => {
                let (b, t, c) = x.dim();
                let flat = x
                    .to_owned()
                    .into_shape_with_order((b, t * c))
                    .expect("contiguous flatten");
                Act::Mat(flat)
            }
            (Layer::Relu, Act::Mat(x)) => Act::Mat(x.mapv(|v| v.max(F::zero()))),
            (Layer::Relu, Act::Seq(x)) => Act::Seq(x.mapv(|v| v.max(F::zero()))),
            (Layer::GlobalAvgPool, Act::Seq(x)) => {
                let t = F::from(x.dim().1).unwrap();
                Act::Mat(x.sum_axis(Axis(1)) / t)
            }
            (Layer::Dense { w, b }, Act::Mat(x)) => Act::Mat(x.dot(w) + b),
            (Layer::Conv1d { w, b, kernel, out_ch, .. }, Act::Seq(x)) => {
                let (batch, t, _) = x.dim();
                let t_out = t - kernel + 1;
                let cols = im2col(x, *kernel);
                let y = cols.dot(w) + b;
                Act::Seq(y.into_shape_with_order((batch, t_out, *out_ch)).expect("conv shape"))
            }
            _ => panic!("layer/activation kind mismatch"),
        }
    }

    /// Given the cached layer input and the gradient at the output, returns
    /// the gradient at the input and, for parametered layers, the parameter
    /// gradients.
    pub(crate) fn backward(&self, input: &Act<F>, grad_out: Act<F>) -> (Act<F>, Option<ParamGrad<F>>) {
        match (self, input, grad_out) {
            (Layer::Flatten, Act::Seq(x), Act::Mat(g)) => {
                let (b, t, c) = x.dim();
                let back = g.into_shape_with_order((b, t, c)).expect("contiguous unflatten");
                (Act::Seq(back), None)
            }
            (Layer::Relu, Act::Mat(x), Act::Mat(mut g)) => {
                g.zip_mut_with(x, |gv, &xv| {
                    if xv <= F::zero() {
                        *gv = F::zero();
                    }
                });
                (Act::Mat(g), None)
            }
            (Layer::Relu, Act::Seq(x), Act::Seq(mut g)) => {
                g.zip_mut_with(x, |gv, &xv| {
                    if xv <= F::zero() {
                        *gv = F::zero();
                    }
                });
                (Act::Seq(g), None)
            }
            (Layer::GlobalAvgPool, Act::Seq(x), Act::Mat(g)) => {
                let (b, t, c) = x.dim();
                let scale = F::one() / F::from(t).unwrap();
                let mut dx = Array3::zeros((b, t, c));
                for bi in 0..b {
                    for ti in 0..t {
                        for ci in 0..c {
                            dx[[bi, ti, ci]] = g[[bi, ci]] * scale;
                        }
                    }
                }
                (Act::Seq(dx), None)
            }
            (Layer::Dense { w, .. }, Act::Mat(x), Act::Mat(g)) => {
                let gw = x.t().dot(&g);
                let gb = g.sum_axis(Axis(0));
                let dx = g.dot(&w.t());
                (Act::Mat(dx), Some(ParamGrad { w: gw, b: gb }))
            }
            (Layer::Conv1d { w, kernel, in_ch, out_ch, .. }, Act::Seq(x), Act::Seq(g)) => {
                let (batch, t, _) = x.dim();
                let t_out = t - kernel + 1;
                let cols = im2col(x, *kernel);
                let gf = g
                    .into_shape_with_order((batch * t_out, *out_ch))
                    .expect("conv grad shape");
                let gw = cols.t().dot(&gf);
                let gb = gf.sum_axis(Axis(0));
                let dcols = gf.dot(&w.t());
                let mut dx = Array3::zeros((batch, t, *in_ch));
                for b in 0..batch {
                    for to in 0..t_out {
                        let row = dcols.row(b * t_out + to);
                        for dt in 0..*kernel {
                            for c in 0..*in_ch {
                                dx[[b, to + dt, c]] += row[dt * in_ch + c];
                            }
                        }
                    }
                }
                (Act::Seq(dx), Some(ParamGrad { w: gw, b: gb }))
            }
            _ => panic!("layer/activation kind mismatch in backward"),
        }
    }
}

/// In-place numerically stable softmax over each row.
pub(crate) fn softmax_rows<F: NdFloat>(logits: &mut Array2<F>) {
    for mut row in logits.rows_mut() {
        let max = row.iter().copied().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}
