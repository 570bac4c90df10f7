//! Graph-based global reasoning unit with a 1x1 classifier head.
//!
//! Grid features `X` (L locations by K channels) are projected onto `N`
//! latent nodes, mixed by one graph convolution over a learned adjacency,
//! and projected back with the transpose of the same projection:
//!
//! ```text
//! V = B X               (N x K)
//! Z = ((I - A) V) W     (N x K)
//! Y = B^T Z             (L x K)
//! out = X + Y
//! ```
//!
//! The classifier maps every location of `out` to C class scores. The CAM
//! for class `c` is the rectified score map; the image score is its
//! spatial mean.

mod linalg;
mod loss;
mod train;

pub use linalg::Mat;
pub use loss::{mlsm_loss, sigmoid, softplus};
pub use train::{loss_and_grads, train_toy, LabeledGrid, TrainConfig, TrainOutcome};

use rand::Rng;

use crate::error::{Error, Result};
use crate::maps::AttentionStack;

/// `L x K` grid features with their spatial layout (`L = H * W`).
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    features: Mat,
}

impl FeatureGrid {
    pub fn new(height: usize, width: usize, features: Mat) -> Result<Self> {
        if features.rows() != height * width {
            return Err(Error::shape(
                "feature grid",
                format!("{} locations", height * width),
                format!("{} rows", features.rows()),
            ));
        }
        if !features.is_finite() {
            return Err(Error::Parameter("feature grid contains non-finite values".into()));
        }
        Ok(FeatureGrid {
            height,
            width,
            features,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn locations(&self) -> usize {
        self.features.rows()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn features(&self) -> &Mat {
        &self.features
    }

    pub(crate) fn with_features(&self, features: Mat) -> FeatureGrid {
        FeatureGrid {
            height: self.height,
            width: self.width,
            features,
        }
    }
}

/// Parameters of the reasoning unit and classifier head. The reverse
/// projection is always the transpose of `projection` and is never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct GrParams {
    /// `B`, N x L.
    pub projection: Mat,
    /// `A_g`, N x N.
    pub adjacency: Mat,
    /// `W_g`, K x K.
    pub state_update: Mat,
    /// C x K.
    pub classifier: Mat,
    /// C.
    pub bias: Vec<f64>,
}

impl GrParams {
    pub fn new(
        projection: Mat,
        adjacency: Mat,
        state_update: Mat,
        classifier: Mat,
        bias: Vec<f64>,
    ) -> Result<Self> {
        let p = GrParams {
            projection,
            adjacency,
            state_update,
            classifier,
            bias,
        };
        p.validate()?;
        Ok(p)
    }

    /// `B`, `W_g` and the classifier uniform in `+-1/sqrt(fan_in)`; adjacency
    /// and bias start at zero.
    pub fn init(
        nodes: usize,
        locations: usize,
        dim: usize,
        classes: usize,
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if nodes == 0 || locations == 0 || dim == 0 || classes == 0 {
            return Err(Error::Parameter(format!(
                "reasoning unit dimensions must be nonzero (N={nodes}, L={locations}, K={dim}, C={classes})"
            )));
        }
        let projection = Mat::uniform(nodes, locations, 1.0 / (locations as f64).sqrt(), rng);
        let state_update = Mat::uniform(dim, dim, 1.0 / (dim as f64).sqrt(), rng);
        let classifier = Mat::uniform(classes, dim, 1.0 / (dim as f64).sqrt(), rng);
        GrParams::new(
            projection,
            Mat::zeros(nodes, nodes),
            state_update,
            classifier,
            vec![0.0; classes],
        )
    }

    pub fn validate(&self) -> Result<()> {
        let (n, l) = self.projection.shape();
        let k = self.state_update.rows();
        let c = self.classifier.rows();
        let checks = [
            ("adjacency", (n, n), self.adjacency.shape()),
            ("state update", (k, k), self.state_update.shape()),
            ("classifier", (c, k), self.classifier.shape()),
            ("bias", (c, 1), (self.bias.len(), 1)),
        ];
        for (name, expected, actual) in checks {
            if expected != actual {
                return Err(Error::shape(
                    "reasoning unit parameters",
                    format!("{name} {expected:?}"),
                    format!("{actual:?}"),
                ));
            }
        }
        if n == 0 || l == 0 || k == 0 || c == 0 {
            return Err(Error::Parameter("reasoning unit dimensions must be nonzero".into()));
        }
        let finite = self.projection.is_finite()
            && self.adjacency.is_finite()
            && self.state_update.is_finite()
            && self.classifier.is_finite()
            && self.bias.iter().all(|b| b.is_finite());
        if !finite {
            return Err(Error::Parameter("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.projection.rows()
    }

    pub fn location_count(&self) -> usize {
        self.projection.cols()
    }

    pub fn feature_dim(&self) -> usize {
        self.state_update.rows()
    }

    pub fn class_count(&self) -> usize {
        self.classifier.rows()
    }

    fn check_input(&self, x: &FeatureGrid) -> Result<()> {
        if x.locations() != self.location_count() || x.dim() != self.feature_dim() {
            return Err(Error::shape(
                "reasoning unit input",
                format!("L={} K={}", self.location_count(), self.feature_dim()),
                format!("L={} K={}", x.locations(), x.dim()),
            ));
        }
        Ok(())
    }
}

/// Intermediates kept for the backward pass.
struct Trace {
    v: Mat,
    /// `(I - A) V`
    mixed: Mat,
    z: Mat,
}

fn forward_trace(params: &GrParams, x: &FeatureGrid) -> (Mat, Trace) {
    let v = params.projection.matmul(x.features());
    let mixed = v.sub(&params.adjacency.matmul(&v));
    let z = mixed.matmul(&params.state_update);
    let y = params.projection.t_matmul(&z);
    (x.features().add(&y), Trace { v, mixed, z })
}

/// Residual output `X + B^T ((I - A) B X) W`.
pub fn gr_forward(params: &GrParams, x: &FeatureGrid) -> Result<FeatureGrid> {
    params.check_input(x)?;
    Ok(x.with_features(forward_trace(params, x).0))
}

/// Gradients of a scalar objective with respect to the unit's parameters
/// and its input.
#[derive(Clone, Debug, PartialEq)]
pub struct GrGrads {
    pub projection: Mat,
    pub adjacency: Mat,
    pub state_update: Mat,
    pub input: Mat,
}

fn backward_from_trace(params: &GrParams, x: &FeatureGrid, trace: &Trace, upstream: &Mat) -> GrGrads {
    let b = &params.projection;
    // Y = B^T Z
    let mut d_projection = trace.z.matmul_t(upstream);
    let d_z = b.matmul(upstream);
    // Z = M W
    let d_state_update = trace.mixed.t_matmul(&d_z);
    let d_mixed = d_z.matmul_t(&params.state_update);
    // M = V - A V
    let d_adjacency = d_mixed.matmul_t(&trace.v).scale(-1.0);
    let d_v = d_mixed.sub(&params.adjacency.t_matmul(&d_mixed));
    // V = B X
    d_projection = d_projection.add(&d_v.matmul_t(x.features()));
    let d_input = upstream.add(&b.t_matmul(&d_v));
    GrGrads {
        projection: d_projection,
        adjacency: d_adjacency,
        state_update: d_state_update,
        input: d_input,
    }
}

/// Backpropagates `upstream = dJ/d(out)` through [`gr_forward`]. The
/// projection gradient sums its contributions from both the forward and
/// the reverse projection.
pub fn gr_backward(params: &GrParams, x: &FeatureGrid, upstream: &Mat) -> Result<GrGrads> {
    params.check_input(x)?;
    if upstream.shape() != x.features().shape() {
        return Err(Error::shape(
            "reasoning unit upstream gradient",
            format!("{:?}", x.features().shape()),
            format!("{:?}", upstream.shape()),
        ));
    }
    let (_, trace) = forward_trace(params, x);
    Ok(backward_from_trace(params, x, &trace, upstream))
}

/// Output of the classifier head.
#[derive(Clone, Debug)]
pub struct Classification {
    /// Image-level score per class (spatial mean of pixel scores).
    pub scores: Vec<f64>,
    /// L x C per-location scores before rectification.
    pub pixel_scores: Mat,
    /// Rectified per-class score maps, H x W each.
    pub cam: AttentionStack,
}

struct HeadTrace {
    gr: Trace,
    out: Mat,
}

fn classify_trace(params: &GrParams, x: &FeatureGrid) -> Result<(Classification, HeadTrace)> {
    params.check_input(x)?;
    let (out, gr) = forward_trace(params, x);
    let classes = params.class_count();
    let locations = x.locations();
    let mut pixel_scores = out.matmul_t(&params.classifier);
    for l in 0..locations {
        for c in 0..classes {
            pixel_scores[(l, c)] += params.bias[c];
        }
    }
    let mut scores = vec![0.0; classes];
    for l in 0..locations {
        for (c, s) in scores.iter_mut().enumerate() {
            *s += pixel_scores[(l, c)];
        }
    }
    for s in &mut scores {
        *s /= locations as f64;
    }
    let mut cam = Vec::with_capacity(classes * locations);
    for c in 0..classes {
        cam.extend((0..locations).map(|l| pixel_scores[(l, c)].max(0.0) as f32));
    }
    let cam = AttentionStack::new(classes, x.height(), x.width(), cam)?;
    Ok((
        Classification {
            scores,
            pixel_scores,
            cam,
        },
        HeadTrace { gr, out },
    ))
}

pub fn classify(params: &GrParams, x: &FeatureGrid) -> Result<Classification> {
    classify_trace(params, x).map(|(c, _)| c)
}

/// Gradients of a scalar objective with respect to every parameter tensor
/// and the input, shaped like [`GrParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGrads {
    pub projection: Mat,
    pub adjacency: Mat,
    pub state_update: Mat,
    pub classifier: Mat,
    pub bias: Vec<f64>,
    pub input: Mat,
}

impl ParamGrads {
    pub fn zeros_like(params: &GrParams, x_shape: (usize, usize)) -> Self {
        ParamGrads {
            projection: Mat::zeros(params.projection.rows(), params.projection.cols()),
            adjacency: Mat::zeros(params.adjacency.rows(), params.adjacency.cols()),
            state_update: Mat::zeros(params.state_update.rows(), params.state_update.cols()),
            classifier: Mat::zeros(params.classifier.rows(), params.classifier.cols()),
            bias: vec![0.0; params.bias.len()],
            input: Mat::zeros(x_shape.0, x_shape.1),
        }
    }

    /// Squared L2 norm over the parameter tensors (input gradient excluded).
    pub fn param_sum_sq(&self) -> f64 {
        self.projection.sum_sq()
            + self.adjacency.sum_sq()
            + self.state_update.sum_sq()
            + self.classifier.sum_sq()
            + self.bias.iter().map(|b| b * b).sum::<f64>()
    }
}

/// Backpropagates `d_scores = dJ/d(scores)` through [`classify`].
pub fn classify_backward(params: &GrParams, x: &FeatureGrid, d_scores: &[f64]) -> Result<ParamGrads> {
    if d_scores.len() != params.class_count() {
        return Err(Error::shape(
            "score gradient",
            params.class_count(),
            d_scores.len(),
        ));
    }
    let (_, trace) = classify_trace(params, x)?;
    let locations = x.locations() as f64;
    // Mean pooling: every location receives d_scores / L.
    let d_pixel = Mat::from_fn(x.locations(), params.class_count(), |_, c| {
        d_scores[c] / locations
    });
    let classifier = d_pixel.t_matmul(&trace.out);
    let bias = d_scores.to_vec();
    let d_out = d_pixel.matmul(&params.classifier);
    let gr = backward_from_trace(params, x, &trace.gr, &d_out);
    Ok(ParamGrads {
        projection: gr.projection,
        adjacency: gr.adjacency,
        state_update: gr.state_update,
        classifier,
        bias,
        input: gr.input,
    })
}
