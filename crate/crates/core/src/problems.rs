//! Seeded problem generators: the 2-D toy landscapes, sparse PCA and real-valued
//! phase retrieval. Every instance is a pure function of its sizes and seed.

use ndarray::{array, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::fbe::fbe_eval;
use crate::linalg::{norm, norm_inf, LinearOperator, Vector};
use crate::oracles::{Composite, SmoothCall, SmoothOracle};
use crate::prox::ProxSpec;
use crate::subsolvers::lanczos_min_eig;

pub const DEFAULT_SPARSE_PCA_KAPPA: f64 = 1e-2;
pub const DEFAULT_SPARSE_PCA_DENSITY: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyVariant {
    /// `−x² − y² + δ_[−1,1]²`
    QuadraticBox,
    /// `−x² − y² + |x| + δ_[−1,1]²`
    L1Box,
}

impl std::str::FromStr for ToyVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadratic_box" => Ok(Self::QuadraticBox),
            "l1_box" => Ok(Self::L1Box),
            other => Err(Error::InvalidConfig(format!(
                "unknown toy variant `{other}`"
            ))),
        }
    }
}

/// Problem family and sizes, without the seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemConfig {
    Toy { variant: ToyVariant },
    SparsePca { n: usize, kappa: f64, density: f64 },
    PhaseRetrieval { n: usize, m: usize },
}

/// JSON descriptor from which an instance can be regenerated bit for bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemDescriptor {
    #[serde(flatten)]
    pub config: ProblemConfig,
    pub seed: u64,
}

impl ProblemDescriptor {
    pub fn build(&self) -> Result<ProblemInstance> {
        match &self.config {
            ProblemConfig::Toy { variant } => toy_box(*variant),
            ProblemConfig::SparsePca { n, kappa, density } => {
                sparse_pca(*n, *kappa, *density, self.seed)
            }
            ProblemConfig::PhaseRetrieval { n, m } => phase_retrieval(*n, *m, self.seed),
        }
    }
}

/// Points of interest with known status.
#[derive(Clone, Debug, Default)]
pub struct Reference {
    pub minimizers: Vec<Vector>,
    pub saddles: Vec<Vector>,
    pub maximizers: Vec<Vector>,
    /// Global optimal value when known.
    pub phi_star: Option<f64>,
}

pub struct ProblemInstance {
    pub name: String,
    pub descriptor: ProblemDescriptor,
    pub smooth: Box<dyn SmoothOracle + Send + Sync>,
    pub nonsmooth: ProxSpec,
    pub reference: Option<Reference>,
}

impl ProblemInstance {
    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn composite(&self) -> Composite<'_> {
        Composite::new(self.smooth.as_ref(), &self.nonsmooth)
    }

    pub fn phi(&self, x: &Vector) -> f64 {
        self.composite().phi(x)
    }

    /// Every reference point must be a fixed point of the forward-backward map.
    pub fn verify_references(&self, gamma: f64) -> Result<()> {
        let Some(reference) = &self.reference else {
            return Ok(());
        };
        let p = self.composite();
        let points = reference
            .minimizers
            .iter()
            .chain(&reference.saddles)
            .chain(&reference.maximizers);
        for x in points {
            let s = fbe_eval(x, gamma, &p)?;
            if norm_inf(&s.r) > 1e-12 {
                return Err(Error::InvalidConfig(format!(
                    "reference point {x} of {} is not critical",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

/// `f(x) = −‖x‖²` in two dimensions.
#[derive(Clone, Copy, Debug)]
pub struct NegativeSquare;

impl SmoothOracle for NegativeSquare {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &Vector) -> f64 {
        -x.dot(x)
    }

    fn grad(&self, x: &Vector) -> Vector {
        x * -2.0
    }

    fn hvp(&self, _x: &Vector, v: &Vector) -> Vector {
        v * -2.0
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(2.0)
    }
}

pub fn toy_box(variant: ToyVariant) -> Result<ProblemInstance> {
    let lo = array![-1.0, -1.0];
    let hi = array![1.0, 1.0];
    let corners = vec![
        array![1.0, 1.0],
        array![1.0, -1.0],
        array![-1.0, 1.0],
        array![-1.0, -1.0],
    ];
    let (name, nonsmooth, reference) = match variant {
        ToyVariant::QuadraticBox => (
            "toy_quadratic_box",
            ProxSpec::boxed(lo, hi)?,
            Reference {
                minimizers: corners,
                saddles: vec![
                    array![1.0, 0.0],
                    array![-1.0, 0.0],
                    array![0.0, 1.0],
                    array![0.0, -1.0],
                ],
                maximizers: vec![array![0.0, 0.0]],
                phi_star: Some(-2.0),
            },
        ),
        ToyVariant::L1Box => {
            let mut minimizers = corners;
            minimizers.push(array![0.0, 1.0]);
            minimizers.push(array![0.0, -1.0]);
            (
                "toy_l1_box",
                ProxSpec::l1_box(array![1.0, 0.0], lo, hi)?,
                Reference {
                    minimizers,
                    saddles: vec![array![0.0, 0.0], array![1.0, 0.0], array![-1.0, 0.0]],
                    maximizers: vec![array![0.5, 0.0], array![-0.5, 0.0]],
                    phi_star: Some(-1.0),
                },
            )
        }
    };
    let instance = ProblemInstance {
        name: name.to_string(),
        descriptor: ProblemDescriptor {
            config: ProblemConfig::Toy { variant },
            seed: 0,
        },
        smooth: Box::new(NegativeSquare),
        nonsmooth,
        reference: Some(reference),
    };
    instance.verify_references(0.25)?;
    Ok(instance)
}

/// `f(x) = −½‖Ax‖²` with a sparse data matrix, so that `∇²f = −AᵀA`.
pub struct SparsePcaSmooth {
    a: CsMat<f64>,
    at: CsMat<f64>,
    lambda_max: f64,
}

impl SparsePcaSmooth {
    fn apply_sigma(&self, v: &Vector) -> Vector {
        let av: Vector = &self.a * v;
        &self.at * &av
    }
}

struct SigmaOp<'a>(&'a SparsePcaSmooth);

impl LinearOperator for SigmaOp<'_> {
    fn dim(&self) -> usize {
        self.0.a.cols()
    }

    fn apply(&self, v: &Vector) -> Vector {
        -self.0.apply_sigma(v)
    }
}

impl SmoothOracle for SparsePcaSmooth {
    fn dim(&self) -> usize {
        self.a.cols()
    }

    fn eval(&self, x: &Vector) -> f64 {
        let ax: Vector = &self.a * x;
        -0.5 * ax.dot(&ax)
    }

    fn grad(&self, x: &Vector) -> Vector {
        -self.apply_sigma(x)
    }

    fn hvp(&self, _x: &Vector, v: &Vector) -> Vector {
        -self.apply_sigma(v)
    }

    fn lipschitz_hint(&self) -> Option<f64> {
        Some(self.lambda_max)
    }

    fn mvp_cost(&self, kind: SmoothCall) -> u64 {
        match kind {
            SmoothCall::Eval => 1,
            SmoothCall::Grad | SmoothCall::Hvp => 2,
        }
    }
}

/// The `20n × n` data matrix of a sparse PCA instance.
pub fn sparse_pca_data(n: usize, density: f64, seed: u64) -> CsMat<f64> {
    let rows = 20 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tri = TriMat::new((rows, n));
    for i in 0..rows {
        for j in 0..n {
            if rng.gen::<f64>() < density {
                let v: f64 = rng.sample(StandardNormal);
                tri.add_triplet(i, j, v);
            }
        }
    }
    tri.to_csr()
}

/// Sparse PCA: `−½xᵀΣx + κ‖x‖₁ + δ_{‖x‖≤1}` with `Σ = AᵀA`, `A ∈ R^{20n×n}`
/// having iid Bernoulli(`density`) support and standard-normal nonzeros.
pub fn sparse_pca(n: usize, kappa: f64, density: f64, seed: u64) -> Result<ProblemInstance> {
    if n < 2 {
        return Err(Error::InvalidConfig("sparse PCA needs n >= 2".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidConfig("density must lie in (0, 1]".into()));
    }
    let a = sparse_pca_data(n, density, seed);
    let at: CsMat<f64> = a.transpose_view().to_csr();
    let mut smooth = SparsePcaSmooth {
        a,
        at,
        lambda_max: 0.0,
    };
    // Largest eigenvalue of Σ via Lanczos on −Σ.
    let top = lanczos_min_eig(&SigmaOp(&smooth), 100, 1e-12, seed ^ 0x5eed);
    smooth.lambda_max = (-top.lambda_min).max(1e-12);
    Ok(ProblemInstance {
        name: format!("sparse_pca_n{n}"),
        descriptor: ProblemDescriptor {
            config: ProblemConfig::SparsePca { n, kappa, density },
            seed,
        },
        smooth: Box::new(smooth),
        nonsmooth: ProxSpec::l1_ball(kappa, 1.0)?,
        reference: None,
    })
}

/// `f(x) = 1/(2m) Σᵢ (yᵢ² − (aᵢᵀx)²)²` with Gaussian rows `aᵢ`.
pub struct PhaseRetrievalSmooth {
    a: Array2<f64>,
    y_sq: Vector,
}

impl PhaseRetrievalSmooth {
    fn m(&self) -> f64 {
        self.a.nrows() as f64
    }
}

impl SmoothOracle for PhaseRetrievalSmooth {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn eval(&self, x: &Vector) -> f64 {
        let ax = self.a.dot(x);
        let s: f64 = ax
            .iter()
            .zip(&self.y_sq)
            .map(|(v, y2)| (y2 - v * v).powi(2))
            .sum();
        s / (2.0 * self.m())
    }

    fn grad(&self, x: &Vector) -> Vector {
        let ax = self.a.dot(x);
        let w = Vector::from_iter(ax.iter().zip(&self.y_sq).map(|(v, y2)| (v * v - y2) * v));
        self.a.t().dot(&w) * (2.0 / self.m())
    }

    fn hvp(&self, x: &Vector, v: &Vector) -> Vector {
        let ax = self.a.dot(x);
        let av = self.a.dot(v);
        let w = Vector::from_iter(
            ax.iter()
                .zip(&self.y_sq)
                .zip(&av)
                .map(|((u, y2), t)| (3.0 * u * u - y2) * t),
        );
        self.a.t().dot(&w) * (2.0 / self.m())
    }

    fn mvp_cost(&self, kind: SmoothCall) -> u64 {
        match kind {
            SmoothCall::Eval => 1,
            SmoothCall::Grad => 2,
            SmoothCall::Hvp => 3,
        }
    }
}

/// Real-valued phase retrieval on the unit ball with noiseless measurements of a
/// random unit-norm signal. Returns the instance and the planted signal.
pub fn phase_retrieval_with_signal(
    n: usize,
    m: usize,
    seed: u64,
) -> Result<(ProblemInstance, Vector)> {
    if n < 2 || m < 1 {
        return Err(Error::InvalidConfig(
            "phase retrieval needs n >= 2, m >= 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = Array2::from_shape_simple_fn((m, n), || rng.sample(StandardNormal));
    let mut xs: Vector = (0..n)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    xs /= norm(&xs);
    let y_sq = a.dot(&xs).mapv(|v| v * v);
    let instance = ProblemInstance {
        name: format!("phase_retrieval_n{n}_m{m}"),
        descriptor: ProblemDescriptor {
            config: ProblemConfig::PhaseRetrieval { n, m },
            seed,
        },
        smooth: Box::new(PhaseRetrievalSmooth { a, y_sq }),
        nonsmooth: ProxSpec::ball(1.0)?,
        reference: Some(Reference {
            minimizers: vec![xs.clone(), -&xs],
            phi_star: Some(0.0),
            ..Reference::default()
        }),
    };
    instance.verify_references(0.01)?;
    Ok((instance, xs))
}

pub fn phase_retrieval(n: usize, m: usize, seed: u64) -> Result<ProblemInstance> {
    phase_retrieval_with_signal(n, m, seed).map(|(p, _)| p)
}
