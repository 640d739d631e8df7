//! Benchmark problems and the stochastic function-value oracle.
//!
//! A problem is `n` local costs `f_1 .. f_n` on `R^p` with the global cost
//! `f = (1/n) sum_i f_i`, plus every constant the measurement side needs to
//! be exact rather than estimated: the smoothness constant `lf`, the
//! gradient-dominance constant `pl_nu` (when `f` has one), the minimum value
//! `f_star` (when known), and the heterogeneity constants `sigma0_tilde`,
//! `sigma2` bounding `|grad f_i - grad f|^2 <= sigma0_tilde^2 |grad f|^2 +
//! sigma2^2`.
//!
//! Agents never see `f_i` directly. They sample the oracle
//!
//! ```text
//! F_i(x, xi) = (1 + xi.scale) f_i(x) + xi.shift . x
//! ```
//!
//! with `xi.scale ~ N(0, sigma0^2)` and `xi.shift ~ N(0, (sigma1^2/p) I_p)`,
//! one [`XiSample`] per agent per iteration, reused at both points of the
//! two-point estimator. This makes the oracle-noise bound
//! `E |grad_x F_i - grad f_i|^2 = sigma0^2 |grad f_i|^2 + sigma1^2` hold with
//! the configured constants exactly, for any base problem.
//!
//! Exact gradients and minima in this module are a measurement side channel:
//! the algorithms only ever call [`Problem::oracle`].

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng::stream_rng;

/// Stream id reserved for synthetic data generation (logistic features and
/// labels), separate from all run streams.
const DATA_STREAM: u64 = 0x4441_5441;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    QuadraticPl,
    SinPl,
    HeterogeneousQuadratic,
    LinearProbe,
    LogisticSynth,
}

/// One realization of the oracle noise, drawn once per (agent, iteration)
/// and reused at both evaluation points. Draw order is part of the stream
/// contract: first `scale`, then the `p` components of `shift`.
#[derive(Debug, Clone)]
pub struct XiSample {
    pub scale: f64,
    pub shift: Array1<f64>,
}

#[derive(Debug, Clone)]
enum Hetero {
    None,
    /// Per-agent additive terms `b_i . x`, zero mean across agents, all of
    /// norm sigma2.
    Offsets(Array2<f64>),
    /// Per-agent factors `c_i`, mean one across agents, max |c_i - 1| =
    /// sigma0_tilde.
    Scales(Array1<f64>),
}

#[derive(Debug, Clone)]
enum Form {
    /// f_i(x) = c_i * (1/2) x . diag(a) x + b_i . x
    Quadratic { a_diag: Array1<f64>, hetero: Hetero },
    /// f_i(x) = sum_j (x_j^2 + 3 sin^2 x_j), identical across agents.
    SinSum,
    /// f_i(x) = slope . x, identical across agents. Not bounded below unless
    /// the slope is zero; exists for estimator calibration and zero-drive
    /// consensus runs.
    Linear { slope: Array1<f64> },
    /// Per-agent ridge-regularized logistic regression on synthetic data.
    Logistic {
        features: Vec<Array2<f64>>,
        labels: Vec<Array1<f64>>,
        ridge: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Problem {
    kind: ProblemKind,
    n: usize,
    p: usize,
    form: Form,
    sigma0: f64,
    sigma1: f64,
    sigma0_tilde: f64,
    sigma2: f64,
    lf: f64,
    pl_nu: Option<f64>,
    f_star: Option<f64>,
}

impl Problem {
    /// Diagonal quadratic `f_i(x) = (1/2) x . diag(a) x` with eigenvalues
    /// spaced evenly over `[1, condition]`, identical across agents. Minimum
    /// 0 at the origin, `pl_nu = 1`, `lf = condition`.
    pub fn quadratic_pl(n: usize, p: usize, condition: f64) -> Result<Problem> {
        let a_diag = quadratic_diagonal(p, condition)?;
        check_agents(n)?;
        Ok(Problem {
            kind: ProblemKind::QuadraticPl,
            n,
            p,
            lf: condition,
            pl_nu: Some(1.0),
            f_star: Some(0.0),
            form: Form::Quadratic {
                a_diag,
                hetero: Hetero::None,
            },
            sigma0: 0.0,
            sigma1: 0.0,
            sigma0_tilde: 0.0,
            sigma2: 0.0,
        })
    }

    /// The quadratic above with exact gradient heterogeneity. Exactly one of
    /// the two mechanisms may be active:
    ///
    /// * `sigma2 > 0`: additive terms `b_i . x` with `sum_i b_i = 0` and
    ///   `|b_i| = sigma2`, so `|grad f_i - grad f| = sigma2` everywhere.
    ///   Realized as sigma2 * (cos phi_i, sin phi_i, 0, ...) on the first two
    ///   coordinates; at `p = 1` as alternating +-sigma2 (even `n` only).
    /// * `sigma0_tilde in (0, 1)`: factors `c_i = 1 + sigma0_tilde cos phi_i`
    ///   (mean one, max |c_i - 1| = sigma0_tilde), so
    ///   `|grad f_i - grad f| = |c_i - 1| |grad f|`.
    ///
    /// Mixing both would add a cross term and the declared constants would
    /// only bound the probe up to it, so the combination is rejected.
    pub fn heterogeneous_quadratic(
        n: usize,
        p: usize,
        condition: f64,
        sigma2: f64,
        sigma0_tilde: f64,
    ) -> Result<Problem> {
        let a_diag = quadratic_diagonal(p, condition)?;
        check_agents(n)?;
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::ProblemParameter {
                name: "sigma2",
                value: sigma2,
                reason: "must be finite and nonnegative",
            });
        }
        if !(0.0..1.0).contains(&sigma0_tilde) {
            return Err(Error::ProblemParameter {
                name: "sigma0_tilde",
                value: sigma0_tilde,
                reason: "must lie in [0, 1) so every agent keeps a positive scale",
            });
        }
        if sigma2 > 0.0 && sigma0_tilde > 0.0 {
            return Err(Error::MixedHeterogeneity);
        }
        if n == 1 && (sigma2 > 0.0 || sigma0_tilde > 0.0) {
            return Err(Error::ProblemParameter {
                name: "n",
                value: 1.0,
                reason: "heterogeneity needs at least two agents",
            });
        }

        let hetero = if sigma2 > 0.0 {
            Hetero::Offsets(offset_pattern(n, p, sigma2)?)
        } else if sigma0_tilde > 0.0 {
            Hetero::Scales(scale_pattern(n, sigma0_tilde))
        } else {
            Hetero::None
        };

        let lf = condition * (1.0 + sigma0_tilde);
        Ok(Problem {
            kind: ProblemKind::HeterogeneousQuadratic,
            n,
            p,
            lf,
            pl_nu: Some(1.0),
            f_star: Some(0.0),
            form: Form::Quadratic { a_diag, hetero },
            sigma0: 0.0,
            sigma1: 0.0,
            sigma0_tilde,
            sigma2,
        })
    }

    /// Separable nonconvex cost `f(x) = sum_j (x_j^2 + 3 sin^2 x_j)`,
    /// identical across agents. Gradient-dominated with `pl_nu = 1/32`
    /// (a valid, not tight, constant; see the grid test) and `lf = 8`
    /// (second derivative `2 + 6 cos 2x` peaks at 8). Minimum 0 at the
    /// origin.
    pub fn sin_pl(n: usize, p: usize) -> Result<Problem> {
        check_agents(n)?;
        check_dimension(p)?;
        Ok(Problem {
            kind: ProblemKind::SinPl,
            n,
            p,
            lf: 8.0,
            pl_nu: Some(1.0 / 32.0),
            f_star: Some(0.0),
            form: Form::SinSum,
            sigma0: 0.0,
            sigma1: 0.0,
            sigma0_tilde: 0.0,
            sigma2: 0.0,
        })
    }

    /// `f_i(x) = slope * (1, ..., 1) . x`, identical across agents. With a
    /// zero slope this is the zero cost whose estimator output is exactly
    /// zero, which isolates the consensus dynamics.
    pub fn linear_probe(n: usize, p: usize, slope: f64) -> Result<Problem> {
        check_agents(n)?;
        check_dimension(p)?;
        if !slope.is_finite() {
            return Err(Error::ProblemParameter {
                name: "slope",
                value: slope,
                reason: "must be finite",
            });
        }
        Ok(Problem {
            kind: ProblemKind::LinearProbe,
            n,
            p,
            lf: 0.0,
            pl_nu: None,
            f_star: if slope == 0.0 { Some(0.0) } else { None },
            form: Form::Linear {
                slope: Array1::from_elem(p, slope),
            },
            sigma0: 0.0,
            sigma1: 0.0,
            sigma0_tilde: 0.0,
            sigma2: 0.0,
        })
    }

    /// Ridge-regularized logistic regression on per-agent synthetic data:
    /// `m` feature rows per agent drawn N(0, I_p), labels sampled from a
    /// planted parameter. Strong convexity gives `pl_nu = ridge`; the minimum
    /// is located at construction by a damped Newton solve (measurement side
    /// channel). `sigma2` is a certified bound, not an equality: logistic
    /// gradients saturate at the feature norms and the ridge terms cancel
    /// agent against average.
    pub fn logistic_synth(
        n: usize,
        p: usize,
        samples_per_agent: usize,
        ridge: f64,
        seed: u64,
    ) -> Result<Problem> {
        check_agents(n)?;
        check_dimension(p)?;
        if samples_per_agent == 0 {
            return Err(Error::ProblemParameter {
                name: "samples_per_agent",
                value: 0.0,
                reason: "needs at least one sample",
            });
        }
        if !(ridge > 0.0 && ridge.is_finite()) {
            return Err(Error::ProblemParameter {
                name: "ridge",
                value: ridge,
                reason: "must be positive (strong convexity pins the minimum)",
            });
        }

        let planted = Array1::from_elem(p, 1.0 / (p as f64).sqrt());
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for agent in 0..n {
            let mut rng = stream_rng(seed, DATA_STREAM, agent as u64);
            let mut rows = Array2::<f64>::zeros((samples_per_agent, p));
            for r in 0..samples_per_agent {
                for c in 0..p {
                    rows[[r, c]] = rng.sample::<f64, _>(StandardNormal);
                }
            }
            let mut ys = Array1::<f64>::zeros(samples_per_agent);
            for r in 0..samples_per_agent {
                let margin = rows.row(r).dot(&planted);
                let prob_positive = sigmoid(margin);
                ys[r] = if rng.random::<f64>() < prob_positive {
                    1.0
                } else {
                    -1.0
                };
            }
            features.push(rows);
            labels.push(ys);
        }

        // lf: ridge + max_i |A_i|_F^2 / (4 m); the logistic Hessian is
        // bounded by A^T A / (4 m) and the Frobenius norm bounds the spectral
        // norm.
        let m = samples_per_agent as f64;
        let mut max_frob_sq = 0.0f64;
        let mut max_row_norm = 0.0f64;
        for rows in &features {
            let frob_sq: f64 = rows.iter().map(|v| v * v).sum();
            max_frob_sq = max_frob_sq.max(frob_sq);
            for r in rows.rows() {
                max_row_norm = max_row_norm.max(r.dot(&r).sqrt());
            }
        }
        let lf = ridge + max_frob_sq / (4.0 * m);
        let sigma2 = 2.0 * max_row_norm;

        let form = Form::Logistic {
            features,
            labels,
            ridge,
        };
        let mut problem = Problem {
            kind: ProblemKind::LogisticSynth,
            n,
            p,
            lf,
            pl_nu: Some(ridge),
            f_star: None,
            form,
            sigma0: 0.0,
            sigma1: 0.0,
            sigma0_tilde: 0.0,
            sigma2,
        };
        problem.f_star = Some(problem.newton_minimum()?);
        Ok(problem)
    }

    /// Attach oracle noise. `sigma0` scales multiplicative value noise,
    /// `sigma1` the additive gradient-level noise.
    pub fn with_noise(mut self, sigma0: f64, sigma1: f64) -> Result<Problem> {
        for (name, value) in [("sigma0", sigma0), ("sigma1", sigma1)] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::ProblemParameter {
                    name,
                    value,
                    reason: "must be finite and nonnegative",
                });
            }
        }
        self.sigma0 = sigma0;
        self.sigma1 = sigma1;
        Ok(self)
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn p(&self) -> usize {
        self.p
    }
    /// Smoothness constant of every `f_i` (and hence of `f`).
    pub fn lf(&self) -> f64 {
        self.lf
    }
    /// Gradient-dominance constant of `f`, when it has one.
    pub fn pl_nu(&self) -> Option<f64> {
        self.pl_nu
    }
    /// Global minimum value, when known.
    pub fn f_star(&self) -> Option<f64> {
        self.f_star
    }
    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }
    pub fn sigma1(&self) -> f64 {
        self.sigma1
    }
    pub fn sigma0_tilde(&self) -> f64 {
        self.sigma0_tilde
    }
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    /// Local cost f_i(x). Measurement side channel.
    pub fn local_value(&self, agent: usize, x: ArrayView1<f64>) -> f64 {
        debug_assert!(agent < self.n);
        match &self.form {
            Form::Quadratic { a_diag, hetero } => {
                let q = half_quadratic(a_diag, x);
                match hetero {
                    Hetero::None => q,
                    Hetero::Offsets(b) => q + b.row(agent).dot(&x),
                    Hetero::Scales(c) => c[agent] * q,
                }
            }
            Form::SinSum => x.iter().map(|&v| v * v + 3.0 * v.sin() * v.sin()).sum(),
            Form::Linear { slope } => slope.dot(&x),
            Form::Logistic {
                features,
                labels,
                ridge,
            } => {
                let rows = &features[agent];
                let ys = &labels[agent];
                let m = rows.nrows() as f64;
                let mut loss = 0.0;
                for (row, &y) in rows.rows().into_iter().zip(ys.iter()) {
                    loss += softplus(-y * row.dot(&x));
                }
                loss / m + 0.5 * ridge * x.dot(&x)
            }
        }
    }

    /// Global cost f(x) = (1/n) sum_i f_i(x), evaluated from the stored
    /// aggregate form where one exists.
    pub fn value(&self, x: ArrayView1<f64>) -> f64 {
        match &self.form {
            Form::Quadratic { a_diag, hetero } => {
                let q = half_quadratic(a_diag, x);
                match hetero {
                    Hetero::None => q,
                    // Offsets sum to zero across agents by construction.
                    Hetero::Offsets(b) => {
                        let mean_b = b.mean_axis(ndarray::Axis(0)).expect("n >= 1");
                        q + mean_b.dot(&x)
                    }
                    Hetero::Scales(c) => (c.sum() / self.n as f64) * q,
                }
            }
            Form::SinSum | Form::Linear { .. } => self.local_value(0, x),
            Form::Logistic { .. } => {
                (0..self.n).map(|i| self.local_value(i, x)).sum::<f64>() / self.n as f64
            }
        }
    }

    /// Exact local gradient. Measurement side channel.
    pub fn local_grad(&self, agent: usize, x: ArrayView1<f64>) -> Array1<f64> {
        debug_assert!(agent < self.n);
        match &self.form {
            Form::Quadratic { a_diag, hetero } => {
                let mut g = a_diag * &x;
                match hetero {
                    Hetero::None => g,
                    Hetero::Offsets(b) => {
                        g += &b.row(agent);
                        g
                    }
                    Hetero::Scales(c) => {
                        g *= c[agent];
                        g
                    }
                }
            }
            Form::SinSum => x.mapv(|v| 2.0 * v + 3.0 * (2.0 * v).sin()),
            Form::Linear { slope } => slope.clone(),
            Form::Logistic {
                features,
                labels,
                ridge,
            } => {
                let rows = &features[agent];
                let ys = &labels[agent];
                let m = rows.nrows() as f64;
                let mut g = x.mapv(|v| ridge * v);
                for (row, &y) in rows.rows().into_iter().zip(ys.iter()) {
                    let weight = -y * sigmoid(-y * row.dot(&x)) / m;
                    g.scaled_add(weight, &row);
                }
                g
            }
        }
    }

    /// Exact global gradient.
    pub fn grad(&self, x: ArrayView1<f64>) -> Array1<f64> {
        match &self.form {
            Form::Quadratic { a_diag, hetero } => {
                let mut g = a_diag * &x;
                match hetero {
                    Hetero::None => g,
                    Hetero::Offsets(b) => {
                        let mean_b = b.mean_axis(ndarray::Axis(0)).expect("n >= 1");
                        g += &mean_b;
                        g
                    }
                    Hetero::Scales(c) => {
                        g *= c.sum() / self.n as f64;
                        g
                    }
                }
            }
            Form::SinSum | Form::Linear { .. } => self.local_grad(0, x),
            Form::Logistic { .. } => {
                let mut g = Array1::zeros(self.p);
                for i in 0..self.n {
                    g += &self.local_grad(i, x);
                }
                g / self.n as f64
            }
        }
    }

    /// Draw one oracle noise realization. Consumes `1 + p` normal draws in a
    /// fixed order regardless of the noise levels, so stream layouts do not
    /// depend on sigma.
    pub fn draw_xi<R: Rng + ?Sized>(&self, rng: &mut R) -> XiSample {
        let scale = self.sigma0 * rng.sample::<f64, _>(StandardNormal);
        let per_coord = self.sigma1 / (self.p as f64).sqrt();
        let shift =
            Array1::from_iter((0..self.p).map(|_| per_coord * rng.sample::<f64, _>(StandardNormal)));
        XiSample { scale, shift }
    }

    /// The stochastic oracle F_i(x, xi). This is the only view of the problem
    /// the algorithms get.
    pub fn oracle(&self, agent: usize, x: ArrayView1<f64>, xi: &XiSample) -> f64 {
        (1.0 + xi.scale) * self.local_value(agent, x) + xi.shift.dot(&x)
    }

    /// Gradient of `F_i(., xi)` at fixed noise; used by the moment probes.
    pub fn oracle_grad(&self, agent: usize, x: ArrayView1<f64>, xi: &XiSample) -> Array1<f64> {
        let mut g = self.local_grad(agent, x);
        g *= 1.0 + xi.scale;
        g += &xi.shift;
        g
    }

    /// Damped Newton to the global minimum; only valid for the strongly
    /// convex logistic form.
    fn newton_minimum(&self) -> Result<f64> {
        let mut x = Array1::<f64>::zeros(self.p);
        for _iter in 0..60 {
            let g = self.grad(x.view());
            let gnorm = g.dot(&g).sqrt();
            if gnorm <= 1e-13 * (1.0 + self.value(x.view()).abs()) {
                return Ok(self.value(x.view()));
            }
            let h = self.logistic_hessian(x.view());
            let step = cholesky_solve(&h, &g)?;
            // Backtracking keeps the solve safe far from the minimum.
            let f0 = self.value(x.view());
            let slope = g.dot(&step);
            let mut t = 1.0;
            for _ in 0..40 {
                let candidate = &x - &step.mapv(|v| t * v);
                if self.value(candidate.view()) <= f0 - 0.25 * t * slope {
                    x = candidate;
                    break;
                }
                t *= 0.5;
            }
        }
        let g = self.grad(x.view());
        if g.dot(&g).sqrt() <= 1e-10 {
            Ok(self.value(x.view()))
        } else {
            Err(Error::NonFinite {
                context: "logistic minimum search did not converge",
            })
        }
    }

    fn logistic_hessian(&self, x: ArrayView1<f64>) -> Array2<f64> {
        let Form::Logistic {
            features,
            labels,
            ridge,
        } = &self.form
        else {
            unreachable!("hessian is only used by the logistic solver");
        };
        let mut h = Array2::<f64>::eye(self.p) * *ridge;
        for (rows, ys) in features.iter().zip(labels) {
            let m = rows.nrows() as f64;
            for (row, &y) in rows.rows().into_iter().zip(ys.iter()) {
                let s = sigmoid(-y * row.dot(&x));
                let w = s * (1.0 - s) / (m * self.n as f64);
                for a in 0..self.p {
                    for b in 0..self.p {
                        h[[a, b]] += w * row[a] * row[b];
                    }
                }
            }
        }
        h
    }
}

fn check_agents(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyGraph);
    }
    Ok(())
}

fn check_dimension(p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::ProblemParameter {
            name: "p",
            value: 0.0,
            reason: "dimension must be at least 1",
        });
    }
    Ok(())
}

fn quadratic_diagonal(p: usize, condition: f64) -> Result<Array1<f64>> {
    check_dimension(p)?;
    if !(condition >= 1.0 && condition.is_finite()) {
        return Err(Error::ProblemParameter {
            name: "condition_number",
            value: condition,
            reason: "must be finite and at least 1",
        });
    }
    if p == 1 && condition != 1.0 {
        return Err(Error::ProblemParameter {
            name: "condition_number",
            value: condition,
            reason: "p = 1 leaves no room for a spread of eigenvalues",
        });
    }
    Ok(Array1::from_iter((0..p).map(|j| {
        if p == 1 {
            1.0
        } else {
            1.0 + (condition - 1.0) * j as f64 / (p - 1) as f64
        }
    })))
}

/// Zero-sum offsets of norm sigma2: points on a circle in the first two
/// coordinates, or alternating signs at p = 1.
fn offset_pattern(n: usize, p: usize, sigma2: f64) -> Result<Array2<f64>> {
    let mut b = Array2::<f64>::zeros((n, p));
    if p == 1 {
        if !n.is_multiple_of(2) {
            return Err(Error::OddHeterogeneity { n });
        }
        for i in 0..n {
            b[[i, 0]] = if i % 2 == 0 { sigma2 } else { -sigma2 };
        }
    } else {
        for i in 0..n {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            b[[i, 0]] = sigma2 * phi.cos();
            b[[i, 1]] = sigma2 * phi.sin();
        }
    }
    Ok(b)
}

/// Mean-one factors with max deviation sigma0_tilde, attained at agent 0.
fn scale_pattern(n: usize, sigma0_tilde: f64) -> Array1<f64> {
    Array1::from_iter((0..n).map(|i| {
        let phi = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
        1.0 + sigma0_tilde * phi.cos()
    }))
}

fn half_quadratic(a_diag: &Array1<f64>, x: ArrayView1<f64>) -> f64 {
    0.5 * a_diag
        .iter()
        .zip(x.iter())
        .map(|(&a, &v)| a * v * v)
        .sum::<f64>()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^z) without overflow on either tail.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Solve `h x = rhs` for symmetric positive definite `h` (p x p, p small).
fn cholesky_solve(h: &Array2<f64>, rhs: &Array1<f64>) -> Result<Array1<f64>> {
    let p = h.nrows();
    let mut l = Array2::<f64>::zeros((p, p));
    for i in 0..p {
        for j in 0..=i {
            let mut s = h[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if s <= 0.0 {
                    return Err(Error::NonFinite {
                        context: "Cholesky factorization of a non-positive-definite Hessian",
                    });
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    // Forward then backward substitution.
    let mut y = Array1::<f64>::zeros(p);
    for i in 0..p {
        let mut s = rhs[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(p);
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in (i + 1)..p {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    Ok(x)
}

// =============================================================================
// tests
// =============================================================================
