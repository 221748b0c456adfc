//! Self-checks exposed through the `diag` command: gradient agreement with
//! finite differences, the quadratic rectification identity, the distance
//! triangle monitor, and the communication audit.

use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::algorithms::{fedgps_loss_and_grad, perturbed_gradient, Algo, FedGpsHyper};
use crate::data::{dirichlet_partition, gen_blobs, gen_surrogate, SurrogateSpec};
use crate::error::Result;
use crate::nn::{finite_diff_check_terms, Activation, Architecture, Matrix, MlpModel, ParamVector};
use crate::protocol::{per_client_units, RoundUnits, Simulation, SimulationConfig};
use crate::rng::{self, Stream};

/// One measured quantity against its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagCheck {
    pub label: String,
    pub measured: f64,
    pub bound: f64,
    pub passed: bool,
}

impl DiagCheck {
    /// Passes when `measured < bound`.
    pub fn below(label: impl Into<String>, measured: f64, bound: f64) -> Self {
        DiagCheck {
            label: label.into(),
            measured,
            bound,
            passed: measured < bound,
        }
    }

    /// Passes when `measured == expected` exactly.
    pub fn exact(label: impl Into<String>, measured: f64, expected: f64) -> Self {
        DiagCheck {
            label: label.into(),
            measured,
            bound: expected,
            passed: measured == expected,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagReport {
    pub name: &'static str,
    pub checks: Vec<DiagCheck>,
    /// Informational lines printed after the checks.
    pub notes: Vec<String>,
}

impl DiagReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

impl fmt::Display for DiagReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {} {}: measured {:.6e}, bound {:.6e}",
                if c.passed { "PASS" } else { "FAIL" },
                self.name,
                c.label,
                c.measured,
                c.bound
            )?;
        }
        for n in &self.notes {
            writeln!(f, "      {n}")?;
        }
        Ok(())
    }
}

/// Settings for [`grad_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckSettings {
    pub epsilon: f64,
    pub coordinates: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        GradCheckSettings {
            epsilon: 1e-5,
            coordinates: 64,
            tolerance: 1e-4,
            seed: 0,
        }
    }
}

/// Finite-difference check of the full local objective on a 2-class toy,
/// once for each on/off combination of the two alignment weights.
pub fn grad_check(s: &GradCheckSettings) -> Result<DiagReport> {
    let arch = Architecture {
        input_dim: 4,
        hidden: vec![8, 6],
        num_classes: 2,
        activation: Activation::Relu,
    };
    let model = MlpModel::new(&arch, &mut rng::stream(s.seed, Stream::Init));
    let theta = model.flatten();
    let data = gen_blobs(2, 4, 6, 1.5, 1.0, s.seed)?;
    let spec = SurrogateSpec::random(2, 4, 3.0, 1.0, 5, s.seed)?;
    let sur = gen_surrogate(&spec)?;
    let mut gp = Matrix::zeros(2, arch.embed_dim());
    let mut r = rng::stream(s.seed, Stream::Diagnostic);
    for v in gp.as_mut_slice() {
        *v = r.sample::<f64, _>(StandardNormal);
    }

    let mut checks = Vec::new();
    for (l1, l2) in [(0.0, 0.0), (0.1, 0.0), (0.0, 0.2), (0.1, 0.2)] {
        let hyper = FedGpsHyper {
            lambda1: l1,
            lambda2: l2,
            ..FedGpsHyper::default()
        };
        let mut scratch = model.clone();
        let report = finite_diff_check_terms(
            &theta,
            |p| {
                scratch.load_params(p)?;
                let (parts, g) = fedgps_loss_and_grad(
                    &scratch,
                    (&data.features, &data.labels),
                    Some((&sur.features, &sur.labels)),
                    Some(&gp),
                    &hyper,
                    1e-5,
                )?;
                Ok((parts.terms(hyper.surrogate_ce_weight), g))
            },
            s.epsilon,
            s.coordinates,
            s.seed,
        )?;
        checks.push(DiagCheck::below(
            format!("lambda1={l1} lambda2={l2} ({} coords)", report.coordinates_checked),
            report.max_rel_error,
            s.tolerance,
        ));
    }
    Ok(DiagReport {
        name: "grad-check",
        checks,
        notes: vec![format!(
            "{} parameters, epsilon {:e}, relative error |a-n|/(|n|+1e-12), loss terms differenced separately",
            theta.len(),
            s.epsilon
        )],
    })
}

/// Symmetric positive-definite `Q diag(eigs) Qᵀ` with a random orthogonal `Q`.
fn random_spd(eigs: &[f64], seed: u64) -> Matrix {
    let n = eigs.len();
    let mut r = rng::stream(seed, Stream::Diagnostic);
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    while q.len() < n {
        let mut v: Vec<f64> = (0..n).map(|_| r.sample(StandardNormal)).collect();
        for u in &q {
            let d: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-6 {
            q.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    let mut h = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = (0..n).map(|k| q[k][i] * eigs[k] * q[k][j]).sum();
            h.set(i, j, v);
        }
    }
    h
}

fn mat_vec(m: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..m.rows())
        .map(|i| m.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Settings for [`quadratic_oracle`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticSettings {
    pub clients: usize,
    pub eigenvalues: Vec<f64>,
    pub lambda_g: f64,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for QuadraticSettings {
    fn default() -> Self {
        QuadraticSettings {
            clients: 4,
            eigenvalues: vec![0.5, 1.0, 1.5, 2.0, 3.0],
            lambda_g: 0.3,
            tolerance: 1e-10,
            seed: 0,
        }
    }
}

/// Client losses `f_k(θ) = ½ θᵀHθ - b_kᵀθ` share the Hessian `H`. Shifting by
/// the unnormalized `δ = ∇F - ∇f_k` must give
/// `∇f_k(θ + λ_g δ) - ∇F = (I - λ_g H)(∇f_k - ∇F)` and, when
/// `‖I - λ_g H‖₂ < 1`, a strictly smaller distance to `∇F`.
pub fn quadratic_oracle(s: &QuadraticSettings) -> Result<DiagReport> {
    let n = s.eigenvalues.len();
    let h = random_spd(&s.eigenvalues, s.seed);
    let mut r = rng::stream(s.seed.wrapping_add(1), Stream::Diagnostic);
    let mut gauss = |len: usize| -> Vec<f64> { (0..len).map(|_| r.sample(StandardNormal)).collect() };
    let bs: Vec<Vec<f64>> = (0..s.clients).map(|_| gauss(n)).collect();
    let theta = ParamVector::from_vec(gauss(n));
    let b_mean: Vec<f64> = (0..n)
        .map(|i| bs.iter().map(|b| b[i]).sum::<f64>() / s.clients as f64)
        .collect();
    let grad_at = |p: &[f64], b: &[f64]| -> Vec<f64> {
        mat_vec(&h, p).iter().zip(b).map(|(a, c)| a - c).collect()
    };
    let global = grad_at(theta.as_slice(), &b_mean);
    let contraction = s
        .eigenvalues
        .iter()
        .map(|mu| (1.0 - s.lambda_g * mu).abs())
        .fold(0.0, f64::max);

    let mut identity_err: f64 = 0.0;
    let mut worst_ratio: f64 = 0.0;
    for b in &bs {
        let local = grad_at(theta.as_slice(), b);
        let delta = ParamVector::from_vec(global.iter().zip(&local).map(|(g, l)| g - l).collect());
        let mut p = theta.clone();
        let (_, g_new) = perturbed_gradient(&mut p, &delta, s.lambda_g, |q| {
            let g = grad_at(q.as_slice(), b);
            let loss = 0.5 * q.dot(&ParamVector::from_vec(mat_vec(&h, q.as_slice())))
                - q.as_slice().iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
            Ok((loss, ParamVector::from_vec(g)))
        })?;
        let diff: Vec<f64> = local.iter().zip(&global).map(|(l, g)| l - g).collect();
        let hd = mat_vec(&h, &diff);
        for i in 0..n {
            let predicted = diff[i] - s.lambda_g * hd[i];
            identity_err = identity_err.max(((g_new[i] - global[i]) - predicted).abs());
        }
        let d0 = dist(&local, &global);
        let d1 = dist(g_new.as_slice(), &global);
        if d0 > 0.0 {
            worst_ratio = worst_ratio.max(d1 / d0);
        }
    }
    let mut checks = vec![DiagCheck::below("identity max abs error", identity_err, s.tolerance)];
    if contraction < 1.0 {
        checks.push(DiagCheck::below("worst d'/d0", worst_ratio, 1.0));
    }
    Ok(DiagReport {
        name: "quadratic-oracle",
        checks,
        notes: vec![format!(
            "dim {n}, {} clients, lambda_g {}, ||I - lambda_g H||_2 = {contraction:.4}",
            s.clients, s.lambda_g
        )],
    })
}

/// Short FedGPS run on blobs reporting the distance triangle monitor. The
/// bound is a sanity monitor, so violations are reported but never fail.
pub fn triangle(rounds: usize, seed: u64) -> Result<DiagReport> {
    let full = gen_blobs(4, 8, 60, 2.0, 1.0, seed)?;
    let (train, test) = full.stratified_split(0.2, &mut rng::stream(seed, Stream::Holdout))?;
    let sur = gen_surrogate(&SurrogateSpec::random(4, 8, 3.0, 1.0, 10, seed)?)?;
    let partition = dirichlet_partition(&train.labels, 4, 0.5, seed)?;
    let mut cfg = SimulationConfig::new(Algo::FedGps, Architecture::desk(8, 8, 4));
    cfg.rounds = rounds;
    cfg.sample_rate = 1.0;
    cfg.divergence_every = 1;
    cfg.training_seed = seed;
    let mut sim = Simulation::new(cfg, &train, &test, &partition, Some(&sur))?;
    let records = sim.run(|_| Ok(()))?;
    let mut notes = Vec::new();
    let mut violations = 0;
    for r in &records {
        if let Some(t) = &r.triangle {
            violations += t.violations;
            notes.push(format!(
                "round {}: lhs {:.4}, min bound {:.4}, kappa {:.4}, violations {}, divergence {:.4}",
                r.round,
                t.lhs,
                t.min_bound,
                t.kappa,
                t.violations,
                r.divergence.unwrap_or(f64::NAN)
            ));
        }
    }
    notes.push(format!("{violations} client-round violation(s) in total"));
    Ok(DiagReport {
        name: "triangle",
        checks: vec![DiagCheck::exact("logged rounds", records.len() as f64, rounds as f64)],
        notes,
    })
}

/// Per-client units for every algorithm, each compared with its closed form.
pub fn comm_audit(m: u64, num_classes: u64, embed_dim: u64) -> DiagReport {
    let p = num_classes * embed_dim;
    let expected = |a: Algo| match a {
        Algo::FedGps => (2 * m + p, m + p),
        Algo::FedGpsCf => (m + p, m + p),
        Algo::Scaffold => (2 * m, 2 * m),
        Algo::FedAvg | Algo::FedAvgM | Algo::FedProx => (m, m),
    };
    let mut checks = Vec::new();
    let mut notes = Vec::new();
    for a in Algo::ALL {
        let RoundUnits { down, up } = per_client_units(a, m, num_classes, embed_dim);
        let (ed, eu) = expected(a);
        checks.push(DiagCheck::exact(format!("{a} down"), down as f64, ed as f64));
        checks.push(DiagCheck::exact(format!("{a} up"), up as f64, eu as f64));
        notes.push(format!("{a}: down={down} up={up}"));
    }
    DiagReport {
        name: "comm-audit",
        checks,
        notes,
    }
}
