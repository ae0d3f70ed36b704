//! Runnable property suites covering the structural facts the solver relies
//! on. The `verify` subcommand executes all of them with a fixed seed; the
//! test suite calls into the same registry.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::band::SymBand;
use crate::config::Preset;
use crate::energy::{
    energy_quad, mod_delta, psi_delta, psi_value, q_bar, q_bar_delta, q_bar_grad, RegParams,
};
use crate::fe::{
    assemble_matrices, interpolate_hermite, interpolate_nodal, FEMatrices, HermiteField,
};
use crate::flow::{b_step, run_flow, y_step, FlowParams, StepBudget, KKT_TOLERANCE};
use crate::frames::{discretize_initial, rotated_director, FrameState};
use crate::mesh::Mesh;
use crate::quadrature::integrate;
use crate::saddle::{solve_saddle, SaddleSystem};
use crate::vec3::{self, Vec3};

/// Outcome of one property check: a short success note (recorded constants
/// and sample counts) or a failure description.
pub type CheckResult = std::result::Result<String, String>;

pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub run: fn(u64) -> CheckResult,
}

pub struct VerifyReport {
    pub seed: u64,
    pub outcomes: Vec<(String, CheckResult)>,
}

impl VerifyReport {
    pub fn failure_count(&self) -> usize {
        self.outcomes.iter().filter(|(_, r)| r.is_err()).count()
    }

    pub fn render(&self) -> String {
        let mut s = format!("seed = {}\n", self.seed);
        for (id, outcome) in &self.outcomes {
            match outcome {
                Ok(note) => s.push_str(&format!("ok   {id}: {note}\n")),
                Err(why) => s.push_str(&format!("FAIL {id}: {why}\n")),
            }
        }
        let failures = self.failure_count();
        s.push_str(&format!(
            "{} checks, {} failed\n",
            self.outcomes.len(),
            failures
        ));
        s
    }
}

pub fn all_checks() -> Vec<Check> {
    vec![
        Check {
            module: "mesh_fe",
            name: "interpolation-idempotence",
            run: interpolation_idempotence,
        },
        Check {
            module: "mesh_fe",
            name: "averaging-contraction",
            run: averaging_contraction,
        },
        Check {
            module: "mesh_fe",
            name: "averaging-self-adjoint",
            run: averaging_self_adjoint,
        },
        Check {
            module: "mesh_fe",
            name: "nodal-average-bound",
            run: nodal_average_bound,
        },
        Check {
            module: "mesh_fe",
            name: "inverse-estimate-constant",
            run: inverse_estimate_constant,
        },
        Check {
            module: "mesh_fe",
            name: "star-product-identity",
            run: star_product_identity,
        },
        Check {
            module: "energy",
            name: "branch-gradient-continuity",
            run: branch_gradient_continuity,
        },
        Check {
            module: "energy",
            name: "midpoint-convexity",
            run: midpoint_convexity,
        },
        Check {
            module: "energy",
            name: "regularized-density-identity",
            run: regularized_density_identity,
        },
        Check {
            module: "energy",
            name: "modulus-estimates",
            run: modulus_estimates,
        },
        Check {
            module: "energy",
            name: "lipschitz-constant",
            run: lipschitz_constant,
        },
        Check {
            module: "energy",
            name: "psi-gradient-fd",
            run: psi_gradient_fd,
        },
        Check {
            module: "energy",
            name: "psi-derivative-bounds",
            run: psi_derivative_bounds,
        },
        Check {
            module: "energy",
            name: "psi-taylor-remainder",
            run: psi_taylor_remainder,
        },
        Check {
            module: "energy",
            name: "quadrature-oracle",
            run: quadrature_oracle,
        },
        Check {
            module: "frames",
            name: "director-orthogonality",
            run: director_orthogonality,
        },
        Check {
            module: "frames",
            name: "frame-determinant",
            run: frame_determinant,
        },
        Check {
            module: "frames",
            name: "endpoint-preservation",
            run: endpoint_preservation,
        },
        Check {
            module: "gradient_flow",
            name: "binomial-identities",
            run: binomial_identities,
        },
        Check {
            module: "gradient_flow",
            name: "telescoped-drift",
            run: telescoped_drift,
        },
        Check {
            module: "gradient_flow",
            name: "step-objective-decrease",
            run: step_objective_decrease,
        },
        Check {
            module: "gradient_flow",
            name: "boundary-dofs-frozen",
            run: boundary_dofs_frozen,
        },
        Check {
            module: "gradient_flow",
            name: "kkt-residuals",
            run: kkt_residuals,
        },
        Check {
            module: "linear_solver",
            name: "saddle-optimality",
            run: saddle_optimality,
        },
        Check {
            module: "linear_solver",
            name: "saddle-determinism",
            run: saddle_determinism,
        },
    ]
}

/// Run every registered check with the given seed.
pub fn run_all(seed: u64) -> VerifyReport {
    let outcomes = all_checks()
        .into_iter()
        .map(|c| (format!("{}/{}", c.module, c.name), (c.run)(seed)))
        .collect();
    VerifyReport { seed, outcomes }
}

fn fail(msg: impl Into<String>) -> CheckResult {
    Err(msg.into())
}

fn random_hermite(mesh: &Mesh, rng: &mut ChaCha8Rng) -> HermiteField {
    let n = mesh.node_count();
    let values = (0..n)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    let derivs = (0..n)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
        .collect();
    HermiteField::new(mesh.clone(), values, derivs).unwrap()
}

fn random_state(mesh: &Mesh, rng: &mut ChaCha8Rng) -> FrameState {
    let y = random_hermite(mesh, rng);
    let b = interpolate_nodal(mesh, |_| {
        Ok(std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
    })
    .unwrap();
    FrameState::new(y, b).unwrap()
}

// ---------------------------------------------------------------- mesh_fe

fn interpolation_idempotence(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..20 {
        let mesh = Mesh::uniform(1.0 + rng.gen_range(0.0..3.0), rng.gen_range(3..15)).unwrap();
        let field = random_hermite(&mesh, &mut rng);
        let again = interpolate_hermite(&mesh, |x| {
            Ok((field.eval(x, 0).unwrap(), field.eval(x, 1).unwrap()))
        })
        .unwrap();
        for j in 0..mesh.node_count() {
            for c in 0..3 {
                if (again.node_value(j)[c] - field.node_value(j)[c]).abs() > 1e-13
                    || (again.node_derivative(j)[c] - field.node_derivative(j)[c]).abs() > 1e-13
                {
                    return fail(format!(
                        "trial {trial}: coefficients not reproduced at node {j}"
                    ));
                }
            }
        }
    }
    Ok("20 random fields reproduced exactly".into())
}

fn averaging_contraction(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x11);
    let mut worst_ratio: f64 = 0.0;
    for _ in 0..50 {
        let mesh = Mesh::uniform(1.0 + rng.gen_range(0.0..2.0), rng.gen_range(2..16)).unwrap();
        let field = random_hermite(&mesh, &mut rng);
        let mut avg2 = 0.0;
        let mut full2 = 0.0;
        for e in 0..mesh.element_count() {
            let h = mesh.element_size(e);
            avg2 += h * vec3::norm2(field.element_avg_second_derivative(e).unwrap());
            full2 += integrate(mesh.node(e), mesh.node(e + 1), 3, |x| {
                vec3::norm2(field.eval(x, 2).unwrap())
            });
        }
        if avg2 > full2 * (1.0 + 1e-12) {
            return fail(format!("contraction violated: {avg2} > {full2}"));
        }
        if full2 > 0.0 {
            worst_ratio = worst_ratio.max(avg2 / full2);
        }
    }
    Ok(format!(
        "50 fields, max |A y''|^2/|y''|^2 = {worst_ratio:.6}"
    ))
}

fn averaging_self_adjoint(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x12);
    for _ in 0..30 {
        let mesh = Mesh::uniform(2.0, rng.gen_range(2..12)).unwrap();
        let u = random_hermite(&mesh, &mut rng);
        let v = random_hermite(&mesh, &mut rng);
        let mut left = 0.0;
        let mut right = 0.0;
        for e in 0..mesh.element_count() {
            let au = u.element_avg_second_derivative(e).unwrap();
            let av = v.element_avg_second_derivative(e).unwrap();
            left += integrate(mesh.node(e), mesh.node(e + 1), 3, |x| {
                vec3::dot(au, v.eval(x, 2).unwrap())
            });
            right += integrate(mesh.node(e), mesh.node(e + 1), 3, |x| {
                vec3::dot(u.eval(x, 2).unwrap(), av)
            });
        }
        if (left - right).abs() > 1e-11 * (1.0 + left.abs()) {
            return fail(format!("(A u, v) = {left} but (u, A v) = {right}"));
        }
    }
    Ok("30 random pairs, (A u, v) = (u, A v)".into())
}

fn nodal_average_bound(seed: u64) -> CheckResult {
    // |y' - M_h y'|_inf(T) <= (1/2) h^(1/2) |y''|_L2(T) on cubic elements
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x13);
    let mut worst: f64 = 0.0;
    for _ in 0..40 {
        let mesh = Mesh::uniform(1.0 + rng.gen_range(0.0..2.0), rng.gen_range(2..12)).unwrap();
        let field = random_hermite(&mesh, &mut rng);
        for e in 0..mesh.element_count() {
            let h = mesh.element_size(e);
            let m = field.element_nodal_avg_first_derivative(e).unwrap();
            let mut sup: f64 = 0.0;
            for k in 0..=16 {
                let x = mesh.node(e) + h * (k as f64 / 16.0) * (1.0 - 1e-12);
                sup = sup.max(vec3::norm(vec3::sub(field.eval(x, 1).unwrap(), m)));
            }
            let curv = integrate(mesh.node(e), mesh.node(e + 1), 3, |x| {
                vec3::norm2(field.eval(x, 2).unwrap())
            })
            .sqrt();
            if curv > 1e-14 {
                let ratio = sup / (h.sqrt() * curv);
                worst = worst.max(ratio);
                if ratio > 0.5 + 1e-9 {
                    return fail(format!("bound violated: ratio {ratio}"));
                }
            }
        }
    }
    Ok(format!(
        "max |y' - M y'|_inf / (h^1/2 |y''|) = {worst:.4} <= 1/2"
    ))
}

fn inverse_estimate_constant(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x14);
    let mut worst: f64 = 0.0;
    for _ in 0..400 {
        let h: f64 = rng.gen_range(0.005..2.0);
        let coeffs: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let eval = |t: f64| coeffs[0] + coeffs[1] * t + coeffs[2] * t * t + coeffs[3] * t * t * t;
        let mut sup: f64 = 0.0;
        for k in 0..=64 {
            sup = sup.max(eval(k as f64 / 64.0).abs());
        }
        let l2 = integrate(0.0, h, 4, |x| eval(x / h).powi(2)).sqrt();
        if l2 > 1e-12 {
            worst = worst.max(sup * h.sqrt() / l2);
        }
    }
    if worst > 10.0 {
        return fail(format!("inverse-estimate ratio unbounded: {worst}"));
    }
    Ok(format!(
        "empirical c_inv (cubics) = {worst:.4}, recorded only"
    ))
}

fn star_product_identity(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x15);
    for _ in 0..10 {
        let mesh = Mesh::uniform(1.0 + rng.gen_range(0.0..1.0), rng.gen_range(3..9)).unwrap();
        let matrices = assemble_matrices(&mesh);
        let field = random_hermite(&mesh, &mut rng);
        let mut direct = 0.0;
        for e in 0..mesh.element_count() {
            direct += integrate(mesh.node(e), mesh.node(e + 1), 10, |x| {
                vec3::norm2(field.eval(x, 0).unwrap()) + vec3::norm2(field.eval(x, 2).unwrap())
            });
        }
        let assembled = matrices.star_norm2(&field);
        if (assembled - direct).abs() > 1e-12 * (1.0 + direct.abs()) {
            return fail(format!("star norm {assembled} vs quadrature {direct}"));
        }
    }
    Ok("assembled star product matches 10-point quadrature".into())
}

// ----------------------------------------------------------------- energy

fn branch_gradient_continuity(_seed: u64) -> CheckResult {
    for k in 1..=40 {
        let beta = 0.2 * k as f64;
        let eps = 1e-9;
        let above = q_bar_grad(beta * (1.0 + eps), beta);
        let below = q_bar_grad(beta * (1.0 - eps), beta);
        if (above[0] - below[0]).abs() > 1e-5 || (above[1] - below[1]).abs() > 1e-5 {
            return fail(format!("gradient jump at alpha = beta = {beta}"));
        }
        if (below[1] - 8.0 * beta).abs() > 1e-12 {
            return fail(format!("torsion-branch gradient wrong at beta = {beta}"));
        }
    }
    Ok("gradient approaches [0, 8 beta] from both sides on the branch line".into())
}

fn midpoint_convexity(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x21);
    for i in 0..1_000_000u32 {
        let a1 = rng.gen_range(0.0..6.0);
        let b1 = rng.gen_range(0.0..6.0);
        let a2 = rng.gen_range(0.0..6.0);
        let b2 = rng.gen_range(0.0..6.0);
        let mid = q_bar(0.5 * (a1 + a2), 0.5 * (b1 + b2));
        let avg = 0.5 * (q_bar(a1, b1) + q_bar(a2, b2));
        if mid > avg + 1e-12 * (1.0 + avg) {
            return fail(format!("sample {i}: midpoint {mid} above average {avg}"));
        }
    }
    Ok("1e6 random pairs midpoint-convex".into())
}

fn regularized_density_identity(_seed: u64) -> CheckResult {
    for i in 0..=100 {
        for j in 0..=100 {
            let alpha = 0.05 * i as f64;
            let beta = 0.05 * j as f64;
            let lhs = q_bar_delta(alpha, beta, 0.0);
            let rhs = q_bar(alpha, beta);
            if (lhs - rhs).abs() > 1e-12 * (1.0 + rhs) {
                return fail(format!("mismatch at ({alpha}, {beta}): {lhs} vs {rhs}"));
            }
        }
    }
    Ok("101x101 grid, delta = 0 density equals the piecewise form to 1e-12".into())
}

fn modulus_estimates(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x22);
    for i in 0..1_000_000u32 {
        let x = rng.gen_range(-50.0..50.0);
        let delta = rng.gen_range(0.0..5.0);
        let m = mod_delta(x, delta);
        if m.value < delta - 1e-14
            || m.sigma.abs() > 1.0 + 1e-14
            || (m.value - x.abs()).abs() > delta + 1e-12
        {
            return fail(format!(
                "sample {i}: estimates violated at x={x}, delta={delta}"
            ));
        }
        if delta > 0.0 && m.curvature > 1.0 / delta + 1e-12 {
            return fail(format!("sample {i}: curvature bound violated"));
        }
    }
    Ok(
        "1e6 samples: value >= delta, |sigma| <= 1, curvature <= 1/delta, uniform error <= delta"
            .into(),
    )
}

fn lipschitz_constant(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x23);
    let mut worst: f64 = 0.0;
    for &delta in &[0.0, 1e-1, 1e-2] {
        for i in 0..1_000_000u32 {
            let alpha = rng.gen_range(0.0..6.0);
            let beta = rng.gen_range(0.0..6.0);
            let alpha_t = rng.gen_range(0.0..6.0);
            let beta_t = rng.gen_range(0.0..6.0);
            let lhs = (q_bar(alpha, beta) - q_bar_delta(alpha_t, beta_t, delta)).abs();
            let rhs = 21.0
                * ((beta - beta_t).abs() * (beta + beta_t).abs()
                    + (alpha - alpha_t).abs() * (alpha + alpha_t).abs()
                    + delta);
            if lhs > rhs + 1e-10 {
                return fail(format!(
                    "sample {i} (delta={delta}): |Q - Q_delta| = {lhs} exceeds 21-bound {rhs}"
                ));
            }
            if rhs > 0.0 {
                worst = worst.max(lhs / rhs * 21.0);
            }
        }
    }
    Ok(format!(
        "3e6 samples within the 21-bound; max observed constant = {worst:.3}"
    ))
}

/// Finite-difference oracle for a candidate psi gradient; generic so a
/// deliberately broken gradient can be fed in to prove the check detects it.
pub fn psi_gradient_matches_fd(
    gradient: impl Fn(f64, f64, f64) -> (f64, f64),
    seed: u64,
    samples: usize,
    delta: f64,
    tol: f64,
) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for i in 0..samples {
        let r = rng.gen_range(0.0..20.0);
        let s = rng.gen_range(0.0..20.0);
        let (d_r, d_s) = gradient(r, s, delta);
        let fd = 1e-5 * (1.0 + r.max(s));
        let r_lo = (r - fd).max(0.0);
        let s_lo = (s - fd).max(0.0);
        let fd_r = (psi_value(r + fd, s, delta) - psi_value(r_lo, s, delta)) / (r + fd - r_lo);
        let fd_s = (psi_value(r, s + fd, delta) - psi_value(r, s_lo, delta)) / (s + fd - s_lo);
        let err_r = (d_r - fd_r).abs() / (1.0 + d_r.abs());
        let err_s = (d_s - fd_s).abs() / (1.0 + d_s.abs());
        worst = worst.max(err_r).max(err_s);
        if err_r > tol || err_s > tol {
            return fail(format!(
                "sample {i}: gradient ({d_r}, {d_s}) vs finite differences ({fd_r}, {fd_s}) at (r, s) = ({r}, {s})"
            ));
        }
    }
    Ok(format!(
        "{samples} samples at delta = {delta}, max relative deviation {worst:.2e}"
    ))
}

fn psi_gradient_fd(seed: u64) -> CheckResult {
    psi_gradient_matches_fd(
        |r, s, delta| {
            let eval = psi_delta(r, s, delta).unwrap();
            (eval.d_r, eval.d_s)
        },
        seed ^ 0x24,
        10_000,
        1e-2,
        1e-6,
    )
}

fn psi_derivative_bounds(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x25);
    let mut notes = Vec::new();
    for &delta in &[1e-1, 1e-2, 1e-3] {
        let mut sup_grad: f64 = 0.0;
        let mut sup_hess: f64 = 0.0;
        for _ in 0..20_000 {
            let r = rng.gen_range(0.0..50.0);
            let s = rng.gen_range(0.0..50.0);
            let eval = psi_delta(r, s, delta).unwrap();
            sup_grad = sup_grad.max(eval.d_r.abs()).max(eval.d_s.abs());
            // second differences of the closed-form gradient
            let fd = 1e-4 * (1.0 + r.max(s));
            let up_r = psi_delta(r + fd, s, delta).unwrap();
            let up_s = psi_delta(r, s + fd, delta).unwrap();
            sup_hess = sup_hess
                .max((up_r.d_r - eval.d_r).abs() / fd)
                .max((up_s.d_s - eval.d_s).abs() / fd)
                .max((up_s.d_r - eval.d_r).abs() / fd);
        }
        if sup_grad > 8.0 {
            return fail(format!(
                "delta = {delta}: sampled |grad psi| = {sup_grad} above bound 8"
            ));
        }
        if sup_hess * delta > 20.0 {
            return fail(format!(
                "delta = {delta}: sampled |D2 psi| * delta = {} above bound 20",
                sup_hess * delta
            ));
        }
        notes.push(format!(
            "delta={delta}: |grad|<={sup_grad:.3}, |D2|*delta<={:.3}",
            sup_hess * delta
        ));
    }
    Ok(notes.join("; "))
}

fn psi_taylor_remainder(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x26);
    let mut fitted: f64 = 0.0;
    for &delta in &[1e-1, 1e-2] {
        for _ in 0..100_000 {
            let a: Vec3 = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
            let b: Vec3 = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
            let at: Vec3 = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
            let bt: Vec3 = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
            let eval_t = psi_delta(vec3::norm2(at), vec3::norm2(bt), delta).unwrap();
            let remainder = 0.5
                * (psi_value(vec3::norm2(a), vec3::norm2(b), delta)
                    - psi_value(vec3::norm2(at), vec3::norm2(bt), delta))
                - eval_t.d_r * vec3::dot(at, vec3::sub(a, at))
                - eval_t.d_s * vec3::dot(bt, vec3::sub(b, bt));
            let weight =
                (vec3::norm2(a) + vec3::norm2(at) + vec3::norm2(b) + vec3::norm2(bt)) / delta + 1.0;
            let dist2 = vec3::norm2(vec3::sub(a, at)) + vec3::norm2(vec3::sub(b, bt));
            if dist2 > 1e-12 {
                fitted = fitted.max(remainder.abs() / (weight * dist2));
            }
        }
    }
    if fitted > 5.0 {
        return fail(format!(
            "Taylor remainder constant {fitted} above the generous bound 5"
        ));
    }
    Ok(format!("fitted remainder constant c_Gamma = {fitted:.4}"))
}

fn quadrature_oracle(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x27);
    for trial in 0..10 {
        let mesh = Mesh::uniform(1.0 + rng.gen_range(0.0..1.5), rng.gen_range(3..10)).unwrap();
        let state = random_state(&mesh, &mut rng);
        let params = RegParams::new(
            rng.gen_range(0.01..0.2),
            rng.gen_range(0.05..0.5),
            rng.gen_range(0.05..0.5),
        )
        .unwrap();
        let e = energy_quad(&state, &params);
        let mut oracle = 0.0;
        for el in 0..mesh.element_count() {
            let (a, b) = (mesh.node(el), mesh.node(el + 1));
            let avg = state.y.element_avg_second_derivative(el).unwrap();
            let tor = state.b.element_derivative(el).unwrap();
            let mean_tan = state.y.element_nodal_avg_first_derivative(el).unwrap();
            let ql = vec3::dot(state.y.node_derivative(el), state.b.node_value(el)).powi(2);
            let qr = vec3::dot(state.y.node_derivative(el + 1), state.b.node_value(el + 1)).powi(2);
            oracle += integrate(a, b, 10, |x| {
                let curv = vec3::norm2(state.y.eval(x, 2).unwrap());
                let tw = vec3::norm2(tor);
                let psi = psi_value(vec3::norm2(avg), tw, params.delta);
                let p2 = vec3::dot(mean_tan, tor);
                let t = (x - a) / (b - a);
                0.5 * (curv + 5.0 * tw + psi)
                    + 0.5 / params.eps2 * p2 * p2
                    + 0.5 / params.eps1 * ((1.0 - t) * ql + t * qr)
            });
        }
        if (e.total - oracle).abs() > 1e-10 * (1.0 + oracle.abs()) {
            return fail(format!(
                "trial {trial}: breakdown total {} vs oracle {oracle}",
                e.total
            ));
        }
    }
    Ok("10 random states match the 10-point Gauss oracle to 1e-10".into())
}

// ----------------------------------------------------------------- frames

fn director_orthogonality(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x31);
    for _ in 0..20 {
        let amp: f64 = rng.gen_range(0.2..0.9);
        let phase: f64 = rng.gen_range(0.0..3.0);
        let tangent = move |x: f64| -> crate::error::Result<Vec3> {
            let u = amp * (x + phase).sin();
            Ok([
                (1.0 - u * u).sqrt() * x.cos(),
                (1.0 - u * u).sqrt() * x.sin(),
                u,
            ])
        };
        let rate = rng.gen_range(-2.0..2.0);
        let director = rotated_director(tangent, rate, true);
        for k in 0..=64 {
            let x = 2.0 * std::f64::consts::PI * k as f64 / 64.0;
            let t = tangent(x).unwrap();
            let b = director(x).unwrap();
            if vec3::dot(t, b).abs() > 1e-12 || (vec3::norm(b) - 1.0).abs() > 1e-12 {
                return fail(format!("orthogonality lost at x = {x}"));
            }
        }
    }
    Ok("20 random smooth tangents: director unit and orthogonal".into())
}

fn frame_determinant(_seed: u64) -> CheckResult {
    let (y0, b0) = crate::frames::moebius_initial();
    for k in 0..=100 {
        let x = 2.0 * std::f64::consts::PI * k as f64 / 100.0;
        let (_, t) = y0(x).unwrap();
        let b = b0(x).unwrap();
        let d = vec3::cross(t, b);
        let det = vec3::dot(vec3::cross(t, b), d);
        if (det - 1.0).abs() > 1e-12 {
            return fail(format!("determinant {det} at x = {x}"));
        }
    }
    Ok("[y', b, y' x b] has determinant +1 along the twisted circle".into())
}

fn endpoint_preservation(_seed: u64) -> CheckResult {
    for preset in [Preset::Moebius, Preset::Helix] {
        let mesh = Mesh::uniform(preset.length(), 24).unwrap();
        let (curve, director) = preset.samplers();
        let (state, bc) = discretize_initial(&curve, &director, &mesh).unwrap();
        let last = mesh.node_count() - 1;
        let (y_end, dy_end) = (
            curve(mesh.length()).unwrap().0,
            curve(mesh.length()).unwrap().1,
        );
        for c in 0..3 {
            if state.y.node_value(0)[c] != bc.y_left[c]
                || state.y.node_derivative(0)[c] != bc.dy_left[c]
                || state.y.node_value(last)[c] != y_end[c]
                || state.y.node_derivative(last)[c] != dy_end[c]
            {
                return fail(format!("{}: endpoint data not preserved", preset.name()));
            }
        }
    }
    Ok("both presets: boundary data equals the sampled endpoint values".into())
}

// ------------------------------------------------------------ gradient_flow

fn small_moebius_run(
    n: usize,
    steps: usize,
) -> (
    FrameState,
    crate::frames::BoundaryConditions,
    FlowParams,
    FEMatrices,
) {
    let mesh = Mesh::uniform(2.0 * std::f64::consts::PI, n).unwrap();
    let (y0, b0) = crate::frames::moebius_initial();
    let (state, bc) = discretize_initial(&y0, &b0, &mesh).unwrap();
    let matrices = assemble_matrices(&mesh);
    let h = mesh.h_max();
    let reg = RegParams::new(h.sqrt(), h, h.sqrt()).unwrap();
    let params = FlowParams::new(h / 10.0, reg, StepBudget::Count(steps)).unwrap();
    (state, bc, params, matrices)
}

fn binomial_identities(_seed: u64) -> CheckResult {
    let (initial, bc, params, matrices) = small_moebius_run(24, 15);
    let mut prev = initial.clone();
    let mut worst: f64 = 0.0;
    let mut failure = None;
    run_flow(&initial, &bc, &params, &matrices, |r, state| {
        if failure.is_some() {
            return;
        }
        for j in 0..state.mesh().node_count() {
            let tp = prev.y.node_derivative(j);
            let tn = state.y.node_derivative(j);
            let ey = (vec3::norm2(tn) - vec3::norm2(tp) - vec3::norm2(vec3::sub(tn, tp))).abs();
            let bp = prev.b.node_value(j);
            let bn = state.b.node_value(j);
            let eb = (vec3::norm2(bn) - vec3::norm2(bp) - vec3::norm2(vec3::sub(bn, bp))).abs();
            worst = worst.max(ey).max(eb);
            if ey > 1e-10 || eb > 1e-10 {
                failure = Some(format!(
                    "step {}: identity residual {:.2e}",
                    r.k,
                    ey.max(eb)
                ));
            }
        }
        prev = state.clone();
    })
    .map_err(|e| e.to_string())?;
    match failure {
        Some(f) => fail(f),
        None => Ok(format!("15 steps, worst binomial residual {worst:.2e}")),
    }
}

fn telescoped_drift(_seed: u64) -> CheckResult {
    let (initial, bc, params, matrices) = small_moebius_run(20, 20);
    let summary =
        run_flow(&initial, &bc, &params, &matrices, |_, _| {}).map_err(|e| e.to_string())?;
    let max_tele_y = summary
        .telescoped_drift_y
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let max_tele_b = summary
        .telescoped_drift_b
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    if (summary.drift_y - max_tele_y).abs() > 1e-12 || (summary.drift_b - max_tele_b).abs() > 1e-12
    {
        return fail(format!(
            "drift ({:.3e}, {:.3e}) vs telescoped sums ({max_tele_y:.3e}, {max_tele_b:.3e})",
            summary.drift_y, summary.drift_b
        ));
    }
    Ok(format!(
        "20 steps: nodal drift equals the telescoped sums ({:.3e}, {:.3e})",
        summary.drift_y, summary.drift_b
    ))
}

fn step_objective_decrease(_seed: u64) -> CheckResult {
    // each linear solve minimizes its own convex objective over the affine
    // constraint set, so the objective cannot increase relative to the
    // previous iterate (which is feasible)
    let (initial, bc, params, matrices) = small_moebius_run(16, 8);
    let mesh = initial.mesh().clone();
    let weights = mesh.node_weights();
    let reg = params.reg;
    let tau = params.tau;

    let y_objective = |u: &HermiteField, prev: &FrameState| -> f64 {
        let mut obj = 0.5 * matrices.second_derivative_norm2(u);
        for j in 0..mesh.node_count() {
            let q = vec3::dot(u.node_derivative(j), prev.b.node_value(j));
            obj += 0.5 / reg.eps1 * weights[j] * q * q;
        }
        for e in 0..mesh.element_count() {
            let h = mesh.element_size(e);
            let beta = prev.b.element_derivative(e).unwrap();
            let m = u.element_nodal_avg_first_derivative(e).unwrap();
            let p = vec3::dot(m, beta);
            obj += 0.5 / reg.eps2 * h * p * p;
            let grad = psi_delta(
                vec3::norm2(prev.y.element_avg_second_derivative(e).unwrap()),
                vec3::norm2(beta),
                reg.delta,
            )
            .unwrap();
            obj += h
                * grad.d_r
                * vec3::dot(
                    prev.y.element_avg_second_derivative(e).unwrap(),
                    u.element_avg_second_derivative(e).unwrap(),
                );
        }
        obj
    };

    let b_objective = |v: &crate::fe::NodalField, y_new: &HermiteField, prev: &FrameState| -> f64 {
        let mut obj = 0.0;
        for j in 0..mesh.node_count() {
            let q = vec3::dot(y_new.node_derivative(j), v.node_value(j));
            obj += 0.5 / reg.eps1 * weights[j] * q * q;
        }
        for e in 0..mesh.element_count() {
            let h = mesh.element_size(e);
            let vp = v.element_derivative(e).unwrap();
            obj += 2.5 * h * vec3::norm2(vp);
            let m = y_new.element_nodal_avg_first_derivative(e).unwrap();
            let p = vec3::dot(m, vp);
            obj += 0.5 / reg.eps2 * h * p * p;
            let grad = psi_delta(
                vec3::norm2(prev.y.element_avg_second_derivative(e).unwrap()),
                vec3::norm2(prev.b.element_derivative(e).unwrap()),
                reg.delta,
            )
            .unwrap();
            obj += h * grad.d_s * vec3::dot(prev.b.element_derivative(e).unwrap(), vp);
        }
        obj
    };

    let mut state = initial.clone();
    for step in 0..params.step_count() {
        let (y_new, _, _) = y_step(&state, tau, &reg, &matrices, &bc).map_err(|e| e.to_string())?;
        let scale = y_objective(&state.y, &state).abs().max(1.0);
        let proximal = {
            let (ds, _) = crate::flow::dt_norms(
                &state,
                &FrameState::new(y_new.clone(), state.b.clone()).unwrap(),
                1.0,
                &matrices,
            )
            .unwrap();
            ds * ds / (2.0 * tau)
        };
        let after = y_objective(&y_new, &state) + proximal;
        let before = y_objective(&state.y, &state);
        if after > before + 1e-9 * scale {
            return fail(format!(
                "step {step}: y-objective rose from {before} to {after}"
            ));
        }
        let (b_new, _, _) =
            b_step(&y_new, &state, tau, &reg, &matrices, &bc).map_err(|e| e.to_string())?;
        let b_prox = {
            let next = FrameState::new(y_new.clone(), b_new.clone()).unwrap();
            let base = FrameState::new(y_new.clone(), state.b.clone()).unwrap();
            let (_, dd) = crate::flow::dt_norms(&base, &next, 1.0, &matrices).unwrap();
            dd * dd / (2.0 * tau)
        };
        let b_after = b_objective(&b_new, &y_new, &state) + b_prox;
        let b_before = b_objective(&state.b, &y_new, &state);
        if b_after > b_before + 1e-9 * scale {
            return fail(format!(
                "step {step}: b-objective rose from {b_before} to {b_after}"
            ));
        }
        state = FrameState::new(y_new, b_new).unwrap();
    }
    Ok("8 steps: both step objectives nonincreasing (separate convexity)".into())
}

fn boundary_dofs_frozen(_seed: u64) -> CheckResult {
    let (initial, bc, params, matrices) = small_moebius_run(16, 12);
    let summary =
        run_flow(&initial, &bc, &params, &matrices, |_, _| {}).map_err(|e| e.to_string())?;
    let state = &summary.final_state;
    let last = state.mesh().node_count() - 1;
    for c in 0..3 {
        if state.y.node_value(0)[c].to_bits() != bc.y_left[c].to_bits()
            || state.y.node_derivative(0)[c].to_bits() != bc.dy_left[c].to_bits()
            || state.y.node_value(last)[c].to_bits() != bc.y_right[c].to_bits()
            || state.y.node_derivative(last)[c].to_bits() != bc.dy_right[c].to_bits()
            || state.b.node_value(0)[c].to_bits() != bc.b_left[c].to_bits()
            || state.b.node_value(last)[c].to_bits() != bc.b_right[c].to_bits()
        {
            return fail("boundary dof changed during the flow".to_string());
        }
    }
    Ok("12 steps: endpoint dofs bit-identical to the boundary data".into())
}

fn kkt_residuals(_seed: u64) -> CheckResult {
    let (initial, bc, params, matrices) = small_moebius_run(20, 10);
    let mut worst: f64 = 0.0;
    run_flow(&initial, &bc, &params, &matrices, |r, _| {
        worst = worst.max(r.residual_y).max(r.residual_b);
    })
    .map_err(|e| e.to_string())?;
    if worst > KKT_TOLERANCE {
        return fail(format!(
            "KKT residual {worst:.2e} above {KKT_TOLERANCE:.0e}"
        ));
    }
    Ok(format!("10 steps, max relative KKT residual {worst:.2e}"))
}

// ------------------------------------------------------------ linear_solver

fn saddle_optimality(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x41);
    for trial in 0..50 {
        let n = rng.gen_range(2..30);
        let m = rng.gen_range(0..(n / 2).max(1));
        let r: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let mut a = SymBand::zeros(n, n - 1);
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in 0..n {
                    s += r[k][i] * r[k][j];
                }
                a.add(i, j, s + if i == j { 1.0 } else { 0.0 });
            }
        }
        let mut constraints = Vec::new();
        for _ in 0..m {
            let mut row = Vec::new();
            for c in 0..n {
                if rng.gen_bool(0.5) {
                    row.push((c, rng.gen_range(-1.0f64..1.0)));
                }
            }
            if row.is_empty() {
                row.push((rng.gen_range(0..n), 1.0));
            }
            constraints.push(row);
        }
        let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sys = SaddleSystem {
            a,
            constraints,
            f,
            g,
        };
        let sol = match solve_saddle(&sys, 1e-9) {
            Ok(s) => s,
            Err(e) => return fail(format!("trial {trial}: {e}")),
        };
        // feasibility
        for (i, row) in sys.constraints.iter().enumerate() {
            let bu: f64 = row.iter().map(|&(c, v)| v * sol.primal[c]).sum();
            if (bu - sys.g[i]).abs() > 1e-9 * (1.0 + sys.g[i].abs()) {
                return fail(format!("trial {trial}: constraint {i} violated"));
            }
        }
        // stationarity: A u + B^T lambda = f
        let au = sys.a.matvec(&sol.primal);
        let mut grad = au;
        for (i, row) in sys.constraints.iter().enumerate() {
            for &(c, v) in row {
                grad[c] += v * sol.multipliers[i];
            }
        }
        for (c, (gv, fv)) in grad.iter().zip(&sys.f).enumerate() {
            if (gv - fv).abs() > 1e-8 * (1.0 + fv.abs()) {
                return fail(format!("trial {trial}: stationarity violated at dof {c}"));
            }
        }
    }
    Ok("50 random systems feasible and stationary".into())
}

fn saddle_determinism(seed: u64) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x42);
    let n = 18;
    let mut a = SymBand::zeros(n, 2);
    for i in 0..n {
        a.add(i, i, 3.0 + rng.gen_range(0.0..1.0));
        if i > 0 {
            a.add(i, i - 1, rng.gen_range(-1.0..1.0));
        }
    }
    let constraints = vec![vec![(4, 1.0), (5, 0.3)], vec![(11, -1.0)]];
    let f: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sys = SaddleSystem {
        a,
        constraints,
        f,
        g: vec![0.2, -0.4],
    };
    let s1 = solve_saddle(&sys, 1e-10).map_err(|e| e.to_string())?;
    let s2 = solve_saddle(&sys, 1e-10).map_err(|e| e.to_string())?;
    for (x, y) in s1.primal.iter().zip(&s2.primal) {
        if x.to_bits() != y.to_bits() {
            return fail("repeated solve differs bitwise".to_string());
        }
    }
    Ok("repeated solves bit-identical".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_registry_passes() {
        let report = run_all(0x5eed);
        for (id, outcome) in &report.outcomes {
            assert!(outcome.is_ok(), "{id} failed: {:?}", outcome.as_ref().err());
        }
    }

    #[test]
    fn injected_gradient_fault_is_detected() {
        // flip the sign of the second partial derivative: the
        // finite-difference suite must fail
        let broken = |r: f64, s: f64, delta: f64| {
            let eval = psi_delta(r, s, delta).unwrap();
            (eval.d_r, -eval.d_s)
        };
        let outcome = psi_gradient_matches_fd(broken, 99, 2_000, 1e-2, 1e-6);
        assert!(outcome.is_err());
    }

    #[test]
    fn report_prints_seed_and_failures() {
        let report = VerifyReport {
            seed: 42,
            outcomes: vec![
                ("a/b".into(), Ok("fine".into())),
                ("c/d".into(), Err("broken".into())),
            ],
        };
        let text = report.render();
        assert!(text.contains("seed = 42"));
        assert!(text.contains("FAIL c/d: broken"));
        assert_eq!(report.failure_count(), 1);
    }
}
