//! Closed-form influence matrices and entropies.

use num_complex::Complex64 as C64;

use super::FoldedDenseIM;
use crate::error::{argument, Result};
use crate::model::{mat_adjoint, mat_mul, spin, unfold, LocalKernel, Mat2};
use crate::mps::von_neumann;
use crate::tensor::{svd_raw, Truncation};

/// `I = cos[J Σ_τ (σ_τ − σ̄_τ)]`: the exact IM without transverse field.
pub fn im_g0(j: f64, t: usize) -> Result<FoldedDenseIM> {
    FoldedDenseIM::from_fn(t, |traj| {
        let sum: f64 = traj.iter().map(|&a| {
            let (s, sb) = unfold(a);
            spin(s) - spin(sb)
        }).sum();
        C64::new((j * sum).cos(), 0.0)
    })
}

/// Disorder average of the `g = π/2` IM: `δ(Σ_τ (−1)^τ σ_τ, Σ_τ (−1)^τ σ̄_τ)`.
pub fn staggered_delta_im(t: usize) -> Result<FoldedDenseIM> {
    FoldedDenseIM::from_fn(t, |traj| {
        let sum: f64 = traj
            .iter()
            .enumerate()
            .map(|(tau, &a)| {
                let (s, sb) = unfold(a);
                let sign = if tau % 2 == 0 { 1.0 } else { -1.0 };
                sign * (spin(s) - spin(sb))
            })
            .sum();
        C64::new(if sum == 0.0 { 1.0 } else { 0.0 }, 0.0)
    })
}

fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Binary entropy with
/// `P = 1 − [cos^{2M}(2J) + cos^{2(T−M)}(2J)] / [1 + cos^{2T}(2J)]`,
/// evaluated exactly as written.
pub fn binary_entropy_formula(j: f64, m: usize, t: usize) -> Result<f64> {
    if m == 0 || m >= t {
        return argument(format!("cut M = {m} must satisfy 1 ≤ M ≤ T − 1 = {}", t.saturating_sub(1)));
    }
    let c = (2.0 * j).cos();
    let p = 1.0 - (c.powi(2 * m as i32) + c.powi(2 * (t - m) as i32)) / (1.0 + c.powi(2 * t as i32));
    Ok(binary_entropy(p.clamp(0.0, 1.0)))
}

/// Binary entropy of the two Schmidt weights of the normalized g = 0 IM:
/// `P = ½ {1 − [cos^{2M}(2J) + cos^{2(T−M)}(2J)] / [1 + cos^{2T}(2J)]}`.
pub fn binary_entropy_two_term(j: f64, m: usize, t: usize) -> Result<f64> {
    if m == 0 || m >= t {
        return argument(format!("cut M = {m} must satisfy 1 ≤ M ≤ T − 1 = {}", t.saturating_sub(1)));
    }
    let c = (2.0 * j).cos();
    let p = 0.5 * (1.0 - (c.powi(2 * m as i32) + c.powi(2 * (t - m) as i32)) / (1.0 + c.powi(2 * t as i32)));
    Ok(binary_entropy(p.clamp(0.0, 1.0)))
}

/// Per-site folded vectors `e^{±iJ(σ − σ̄)}` whose products sum to the
/// g = 0 IM (up to a factor 2).
fn g0_site_vectors(j: f64) -> [[C64; 4]; 2] {
    let mut out = [[C64::new(0.0, 0.0); 4]; 2];
    for a in 0..4 {
        let (s, sb) = unfold(a);
        let x = j * (spin(s) - spin(sb));
        out[0][a] = C64::from_polar(1.0, x);
        out[1][a] = C64::from_polar(1.0, -x);
    }
    out
}

/// Entanglement entropy of the normalized g = 0 IM across the cut after
/// `m` of its `t` sites.
///
/// Up to 8 sites the full amplitude matrix is decomposed by SVD. Beyond
/// that the state is treated as a sum of two product states and the
/// reduced density matrix is diagonalized inside their span, using
/// numerically accumulated overlaps.
pub fn g0_schmidt_entropy(j: f64, m: usize, t: usize) -> Result<f64> {
    if m == 0 || m >= t {
        return argument(format!("cut M = {m} must satisfy 1 ≤ M ≤ T − 1"));
    }
    if t <= 8 {
        let im = im_g0(j, t)?;
        let rows = 4usize.pow(m as u32);
        let cols = 4usize.pow((t - m) as u32);
        let f = svd_raw(&im.amplitudes, rows, cols, &Truncation::exact())?;
        let total: f64 = f.s.iter().map(|x| x * x).sum::<f64>().sqrt();
        let schmidt: Vec<f64> = f.s.iter().map(|x| x / total).collect();
        return Ok(von_neumann(&schmidt));
    }
    let e = g0_site_vectors(j);
    // gram[i][k] = Π_sites ⟨e_i|e_k⟩ over a block of n sites.
    let gram = |n: usize| -> [[C64; 2]; 2] {
        let mut g = [[C64::new(1.0, 0.0); 2]; 2];
        for (i, row) in g.iter_mut().enumerate() {
            for (k, x) in row.iter_mut().enumerate() {
                let site: C64 = (0..4).map(|a| e[i][a].conj() * e[k][a]).sum();
                for _ in 0..n {
                    *x *= site;
                }
            }
        }
        g
    };
    let gu = gram(m);
    let gv = gram(t - m);
    // ρ_A in the (non-orthogonal) basis {u_0, u_1}: N[i][k] = Σ_j ⟨v_j|v_i⟩ ⟨u_j|u_k⟩.
    let mut n = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for k in 0..2 {
            n[i][k] = (0..2).map(|jj| gv[jj][i] * gu[jj][k]).sum();
        }
    }
    let tr = n[0][0] + n[1][1];
    let det = n[0][0] * n[1][1] - n[0][1] * n[1][0];
    let disc = (tr * tr - 4.0 * det).sqrt();
    let l1 = ((tr + disc) / 2.0).re.max(0.0);
    let l2 = ((tr - disc) / 2.0).re.max(0.0);
    let s = l1 + l2;
    let weights = [l1 / s, l2 / s];
    Ok(weights.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum())
}

/// Norm of the normalized g = 0 wavefunction, computed from its dense
/// amplitudes (should be one).
pub fn g0_wavefunction_norm(j: f64, t: usize) -> Result<f64> {
    let im = im_g0(j, t)?;
    let n = im.norm();
    Ok(im.amplitudes.iter().map(|z| (z / n).norm_sqr()).sum::<f64>().sqrt())
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Entropy of the S_z = 0 Dicke state of `n` spins across the cut after
/// `m` spins.
///
/// With `staggered` the Schmidt weights are obtained by counting
/// configurations with zero staggered magnetization instead of using
/// binomials; the two must agree because flipping every other spin is a
/// product of local unitaries.
pub fn dicke_entropy(n: usize, m: usize, staggered: bool) -> Result<f64> {
    if n % 2 != 0 {
        return argument("the S_z = 0 Dicke state needs an even number of spins");
    }
    if m == 0 || m >= n {
        return argument(format!("cut {m} must satisfy 1 ≤ M ≤ N − 1"));
    }
    if n > 1000 {
        return argument("Dicke entropies are limited to N ≤ 1000");
    }
    let half = n / 2;
    let weights: Vec<f64> = if staggered {
        // count[k] = configurations of a block with staggered magnetization
        // index k (offset by the block length).
        let count = |len: usize, offset: usize| -> Vec<f64> {
            let mut c = vec![0.0; 2 * len + 1];
            c[len] = 1.0;
            for site in 0..len {
                let sign: i64 = if (site + offset) % 2 == 0 { 1 } else { -1 };
                let mut next = vec![0.0; 2 * len + 1];
                for (k, &v) in c.iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    for s in [1i64, -1] {
                        let nk = k as i64 + sign * s;
                        if (0..=2 * len as i64).contains(&nk) {
                            next[nk as usize] += v;
                        }
                    }
                }
                c = next;
            }
            c
        };
        let left = count(m, 0);
        let right = count(n - m, m);
        let mut w = Vec::new();
        for (k, &cl) in left.iter().enumerate() {
            // magnetization of the left block is k − m; the right must cancel it
            let target = (n - m) as i64 - (k as i64 - m as i64);
            if (0..right.len() as i64).contains(&target) {
                let cr = right[target as usize];
                if cl > 0.0 && cr > 0.0 {
                    w.push(cl * cr);
                }
            }
        }
        w
    } else {
        (0..=m.min(half)).filter(|&k| half >= k && n - m >= half - k).map(|k| binomial(m, k) * binomial(n - m, half - k)).collect()
    };
    let total: f64 = weights.iter().sum();
    Ok(weights.iter().filter(|&&w| w > 0.0).map(|&w| {
        let p = w / total;
        -p * p.ln()
    }).sum())
}

/// `½ Tr[σ^z(T) σ^z]` of a single spin driven by `kernel` alone (no
/// neighbours), for `T = 0..=t_max`.
pub fn isolated_spin_autocorrelator(kernel: &LocalKernel, t_max: usize) -> Vec<C64> {
    let z: Mat2 = [[C64::new(1.0, 0.0), C64::new(0.0, 0.0)], [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)]];
    let d: Mat2 = [
        [C64::from_polar(1.0, -kernel.h_angle), C64::new(0.0, 0.0)],
        [C64::new(0.0, 0.0), C64::from_polar(1.0, kernel.h_angle)],
    ];
    let u = mat_mul(&kernel.post, &mat_mul(&d, &kernel.pre));
    let mut ut = crate::model::mat_identity();
    let mut out = Vec::with_capacity(t_max + 1);
    for t in 0..=t_max {
        if t > 0 {
            ut = mat_mul(&u, &ut);
        }
        // Tr[z · U^t z ρ U^†t] with ρ = 1/2
        let evolved = mat_mul(&mat_mul(&ut, &z), &mat_adjoint(&ut));
        let m = mat_mul(&z, &evolved);
        out.push((m[0][0] + m[1][1]) * 0.5);
    }
    out
}
