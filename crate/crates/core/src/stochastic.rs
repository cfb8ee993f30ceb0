//! Stochastic entropy production of one application of a quantum channel.
//!
//! The channel `N = exp(δt L)` is written in Kraus form from the Choi matrix
//! of the exponentiated superoperator. With `ρ = Σ p_μ |ψ_μ⟩⟨ψ_μ|`,
//! `N(ρ) = Σ q_ν |φ_ν⟩⟨φ_ν|` and the steady state `π = Σ r_i |i⟩⟨i|`, the
//! forward quasi-probability of the transition `(μ, ij) → (ν, kl)` is
//!
//! `P = p_μ ⟨φ_ν|Π_k N(Π_i|ψ_μ⟩⟨ψ_μ|Π_j) Π_l|φ_ν⟩`
//!
//! and it carries the entropy production
//! `σ = ln p_μ − ln q_ν + ½ ln(r_k r_l / (r_i r_j))`. The halved bath term
//! is what makes each term obey `P = e^σ P_R` exactly, where `P_R` is the
//! same transition run backwards through the reversal map
//! `K̃ = π^{1/2} K† π^{−1/2}` from `N(ρ)`.
//!
//! All index sums run in the eigenbasis of `π`.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::liouville::{self, EvolveOptions, LindbladGenerator};
use crate::operator::DensityMatrix;

/// Choi eigenvalues above this become Kraus operators.
pub const KRAUS_CUTOFF: f64 = 1e-12;
/// Eigenvalues below this are excluded from logarithms.
pub const LOG_CUTOFF: f64 = 1e-14;
/// Default largest spin number for the six-index table.
pub const DEFAULT_MAX_SPINS: usize = 14;
pub const DEFAULT_BIN_TOL: f64 = 1e-10;
pub const DEFAULT_DT_CHANNEL: f64 = 0.1;

#[derive(Clone, Debug)]
pub struct QuantumChannel {
    pub kraus_ops: Vec<CMat>,
    pub source: String,
    pub dt_channel: f64,
}

impl QuantumChannel {
    pub fn identity(d: usize) -> Self {
        Self {
            kraus_ops: vec![linalg::identity(d)],
            source: "identity".into(),
            dt_channel: 0.0,
        }
    }

    pub fn unitary(u: CMat, dt_channel: f64) -> Self {
        Self {
            kraus_ops: vec![u],
            source: "unitary".into(),
            dt_channel,
        }
    }

    pub fn dim(&self) -> usize {
        self.kraus_ops[0].nrows()
    }

    pub fn rank(&self) -> usize {
        self.kraus_ops.len()
    }

    /// `Σ K X K†`
    pub fn apply(&self, x: &CMat) -> CMat {
        let mut out = linalg::zeros(self.dim());
        for k in &self.kraus_ops {
            out = out + k.dot(x).dot(&linalg::dagger(k));
        }
        out
    }

    /// `‖Σ K†K − 1‖_max`
    pub fn completeness_defect(&self) -> f64 {
        let mut sum = linalg::zeros(self.dim());
        for k in &self.kraus_ops {
            sum = sum + linalg::dagger(k).dot(k);
        }
        linalg::max_abs_diff(&sum, &linalg::identity(self.dim()))
    }
}

/// Kraus form of `exp(dt_channel · L)`.
pub fn channel_from_generator(gen: &LindbladGenerator, dt_channel: f64) -> Result<QuantumChannel> {
    let d = gen.dim();
    if dt_channel == 0.0 {
        return Ok(QuantumChannel::identity(d));
    }
    if !(dt_channel > 0.0) {
        return Err(Error::InvalidParams(format!(
            "channel duration must be non-negative, got {dt_channel}"
        )));
    }
    let sup = gen.superoperator().mapv(|z| z * dt_channel);
    let phi = linalg::expm(&sup)?;
    // C[(i,k),(j,l)] = N(|i⟩⟨j|)_{kl}
    let choi = CMat::from_shape_fn((d * d, d * d), |(ik, jl)| {
        let (i, k) = (ik / d, ik % d);
        let (j, l) = (jl / d, jl % d);
        phi[[k * d + l, i * d + j]]
    });
    let (vals, vecs) = linalg::eigh(&choi)?;
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    if min < -1e-10 {
        return Err(Error::Channel(format!(
            "Choi matrix has eigenvalue {min:e}; the map is not completely positive"
        )));
    }
    let kraus_ops: Vec<CMat> = vals
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > KRAUS_CUTOFF)
        .map(|(n, &v)| {
            let w = v.sqrt();
            CMat::from_shape_fn((d, d), |(k, i)| vecs[[i * d + k, n]] * w)
        })
        .collect();
    let channel = QuantumChannel {
        kraus_ops,
        source: format!("exp({dt_channel}·L)"),
        dt_channel,
    };
    let defect = channel.completeness_defect();
    if defect > 1e-10 {
        return Err(Error::Channel(format!(
            "Kraus completeness defect {defect:e}"
        )));
    }
    // action on every matrix unit against the exponentiated superoperator
    let mut unit = linalg::zeros(d);
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            unit[[i, j]] = C64::new(1.0, 0.0);
            let out = channel.apply(&unit);
            unit[[i, j]] = C64::new(0.0, 0.0);
            for k in 0..d {
                for l in 0..d {
                    worst = worst.max((out[[k, l]] - phi[[k * d + l, i * d + j]]).norm());
                }
            }
        }
    }
    if worst > 1e-10 {
        return Err(Error::Channel(format!(
            "Kraus action deviates from the propagator by {worst:e}"
        )));
    }
    Ok(channel)
}

/// Crooks reversal `K̃ = π^{1/2} K† π^{−1/2}` with checks `R(π) = π` and
/// `Σ K̃†K̃ = 1` to `1e-9`.
pub fn reversal_map(channel: &QuantumChannel, pi: &DensityMatrix) -> Result<QuantumChannel> {
    let min = pi.min_eigenvalue()?;
    if !(min > LOG_CUTOFF) {
        return Err(Error::Singular(format!(
            "reference state is rank deficient (smallest eigenvalue {min:e})"
        )));
    }
    let sqrt = linalg::hermitian_function(pi.matrix(), |x| x.sqrt())?;
    let inv_sqrt = linalg::hermitian_function(pi.matrix(), |x| 1.0 / x.sqrt())?;
    let reversed = QuantumChannel {
        kraus_ops: channel
            .kraus_ops
            .iter()
            .map(|k| sqrt.dot(&linalg::dagger(k)).dot(&inv_sqrt))
            .collect(),
        source: format!("reversal of {}", channel.source),
        dt_channel: channel.dt_channel,
    };
    let fixed = linalg::max_abs_diff(&reversed.apply(pi.matrix()), pi.matrix());
    if fixed > 1e-9 {
        return Err(Error::Channel(format!(
            "reversal map moves the reference state by {fixed:e}"
        )));
    }
    let defect = reversed.completeness_defect();
    if defect > 1e-9 {
        return Err(Error::Channel(format!(
            "reversal map completeness defect {defect:e}"
        )));
    }
    Ok(reversed)
}

/// Spectral decompositions of `ρ`, `N(ρ)` and `π`, with the eigenvectors of
/// `ρ` and `N(ρ)` expressed in the eigenbasis of `π`.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub p: Vec<f64>,
    /// Column `μ` holds `⟨i|ψ_μ⟩`.
    pub psi: CMat,
    pub q: Vec<f64>,
    /// Column `ν` holds `⟨k|φ_ν⟩`.
    pub phi: CMat,
    pub r: Vec<f64>,
    /// Column `i` holds `|i⟩` in the Dicke basis.
    pub basis: CMat,
}

fn clean_spectrum(vals: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if let Some(v) = vals.iter().find(|v| **v < -1e-12) {
        return Err(Error::InvalidState(format!(
            "{what} has eigenvalue {v:e} below −1e-12"
        )));
    }
    let clipped: Vec<f64> = vals.into_iter().map(|v| v.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    Ok(clipped.into_iter().map(|v| v / total).collect())
}

impl SpectralData {
    pub fn new(rho: &DensityMatrix, rho_next: &DensityMatrix, pi: &DensityMatrix) -> Result<Self> {
        let (r, basis) = linalg::eigh_descending(pi.matrix())?;
        let (p, psi) = linalg::eigh_descending(rho.matrix())?;
        let (q, phi) = linalg::eigh_descending(rho_next.matrix())?;
        let to_pi = linalg::dagger(&basis);
        Ok(Self {
            p: clean_spectrum(p, "ρ")?,
            psi: to_pi.dot(&psi),
            q: clean_spectrum(q, "N(ρ)")?,
            phi: to_pi.dot(&phi),
            r: clean_spectrum(r, "π")?,
            basis,
        })
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    /// Whether every eigenvalue referenced by the transition exceeds the
    /// logarithm cutoff.
    pub fn resolvable(&self, idx: [usize; 6]) -> bool {
        let [mu, nu, i, j, k, l] = idx;
        [
            self.p[mu], self.q[nu], self.r[i], self.r[j], self.r[k], self.r[l],
        ]
        .iter()
        .all(|v| *v > LOG_CUTOFF)
    }
}

/// `σ = ln p_μ − ln q_ν + ½ ln(r_k r_l / (r_i r_j))` for indices
/// `(μ, ν, i, j, k, l)`.
pub fn entropy_production_value(spectral: &SpectralData, idx: [usize; 6]) -> Result<f64> {
    if !spectral.resolvable(idx) {
        return Err(Error::Singular(format!(
            "transition {idx:?} references an eigenvalue below {LOG_CUTOFF:e}"
        )));
    }
    let [mu, nu, i, j, k, l] = idx;
    let r = &spectral.r;
    let ds = spectral.p[mu].ln() - spectral.q[nu].ln();
    let dq = -0.5 * ((r[k] * r[l]).ln() - (r[i] * r[j]).ln());
    Ok(ds - dq)
}

/// `⟨k|M(|i⟩⟨j|)|l⟩` for all `i, j, k, l` in the `π` eigenbasis, stored at
/// `((i d + j) d + k) d + l`.
fn transfer_tensor(channel: &QuantumChannel, basis: &CMat) -> Vec<C64> {
    let d = basis.nrows();
    let bd = linalg::dagger(basis);
    let rotated: Vec<CMat> = channel
        .kraus_ops
        .iter()
        .map(|k| bd.dot(k).dot(basis))
        .collect();
    let mut t = vec![C64::new(0.0, 0.0); d * d * d * d];
    for kr in &rotated {
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let a = kr[[k, i]];
                    if a == C64::new(0.0, 0.0) {
                        continue;
                    }
                    let base = ((i * d + j) * d + k) * d;
                    for l in 0..d {
                        t[base + l] += a * kr[[l, j]].conj();
                    }
                }
            }
        }
    }
    t
}

/// Six-index table of complex transition weights.
#[derive(Clone, Debug)]
pub struct QuasiProbTable {
    pub spectral: SpectralData,
    /// Entry `(μ, ν, i, j, k, l)` at `((((μ d + ν) d + i) d + j) d + k) d + l`.
    pub values: Vec<C64>,
    /// Whether the table describes the backward process.
    pub backward: bool,
}

impl QuasiProbTable {
    pub fn dim(&self) -> usize {
        self.spectral.dim()
    }

    pub fn index(&self, idx: [usize; 6]) -> usize {
        let d = self.dim();
        idx.iter().fold(0, |acc, &v| acc * d + v)
    }

    pub fn get(&self, idx: [usize; 6]) -> C64 {
        self.values[self.index(idx)]
    }

    pub fn total(&self) -> C64 {
        self.values.iter().sum()
    }

    /// Smallest real part over all entries.
    pub fn min_real(&self) -> f64 {
        self.values
            .iter()
            .map(|z| z.re)
            .fold(f64::INFINITY, f64::min)
    }

    /// Entropy production attached to an entry: the forward value, negated
    /// for the backward process.
    pub fn sigma(&self, idx: [usize; 6]) -> Result<f64> {
        let s = entropy_production_value(&self.spectral, idx)?;
        Ok(if self.backward { -s } else { s })
    }

    fn unravel(&self, flat: usize) -> [usize; 6] {
        let d = self.dim();
        let mut out = [0; 6];
        let mut rest = flat;
        for slot in out.iter_mut().rev() {
            *slot = rest % d;
            rest /= d;
        }
        out
    }
}

fn check_size(d: usize, max_spins: usize) -> Result<()> {
    if d > max_spins + 1 {
        return Err(Error::SizeCap(format!(
            "six-index table for dimension {d} exceeds the cap N ≤ {max_spins}"
        )));
    }
    Ok(())
}

/// Forward table `P^{μν}_{ij,kl} = p_μ ψ_μ(i) ψ_μ(j)* ⟨k|N(|i⟩⟨j|)|l⟩ φ_ν(k)* φ_ν(l)`.
pub fn quasi_probability(
    channel: &QuantumChannel,
    rho: &DensityMatrix,
    pi: &DensityMatrix,
) -> Result<QuasiProbTable> {
    quasi_probability_capped(channel, rho, pi, DEFAULT_MAX_SPINS)
}

pub fn quasi_probability_capped(
    channel: &QuantumChannel,
    rho: &DensityMatrix,
    pi: &DensityMatrix,
    max_spins: usize,
) -> Result<QuasiProbTable> {
    check_size(rho.dim(), max_spins)?;
    let rho_next =
        DensityMatrix::new_unchecked(linalg::hermitian_part(&channel.apply(rho.matrix())));
    Ok(forward_table(
        channel,
        SpectralData::new(rho, &rho_next, pi)?,
    ))
}

/// Forward table for prescribed spectral data.
pub fn forward_table(channel: &QuantumChannel, spectral: SpectralData) -> QuasiProbTable {
    let d = spectral.dim();
    let t = transfer_tensor(channel, &spectral.basis);
    let (psi, phi) = (&spectral.psi, &spectral.phi);
    let mut values = vec![C64::new(0.0, 0.0); d.pow(6)];
    for mu in 0..d {
        let p = spectral.p[mu];
        if p < LOG_CUTOFF {
            continue;
        }
        for nu in 0..d {
            let base_mn = (mu * d + nu) * d.pow(4);
            for i in 0..d {
                for j in 0..d {
                    let a = psi[[i, mu]] * psi[[j, mu]].conj() * p;
                    for k in 0..d {
                        for l in 0..d {
                            let ijkl = ((i * d + j) * d + k) * d + l;
                            let b = phi[[k, nu]].conj() * phi[[l, nu]];
                            values[base_mn + ijkl] = a * t[ijkl] * b;
                        }
                    }
                }
            }
        }
    }
    QuasiProbTable {
        spectral,
        values,
        backward: false,
    }
}

/// Backward table: the reversal map applied to `N(ρ)`, with the roles of
/// the initial and final eigenbases exchanged,
/// `P_R = q_ν φ_ν(l) φ_ν(k)* ⟨j|R(|l⟩⟨k|)|i⟩ ψ_μ(j)* ψ_μ(i)`, stored at the
/// index of the forward transition it reverses.
pub fn reverse_quasi_probability(
    channel: &QuantumChannel,
    rho: &DensityMatrix,
    pi: &DensityMatrix,
    max_spins: usize,
) -> Result<QuasiProbTable> {
    check_size(rho.dim(), max_spins)?;
    let reversed = reversal_map(channel, pi)?;
    let rho_next =
        DensityMatrix::new_unchecked(linalg::hermitian_part(&channel.apply(rho.matrix())));
    Ok(backward_table(
        &reversed,
        SpectralData::new(rho, &rho_next, pi)?,
    ))
}

/// Backward table through an already reversed channel.
pub fn backward_table(reversed: &QuantumChannel, spectral: SpectralData) -> QuasiProbTable {
    let d = spectral.dim();
    // tr[((l d + k) d + j) d + i] = ⟨j|R(|l⟩⟨k|)|i⟩
    let tr = transfer_tensor(reversed, &spectral.basis);
    let (psi, phi) = (&spectral.psi, &spectral.phi);
    let mut values = vec![C64::new(0.0, 0.0); d.pow(6)];
    for nu in 0..d {
        let q = spectral.q[nu];
        if q < LOG_CUTOFF {
            continue;
        }
        for mu in 0..d {
            let base_mn = (mu * d + nu) * d.pow(4);
            for k in 0..d {
                for l in 0..d {
                    let a = phi[[l, nu]] * phi[[k, nu]].conj() * q;
                    for i in 0..d {
                        for j in 0..d {
                            let lkji = ((l * d + k) * d + j) * d + i;
                            let b = psi[[j, mu]].conj() * psi[[i, mu]];
                            values[base_mn + ((i * d + j) * d + k) * d + l] = a * tr[lkji] * b;
                        }
                    }
                }
            }
        }
    }
    QuasiProbTable {
        spectral,
        values,
        backward: true,
    }
}

/// Binned quasi-probability distribution of `σ`.
#[derive(Clone, Debug)]
pub struct QuasiProbDistribution {
    /// `(σ, weight)` sorted by `σ`.
    pub atoms: Vec<(f64, f64)>,
    pub bin_tolerance: f64,
    /// Sum of the negative atom weights.
    pub negativity: f64,
    /// Largest imaginary part of a merged weight.
    pub imaginary_residue: f64,
    /// Total weight of transitions whose `σ` is undefined.
    pub excluded_weight: f64,
    /// Smallest real part of an individual table entry.
    pub raw_min_real: f64,
}

impl QuasiProbDistribution {
    pub fn total_weight(&self) -> f64 {
        self.atoms.iter().map(|(_, w)| w).sum()
    }

    /// Smallest `σ` among atoms whose weight magnitude exceeds `threshold`.
    pub fn min_sigma(&self, threshold: f64) -> Option<f64> {
        self.atoms
            .iter()
            .filter(|(_, w)| w.abs() > threshold)
            .map(|(s, _)| *s)
            .next()
    }

    /// Weight at `σ` within the bin tolerance.
    pub fn weight_at(&self, sigma: f64) -> Option<f64> {
        let pos = self
            .atoms
            .partition_point(|(s, _)| *s < sigma - self.bin_tolerance);
        self.atoms
            .get(pos)
            .filter(|(s, _)| (s - sigma).abs() <= self.bin_tolerance)
            .map(|(_, w)| *w)
    }
}

/// Merges table entries whose `σ` agree within `bin_tol`.
pub fn bin_table(table: &QuasiProbTable, bin_tol: f64) -> Result<QuasiProbDistribution> {
    let mut raw: Vec<(f64, C64)> = Vec::new();
    let mut excluded = C64::new(0.0, 0.0);
    for (flat, &w) in table.values.iter().enumerate() {
        if w == C64::new(0.0, 0.0) {
            continue;
        }
        let idx = table.unravel(flat);
        if table.spectral.resolvable(idx) {
            raw.push((table.sigma(idx)?, w));
        } else {
            excluded += w;
        }
    }
    if excluded.norm() > 1e-12 {
        return Err(Error::Singular(format!(
            "weight {:e} sits on transitions with unresolvable eigenvalues",
            excluded.norm()
        )));
    }
    raw.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut atoms: Vec<(f64, C64)> = Vec::new();
    let mut anchor = f64::NEG_INFINITY;
    let mut acc = C64::new(0.0, 0.0);
    let mut moment = 0.0;
    let mut count = 0usize;
    for (s, w) in raw {
        if s - anchor >= bin_tol && count > 0 {
            atoms.push((moment / count as f64, acc));
            acc = C64::new(0.0, 0.0);
            moment = 0.0;
            count = 0;
        }
        if count == 0 {
            anchor = s;
        }
        acc += w;
        moment += s;
        count += 1;
    }
    if count > 0 {
        atoms.push((moment / count as f64, acc));
    }
    let imaginary_residue = atoms.iter().map(|(_, w)| w.im.abs()).fold(0.0, f64::max);
    let atoms: Vec<(f64, f64)> = atoms.into_iter().map(|(s, w)| (s, w.re)).collect();
    let negativity = atoms.iter().map(|(_, w)| w.min(0.0)).sum();
    Ok(QuasiProbDistribution {
        atoms,
        bin_tolerance: bin_tol,
        negativity,
        imaginary_residue,
        excluded_weight: excluded.norm(),
        raw_min_real: table.min_real(),
    })
}

pub fn distribution(
    channel: &QuantumChannel,
    rho: &DensityMatrix,
    pi: &DensityMatrix,
    bin_tol: f64,
) -> Result<QuasiProbDistribution> {
    bin_table(&quasi_probability(channel, rho, pi)?, bin_tol)
}

pub fn reverse_distribution(
    channel: &QuantumChannel,
    rho: &DensityMatrix,
    pi: &DensityMatrix,
    bin_tol: f64,
) -> Result<QuasiProbDistribution> {
    bin_table(
        &reverse_quasi_probability(channel, rho, pi, DEFAULT_MAX_SPINS)?,
        bin_tol,
    )
}

/// Outcome of the detailed fluctuation-theorem check.
#[derive(Clone, Debug, Default)]
pub struct CrooksReport {
    /// `(σ, |P(σ) − e^σ P_R(−σ)|)` for every matched atom.
    pub residuals: Vec<(f64, f64)>,
    /// Atoms of either distribution with weight above `1e-8` and no partner.
    pub unmatched: Vec<(f64, f64)>,
}

impl CrooksReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().map(|(_, r)| *r).fold(0.0, f64::max)
    }
}

pub fn check_crooks(
    forward: &QuasiProbDistribution,
    backward: &QuasiProbDistribution,
) -> CrooksReport {
    let mut report = CrooksReport::default();
    for &(s, w) in &forward.atoms {
        match backward.weight_at(-s) {
            Some(wr) if w.abs() > 1e-12 && wr.abs() > 1e-12 => {
                report.residuals.push((s, (w - s.exp() * wr).abs()));
            }
            Some(_) => {}
            None if w.abs() > 1e-8 => report.unmatched.push((s, w)),
            None => {}
        }
    }
    for &(s, w) in &backward.atoms {
        if w.abs() > 1e-8 && forward.weight_at(-s).is_none() {
            report.unmatched.push((-s, w));
        }
    }
    report
}

/// `⟨e^{−σ}⟩`
pub fn integral_ft(p: &QuasiProbDistribution) -> f64 {
    p.atoms.iter().map(|(s, w)| w * (-s).exp()).sum()
}

/// The default initial state for distributions: `ρ0` evolved under the
/// master equation for time `t`.
pub fn evolved_state(
    gen: &LindbladGenerator,
    rho0: &DensityMatrix,
    t: f64,
) -> Result<DensityMatrix> {
    let dt = (0.2 / gen.rate_bound()).min(1e-3);
    let traj = liouville::evolve_with(
        gen,
        rho0,
        &EvolveOptions::new(t, dt)
            .save_every(usize::MAX)
            .check_positivity(false),
    )?;
    Ok(traj.last().cloned().expect("non-empty trajectory"))
}

/// Everything the fluctuation-theorem checks report for one setting.
#[derive(Clone, Debug)]
pub struct FluctuationSummary {
    pub forward: QuasiProbDistribution,
    pub backward: QuasiProbDistribution,
    pub crooks: CrooksReport,
    pub integral_ft: f64,
}

pub fn fluctuation_summary(
    gen: &LindbladGenerator,
    rho: &DensityMatrix,
    dt_channel: f64,
    bin_tol: f64,
) -> Result<FluctuationSummary> {
    if gen.params().n_beta <= 0.0 {
        return Err(Error::ZeroTemperature(
            "the reversal map needs a full-rank steady state; n_β = 0 is not supported".into(),
        ));
    }
    let pi = liouville::steady_state(gen)?;
    let channel = channel_from_generator(gen, dt_channel)?;
    let forward = distribution(&channel, rho, &pi, bin_tol)?;
    let backward = reverse_distribution(&channel, rho, &pi, bin_tol)?;
    let crooks = check_crooks(&forward, &backward);
    let integral_ft = integral_ft(&forward);
    Ok(FluctuationSummary {
        forward,
        backward,
        crooks,
        integral_ft,
    })
}
