//! Driven n-photon Jaynes-Cummings model in the frame rotating at ω_L/n.
//!
//! All rates share one unit (the caller picks κ or J). The rotating-frame
//! Hamiltonian is
//!
//! ```text
//! H_I = δ_a a†a + δ_σ σ₊σ₋ + J (a†ⁿ σ₋ + σ₊ aⁿ) + Ω_L σ_x,   δ_σ = Δ + n δ_a
//! ```
//!
//! and the routines below provide the laser-dressed TLS basis, the
//! transition structure it induces, the resonance detunings for the
//! |0⟩|±⟩ ↔ |μn⟩|∓⟩ transitions, and the two effective super-Rabi frequencies
//! (Mollow regime and n-photon JC regime).

use ndarray::Array2;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{Operator, SpaceDims, StateVector, Tls};

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Photons exchanged per TLS transition.
    pub n: u32,
    /// n-photon coupling J.
    pub j: f64,
    /// Drive amplitude Ω_L.
    pub omega_l: f64,
    /// Δ⁽ⁿ⁾ = ω₀ − nω_a.
    pub delta_n: f64,
    /// δ_a⁽ⁿ⁾ = ω_a − ω_L/n.
    pub delta_a: f64,
    pub kappa: f64,
    pub gamma: f64,
    pub dims: SpaceDims,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidParameter("n must be at least 1".into()));
        }
        for (name, v) in [
            ("j", self.j),
            ("omega_l", self.omega_l),
            ("delta_n", self.delta_n),
            ("delta_a", self.delta_a),
            ("kappa", self.kappa),
            ("gamma", self.gamma),
        ] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} is not finite")));
            }
        }
        if self.kappa < 0.0 || self.gamma < 0.0 {
            return Err(Error::InvalidParameter("decay rates must be non-negative".into()));
        }
        Ok(())
    }

    /// δ_σ = Δ⁽ⁿ⁾ + n δ_a⁽ⁿ⁾.
    pub fn delta_sigma(&self) -> f64 {
        self.delta_n + self.n as f64 * self.delta_a
    }

    pub fn with_delta_a(mut self, delta_a: f64) -> Self {
        self.delta_a = delta_a;
        self
    }

    fn require_coupling_fits(&self) -> Result<()> {
        self.validate()?;
        if self.dims.n_max() < self.n as usize {
            return Err(Error::InvalidDims(format!(
                "n_max = {} is below n = {}; the coupling term vanishes identically",
                self.dims.n_max(),
                self.n
            )));
        }
        Ok(())
    }
}

/// `k!` in floating point.
pub fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `√((m+n)!/m!)`, the aⁿ ladder factor from |m+n⟩ down to |m⟩.
pub fn ladder_factor(m: usize, n: u32) -> f64 {
    ((m + 1)..=(m + n as usize)).map(|k| k as f64).product::<f64>().sqrt()
}

/// Detunings in the rotating frame from lab-frame frequencies.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct FrameDetunings {
    pub delta_a: f64,
    pub delta_sigma: f64,
    pub delta_n: f64,
}

pub fn frame_map(omega_a: f64, omega_0: f64, omega_drive: f64, n: u32) -> Result<FrameDetunings> {
    if n < 1 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let nf = n as f64;
    let delta_a = omega_a - omega_drive / nf;
    let delta_n = omega_0 - nf * omega_a;
    // Built from the other two so the frame identity holds to rounding.
    let delta_sigma = delta_n + nf * delta_a;
    Ok(FrameDetunings { delta_a, delta_sigma, delta_n })
}

fn build(p: &ModelParams, with_coupling: bool, with_drive: bool) -> Result<Operator> {
    p.require_coupling_fits()?;
    let dims = p.dims;
    let d = dims.total_dim();
    let ds = p.delta_sigma();
    let mut h = Array2::<C64>::zeros((d, d));
    for m in 0..=dims.n_max() {
        let g = dims.index(m, Tls::Ground);
        let e = dims.index(m, Tls::Excited);
        h[[g, g]] = C64::new(m as f64 * p.delta_a, 0.0);
        h[[e, e]] = C64::new(m as f64 * p.delta_a + ds, 0.0);
        if with_drive {
            h[[g, e]] = C64::new(p.omega_l, 0.0);
            h[[e, g]] = C64::new(p.omega_l, 0.0);
        }
    }
    if with_coupling {
        let n = p.n as usize;
        for m in 0..=(dims.n_max() - n) {
            // a†ⁿσ₋ |m,e⟩ = √((m+n)!/m!) |m+n,g⟩
            let v = C64::new(p.j * ladder_factor(m, p.n), 0.0);
            let up = dims.index(m + n, Tls::Ground);
            let down = dims.index(m, Tls::Excited);
            h[[up, down]] = v;
            h[[down, up]] = v;
        }
    }
    Operator::from_matrix(dims, h)
}

/// Full rotating-frame Hamiltonian H_I.
pub fn build_h_i(p: &ModelParams) -> Result<Operator> {
    build(p, true, true)
}

/// H₀: H_I without the n-photon coupling.
pub fn build_h0(p: &ModelParams) -> Result<Operator> {
    build(p, false, true)
}

/// H̃₀: H_I without the drive.
pub fn build_h_jc(p: &ModelParams) -> Result<Operator> {
    build(p, true, false)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::Plus => "+",
            Branch::Minus => "-",
        }
    }

    fn idx(self) -> usize {
        match self {
            Branch::Plus => 0,
            Branch::Minus => 1,
        }
    }
}

/// Eigensystem of the driven TLS `δ_σ σ₊σ₋ + Ω_L σ_x`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct DressedData {
    pub delta_sigma: f64,
    pub omega: f64,
    pub e_plus: f64,
    pub e_minus: f64,
    pub c_plus: f64,
    pub c_minus: f64,
}

impl DressedData {
    pub fn energy(&self, b: Branch) -> f64 {
        match b {
            Branch::Plus => self.e_plus,
            Branch::Minus => self.e_minus,
        }
    }

    /// TLS components `[⟨g|b⟩, ⟨e|b⟩]` of |±⟩ = c±|e⟩ ± c∓|g⟩.
    pub fn tls_vector(&self, b: Branch) -> [f64; 2] {
        match b {
            Branch::Plus => [self.c_minus, self.c_plus],
            Branch::Minus => [-self.c_plus, self.c_minus],
        }
    }

    /// |m⟩|±⟩ on the given truncation.
    pub fn state(&self, dims: SpaceDims, m: usize, b: Branch) -> Result<StateVector> {
        let [g, e] = self.tls_vector(b);
        StateVector::product(dims, m, [C64::new(g, 0.0), C64::new(e, 0.0)])
    }
}

/// `(c₊², c₋²)` without cancellation for either sign of `delta`.
fn mixing_weights(delta: f64, omega: f64, coupling_sq: f64) -> (f64, f64) {
    // (Ω ± δ)/(2Ω), with the cancelling side rewritten as 4g²/(2Ω(Ω ∓ δ)).
    if omega == 0.0 {
        return (0.5, 0.5);
    }
    if delta >= 0.0 {
        let plus = (omega + delta) / (2.0 * omega);
        let minus = 4.0 * coupling_sq / (2.0 * omega * (omega + delta));
        (plus, minus)
    } else {
        let plus = 4.0 * coupling_sq / (2.0 * omega * (omega - delta));
        let minus = (omega - delta) / (2.0 * omega);
        (plus, minus)
    }
}

pub fn dressed(p: &ModelParams) -> Result<DressedData> {
    p.validate()?;
    if p.omega_l == 0.0 {
        return Err(Error::DressedUndefined);
    }
    let ds = p.delta_sigma();
    let omega = (ds * ds + 4.0 * p.omega_l * p.omega_l).sqrt();
    let (cp2, cm2) = mixing_weights(ds, omega, p.omega_l * p.omega_l);
    Ok(DressedData {
        delta_sigma: ds,
        omega,
        e_plus: 0.5 * (ds + omega),
        e_minus: 0.5 * (ds - omega),
        c_plus: cp2.sqrt(),
        c_minus: cm2.sqrt(),
    })
}

/// Matrix elements of the n-photon coupling in the dressed product basis.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransitionTable {
    /// `amplitudes[s][r] = ⟨s|σ₋|r⟩`, index 0 = +, 1 = −.
    pub amplitudes: [[f64; 2]; 2],
    /// `J √((m+n)!/m!)` for m = 0..=n_max−n.
    pub couplings: Vec<f64>,
    /// Phase rate `E_s − E_r + n δ_a` of the |m⟩|r⟩ → |m+n⟩|s⟩ term.
    pub detunings: [[f64; 2]; 2],
}

impl TransitionTable {
    pub fn amplitude(&self, s: Branch, r: Branch) -> f64 {
        self.amplitudes[s.idx()][r.idx()]
    }

    pub fn detuning(&self, s: Branch, r: Branch) -> f64 {
        self.detunings[s.idx()][r.idx()]
    }
}

pub fn transition_table(p: &ModelParams) -> Result<TransitionTable> {
    let dd = dressed(p)?;
    let (cp, cm) = (dd.c_plus, dd.c_minus);
    let amplitudes = [[cp * cm, cm * cm], [-cp * cp, -cp * cm]];
    let nda = p.n as f64 * p.delta_a;
    let e = [dd.e_plus, dd.e_minus];
    let mut detunings = [[0.0; 2]; 2];
    for s in 0..2 {
        for r in 0..2 {
            detunings[s][r] = e[s] - e[r] + nda;
        }
    }
    let top = p.dims.n_max().saturating_sub(p.n as usize);
    let couplings = if p.dims.n_max() >= p.n as usize {
        (0..=top).map(|m| p.j * ladder_factor(m, p.n)).collect()
    } else {
        Vec::new()
    };
    Ok(TransitionTable { amplitudes, couplings, detunings })
}

/// δ_a satisfying `n δ_a = ±Ω` for the |0⟩|±⟩ ↔ |n⟩|∓⟩ transitions.
pub fn resonance_detuning(p: &ModelParams) -> Result<f64> {
    resonance_detuning_for(p.n, p.delta_n, p.omega_l)
}

pub fn resonance_detuning_for(n: u32, delta_n: f64, omega_l: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if delta_n == 0.0 {
        return Err(Error::NoResonance("Δ⁽ⁿ⁾ = 0".into()));
    }
    Ok(-(delta_n * delta_n + 4.0 * omega_l * omega_l) / (2.0 * n as f64 * delta_n))
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

/// δ_{a,μ} for the |0⟩|±⟩ ↔ |μn⟩|∓⟩ transitions (`Sign::Plus` is the
/// |0⟩|+⟩ ↔ |μn⟩|−⟩ branch when Δ < 0).
pub fn resonance_detuning_higher(p: &ModelParams, mu: u32, sign: Sign) -> Result<f64> {
    resonance_detuning_higher_for(p.n, p.delta_n, p.omega_l, mu, sign)
}

pub fn resonance_detuning_higher_for(
    n: u32,
    delta_n: f64,
    omega_l: f64,
    mu: u32,
    sign: Sign,
) -> Result<f64> {
    if n < 1 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if mu < 2 {
        return Err(Error::InvalidParameter(format!("μ = {mu}; higher resonances need μ ≥ 2")));
    }
    let m2 = (mu as f64).powi(2);
    let root = (m2 * delta_n * delta_n + 4.0 * (m2 - 1.0) * omega_l * omega_l).sqrt();
    let s = match sign {
        Sign::Plus => 1.0,
        Sign::Minus => -1.0,
    };
    Ok((delta_n + s * root) / (n as f64 * (m2 - 1.0)))
}

/// Which dressed transition the single-bundle resonance addresses.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ResonantTransition {
    /// |0⟩|+⟩ ↔ |n⟩|−⟩, `n δ_a − Ω = 0` (Δ < 0).
    PlusToMinus,
    /// |0⟩|−⟩ ↔ |n⟩|+⟩, `n δ_a + Ω = 0` (Δ > 0).
    MinusToPlus,
}

impl ResonantTransition {
    /// (initial branch at |0⟩, target branch at |n⟩).
    pub fn branches(self) -> (Branch, Branch) {
        match self {
            ResonantTransition::PlusToMinus => (Branch::Plus, Branch::Minus),
            ResonantTransition::MinusToPlus => (Branch::Minus, Branch::Plus),
        }
    }
}

pub fn resonant_transition(p: &ModelParams) -> Result<ResonantTransition> {
    if p.delta_n < 0.0 {
        Ok(ResonantTransition::PlusToMinus)
    } else if p.delta_n > 0.0 {
        Ok(ResonantTransition::MinusToPlus)
    } else {
        Err(Error::NoResonance("Δ⁽ⁿ⁾ = 0".into()))
    }
}

/// Two-level model of the {|0⟩|+⟩, |n⟩|−⟩} subspace after adiabatic
/// elimination. Ω_eff is signed; oscillation frequencies use |Ω_eff|.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct EffectiveTwoLevel {
    pub eps1: f64,
    pub eps2: f64,
    pub omega_eff: f64,
}

impl EffectiveTwoLevel {
    /// The 2×2 matrix in the basis (|0⟩|+⟩, |n⟩|−⟩).
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[self.eps1, self.omega_eff], [self.omega_eff, self.eps2]]
    }
}

pub fn omega_eff_mollow(p: &ModelParams) -> Result<EffectiveTwoLevel> {
    let dd = dressed(p)?;
    let nf = factorial(p.n);
    let (cp2, cm2) = (dd.c_plus * dd.c_plus, dd.c_minus * dd.c_minus);
    let (ep, em) = (dd.e_plus, dd.e_minus);
    let x = p.n as f64 * p.delta_a + ep;
    let j2 = p.j * p.j;
    let den = nf * j2 * cm2 * cm2 - x * em;
    let scale = (nf * j2 * cm2 * cm2).abs() + (x * em).abs();
    if den.abs() <= 1e-13 * scale || den == 0.0 {
        return Err(Error::Singular(format!("n!J²c₋⁴ − X·E₋ = {den:e}")));
    }
    let omega_eff = nf.sqrt() * p.j * cp2 * x * em / den;
    let eps1 = (nf * j2 * cm2 * (cm2 * ep + cp2 * em) - x * ep * em) / den;
    let eps2 = ((p.n as f64 * p.delta_a + em) * den + nf * j2 * cp2 * cm2 * x) / den;
    Ok(EffectiveTwoLevel { eps1, eps2, omega_eff })
}

/// One coupled 2×2 block {|g,m⟩, |e,m−n⟩} of H̃₀.
#[derive(Copy, Clone, Debug, PartialEq, Serialize)]
pub struct JcDoublet {
    pub m: usize,
    pub e_plus: f64,
    pub e_minus: f64,
    pub c_plus: f64,
    pub c_minus: f64,
    pub omega_m: f64,
}

impl JcDoublet {
    /// `[⟨g,m|ε⟩, ⟨e,m−n|ε⟩]` with |ε_{m,±}⟩ = C∓|g,m⟩ ± C±|e,m−n⟩.
    pub fn components(&self, b: Branch) -> [f64; 2] {
        match b {
            Branch::Plus => [self.c_minus, self.c_plus],
            Branch::Minus => [self.c_plus, -self.c_minus],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct JcEigensystem {
    /// Coupled doublets for m = n..=n_max.
    pub doublets: Vec<JcDoublet>,
    /// Bare |g,m⟩ energies m·δ_a for m < n.
    pub bare_ground: Vec<(usize, f64)>,
    /// |e,m⟩ levels whose partner |g,m+n⟩ lies above the cutoff.
    pub uncoupled_excited: Vec<(usize, f64)>,
}

impl JcEigensystem {
    pub fn energies(&self) -> Vec<f64> {
        let mut all: Vec<f64> = self
            .doublets
            .iter()
            .flat_map(|d| [d.e_plus, d.e_minus])
            .chain(self.bare_ground.iter().map(|x| x.1))
            .chain(self.uncoupled_excited.iter().map(|x| x.1))
            .collect();
        all.sort_by(|a, b| a.total_cmp(b));
        all
    }

    /// Eigenvector of a doublet embedded in the truncated space.
    pub fn state(&self, dims: SpaceDims, n: u32, doublet: &JcDoublet, b: Branch) -> Result<StateVector> {
        let [g, e] = doublet.components(b);
        let mut amps = ndarray::Array1::<C64>::zeros(dims.total_dim());
        amps[dims.index(doublet.m, Tls::Ground)] = C64::new(g, 0.0);
        amps[dims.index(doublet.m - n as usize, Tls::Excited)] = C64::new(e, 0.0);
        StateVector::from_amplitudes(dims, amps)
    }
}

pub fn jc_eigensystem(p: &ModelParams) -> Result<JcEigensystem> {
    p.require_coupling_fits()?;
    let n = p.n as usize;
    let nmax = p.dims.n_max();
    let ds = p.delta_sigma();
    let delta = p.delta_n;
    let doublets = (n..=nmax)
        .map(|m| {
            // J² m!/(m−n)!
            let g2 = p.j * p.j * ladder_factor(m - n, p.n).powi(2);
            let omega_m = (delta * delta + 4.0 * g2).sqrt();
            let (cp2, cm2) = mixing_weights(delta, omega_m, g2);
            let centre = (m as f64 - 0.5 * p.n as f64) * p.delta_a + 0.5 * ds;
            JcDoublet {
                m,
                e_plus: centre + 0.5 * omega_m,
                e_minus: centre - 0.5 * omega_m,
                c_plus: cp2.sqrt(),
                c_minus: cm2.sqrt(),
                omega_m,
            }
        })
        .collect();
    let bare_ground = (0..n).map(|m| (m, m as f64 * p.delta_a)).collect();
    let uncoupled_excited = ((nmax - n + 1)..=nmax)
        .map(|m| (m, m as f64 * p.delta_a + ds))
        .collect();
    Ok(JcEigensystem { doublets, bare_ground, uncoupled_excited })
}

/// Effective super-Rabi frequency |g,0⟩ ↔ |e,n⟩ in the JC regime (J ≫ Ω_L).
pub fn omega_eff_jc(p: &ModelParams) -> Result<f64> {
    p.validate()?;
    let nf = factorial(p.n);
    let den = p.n as f64 * p.delta_a * p.delta_sigma() - nf * p.j * p.j;
    let scale = (p.n as f64 * p.delta_a * p.delta_sigma()).abs() + nf * p.j * p.j;
    if den == 0.0 || den.abs() <= 1e-13 * scale {
        return Err(Error::Singular(format!("nδ_aδ_σ − n!J² = {den:e}")));
    }
    Ok(p.j * nf.sqrt() * p.omega_l * p.omega_l / den)
}

/// Splitting of the two H_I eigenstates that carry most of the weight of
/// |0⟩|+⟩ and |n⟩|−⟩. At resonance this is 2|Ω_eff| in the Mollow regime.
pub fn super_rabi_splitting(p: &ModelParams) -> Result<f64> {
    let h = build_h_i(p)?;
    let dd = dressed(p)?;
    let (from, to) = resonant_transition(p)?.branches();
    let a = dd.state(p.dims, 0, from)?;
    let b = dd.state(p.dims, p.n as usize, to)?;
    let (w, v) = h.eigh()?;
    let mut weights: Vec<(f64, usize)> = (0..w.len())
        .map(|k| {
            let col = v.column(k);
            let oa: C64 = a.amplitudes().iter().zip(col.iter()).map(|(x, y)| x.conj() * y).sum();
            let ob: C64 = b.amplitudes().iter().zip(col.iter()).map(|(x, y)| x.conj() * y).sum();
            (oa.norm_sqr() + ob.norm_sqr(), k)
        })
        .collect();
    weights.sort_by(|x, y| y.0.total_cmp(&x.0));
    Ok((w[weights[0].1] - w[weights[1].1]).abs())
}
