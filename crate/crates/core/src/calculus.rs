//! Closed-form fidelity calculus for entanglement swapping and BBPSSW
//! purification of Werner pairs.
//!
//! Everything in this module is a pure function of its arguments: the swap
//! and purification maps, the asymmetry tolerance `delta(F)` together with
//! its universal maximum, the no-purification fidelity ceiling of a repeater
//! chain, and the feasibility estimate used by the delta-informed policy.
//! No randomness, no simulation state.

use serde::Serialize;

/// Width of the band around the gain boundary inside which purification is
/// declined: breaking even still consumes a pair.
pub const BOUNDARY_EPS: f64 = 1e-9;

/// Input rejected by a closed-form expression's domain.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DomainError {
    #[error("{name} = {value} outside {domain}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },
    #[error("chain fidelity limit needs at least one link")]
    EmptyChain,
    #[error("gain grid resolution must be at least 2, got {0}")]
    GridResolution(usize),
}

/// Overlap of a two-qubit state with the target Bell state.
///
/// Always in `[0, 1]`. A Werner pair is entangled (and useful for swapping
/// or purification) only above `0.5`; operations with that stricter domain
/// enforce it themselves.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Fidelity(f64);

impl Fidelity {
    pub fn new(value: f64) -> Result<Self, DomainError> {
        if (0.0..=1.0).contains(&value) {
            Ok(Fidelity(value))
        } else {
            Err(DomainError::OutOfRange {
                name: "fidelity",
                value,
                domain: "[0, 1]",
            })
        }
    }

    /// Construct from a value already known to be in range (formula outputs,
    /// validated configuration). Clamps float spill beyond the unit interval.
    pub(crate) fn new_unchecked(value: f64) -> Self {
        debug_assert!(
            (-1e-9..=1.0 + 1e-9).contains(&value),
            "fidelity out of range: {value}"
        );
        Fidelity(value.clamp(0.0, 1.0))
    }

    pub fn get(self) -> f64 {
        self.0
    }

    /// True for an entangled Werner pair, `F > 0.5`.
    pub fn is_entangled(self) -> bool {
        self.0 > 0.5
    }
}

impl std::fmt::Display for Fidelity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Werner mixing parameter `w`, related to fidelity by `F = (3w + 1) / 4`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct WernerParam(f64);

impl WernerParam {
    pub fn new(value: f64) -> Result<Self, DomainError> {
        if (0.0..=1.0).contains(&value) {
            Ok(WernerParam(value))
        } else {
            Err(DomainError::OutOfRange {
                name: "werner parameter",
                value,
                domain: "[0, 1]",
            })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Hardware figures entering the heralded generation probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HardwareParams {
    /// Photon detector efficiency, in `[0, 1]`.
    pub detector_efficiency: f64,
    /// Fiber-to-memory coupling efficiency, in `[0, 1]`.
    pub coupling_efficiency: f64,
    /// Node separation in km.
    pub length_km: f64,
    /// Fiber attenuation length in km (about 22 for silica at 1550 nm).
    pub attenuation_km: f64,
}

impl HardwareParams {
    pub const DEFAULT_ATTENUATION_KM: f64 = 22.0;

    pub fn new(
        detector_efficiency: f64,
        coupling_efficiency: f64,
        length_km: f64,
    ) -> Result<Self, DomainError> {
        let hw = HardwareParams {
            detector_efficiency,
            coupling_efficiency,
            length_km,
            attenuation_km: Self::DEFAULT_ATTENUATION_KM,
        };
        hw.validate()?;
        Ok(hw)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let unit = |name, value: f64| {
            if (0.0..=1.0).contains(&value) {
                Ok(())
            } else {
                Err(DomainError::OutOfRange {
                    name,
                    value,
                    domain: "[0, 1]",
                })
            }
        };
        unit("detector efficiency", self.detector_efficiency)?;
        unit("coupling efficiency", self.coupling_efficiency)?;
        if self.length_km < 0.0 {
            return Err(DomainError::OutOfRange {
                name: "link length",
                value: self.length_km,
                domain: "[0, inf)",
            });
        }
        if self.attenuation_km <= 0.0 {
            return Err(DomainError::OutOfRange {
                name: "attenuation length",
                value: self.attenuation_km,
                domain: "(0, inf)",
            });
        }
        Ok(())
    }
}

/// Which case of the piecewise asymmetry tolerance applies: the reference
/// fidelity is the better (`AsSuperior`) or the worse (`AsInferior`) of the
/// two purification inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DeltaRole {
    AsSuperior,
    AsInferior,
}

/// `F = (3w + 1) / 4`.
pub fn fidelity_from_werner(w: WernerParam) -> Fidelity {
    Fidelity::new_unchecked((3.0 * w.get() + 1.0) / 4.0)
}

/// Inverse of [`fidelity_from_werner`]; requires `F >= 0.25`.
pub fn werner_from_fidelity(f: Fidelity) -> Result<WernerParam, DomainError> {
    WernerParam::new((4.0 * f.get() - 1.0) / 3.0)
}

/// Probability of heralding a link-level pair in one clock cycle under
/// mid-point heralding: `(1/2) eta_d^2 eta_c^2 exp(-L / L_att)`.
pub fn generation_probability(hw: &HardwareParams) -> f64 {
    0.5 * hw.detector_efficiency.powi(2)
        * hw.coupling_efficiency.powi(2)
        * (-hw.length_km / hw.attenuation_km).exp()
}

/// Fidelity after a Bell-state measurement merges two adjacent pairs.
///
/// Strictly below the worse input whenever both inputs lie in `(0.5, 1)`.
pub fn swap_fidelity(f_ab: Fidelity, f_bc: Fidelity) -> Fidelity {
    let a = (4.0 * f_ab.get() - 1.0) / 3.0;
    let b = (4.0 * f_bc.get() - 1.0) / 3.0;
    Fidelity::new_unchecked(0.25 + 0.75 * a * b)
}

/// Weakest partner fidelity that keeps a swap output entangled
/// (`swap_fidelity == 0.5` exactly at the bound). Requires `f_ab > 0.25`.
pub fn swap_partner_lower_bound(f_ab: Fidelity) -> Result<Fidelity, DomainError> {
    if f_ab.get() <= 0.25 {
        return Err(DomainError::OutOfRange {
            name: "f_ab",
            value: f_ab.get(),
            domain: "(0.25, 1]",
        });
    }
    Ok(Fidelity::new_unchecked(
        0.25 * (3.0 / (4.0 * f_ab.get() - 1.0) + 1.0),
    ))
}

/// BBPSSW success probability for Werner inputs.
///
/// Bounded below by 1/3 on the unit square, so the purified output is always
/// defined.
pub fn purification_success_prob(f1: Fidelity, f2: Fidelity) -> f64 {
    let (f1, f2) = (f1.get(), f2.get());
    // grouped so the expression is bit-for-bit symmetric in f1 and f2
    (8.0 / 9.0) * (f1 * f2) - (2.0 / 9.0) * (f1 + f2) + 5.0 / 9.0
}

/// BBPSSW output fidelity for Werner inputs. Symmetric in its arguments.
pub fn purified_fidelity(f1: Fidelity, f2: Fidelity) -> Fidelity {
    let p = purification_success_prob(f1, f2);
    debug_assert!(p > 0.0);
    let (f1, f2) = (f1.get(), f2.get());
    Fidelity::new_unchecked((f1 * f2 + ((1.0 - f1) * (1.0 - f2)) / 9.0) / p)
}

/// Net improvement of a purification attempt over the best available input:
/// `F_pur - max(F1, F2)`. Negative when asymmetry makes the attempt
/// counterproductive.
pub fn purification_gain(f1: Fidelity, f2: Fidelity) -> f64 {
    purified_fidelity(f1, f2).get() - f1.get().max(f2.get())
}

fn require_entangled(name: &'static str, f: Fidelity) -> Result<f64, DomainError> {
    let v = f.get();
    if v > 0.5 && v <= 1.0 {
        Ok(v)
    } else {
        Err(DomainError::OutOfRange {
            name,
            value: v,
            domain: "(0.5, 1]",
        })
    }
}

/// Minimum partner fidelity for which purifying against `f1` still beats
/// `f1` itself. The denominator has no roots inside `(0.5, 1]`.
pub fn f2_min(f1: Fidelity) -> Result<Fidelity, DomainError> {
    let f = require_entangled("f1", f1)?;
    let num = 2.0 * f * f - 6.0 * f + 1.0;
    let den = 8.0 * f * f - 12.0 * f + 1.0;
    Ok(Fidelity::new_unchecked(num / den))
}

/// Largest superior fidelity a pair at `f2` can still improve. The
/// discriminant `28 f2^2 - 26 f2 + 7` is positive everywhere.
pub fn f1_max(f2: Fidelity) -> Result<Fidelity, DomainError> {
    let f = require_entangled("f2", f2)?;
    let root = (28.0 * f * f - 26.0 * f + 7.0).sqrt();
    Ok(Fidelity::new_unchecked(
        (6.0 * f - 3.0 + root) / (2.0 * (4.0 * f - 1.0)),
    ))
}

/// State-dependent asymmetry tolerance.
///
/// Downward tolerance `F - f2_min(F)` when `F` is the better input,
/// upward tolerance `f1_max(F) - F` when it is the worse one. The two
/// directions generally differ.
pub fn delta_tolerance(f: Fidelity, role: DeltaRole) -> Result<f64, DomainError> {
    let delta = match role {
        DeltaRole::AsSuperior => f.get() - f2_min(f)?.get(),
        DeltaRole::AsInferior => f1_max(f)?.get() - f.get(),
    };
    Ok(delta.max(0.0))
}

/// Purification decision: purify iff the observed asymmetry `|F1 - F2|`
/// falls below the superior input's tolerance, with a [`BOUNDARY_EPS`] band
/// treated as "do not purify". Agrees with `purification_gain > 0` away
/// from the boundary.
pub fn should_purify(f1: Fidelity, f2: Fidelity) -> Result<bool, DomainError> {
    require_entangled("f1", f1)?;
    require_entangled("f2", f2)?;
    let superior = if f1.get() >= f2.get() { f1 } else { f2 };
    let delta = delta_tolerance(superior, DeltaRole::AsSuperior)?;
    Ok((f1.get() - f2.get()).abs() < delta - BOUNDARY_EPS)
}

/// Location and value of the universal asymmetry-tolerance maximum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeltaMax {
    pub f1_star: Fidelity,
    pub f2_star: Fidelity,
    pub delta_max: f64,
}

/// Maximize the superior-referenced tolerance over `(0.5, 1)`.
///
/// A 1,000-point scan brackets the maximum, golden-section refinement
/// narrows it to an interval of 1e-9. Deterministic; the stationarity
/// condition is a cubic with spurious roots, so bracketing is used instead
/// of root finding.
pub fn find_delta_max() -> DeltaMax {
    let tolerance_at = |f: f64| {
        let fid = Fidelity::new_unchecked(f);
        fid.get() - f2_min(fid).expect("scan stays inside (0.5, 1)").get()
    };

    const SCAN_POINTS: usize = 1_000;
    let mut best_i = 1;
    let mut best = f64::NEG_INFINITY;
    let grid = |i: usize| 0.5 + 0.5 * i as f64 / (SCAN_POINTS + 1) as f64;
    for i in 1..=SCAN_POINTS {
        let d = tolerance_at(grid(i));
        if d > best {
            best = d;
            best_i = i;
        }
    }
    let lo = grid(best_i.saturating_sub(1).max(1));
    let hi = grid((best_i + 1).min(SCAN_POINTS));

    let f1_star = golden_section_max(lo, hi, 1e-9, tolerance_at);
    let f1 = Fidelity::new_unchecked(f1_star);
    let f2 = f2_min(f1).expect("maximizer lies inside (0.5, 1)");
    DeltaMax {
        f1_star: f1,
        f2_star: f2,
        delta_max: tolerance_at(f1_star),
    }
}

/// Golden-section search for the maximum of a unimodal function on `[a, b]`,
/// stopping when the bracket is narrower than `tol`.
fn golden_section_max(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> f64 {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INVPHI * (b - a);
    let mut d = a + INVPHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INVPHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INVPHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Optimistic end-to-end ceiling of swapping alone: the swap map folded over
/// every link at its herald fidelity, with no memory decay. A single link
/// returns its own fidelity. Each input must be at least 0.25.
pub fn chain_fidelity_limit(link_fidelities: &[Fidelity]) -> Result<Fidelity, DomainError> {
    if link_fidelities.is_empty() {
        return Err(DomainError::EmptyChain);
    }
    let mut product = 1.0;
    for &f in link_fidelities {
        if f.get() < 0.25 {
            return Err(DomainError::OutOfRange {
                name: "link fidelity",
                value: f.get(),
                domain: "[0.25, 1]",
            });
        }
        product *= (4.0 * f.get() - 1.0) / 3.0;
    }
    Ok(Fidelity::new_unchecked(0.25 + 0.75 * product))
}

/// Outcome of the pre-generation feasibility screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Feasibility {
    /// Best purified fidelity reachable with `f1` as one input.
    pub f_hat: Fidelity,
    /// Whether that best case clears the requested threshold.
    pub feasible: bool,
}

/// Best purified fidelity achievable with `f1` as one input, before the
/// second pair exists.
///
/// Case A takes the symmetric partner `F2 = F1`; case B takes the partner at
/// the upper edge of the tolerance window, `F2 = min(F1 + delta(F1), 1)`
/// with the superior-referenced tolerance. The estimate is the larger of
/// the two. Requires `f1 > 0.5`.
pub fn purification_feasibility(f1: Fidelity, f_th: Fidelity) -> Result<Feasibility, DomainError> {
    require_entangled("f1", f1)?;
    let delta = delta_tolerance(f1, DeltaRole::AsSuperior)?;
    let partner = Fidelity::new_unchecked((f1.get() + delta).min(1.0));
    let symmetric = purified_fidelity(f1, f1);
    let stretched = purified_fidelity(partner, f1);
    let f_hat = if stretched.get() > symmetric.get() {
        stretched
    } else {
        symmetric
    };
    Ok(Feasibility {
        f_hat,
        feasible: f_hat.get() >= f_th.get(),
    })
}

/// Purification gain sampled on a square grid over `[0.5, 1]^2`.
///
/// Row index selects `f1`, column index selects `f2`; both axes run from
/// 0.5 to 1 inclusive in `resolution` equal steps. Symmetric under
/// transpose.
#[derive(Debug, Clone, PartialEq)]
pub struct GainGrid {
    resolution: usize,
    values: Vec<f64>,
}

impl GainGrid {
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Fidelity at grid index `i` on either axis.
    pub fn axis_value(&self, i: usize) -> f64 {
        0.5 + 0.5 * i as f64 / (self.resolution - 1) as f64
    }

    /// Gain at row `i` (`f1`), column `j` (`f2`).
    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.resolution + j]
    }

    /// Row-major gain values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Evaluate [`purification_gain`] on a `resolution x resolution` grid over
/// `[0.5, 1]^2`. Resolution must be at least 2.
pub fn gain_grid(resolution: usize) -> Result<GainGrid, DomainError> {
    if resolution < 2 {
        return Err(DomainError::GridResolution(resolution));
    }
    let axis = |i: usize| 0.5 + 0.5 * i as f64 / (resolution - 1) as f64;
    let mut values = Vec::with_capacity(resolution * resolution);
    for i in 0..resolution {
        let f1 = Fidelity::new_unchecked(axis(i));
        for j in 0..resolution {
            let f2 = Fidelity::new_unchecked(axis(j));
            values.push(purification_gain(f1, f2));
        }
    }
    Ok(GainGrid { resolution, values })
}
