//! Centralized numerical tolerances with their rationale.
//!
//! Every threshold used by a check, a report verdict or the acceptance
//! harness is defined here. No check in the crate compares against a bare
//! literal.
//!
//! # Categories
//!
//! | Category | Basis | Example |
//! |----------|-------|---------|
//! | Machine precision | IEEE 754 f64, FFT round-off | 1e-12 for idempotent projections |
//! | Spectral identity | round-off amplified by wavenumber multipliers | 1e-10 for div∘ℛ |
//! | Quadrature | resolution of compactly supported profiles | 1e-6 grid mean of W⊗W |
//! | Time stencil | 4th-order finite differences | 1e-7 for ∂ₜ-bearing identities |
//! | Statistical | Monte-Carlo standard errors | 3σ windows |

// ═══════════════════════════════════════════════════════════════════
// Machine precision
// ═══════════════════════════════════════════════════════════════════

/// Operations that are exact up to a handful of FFT round trips:
/// projections, semigroup composition, Parseval.
///
/// A 3-D FFT of size 64³ accumulates O(log n · ε) relative error;
/// 1e-12 leaves two digits of head-room over ~2e-14 observed.
pub const SPECTRAL_EXACT: f64 = 1e-12;

/// Identities whose evaluation multiplies by |k| up to n/2 and divides
/// by |k|² (inverse divergence, divergence of the output): the condition
/// number of the multiplier is O(n), so we allow two further digits.
pub const SPECTRAL_IDENTITY: f64 = 1e-10;

/// Linearity of the coefficient map c_ξ of the geometric lemma; a single
/// 6×6 matrix-vector product, so close to ε.
pub const LINEAR_MAP_EXACT: f64 = 1e-14;

/// Reconstruction R = Σ γ_ξ² ξ⊗ξ; square root then square adds a few ulp.
pub const GEOMETRY_RECONSTRUCTION: f64 = 1e-12;

// ═══════════════════════════════════════════════════════════════════
// Jets and profiles
// ═══════════════════════════════════════════════════════════════════

/// Normalisations ∫φ² = 4π², ∫ψ² = 2π after explicit rescaling; the
/// residual is quadrature round-off of high-order Gauss–Legendre rules.
pub const PROFILE_NORMALIZATION: f64 = 1e-10;

/// Spatial average of W⊗W on a uniform grid versus ξ⊗ξ. Trapezoidal
/// quadrature of a periodic function is exact up to aliasing of the
/// lattice multiples of n, so the error is the tail of the profile spectrum.
pub const JET_MEAN_QUADRATURE: f64 = 1e-6;

/// Linear jet identities (div(W+W^c)=0, curl curl V = W+W^c) checked by
/// spectral differentiation in the jet's natural periodic cell.
pub const JET_LINEAR_IDENTITY: f64 = 1e-10;

/// div(W⊗W) = μ⁻¹∂ₜ(φ²ψ²ξ): spectral derivative of ψ² against its
/// analytic derivative.
pub const JET_QUADRATIC_IDENTITY: f64 = 1e-8;

/// Finite-difference check φ = −ΔΦ on a fine radial stencil.
pub const PROFILE_LAPLACIAN_FD: f64 = 1e-8;

/// Permitted relative deviation of a fitted scaling exponent from its
/// predicted value.
pub const SCALING_EXPONENT_REL: f64 = 0.10;

/// Upper bound on the measured stationary-phase ratio ‖fg‖/(C_f‖g‖).
pub const STATIONARY_PHASE_RATIO: f64 = 4.0;

/// Sup-norm tolerance for the periodicity of W under lattice shifts.
pub const JET_PERIODICITY: f64 = 1e-12;

// ═══════════════════════════════════════════════════════════════════
// Stage identities
// ═══════════════════════════════════════════════════════════════════

/// Base-pair residuals: everything is a single Fourier mode, so the
/// residual is FFT round-off.
pub const BASE_PAIR_RESIDUAL: f64 = 1e-10;

/// Pointwise amplitude reconstruction ρId − R̊ₗ = Σ a² ξ⊗ξ.
pub const AMPLITUDE_RECONSTRUCTION: f64 = 1e-8;

/// Stage identities (perturbation algebra, oscillation cancellation).
pub const STAGE_IDENTITY: f64 = 1e-7;

/// Full equation residual after one stage (time finite differences
/// dominate).
pub const STAGE_TOTAL_RESIDUAL: f64 = 1e-6;

/// Divergence and mean of the perturbation w_{q+1}.
pub const PERTURBATION_DIV_MEAN: f64 = 1e-10;

/// Agreement of t = 0 data between two noise seeds.
pub const DETERMINISM_T0: f64 = 1e-12;

// ═══════════════════════════════════════════════════════════════════
// Geometry sampling
// ═══════════════════════════════════════════════════════════════════

/// Relative change of the sampled constant M when the sampling density
/// is doubled.
pub const M_SAMPLING_CONVERGENCE: f64 = 0.01;

// ═══════════════════════════════════════════════════════════════════
// Ledger
// ═══════════════════════════════════════════════════════════════════

/// Operational meaning of "≪": the ratio of the two sides must not
/// exceed this value.
pub const LEDGER_MUCH_LESS: f64 = 1e-2;

// ═══════════════════════════════════════════════════════════════════
// Statistics
// ═══════════════════════════════════════════════════════════════════

/// Width, in standard errors, of Monte-Carlo acceptance windows.
pub const MC_SIGMA_WINDOW: f64 = 3.0;

/// Maximal relative drift of Monte-Carlo moments across spectral
/// truncations before a quantity is declared unstable.
pub const MC_TRUNCATION_DRIFT: f64 = 0.20;

// ═══════════════════════════════════════════════════════════════════
// Mollification
// ═══════════════════════════════════════════════════════════════════

/// Slack on ‖f_l‖_{L^p} ≤ ‖f‖_{L^p}(1 + ε) for unit-mass nonnegative
/// kernels evaluated by quadrature.
pub const MOLLIFIER_CONTRACTION: f64 = 1e-12;

/// Smallest number of strictly positive time-kernel weights accepted on a
/// data grid; fewer means the kernel is not resolved by the stencil.
pub const MIN_TIME_KERNEL_WEIGHTS: usize = 4;

// ═══════════════════════════════════════════════════════════════════
// Norm estimation
// ═══════════════════════════════════════════════════════════════════

/// Fraction of the H^s energy carried by the outermost third of the band
/// above which the field is flagged as under-resolved for that s.
pub const HS_TAIL_WARNING: f64 = 1e-3;
