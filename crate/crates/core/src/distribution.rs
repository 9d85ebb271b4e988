//! Distributions over the Bloch sphere.
//!
//! A conditional state after a detection history is kept symbolically as a
//! base measure times a product of detection factors `((1 + u·v_i)/2)^{k_i}`.
//! Grids are only ever derived views of that product.
//!
//! Integration rules are exact for the trig polynomials that arise here:
//! on a ring the periodic trapezoid rule with more nodes than the total
//! exponent integrates every Fourier mode exactly, and on the full sphere
//! the azimuthal sum is combined with Gauss-Legendre nodes in `cos θ`
//! (the θ-integrand is then a polynomial of degree at most the total exponent).

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bloch::{DetectorChannel, SphericalDirection, UnitVector3};
use crate::error::{Error, Result};
use crate::numeric::{gauss_legendre, log_sum_exp, wrap_angle, NeumaierSum};

/// Directions closer than this (componentwise) are merged into one factor.
pub const MERGE_TOLERANCE: f64 = 1e-12;

/// Overlaps `(1 + u·v)/2` below this are exact antipodes up to rounding of
/// the direction vectors (`|u + v| < 2e-13`), and count as zero.
pub const ANTIPODAL_OVERLAP: f64 = 1e-26;

/// Initial distribution `f(θ, φ)` before any detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaseMeasure {
    /// Uniform density 1 over the sphere (total mass 4π).
    UniformSphere,
    /// Uniform in φ at fixed polar angle, with measure `dφ/2π` (total mass 1).
    Ring { theta0: f64 },
    /// A point mass of unit weight.
    Point { theta0: f64, phi0: f64 },
}

impl BaseMeasure {
    /// Uniform relative phase with equal mode populations.
    pub fn equator() -> Self {
        BaseMeasure::Ring { theta0: PI / 2.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            BaseMeasure::UniformSphere => Ok(()),
            BaseMeasure::Ring { theta0 } => SphericalDirection::new(theta0, 0.0).map(|_| ()),
            BaseMeasure::Point { theta0, phi0 } => {
                SphericalDirection::new(theta0, phi0).map(|_| ())
            }
        }
    }
}

/// Accumulated detections at one sphere point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionFactor {
    pub direction: UnitVector3,
    pub exponent: u32,
}

/// Unnormalized distribution `base × Π ((1 + u·v_i)/2)^{k_i}` together with
/// the log of the accumulated channel prefactors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDistribution {
    base: BaseMeasure,
    factors: Vec<DetectionFactor>,
    log_weight_prefactor: f64,
}

/// Normalized phase marginal on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMarginal {
    pub phi: Vec<f64>,
    pub density: Vec<f64>,
}

impl PhaseMarginal {
    /// Writes `phi,density` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["phi", "density"])?;
        for (p, d) in self.phi.iter().zip(&self.density) {
            w.write_record([p.to_string(), d.to_string()])?;
        }
        w.flush()
    }

    /// Periodic trapezoid integral of the marginal.
    pub fn integral(&self) -> f64 {
        let h = 2.0 * PI / self.phi.len() as f64;
        h * self.density.iter().copied().collect::<NeumaierSum>().total()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    pub phi: f64,
    /// Value of the normalized marginal at the peak.
    pub height: f64,
}

/// Local maxima of a phase marginal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeakReport {
    pub peaks: Vec<Peak>,
    /// False when the marginal is flat and no peak is distinguishable.
    pub distinct: bool,
}

impl PeakReport {
    pub fn highest(&self) -> Option<Peak> {
        self.peaks
            .iter()
            .copied()
            .max_by(|a, b| a.height.total_cmp(&b.height))
    }

    /// Peaks at least `ratio` times as high as the highest one.
    pub fn dominant(&self, ratio: f64) -> Vec<Peak> {
        let Some(top) = self.highest() else {
            return Vec::new();
        };
        self.peaks
            .iter()
            .copied()
            .filter(|p| p.height >= ratio * top.height)
            .collect()
    }
}

impl PhaseDistribution {
    pub fn new(base: BaseMeasure) -> Result<Self> {
        base.validate()?;
        Ok(Self {
            base,
            factors: Vec::new(),
            log_weight_prefactor: 0.0,
        })
    }

    pub fn uniform_ring() -> Self {
        Self::new(BaseMeasure::equator()).expect("equator is valid")
    }

    pub fn base(&self) -> BaseMeasure {
        self.base
    }

    pub fn factors(&self) -> &[DetectionFactor] {
        &self.factors
    }

    pub fn log_weight_prefactor(&self) -> f64 {
        self.log_weight_prefactor
    }

    pub fn total_exponent(&self) -> u64 {
        self.factors.iter().map(|f| f.exponent as u64).sum()
    }

    /// Multiplies in `((1 + u·direction)/2)^exponent`, merging with an existing
    /// factor at the same point.
    pub fn with_factor(&self, direction: UnitVector3, exponent: u32) -> Self {
        let mut out = self.clone();
        out.push_factor(direction, exponent);
        out
    }

    fn push_factor(&mut self, direction: UnitVector3, exponent: u32) {
        if exponent == 0 {
            return;
        }
        if let Some(f) = self
            .factors
            .iter_mut()
            .find(|f| f.direction.approx_eq(&direction, MERGE_TOLERANCE))
        {
            f.exponent += exponent;
        } else {
            self.factors.push(DetectionFactor {
                direction,
                exponent,
            });
        }
    }

    /// Conditional update after `channel` fires at time `t`: the distribution
    /// is multiplied by `g_s = weight·(1 + u·u_s(t))`. The shape factor
    /// `(1 + u·u_s)/2` joins the product and `ln(2·weight)` the prefactor.
    pub fn apply_detection(&self, channel: &DetectorChannel, t: f64) -> Self {
        let mut out = self.with_factor(channel.direction_at(t), 1);
        out.log_weight_prefactor += (2.0 * channel.weight).ln();
        out
    }

    /// The same shape with an extra constant factor in the prefactor.
    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        out.log_weight_prefactor += factor.ln();
        out
    }

    /// Same distribution rotated by `angle` about the z axis.
    pub fn rotate_z(&self, angle: f64) -> Self {
        let base = match self.base {
            BaseMeasure::Point { theta0, phi0 } => BaseMeasure::Point {
                theta0,
                phi0: wrap_angle(phi0 + angle),
            },
            other => other,
        };
        Self {
            base,
            factors: self
                .factors
                .iter()
                .map(|f| DetectionFactor {
                    direction: f.direction.rotate_z(angle),
                    exponent: f.exponent,
                })
                .collect(),
            log_weight_prefactor: self.log_weight_prefactor,
        }
    }

    fn log_product_at(&self, u: &UnitVector3) -> f64 {
        let mut acc = 0.0;
        for f in &self.factors {
            let o = u.overlap(&f.direction);
            if o <= ANTIPODAL_OVERLAP {
                return f64::NEG_INFINITY;
            }
            acc += f.exponent as f64 * o.ln();
        }
        acc
    }

    /// Density relative to the base measure at `d`, excluding the prefactor.
    pub fn density(&self, d: SphericalDirection) -> f64 {
        self.log_density(d).exp()
    }

    pub fn log_density(&self, d: SphericalDirection) -> f64 {
        self.log_product_at(&d.to_vector())
    }

    fn phi_nodes(&self) -> usize {
        (8 * self.total_exponent() as usize).max(256)
    }

    fn theta_nodes(&self) -> usize {
        (self.total_exponent() as usize / 2 + 2).max(64)
    }

    /// `ln ∫ dμ_base Π factors` (prefactor excluded).
    pub fn log_normalization(&self) -> Result<f64> {
        let value = match self.base {
            BaseMeasure::Point { theta0, phi0 } => {
                self.log_density(SphericalDirection::new(theta0, phi0)?)
            }
            _ => self.log_normalization_quadrature(self.theta_nodes(), self.phi_nodes()),
        };
        if value == f64::NEG_INFINITY || value.is_nan() {
            return Err(Error::Annihilated(format!(
                "history of {} detections has zero weight on {:?}",
                self.total_exponent(),
                self.base
            )));
        }
        Ok(value)
    }

    /// `∫ dμ_base Π factors`.
    pub fn normalization(&self) -> Result<f64> {
        self.log_normalization().map(f64::exp)
    }

    /// `ln` of the base mass times the normalized expectation of the factor product,
    /// on an explicit grid: `n_phi` periodic trapezoid nodes, and for the full
    /// sphere `n_theta` Gauss-Legendre nodes in `cos θ`. Point bases ignore the grid.
    pub fn log_normalization_quadrature(&self, n_theta: usize, n_phi: usize) -> f64 {
        match self.base {
            BaseMeasure::Point { theta0, phi0 } => SphericalDirection::new(theta0, phi0)
                .map(|d| self.log_density(d))
                .unwrap_or(f64::NEG_INFINITY),
            BaseMeasure::Ring { theta0 } => {
                let logs: Vec<f64> = (0..n_phi)
                    .map(|j| {
                        let phi = 2.0 * PI * j as f64 / n_phi as f64;
                        self.log_product_at(&ring_point(theta0, phi))
                    })
                    .collect();
                log_sum_exp(&logs) - (n_phi as f64).ln()
            }
            BaseMeasure::UniformSphere => {
                let (x, w) = gauss_legendre(n_theta);
                let h = 2.0 * PI / n_phi as f64;
                let mut logs = Vec::with_capacity(n_theta * n_phi);
                for (ct, wt) in x.iter().zip(&w) {
                    let st = (1.0 - ct * ct).max(0.0).sqrt();
                    let lw = (wt * h).ln();
                    for j in 0..n_phi {
                        let (sp, cp) = (2.0 * PI * j as f64 / n_phi as f64).sin_cos();
                        let u = UnitVector3 {
                            x: st * cp,
                            y: st * sp,
                            z: *ct,
                        };
                        logs.push(lw + self.log_product_at(&u));
                    }
                }
                log_sum_exp(&logs)
            }
        }
    }

    /// Ring normalization by Fourier-mode algebra: on a ring each factor is
    /// `|A + B e^{iφ}|²` (a spin-1/2 overlap), so the product is `|P(e^{iφ})|²`
    /// for a polynomial `P` and its mean over the ring is `Σ |p_n|²`.
    /// Blocks at one direction are expanded by exact binomials; mixing
    /// distinct directions can cancel, so this route is a cross-check.
    pub fn normalization_fourier(&self) -> Result<f64> {
        let theta0 = match self.base {
            BaseMeasure::Ring { theta0 } => theta0,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "Fourier normalization needs a ring base, got {other:?}"
                )))
            }
        };
        let (s0, c0) = (theta0 / 2.0).sin_cos();
        let mut poly = vec![Complex64::new(1.0, 0.0)];
        for f in &self.factors {
            let d = f.direction.to_direction();
            let (sv, cv) = (d.theta() / 2.0).sin_cos();
            let a = Complex64::new(cv * c0, 0.0);
            let b = Complex64::from_polar(sv * s0, -d.phi());
            let block = binomial_block(a, b, f.exponent);
            poly = convolve(&poly, &block);
        }
        let value = poly.iter().map(|c| c.norm_sqr()).collect::<NeumaierSum>().total();
        if value <= 0.0 {
            return Err(Error::Annihilated("Fourier normalization vanished".into()));
        }
        Ok(value)
    }

    /// Unnormalized log phase density at `phi`: the ring restriction, or the
    /// θ-integral with the sphere measure for a uniform-sphere base.
    pub fn marginal_log_density_at(&self, phi: f64) -> Result<f64> {
        match self.base {
            BaseMeasure::Ring { theta0 } => Ok(self.log_product_at(&ring_point(theta0, phi))),
            BaseMeasure::UniformSphere => {
                // At fixed φ the θ-integrand carries odd powers of sin θ, so
                // Gauss-Legendre runs in θ itself (analytic integrand).
                let (x, w) = gauss_legendre(self.total_exponent() as usize + 64);
                let (sp, cp) = phi.sin_cos();
                let logs: Vec<f64> = x
                    .iter()
                    .zip(&w)
                    .map(|(xi, wt)| {
                        let theta = PI / 2.0 * (xi + 1.0);
                        let (st, ct) = theta.sin_cos();
                        let u = UnitVector3 {
                            x: st * cp,
                            y: st * sp,
                            z: ct,
                        };
                        (wt * PI / 2.0 * st).ln() + self.log_product_at(&u)
                    })
                    .collect();
                Ok(log_sum_exp(&logs))
            }
            BaseMeasure::Point { .. } => Err(Error::InvalidParameter(
                "a point base has no continuous phase marginal".into(),
            )),
        }
    }

    /// Marginal over φ on `grid_size` periodic nodes, normalized so that the
    /// trapezoid integral over `[0, 2π)` is one.
    pub fn phase_marginal(&self, grid_size: usize) -> Result<PhaseMarginal> {
        if grid_size < 8 {
            return Err(Error::InvalidParameter(format!(
                "grid size {grid_size} < 8"
            )));
        }
        let phi: Vec<f64> = (0..grid_size)
            .map(|j| 2.0 * PI * j as f64 / grid_size as f64)
            .collect();
        let logs = phi
            .iter()
            .map(|&p| self.marginal_log_density_at(p))
            .collect::<Result<Vec<f64>>>()?;
        let total = log_sum_exp(&logs);
        if total == f64::NEG_INFINITY || total.is_nan() {
            return Err(Error::Annihilated("phase marginal vanished".into()));
        }
        let h = 2.0 * PI / grid_size as f64;
        let density = logs.iter().map(|l| (l - total).exp() / h).collect();
        Ok(PhaseMarginal { phi, density })
    }

    /// Local maxima of the phase marginal, refined to well below 1e-6 rad.
    pub fn peak_locations(&self) -> Result<PeakReport> {
        let grid = (16 * self.total_exponent() as usize).max(720);
        let marginal = self.phase_marginal(grid)?;
        let d = &marginal.density;
        let (lo, hi) = d
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if hi - lo <= 1e-9 * hi {
            return Ok(PeakReport {
                peaks: Vec::new(),
                distinct: false,
            });
        }
        let n = d.len();
        let h = 2.0 * PI / n as f64;
        // log of the normalizing constant used by `phase_marginal`, taken at
        // the grid maximum so that it cannot underflow
        let top = d
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(j, _)| j);
        let log_scale = self.marginal_log_density_at(marginal.phi[top])? - (d[top] * h).ln();
        let mut peaks = Vec::new();
        for j in 0..n {
            let prev = d[(j + n - 1) % n];
            let next = d[(j + 1) % n];
            // plateaus count once, at their first node
            if d[j] > prev && d[j] >= next {
                let phi = self.refine_peak(marginal.phi[j] - h, marginal.phi[j] + h)?;
                let height = (self.marginal_log_density_at(phi)? - log_scale).exp() / h;
                peaks.push(Peak {
                    phi: wrap_angle(phi),
                    height,
                });
            }
        }
        Ok(PeakReport {
            peaks,
            distinct: true,
        })
    }

    fn refine_peak(&self, mut a: f64, mut b: f64) -> Result<f64> {
        let r = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let mut fc = self.marginal_log_density_at(c)?;
        let mut fd = self.marginal_log_density_at(d)?;
        while (b - a).abs() > 1e-9 {
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = self.marginal_log_density_at(c)?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = self.marginal_log_density_at(d)?;
            }
        }
        Ok(0.5 * (a + b))
    }

    /// `∫ f g_s / Σ_s' ∫ f g_s'` for channels evaluated at time `t`.
    pub fn branching_probabilities(&self, channels: &[DetectorChannel], t: f64) -> Result<Vec<f64>> {
        let logs = channels
            .iter()
            .map(|c| {
                let with = self.with_factor(c.direction_at(t), 1);
                match with.log_normalization() {
                    Ok(v) => Ok(v + (2.0 * c.weight).ln()),
                    Err(Error::Annihilated(_)) => Ok(f64::NEG_INFINITY),
                    Err(e) => Err(e),
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let total = log_sum_exp(&logs);
        if total == f64::NEG_INFINITY || total.is_nan() {
            return Err(Error::Annihilated("no channel can fire".into()));
        }
        Ok(logs.iter().map(|l| (l - total).exp()).collect())
    }
}

fn ring_point(theta0: f64, phi: f64) -> UnitVector3 {
    let (st, ct) = theta0.sin_cos();
    let (sp, cp) = phi.sin_cos();
    UnitVector3 {
        x: st * cp,
        y: st * sp,
        z: ct,
    }
}

fn binomial_block(a: Complex64, b: Complex64, k: u32) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(k as usize + 1);
    let mut coeff = 1.0f64;
    for m in 0..=k {
        out.push(coeff * a.powu(k - m) * b.powu(m));
        coeff = coeff * (k - m) as f64 / (m + 1) as f64;
    }
    out
}

fn convolve(p: &[Complex64], q: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}
