//! Bloch-sphere geometry: directions, detector points and the rotations
//! induced by coupling the two modes.

use std::f64::consts::PI;
use std::fmt;
use std::ops::Neg;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::wrap_angle;

/// A point on the sphere given by polar angle `theta ∈ [0, π]` and azimuth `phi ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalDirection {
    theta: f64,
    phi: f64,
}

impl SphericalDirection {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite direction ({theta}, {phi})"
            )));
        }
        if !(0.0..=PI).contains(&theta) {
            return Err(Error::InvalidParameter(format!(
                "polar angle {theta} outside [0, π]"
            )));
        }
        Ok(Self {
            theta,
            phi: wrap_angle(phi),
        })
    }

    /// Point on the equator at azimuth `phi`.
    pub fn equatorial(phi: f64) -> Self {
        Self {
            theta: PI / 2.0,
            phi: wrap_angle(phi),
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn to_vector(&self) -> UnitVector3 {
        direction_to_vector(*self)
    }
}

/// Cartesian unit vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVector3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

pub const NORM_TOLERANCE: f64 = 1e-12;

impl UnitVector3 {
    pub const X: UnitVector3 = UnitVector3 { x: 1.0, y: 0.0, z: 0.0 };
    pub const Y: UnitVector3 = UnitVector3 { x: 0.0, y: 1.0, z: 0.0 };
    pub const Z: UnitVector3 = UnitVector3 { x: 0.0, y: 0.0, z: 1.0 };

    /// Accepts components whose norm is 1 within [`NORM_TOLERANCE`].
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let n2 = x * x + y * y + z * z;
        if !n2.is_finite() || (n2.sqrt() - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "({x}, {y}, {z}) is not a unit vector"
            )));
        }
        Ok(Self { x, y, z })
    }

    /// Rescales an arbitrary nonzero vector onto the sphere.
    pub fn normalized(x: f64, y: f64, z: f64) -> Result<Self> {
        let n = (x * x + y * y + z * z).sqrt();
        if !(n.is_finite() && n > 0.0) {
            return Err(Error::InvalidParameter("cannot normalize zero vector".into()));
        }
        Ok(Self {
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub fn dot(&self, other: &UnitVector3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// `(1 + u·v)/2`, evaluated as `|u + v|²/4` so that near-antipodal pairs
    /// keep their relative precision and exact antipodes give exactly zero.
    pub fn overlap(&self, other: &UnitVector3) -> f64 {
        let sx = self.x + other.x;
        let sy = self.y + other.y;
        let sz = self.z + other.z;
        0.25 * (sx * sx + sy * sy + sz * sz)
    }

    pub fn to_direction(&self) -> SphericalDirection {
        let theta = self.z.clamp(-1.0, 1.0).acos();
        let phi = if self.x == 0.0 && self.y == 0.0 {
            0.0
        } else {
            self.y.atan2(self.x)
        };
        SphericalDirection {
            theta,
            phi: wrap_angle(phi),
        }
    }

    pub fn approx_eq(&self, other: &UnitVector3, tol: f64) -> bool {
        (self.x - other.x).abs() <= tol
            && (self.y - other.y).abs() <= tol
            && (self.z - other.z).abs() <= tol
    }

    /// Rotation about the z axis by `angle`.
    pub fn rotate_z(&self, angle: f64) -> UnitVector3 {
        let (s, c) = angle.sin_cos();
        UnitVector3 {
            x: c * self.x - s * self.y,
            y: s * self.x + c * self.y,
            z: self.z,
        }
    }
}

impl Neg for UnitVector3 {
    type Output = UnitVector3;

    fn neg(self) -> UnitVector3 {
        UnitVector3 {
            x: -self.x,
            y: -self.y,
            z: -self.z,
        }
    }
}

impl fmt::Display for UnitVector3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

/// `(cos φ sin θ, sin φ sin θ, cos θ)`.
pub fn direction_to_vector(d: SphericalDirection) -> UnitVector3 {
    let (st, ct) = d.theta.sin_cos();
    let (sp, cp) = d.phi.sin_cos();
    UnitVector3 {
        x: cp * st,
        y: sp * st,
        z: ct,
    }
}

/// Which of the two modes a directly attached detector watches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeLabel {
    A,
    B,
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::A => f.write_str("a"),
            ModeLabel::B => f.write_str("b"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CouplingMode {
    None,
    Pulsed { tau: f64 },
    Continuous,
}

/// Tunneling `delta` and energy splitting `epsilon` between the modes (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub delta: f64,
    pub epsilon: f64,
    pub mode: CouplingMode,
}

impl CouplingSpec {
    pub fn new(delta: f64, epsilon: f64, mode: CouplingMode) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) || !epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "coupling requires finite δ ≥ 0 and finite ε, got δ={delta}, ε={epsilon}"
            )));
        }
        if let CouplingMode::Pulsed { tau } = mode {
            if !(tau.is_finite() && tau >= 0.0) {
                return Err(Error::InvalidParameter(format!("pulse duration {tau}")));
            }
        }
        Ok(Self {
            delta,
            epsilon,
            mode,
        })
    }

    pub fn continuous(delta: f64, epsilon: f64) -> Result<Self> {
        Self::new(delta, epsilon, CouplingMode::Continuous)
    }

    pub fn pulsed(delta: f64, tau: f64) -> Result<Self> {
        Self::new(delta, 0.0, CouplingMode::Pulsed { tau })
    }

    /// Rotation frequency `Ω = sqrt(ε² + δ²)`.
    pub fn omega(&self) -> f64 {
        self.epsilon.hypot(self.delta)
    }

    /// `2π/Ω`, or `None` without coupling.
    pub fn period(&self) -> Option<f64> {
        let w = self.omega();
        (w > 0.0).then(|| 2.0 * PI / w)
    }
}

/// Where a channel sits on the sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ChannelDirection {
    Fixed(UnitVector3),
    /// Heisenberg-picture detector of a mode under continuous coupling.
    Coupled { coupling: CouplingSpec, mode: ModeLabel },
}

impl ChannelDirection {
    pub fn at(&self, t: f64) -> UnitVector3 {
        match self {
            ChannelDirection::Fixed(u) => *u,
            ChannelDirection::Coupled { coupling, mode } => {
                coupled_detector_direction(coupling, t, *mode)
            }
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, ChannelDirection::Fixed(_))
    }
}

/// One detection channel: its sphere point and the fraction of the total
/// loss rate it carries. The gain factor is `g = weight·(1 + u·u_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorChannel {
    pub label: String,
    pub direction: ChannelDirection,
    pub weight: f64,
}

impl DetectorChannel {
    pub fn fixed(label: impl Into<String>, direction: UnitVector3, weight: f64) -> Self {
        Self {
            label: label.into(),
            direction: ChannelDirection::Fixed(direction),
            weight,
        }
    }

    pub fn direction_at(&self, t: f64) -> UnitVector3 {
        self.direction.at(t)
    }

    /// `g_s(u) = weight·(1 + u·u_s(t))`.
    pub fn gain(&self, u: &UnitVector3, t: f64) -> f64 {
        2.0 * self.weight * u.overlap(&self.direction_at(t))
    }
}

/// Two beam splitters with settings 0 and `xi`: channels 1..4 at equatorial
/// azimuths `0, π, ξ, ξ+π`, each carrying a quarter of the loss rate.
pub fn beam_splitter_directions(xi: f64) -> [DetectorChannel; 4] {
    let xi = wrap_angle(xi);
    let at = |phi: f64| SphericalDirection::equatorial(phi).to_vector();
    [
        DetectorChannel::fixed("1", at(0.0), 0.25),
        DetectorChannel::fixed("2", at(PI), 0.25),
        DetectorChannel::fixed("3", at(xi), 0.25),
        DetectorChannel::fixed("4", at(xi + PI), 0.25),
    ]
}

/// A single 50/50 beam splitter with setting `xi`.
pub fn single_beam_splitter(xi: f64) -> [DetectorChannel; 2] {
    let xi = wrap_angle(xi);
    let at = |phi: f64| SphericalDirection::equatorial(phi).to_vector();
    [
        DetectorChannel::fixed("1", at(xi), 0.5),
        DetectorChannel::fixed("2", at(xi + PI), 0.5),
    ]
}

/// Detectors attached directly to modes A and B (the poles).
pub fn direct_detectors() -> [DetectorChannel; 2] {
    [
        DetectorChannel::fixed("a", UnitVector3::Z, 0.5),
        DetectorChannel::fixed("b", -UnitVector3::Z, 0.5),
    ]
}

/// Detector direction of mode `a` or `b` at time `t` under continuous
/// coupling: the pole rotated back by the coupling evolution. `u_b = -u_a`.
/// With `Ω = 0` the detectors stay at the poles.
pub fn coupled_detector_direction(c: &CouplingSpec, t: f64, mode: ModeLabel) -> UnitVector3 {
    let omega = c.omega();
    let ua = if omega == 0.0 {
        UnitVector3::Z
    } else {
        let (s, co) = (omega * t).sin_cos();
        let w2 = omega * omega;
        let (d, e) = (c.delta, c.epsilon);
        UnitVector3 {
            x: e * d / w2 * (co - 1.0),
            y: -d / omega * s,
            z: d * d / w2 * co + e * e / w2,
        }
    };
    match mode {
        ModeLabel::A => ua,
        ModeLabel::B => -ua,
    }
}

/// Counter-rotated detectors after a coupling pulse of area `δτ`:
/// `u_a = -ŷ sin δτ + ẑ cos δτ`, `u_b = -u_a`.
pub fn pulsed_counterrotated_directions(c: &CouplingSpec) -> Result<[DetectorChannel; 2]> {
    let tau = match c.mode {
        CouplingMode::Pulsed { tau } => tau,
        other => {
            return Err(Error::InvalidParameter(format!(
                "pulsed detectors need a pulsed coupling, got {other:?}"
            )))
        }
    };
    let (s, co) = (c.delta * tau).sin_cos();
    let ua = UnitVector3 {
        x: 0.0,
        y: -s,
        z: co,
    };
    Ok([
        DetectorChannel::fixed("a", ua, 0.5),
        DetectorChannel::fixed("b", -ua, 0.5),
    ])
}

/// Detectors on modes A and B under continuous coupling.
pub fn continuous_coupled_channels(c: &CouplingSpec) -> [DetectorChannel; 2] {
    let mk = |mode: ModeLabel| DetectorChannel {
        label: mode.to_string(),
        direction: ChannelDirection::Coupled { coupling: *c, mode },
        weight: 0.5,
    };
    [mk(ModeLabel::A), mk(ModeLabel::B)]
}

/// The detection geometries studied for two modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DetectorSetup {
    /// Both modes feed two beam splitters with settings 0 and `xi`.
    TwoBeamSplitters { xi: f64 },
    SingleBeamSplitter { xi: f64 },
    /// Detectors on the modes themselves, no coupling.
    Direct,
    /// Direct detection after a coupling pulse.
    Pulsed { coupling: CouplingSpec },
    /// Direct detection with the coupling left on.
    Continuous { coupling: CouplingSpec },
}

impl DetectorSetup {
    pub fn channels(&self) -> Result<Vec<DetectorChannel>> {
        Ok(match self {
            DetectorSetup::TwoBeamSplitters { xi } => beam_splitter_directions(*xi).to_vec(),
            DetectorSetup::SingleBeamSplitter { xi } => single_beam_splitter(*xi).to_vec(),
            DetectorSetup::Direct => direct_detectors().to_vec(),
            DetectorSetup::Pulsed { coupling } => {
                pulsed_counterrotated_directions(coupling)?.to_vec()
            }
            DetectorSetup::Continuous { coupling } => continuous_coupled_channels(coupling).to_vec(),
        })
    }

    pub fn is_static(&self) -> bool {
        !matches!(self, DetectorSetup::Continuous { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: UnitVector3, b: UnitVector3) -> bool {
        a.approx_eq(&b, 1e-12)
    }

    #[test]
    fn axes() {
        let x = direction_to_vector(SphericalDirection::new(PI / 2.0, 0.0).unwrap());
        assert!(close(x, UnitVector3::X));
        let z = direction_to_vector(SphericalDirection::new(0.0, 1.234).unwrap());
        assert!(close(z, UnitVector3::Z));
        let y = direction_to_vector(SphericalDirection::new(PI / 2.0, PI / 2.0).unwrap());
        assert!(close(y, UnitVector3::Y));
    }

    #[test]
    fn direction_validation_and_reduction() {
        assert!(SphericalDirection::new(-0.1, 0.0).is_err());
        assert!(SphericalDirection::new(3.2, 0.0).is_err());
        let d = SphericalDirection::new(1.0, -PI / 2.0).unwrap();
        assert!((d.phi() - 1.5 * PI).abs() < 1e-15);
        assert!(UnitVector3::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn beam_splitter_azimuths() {
        let ch = beam_splitter_directions(PI / 2.0);
        let az: Vec<f64> = ch
            .iter()
            .map(|c| c.direction_at(0.0).to_direction().phi())
            .collect();
        let want = [0.0, PI, PI / 2.0, 1.5 * PI];
        for (a, w) in az.iter().zip(want) {
            assert!((a - w).abs() < 1e-12, "{az:?}");
        }
        assert!(ch.iter().all(|c| c.weight == 0.25));
    }

    #[test]
    fn degenerate_beam_splitter_settings() {
        let ch = beam_splitter_directions(0.0);
        assert!(close(ch[2].direction_at(0.0), ch[0].direction_at(0.0)));
        assert!(close(ch[3].direction_at(0.0), ch[1].direction_at(0.0)));
        let ch = beam_splitter_directions(PI);
        assert!(close(ch[2].direction_at(0.0), ch[1].direction_at(0.0)));
    }

    #[test]
    fn coupled_direction_anchors() {
        let c = CouplingSpec::continuous(1.0, 0.0).unwrap();
        let u = coupled_detector_direction(&c, PI / 2.0, ModeLabel::A);
        assert!(close(u, -UnitVector3::Y));
        let c = CouplingSpec::continuous(0.7, 0.3).unwrap();
        assert!(close(coupled_detector_direction(&c, 0.0, ModeLabel::A), UnitVector3::Z));
        let c = CouplingSpec::continuous(2.0, 2.0).unwrap();
        let t = 2.0 * PI / c.omega();
        assert!(close(coupled_detector_direction(&c, t, ModeLabel::A), UnitVector3::Z));
        let none = CouplingSpec::continuous(0.0, 0.0).unwrap();
        assert_eq!(coupled_detector_direction(&none, 5.0, ModeLabel::B), -UnitVector3::Z);
    }

    #[test]
    fn pulsed_anchors() {
        let ch = pulsed_counterrotated_directions(&CouplingSpec::pulsed(1.0, PI / 2.0).unwrap())
            .unwrap();
        assert!(close(ch[0].direction_at(0.0), -UnitVector3::Y));
        assert!(close(ch[1].direction_at(0.0), UnitVector3::Y));
        let ch = pulsed_counterrotated_directions(&CouplingSpec::pulsed(1.0, 0.0).unwrap())
            .unwrap();
        assert!(close(ch[0].direction_at(0.0), UnitVector3::Z));
        assert!(close(ch[1].direction_at(0.0), -UnitVector3::Z));
        let ch = pulsed_counterrotated_directions(&CouplingSpec::pulsed(1.0, PI).unwrap())
            .unwrap();
        assert!(close(ch[0].direction_at(0.0), -UnitVector3::Z));
        let cont = CouplingSpec::continuous(1.0, 0.0).unwrap();
        assert!(pulsed_counterrotated_directions(&cont).is_err());
    }

    #[test]
    fn pulsed_matches_continuous_at_pulse_end() {
        let tau = 0.37;
        let pulsed = pulsed_counterrotated_directions(&CouplingSpec::pulsed(1.3, tau).unwrap())
            .unwrap();
        let cont = CouplingSpec::continuous(1.3, 0.0).unwrap();
        assert!(close(
            pulsed[0].direction_at(0.0),
            coupled_detector_direction(&cont, tau, ModeLabel::A)
        ));
    }

    #[test]
    fn overlap_is_exact_at_antipodes() {
        let u = SphericalDirection::equatorial(0.3).to_vector();
        assert_eq!(u.overlap(&-u), 0.0);
        assert!((u.overlap(&u) - 1.0).abs() < 1e-15);
    }

    fn setups(xi: f64, delta: f64, eps: f64) -> Vec<DetectorSetup> {
        vec![
            DetectorSetup::TwoBeamSplitters { xi },
            DetectorSetup::SingleBeamSplitter { xi },
            DetectorSetup::Direct,
            DetectorSetup::Pulsed {
                coupling: CouplingSpec::pulsed(delta, 0.8).unwrap(),
            },
            DetectorSetup::Continuous {
                coupling: CouplingSpec::continuous(delta, eps).unwrap(),
            },
        ]
    }

    proptest! {
        #[test]
        fn vectors_are_unit(theta in 0.0..=PI, phi in -20.0f64..20.0) {
            let v = direction_to_vector(SphericalDirection::new(theta, phi).unwrap());
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn total_gain_is_direction_independent(
            theta in 0.0..=PI, phi in 0.0..(2.0 * PI),
            xi in 0.0..(2.0 * PI), delta in 0.0f64..3.0, eps in -3.0f64..3.0,
            t in 0.0f64..10.0,
        ) {
            let u = direction_to_vector(SphericalDirection::new(theta, phi).unwrap());
            for setup in setups(xi, delta, eps) {
                let total: f64 = setup.channels().unwrap().iter().map(|c| c.gain(&u, t)).sum();
                prop_assert!((total - 1.0).abs() < 1e-12, "{setup:?}: {total}");
                let w: f64 = setup.channels().unwrap().iter().map(|c| c.weight).sum();
                prop_assert!((w - 1.0).abs() < 1e-15);
            }
        }

        #[test]
        fn coupled_directions_are_unit_antipodal_periodic(
            delta in 0.01f64..3.0, eps in -3.0f64..3.0, t in 0.0f64..20.0,
        ) {
            let c = CouplingSpec::continuous(delta, eps).unwrap();
            let a = coupled_detector_direction(&c, t, ModeLabel::A);
            let b = coupled_detector_direction(&c, t, ModeLabel::B);
            prop_assert!((a.dot(&a) - 1.0).abs() < 1e-12);
            prop_assert_eq!(b, -a);
            let later = coupled_detector_direction(&c, t + c.period().unwrap(), ModeLabel::A);
            prop_assert!(later.approx_eq(&a, 1e-12));
        }
    }
}
