//! Transformed-section equivalence of a bi-layer tube.
//!
//! The outer layer (material 1) is the reference material. The inner layer is
//! scaled by the modulus ratio `λ₂ = E₂ / E₁`; the resulting single-material
//! annulus keeps the elastic bending stiffness of the original section.
//!
//! Coordinates: radii are measured from the tube axis, the junction radius `r`
//! separates the outer layer `[r, r + t1]` from the inner layer `[r - t2, r]`.
//! The centroid offset `e` of the flat micro-element is positive outward.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two concentric layers bonded at the junction radius `r` (mm, MPa).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayeredSection {
    pub r: f64,
    pub t1: f64,
    pub t2: f64,
    pub e1: f64,
    pub e2: f64,
}

impl LayeredSection {
    pub fn new(r: f64, t1: f64, t2: f64, e1: f64, e2: f64) -> Result<Self> {
        let s = LayeredSection { r, t1, t2, e1, e2 };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        validate_geometry(self.r, self.t1, self.t2)?;
        modulus_ratio(self.e2, self.e1).map(|_| ())
    }

    /// Builds the section from the outer shape and the two moduli.
    pub fn from_shape(shape: &BmtShape, e1: f64, e2: f64, ratio: RatioConvention) -> Result<Self> {
        let (r, t1, t2) = shape.layers(ratio)?;
        LayeredSection::new(r, t1, t2, e1, e2)
    }

    pub fn lambda2(&self) -> f64 {
        self.e2 / self.e1
    }

    pub fn outer_radius(&self) -> f64 {
        self.r + self.t1
    }

    pub fn inner_radius(&self) -> f64 {
        self.r - self.t2
    }
}

fn validate_geometry(r: f64, t1: f64, t2: f64) -> Result<()> {
    let finite = r.is_finite() && t1.is_finite() && t2.is_finite();
    if !finite || r <= 0.0 || t1 < 0.0 || t2 < 0.0 || t1 + t2 <= 0.0 {
        return Err(Error::Geometry(format!(
            "layered section needs r > 0, t1, t2 >= 0 and t1 + t2 > 0 (r={r}, t1={t1}, t2={t2})"
        )));
    }
    if t2 >= r {
        return Err(Error::Geometry(format!(
            "inner radius r - t2 must be positive (r={r}, t2={t2})"
        )));
    }
    Ok(())
}

/// How `Tr` is read: the outer-layer fraction `t1 / T` (default) or the
/// inner-layer fraction `t2 / T`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RatioConvention {
    #[default]
    OuterFraction,
    InnerFraction,
}

/// Outer shape of a bi-layer tube: outer diameter, total wall and thickness ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BmtShape {
    pub outer_diameter: f64,
    pub thickness: f64,
    pub thickness_ratio: f64,
}

impl BmtShape {
    pub fn new(outer_diameter: f64, thickness: f64, thickness_ratio: f64) -> Result<Self> {
        let s = BmtShape {
            outer_diameter,
            thickness,
            thickness_ratio,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let BmtShape {
            outer_diameter: d,
            thickness: t,
            thickness_ratio: tr,
        } = *self;
        if !(d > 0.0 && t > 0.0 && t < d / 2.0 && (0.0..=1.0).contains(&tr)) {
            return Err(Error::Geometry(format!(
                "BMT shape needs Do > 0, 0 < T < Do/2, 0 <= Tr <= 1 (Do={d}, T={t}, Tr={tr})"
            )));
        }
        Ok(())
    }

    /// Junction radius and layer thicknesses `(r, t1, t2)`.
    pub fn layers(&self, ratio: RatioConvention) -> Result<(f64, f64, f64)> {
        self.validate()?;
        let outer_fraction = match ratio {
            RatioConvention::OuterFraction => self.thickness_ratio,
            RatioConvention::InnerFraction => 1.0 - self.thickness_ratio,
        };
        let t1 = outer_fraction * self.thickness;
        let t2 = self.thickness - t1;
        let r = self.outer_diameter / 2.0 - t1;
        validate_geometry(r, t1, t2)?;
        Ok((r, t1, t2))
    }
}

/// Equivalent single-material tube: mid-surface radius and wall thickness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalentTube {
    pub radius: f64,
    pub thickness: f64,
}

impl EquivalentTube {
    pub fn shape(&self) -> SingleShape {
        SingleShape {
            outer_diameter: 2.0 * self.radius + self.thickness,
            thickness: self.thickness,
        }
    }

    pub fn inertia(&self) -> f64 {
        annulus_inertia(
            self.radius - self.thickness / 2.0,
            self.radius + self.thickness / 2.0,
        )
    }
}

/// Single-layer tube described by outer diameter and wall thickness.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleShape {
    pub outer_diameter: f64,
    pub thickness: f64,
}

impl SingleShape {
    pub fn new(outer_diameter: f64, thickness: f64) -> Result<Self> {
        if !(thickness > 0.0 && outer_diameter > 2.0 * thickness) {
            return Err(Error::Geometry(format!(
                "single tube needs Do > 2T > 0 (Do={outer_diameter}, T={thickness})"
            )));
        }
        Ok(SingleShape {
            outer_diameter,
            thickness,
        })
    }

    pub fn outer_radius(&self) -> f64 {
        self.outer_diameter / 2.0
    }

    pub fn inner_radius(&self) -> f64 {
        self.outer_diameter / 2.0 - self.thickness
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectionProperties {
    pub lambda2: f64,
    /// Transformed moment of inertia about the tube axis (mm⁴).
    pub iz0: f64,
    /// First moment of the transformed micro-element about the requested axis (mm³).
    pub sz0: f64,
}

/// `E_i / E_m`.
pub fn modulus_ratio(e_i: f64, e_m: f64) -> Result<f64> {
    if !(e_i > 0.0 && e_m > 0.0) || !e_i.is_finite() || !e_m.is_finite() {
        return Err(Error::InvalidMaterial(format!(
            "elastic moduli must be positive and finite (E_i={e_i}, E_m={e_m})"
        )));
    }
    Ok(e_i / e_m)
}

/// Centroid of the modulus-weighted micro-element relative to the junction.
///
/// The outer strip spans `[0, t1]` at unit width, the inner strip `[-t2, 0]`
/// at width `λ₂`.
pub fn centroid_offset(t1: f64, t2: f64, lambda2: f64) -> Result<f64> {
    let weighted = t1 + lambda2 * t2;
    if !(weighted > 0.0) || !weighted.is_finite() {
        return Err(Error::Degenerate(format!(
            "t1 + lambda2*t2 must be positive (t1={t1}, t2={t2}, lambda2={lambda2})"
        )));
    }
    Ok((t1 * t1 - lambda2 * t2 * t2) / (2.0 * weighted))
}

/// `(π/4)(R_out⁴ − R_in⁴)`.
pub fn annulus_inertia(inner: f64, outer: f64) -> f64 {
    PI / 4.0 * (outer.powi(4) - inner.powi(4))
}

/// `I₁ + λ₂·I₂` with exact annulus inertias of both layers.
pub fn composite_inertia(section: &LayeredSection) -> f64 {
    let outer = annulus_inertia(section.r, section.r + section.t1);
    let inner = annulus_inertia(section.r - section.t2, section.r);
    outer + section.lambda2() * inner
}

/// Right-hand side of the equivalent-thickness cubic, `(4/π)·I_Z0 / R`.
fn stiffness_bracket(radius: f64, section: &LayeredSection, lambda2: f64) -> f64 {
    let LayeredSection { r, t1, t2, .. } = *section;
    ((r + t1).powi(4) - (1.0 - lambda2) * r.powi(4) - lambda2 * (r - t2).powi(4)) / radius
}

/// Solves `t³ + 4R²t − K = 0` for the positive root.
///
/// `g(t) = t³ + 4R²t` is strictly increasing on `t > 0`, so the root is unique.
/// Safeguarded Newton inside a shrinking bisection bracket.
pub fn solve_equivalent_thickness(radius: f64, section: &LayeredSection, lambda2: f64) -> Result<f64> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::Geometry(format!("equivalent radius must be positive, got {radius}")));
    }
    let k = stiffness_bracket(radius, section, lambda2);
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::NoPhysicalSolution(format!(
            "stiffness bracket K = {k} is not positive for R = {radius}"
        )));
    }
    let four_r2 = 4.0 * radius * radius;
    let g = |t: f64| t * t * t + four_r2 * t - k;

    // t ≥ 2R would leave a non-positive inner radius.
    if g(2.0 * radius) <= 0.0 {
        return Err(Error::Geometry(format!(
            "equivalent thickness would reach 2R (R = {radius}, K = {k})"
        )));
    }

    let mut lo = 0.0_f64;
    let mut hi = k.cbrt().min(k / four_r2).min(2.0 * radius);
    let mut t = hi;
    for _ in 0..200 {
        let gt = g(t);
        if gt == 0.0 {
            return Ok(t);
        }
        if gt > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let newton = t - gt / (3.0 * t * t + four_r2);
        t = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (hi - lo) <= 4.0 * f64::EPSILON * hi || g(t).abs() <= 1e-14 * k {
            break;
        }
    }
    Ok(t)
}

/// Full equivalence `section -> (R, t0)`.
pub fn equivalent_section(section: &LayeredSection) -> Result<EquivalentTube> {
    section.validate()?;
    let lambda2 = section.lambda2();
    equivalent_from_layers(section, lambda2)
}

fn equivalent_from_layers(section: &LayeredSection, lambda2: f64) -> Result<EquivalentTube> {
    let e = centroid_offset(section.t1, section.t2, lambda2)?;
    let radius = section.r + e;
    let thickness = solve_equivalent_thickness(radius, section, lambda2)?;
    Ok(EquivalentTube { radius, thickness })
}

/// The theory map from BMT shape to equivalent single-layer shape, with `Tr`
/// read as the outer-layer fraction.
pub fn equivalent_tube(shape: &BmtShape, lambda2: f64) -> Result<SingleShape> {
    equivalent_tube_with(shape, lambda2, RatioConvention::OuterFraction)
}

pub fn equivalent_tube_with(shape: &BmtShape, lambda2: f64, ratio: RatioConvention) -> Result<SingleShape> {
    if !(lambda2 > 0.0) || !lambda2.is_finite() {
        return Err(Error::InvalidMaterial(format!("lambda2 must be positive, got {lambda2}")));
    }
    let (r, t1, t2) = shape.layers(ratio)?;
    // Moduli only enter through lambda2 here.
    let section = LayeredSection {
        r,
        t1,
        t2,
        e1: 1.0,
        e2: lambda2,
    };
    Ok(equivalent_from_layers(&section, lambda2)?.shape())
}

/// Bending stress in layer `i`: `σ = λ_i·M·y / I_Z0`.
///
/// Tension-positive: `y` points away from the centre of curvature, so a
/// positive moment stretches fibres with `y > 0`.
pub fn bending_stress(moment: f64, y: f64, lambda_i: f64, iz0: f64) -> Result<f64> {
    if iz0 == 0.0 || !iz0.is_finite() {
        return Err(Error::Degenerate(format!("I_Z0 must be non-zero, got {iz0}")));
    }
    Ok(lambda_i * moment * y / iz0)
}

/// Transformed inertia plus the micro-element first moment about an axis at
/// `axis_offset` from the junction (positive outward).
pub fn section_properties(section: &LayeredSection, axis_offset: f64) -> SectionProperties {
    let lambda2 = section.lambda2();
    let LayeredSection { t1, t2, .. } = *section;
    let sz0 = t1 * (t1 / 2.0 - axis_offset) + lambda2 * t2 * (-t2 / 2.0 - axis_offset);
    SectionProperties {
        lambda2,
        iz0: composite_inertia(section),
        sz0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAMBDA_CU_AL: f64 = 110_000.0 / 80_700.0;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1e-300)
    }

    #[test]
    fn modulus_ratio_examples() {
        assert!(close(modulus_ratio(110_000.0, 80_700.0).unwrap(), 1.36307, 1e-5));
        assert_eq!(modulus_ratio(70_000.0, 70_000.0).unwrap(), 1.0);
        assert!(close(modulus_ratio(80_700.0, 110_000.0).unwrap(), 0.73364, 1e-5));
        assert!(matches!(modulus_ratio(0.0, 1.0), Err(Error::InvalidMaterial(_))));
        assert!(matches!(modulus_ratio(1.0, -2.0), Err(Error::InvalidMaterial(_))));
    }

    #[test]
    fn centroid_offset_examples() {
        assert_eq!(centroid_offset(1.0, 1.0, 1.0).unwrap(), 0.0);
        assert_eq!(centroid_offset(2.0, 0.0, 3.7).unwrap(), 1.0);
        // strip-integrated centroid of the scaled micro-element: -0.0768222338751966
        let e = centroid_offset(1.0, 1.0, LAMBDA_CU_AL).unwrap();
        assert!((e + 0.076_822_233_875_196_6).abs() < 1e-12);
        assert!(centroid_offset(0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn equivalent_thickness_same_material() {
        let s = LayeredSection::new(10.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let t0 = solve_equivalent_thickness(10.0, &s, 1.0).unwrap();
        assert!(close(t0, 2.0, 1e-12));
    }

    #[test]
    fn equivalent_thickness_cu_al() {
        let s = LayeredSection::new(10.0, 1.0, 1.0, 80_700.0, 110_000.0).unwrap();
        let t0 = solve_equivalent_thickness(9.92318, &s, LAMBDA_CU_AL).unwrap();
        // bisection reference at R = 9.92318: 2.3536333115072742
        assert!((t0 - 2.353_633_311_507_274).abs() < 1e-12);
        let k = stiffness_bracket(9.92318, &s, LAMBDA_CU_AL);
        let residual = t0.powi(3) + 4.0 * 9.92318_f64.powi(2) * t0 - k;
        assert!(residual.abs() < 1e-10 * k);
    }

    #[test]
    fn equivalent_thickness_rejects_nonpositive_bracket() {
        // lambda2 chosen so the inner layer's negative term dominates
        let s = LayeredSection { r: 10.0, t1: 0.0, t2: 1.0, e1: 1.0, e2: 1.0 };
        let err = solve_equivalent_thickness(10.0, &s, -5.0).unwrap_err();
        assert!(matches!(err, Error::NoPhysicalSolution(_)), "{err}");
    }

    #[test]
    fn equivalent_thickness_geometry_violation() {
        // a tiny radius with a huge bracket pushes the root past 2R
        let s = LayeredSection::new(10.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        let err = solve_equivalent_thickness(0.5, &s, 1.0).unwrap_err();
        assert!(matches!(err, Error::Geometry(_)), "{err}");
    }

    #[test]
    fn composite_inertia_examples() {
        let same = LayeredSection::new(10.0, 1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(close(composite_inertia(&same), 2020.0 * PI, 1e-14));
        assert!(close(composite_inertia(&same), 6346.017_160_251_382, 1e-13));
        let cu_al = LayeredSection::new(10.0, 1.0, 1.0, 80_700.0, 110_000.0).unwrap();
        assert!(close(composite_inertia(&cu_al), 7326.671_925_046_526, 1e-13));
        let empty = LayeredSection { r: 10.0, t1: 0.0, t2: 0.0, e1: 1.0, e2: 1.0 };
        assert_eq!(composite_inertia(&empty), 0.0);
    }

    #[test]
    fn bending_stress_examples() {
        assert_eq!(bending_stress(1234.0, 0.0, 1.3, 10.0).unwrap(), 0.0);
        let s = bending_stress(1000.0, 5.0, 1.0, 6346.017_160_251_382).unwrap();
        assert!((s - 0.787_895_757_880_67).abs() < 1e-12);
        let up = bending_stress(750.0, 3.25, 1.36, 5000.0).unwrap();
        let down = bending_stress(750.0, -3.25, 1.36, 5000.0).unwrap();
        assert_eq!(up, -down);
        assert!(bending_stress(1.0, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn equivalent_tube_examples() {
        let shape = BmtShape::new(22.0, 2.0, 0.5).unwrap();
        let same = equivalent_tube(&shape, 1.0).unwrap();
        assert!(close(same.outer_diameter, 22.0, 1e-12));
        assert!(close(same.thickness, 2.0, 1e-12));

        let cu_al = equivalent_tube(&shape, LAMBDA_CU_AL).unwrap();
        // reference: R = 9.923177766124803, t0 = 2.353634843834432
        assert!((cu_al.thickness - 2.353_634_843_834_432).abs() < 1e-11);
        assert!((cu_al.outer_diameter - 22.199_990_376_084_04).abs() < 1e-11);

        let single = BmtShape::new(22.0, 2.0, 1.0).unwrap();
        for lambda2 in [0.5, 1.0, 1.36, 2.0] {
            let eq = equivalent_tube(&single, lambda2).unwrap();
            assert!(close(eq.outer_diameter, 22.0, 1e-12));
            assert!(close(eq.thickness, 2.0, 1e-12));
        }
    }

    #[test]
    fn equivalent_tube_preserves_inertia() {
        let s = LayeredSection::new(10.0, 1.0, 1.0, 80_700.0, 110_000.0).unwrap();
        let tube = equivalent_section(&s).unwrap();
        assert!(close(tube.inertia(), composite_inertia(&s), 1e-12));
    }

    #[test]
    fn ratio_convention_inverts_layers() {
        let shape = BmtShape::new(22.0, 2.0, 0.25).unwrap();
        let (_, t1, t2) = shape.layers(RatioConvention::OuterFraction).unwrap();
        let (_, u1, u2) = shape.layers(RatioConvention::InnerFraction).unwrap();
        assert_eq!((t1, t2), (0.5, 1.5));
        assert_eq!((u1, u2), (1.5, 0.5));
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(BmtShape::new(10.0, 5.0, 0.5).is_err());
        assert!(BmtShape::new(10.0, 1.0, 1.5).is_err());
        assert!(LayeredSection::new(1.0, 0.5, 1.0, 1.0, 1.0).is_err());
        assert!(SingleShape::new(4.0, 2.0).is_err());
    }

    #[test]
    fn first_moment_vanishes_at_centroid() {
        let s = LayeredSection::new(12.0, 0.7, 1.3, 80_700.0, 110_000.0).unwrap();
        let e = centroid_offset(s.t1, s.t2, s.lambda2()).unwrap();
        assert!(section_properties(&s, e).sz0.abs() < 1e-14);
        assert!(section_properties(&s, 0.0).sz0.abs() > 1e-3);
    }
}
