//! Stereographic projection of star vectors and spherical patches onto the
//! plane z = 0 from the projection point N = (0, 0, 1), plus the 2D
//! point/patch and patch/patch predicates.
//!
//! A spherical patch (cap) maps to the interior of a circle when it does not
//! contain N, to the exterior of a circle when it does, and to a half-plane
//! when N lies on its boundary.

use crate::error::{Error, Result};
use crate::geometry::UnitVec3;
use crate::scalar::{cot, Real};

/// Angular tolerance (radians) below which a patch boundary is treated as
/// passing through the projection point, and a point as coinciding with it.
pub const POLE_EPSILON: f64 = 1e-9;

/// Inclination `phi` from +z and azimuth `theta` measured from +y towards +x,
/// i.e. `(sin(phi)sin(theta), sin(phi)cos(theta), cos(phi))`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalCoord<T> {
    pub phi: T,
    pub theta: T,
}

impl<T: Real> SphericalCoord<T> {
    pub fn from_unit(v: &UnitVec3<T>) -> Self {
        let rho = v.x().hypot(v.y());
        let phi = rho.atan2(v.z());
        let mut theta = v.x().atan2(v.y());
        if theta < T::zero() {
            theta = theta + T::two() * T::PI();
        }
        if theta >= T::two() * T::PI() {
            theta = T::zero();
        }
        Self { phi, theta }
    }

    pub fn to_unit(&self) -> UnitVec3<T> {
        let (sp, cp) = self.phi.sin_cos();
        let (st, ct) = self.theta.sin_cos();
        UnitVec3::new(sp * st, sp * ct, cp).expect("spherical coordinates give a finite vector")
    }
}

/// Spherical cap `{ y : angle(y, center) <= alpha }`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphericalPatch<T> {
    pub center: UnitVec3<T>,
    pub alpha: T,
}

impl<T: Real> SphericalPatch<T> {
    pub fn new(center: UnitVec3<T>, alpha: T) -> Self {
        Self { center, alpha }
    }

    pub fn contains(&self, y: &UnitVec3<T>) -> bool {
        self.center.angle_to(y) <= self.alpha
    }

    pub fn intersects(&self, other: &Self) -> bool {
        self.center.angle_to(&other.center) <= self.alpha + other.alpha
    }
}

/// Which side of a half-plane boundary belongs to the patch.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HalfPlaneSide {
    /// `normal . p - offset >= 0`
    AtLeast,
    /// `normal . p - offset < 0`
    Below,
}

/// Image of a spherical patch on the projection plane.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProjectedPatch<T> {
    /// Closed disk. A zero radius is the image of a single point.
    InteriorCircle { center: [T; 2], radius: T },
    /// Closed complement of the open disk. A zero radius covers the plane.
    ExteriorCircle { center: [T; 2], radius: T },
    /// `normal` is a unit vector; `offset` is the distance from the origin to
    /// the boundary line along `normal`.
    HalfPlane {
        normal: [T; 2],
        offset: T,
        side: HalfPlaneSide,
    },
}

impl<T: Real> ProjectedPatch<T> {
    pub fn is_interior(&self) -> bool {
        matches!(self, ProjectedPatch::InteriorCircle { .. })
    }
}

#[inline]
fn dist2<T: Real>(a: &[T; 2], b: &[T; 2]) -> T {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn pole_eps<T: Real>() -> T {
    T::lit(POLE_EPSILON)
}

/// `cot(phi/2) * (sin(theta), cos(theta))`.
pub fn project_point<T: Real>(p: &SphericalCoord<T>) -> Result<[T; 2]> {
    if p.phi <= pole_eps() {
        return Err(Error::DegenerateProjection);
    }
    let k = cot(p.phi * T::half());
    let (s, c) = p.theta.sin_cos();
    Ok([k * s, k * c])
}

/// Projects a unit vector directly from its Cartesian components.
#[inline]
pub fn project_vector<T: Real>(v: &UnitVec3<T>) -> Result<[T; 2]> {
    let (x, y, z) = (v.x(), v.y(), v.z());
    let rho2 = x * x + y * y;
    if z > T::zero() {
        let eps = pole_eps::<T>();
        if rho2 <= eps * eps {
            return Err(Error::DegenerateProjection);
        }
        // (1 + z) / rho^2 == 1 / (1 - z) without the cancellation near N.
        let k = (T::one() + z) / rho2;
        Ok([x * k, y * k])
    } else {
        let k = T::one() / (T::one() - z);
        Ok([x * k, y * k])
    }
}

/// Projects a spherical patch.
///
/// `alpha` must be non-negative; `alpha = 0` gives a zero-radius interior
/// circle at the projected center, `alpha >= pi` an exterior circle of radius
/// zero (the whole plane).
pub fn project_patch<T: Real>(patch: &SphericalPatch<T>) -> Result<ProjectedPatch<T>> {
    let alpha = patch.alpha;
    if !(alpha >= T::zero()) || !alpha.is_finite() {
        return Err(Error::InvalidRadius(alpha.to_f64().unwrap_or(f64::NAN)));
    }
    if alpha == T::zero() {
        return Ok(ProjectedPatch::InteriorCircle {
            center: project_vector(&patch.center)?,
            radius: T::zero(),
        });
    }
    if alpha >= T::PI() {
        return Ok(ProjectedPatch::ExteriorCircle {
            center: [T::zero(); 2],
            radius: T::zero(),
        });
    }

    let c = &patch.center;
    let rho = c.x().hypot(c.y());
    let phi = rho.atan2(c.z());
    let dir = if rho > T::zero() {
        [c.x() / rho, c.y() / rho]
    } else {
        [T::zero(), T::one()]
    };
    let phi_l = phi - alpha;
    let phi_h = phi + alpha;
    let cot_h = cot(phi_h * T::half());

    if phi_l.abs() <= pole_eps() {
        return Ok(if phi_h < T::PI() {
            ProjectedPatch::HalfPlane {
                normal: dir,
                offset: cot_h,
                side: HalfPlaneSide::AtLeast,
            }
        } else {
            ProjectedPatch::HalfPlane {
                normal: [-dir[0], -dir[1]],
                offset: -cot_h,
                side: HalfPlaneSide::Below,
            }
        });
    }

    let cot_l = cot(phi_l * T::half());
    let mid = (cot_h + cot_l) * T::half();
    let center = [mid * dir[0], mid * dir[1]];
    let radius = (cot_h - cot_l).abs() * T::half();
    Ok(if phi_l > T::zero() {
        ProjectedPatch::InteriorCircle { center, radius }
    } else {
        ProjectedPatch::ExteriorCircle { center, radius }
    })
}

/// Point-in-patch test on the plane.
#[inline]
pub fn point_in_patch<T: Real>(p: &[T; 2], patch: &ProjectedPatch<T>) -> bool {
    match *patch {
        ProjectedPatch::InteriorCircle { center, radius } => dist2(p, &center) <= radius,
        ProjectedPatch::ExteriorCircle { center, radius } => dist2(p, &center) >= radius,
        ProjectedPatch::HalfPlane {
            normal,
            offset,
            side,
        } => {
            let s = normal[0] * p[0] + normal[1] * p[1] - offset;
            match side {
                HalfPlaneSide::AtLeast => s >= T::zero(),
                HalfPlaneSide::Below => s < T::zero(),
            }
        }
    }
}

fn disk_meets<T: Real>(center: &[T; 2], radius: T, other: &ProjectedPatch<T>) -> bool {
    match *other {
        ProjectedPatch::InteriorCircle { center: c, radius: r } => dist2(center, &c) <= radius + r,
        // Some point of the disk is at distance >= r from c.
        ProjectedPatch::ExteriorCircle { center: c, radius: r } => dist2(center, &c) + radius >= r,
        ProjectedPatch::HalfPlane {
            normal,
            offset,
            side,
        } => {
            let s = normal[0] * center[0] + normal[1] * center[1] - offset;
            match side {
                HalfPlaneSide::AtLeast => s + radius >= T::zero(),
                HalfPlaneSide::Below => s - radius < T::zero(),
            }
        }
    }
}

/// Patch/patch intersection on the plane.
///
/// Pairs without an interior circle always intersect: both images contain
/// the projection point (at infinity).
pub fn patch_intersects_patch<T: Real>(a: &ProjectedPatch<T>, b: &ProjectedPatch<T>) -> bool {
    match (a, b) {
        (ProjectedPatch::InteriorCircle { center, radius }, other)
        | (other, ProjectedPatch::InteriorCircle { center, radius }) => {
            disk_meets(center, *radius, other)
        }
        _ => true,
    }
}

/// The interior/exterior row exactly as tabulated in the literature,
/// `||c' - c|| >= r' + r`. It only detects a disk lying entirely outside the
/// excluded disk and misses partial overlaps; kept for comparison tests.
pub fn table_interior_exterior_verbatim<T: Real>(
    interior: (&[T; 2], T),
    exterior: (&[T; 2], T),
) -> bool {
    dist2(interior.0, exterior.0) >= interior.1 + exterior.1
}
