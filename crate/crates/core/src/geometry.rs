//! Rotation algebra, angular metrics and the axis-angle search-space cubes.
//!
//! Rotations are parameterised by axis-angle vectors `r` (direction = axis,
//! norm = angle). Every rotation has a representative in the closed ball of
//! radius pi, which the branch-and-bound search covers with axis-aligned
//! cubes.

use crate::scalar::Real;

pub(crate) fn dot3<T: Real>(a: &[T; 3], b: &[T; 3]) -> T {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross3<T: Real>(a: &[T; 3], b: &[T; 3]) -> [T; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm3<T: Real>(a: &[T; 3]) -> T {
    dot3(a, a).sqrt()
}

/// A direction on the unit sphere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitVec3<T> {
    x: T,
    y: T,
    z: T,
}

impl<T: Real> UnitVec3<T> {
    /// Normalizes `(x, y, z)`. Returns `None` for zero or non-finite input.
    pub fn new(x: T, y: T, z: T) -> Option<Self> {
        let n = norm3(&[x, y, z]);
        if !n.is_finite() || n <= T::zero() {
            return None;
        }
        Some(Self {
            x: x / n,
            y: y / n,
            z: z / n,
        })
    }

    pub fn from_array(v: [T; 3]) -> Option<Self> {
        Self::new(v[0], v[1], v[2])
    }

    /// Wraps components that are already unit norm.
    pub fn new_unchecked(x: T, y: T, z: T) -> Self {
        debug_assert!((norm3(&[x, y, z]) - T::one()).abs() < T::lit(1e-5));
        Self { x, y, z }
    }

    pub fn x_axis() -> Self {
        Self::new_unchecked(T::one(), T::zero(), T::zero())
    }

    pub fn y_axis() -> Self {
        Self::new_unchecked(T::zero(), T::one(), T::zero())
    }

    pub fn z_axis() -> Self {
        Self::new_unchecked(T::zero(), T::zero(), T::one())
    }

    /// Equatorial convention: x = cos(dec)cos(ra), y = cos(dec)sin(ra), z = sin(dec).
    pub fn from_ra_dec(ra: T, dec: T) -> Self {
        let (sd, cd) = dec.sin_cos();
        let (sr, cr) = ra.sin_cos();
        Self::new(cd * cr, cd * sr, sd).expect("trigonometric vector is finite")
    }

    #[inline]
    pub fn x(&self) -> T {
        self.x
    }

    #[inline]
    pub fn y(&self) -> T {
        self.y
    }

    #[inline]
    pub fn z(&self) -> T {
        self.z
    }

    #[inline]
    pub fn to_array(&self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    #[inline]
    pub fn dot(&self, other: &Self) -> T {
        dot3(&self.to_array(), &other.to_array())
    }

    /// Angle to `other` in `[0, pi]`.
    #[inline]
    pub fn angle_to(&self, other: &Self) -> T {
        angular_distance(self, other)
    }

    pub fn neg(&self) -> Self {
        Self::new_unchecked(-self.x, -self.y, -self.z)
    }

    pub fn cast<U: Real>(&self) -> UnitVec3<U> {
        UnitVec3::new(
            U::from_f64(self.x.to_f64().unwrap()).unwrap(),
            U::from_f64(self.y.to_f64().unwrap()).unwrap(),
            U::from_f64(self.z.to_f64().unwrap()).unwrap(),
        )
        .expect("cast of a unit vector")
    }
}

/// Angular distance between two unit vectors, in `[0, pi]`.
///
/// Evaluated as `atan2(|a x b|, a . b)`, which keeps full precision for small
/// and near-antipodal separations where `acos` of the dot product does not.
#[inline]
pub fn angular_distance<T: Real>(a: &UnitVec3<T>, b: &UnitVec3<T>) -> T {
    let (a, b) = (a.to_array(), b.to_array());
    norm3(&cross3(&a, &b)).atan2(dot3(&a, &b))
}

/// Axis-angle rotation vector.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct AxisAngle<T> {
    pub r: [T; 3],
}

impl<T: Real> AxisAngle<T> {
    pub fn new(r: [T; 3]) -> Self {
        Self { r }
    }

    pub fn identity() -> Self {
        Self {
            r: [T::zero(); 3],
        }
    }

    pub fn from_axis_angle(axis: &UnitVec3<T>, angle: T) -> Self {
        let a = axis.to_array();
        Self {
            r: [a[0] * angle, a[1] * angle, a[2] * angle],
        }
    }

    /// Rotation angle (norm of the vector).
    pub fn angle(&self) -> T {
        norm3(&self.r)
    }

    pub fn inverse(&self) -> Self {
        Self {
            r: [-self.r[0], -self.r[1], -self.r[2]],
        }
    }

    pub fn is_in_pi_ball(&self) -> bool {
        self.angle() <= T::PI()
    }

    /// Projects the vector onto the closed pi-ball (radial clamp).
    pub fn clamp_to_pi_ball(&self) -> Self {
        let n = self.angle();
        if n <= T::PI() {
            return *self;
        }
        let mut s = T::PI() / n;
        loop {
            let c = Self {
                r: [self.r[0] * s, self.r[1] * s, self.r[2] * s],
            };
            if c.is_in_pi_ball() {
                return c;
            }
            s = s * (T::one() - T::epsilon());
        }
    }

    /// Equivalent vector with norm in `[0, pi]` (same rotation).
    pub fn canonical(&self) -> Self {
        let two_pi = T::two() * T::PI();
        let n = self.angle();
        if n <= T::PI() {
            return *self;
        }
        let mut a = n % two_pi;
        if a > T::PI() {
            a = a - two_pi;
        }
        let s = a / n;
        Self {
            r: [self.r[0] * s, self.r[1] * s, self.r[2] * s],
        }
    }

    /// Rotates `v` with the Rodrigues formula.
    #[inline]
    pub fn rotate(&self, v: &UnitVec3<T>) -> UnitVec3<T> {
        rotate(self, v)
    }

    /// Unit quaternion `[w, x, y, z]`.
    pub fn to_quaternion(&self) -> [T; 4] {
        let angle = self.angle();
        if angle == T::zero() {
            return [T::one(), T::zero(), T::zero(), T::zero()];
        }
        let (s, c) = (angle * T::half()).sin_cos();
        let k = s / angle;
        [c, self.r[0] * k, self.r[1] * k, self.r[2] * k]
    }

    /// Axis-angle vector of a (not necessarily normalized) quaternion `[w, x, y, z]`,
    /// with angle in `[0, pi]`.
    pub fn from_quaternion(q: [T; 4]) -> Self {
        let q = if q[0] < T::zero() {
            [-q[0], -q[1], -q[2], -q[3]]
        } else {
            q
        };
        let v = [q[1], q[2], q[3]];
        let vn = norm3(&v);
        if vn == T::zero() {
            return Self::identity();
        }
        let angle = T::two() * vn.atan2(q[0]);
        let k = angle / vn;
        Self {
            r: [v[0] * k, v[1] * k, v[2] * k],
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &Self) -> Self {
        let a = self.to_quaternion();
        let b = other.to_quaternion();
        let q = [
            a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
            a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
            a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
            a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
        ];
        Self::from_quaternion(q)
    }

    /// Angle of the relative rotation `self^-1 ∘ other`.
    pub fn distance_to(&self, other: &Self) -> T {
        self.inverse().compose(other).angle()
    }
}

/// Applies the rotation `r` to `v` (Rodrigues formula). `r = 0` returns `v`.
#[inline]
pub fn rotate<T: Real>(r: &AxisAngle<T>, v: &UnitVec3<T>) -> UnitVec3<T> {
    let angle = r.angle();
    if angle == T::zero() {
        return *v;
    }
    let k = [r.r[0] / angle, r.r[1] / angle, r.r[2] / angle];
    let v = v.to_array();
    let (s, c) = angle.sin_cos();
    let kxv = cross3(&k, &v);
    let kv = dot3(&k, &v) * (T::one() - c);
    UnitVec3 {
        x: v[0] * c + kxv[0] * s + k[0] * kv,
        y: v[1] * c + kxv[1] * s + k[1] * kv,
        z: v[2] * c + kxv[2] * s + k[2] * kv,
    }
}

/// Axis-aligned cube of axis-angle space, `[center - h, center + h)` per axis.
///
/// `alpha()` is the center-to-vertex distance, which bounds the angular
/// displacement of any rotated vector between the center rotation and any
/// rotation inside the cube.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationCube<T> {
    pub center: [T; 3],
    pub half_side: T,
}

impl<T: Real> RotationCube<T> {
    /// The cube of side 2*pi enclosing the pi-ball.
    pub fn root() -> Self {
        Self {
            center: [T::zero(); 3],
            half_side: T::PI(),
        }
    }

    pub fn side(&self) -> T {
        self.half_side * T::two()
    }

    /// Center-to-vertex distance, `sqrt(3)/2 * side`.
    pub fn alpha(&self) -> T {
        T::lit(3.0).sqrt() * self.half_side
    }

    pub fn center_rotation(&self) -> AxisAngle<T> {
        AxisAngle::new(self.center)
    }

    pub fn lower(&self) -> [T; 3] {
        self.center.map(|c| c - self.half_side)
    }

    pub fn upper(&self) -> [T; 3] {
        self.center.map(|c| c + self.half_side)
    }

    /// Half-open membership test.
    pub fn contains(&self, r: &[T; 3]) -> bool {
        (0..3).all(|k| {
            r[k] >= self.center[k] - self.half_side && r[k] < self.center[k] + self.half_side
        })
    }

    /// Splits the cube into its eight octants.
    pub fn branch(&self) -> [Self; 8] {
        let h = self.half_side * T::half();
        std::array::from_fn(|d| {
            let sign = |bit: usize| {
                if d & (1 << bit) != 0 {
                    T::one()
                } else {
                    -T::one()
                }
            };
            Self {
                center: [
                    self.center[0] + sign(0) * h,
                    self.center[1] + sign(1) * h,
                    self.center[2] + sign(2) * h,
                ],
                half_side: h,
            }
        })
    }

    /// Distance from the origin to the closest point of the cube.
    pub fn min_norm(&self) -> T {
        let lo = self.lower();
        let hi = self.upper();
        let nearest: [T; 3] =
            std::array::from_fn(|k| T::zero().max(lo[k]).min(hi[k]));
        norm3(&nearest)
    }

    /// True iff the cube reaches into the closed pi-ball.
    pub fn intersects_pi_ball(&self) -> bool {
        self.min_norm() <= T::PI()
    }
}
