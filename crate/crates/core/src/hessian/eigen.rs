//! Closed-form eigenvalues of real symmetric 3×3 matrices.

use std::cmp::Ordering;

use crate::scalar::Scalar;

/// Symmetric 3×3 matrix stored by its six unique entries.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct SymMat3<T> {
    pub xx: T,
    pub yy: T,
    pub zz: T,
    pub xy: T,
    pub xz: T,
    pub yz: T,
}

impl<T: Scalar> SymMat3<T> {
    pub fn new(xx: T, yy: T, zz: T, xy: T, xz: T, yz: T) -> Self {
        SymMat3 { xx, yy, zz, xy, xz, yz }
    }

    pub fn diagonal(a: T, b: T, c: T) -> Self {
        Self::new(a, b, c, T::zero(), T::zero(), T::zero())
    }

    pub fn trace(&self) -> T {
        self.xx + self.yy + self.zz
    }

    pub fn determinant(&self) -> T {
        let SymMat3 { xx, yy, zz, xy, xz, yz } = *self;
        xx * (yy * zz - yz * yz) - xy * (xy * zz - yz * xz) + xz * (xy * yz - yy * xz)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> T {
        let two = T::one() + T::one();
        (self.xx * self.xx
            + self.yy * self.yy
            + self.zz * self.zz
            + two * (self.xy * self.xy + self.xz * self.xz + self.yz * self.yz))
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        [self.xx, self.yy, self.zz, self.xy, self.xz, self.yz]
            .iter()
            .all(|v| v.is_finite())
    }

    /// `det(self - λI)`, evaluated without expanding the polynomial.
    pub fn characteristic(&self, lambda: T) -> T {
        SymMat3 {
            xx: self.xx - lambda,
            yy: self.yy - lambda,
            zz: self.zz - lambda,
            ..*self
        }
        .determinant()
    }

    fn to_array(self) -> [[T; 3]; 3] {
        [
            [self.xx, self.xy, self.xz],
            [self.xy, self.yy, self.yz],
            [self.xz, self.yz, self.zz],
        ]
    }
}

/// Eigenvalues ordered by magnitude: `|l1| <= |l2| <= |l3|`.
///
/// Among equal magnitudes the positive value comes first.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct EigenTriple<T> {
    pub l1: T,
    pub l2: T,
    pub l3: T,
}

impl<T: Scalar> EigenTriple<T> {
    /// Orders three eigenvalues by magnitude with the deterministic tie-break.
    pub fn from_unordered(mut v: [T; 3]) -> Self {
        let cmp = |a: &T, b: &T| -> Ordering {
            a.abs()
                .partial_cmp(&b.abs())
                .unwrap_or(Ordering::Equal)
                .then_with(|| b.partial_cmp(a).unwrap_or(Ordering::Equal))
        };
        if cmp(&v[0], &v[1]) == Ordering::Greater {
            v.swap(0, 1);
        }
        if cmp(&v[1], &v[2]) == Ordering::Greater {
            v.swap(1, 2);
        }
        if cmp(&v[0], &v[1]) == Ordering::Greater {
            v.swap(0, 1);
        }
        EigenTriple {
            l1: v[0],
            l2: v[1],
            l3: v[2],
        }
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.l1, self.l2, self.l3]
    }
}

/// Eigenvalues of a symmetric 3×3 matrix, ordered by magnitude.
///
/// Uses the trigonometric solution of the characteristic cubic. When the
/// cubic's discriminant is numerically degenerate (a repeated root, or a
/// matrix too close to a multiple of the identity for the normalised form to
/// be accurate) cyclic Jacobi rotations are used instead.
pub fn eigen_symmetric_3x3<T: Scalar>(h: &SymMat3<T>) -> EigenTriple<T> {
    EigenTriple::from_unordered(eigenvalues(h))
}

fn eigenvalues<T: Scalar>(h: &SymMat3<T>) -> [T; 3] {
    let off = h.xy * h.xy + h.xz * h.xz + h.yz * h.yz;
    if off.is_zero() {
        return [h.xx, h.yy, h.zz];
    }
    let three = T::of(3.0);
    let two = T::of(2.0);
    let trace = h.trace();
    let q = trace / three;
    let (a, b, c) = (h.xx - q, h.yy - q, h.zz - q);
    let p2 = a * a + b * b + c * c + two * off;
    let p = (p2 / T::of(6.0)).sqrt();
    let shifted = SymMat3 {
        xx: a,
        yy: b,
        zz: c,
        ..*h
    };
    let r = shifted.determinant() / (two * p * p * p);
    if !(r.abs() < T::one() - T::of(1e-6)) {
        return jacobi(h);
    }
    let phi = r.acos() / three;
    let e1 = q + two * p * phi.cos();
    let e3 = q + two * p * (phi + two * T::PI() / three).cos();
    let e2 = trace - e1 - e3;
    [e1, e2, e3]
}

/// Cyclic Jacobi eigenvalue iteration on the full matrix.
pub(crate) fn jacobi<T: Scalar>(h: &SymMat3<T>) -> [T; 3] {
    const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];
    let mut m = h.to_array();
    let scale = h.norm();
    let tol = T::epsilon() * scale;
    for _ in 0..50 {
        let off = (m[0][1] * m[0][1] + m[0][2] * m[0][2] + m[1][2] * m[1][2]).sqrt();
        if off <= tol || off.is_zero() {
            break;
        }
        for &(p, q) in &PAIRS {
            let apq = m[p][q];
            if apq.is_zero() {
                continue;
            }
            let theta = (m[q][q] - m[p][p]) / (T::of(2.0) * apq);
            let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
            let c = T::one() / (t * t + T::one()).sqrt();
            let s = t * c;
            m[p][p] = m[p][p] - t * apq;
            m[q][q] = m[q][q] + t * apq;
            m[p][q] = T::zero();
            m[q][p] = T::zero();
            let r = 3 - p - q;
            let (arp, arq) = (m[r][p], m[r][q]);
            m[r][p] = c * arp - s * arq;
            m[p][r] = m[r][p];
            m[r][q] = s * arp + c * arq;
            m[q][r] = m[r][q];
        }
    }
    [m[0][0], m[1][1], m[2][2]]
}
