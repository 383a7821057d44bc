use super::PotentialOracle;

/// Coordinate axis a torus is rotationally symmetric about.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Axis {
    X1,
    X2,
    #[default]
    X3,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X1 => 0,
            Axis::X2 => 1,
            Axis::X3 => 2,
        }
    }
}

/// Solid torus in `R³`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Torus {
    pub center: [f64; 3],
    pub major_radius: f64,
    pub minor_radius: f64,
    pub axis: Axis,
}

impl Torus {
    pub fn contains(&self, x: &[f64]) -> bool {
        let a = self.axis.index();
        let (p, q) = ((a + 1) % 3, (a + 2) % 3);
        let radial = (x[p] - self.center[p]).hypot(x[q] - self.center[q]);
        let along = x[a] - self.center[a];
        let off = radial - self.major_radius;
        off * off + along * along <= self.minor_radius * self.minor_radius
    }
}

/// Sets that can answer point-membership queries.
pub trait Membership: Send + Sync {
    fn dim(&self) -> usize;
    fn contains(&self, x: &[f64]) -> bool;
}

/// All of `R^d`.
#[derive(Clone, Copy, Debug)]
pub struct WholeSpace(pub usize);

impl Membership for WholeSpace {
    fn dim(&self) -> usize {
        self.0
    }
    fn contains(&self, _x: &[f64]) -> bool {
        true
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Region {
    T1,
    T2,
    Outside,
}

/// `K = T1 ∪ T2` with the penalty potential `f = 0` on `K`, `outside_penalty`
/// elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToriDomain {
    pub t1: Torus,
    pub t2: Torus,
    pub outside_penalty: f64,
}

impl Default for ToriDomain {
    fn default() -> Self {
        Self::with_axis(Axis::X3)
    }
}

impl ToriDomain {
    /// `T1`: centre (10,0,0), radii 10/1; `T2`: centre (−13,0,0), radii 3/1.
    pub fn with_axis(axis: Axis) -> Self {
        Self {
            t1: Torus {
                center: [10.0, 0.0, 0.0],
                major_radius: 10.0,
                minor_radius: 1.0,
                axis,
            },
            t2: Torus {
                center: [-13.0, 0.0, 0.0],
                major_radius: 3.0,
                minor_radius: 1.0,
                axis,
            },
            outside_penalty: 100.0,
        }
    }

    pub fn locate(&self, x: &[f64]) -> Region {
        if self.t1.contains(x) {
            Region::T1
        } else if self.t2.contains(x) {
            Region::T2
        } else {
            Region::Outside
        }
    }

    pub fn potential(&self, x: &[f64]) -> f64 {
        if self.contains(x) {
            0.0
        } else {
            self.outside_penalty
        }
    }
}

impl Membership for ToriDomain {
    fn dim(&self) -> usize {
        3
    }
    fn contains(&self, x: &[f64]) -> bool {
        self.t1.contains(x) || self.t2.contains(x)
    }
}

impl PotentialOracle for ToriDomain {
    fn dim(&self) -> usize {
        3
    }
    fn evaluate(&self, x: &[f64]) -> f64 {
        self.potential(x)
    }
}
