/// A subset of the points of a space with cached distance-to-set.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetMask {
    member: Vec<bool>,
    dist: Vec<f64>,
    nearest: Vec<usize>,
    count: usize,
}

impl SubsetMask {
    pub(crate) fn from_parts(member: Vec<bool>, dist: Vec<f64>, nearest: Vec<usize>) -> Self {
        let count = member.iter().filter(|&&m| m).count();
        SubsetMask {
            member,
            dist,
            nearest,
            count,
        }
    }

    /// Number of points in the ambient space.
    pub fn universe(&self) -> usize {
        self.member.len()
    }

    /// Number of member points.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn is_full(&self) -> bool {
        self.count == self.member.len()
    }

    #[inline]
    pub fn contains(&self, i: usize) -> bool {
        self.member[i]
    }

    pub fn flags(&self) -> &[bool] {
        &self.member
    }

    /// Distance from point `i` to the set (0 exactly on members).
    #[inline]
    pub fn dist(&self, i: usize) -> f64 {
        self.dist[i]
    }

    pub fn distances(&self) -> &[f64] {
        &self.dist
    }

    /// Nearest member to `i`, smallest index among ties.
    #[inline]
    pub fn nearest(&self, i: usize) -> usize {
        self.nearest[i]
    }

    /// Member indices in increasing order.
    pub fn indices(&self) -> Vec<usize> {
        (0..self.member.len()).filter(|&i| self.member[i]).collect()
    }
}
