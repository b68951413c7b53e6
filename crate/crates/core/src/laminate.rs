//! Finite-order laminates as certified split trees, the diagonal cone
//! constraint they live in, and staircase constructions whose p-th
//! moments diverge exactly at the critical exponent.
//!
//! A laminate of finite order is built from a Dirac mass by repeatedly
//! splitting an atom M into tB + (1-t)C with rank(B - C) = 1. The tree
//! remembers every split, so the defining certificates (collinearity,
//! rank-one increments, weight bookkeeping, barycenter preservation) can
//! be re-checked after the fact.
//!
//! The staircase laminate walks an isotropic carrier diag(c, c) up the
//! diagonal, shedding atoms onto the rays y = x/K and y = Kx of the cone
//!
//! ```text
//!   C = { (x, y) : x > 0, x/K < y < Kx }
//! ```
//!
//! Each unit step from diag(k, k) splits twice:
//!
//! ```text
//!   diag(k, k)   = t * diag(k, k/K)       + (1-t) * diag(k, k+1)
//!   diag(k, k+1) = s * diag((k+1)/K, k+1) + (1-s) * diag(k+1, k+1)
//! ```
//!
//! Arithmetic carrier steps make the carrier weight decay like
//! k^(-p_K), p_K = 2K/(K-1), which is what drives the moment dichotomy:
//! below p_K the atom moments converge, at p_K they grow like log n. A
//! short prologue of geometric steps (ratio (1+K)/2) lifts the carrier
//! from 1 to k0 = ceil(1/(K-1)) + 1, below which the unit step would
//! leave the cone. The final carrier atom sits at the isotropic center
//! of the cone; all other atoms sit on the rays (epsilon = 0) or are
//! pulled strictly inside by a relative shift (epsilon > 0).

use serde::{Deserialize, Serialize};

use crate::mat2::{Kahan, Mat2};
use crate::{Error, Result};

/// Index of a node in a laminate's arena.
pub type NodeId = usize;

/// One node of the split tree. Atoms carry their absolute weight (the
/// product of branch factors from the root).
#[derive(Debug, Clone)]
pub enum Node {
    Split {
        matrix: Mat2,
        t: f64,
        left: NodeId,
        right: NodeId,
    },
    Atom {
        matrix: Mat2,
        weight: f64,
    },
}

impl Node {
    pub fn matrix(&self) -> &Mat2 {
        match self {
            Node::Split { matrix, .. } => matrix,
            Node::Atom { matrix, .. } => matrix,
        }
    }
}

/// A laminate of finite order: an arena-backed binary split tree.
///
/// Construction goes through [`Laminate::dirac`] and [`Laminate::split`]
/// only, so every tree in circulation carries valid certificates;
/// [`Laminate::validate`] re-checks them all from scratch (used after
/// JSON import and in tests).
#[derive(Debug, Clone)]
pub struct Laminate {
    nodes: Vec<Node>,
    root: NodeId,
}

/// Tolerances of the certificate suite.
const COLLINEAR_TOL: f64 = 1e-12;
const RANK_ONE_TOL: f64 = 1e-12;
const WEIGHT_TOL: f64 = 1e-12;
const BARYCENTER_TOL: f64 = 1e-10;

impl Laminate {
    /// The single-atom laminate: a Dirac mass at `matrix`.
    pub fn dirac(matrix: Mat2) -> Laminate {
        Laminate {
            nodes: vec![Node::Atom {
                matrix,
                weight: 1.0,
            }],
            root: 0,
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Splits the atom `leaf` into tB + (1-t)C. Checks the certificate
    /// (collinearity, rank-one difference, t strictly interior) before
    /// touching the tree. Returns the ids of the B and C atoms.
    pub fn split(&mut self, leaf: NodeId, b: Mat2, c: Mat2, t: f64) -> Result<(NodeId, NodeId)> {
        let (matrix, weight) = match self.nodes.get(leaf) {
            Some(Node::Atom { matrix, weight }) => (*matrix, *weight),
            Some(Node::Split { .. }) => {
                return Err(Error::BadParameter(format!(
                    "node {leaf} is already split"
                )))
            }
            None => {
                return Err(Error::BadParameter(format!(
                    "node id {leaf} out of range"
                )))
            }
        };
        if !(t.is_finite() && t > 0.0 && t < 1.0) {
            return Err(Error::BadParameter(format!(
                "split fraction t = {t} outside (0, 1)"
            )));
        }
        if !b.is_finite() || !c.is_finite() {
            return Err(Error::BadParameter("split endpoint is not finite".into()));
        }
        check_rank_one(&b, &c)?;
        check_collinear(&matrix, &b, &c, t)?;

        let left = self.nodes.len();
        let right = left + 1;
        self.nodes.push(Node::Atom {
            matrix: b,
            weight: weight * t,
        });
        self.nodes.push(Node::Atom {
            matrix: c,
            weight: weight * (1.0 - t),
        });
        self.nodes[leaf] = Node::Split {
            matrix,
            t,
            left,
            right,
        };
        Ok((left, right))
    }

    /// Calls `f(weight, matrix)` for every atom, left branch first.
    /// Iterative: staircase trees are one long spine and would blow the
    /// stack under recursion.
    fn for_each_atom(&self, mut f: impl FnMut(f64, &Mat2)) {
        let mut stack = vec![self.root];
        while let Some(id) = stack.pop() {
            match &self.nodes[id] {
                Node::Atom { matrix, weight } => f(*weight, matrix),
                Node::Split { left, right, .. } => {
                    stack.push(*right);
                    stack.push(*left);
                }
            }
        }
    }

    /// All atoms as (weight, matrix), in deterministic left-first order.
    pub fn atoms(&self) -> Vec<(f64, Mat2)> {
        let mut out = Vec::new();
        self.for_each_atom(|w, m| out.push((w, *m)));
        out
    }

    /// Weighted sum of the atom matrices.
    pub fn barycenter(&self) -> Mat2 {
        let mut acc = [Kahan::new(); 4];
        self.for_each_atom(|w, m| {
            let e = m.to_array();
            acc[0].add(w * e[0][0]);
            acc[1].add(w * e[0][1]);
            acc[2].add(w * e[1][0]);
            acc[3].add(w * e[1][1]);
        });
        Mat2::new(acc[0].value(), acc[1].value(), acc[2].value(), acc[3].value())
    }

    /// p-th moment of the Frobenius norm: sum of w |M|_F^p over atoms.
    pub fn moment(&self, p: f64) -> f64 {
        let mut acc = Kahan::new();
        self.for_each_atom(|w, m| acc.add(w * m.frob().powf(p)));
        acc.value()
    }

    /// Re-checks the whole certificate suite: tree shape, split
    /// collinearity and rank-one increments, stored weights against
    /// branch products, total mass, and barycenter against the root.
    pub fn validate(&self) -> Result<()> {
        if self.root >= self.nodes.len() {
            return Err(Error::BadParameter("root id out of range".into()));
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![(self.root, 1.0f64)];
        let mut wsum = Kahan::new();
        let mut bary = [Kahan::new(); 4];
        while let Some((id, w)) = stack.pop() {
            if seen[id] {
                return Err(Error::BadParameter(format!(
                    "node {id} reached twice; not a tree"
                )));
            }
            seen[id] = true;
            match &self.nodes[id] {
                Node::Atom { matrix, weight } => {
                    if !matrix.is_finite() || !weight.is_finite() || *weight <= 0.0 {
                        return Err(Error::BadParameter(format!(
                            "atom {id} has invalid data (weight {weight})"
                        )));
                    }
                    if (weight - w).abs() > WEIGHT_TOL * w {
                        return Err(Error::NumericalError(format!(
                            "atom {id} stores weight {weight} but its branch product is {w}"
                        )));
                    }
                    wsum.add(*weight);
                    let e = matrix.to_array();
                    bary[0].add(weight * e[0][0]);
                    bary[1].add(weight * e[0][1]);
                    bary[2].add(weight * e[1][0]);
                    bary[3].add(weight * e[1][1]);
                }
                Node::Split {
                    matrix,
                    t,
                    left,
                    right,
                } => {
                    if !(*t > 0.0 && *t < 1.0) {
                        return Err(Error::BadParameter(format!(
                            "split {id} has t = {t} outside (0, 1)"
                        )));
                    }
                    if *left >= self.nodes.len() || *right >= self.nodes.len() {
                        return Err(Error::BadParameter(format!(
                            "split {id} points past the arena"
                        )));
                    }
                    let bm = *self.nodes[*left].matrix();
                    let cm = *self.nodes[*right].matrix();
                    check_rank_one(&bm, &cm)?;
                    check_collinear(matrix, &bm, &cm, *t)?;
                    stack.push((*left, w * *t));
                    stack.push((*right, w * (1.0 - *t)));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::BadParameter(
                "arena contains nodes unreachable from the root".into(),
            ));
        }
        if (wsum.value() - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::NumericalError(format!(
                "atom weights sum to {} instead of 1",
                wsum.value()
            )));
        }
        let bary = Mat2::new(bary[0].value(), bary[1].value(), bary[2].value(), bary[3].value());
        let root_m = self.nodes[self.root].matrix();
        if bary.max_abs_diff(root_m) > BARYCENTER_TOL * (1.0 + root_m.frob()) {
            return Err(Error::NumericalError(format!(
                "barycenter {bary:?} drifted from the root {root_m:?}"
            )));
        }
        Ok(())
    }

    // Serialization -----------------------------------------------------

    /// JSON form: a flat node array with children as indices, plus the
    /// root index. Flat on purpose: spine depth grows linearly with the
    /// staircase length and nested JSON would exhaust both the parser's
    /// recursion limit and the stack. Floats survive bit-exactly through
    /// the shortest-round-trip encoding.
    pub fn to_json(&self) -> String {
        let nodes: Vec<NodeDto> = self
            .nodes
            .iter()
            .map(|n| match n {
                Node::Split {
                    matrix,
                    t,
                    left,
                    right,
                } => NodeDto {
                    matrix: *matrix,
                    t: Some(*t),
                    children: Some([*left, *right]),
                    weight: None,
                },
                Node::Atom { matrix, weight } => NodeDto {
                    matrix: *matrix,
                    t: None,
                    children: None,
                    weight: Some(*weight),
                },
            })
            .collect();
        let dto = TreeDto {
            nodes,
            root: self.root,
        };
        serde_json::to_string(&dto).expect("laminate serialization cannot fail")
    }

    /// Parses the JSON form and re-validates every certificate.
    pub fn from_json(text: &str) -> Result<Laminate> {
        let dto: TreeDto = serde_json::from_str(text)
            .map_err(|e| Error::BadParameter(format!("laminate JSON: {e}")))?;
        let mut nodes = Vec::with_capacity(dto.nodes.len());
        for (i, n) in dto.nodes.into_iter().enumerate() {
            match (n.t, n.children, n.weight) {
                (Some(t), Some([l, r]), None) => nodes.push(Node::Split {
                    matrix: n.matrix,
                    t,
                    left: l,
                    right: r,
                }),
                (None, None, Some(w)) => nodes.push(Node::Atom {
                    matrix: n.matrix,
                    weight: w,
                }),
                _ => {
                    return Err(Error::BadParameter(format!(
                        "node {i} is neither a split (t + children) nor an atom (weight)"
                    )))
                }
            }
        }
        let lam = Laminate {
            nodes,
            root: dto.root,
        };
        lam.validate()?;
        Ok(lam)
    }

    /// Flat CSV of the atoms: weight,m11,m12,m21,m22 with 17 significant
    /// digits, enough to reconstruct each f64 exactly.
    pub fn atoms_csv(&self) -> String {
        let mut out = String::from("weight,m11,m12,m21,m22\n");
        self.for_each_atom(|w, m| {
            out.push_str(&format!(
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                w, m.a11, m.a12, m.a21, m.a22
            ));
        });
        out
    }
}

#[derive(Serialize, Deserialize)]
struct NodeDto {
    matrix: Mat2,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    children: Option<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct TreeDto {
    nodes: Vec<NodeDto>,
    root: usize,
}

fn check_rank_one(b: &Mat2, c: &Mat2) -> Result<()> {
    let d = *b - *c;
    let norm = d.frob();
    let det = d.det();
    if norm == 0.0 || det.abs() > RANK_ONE_TOL * norm * norm {
        return Err(Error::NotRankOne(det, norm));
    }
    Ok(())
}

fn check_collinear(target: &Mat2, b: &Mat2, c: &Mat2, t: f64) -> Result<()> {
    let mix = *b * t + *c * (1.0 - t);
    let defect = target.max_abs_diff(&mix);
    let scale = 1.0 + target.frob().max(b.frob()).max(c.frob());
    if defect > COLLINEAR_TOL * scale {
        return Err(Error::NotCollinear(defect));
    }
    Ok(())
}

// Cone geometry ---------------------------------------------------------

/// Strict upper bound for the off-diagonal slack delta:
/// sqrt((1 - 1/K)(K - 1) / (4 max(S1, S2) K^2)).
pub fn delta_max(k: f64, s1: f64, s2: f64) -> Result<f64> {
    if !(k.is_finite() && k > 1.0) {
        return Err(Error::DomainError(format!("cone opening K = {k} must exceed 1")));
    }
    for (name, s) in [("S1", s1), ("S2", s2)] {
        if !(s.is_finite() && s >= 1.0 / k && s <= k) {
            return Err(Error::DomainError(format!(
                "{name} = {s} outside [1/K, K] = [{}, {k}]",
                1.0 / k
            )));
        }
    }
    Ok(((1.0 - 1.0 / k) * (k - 1.0) / (4.0 * s1.max(s2) * k * k)).sqrt())
}

/// Open cone membership: x > 0 and x/K < y < Kx.
pub fn in_cone(x: f64, y: f64, k: f64) -> bool {
    x > 0.0 && y > x / k && y < k * x
}

/// Cone opening, off-diagonal slack, and the two phase scale parameters
/// that cap it. Validated at construction so every consumer can rely on
/// delta < delta_max.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConeSpec {
    k: f64,
    delta: f64,
    s1: f64,
    s2: f64,
}

impl ConeSpec {
    pub fn new(k: f64, delta: f64, s1: f64, s2: f64) -> Result<ConeSpec> {
        let cap = delta_max(k, s1, s2)?;
        if !(delta.is_finite() && delta > 0.0 && delta < cap) {
            return Err(Error::DomainError(format!(
                "delta = {delta} outside (0, {cap}) for K = {k}, S = ({s1}, {s2})"
            )));
        }
        Ok(ConeSpec { k, delta, s1, s2 })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn s1(&self) -> f64 {
        self.s1
    }

    pub fn s2(&self) -> f64 {
        self.s2
    }
}

/// Constraint-set membership: diagonal part in the open cone and
/// |a12| < delta * a11.
pub fn in_constraint(m: &Mat2, spec: &ConeSpec) -> bool {
    in_cone(m.a11, m.a22, spec.k) && m.a12.abs() < spec.delta * m.a11
}

/// Whether M belongs to the phase set of sigma: row2(M) = J sigma row1(M)
/// within 1e-10, i.e. M stacks a gradient over its stream-function mate.
pub fn in_phase_set(m: &Mat2, sigma: &Mat2) -> bool {
    let want = Mat2::J.mul_vec(&sigma.mul_vec(&[m.a11, m.a12]));
    let d0 = m.a21 - want[0];
    let d1 = m.a22 - want[1];
    (d0 * d0 + d1 * d1).sqrt() <= 1e-10 * (1.0 + m.frob() * (1.0 + sigma.frob()))
}

// Diagonal connection ---------------------------------------------------

/// Finds a diagonal Q in the open cone rank-one connected to A, meaning
/// det(A - Q) = 0, i.e. (a11 - q1)(a22 - q2) = a12 a21.
///
/// The one-parameter family q1 = a11 + u, q2 = a22 + pi/u (pi = a12 a21)
/// carries every candidate; u = sqrt(|pi|) is tried first (it reproduces
/// the symmetric textbook pick), then its negative, then the family is
/// scanned between the breakpoints where a cone ray starts binding. A
/// negative pi at or below -(a11^2/4)(1 - 1/K)(K - 1) admits no
/// connection at all and returns [`Error::Infeasible`]; the delta bound
/// of a valid [`ConeSpec`] keeps well clear of that threshold.
pub fn find_diagonal_connection(a: &Mat2, spec: &ConeSpec) -> Result<Mat2> {
    if !in_constraint(a, spec) {
        return Err(Error::DomainError(format!(
            "connection source {a:?} violates the cone constraint"
        )));
    }
    let pi = a.a12 * a.a21;
    if pi == 0.0 {
        // One or both off-diagonal entries vanish; A_d itself is
        // connected (rank one, or rank zero when A is fully diagonal).
        return Ok(Mat2::diag(a.a11, a.a22));
    }
    let kk = spec.k;
    if pi < 0.0 {
        let threshold = -(a.a11 * a.a11 / 4.0) * (1.0 - 1.0 / kk) * (kk - 1.0);
        if pi <= threshold {
            return Err(Error::Infeasible(format!(
                "off-diagonal area {pi:.6e} at or below the feasibility threshold {threshold:.6e}"
            )));
        }
    }

    let q_of = |u: f64| Mat2::diag(a.a11 + u, a.a22 + pi / u);
    let root = pi.abs().sqrt();
    for u in [root, -root] {
        let q = q_of(u);
        if in_cone(q.a11, q.a22, kk) {
            return Ok(q);
        }
    }

    // Both symmetric picks sit outside the cone; scan the family between
    // the breakpoints where the ray constraints change sign. The
    // breakpoints are the roots of
    //   K u^2 + (K a11 - a22) u - pi        (upper ray y = Kx binding)
    //   u^2 - (K a22 - a11) u - K pi        (lower ray y = x/K binding)
    let mut cands: Vec<f64> = Vec::new();
    let quads = [
        (kk, kk * a.a11 - a.a22, -pi),
        (1.0, -(kk * a.a22 - a.a11), -kk * pi),
    ];
    for (qa, qb, qc) in quads {
        let disc = qb * qb - 4.0 * qa * qc;
        if disc >= 0.0 {
            let r = disc.sqrt();
            cands.push((-qb + r) / (2.0 * qa));
            cands.push((-qb - r) / (2.0 * qa));
        }
    }
    cands.retain(|u| u.is_finite() && *u != 0.0);
    let mut probes: Vec<f64> = Vec::new();
    for &u in &cands {
        probes.extend_from_slice(&[u * 0.5, u * 0.999, u * 1.001, u * 2.0]);
    }
    cands.sort_by(f64::total_cmp);
    for w in cands.windows(2) {
        if w[0].signum() == w[1].signum() {
            probes.push(0.5 * (w[0] + w[1]));
        }
    }
    let mut best: Option<(f64, Mat2)> = None;
    for u in probes {
        if u == 0.0 || !u.is_finite() {
            continue;
        }
        let q = q_of(u);
        if !in_cone(q.a11, q.a22, kk) {
            continue;
        }
        // Margin: distance of Q from both rays, relative to its size.
        let margin = (kk * q.a11 - q.a22).min(q.a22 - q.a11 / kk) / q.a11;
        if best.map_or(true, |(bm, _)| margin > bm) {
            best = Some((margin, q));
        }
    }
    best.map(|(_, q)| q).ok_or_else(|| {
        Error::NumericalError("connection family scan found no interior point".into())
    })
}

// Staircase construction ------------------------------------------------

/// Smallest carrier value at which the unit step k -> k+1 stays inside
/// the cone (k + 1 < Kk needs k > 1/(K-1)).
fn carrier_start(k: f64) -> f64 {
    (1.0 / (k - 1.0)).ceil() + 1.0
}

/// Largest admissible support shift for the given cone opening: the
/// geometric prologue caps it at (K-1)/(K+1), the first unit step at
/// (k0(K-1) - 1)/(k0 + 1).
pub fn epsilon_max(k: f64) -> Result<f64> {
    if !(k.is_finite() && k > 1.0) {
        return Err(Error::DomainError(format!("cone opening K = {k} must exceed 1")));
    }
    let k0 = carrier_start(k);
    Ok(((k - 1.0) / (k + 1.0)).min((k0 * (k - 1.0) - 1.0) / (k0 + 1.0)))
}

/// Hard cap on staircase length; 2n + O(log k0) nodes get allocated.
const MAX_STEPS: usize = 10_000_000;

/// One carrier advance diag(v, v) -> diag(next, next) (all times
/// `scale`), emitting one atom near each ray. For eps = 0 the atoms sit
/// exactly on the rays; eps > 0 pulls their off-axis ordinate toward the
/// carrier by the factor (1 + eps).
fn double_split(
    lam: &mut Laminate,
    leaf: NodeId,
    scale: f64,
    v: f64,
    next: f64,
    k: f64,
    eps: f64,
) -> Result<NodeId> {
    // Vertical: fix the first entry at v, move the second.
    let ylo = (v / k) * (1.0 + eps);
    let t = (next - v) / (next - ylo);
    let (_, mid) = lam.split(
        leaf,
        Mat2::diag(scale * v, scale * ylo),
        Mat2::diag(scale * v, scale * next),
        t,
    )?;
    // Horizontal: fix the second entry at next, move the first.
    let xup = (next / k) * (1.0 + eps);
    let s = (next - v) / (next - xup);
    let (_, carrier) = lam.split(
        mid,
        Mat2::diag(scale * xup, scale * next),
        Mat2::diag(scale * next, scale * next),
        s,
    )?;
    Ok(carrier)
}

/// Grows a staircase out of an isotropic carrier atom sitting at
/// diag(scale, scale): geometric prologue up to scale * k0, then n unit
/// steps. Returns the final carrier leaf.
fn extend_staircase(
    lam: &mut Laminate,
    mut leaf: NodeId,
    scale: f64,
    spec: &ConeSpec,
    n: usize,
    eps: f64,
) -> Result<NodeId> {
    let kk = spec.k;
    let k0 = carrier_start(kk);
    let gamma = (1.0 + kk) / 2.0;
    let mut v = 1.0;
    while v * gamma < k0 {
        leaf = double_split(lam, leaf, scale, v, v * gamma, kk, eps)?;
        v *= gamma;
    }
    if v < k0 {
        leaf = double_split(lam, leaf, scale, v, k0, kk, eps)?;
    }
    for j in 0..n {
        let k = k0 + j as f64;
        leaf = double_split(lam, leaf, scale, k, k + 1.0, kk, eps)?;
    }
    Ok(leaf)
}

fn check_staircase_params(spec: &ConeSpec, n: usize, eps: f64) -> Result<()> {
    if n > MAX_STEPS {
        return Err(Error::DomainError(format!(
            "staircase length {n} exceeds the arena cap {MAX_STEPS}"
        )));
    }
    let cap = epsilon_max(spec.k)?;
    if !(eps.is_finite() && eps >= 0.0 && eps < cap) {
        return Err(Error::DomainError(format!(
            "support shift epsilon = {eps} outside [0, {cap}) for K = {}",
            spec.k
        )));
    }
    Ok(())
}

/// The staircase laminate with barycenter identity: geometric prologue
/// from diag(1, 1) to diag(k0, k0), then n unit carrier steps. All
/// split certificates are validated as the tree grows. n = 0 is allowed
/// and yields the prologue alone.
pub fn staircase(spec: &ConeSpec, n: usize, eps: f64) -> Result<Laminate> {
    check_staircase_params(spec, n, eps)?;
    let mut lam = Laminate::dirac(Mat2::IDENTITY);
    let root = lam.root();
    extend_staircase(&mut lam, root, 1.0, spec, n, eps)?;
    Ok(lam)
}

/// A laminate with barycenter A for any A in the constraint set.
///
/// Route: Q = [`find_diagonal_connection`]. If A is off-diagonal, split
/// A along the rank-one line through Q: the excursion point
/// P = A + e(A - Q) starts at e = 1 (so tau = 1/(1+e) = 1/2) and e
/// halves until P obeys the constraint; A = tau P + (1 - tau) Q is then
/// exact. The Q side is aligned onto an isotropic carrier by one
/// vertical and one horizontal split, and a staircase (eps = 0), scaled
/// to the carrier, finishes the tree.
pub fn laminate_for(a: &Mat2, spec: &ConeSpec, n: usize) -> Result<Laminate> {
    if !in_constraint(a, spec) {
        return Err(Error::DomainError(format!(
            "target {a:?} violates the cone constraint"
        )));
    }
    check_staircase_params(spec, n, 0.0)?;
    let q = find_diagonal_connection(a, spec)?;
    let mut lam = Laminate::dirac(*a);
    let mut leaf = lam.root();

    let excursion = *a - q;
    if excursion.frob() > 0.0 {
        let mut e = 1.0;
        let mut p = *a + excursion * e;
        let mut rounds = 0;
        while !in_constraint(&p, spec) {
            e *= 0.5;
            p = *a + excursion * e;
            rounds += 1;
            if rounds > 200 {
                return Err(Error::NumericalError(
                    "no admissible excursion point on the connection line".into(),
                ));
            }
        }
        let tau = 1.0 / (1.0 + e);
        let (_, q_side) = lam.split(leaf, p, q, tau)?;
        leaf = q_side;
    }

    // Align the diagonal carrier diag(q1, q2) onto an isotropic point
    // diag(y, y), y in (max(q1, q2), K q1), shedding one atom per ray.
    let (q1, q2) = (q.a11, q.a22);
    let kk = spec.k;
    let y = (q1.max(q2) * kk * q1).sqrt();
    let t = (y - q2) / (y - q1 / kk);
    let (_, mid) = lam.split(leaf, Mat2::diag(q1, q1 / kk), Mat2::diag(q1, y), t)?;
    let s = (y - q1) / (y - y / kk);
    let (_, carrier) = lam.split(mid, Mat2::diag(y / kk, y), Mat2::diag(y, y), s)?;

    extend_staircase(&mut lam, carrier, y, spec, n, 0.0)?;
    Ok(lam)
}

// Staircase diagnostics -------------------------------------------------

/// State of a staircase truncated at one carrier stage: the truncated
/// laminate's atoms are every atom emitted so far plus the carrier.
#[derive(Debug, Clone, Serialize)]
pub struct StaircaseStage {
    /// Carrier position (the diagonal entry of the isotropic matrix).
    pub k: f64,
    /// Carrier weight.
    pub weight: f64,
    /// Largest entry of |truncated barycenter - root|.
    pub barycenter_defect: f64,
    /// Truncated moments, one per requested exponent.
    pub moments: Vec<f64>,
}

/// Per-stage trace of a staircase.
#[derive(Debug, Clone, Serialize)]
pub struct StaircaseTrace {
    pub exponents: Vec<f64>,
    pub stages: Vec<StaircaseStage>,
}

/// Builds staircase(spec, n, eps) once and reads off, at every carrier
/// stage, the exact state of the shorter staircase truncated there: its
/// carrier weight, barycenter defect, and moments for each exponent.
/// One O(n) pass replaces n separate constructions.
pub fn staircase_trace(
    spec: &ConeSpec,
    n: usize,
    eps: f64,
    exponents: &[f64],
) -> Result<StaircaseTrace> {
    let lam = staircase(spec, n, eps)?;
    let root_m = *lam.nodes[lam.root].matrix();
    let mut bary = [Kahan::new(); 4];
    let mut moms: Vec<Kahan> = vec![Kahan::new(); exponents.len()];
    let mut w = 1.0f64;
    let mut cur = lam.root;
    let mut stages = Vec::new();

    loop {
        let node = &lam.nodes[cur];
        let m = node.matrix();
        if m.a12 == 0.0 && m.a21 == 0.0 && (m.a11 - m.a22).abs() <= 1e-12 * m.a11.abs() {
            let e = m.to_array();
            let b = Mat2::new(
                bary[0].value() + w * e[0][0],
                bary[1].value() + w * e[0][1],
                bary[2].value() + w * e[1][0],
                bary[3].value() + w * e[1][1],
            );
            let frob = m.frob();
            stages.push(StaircaseStage {
                k: m.a11,
                weight: w,
                barycenter_defect: b.max_abs_diff(&root_m),
                moments: exponents
                    .iter()
                    .zip(&moms)
                    .map(|(p, acc)| {
                        let mut acc = *acc;
                        acc.add(w * frob.powf(*p));
                        acc.value()
                    })
                    .collect(),
            });
        }
        match node {
            Node::Atom { .. } => break,
            Node::Split { t, left, right, .. } => {
                // The left branch holds the atoms shed at this level.
                let mut sub = vec![*left];
                while let Some(id) = sub.pop() {
                    match &lam.nodes[id] {
                        Node::Atom { matrix, weight } => {
                            let e = matrix.to_array();
                            bary[0].add(weight * e[0][0]);
                            bary[1].add(weight * e[0][1]);
                            bary[2].add(weight * e[1][0]);
                            bary[3].add(weight * e[1][1]);
                            let frob = matrix.frob();
                            for (p, acc) in exponents.iter().zip(moms.iter_mut()) {
                                acc.add(weight * frob.powf(*p));
                            }
                        }
                        Node::Split { left, right, .. } => {
                            sub.push(*right);
                            sub.push(*left);
                        }
                    }
                }
                w *= 1.0 - t;
                cur = *right;
            }
        }
    }
    Ok(StaircaseTrace {
        exponents: exponents.to_vec(),
        stages,
    })
}
