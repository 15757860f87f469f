//! Quadratic rational maps of P^3: validation, the seven-type
//! classifier, constructive canonicalization to normal form, inverse
//! construction and composition.
//!
//! The classifier certifies every verdict by constructing the inverse
//! and checking the round trip through cross minors, so a report is
//! only ever produced for genuine bidegree (2,2) maps.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::arith::{rat, rat_sqrt, Rat};
use crate::forms::{
    extract_linear_factors, jacobian_det, mat_kernel, mat_rank, mat_solve, Factorization, HForm,
    LinMap, Point,
};

/// The seven linear-equivalence classes of bidegree (2,2) maps, plus the
/// quadratic presentations of linear maps.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize, Hash)]
pub enum PrvType {
    GenO,
    GenX,
    GenP,
    TangO,
    TangX,
    TangP,
    Osc2X,
    Lin,
}

impl PrvType {
    pub fn name(&self) -> &'static str {
        match self {
            PrvType::GenO => "gen(O)",
            PrvType::GenX => "gen(x)",
            PrvType::GenP => "gen(//)",
            PrvType::TangO => "tang(O)",
            PrvType::TangX => "tang(x)",
            PrvType::TangP => "tang(//)",
            PrvType::Osc2X => "osc[2](x)",
            PrvType::Lin => "lin",
        }
    }

    pub fn all_quadratic() -> [PrvType; 7] {
        [
            PrvType::GenO,
            PrvType::GenX,
            PrvType::GenP,
            PrvType::TangO,
            PrvType::TangX,
            PrvType::TangP,
            PrvType::Osc2X,
        ]
    }

    pub fn is_generic(&self) -> bool {
        matches!(self, PrvType::GenO | PrvType::GenX | PrvType::GenP)
    }
}

fn hf(terms: &[(i64, [u8; 4])]) -> HForm<Rat> {
    HForm::from_terms(
        terms[0].1.iter().map(|&k| k as u32).sum(),
        terms.iter().map(|&(c, e)| (e, rat(c))),
    )
}

/// Normal-form representative of each quadratic type.
pub fn normal_form(t: PrvType) -> [HForm<Rat>; 4] {
    match t {
        PrvType::GenO => [
            hf(&[(1, [1, 0, 0, 1])]),
            hf(&[(1, [0, 1, 0, 1])]),
            hf(&[(1, [0, 0, 1, 1])]),
            hf(&[(1, [2, 0, 0, 0]), (-1, [0, 1, 1, 0])]),
        ],
        PrvType::GenX => [
            hf(&[(1, [1, 0, 0, 1])]),
            hf(&[(1, [0, 1, 0, 1])]),
            hf(&[(1, [0, 0, 1, 1])]),
            hf(&[(1, [0, 1, 1, 0])]),
        ],
        PrvType::GenP => [
            hf(&[(1, [1, 0, 0, 1])]),
            hf(&[(1, [0, 1, 0, 1])]),
            hf(&[(1, [0, 0, 1, 1])]),
            hf(&[(1, [0, 0, 2, 0])]),
        ],
        PrvType::TangO => [
            hf(&[(1, [1, 0, 0, 1])]),
            hf(&[(1, [0, 1, 0, 1]), (1, [0, 1, 1, 0]), (-1, [2, 0, 0, 0])]),
            hf(&[(1, [0, 0, 1, 1])]),
            hf(&[(1, [0, 0, 0, 2])]),
        ],
        PrvType::TangX => [
            hf(&[(1, [1, 0, 0, 1])]),
            hf(&[(1, [0, 1, 0, 1]), (-1, [0, 1, 1, 0])]),
            hf(&[(1, [0, 0, 1, 1])]),
            hf(&[(1, [0, 0, 0, 2])]),
        ],
        PrvType::TangP => [
            hf(&[(1, [1, 0, 0, 1])]),
            hf(&[(1, [0, 1, 0, 1]), (-1, [0, 0, 2, 0])]),
            hf(&[(1, [0, 0, 1, 1])]),
            hf(&[(1, [0, 0, 0, 2])]),
        ],
        PrvType::Osc2X => [
            hf(&[(1, [1, 0, 0, 1]), (-1, [0, 1, 1, 0])]),
            hf(&[(1, [0, 1, 0, 1])]),
            hf(&[(1, [0, 0, 1, 1])]),
            hf(&[(1, [0, 0, 0, 2])]),
        ],
        PrvType::Lin => [
            hf(&[(1, [1, 0, 0, 1])]),
            hf(&[(1, [0, 1, 0, 1])]),
            hf(&[(1, [0, 0, 1, 1])]),
            hf(&[(1, [0, 0, 0, 2])]),
        ],
    }
}

/// Inverse of each normal form, exactly as tabulated.
pub fn normal_form_inverse(t: PrvType) -> [HForm<Rat>; 4] {
    match t {
        PrvType::GenO | PrvType::GenX | PrvType::GenP | PrvType::Lin => normal_form(t),
        PrvType::TangO => [
            hf(&[(1, [1, 0, 1, 0]), (1, [1, 0, 0, 1])]),
            hf(&[(1, [0, 1, 0, 1]), (1, [2, 0, 0, 0])]),
            hf(&[(1, [0, 0, 2, 0]), (1, [0, 0, 1, 1])]),
            hf(&[(1, [0, 0, 1, 1]), (1, [0, 0, 0, 2])]),
        ],
        PrvType::TangX => [
            hf(&[(1, [1, 0, 0, 1]), (-1, [1, 0, 1, 0])]),
            hf(&[(1, [0, 1, 0, 1])]),
            hf(&[(1, [0, 0, 1, 1]), (-1, [0, 0, 2, 0])]),
            hf(&[(1, [0, 0, 0, 2]), (-1, [0, 0, 1, 1])]),
        ],
        PrvType::TangP => [
            hf(&[(1, [1, 0, 0, 1])]),
            hf(&[(1, [0, 1, 0, 1]), (1, [0, 0, 2, 0])]),
            hf(&[(1, [0, 0, 1, 1])]),
            hf(&[(1, [0, 0, 0, 2])]),
        ],
        PrvType::Osc2X => [
            hf(&[(1, [1, 0, 0, 1]), (1, [0, 1, 1, 0])]),
            hf(&[(1, [0, 1, 0, 1])]),
            hf(&[(1, [0, 0, 1, 1])]),
            hf(&[(1, [0, 0, 0, 2])]),
        ],
    }
}

/// Tabulated Jacobian of each normal form, constant included.
pub fn table_jacobian(t: PrvType) -> HForm<Rat> {
    let x3sq = hf(&[(1, [0, 0, 0, 2])]);
    match t {
        PrvType::GenO => x3sq
            .mul(&hf(&[(1, [2, 0, 0, 0]), (-1, [0, 1, 1, 0])]))
            .scale(&rat(-2)),
        PrvType::GenX => hf(&[(-2, [0, 1, 1, 2])]),
        PrvType::GenP => hf(&[(-2, [0, 0, 2, 2])]),
        PrvType::TangO => hf(&[(2, [0, 0, 1, 3]), (2, [0, 0, 0, 4])]),
        PrvType::TangX => hf(&[(2, [0, 0, 0, 4]), (-2, [0, 0, 1, 3])]),
        PrvType::TangP | PrvType::Osc2X => hf(&[(2, [0, 0, 0, 4])]),
        PrvType::Lin => HForm::zero(4),
    }
}

/// Description of the linear system of pullbacks of planes, per type.
/// Carried as descriptive metadata only; the osculation conditions are
/// not verified algebraically.
pub fn gamma_description(t: PrvType) -> &'static str {
    match t {
        PrvType::GenO => "quadrics through a smooth conic C_I and a point P_I off its plane",
        PrvType::GenX => "quadrics through a rank-2 conic C_I and a point P_I off its plane",
        PrvType::GenP => {
            "cones through a line C_I and a point P_I off its plane, tangent to a plane S_I along C_I"
        }
        PrvType::TangO => {
            "quadrics through a smooth conic C_I, tangent to a plane S at a point P_I on C_I"
        }
        PrvType::TangX => {
            "quadrics through a rank-2 conic C_I, tangent to a plane S at a point P_I on C_I"
        }
        PrvType::TangP => {
            "cones through a line C_I, tangent to the plane H along C_I, osculating at a point P_I on C_I along a curve tangent to H at P_I"
        }
        PrvType::Osc2X => {
            "quadrics through a rank-2 conic C_I = L1 u L2, osculating at P_I = L1 n L2 along a curve tangent to the plane of C_I at P_I"
        }
        PrvType::Lin => "planes (the quadrics l*l_i share the fixed plane l)",
    }
}

/// Four quadratic forms defining a rational map of P^3.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadMap {
    pub components: [HForm<Rat>; 4],
    pub label: String,
}

impl QuadMap {
    pub fn new(components: [HForm<Rat>; 4], label: impl Into<String>) -> Self {
        QuadMap {
            components,
            label: label.into(),
        }
    }

    pub fn from_type(t: PrvType) -> Self {
        QuadMap::new(normal_form(t), t.name())
    }

    pub fn identity_tuple() -> [HForm<Rat>; 4] {
        [HForm::var(0), HForm::var(1), HForm::var(2), HForm::var(3)]
    }

    /// `A . phi`: recombines components by a linear map on the target.
    pub fn apply_left(&self, a: &LinMap) -> QuadMap {
        let mut comps: [HForm<Rat>; 4] = [
            HForm::zero(2),
            HForm::zero(2),
            HForm::zero(2),
            HForm::zero(2),
        ];
        for (i, comp) in comps.iter_mut().enumerate() {
            for j in 0..4 {
                *comp = comp.add(&self.components[j].scale(&a.0[i][j]));
            }
        }
        QuadMap::new(comps, self.label.clone())
    }

    /// `phi . B`: substitutes the source coordinates.
    pub fn apply_right(&self, b: &LinMap) -> QuadMap {
        let rows = b.rows_as_forms();
        let comps = [
            self.components[0].substitute_linear(&rows),
            self.components[1].substitute_linear(&rows),
            self.components[2].substitute_linear(&rows),
            self.components[3].substitute_linear(&rows),
        ];
        QuadMap::new(comps, self.label.clone())
    }

    pub fn apply_point(&self, p: &Point) -> Point {
        let vals = [
            self.components[0].eval_point(p),
            self.components[1].eval_point(p),
            self.components[2].eval_point(p),
            self.components[3].eval_point(p),
        ];
        Point::from_rats(&vals)
    }
}

/// Validity of four degree-2 forms as a map.
#[derive(Clone, Debug)]
pub enum Validity {
    Quadratic,
    /// A common linear factor with independent linear residuals: the map
    /// is a quadratic presentation of a linear transformation.
    Lin {
        factor: HForm<Rat>,
        residual: LinMap,
    },
    Degenerate(String),
}

#[derive(Debug, thiserror::Error)]
pub enum MapError {
    #[error("not birational of bidegree (2,2): {0}")]
    NotBidegree22(String),
    #[error("two distinct Jacobian factors qualify as the contracted plane (bug sentinel)")]
    AmbiguousH,
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("linear map: operation requires a genuinely quadratic map")]
    LinearMap,
    #[error("cannot reach the normal form over the rationals: {0}")]
    RationalObstruction(String),
}

/// Checks the component tuple and detects common-linear-factor (linear)
/// presentations and degeneracies.
pub fn validate(m: &QuadMap) -> Validity {
    if m.components.iter().all(|c| c.is_zero()) {
        return Validity::Degenerate("all components vanish".into());
    }
    if m.components.iter().any(|c| c.degree() != 2) {
        return Validity::Degenerate("components must be quadratic forms".into());
    }
    let first = m
        .components
        .iter()
        .find(|c| !c.is_zero())
        .expect("nonzero component");
    if let Ok(fz) = extract_linear_factors(first) {
        for (l, _) in &fz.factors {
            let lc = l.linear_coeffs();
            let quotients: Vec<Option<HForm<Rat>>> = m
                .components
                .iter()
                .map(|c| {
                    if c.is_zero() {
                        Some(HForm::zero(1))
                    } else {
                        c.divides_linear(&lc)
                    }
                })
                .collect();
            if quotients.iter().all(|q| q.is_some()) {
                let rows: Vec<[Rat; 4]> = quotients
                    .into_iter()
                    .map(|q| q.unwrap().linear_coeffs())
                    .collect();
                let residual = LinMap([
                    rows[0].clone(),
                    rows[1].clone(),
                    rows[2].clone(),
                    rows[3].clone(),
                ]);
                if residual.inverse().is_some() {
                    return Validity::Lin {
                        factor: l.clone(),
                        residual,
                    };
                }
                return Validity::Degenerate(
                    "common linear factor with dependent residuals".into(),
                );
            }
        }
    }
    // span of the components must be 4-dimensional
    if component_matrix_rank(&m.components) < 4 {
        return Validity::Degenerate("components span a space of dimension < 4".into());
    }
    if jacobian_det(&m.components).is_zero() {
        return Validity::Degenerate("Jacobian vanishes identically".into());
    }
    Validity::Quadratic
}

/// All ten quadratic monomial exponents, in a fixed order.
fn quad_monomials() -> Vec<[u8; 4]> {
    let mut out = Vec::new();
    for i in 0..4 {
        for j in i..4 {
            let mut e = [0u8; 4];
            e[i] += 1;
            e[j] += 1;
            out.push(e);
        }
    }
    out
}

fn quad_coords(f: &HForm<Rat>) -> Vec<Rat> {
    quad_monomials().iter().map(|e| f.coeff(e)).collect()
}

fn component_matrix_rank(comps: &[HForm<Rat>; 4]) -> usize {
    mat_rank(comps.iter().map(quad_coords).collect())
}

/// Geometric frame of a quadratic map: the contracted plane, its image
/// point, the indeterminacy conic, the blown-up point and the class
/// split used by the classifier.
#[derive(Clone, Debug)]
pub struct Frame {
    /// Contracted plane `H = (h = 0)`, primitive.
    pub h: HForm<Rat>,
    /// Pivot variable eliminated when restricting to `H`.
    pub pivot: usize,
    /// `P = phi(H)`, from restriction proportionality.
    pub p: Point,
    /// The indeterminacy conic on `H` (pivot variable eliminated).
    pub c: HForm<Rat>,
    /// Basis of `W` with `M_phi ∩ h*A_1 = h*W`.
    pub w_basis: [[Rat; 4]; 3],
    /// The point blown up to a plane: the common zero of `W`.
    pub p_i: Point,
    /// Jacobian factorization.
    pub jac: Factorization,
    /// Multiplicity of `h` inside the Jacobian.
    pub h_mult: u32,
    pub kind: FrameKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrameKind {
    /// `P_I` off the contracted plane.
    Generic,
    /// `P_I` on the conic with multiplicity 1.
    TangentSimple,
    /// `P_I` on the conic with multiplicity 2.
    TangentDouble,
}

/// Finds the unique contracted plane among the repeated linear Jacobian
/// factors, with its image point and the common restricted conic.
/// Returns `None` for maps without one (not bidegree (2,2)).
pub fn contracted_plane(
    m: &QuadMap,
) -> Result<Option<(HForm<Rat>, usize, Point, HForm<Rat>, Factorization)>, MapError> {
    let jac = jacobian_det(&m.components);
    if jac.is_zero() {
        return Ok(None);
    }
    let fz = extract_linear_factors(&jac)
        .map_err(|e| MapError::Degenerate(format!("Jacobian factorization: {e}")))?;
    let mut qualifying: Vec<(HForm<Rat>, usize, Point, HForm<Rat>)> = Vec::new();
    for cand in fz.factors_with_mult_ge(2) {
        let hc = cand.linear_coeffs();
        let mut restrictions = Vec::new();
        let mut pivot = 0;
        for comp in &m.components {
            let (r, pv) = comp.restrict_to_plane(&hc);
            pivot = pv;
            restrictions.push(r);
        }
        let rank = mat_rank(restrictions.iter().map(quad_coords).collect());
        if rank != 1 {
            continue;
        }
        // phi_i|_H = p_i * c: read the proportionality vector
        let k = restrictions.iter().position(|r| !r.is_zero()).unwrap();
        let (_, cprim) = restrictions[k].as_primitive();
        let probe = *cprim.terms().next().unwrap().0;
        let cval = cprim.coeff(&probe);
        let mut pvec: [Rat; 4] = Default::default();
        for (i, r) in restrictions.iter().enumerate() {
            pvec[i] = r.coeff(&probe) / &cval;
            debug_assert_eq!(cprim.scale(&pvec[i]), *r);
        }
        qualifying.push((cand.clone(), pivot, Point::from_rats(&pvec), cprim));
    }
    match qualifying.len() {
        0 => Ok(None),
        1 => {
            let (h, pivot, p, c) = qualifying.pop().unwrap();
            Ok(Some((h, pivot, p, c, fz)))
        }
        _ => Err(MapError::AmbiguousH),
    }
}

/// Computes the full geometric frame. Precondition: `validate` returned
/// `Quadratic`.
pub fn analyze_frame(m: &QuadMap) -> Result<Frame, MapError> {
    let (h, pivot, p, c, jac) = contracted_plane(m)?
        .ok_or_else(|| MapError::NotBidegree22("no plane is contracted to a point".into()))?;
    // W = { w in A_1 : h*w in span(components) }
    let monos = quad_monomials();
    let mut rows: Vec<Vec<Rat>> = Vec::with_capacity(monos.len());
    let hform_times_x: Vec<Vec<Rat>> = (0..4)
        .map(|j| quad_coords(&h.mul(&HForm::var(j))))
        .collect();
    let comp_coords: Vec<Vec<Rat>> = m.components.iter().map(quad_coords).collect();
    for mi in 0..monos.len() {
        let mut row = Vec::with_capacity(8);
        for hx in &hform_times_x {
            row.push(hx[mi].clone());
        }
        for cc in &comp_coords {
            row.push(-cc[mi].clone());
        }
        rows.push(row);
    }
    let kernel = mat_kernel(&rows);
    if kernel.len() != 3 {
        return Err(MapError::NotBidegree22(format!(
            "web of reducible members has dimension {}, expected 3",
            kernel.len()
        )));
    }
    let mut w_basis: [[Rat; 4]; 3] = Default::default();
    for (r, k) in kernel.iter().enumerate() {
        for (col, w) in w_basis[r].iter_mut().enumerate() {
            *w = k[col].clone();
        }
    }
    // P_I = the common zero of W
    let wker = mat_kernel(&[
        w_basis[0].to_vec(),
        w_basis[1].to_vec(),
        w_basis[2].to_vec(),
    ]);
    if wker.len() != 1 {
        return Err(MapError::NotBidegree22(
            "the three reducible-web planes do not meet in a single point".into(),
        ));
    }
    let p_i = Point::from_rats(&[
        wker[0][0].clone(),
        wker[0][1].clone(),
        wker[0][2].clone(),
        wker[0][3].clone(),
    ]);
    for comp in &m.components {
        if !comp.eval_point(&p_i).is_zero() {
            return Err(MapError::NotBidegree22(
                "the blown-up point candidate is not an indeterminacy point".into(),
            ));
        }
    }
    let h_mult = jac
        .factors
        .iter()
        .find(|(g, _)| *g == h)
        .map(|(_, m)| *m)
        .unwrap_or(0);
    let h_at_pi = h.eval_point(&p_i);
    let kind = if !h_at_pi.is_zero() {
        if h_mult != 2 {
            return Err(MapError::NotBidegree22(format!(
                "generic shape needs Jac = h^2 * quadric, got multiplicity {h_mult}"
            )));
        }
        FrameKind::Generic
    } else {
        // multiplicity of the conic at P_I from its gradient
        let grad = c.gradient_at(&p_i);
        let simple = grad.iter().any(|g| !g.is_zero());
        if simple {
            if h_mult != 3 {
                return Err(MapError::NotBidegree22(format!(
                    "tangent shape needs Jac = h^3 * l, got multiplicity {h_mult}"
                )));
            }
            FrameKind::TangentSimple
        } else {
            if h_mult != 4 {
                return Err(MapError::NotBidegree22(format!(
                    "osculating shape needs Jac = h^4, got multiplicity {h_mult}"
                )));
            }
            FrameKind::TangentDouble
        }
    };
    Ok(Frame {
        h,
        pivot,
        p,
        c,
        w_basis,
        p_i,
        jac,
        h_mult,
        kind,
    })
}

impl Frame {
    /// PRV type from the frame split and the conic rank.
    pub fn prv_type(&self) -> Result<PrvType, MapError> {
        let rank = self.c.quad_rank();
        match (self.kind, rank) {
            (FrameKind::Generic, 3) => Ok(PrvType::GenO),
            (FrameKind::Generic, 2) => Ok(PrvType::GenX),
            (FrameKind::Generic, 1) => Ok(PrvType::GenP),
            (FrameKind::TangentSimple, 3) => Ok(PrvType::TangO),
            (FrameKind::TangentSimple, 2) => Ok(PrvType::TangX),
            (FrameKind::TangentDouble, 1) => Ok(PrvType::TangP),
            (FrameKind::TangentDouble, 2) => Ok(PrvType::Osc2X),
            (k, r) => Err(MapError::NotBidegree22(format!(
                "no type with frame {k:?} and conic rank {r}"
            ))),
        }
    }

    /// The surface contracted to a curve (quadric S for generic types,
    /// plane Pi for simple-tangency types, absent for double tangency),
    /// as the Jacobian residual after removing `h^mult`.
    pub fn surface_contracted_to_curve(&self) -> Option<HForm<Rat>> {
        match self.kind {
            FrameKind::TangentDouble => None,
            FrameKind::Generic => {
                let jac_form = self.jac.reassemble();
                let filtered = jac_form
                    .exact_div(&self.h.pow(2))
                    .expect("h^2 divides the Jacobian");
                Some(filtered.as_primitive().1)
            }
            FrameKind::TangentSimple => {
                let jac_form = self.jac.reassemble();
                let filtered = jac_form
                    .exact_div(&self.h.pow(3))
                    .expect("h^3 divides the Jacobian");
                Some(filtered.as_primitive().1)
            }
        }
    }
}

/// Classification dossier: type plus the geometric data of the map.
#[derive(Clone, Debug)]
pub struct ClassificationReport {
    pub prv_type: PrvType,
    /// Plane contracted to the point `p`.
    pub h: HForm<Rat>,
    pub p: Point,
    /// Point blown up to the plane `h_i`.
    pub p_i: Point,
    pub h_i: HForm<Rat>,
    /// Indeterminacy conic on `h` (pivot variable eliminated) and rank.
    pub c_i: HForm<Rat>,
    pub c_i_rank: usize,
    /// Quadric S (generic) or plane Pi (simple tangency).
    pub s_or_pi: Option<HForm<Rat>>,
    /// Image conic of S / Pi: the indeterminacy conic of the inverse.
    pub c: Option<HForm<Rat>>,
    pub jac_factorization: Factorization,
    pub gamma: &'static str,
    /// The certified inverse map.
    pub inverse: QuadMap,
    /// For linear presentations: the underlying matrix.
    pub lin: Option<LinMap>,
}

/// Classifies a map into its PRV type, certifying the verdict through
/// the explicit inverse round trip.
pub fn classify(m: &QuadMap) -> Result<ClassificationReport, MapError> {
    match validate(m) {
        Validity::Degenerate(r) => Err(MapError::Degenerate(r)),
        Validity::Lin { factor, residual } => {
            let inv = residual.inverse().expect("validated linear residual");
            let inv_map = QuadMap::new(
                [
                    factor.mul(&HForm::linear(&inv.0[0])),
                    factor.mul(&HForm::linear(&inv.0[1])),
                    factor.mul(&HForm::linear(&inv.0[2])),
                    factor.mul(&HForm::linear(&inv.0[3])),
                ],
                format!("{}^-1", m.label),
            );
            Ok(ClassificationReport {
                prv_type: PrvType::Lin,
                h: factor.clone(),
                p: Point::from_i64([0, 0, 0, 0]),
                p_i: Point::from_i64([0, 0, 0, 0]),
                h_i: factor.clone(),
                c_i: HForm::zero(2),
                c_i_rank: 0,
                s_or_pi: None,
                c: None,
                jac_factorization: extract_linear_factors(&jacobian_det(&m.components))
                    .unwrap_or(Factorization {
                        unit: Rat::one(),
                        factors: vec![],
                        residual: HForm::zero(0),
                    }),
                gamma: gamma_description(PrvType::Lin),
                inverse: inv_map,
                lin: Some(residual),
            })
        }
        Validity::Quadratic => {
            let frame = analyze_frame(m)?;
            let prv_type = frame.prv_type()?;
            if prv_type == PrvType::Osc2X {
                // the singular point of the rank-2 conic must be P_I
                let g = frame.c.gram();
                let rows: Vec<Vec<Rat>> = g.iter().map(|r| r.to_vec()).collect();
                let ker = mat_kernel(&rows);
                let pivot_dir = frame.pivot;
                let sing: Vec<Vec<Rat>> = ker
                    .into_iter()
                    .filter(|v| !(0..4).all(|i| i == pivot_dir || v[i].is_zero()))
                    .collect();
                let on_point = sing.iter().all(|v| {
                    let pt = Point::from_rats(&[
                        v[0].clone(),
                        v[1].clone(),
                        v[2].clone(),
                        v[3].clone(),
                    ]);
                    pt == frame.p_i
                });
                if !on_point {
                    return Err(MapError::NotBidegree22(
                        "rank-2 conic is not singular at the blown-up point".into(),
                    ));
                }
            }
            let inverse = invert_with_frame(m, &frame)?;
            // certification: the round trip must be the identity
            let raw = compose_raw(&inverse.components, &m.components);
            if !HForm::cross_minors_zero(&raw, &QuadMap::identity_tuple()) {
                return Err(MapError::NotBidegree22(
                    "inverse round trip failed certification".into(),
                ));
            }
            // inverse-side data: H_I is the plane contracted by phi^-1,
            // whose image point must coincide with P_I
            let (h_i, _, p_of_inv, c_of_inv, _) = contracted_plane(&inverse)?
                .ok_or_else(|| MapError::NotBidegree22("inverse has no contracted plane".into()))?;
            if p_of_inv != frame.p_i {
                return Err(MapError::NotBidegree22(
                    "inverse image point disagrees with the blown-up point".into(),
                ));
            }
            let s_or_pi = frame.surface_contracted_to_curve();
            let c = s_or_pi.as_ref().map(|_| c_of_inv);
            Ok(ClassificationReport {
                prv_type,
                h: frame.h.clone(),
                p: frame.p.clone(),
                p_i: frame.p_i.clone(),
                h_i,
                c_i_rank: frame.c.quad_rank(),
                c_i: frame.c.clone(),
                s_or_pi,
                c,
                jac_factorization: frame.jac.clone(),
                gamma: gamma_description(prv_type),
                inverse,
                lin: None,
            })
        }
    }
}

/// Raw composition `outer(inner(x))` of component tuples.
pub fn compose_raw(outer: &[HForm<Rat>; 4], inner: &[HForm<Rat>; 4]) -> [HForm<Rat>; 4] {
    [
        outer[0].compose(inner),
        outer[1].compose(inner),
        outer[2].compose(inner),
        outer[3].compose(inner),
    ]
}

/// Expresses each component of `m` as a linear combination of the four
/// `basis` forms; the recombination matrix, when the basis spans them.
fn solve_target_recombination(
    comps: &[HForm<Rat>; 4],
    basis: &[HForm<Rat>; 4],
) -> Option<LinMap> {
    let monos = quad_monomials();
    let cols: Vec<Vec<Rat>> = basis.iter().map(quad_coords).collect();
    let rows: Vec<Vec<Rat>> = (0..monos.len())
        .map(|mi| (0..4).map(|j| cols[j][mi].clone()).collect())
        .collect();
    let mut a: [[Rat; 4]; 4] = Default::default();
    for (i, comp) in comps.iter().enumerate() {
        let target = quad_coords(comp);
        let x = mat_solve(&rows, &target)?;
        // verify (solve zero-fills under-determined parts)
        for mi in 0..monos.len() {
            let mut acc = Rat::zero();
            for (j, xv) in x.iter().enumerate() {
                acc += &rows[mi][j] * xv;
            }
            if acc != target[mi] {
                return None;
            }
        }
        for (j, xv) in x.iter().enumerate() {
            a[i][j] = xv.clone();
        }
    }
    let lm = LinMap(a);
    lm.inverse()?;
    Some(lm)
}

/// Decomposition `m = A . shape(Tx)` over a chosen source frame.
struct SemiNormal {
    a: LinMap,
    t: LinMap,
    /// For generic maps: the residual conic `q(x0,x1,x2)` with
    /// `shape = [x0x3, x1x3, x2x3, q]`.
    /// For non-generic maps: `q_hat(x0,x1,x2)` (no `x1^2` term) with
    /// `shape = [x0x3, x1x3 + q_hat, x2x3, x3^2]`.
    q: HForm<Rat>,
}

fn shape_components(generic: bool, q: &HForm<Rat>) -> [HForm<Rat>; 4] {
    if generic {
        [
            hf(&[(1, [1, 0, 0, 1])]),
            hf(&[(1, [0, 1, 0, 1])]),
            hf(&[(1, [0, 0, 1, 1])]),
            q.clone(),
        ]
    } else {
        [
            hf(&[(1, [1, 0, 0, 1])]),
            hf(&[(1, [0, 1, 0, 1])]).add(q),
            hf(&[(1, [0, 0, 1, 1])]),
            hf(&[(1, [0, 0, 0, 2])]),
        ]
    }
}

/// Represents `m = A . N_q . T` with the family normal shape of the
/// frame's kind (generic or tangent). Pure linear algebra over Q.
fn semi_normalize(m: &QuadMap, frame: &Frame) -> Result<SemiNormal, MapError> {
    let generic = frame.kind == FrameKind::Generic;
    let hc = frame.h.linear_coeffs();
    let t = if generic {
        // rows: w0, w1, w2, h
        LinMap([
            frame.w_basis[0].clone(),
            frame.w_basis[1].clone(),
            frame.w_basis[2].clone(),
            hc.clone(),
        ])
    } else {
        // rows: v0, u, v2, h  with {h, v0, v2} spanning W and u(P_I) != 0
        let mut rows: Vec<[Rat; 4]> = vec![hc.clone()];
        for w in &frame.w_basis {
            let mut cand: Vec<Vec<Rat>> = rows.iter().map(|x| x.to_vec()).collect();
            cand.push(w.to_vec());
            if mat_rank(cand) == rows.len() + 1 {
                rows.push(w.clone());
            }
            if rows.len() == 3 {
                break;
            }
        }
        if rows.len() != 3 {
            return Err(MapError::NotBidegree22(
                "contracted plane does not lie in the reducible web".into(),
            ));
        }
        let uj = (0..4)
            .find(|&j| !frame.p_i.0[j].is_zero())
            .expect("nonzero point");
        let mut u: [Rat; 4] = Default::default();
        u[uj] = Rat::one();
        LinMap([rows[1].clone(), u, rows[2].clone(), hc.clone()])
    };
    let tinv = t
        .inverse()
        .ok_or_else(|| MapError::NotBidegree22("source frame is degenerate".into()))?;
    let n = compose_raw_linear(&m.components, &tinv);
    // peel the residual: strip the coordinates that the web basis spans
    let absorbed: Vec<[u8; 4]> = if generic {
        vec![[1, 0, 0, 1], [0, 1, 0, 1], [0, 0, 1, 1]]
    } else {
        vec![[1, 0, 0, 1], [0, 0, 1, 1], [0, 0, 0, 2]]
    };
    let mut f1: Option<HForm<Rat>> = None;
    for comp in &n {
        let mut stripped = comp.clone();
        for e in &absorbed {
            let c = stripped.coeff(e);
            if !c.is_zero() {
                stripped = stripped.sub(&HForm::monomial(*e, c));
            }
        }
        if !stripped.is_zero() {
            f1 = Some(stripped);
            break;
        }
    }
    let f1 = f1.ok_or_else(|| {
        MapError::NotBidegree22("components lie in the reducible web entirely".into())
    })?;
    let q = if generic {
        // f1 = q(x0,x1,x2) + lambda*x3^2; lambda vanishes because the
        // components vanish at the blown-up point
        if !f1.coeff(&[0, 0, 0, 2]).is_zero() {
            return Err(MapError::NotBidegree22(
                "residual quadric meets the blown-up point".into(),
            ));
        }
        f1
    } else {
        // f1 = kappa*x1x3 + q_hat(x0,x1,x2), no x1^2
        if !f1.coeff(&[0, 2, 0, 0]).is_zero() {
            return Err(MapError::NotBidegree22(
                "residual has a square term at the blown-up point".into(),
            ));
        }
        let kappa = f1.coeff(&[0, 1, 0, 1]);
        if kappa.is_zero() {
            return Err(MapError::NotBidegree22(
                "residual does not move the blown-up point direction".into(),
            ));
        }
        let scaled = f1.scale(&kappa.recip());
        scaled.sub(&hf(&[(1, [0, 1, 0, 1])]))
    };
    if q.terms().any(|(e, _)| e[3] != 0) {
        return Err(MapError::NotBidegree22(
            "residual conic does not live on the contracted plane".into(),
        ));
    }
    let shape = shape_components(generic, &q);
    let shape_t = compose_raw_linear(&shape, &t);
    let a = solve_target_recombination(&m.components, &shape_t).ok_or_else(|| {
        MapError::NotBidegree22("components are not a recombination of the normal shape".into())
    })?;
    Ok(SemiNormal { a, t, q })
}

fn compose_raw_linear(comps: &[HForm<Rat>; 4], b: &LinMap) -> [HForm<Rat>; 4] {
    let rows = b.rows_as_forms();
    [
        comps[0].substitute_linear(&rows),
        comps[1].substitute_linear(&rows),
        comps[2].substitute_linear(&rows),
        comps[3].substitute_linear(&rows),
    ]
}

/// `B^-1 . N . A^-1` as a quadratic map.
fn conjugate_inverse(
    n_inv: &[HForm<Rat>; 4],
    a: &LinMap,
    b: &LinMap,
    label: String,
) -> Result<QuadMap, MapError> {
    let ainv = a
        .inverse()
        .ok_or_else(|| MapError::NotBidegree22("target recombination is singular".into()))?;
    let binv = b
        .inverse()
        .ok_or_else(|| MapError::NotBidegree22("source frame is singular".into()))?;
    let composed = compose_raw_linear(n_inv, &ainv);
    let mut comps: [HForm<Rat>; 4] = [
        HForm::zero(2),
        HForm::zero(2),
        HForm::zero(2),
        HForm::zero(2),
    ];
    for (i, comp) in comps.iter_mut().enumerate() {
        for j in 0..4 {
            *comp = comp.add(&composed[j].scale(&binv.0[i][j]));
        }
    }
    Ok(QuadMap::new(comps, label))
}

fn invert_with_frame(m: &QuadMap, frame: &Frame) -> Result<QuadMap, MapError> {
    let label = format!("{}^-1", m.label);
    match frame.kind {
        FrameKind::Generic => {
            // [x0x3, x1x3, x2x3, q] is an involution for every ternary q
            let sn = semi_normalize(m, frame)?;
            let n = shape_components(true, &sn.q);
            conjugate_inverse(&n, &sn.a, &sn.t, label)
        }
        FrameKind::TangentDouble => {
            // [x0x3, x1x3 + r(x0,x2), x2x3, x3^2] inverts by negating r
            let sn = semi_normalize(m, frame)?;
            if sn.q.terms().any(|(e, _)| e[1] != 0) {
                return Err(MapError::NotBidegree22(
                    "double-tangency residual must not involve the point direction".into(),
                ));
            }
            let n_inv = shape_components(false, &sn.q.neg());
            conjugate_inverse(&n_inv, &sn.a, &sn.t, label)
        }
        FrameKind::TangentSimple => {
            let (a, b, t) = canonicalize_with_frame(m, frame)?;
            conjugate_inverse(&normal_form_inverse(t), &a, &b, label)
        }
    }
}

/// Constructs the inverse of a non-linear bidegree (2,2) map. The round
/// trip is certified inside [`classify`]; this entry point performs the
/// construction only.
pub fn invert(m: &QuadMap) -> Result<QuadMap, MapError> {
    match validate(m) {
        Validity::Quadratic => {}
        Validity::Lin { .. } => return Err(MapError::LinearMap),
        Validity::Degenerate(r) => return Err(MapError::Degenerate(r)),
    }
    let frame = analyze_frame(m)?;
    invert_with_frame(m, &frame)
}

/// Writes `m = A . normal_form(N) . B` projectively, with `A`, `B`
/// invertible rational matrices.
pub fn canonicalize(m: &QuadMap) -> Result<(LinMap, LinMap, PrvType), MapError> {
    match validate(m) {
        Validity::Quadratic => {}
        Validity::Lin { .. } => return Err(MapError::LinearMap),
        Validity::Degenerate(r) => return Err(MapError::Degenerate(r)),
    }
    let frame = analyze_frame(m)?;
    canonicalize_with_frame(m, &frame)
}

fn canonicalize_with_frame(
    m: &QuadMap,
    frame: &Frame,
) -> Result<(LinMap, LinMap, PrvType), MapError> {
    let sn = semi_normalize(m, frame)?;
    let prv = frame.prv_type()?;
    // extra source step on the semi-normal coordinates taking the
    // residual conic to its tabulated representative; trivial steps are
    // tried first so normal forms come back with identity frames
    let swap01 = LinMap::from_i64([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]);
    let mut steps = vec![LinMap::identity(), swap01];
    let mut deferred_err = None;
    match match prv {
        PrvType::GenO | PrvType::GenX | PrvType::GenP => generic_conic_step(&sn.q, prv),
        PrvType::TangO | PrvType::TangX => tangent_simple_step(&sn.q),
        PrvType::TangP | PrvType::Osc2X => tangent_double_step(&sn.q, prv),
        PrvType::Lin => unreachable!(),
    } {
        Ok(s) => steps.push(s),
        Err(e) => deferred_err = Some(e),
    }
    for s in steps {
        let b = s.compose(&sn.t);
        let nb = compose_raw_linear(&normal_form(prv), &b);
        let a = match solve_target_recombination(&m.components, &nb) {
            Some(a) => a,
            None => continue,
        };
        // final certificate
        let anb = QuadMap::new(nb, "").apply_left(&a);
        if !HForm::cross_minors_zero(&m.components, &anb.components) {
            return Err(MapError::NotBidegree22(
                "canonicalization failed the projective equality check".into(),
            ));
        }
        return Ok((a, b, prv));
    }
    Err(deferred_err.unwrap_or(MapError::NotBidegree22(
        "canonical recombination failed verification".into(),
    )))
}

/// Rows of the coordinate system dual to the given basis vectors.
fn dual_rows(cols: [[Rat; 4]; 4]) -> Option<LinMap> {
    let mut m: [[Rat; 4]; 4] = Default::default();
    for (j, col) in cols.iter().enumerate() {
        for i in 0..4 {
            m[i][j] = col[i].clone();
        }
    }
    LinMap(m).inverse()
}

fn polar(g: &[[Rat; 4]; 4], a: &[Rat; 4], b: &[Rat; 4]) -> Rat {
    let mut acc = Rat::zero();
    for i in 0..4 {
        for j in 0..4 {
            acc += &g[i][j] * &a[i] * &b[j];
        }
    }
    acc
}

fn polar_row(g: &[[Rat; 4]; 4], a: &[Rat; 4]) -> [Rat; 4] {
    let mut out: [Rat; 4] = Default::default();
    for (j, o) in out.iter_mut().enumerate() {
        for i in 0..4 {
            *o += &g[i][j] * &a[i];
        }
    }
    out
}

/// Source step for generic maps: brings the ternary residual conic to
/// `q_O`, `q_x` or `q_//` (the plane coordinates are `x0, x1, x2`; `x3`
/// stays put). Scalar discrepancies are absorbed by the target solve.
fn generic_conic_step(q: &HForm<Rat>, prv: PrvType) -> Result<LinMap, MapError> {
    let g = q.gram();
    match prv {
        PrvType::GenP => {
            // q = e * l^2: take l as the new x2
            let i = (0..3)
                .find(|&i| !g[i][i].is_zero())
                .ok_or_else(|| MapError::NotBidegree22("rank-1 conic without square".into()))?;
            let l: [Rat; 4] = [
                g[i][0].clone(),
                g[i][1].clone(),
                g[i][2].clone(),
                Rat::zero(),
            ];
            Ok(LinMap(complete_plane_basis(&l, 2)))
        }
        PrvType::GenX => {
            let (l1, l2) = split_rank2_conic(q).ok_or_else(|| {
                MapError::RationalObstruction("rank-2 conic does not split".into())
            })?;
            let mut rows: [[Rat; 4]; 4] = Default::default();
            rows[1] = l1;
            rows[2] = l2;
            rows[3] = [Rat::zero(), Rat::zero(), Rat::zero(), Rat::one()];
            for cand in 0..3usize {
                let mut r0: [Rat; 4] = Default::default();
                r0[cand] = Rat::one();
                let test = LinMap([
                    r0.clone(),
                    rows[1].clone(),
                    rows[2].clone(),
                    rows[3].clone(),
                ]);
                if test.inverse().is_some() {
                    rows[0] = r0;
                    break;
                }
            }
            Ok(LinMap(rows))
        }
        PrvType::GenO => {
            // isotropic rational vector -> hyperbolic pair -> x0^2 - x1x2
            let p = find_rational_point_on_conic(q).ok_or_else(|| {
                MapError::RationalObstruction(
                    "no rational point found on the rank-3 conic within the search bound".into(),
                )
            })?;
            let pr = p.to_rats();
            let mut y: [Rat; 4] = Default::default();
            let mut found = false;
            for j in 0..3 {
                let mut e: [Rat; 4] = Default::default();
                e[j] = Rat::one();
                if !polar(&g, &pr, &e).is_zero() {
                    y = e;
                    found = true;
                    break;
                }
            }
            if !found {
                return Err(MapError::NotBidegree22(
                    "conic is degenerate at its point".into(),
                ));
            }
            let beta = polar(&g, &pr, &y);
            // v = y - (q(y) / (2 beta)) p is isotropic with B(p, v) = beta
            let qy = polar(&g, &y, &y);
            let lam = qy / (&beta * rat(2));
            let mut v: [Rat; 4] = Default::default();
            for i in 0..4 {
                v[i] = &y[i] - &lam * &pr[i];
            }
            // w orthogonal to p and v among the plane coordinates
            let rows = vec![
                polar_row(&g, &pr).to_vec(),
                polar_row(&g, &v).to_vec(),
                vec![Rat::zero(), Rat::zero(), Rat::zero(), Rat::one()],
            ];
            let ker = mat_kernel(&rows);
            let w = ker
                .first()
                .ok_or_else(|| MapError::NotBidegree22("no orthogonal complement".into()))?;
            let w: [Rat; 4] = [w[0].clone(), w[1].clone(), w[2].clone(), w[3].clone()];
            let e3 = [Rat::zero(), Rat::zero(), Rat::zero(), Rat::one()];
            // dual coordinates: x'0 = dual of w, x'1 = dual of p, x'2 = dual of v
            let duals = dual_rows([w.clone(), pr.clone(), v.clone(), e3])
                .ok_or_else(|| MapError::NotBidegree22("degenerate hyperbolic basis".into()))?;
            // q = e x'0^2 + 2 beta x'1 x'2; rescale x'1 so the cross
            // term carries coefficient -e
            let e_coef = polar(&g, &w, &w);
            if e_coef.is_zero() {
                return Err(MapError::NotBidegree22(
                    "rank-3 conic with isotropic complement".into(),
                ));
            }
            let scale = -(rat(2) * &beta) / &e_coef;
            let mut rows_out = duals.0.clone();
            for c in rows_out[1].iter_mut() {
                *c = &*c * &scale;
            }
            Ok(LinMap(rows_out))
        }
        _ => unreachable!(),
    }
}

/// Completes a linear form on the plane coordinates `x0,x1,x2` into a
/// source change fixing `x3`, placing the form at row `slot`.
fn complete_plane_basis(l: &[Rat; 4], slot: usize) -> [[Rat; 4]; 4] {
    let mut rows: [[Rat; 4]; 4] = Default::default();
    rows[slot] = l.clone();
    rows[3] = [Rat::zero(), Rat::zero(), Rat::zero(), Rat::one()];
    let mut free: Vec<usize> = (0..4).filter(|&r| r != slot && r != 3).collect();
    for cand in 0..3usize {
        if free.is_empty() {
            break;
        }
        let mut r: [Rat; 4] = Default::default();
        r[cand] = Rat::one();
        let mut test: Vec<Vec<Rat>> = rows
            .iter()
            .enumerate()
            .filter(|(i, row)| !free.contains(i) && row.iter().any(|x| !x.is_zero()))
            .map(|(_, row)| row.to_vec())
            .collect();
        test.push(r.to_vec());
        let n = test.len();
        if mat_rank(test) == n {
            let row_idx = free.remove(0);
            rows[row_idx] = r;
        }
    }
    rows
}

/// Splits a rank-2 conic (in the plane coordinates, `x3` absent) into
/// two rational linear forms, when the discriminant is a square.
fn split_rank2_conic(q: &HForm<Rat>) -> Option<([Rat; 4], [Rat; 4])> {
    let g = q.gram();
    let rows: Vec<Vec<Rat>> = (0..3)
        .map(|i| (0..3).map(|j| g[i][j].clone()).collect())
        .collect();
    let ker = mat_kernel(&rows);
    if ker.len() != 1 {
        return None;
    }
    let k = &ker[0];
    // complement: two coordinate directions independent of the kernel
    let mut comp: Vec<usize> = Vec::new();
    for i in 0..3 {
        let mut test: Vec<Vec<Rat>> = vec![k.clone()];
        for &c in &comp {
            let mut v = vec![Rat::zero(); 3];
            v[c] = Rat::one();
            test.push(v);
        }
        let mut v = vec![Rat::zero(); 3];
        v[i] = Rat::one();
        test.push(v);
        let n = test.len();
        if mat_rank(test) == n {
            comp.push(i);
        }
        if comp.len() == 2 {
            break;
        }
    }
    let (i, j) = (comp[0], comp[1]);
    let alpha = g[i][i].clone();
    let beta = g[i][j].clone();
    let gamma = g[j][j].clone();
    let disc = &beta * &beta - &alpha * &gamma;
    let root = rat_sqrt(&disc)?;
    // dual coordinates s, t as linear forms in x
    let mut cols: [[Rat; 4]; 4] = Default::default();
    for (r, kc) in k.iter().enumerate() {
        cols[2][r] = kc.clone();
    }
    cols[0][i] = Rat::one();
    cols[1][j] = Rat::one();
    cols[3][3] = Rat::one();
    let duals = dual_rows(cols)?;
    let s = duals.0[0].clone();
    let t = duals.0[1].clone();
    let comb = |cs: &Rat, ct: &Rat| -> [Rat; 4] {
        let mut out: [Rat; 4] = Default::default();
        for c in 0..4 {
            out[c] = cs * &s[c] + ct * &t[c];
        }
        out
    };
    if alpha.is_zero() {
        // q = t (2 beta s + gamma t)
        Some((
            comb(&Rat::zero(), &Rat::one()),
            comb(&(rat(2) * &beta), &gamma),
        ))
    } else {
        // alpha (s - r1 t)(s - r2 t)
        let r1 = (-&beta + &root) / &alpha;
        let r2 = (-&beta - &root) / &alpha;
        Some((comb(&Rat::one(), &-r1), comb(&Rat::one(), &-r2)))
    }
}

/// Bounded deterministic search for a rational point on a rank-3 conic
/// in the plane coordinates. Falls back to secant lines through lattice
/// points, which reach points of quadratically large height cheaply.
fn find_rational_point_on_conic(q: &HForm<Rat>) -> Option<Point> {
    let eval3 = |a: i64, b: i64, c: i64| -> Rat {
        q.eval_point(&Point([
            num_bigint::BigInt::from(a),
            num_bigint::BigInt::from(b),
            num_bigint::BigInt::from(c),
            num_bigint::BigInt::from(0),
        ]))
    };
    let bound = 24i64;
    for h in 0..=bound {
        for a in -h..=h {
            for b in -h..=h {
                for &c in &[h, -h] {
                    for perm in 0..3 {
                        let (x, y, z) = match perm {
                            0 => (a, b, c),
                            1 => (c, a, b),
                            _ => (b, c, a),
                        };
                        if x == 0 && y == 0 && z == 0 {
                            continue;
                        }
                        if eval3(x, y, z).is_zero() {
                            return Some(Point::from_i64([x, y, z, 0]));
                        }
                    }
                }
            }
        }
    }
    let g = q.gram();
    let mut pts: Vec<[i64; 3]> = Vec::new();
    for a in -4i64..=4 {
        for b in -4i64..=4 {
            for c in 0i64..=4 {
                if (a, b, c) != (0, 0, 0) {
                    pts.push([a, b, c]);
                }
            }
        }
    }
    for (pi, p0) in pts.iter().enumerate() {
        for p1 in pts.iter().skip(pi + 1) {
            let pr = [rat(p0[0]), rat(p0[1]), rat(p0[2]), Rat::zero()];
            let qr = [rat(p1[0]), rat(p1[1]), rat(p1[2]), Rat::zero()];
            // q(p + z q) = q(p) + 2 z B(p,q) + z^2 q(q)
            let a2 = polar(&g, &qr, &qr);
            let a1 = polar(&g, &pr, &qr) * rat(2);
            let a0 = polar(&g, &pr, &pr);
            if a2.is_zero() {
                continue;
            }
            let disc = &a1 * &a1 - rat(4) * &a2 * &a0;
            if let Some(root) = rat_sqrt(&disc) {
                let z = (-&a1 + root) / (rat(2) * &a2);
                let pt: [Rat; 4] = [
                    &pr[0] + &z * &qr[0],
                    &pr[1] + &z * &qr[1],
                    &pr[2] + &z * &qr[2],
                    Rat::zero(),
                ];
                let p = Point::from_rats(&pt);
                if !p.is_zero() {
                    return Some(p);
                }
            }
        }
    }
    None
}

/// Source step for simple-tangency maps: normalizes
/// `q_hat = x1 l(x0,x2) + r(x0,x2)` to the tabulated conic.
fn tangent_simple_step(q_hat: &HForm<Rat>) -> Result<LinMap, MapError> {
    let l = q_hat.partial(1);
    let lc = l.linear_coeffs();
    let (beta, delta) = (lc[0].clone(), lc[2].clone());
    if beta.is_zero() && delta.is_zero() {
        return Err(MapError::NotBidegree22("tangency direction missing".into()));
    }
    // step 1: make l = x2
    let s1 = if !delta.is_zero() {
        LinMap([
            [Rat::one(), Rat::zero(), Rat::zero(), Rat::zero()],
            [Rat::zero(), Rat::one(), Rat::zero(), Rat::zero()],
            [beta.clone(), Rat::zero(), delta.clone(), Rat::zero()],
            [Rat::zero(), Rat::zero(), Rat::zero(), Rat::one()],
        ])
    } else {
        LinMap([
            [Rat::zero(), Rat::zero(), Rat::one(), Rat::zero()],
            [Rat::zero(), Rat::one(), Rat::zero(), Rat::zero()],
            [beta.clone(), Rat::zero(), Rat::zero(), Rat::zero()],
            [Rat::zero(), Rat::zero(), Rat::zero(), Rat::one()],
        ])
    };
    let s1inv = s1.inverse().expect("invertible step");
    let q1 = q_hat.substitute_linear(&s1inv.rows_as_forms());
    // q1 = cross*x1x2 + a x0^2 + b x0x2 + c x2^2  (no x1^2, no x0x1)
    let a = q1.coeff(&[2, 0, 0, 0]);
    let b = q1.coeff(&[1, 0, 1, 0]);
    let c = q1.coeff(&[0, 0, 2, 0]);
    let cross = q1.coeff(&[0, 1, 1, 0]);
    if cross.is_zero() || !q1.coeff(&[1, 1, 0, 0]).is_zero() {
        return Err(MapError::NotBidegree22(
            "tangency residual has an unexpected shape".into(),
        ));
    }
    // fold the cross coefficient and the mixed terms into x1:
    // x1' = cross*x1 + b*x0 + c*x2
    let s2 = LinMap([
        [Rat::one(), Rat::zero(), Rat::zero(), Rat::zero()],
        [b.clone(), cross.clone(), c.clone(), Rat::zero()],
        [Rat::zero(), Rat::zero(), Rat::one(), Rat::zero()],
        [Rat::zero(), Rat::zero(), Rat::zero(), Rat::one()],
    ]);
    let s2inv = s2.inverse().expect("invertible shift");
    let q2 = q1.substitute_linear(&s2inv.rows_as_forms());
    // q2 = x1x2 + a' x0^2 (projectively; cross stays nonzero)
    let a2v = q2.coeff(&[2, 0, 0, 0]);
    let _ = a;
    let s3 = if a2v.is_zero() {
        // tang(x): flip the sign of x2
        LinMap([
            [Rat::one(), Rat::zero(), Rat::zero(), Rat::zero()],
            [Rat::zero(), Rat::one(), Rat::zero(), Rat::zero()],
            [Rat::zero(), Rat::zero(), -Rat::one(), Rat::zero()],
            [Rat::zero(), Rat::zero(), Rat::zero(), Rat::one()],
        ])
    } else {
        // tang(O): x2 -> -a' x2, x3 -> -a' x3 lands on x1x3 + x1x2 - x0^2
        let cross2 = q2.coeff(&[0, 1, 1, 0]);
        let na = -(&a2v / &cross2);
        LinMap([
            [Rat::one(), Rat::zero(), Rat::zero(), Rat::zero()],
            [Rat::zero(), Rat::one(), Rat::zero(), Rat::zero()],
            [Rat::zero(), Rat::zero(), na.clone(), Rat::zero()],
            [Rat::zero(), Rat::zero(), Rat::zero(), na],
        ])
    };
    Ok(s3.compose(&s2).compose(&s1))
}

/// Source step for double-tangency maps: `q_hat = r(x0, x2)`.
fn tangent_double_step(r: &HForm<Rat>, prv: PrvType) -> Result<LinMap, MapError> {
    match prv {
        PrvType::TangP => {
            // r = e l^2: align l with x2
            let g = r.gram();
            let i = [0usize, 2]
                .into_iter()
                .find(|&i| !g[i][i].is_zero())
                .ok_or_else(|| MapError::NotBidegree22("rank-1 residual without square".into()))?;
            let l: [Rat; 4] = [g[i][0].clone(), Rat::zero(), g[i][2].clone(), Rat::zero()];
            let mut rows: [[Rat; 4]; 4] = Default::default();
            rows[2] = l;
            rows[1] = [Rat::zero(), Rat::one(), Rat::zero(), Rat::zero()];
            rows[3] = [Rat::zero(), Rat::zero(), Rat::zero(), Rat::one()];
            for cand in [0usize, 2] {
                let mut r0: [Rat; 4] = Default::default();
                r0[cand] = Rat::one();
                let test = LinMap([
                    r0.clone(),
                    rows[1].clone(),
                    rows[2].clone(),
                    rows[3].clone(),
                ]);
                if test.inverse().is_some() {
                    rows[0] = r0;
                    break;
                }
            }
            Ok(LinMap(rows))
        }
        PrvType::Osc2X => {
            // r = c L1 L2 on (x0, x2); the table form carries the moving
            // direction first: x'0 = x1, x'1 = -c L1, x'2 = L2
            let (l1, l2) = split_rank2_binary(r).ok_or_else(|| {
                MapError::RationalObstruction(
                    "rank-2 residual does not split over the rationals".into(),
                )
            })?;
            let prod = HForm::linear(&l1).mul(&HForm::linear(&l2));
            let probe = *prod.terms().next().unwrap().0;
            let cval = r.coeff(&probe) / prod.coeff(&probe);
            if prod.scale(&cval) != *r {
                return Err(MapError::NotBidegree22(
                    "binary split verification failed".into(),
                ));
            }
            let mut row1: [Rat; 4] = Default::default();
            for (c, l1c) in row1.iter_mut().zip(l1.iter()) {
                *c = -&cval * l1c;
            }
            Ok(LinMap([
                [Rat::zero(), Rat::one(), Rat::zero(), Rat::zero()],
                row1,
                l2,
                [Rat::zero(), Rat::zero(), Rat::zero(), Rat::one()],
            ]))
        }
        _ => unreachable!(),
    }
}

/// Splits a rank-2 binary quadratic in `x0, x2` into two rational
/// linear forms when its discriminant is a rational square.
fn split_rank2_binary(r: &HForm<Rat>) -> Option<([Rat; 4], [Rat; 4])> {
    let a = r.coeff(&[2, 0, 0, 0]);
    let b = r.coeff(&[1, 0, 1, 0]);
    let c = r.coeff(&[0, 0, 2, 0]);
    if a.is_zero() {
        if b.is_zero() {
            return None; // rank <= 1
        }
        // r = x2 (b x0 + c x2)
        return Some((
            [Rat::zero(), Rat::zero(), Rat::one(), Rat::zero()],
            [b, Rat::zero(), c, Rat::zero()],
        ));
    }
    let disc = &b * &b - rat(4) * &a * &c;
    if disc.is_zero() {
        return None; // rank 1
    }
    let root = rat_sqrt(&disc)?;
    let r1 = (-&b + &root) / (rat(2) * &a);
    let r2 = (-&b - &root) / (rat(2) * &a);
    // r = a (x0 - r1 x2)(x0 - r2 x2)
    Some((
        [Rat::one(), Rat::zero(), -r1, Rat::zero()],
        [a.clone(), Rat::zero(), -r2 * a, Rat::zero()],
    ))
}

/// Result of composing two quadratic maps: the raw degree-4 tuple, the
/// chain of extracted common factors, and the reduced map.
#[derive(Clone, Debug)]
pub struct Composition {
    pub raw: [HForm<Rat>; 4],
    pub extracted: Vec<HForm<Rat>>,
    pub reduced: Reduced,
}

#[derive(Clone, Debug)]
pub enum Reduced {
    Quadratic(QuadMap),
    Linear([HForm<Rat>; 4]),
    Raw([HForm<Rat>; 4]),
}

/// Composes `m1 . m2` and reduces out common rational factors greedily.
pub fn compose(m1: &QuadMap, m2: &QuadMap) -> Composition {
    let raw = compose_raw(&m1.components, &m2.components);
    let mut comps = raw.clone();
    let mut extracted: Vec<HForm<Rat>> = Vec::new();
    loop {
        if comps[0].degree() <= 1 {
            break;
        }
        let first = match comps.iter().find(|c| !c.is_zero()) {
            Some(f) => f.clone(),
            None => break,
        };
        let mut progressed = false;
        if let Ok(fz) = extract_linear_factors(&first) {
            let mut candidates: Vec<HForm<Rat>> =
                fz.factors.iter().map(|(g, _)| g.clone()).collect();
            if fz.residual.degree() >= 1 && fz.residual.degree() < comps[0].degree() {
                candidates.push(fz.residual.clone());
            }
            for cand in candidates {
                loop {
                    if comps[0].degree() <= cand.degree() {
                        break;
                    }
                    let quotients: Vec<Option<HForm<Rat>>> = comps
                        .iter()
                        .map(|c| {
                            if c.is_zero() {
                                Some(HForm::zero(c.degree() - cand.degree()))
                            } else {
                                c.exact_div(&cand)
                            }
                        })
                        .collect();
                    if quotients.iter().all(|q| q.is_some()) {
                        let mut it = quotients.into_iter().map(|q| q.unwrap());
                        comps = [
                            it.next().unwrap(),
                            it.next().unwrap(),
                            it.next().unwrap(),
                            it.next().unwrap(),
                        ];
                        extracted.push(cand.clone());
                        progressed = true;
                    } else {
                        break;
                    }
                }
            }
        }
        if !progressed {
            break;
        }
    }
    let reduced = match comps[0].degree() {
        2 => Reduced::Quadratic(QuadMap::new(
            comps.clone(),
            format!("{} . {}", m1.label, m2.label),
        )),
        1 => Reduced::Linear(comps.clone()),
        _ => Reduced::Raw(comps.clone()),
    };
    Composition {
        raw,
        extracted,
        reduced,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_forms_classify_to_themselves() {
        for t in PrvType::all_quadratic() {
            let rep = classify(&QuadMap::from_type(t)).unwrap();
            assert_eq!(rep.prv_type, t, "type {}", t.name());
            // blown-up point from the table
            let expect_pi = match t {
                PrvType::GenO | PrvType::GenX | PrvType::GenP => Point::from_i64([0, 0, 0, 1]),
                PrvType::TangO | PrvType::TangX | PrvType::TangP => Point::from_i64([0, 1, 0, 0]),
                PrvType::Osc2X => Point::from_i64([1, 0, 0, 0]),
                PrvType::Lin => unreachable!(),
            };
            assert_eq!(rep.p_i, expect_pi, "P_I of {}", t.name());
            assert_eq!(rep.p, expect_pi, "P of the normal form {}", t.name());
            assert_eq!(rep.h, HForm::var(3), "H of {}", t.name());
        }
    }

    #[test]
    fn table_jacobians_match() {
        for t in PrvType::all_quadratic() {
            assert_eq!(
                jacobian_det(&normal_form(t)),
                table_jacobian(t),
                "Jacobian of {}",
                t.name()
            );
        }
    }

    #[test]
    fn table_inverses_are_inverses() {
        for t in PrvType::all_quadratic() {
            let raw = compose_raw(&normal_form_inverse(t), &normal_form(t));
            assert!(
                HForm::cross_minors_zero(&raw, &QuadMap::identity_tuple()),
                "inverse of {}",
                t.name()
            );
        }
    }

    #[test]
    fn validate_examples() {
        // [x3x0, x3x1, x3x2, x3^2]: linear with factor x3, identity residual
        let m = QuadMap::new(
            [
                hf(&[(1, [1, 0, 0, 1])]),
                hf(&[(1, [0, 1, 0, 1])]),
                hf(&[(1, [0, 0, 1, 1])]),
                hf(&[(1, [0, 0, 0, 2])]),
            ],
            "lin",
        );
        match validate(&m) {
            Validity::Lin { factor, residual } => {
                assert_eq!(factor, HForm::var(3));
                assert_eq!(residual, LinMap::identity());
            }
            v => panic!("expected Lin, got {v:?}"),
        }
        assert!(matches!(
            validate(&QuadMap::from_type(PrvType::GenO)),
            Validity::Quadratic
        ));
        // [x0^2, x0x1, x0x2, x1x2]: Jacobian vanishes identically
        let deg = QuadMap::new(
            [
                hf(&[(1, [2, 0, 0, 0])]),
                hf(&[(1, [1, 1, 0, 0])]),
                hf(&[(1, [1, 0, 1, 0])]),
                hf(&[(1, [0, 1, 1, 0])]),
            ],
            "deg",
        );
        assert!(matches!(validate(&deg), Validity::Degenerate(_)));
    }

    #[test]
    fn contracted_plane_gen_parallel() {
        // gen(//): Jac factors {x3^2, x2^2}; only x3 qualifies
        let m = QuadMap::from_type(PrvType::GenP);
        let (h, _, p, c, _) = contracted_plane(&m).unwrap().unwrap();
        assert_eq!(h, HForm::var(3));
        assert_eq!(p, Point::from_i64([0, 0, 0, 1]));
        assert_eq!(c, hf(&[(1, [0, 0, 2, 0])]));
    }

    #[test]
    fn contracted_plane_osc() {
        let m = QuadMap::from_type(PrvType::Osc2X);
        let (h, _, p, c, _) = contracted_plane(&m).unwrap().unwrap();
        assert_eq!(h, HForm::var(3));
        assert_eq!(p, Point::from_i64([1, 0, 0, 0]));
        assert_eq!(c, hf(&[(1, [0, 1, 1, 0])]));
    }

    #[test]
    fn contracted_plane_tangll_fiber() {
        // the tang(//) example at t = 1: [x3^2 + x0x2, (x1+x2)x2, x2^2, x2x3]
        let m = QuadMap::new(
            [
                hf(&[(1, [0, 0, 0, 2]), (1, [1, 0, 1, 0])]),
                hf(&[(1, [0, 1, 1, 0]), (1, [0, 0, 2, 0])]),
                hf(&[(1, [0, 0, 2, 0])]),
                hf(&[(1, [0, 0, 1, 1])]),
            ],
            "tangll@1",
        );
        let (h, _, p, _, _) = contracted_plane(&m).unwrap().unwrap();
        assert_eq!(h, HForm::var(2));
        assert_eq!(p, Point::from_i64([1, 0, 0, 0]));
        let rep = classify(&m).unwrap();
        assert_eq!(rep.prv_type, PrvType::TangP);
    }

    #[test]
    fn classify_tang_x_dossier() {
        let rep = classify(&QuadMap::from_type(PrvType::TangX)).unwrap();
        assert_eq!(rep.prv_type, PrvType::TangX);
        // H_I = (x3 - x2 = 0)
        let (_, hi) = rep.h_i.as_primitive();
        let expect = hf(&[(1, [0, 0, 0, 1]), (-1, [0, 0, 1, 0])]);
        let (_, expect) = expect.as_primitive();
        assert_eq!(hi, expect);
        // Pi = (x2 - x3 = 0) up to sign
        let pi = rep.s_or_pi.unwrap();
        assert_eq!(pi, expect);
    }

    #[test]
    fn classify_rejects_squares_map() {
        let m = QuadMap::new(
            [
                hf(&[(1, [2, 0, 0, 0])]),
                hf(&[(1, [0, 2, 0, 0])]),
                hf(&[(1, [0, 0, 2, 0])]),
                hf(&[(1, [0, 0, 0, 2])]),
            ],
            "squares",
        );
        assert!(matches!(classify(&m), Err(MapError::NotBidegree22(_))));
    }

    #[test]
    fn invert_examples() {
        // gen(x) is an involution
        let m = QuadMap::from_type(PrvType::GenX);
        let inv = invert(&m).unwrap();
        assert!(HForm::cross_minors_zero(&inv.components, &m.components));
        // tang(O) and osc invert to the tabulated expressions
        for t in [PrvType::TangO, PrvType::Osc2X, PrvType::TangP] {
            let inv = invert(&QuadMap::from_type(t)).unwrap();
            assert!(
                HForm::cross_minors_zero(&inv.components, &normal_form_inverse(t)),
                "table inverse of {}",
                t.name()
            );
        }
    }

    #[test]
    fn canonicalize_normal_forms_identity() {
        for t in PrvType::all_quadratic() {
            let (a, b, n) = canonicalize(&QuadMap::from_type(t)).unwrap();
            assert_eq!(n, t);
            // A and B are scalar multiples of the identity
            for lm in [&a, &b] {
                for i in 0..4 {
                    for j in 0..4 {
                        if i != j {
                            assert!(lm.0[i][j].is_zero(), "{}: off-diagonal", t.name());
                        }
                    }
                    assert_eq!(lm.0[i][i], lm.0[0][0], "{}: non-scalar diagonal", t.name());
                }
            }
        }
    }

    #[test]
    fn canonicalize_conjugate_of_gen_o() {
        let a0 = LinMap::from_i64([[1, 2, 0, 1], [0, 1, 1, 0], [1, 0, 1, 0], [0, 1, 0, 1]]);
        let b0 = LinMap::from_i64([[2, 0, 1, 0], [1, 1, 0, 0], [0, 0, 1, 1], [1, 0, 0, 1]]);
        assert!(!a0.det().is_zero() && !b0.det().is_zero());
        let m = QuadMap::from_type(PrvType::GenO)
            .apply_left(&a0)
            .apply_right(&b0);
        let (a, b, n) = canonicalize(&m).unwrap();
        assert_eq!(n, PrvType::GenO);
        let recomposed = QuadMap::from_type(n).apply_left(&a).apply_right(&b);
        assert!(HForm::cross_minors_zero(&m.components, &recomposed.components));
    }

    #[test]
    fn canonicalize_tang_o_trivial_frame() {
        let m = QuadMap::from_type(PrvType::TangO);
        let rep = classify(&m).unwrap();
        // Pi = (x2 + x3 = 0)
        let pi = rep.s_or_pi.unwrap();
        assert_eq!(pi, hf(&[(1, [0, 0, 1, 0]), (1, [0, 0, 0, 1])]));
        assert_eq!(rep.h_i, pi);
    }

    #[test]
    fn compose_gen_o_self() {
        let m = QuadMap::from_type(PrvType::GenO);
        let comp = compose(&m, &m);
        match comp.reduced {
            Reduced::Linear(ref forms) => {
                assert!(HForm::cross_minors_zero(forms, &QuadMap::identity_tuple()));
            }
            ref r => panic!("expected reduction to the identity, got {r:?}"),
        }
        // extracted chain has total degree 3
        let total: u32 = comp.extracted.iter().map(|f| f.degree()).sum();
        assert_eq!(total, 3);
        assert!(HForm::cross_minors_zero(&comp.raw, &QuadMap::identity_tuple()));
    }

    #[test]
    fn compose_lin_left() {
        let a = LinMap::from_i64([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 1, 1], [0, 0, 0, 1]]);
        let m = QuadMap::from_type(PrvType::GenO).apply_left(&a);
        assert_eq!(classify(&m).unwrap().prv_type, PrvType::GenO);
    }

    #[test]
    fn compose_tang_x_with_inverse() {
        let m = QuadMap::from_type(PrvType::TangX);
        let inv = QuadMap::new(normal_form_inverse(PrvType::TangX), "inv");
        let comp = compose(&m, &inv);
        assert!(HForm::cross_minors_zero(&comp.raw, &QuadMap::identity_tuple()));
    }

    #[test]
    fn conjugates_keep_their_type() {
        // a moved P: left factor sending the image point into H
        let a = LinMap::from_i64([[0, 0, 0, 1], [0, 1, 0, 0], [0, 0, 1, 0], [1, 0, 0, 0]]);
        for t in PrvType::all_quadratic() {
            let m = QuadMap::from_type(t).apply_left(&a);
            let rep = classify(&m).unwrap();
            assert_eq!(rep.prv_type, t, "left-moved {}", t.name());
        }
    }
}
