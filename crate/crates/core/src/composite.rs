//! Operators `S = W1 #_p W2` and `F = Log_S(W1)` for one pair of diffusion
//! operators, their spectral embeddings and the product-based baselines.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::io;
use crate::linalg::{sym_eig, EigenOrdering, EigenSystem, LowRankSymmetric, SpdMatrix, SymmetricMatrix};
use crate::spd::{self, GeodesicParam};
use crate::spsd::{self, RankPolicy, SpsdFactors};

/// An operator whose `λ_min / λ_max` is at or below this is treated as
/// rank-deficient.
pub const SPSD_ROUTE_REL_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Routing {
    #[default]
    Auto,
    Spd,
    Spsd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Route {
    Spd,
    Spsd,
}

/// `λ_min / λ_max`; negative when the spectrum dips below zero.
pub fn relative_min_eig(w: &SymmetricMatrix) -> Result<f64> {
    let e = sym_eig(w, EigenOrdering::ByValueDesc)?;
    Ok(e.min_value() / e.max_value())
}

/// Picks the manifold for a set of operators: SPSD as soon as any one of
/// them is numerically rank-deficient.
pub fn choose_route<'a, I: IntoIterator<Item = &'a SymmetricMatrix>>(ops: I, routing: Routing) -> Result<Route> {
    match routing {
        Routing::Spd => Ok(Route::Spd),
        Routing::Spsd => Ok(Route::Spsd),
        Routing::Auto => {
            for w in ops {
                if relative_min_eig(w)? <= SPSD_ROUTE_REL_TOL {
                    return Ok(Route::Spsd);
                }
            }
            Ok(Route::Spd)
        }
    }
}

/// The `S` operator on either manifold.
#[derive(Clone, Debug, PartialEq)]
pub enum SOperator {
    Spd(SpdMatrix),
    Spsd(SpsdFactors),
}

impl SOperator {
    /// Lifts a raw operator onto `route`.
    pub fn from_symmetric(w: &SymmetricMatrix, route: Route) -> Result<Self> {
        match route {
            Route::Spd => Ok(SOperator::Spd(SpdMatrix::new(w.clone())?)),
            Route::Spsd => Ok(SOperator::Spsd(spsd::spsd_factorize(w, RankPolicy::default())?)),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SOperator::Spd(m) => m.dim(),
            SOperator::Spsd(f) => f.n(),
        }
    }

    pub fn route(&self) -> Route {
        match self {
            SOperator::Spd(_) => Route::Spd,
            SOperator::Spsd(_) => Route::Spsd,
        }
    }

    pub fn to_dense(&self) -> Result<SymmetricMatrix> {
        match self {
            SOperator::Spd(m) => Ok(m.as_symmetric().clone()),
            SOperator::Spsd(f) => f.to_dense(),
        }
    }

    /// Eigenpairs in descending order. On the SPSD path only the `r`
    /// non-zero pairs exist.
    pub fn eig(&self) -> EigenSystem {
        match self {
            SOperator::Spd(m) => m.eigen().clone(),
            SOperator::Spsd(f) => EigenSystem::from_unordered(f.lambda().as_slice(), f.v(), EigenOrdering::ByValueDesc),
        }
    }
}

/// The `F` operator: dense on the SPD path, `U C Uᵀ` on the SPSD path.
#[derive(Clone, Debug, PartialEq)]
pub enum FOperator {
    Dense(SymmetricMatrix),
    LowRank(LowRankSymmetric),
}

impl FOperator {
    pub fn dim(&self) -> usize {
        match self {
            FOperator::Dense(m) => m.dim(),
            FOperator::LowRank(l) => l.dim(),
        }
    }

    pub fn to_dense(&self) -> Result<SymmetricMatrix> {
        match self {
            FOperator::Dense(m) => Ok(m.clone()),
            FOperator::LowRank(l) => l.to_dense(),
        }
    }

    /// Eigenpairs by descending `|λ|`; the low-rank form omits the zero
    /// eigenvalues of the complement.
    pub fn eig(&self) -> Result<EigenSystem> {
        match self {
            FOperator::Dense(m) => sym_eig(m, EigenOrdering::ByAbsValueDesc),
            FOperator::LowRank(l) => l.eig(EigenOrdering::ByAbsValueDesc),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Provenance {
    pub first: String,
    pub second: String,
}

#[derive(Clone, Debug)]
pub struct CompositePair {
    pub s: SOperator,
    pub f: FOperator,
    pub p: GeodesicParam,
    pub route: Route,
    pub provenance: Provenance,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComposeOptions {
    pub p: GeodesicParam,
    pub routing: Routing,
}

impl Default for ComposeOptions {
    fn default() -> Self {
        Self {
            p: GeodesicParam::MIDPOINT,
            routing: Routing::Auto,
        }
    }
}

/// `S_p = W1 #_p W2`.
pub fn compose_s(w1: &SpdMatrix, w2: &SpdMatrix, p: GeodesicParam) -> Result<SpdMatrix> {
    spd::geodesic(w1, w2, p)
}

/// `F_p = Log_{S_p}(W1)`.
pub fn compose_f(w1: &SpdMatrix, w2: &SpdMatrix, p: GeodesicParam) -> Result<SymmetricMatrix> {
    Ok(spd::geodesic_with_log(w1, w2, p)?.1)
}

/// Brings two SPSD factorizations to their common (smaller) rank.
pub fn match_ranks(a: &SpsdFactors, b: &SpsdFactors) -> Result<(SpsdFactors, SpsdFactors)> {
    let r = a.rank().min(b.rank());
    Ok((a.truncate(r)?, b.truncate(r)?))
}

/// Composes two operators that already live on the same manifold; `F` is
/// taken at the first argument.
pub fn compose_operators(a: &SOperator, b: &SOperator, p: GeodesicParam) -> Result<(SOperator, FOperator)> {
    match (a, b) {
        (SOperator::Spd(w1), SOperator::Spd(w2)) => {
            let (s, f) = spd::geodesic_with_log(w1, w2, p)?;
            Ok((SOperator::Spd(s), FOperator::Dense(f)))
        }
        (SOperator::Spsd(g1), SOperator::Spsd(g2)) => {
            let (g1, g2) = match_ranks(g1, g2)?;
            let s = spsd::spsd_geodesic(&g1, &g2, p)?;
            let f = spsd::spsd_compose_f(&s, &g1)?;
            Ok((SOperator::Spsd(s), FOperator::LowRank(f)))
        }
        _ => Err(Error::InvalidParameter("cannot compose operators living on different manifolds".into())),
    }
}

/// Both operators of one pair, routed per `opts`.
pub fn compose(w1: &SymmetricMatrix, w2: &SymmetricMatrix, opts: &ComposeOptions) -> Result<CompositePair> {
    w1.same_dim(w2)?;
    let route = choose_route([w1, w2], opts.routing)?;
    let a = SOperator::from_symmetric(w1, route)?;
    let b = SOperator::from_symmetric(w2, route)?;
    let (s, f) = compose_operators(&a, &b, opts.p)?;
    Ok(CompositePair {
        s,
        f,
        p: opts.p,
        route,
        provenance: Provenance::default(),
    })
}

/// [`compose`] forced onto the SPD path with `p = 0.5`.
pub fn compose_spd(w1: &SymmetricMatrix, w2: &SymmetricMatrix) -> Result<CompositePair> {
    compose(
        w1,
        w2,
        &ComposeOptions {
            routing: Routing::Spd,
            ..Default::default()
        },
    )
}

/// `(Exp_S(F), Exp_S(−F))`, which returns `(W1, W2)` at the midpoint.
pub fn reconstruct(pair: &CompositePair) -> Result<(SpdMatrix, SpdMatrix)> {
    if pair.p != GeodesicParam::MIDPOINT {
        return Err(Error::InvalidParameter(
            "reconstruction of the second operator needs p = 0.5".into(),
        ));
    }
    let (SOperator::Spd(s), FOperator::Dense(f)) = (&pair.s, &pair.f) else {
        return Err(Error::InvalidParameter("reconstruction is defined on the SPD path only".into()));
    };
    Ok((spd::exp_map(s, f)?, spd::exp_map(s, &f.neg())?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// Largest eigenvalues; the natural view of `S`.
    TopByValue,
    /// Largest `|λ|`; the primary view of `F`.
    TopByAbsValue,
    /// The `positive` largest and the `negative` most negative eigenvalues.
    Signed { positive: usize, negative: usize },
    /// Leading singular vectors, for the antisymmetric baseline.
    Singular,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub vectors: DMatrix<f64>,
    pub values: DVector<f64>,
    pub selection: Selection,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    /// CSV with a header naming each column's eigenvalue.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_path(path)?;
        w.write_record(self.values.iter().map(|v| format!("lambda={}", io::format_f64(*v))))?;
        for i in 0..self.vectors.nrows() {
            w.write_record(self.vectors.row(i).iter().map(|v| io::format_f64(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let bad = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let mut values = Vec::new();
        for h in r.headers()?.iter() {
            let v = h
                .strip_prefix("lambda=")
                .and_then(|s| s.parse::<f64>().ok())
                .ok_or_else(|| bad(format!("bad header field {h:?}")))?;
            values.push(v);
        }
        let mut data = Vec::new();
        let mut rows = 0;
        for rec in r.records() {
            let rec = rec?;
            for f in rec.iter() {
                data.push(f.parse::<f64>().map_err(|_| bad(format!("cannot parse {f:?}")))?);
            }
            rows += 1;
        }
        Ok(Self {
            vectors: DMatrix::from_row_slice(rows, values.len(), &data),
            values: DVector::from_vec(values),
            selection: Selection::TopByAbsValue,
        })
    }
}

fn take(eig: &EigenSystem, idx: &[usize], selection: Selection) -> Embedding {
    let n = eig.vectors.nrows();
    let mut vectors = DMatrix::zeros(n, idx.len());
    let mut values = DVector::zeros(idx.len());
    for (k, &i) in idx.iter().enumerate() {
        vectors.set_column(k, &eig.vectors.column(i));
        values[k] = eig.values[i];
    }
    Embedding {
        vectors,
        values,
        selection,
    }
}

/// Selects `m` eigenpairs from an existing decomposition.
pub fn embed_eigen(eig: &EigenSystem, m: usize, selection: Selection) -> Result<Embedding> {
    let available = eig.len();
    let need = match selection {
        Selection::Signed { positive, negative } => positive + negative,
        _ => m,
    };
    if need > available {
        return Err(Error::RankUnavailable {
            requested: need,
            available,
        });
    }
    let by = |ord: EigenOrdering| eig.reorder(ord);
    match selection {
        Selection::TopByValue => Ok(take(&by(EigenOrdering::ByValueDesc), &(0..m).collect::<Vec<_>>(), selection)),
        Selection::TopByAbsValue | Selection::Singular => {
            Ok(take(&by(EigenOrdering::ByAbsValueDesc), &(0..m).collect::<Vec<_>>(), selection))
        }
        Selection::Signed { positive, negative } => {
            let sorted = by(EigenOrdering::ByValueDesc);
            let len = sorted.len();
            let pos: Vec<usize> = (0..len).filter(|&i| sorted.values[i] > 0.0).take(positive).collect();
            let neg: Vec<usize> = (0..len).rev().filter(|&i| sorted.values[i] < 0.0).take(negative).collect();
            if pos.len() < positive || neg.len() < negative {
                return Err(Error::RankUnavailable {
                    requested: need,
                    available: pos.len() + neg.len(),
                });
            }
            let idx: Vec<usize> = pos.into_iter().chain(neg).collect();
            Ok(take(&sorted, &idx, selection))
        }
    }
}

/// Algorithm-style spectral embedding of a symmetric operator.
pub fn embed(op: &SymmetricMatrix, m: usize, selection: Selection) -> Result<Embedding> {
    if m > op.dim() {
        return Err(Error::InvalidParameter(format!("embedding dimension {m} exceeds N = {}", op.dim())));
    }
    embed_eigen(&sym_eig(op, EigenOrdering::ByValueDesc)?, m, selection)
}

fn product_checks(w1: &SymmetricMatrix, w2: &SymmetricMatrix) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    w1.same_dim(w2)?;
    let a = w1.as_matrix() * w2.as_matrix().transpose();
    let b = w2.as_matrix() * w1.as_matrix().transpose();
    Ok((a, b))
}

/// `LᵀL` with `L = W1 W2`.
pub fn baseline_dynamic_laplacian(w1: &SymmetricMatrix, w2: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    w1.same_dim(w2)?;
    let l = w1.as_matrix() * w2.as_matrix();
    SymmetricMatrix::new(l.transpose() * l)
}

/// `Ŝ = W1W2ᵀ + W2W1ᵀ`.
pub fn baseline_hat_s(w1: &SymmetricMatrix, w2: &SymmetricMatrix) -> Result<SymmetricMatrix> {
    let (a, b) = product_checks(w1, w2)?;
    SymmetricMatrix::new(a + b)
}

/// `Â = W1W2ᵀ − W2W1ᵀ` (antisymmetric, returned as a plain matrix).
pub fn baseline_hat_a(w1: &SymmetricMatrix, w2: &SymmetricMatrix) -> Result<DMatrix<f64>> {
    let (a, b) = product_checks(w1, w2)?;
    let mut d = a - b;
    let n = d.nrows();
    for j in 0..n {
        d[(j, j)] = 0.0;
        for i in 0..j {
            let v = 0.5 * (d[(i, j)] - d[(j, i)]);
            d[(i, j)] = v;
            d[(j, i)] = -v;
        }
    }
    Ok(d)
}

/// Leading left singular vectors of a general square matrix.
pub fn embed_singular(a: &DMatrix<f64>, m: usize) -> Result<Embedding> {
    if m > a.ncols().min(a.nrows()) {
        return Err(Error::InvalidParameter(format!("embedding dimension {m} exceeds {}", a.ncols())));
    }
    let svd = nalgebra::SVD::try_new(a.clone(), true, false, f64::EPSILON, 10_000)
        .ok_or(Error::SvdNoConvergence { iterations: 10_000 })?;
    let u = svd.u.expect("requested");
    let eig = EigenSystem::from_unordered(svd.singular_values.as_slice(), &u, EigenOrdering::ByValueDesc);
    embed_eigen(&eig, m, Selection::Singular)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::toy_spd_pair;
    use crate::testutil::random_spd;

    fn spd(m: &SymmetricMatrix) -> SpdMatrix {
        SpdMatrix::new(m.clone()).unwrap()
    }

    #[test]
    fn self_composition() {
        let w = random_spd(5, 1e-2, 1);
        let s = compose_s(&w, &w, GeodesicParam::MIDPOINT).unwrap();
        assert!(s.as_symmetric().rel_diff(w.as_symmetric()) < 1e-12);
        let f = compose_f(&w, &w, GeodesicParam::MIDPOINT).unwrap();
        assert!(f.frobenius_norm() < 1e-12);
    }

    #[test]
    fn toy_spectra() {
        let toy = toy_spd_pair();
        let s = compose_s(&spd(&toy.m1), &spd(&toy.m2), GeodesicParam::MIDPOINT).unwrap();
        let want = [1.0, 0.2, 0.005f64.sqrt(), 0.005f64.sqrt()];
        for (g, w) in s.eigen().values.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
        let f = compose_f(&spd(&toy.m1), &spd(&toy.m2), GeodesicParam::MIDPOINT).unwrap();
        let e = sym_eig(&f, EigenOrdering::ByValueDesc).unwrap();
        let lf = 0.5 * 0.005f64.sqrt() * 50f64.ln();
        for (g, w) in e.values.iter().zip([lf, 0.0, 0.0, -lf]) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn swap_negates_f() {
        let a = random_spd(6, 1e-2, 3);
        let b = random_spd(6, 1e-2, 4);
        let f = compose_f(&a, &b, GeodesicParam::MIDPOINT).unwrap();
        let g = compose_f(&b, &a, GeodesicParam::MIDPOINT).unwrap();
        assert!(f.add(&g).unwrap().frobenius_norm() < 1e-9 * f.frobenius_norm());
    }

    #[test]
    fn routing() {
        let toy = crate::datagen::toy_spsd_pair();
        assert_eq!(choose_route([&toy.m1, &toy.m2], Routing::Auto).unwrap(), Route::Spsd);
        let full = toy_spd_pair();
        assert_eq!(choose_route([&full.m1, &full.m2], Routing::Auto).unwrap(), Route::Spd);
        let pair = compose(&toy.m1, &toy.m2, &ComposeOptions::default()).unwrap();
        assert_eq!(pair.route, Route::Spsd);
    }

    #[test]
    fn embed_examples() {
        let d = SymmetricMatrix::from_diagonal(&[3.0, 1.0, 2.0]).unwrap();
        let e = embed(&d, 3, Selection::TopByValue).unwrap();
        assert_eq!(e.values.as_slice(), &[3.0, 2.0, 1.0]);
        assert!(crate::linalg::orthonormality_error(&e.vectors) < 1e-10);
        assert!(embed(&d, 4, Selection::TopByValue).is_err());

        let toy = toy_spd_pair();
        let pair = compose_spd(&toy.m1, &toy.m2).unwrap();
        let f = pair.f.to_dense().unwrap();
        let signed = embed(&f, 2, Selection::Signed { positive: 1, negative: 1 }).unwrap();
        assert!((signed.values[0] - 0.1383109).abs() < 1e-6);
        assert!((signed.values[1] + 0.1383109).abs() < 1e-6);
        assert!((signed.vectors.column(0).dot(&toy.psi.column(0)).abs() - 1.0).abs() < 1e-10);
        assert!((signed.vectors.column(1).dot(&toy.psi.column(2)).abs() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn reconstruct_round_trip() {
        let toy = toy_spd_pair();
        let pair = compose_spd(&toy.m1, &toy.m2).unwrap();
        let (a, b) = reconstruct(&pair).unwrap();
        assert!(a.as_symmetric().rel_diff(&toy.m1) < 1e-10);
        assert!(b.as_symmetric().rel_diff(&toy.m2) < 1e-10);

        let w = random_spd(4, 1e-1, 2);
        let same = compose_spd(w.as_symmetric(), w.as_symmetric()).unwrap();
        let (a, b) = reconstruct(&same).unwrap();
        assert!(a.as_symmetric().rel_diff(w.as_symmetric()) < 1e-12);
        assert!(b.as_symmetric().rel_diff(w.as_symmetric()) < 1e-12);
    }

    #[test]
    fn reconstruct_needs_midpoint() {
        let w = random_spd(3, 1e-1, 2);
        let pair = compose(
            w.as_symmetric(),
            w.as_symmetric(),
            &ComposeOptions {
                p: GeodesicParam::new(0.3).unwrap(),
                routing: Routing::Spd,
            },
        )
        .unwrap();
        assert!(reconstruct(&pair).is_err());
    }

    #[test]
    fn baselines() {
        let i = SymmetricMatrix::identity(3);
        assert_eq!(baseline_dynamic_laplacian(&i, &i).unwrap(), i);
        let a = SymmetricMatrix::from_diagonal(&[1.0, 2.0]).unwrap();
        let b = SymmetricMatrix::from_diagonal(&[3.0, 0.5]).unwrap();
        let dl = baseline_dynamic_laplacian(&a, &b).unwrap();
        assert_eq!(dl, SymmetricMatrix::from_diagonal(&[9.0, 1.0]).unwrap());
        assert_eq!(baseline_hat_s(&a, &b).unwrap(), SymmetricMatrix::from_diagonal(&[6.0, 2.0]).unwrap());
        assert_eq!(baseline_hat_a(&a, &b).unwrap(), DMatrix::zeros(2, 2));

        let w1 = random_spd(5, 1e-2, 7);
        let w2 = random_spd(5, 1e-2, 8);
        let (s1, s2) = (w1.as_symmetric(), w2.as_symmetric());
        assert!(baseline_hat_s(s1, s2).unwrap().rel_diff(&baseline_hat_s(s2, s1).unwrap()) < 1e-15);
        assert!((baseline_hat_a(s1, s2).unwrap() + baseline_hat_a(s2, s1).unwrap()).amax() < 1e-15);
        let e = sym_eig(&baseline_dynamic_laplacian(s1, s2).unwrap(), EigenOrdering::ByValueDesc).unwrap();
        assert!(e.min_value() >= -1e-12);
        let same = baseline_hat_s(s1, s1).unwrap();
        let sq = SymmetricMatrix::new(s1.as_matrix() * s1.as_matrix() * 2.0).unwrap();
        assert!(same.rel_diff(&sq) < 1e-14);
        let emb = embed_singular(&baseline_hat_a(s1, s2).unwrap(), 2).unwrap();
        assert!(emb.values[0] >= emb.values[1]);
    }

    #[test]
    fn embedding_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let d = SymmetricMatrix::from_diagonal(&[3.0, 1.0, 2.0]).unwrap();
        let e = embed(&d, 2, Selection::TopByValue).unwrap();
        let p = dir.path().join("e.csv");
        e.write_csv(&p).unwrap();
        let back = Embedding::read_csv(&p).unwrap();
        assert_eq!(back.values, e.values);
        assert_eq!(back.vectors, e.vectors);
    }
}
