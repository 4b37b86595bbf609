//! Network geometry, long-term CSI synthesis and scenario persistence.
//!
//! A [`Scenario`] holds the second-order channel statistics of every
//! BS-to-user link: `R[m][n][i]` is the spatial correlation matrix from BS
//! `m` to user `i` of cell `n`, already scaled by path loss. Scenarios are
//! generated from a [`LayoutSpec`] (uniform linear arrays, Gaussian angular
//! spread, `d^chi` path loss) or assembled by hand, and persist to a
//! versioned JSON file.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hermlin::{eig_hermitian, CMatrix, HermitianMatrix};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// Users closer than this to their BS are not generated.
pub const GUARD_RADIUS: f64 = 35.0;

/// Relative tolerance for the PSD check of stored correlation matrices.
pub const CORRELATION_PSD_TOL: f64 = 1e-10;

/// A correlation matrix counts as rank > 1 when its second eigenvalue
/// exceeds this fraction of the largest.
pub const CORRELATION_RANK_TOL: f64 = 1e-12;

/// User `index` of cell `cell`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct UserId {
    pub cell: usize,
    pub index: usize,
}

impl UserId {
    pub fn new(cell: usize, index: usize) -> Self {
        Self { cell, index }
    }
}

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.cell, self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutKind {
    TwoCellLine,
    SquareCorners,
    Hexagonal7,
}

impl LayoutKind {
    pub fn cell_count(self) -> usize {
        match self {
            LayoutKind::TwoCellLine => 2,
            LayoutKind::SquareCorners => 4,
            LayoutKind::Hexagonal7 => 7,
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "two-cell-line" => Some(LayoutKind::TwoCellLine),
            "square-corners" => Some(LayoutKind::SquareCorners),
            "hexagonal-7" | "hexagonal7" => Some(LayoutKind::Hexagonal7),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSpec {
    pub kind: LayoutKind,
    pub inter_bs_distance: f64,
    pub pathloss_exponent: f64,
    /// Angular spread of the local scatterers, radians.
    pub angular_spread: f64,
}

impl LayoutSpec {
    pub fn new(kind: LayoutKind) -> Self {
        Self {
            kind,
            inter_bs_distance: 2000.0,
            pathloss_exponent: -3.0,
            angular_spread: 2f64.to_radians(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inter_bs_distance > 0.0) || !self.inter_bs_distance.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "inter-BS distance must be positive, got {}",
                self.inter_bs_distance
            )));
        }
        if !(self.pathloss_exponent < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "path-loss exponent must be negative, got {}",
                self.pathloss_exponent
            )));
        }
        if !(self.angular_spread >= 0.0) || !self.angular_spread.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "angular spread must be nonnegative, got {}",
                self.angular_spread
            )));
        }
        if self.inter_bs_distance / 2.0 <= GUARD_RADIUS {
            return Err(Error::InvalidParameter(format!(
                "inter-BS distance {} leaves no room outside the {GUARD_RADIUS} guard radius",
                self.inter_bs_distance
            )));
        }
        Ok(())
    }

    /// BS sites with their array broadside orientation.
    pub fn sites(&self) -> Vec<Site> {
        let d = self.inter_bs_distance;
        let positions: Vec<Point> = match self.kind {
            LayoutKind::TwoCellLine => vec![Point::new(0.0, 0.0), Point::new(d, 0.0)],
            LayoutKind::SquareCorners => vec![
                Point::new(0.0, 0.0),
                Point::new(d, 0.0),
                Point::new(0.0, d),
                Point::new(d, d),
            ],
            LayoutKind::Hexagonal7 => std::iter::once(Point::new(0.0, 0.0))
                .chain((0..6).map(|k| {
                    let a = k as f64 * PI / 3.0;
                    Point::new(d * a.cos(), d * a.sin())
                }))
                .collect(),
        };
        outward_sites(&positions)
    }
}

/// A base station location and the direction its array broadside faces
/// (radians from the +x axis).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub position: Point,
    pub broadside: f64,
}

/// Orients every broadside away from the centroid of `positions`; a site at
/// the centroid faces +x.
pub fn outward_sites(positions: &[Point]) -> Vec<Site> {
    let n = positions.len().max(1) as f64;
    let cx = positions.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = positions.iter().map(|p| p.y).sum::<f64>() / n;
    positions
        .iter()
        .map(|p| {
            let (dx, dy) = (p.x - cx, p.y - cy);
            let broadside = if dx.hypot(dy) < 1e-9 { 0.0 } else { dy.atan2(dx) };
            Site {
                position: *p,
                broadside,
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Geometry {
    pub sites: Vec<Site>,
    /// `users[m][i]` is the position of user `(m, i)`.
    pub users: Vec<Vec<Point>>,
}

impl Geometry {
    /// Distance from BS `bs` to user `u`.
    pub fn distance(&self, bs: usize, u: UserId) -> f64 {
        self.sites[bs].position.distance(&self.users[u.cell][u.index])
    }

    /// Angle of user `u` relative to the broadside of BS `bs`, in (-pi, pi].
    pub fn angle(&self, bs: usize, u: UserId) -> f64 {
        let s = &self.sites[bs];
        let p = &self.users[u.cell][u.index];
        wrap_angle((p.y - s.position.y).atan2(p.x - s.position.x) - s.broadside)
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

/// A complete network instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    cells: usize,
    users_per_cell: usize,
    antennas: usize,
    /// Flattened `[bs][cell][user]`.
    corr: Vec<HermitianMatrix>,
    sigma2: Vec<f64>,
    gamma: Vec<f64>,
    pub layout: Option<LayoutSpec>,
    pub geometry: Option<Geometry>,
    pub seed: u64,
}

impl Scenario {
    /// Builds and validates a scenario. `corr(bs, user)` is the correlation
    /// matrix from BS `bs` to `user`; `sigma2` and `gamma` are indexed by
    /// flat user index `cell * K + index`.
    pub fn from_fn(
        cells: usize,
        users_per_cell: usize,
        antennas: usize,
        mut corr: impl FnMut(usize, UserId) -> HermitianMatrix,
        sigma2: Vec<f64>,
        gamma: Vec<f64>,
    ) -> Result<Self> {
        let mut r = Vec::with_capacity(cells * cells * users_per_cell);
        for bs in 0..cells {
            for cell in 0..cells {
                for index in 0..users_per_cell {
                    r.push(corr(bs, UserId::new(cell, index)));
                }
            }
        }
        let s = Self {
            cells,
            users_per_cell,
            antennas,
            corr: r,
            sigma2,
            gamma,
            layout: None,
            geometry: None,
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let (m, k, n) = (self.cells, self.users_per_cell, self.antennas);
        if m == 0 || k == 0 {
            return Err(Error::InvalidScenario("need at least one cell and one user".into()));
        }
        if n < 2 {
            return Err(Error::InvalidScenario(format!(
                "need at least two antennas for rank > 1 correlation, got {n}"
            )));
        }
        let mk = m * k;
        if self.sigma2.len() != mk || self.gamma.len() != mk || self.corr.len() != m * mk {
            return Err(Error::InvalidScenario("array sizes do not match M, K".into()));
        }
        for (u, (&s2, &g)) in self.sigma2.iter().zip(&self.gamma).enumerate() {
            let id = self.user(u);
            if !(s2 > 0.0) || !s2.is_finite() {
                return Err(Error::InvalidScenario(format!("sigma2 of user {id} must be positive")));
            }
            if !(g > 0.0) || !g.is_finite() {
                return Err(Error::InvalidScenario(format!("gamma of user {id} must be positive")));
            }
        }
        for bs in 0..m {
            for u in 0..mk {
                let id = self.user(u);
                let r = self.corr(bs, id);
                if r.dim() != n {
                    return Err(Error::InvalidScenario(format!(
                        "R[{bs}]{id} has dimension {}, expected {n}",
                        r.dim()
                    )));
                }
                let eig = eig_hermitian(r)?;
                let top = eig.max();
                if !(top > 0.0) {
                    return Err(Error::InvalidScenario(format!("R[{bs}]{id} is zero")));
                }
                if eig.min() < -CORRELATION_PSD_TOL * top {
                    return Err(Error::InvalidScenario(format!(
                        "R[{bs}]{id} is not PSD (min eigenvalue {:e})",
                        eig.min()
                    )));
                }
                if eig.eigenvalues[n - 2] <= CORRELATION_RANK_TOL * top {
                    return Err(Error::InvalidScenario(format!("R[{bs}]{id} has rank <= 1")));
                }
            }
        }
        if let Some(g) = &self.geometry {
            if g.sites.len() != m || g.users.len() != m || g.users.iter().any(|c| c.len() != k) {
                return Err(Error::InvalidScenario("geometry does not match M, K".into()));
            }
        }
        Ok(())
    }

    /// Number of cells (and BSs), `M`.
    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Users per cell, `K`.
    pub fn users_per_cell(&self) -> usize {
        self.users_per_cell
    }

    /// Antennas per BS, `N`.
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn num_users(&self) -> usize {
        self.cells * self.users_per_cell
    }

    pub fn user(&self, flat: usize) -> UserId {
        UserId::new(flat / self.users_per_cell, flat % self.users_per_cell)
    }

    pub fn flat(&self, u: UserId) -> usize {
        u.cell * self.users_per_cell + u.index
    }

    pub fn users(&self) -> impl Iterator<Item = UserId> + '_ {
        (0..self.num_users()).map(|u| self.user(u))
    }

    /// Correlation matrix from BS `bs` to user `u`.
    pub fn corr(&self, bs: usize, u: UserId) -> &HermitianMatrix {
        &self.corr[bs * self.num_users() + self.flat(u)]
    }

    pub fn gamma(&self, u: UserId) -> f64 {
        self.gamma[self.flat(u)]
    }

    pub fn sigma2(&self, u: UserId) -> f64 {
        self.sigma2[self.flat(u)]
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gamma
    }

    pub fn noise(&self) -> &[f64] {
        &self.sigma2
    }

    /// Copy with every SINR target replaced by `gamma`.
    pub fn with_uniform_gamma(&self, gamma: f64) -> Result<Self> {
        let mut s = self.clone();
        s.gamma = vec![gamma; self.num_users()];
        s.validate()?;
        Ok(s)
    }

    /// View with every coupling term included.
    pub fn view(&self) -> ScenarioView<'_> {
        ScenarioView {
            scenario: self,
            coupling: Coupling::Full,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, &self.to_file())?;
        std::io::Write::flush(&mut w)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("scenario serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        Self::from_file(file)
    }

    fn to_file(&self) -> ScenarioFile {
        let (m, k) = (self.cells, self.users_per_cell);
        let grid = |v: &[f64]| (0..m).map(|c| v[c * k..(c + 1) * k].to_vec()).collect();
        let r = (0..m)
            .map(|bs| {
                (0..m)
                    .map(|cell| {
                        (0..k)
                            .map(|i| encode_matrix(self.corr(bs, UserId::new(cell, i)).matrix()))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        ScenarioFile {
            version: SCENARIO_SCHEMA_VERSION,
            m,
            k,
            n: self.antennas,
            layout: self.layout,
            seed: self.seed,
            gamma: grid(&self.gamma),
            sigma2: grid(&self.sigma2),
            geometry: self.geometry.clone(),
            r,
        }
    }

    fn from_file(f: ScenarioFile) -> Result<Self> {
        if f.version != SCENARIO_SCHEMA_VERSION {
            return Err(Error::Schema(format!(
                "unsupported scenario version {} (expected {SCENARIO_SCHEMA_VERSION})",
                f.version
            )));
        }
        let (m, k, n) = (f.m, f.k, f.n);
        let flatten = |name: &str, g: Vec<Vec<f64>>| -> Result<Vec<f64>> {
            if g.len() != m || g.iter().any(|row| row.len() != k) {
                return Err(Error::Schema(format!("`{name}` must be an {m}x{k} array")));
            }
            Ok(g.into_iter().flatten().collect())
        };
        let gamma = flatten("gamma", f.gamma)?;
        let sigma2 = flatten("sigma2", f.sigma2)?;
        if f.r.len() != m || f.r.iter().any(|b| b.len() != m || b.iter().any(|c| c.len() != k)) {
            return Err(Error::Schema(format!("`R` must be indexed [{m}][{m}][{k}]")));
        }
        let mut corr = Vec::with_capacity(m * m * k);
        for (bs, per_bs) in f.r.into_iter().enumerate() {
            for (cell, per_cell) in per_bs.into_iter().enumerate() {
                for (i, raw) in per_cell.into_iter().enumerate() {
                    let mat = decode_matrix(&raw, n)
                        .ok_or_else(|| Error::Schema(format!("R[{bs}][{cell}][{i}] must be {n}x{n} [re, im] pairs")))?;
                    let h = HermitianMatrix::new(mat)
                        .map_err(|e| Error::InvalidScenario(format!("R[{bs}][{cell}][{i}]: {e}")))?;
                    corr.push(h);
                }
            }
        }
        let s = Self {
            cells: m,
            users_per_cell: k,
            antennas: n,
            corr,
            sigma2,
            gamma,
            layout: f.layout,
            geometry: f.geometry,
            seed: f.seed,
        };
        if let Some(l) = &s.layout {
            l.validate()?;
        }
        s.validate()?;
        Ok(s)
    }
}

type RawMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    version: u32,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "K")]
    k: usize,
    #[serde(rename = "N")]
    n: usize,
    layout: Option<LayoutSpec>,
    seed: u64,
    gamma: Vec<Vec<f64>>,
    sigma2: Vec<Vec<f64>>,
    geometry: Option<Geometry>,
    #[serde(rename = "R")]
    r: Vec<Vec<Vec<RawMatrix>>>,
}

fn encode_matrix(m: &CMatrix) -> RawMatrix {
    (0..m.nrows())
        .map(|r| (0..m.ncols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect())
        .collect()
}

fn decode_matrix(raw: &RawMatrix, n: usize) -> Option<CMatrix> {
    if raw.len() != n || raw.iter().any(|row| row.len() != n) {
        return None;
    }
    Some(CMatrix::from_fn(n, n, |r, c| {
        Complex64::new(raw[r][c][0], raw[r][c][1])
    }))
}

/// Spatial correlation of a uniform linear array (half-wavelength spacing)
/// towards a user at angle `theta` from broadside, with Gaussian angular
/// spread `sigma_theta`:
///
/// `[R]_{k,l} = exp(j pi (k-l) sin theta) * exp(-((pi (k-l) sigma_theta cos theta)^2) / 2)`
///
/// Negative eigenvalues produced by round-off are clipped to zero.
pub fn build_correlation(theta: f64, sigma_theta: f64, n: usize) -> HermitianMatrix {
    assert!(n >= 1, "need at least one antenna");
    let (s, c) = theta.sin_cos();
    let m = CMatrix::from_fn(n, n, |k, l| {
        let d = k as f64 - l as f64;
        let spread = PI * d * sigma_theta * c;
        Complex64::from_polar((-0.5 * spread * spread).exp(), PI * d * s)
    });
    project_psd(HermitianMatrix::symmetrize(m))
}

fn project_psd(h: HermitianMatrix) -> HermitianMatrix {
    let eig = match eig_hermitian(&h) {
        Ok(e) => e,
        Err(_) => return h,
    };
    if eig.min() >= 0.0 {
        return h;
    }
    let clipped = crate::hermlin::EigenDecomposition {
        eigenvalues: eig.eigenvalues.iter().map(|&b| b.max(0.0)).collect(),
        eigenvectors: eig.eigenvectors,
    };
    HermitianMatrix::symmetrize(clipped.reconstruct())
}

/// Scales `rbar` by `d^chi`.
pub fn apply_pathloss(rbar: &HermitianMatrix, d: f64, chi: f64) -> Result<HermitianMatrix> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidParameter(format!("distance must be positive, got {d}")));
    }
    Ok(rbar.scaled(d.powf(chi)))
}

/// Draws a scenario for one of the built-in layouts with uniform SINR
/// targets and noise variances. Deterministic in `seed`.
pub fn generate_scenario(
    layout: &LayoutSpec,
    cells: usize,
    users_per_cell: usize,
    antennas: usize,
    gamma: f64,
    sigma2: f64,
    seed: u64,
) -> Result<Scenario> {
    layout.validate()?;
    if cells != layout.kind.cell_count() {
        return Err(Error::InvalidParameter(format!(
            "layout {:?} has {} cells, requested M = {cells}",
            layout.kind,
            layout.kind.cell_count()
        )));
    }
    let mut s = generate_with_sites(layout, &layout.sites(), users_per_cell, antennas, gamma, sigma2, seed)?;
    s.layout = Some(*layout);
    Ok(s)
}

/// Like [`generate_scenario`] but with arbitrary BS sites. Users are placed
/// uniformly on the annulus `GUARD_RADIUS <= r < inter_bs_distance / 2`
/// around their own BS.
pub fn generate_with_sites(
    params: &LayoutSpec,
    sites: &[Site],
    users_per_cell: usize,
    antennas: usize,
    gamma: f64,
    sigma2: f64,
    seed: u64,
) -> Result<Scenario> {
    params.validate()?;
    if users_per_cell == 0 || antennas < 2 || sites.is_empty() {
        return Err(Error::InvalidParameter("need M >= 1, K >= 1 and N >= 2".into()));
    }
    if !(gamma > 0.0) || !(sigma2 > 0.0) {
        return Err(Error::InvalidParameter("gamma and sigma2 must be positive".into()));
    }
    let cells = sites.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outer = params.inter_bs_distance / 2.0;
    let (g2, o2) = (GUARD_RADIUS * GUARD_RADIUS, outer * outer);
    let users: Vec<Vec<Point>> = sites
        .iter()
        .map(|site| {
            (0..users_per_cell)
                .map(|_| {
                    let phi = rng.random::<f64>() * 2.0 * PI;
                    let r = (g2 + rng.random::<f64>() * (o2 - g2)).sqrt();
                    Point::new(site.position.x + r * phi.cos(), site.position.y + r * phi.sin())
                })
                .collect()
        })
        .collect();
    let geometry = Geometry {
        sites: sites.to_vec(),
        users,
    };
    let mut failure = None;
    let mk = cells * users_per_cell;
    let mut s = Scenario::from_fn(
        cells,
        users_per_cell,
        antennas,
        |bs, u| {
            let rbar = build_correlation(geometry.angle(bs, u), params.angular_spread, antennas);
            match apply_pathloss(&rbar, geometry.distance(bs, u), params.pathloss_exponent) {
                Ok(r) => r,
                Err(e) => {
                    failure.get_or_insert(e);
                    rbar
                }
            }
        },
        vec![sigma2; mk],
        vec![gamma; mk],
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    s.geometry = Some(geometry);
    s.seed = seed;
    Ok(s)
}

/// Which BS pairs have their dual variables exchanged over the backhaul:
/// `linked(cell, bs)` holds when BS `bs` interferes some user of `cell`
/// strongly enough to be coordinated with.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Adjacency {
    cells: usize,
    links: Vec<bool>,
}

impl Adjacency {
    pub fn complete(cells: usize) -> Self {
        let mut links = vec![true; cells * cells];
        for c in 0..cells {
            links[c * cells + c] = false;
        }
        Self { cells, links }
    }

    pub fn empty(cells: usize) -> Self {
        Self {
            cells,
            links: vec![false; cells * cells],
        }
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn set(&mut self, cell: usize, bs: usize, linked: bool) {
        if cell != bs {
            self.links[cell * self.cells + bs] = linked;
        }
    }

    /// BS `bs` is a neighbor of BS `cell` (never true for `cell == bs`).
    pub fn linked(&self, cell: usize, bs: usize) -> bool {
        self.links[cell * self.cells + bs]
    }

    pub fn edge_count(&self) -> usize {
        self.links.iter().filter(|&&l| l).count()
    }

    /// BSs that receive the dual variables of `cell`.
    pub fn neighbors_of(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.cells).filter(move |&bs| self.linked(cell, bs))
    }
}

/// Which cross-cell terms `lambda_{n,j} R_{m,n,j}` enter the matrices BS `m`
/// builds.
#[derive(Clone, Debug, PartialEq)]
pub enum Coupling {
    /// Every term (coordinated multi-cell operation).
    Full,
    /// Only the BS's own cell (single-cell beamforming, inter-cell
    /// interference treated as noise).
    IntraCell,
    /// Own cell plus cells whose users the BS interferes per the adjacency.
    Neighbors(Adjacency),
}

/// A scenario together with the coupling structure the dual and
/// beamforming computations see. Power control always uses the full
/// scenario.
#[derive(Clone, Debug)]
pub struct ScenarioView<'a> {
    pub scenario: &'a Scenario,
    pub coupling: Coupling,
}

impl<'a> ScenarioView<'a> {
    pub fn new(scenario: &'a Scenario, coupling: Coupling) -> Self {
        Self { scenario, coupling }
    }

    /// Whether terms of users in `cell` enter the matrices built at `bs`.
    pub fn couples(&self, bs: usize, cell: usize) -> bool {
        if bs == cell {
            return true;
        }
        match &self.coupling {
            Coupling::Full => true,
            Coupling::IntraCell => false,
            Coupling::Neighbors(adj) => adj.linked(cell, bs),
        }
    }
}

impl<'a> From<&'a Scenario> for ScenarioView<'a> {
    fn from(s: &'a Scenario) -> Self {
        s.view()
    }
}
