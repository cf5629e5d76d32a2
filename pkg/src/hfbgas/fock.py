"""Exact matrix realisation of the doubled-Fock operator algebra.

Everything here lives on a truncated bosonic Fock space over 2m slots
(m "left" modes followed by m "right" modes) with total occupation at most
n_max.  Creation/annihilation matrices are exact on the retained basis; the
canonical commutation relations hold below the top occupation shell, and
every verification routine estimates its truncation error a priori before
asserting an identity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.linalg import expm
from scipy.stats import poisson

from .errors import TruncationBudgetError

MATRIX_BUDGET = 20000


# ---------------------------------------------------------------------------
# Truncated doubled Fock space
# ---------------------------------------------------------------------------

def _occupation_basis(slots: int, n_max: int):
    """All occupation tuples with total <= n_max, lexicographic order."""
    states = []

    def rec(prefix, remaining, budget):
        if remaining == 0:
            states.append(tuple(prefix))
            return
        for n in range(budget + 1):
            rec(prefix + [n], remaining - 1, budget - n)

    rec([], slots, n_max)
    states.sort()
    return states


@dataclass
class FockSpace:
    """Doubled bosonic Fock space over m modes per sector, occupation <= n_max."""

    m_modes: int
    n_max: int
    basis: list = field(init=False)
    index: dict = field(init=False)
    dim: int = field(init=False)

    def __post_init__(self):
        slots = 2 * self.m_modes
        self.basis = _occupation_basis(slots, self.n_max)
        self.index = {occ: i for i, occ in enumerate(self.basis)}
        self.dim = len(self.basis)

    @property
    def slots(self) -> int:
        return 2 * self.m_modes

    def total_occupation(self) -> np.ndarray:
        return np.array([sum(occ) for occ in self.basis], dtype=float)

    def sector_occupation(self, sector: str) -> np.ndarray:
        lo, hi = (0, self.m_modes) if sector == "l" else (self.m_modes, 2 * self.m_modes)
        return np.array([sum(occ[lo:hi]) for occ in self.basis], dtype=float)


@dataclass
class FockOperators:
    space: FockSpace
    a: list                 # annihilation per slot (sparse)
    adag: list
    n_ell: sparse.spmatrix
    n_r: sparse.spmatrix

    def smeared_a(self, f: np.ndarray) -> sparse.spmatrix:
        """a(f) = sum_y conj(f_y) a_y (antilinear in f)."""
        out = None
        for y, c in enumerate(np.conj(f)):
            if c == 0:
                continue
            out = c * self.a[y] if out is None else out + c * self.a[y]
        return out if out is not None else sparse.csr_matrix((self.space.dim,) * 2)

    def smeared_adag(self, f: np.ndarray) -> sparse.spmatrix:
        return self.smeared_a(f).conj().T.tocsr()


def build_operators(space: FockSpace) -> FockOperators:
    """Sparse a_i, a_i^*, and sector number operators on the truncated basis."""
    if space.dim > MATRIX_BUDGET:
        raise TruncationBudgetError(
            f"Fock dimension {space.dim} exceeds the matrix budget {MATRIX_BUDGET}"
        )
    dim = space.dim
    ann = []
    for slot in range(space.slots):
        rows, cols, vals = [], [], []
        for i, occ in enumerate(space.basis):
            n = occ[slot]
            if n == 0:
                continue
            lowered = list(occ)
            lowered[slot] = n - 1
            rows.append(space.index[tuple(lowered)])
            cols.append(i)
            vals.append(np.sqrt(n))
        ann.append(sparse.csr_matrix((vals, (rows, cols)), shape=(dim, dim)))
    adag = [op.conj().T.tocsr() for op in ann]
    n_ell = sparse.diags(space.sector_occupation("l")).tocsr()
    n_r = sparse.diags(space.sector_occupation("r")).tocsr()
    return FockOperators(space, ann, adag, n_ell, n_r)


def ccr_defect(ops: FockOperators) -> float:
    """Max deviation of [a_i, a_j^*] = delta_ij below the top occupation shell."""
    space = ops.space
    tot = space.total_occupation()
    keep = np.nonzero(tot <= space.n_max - 1)[0]
    eye = sparse.identity(space.dim, format="csr")
    worst = 0.0
    for i in range(space.slots):
        for j in range(space.slots):
            comm = ops.a[i] @ ops.adag[j] - ops.adag[j] @ ops.a[i]
            expect = eye if i == j else sparse.csr_matrix((space.dim,) * 2)
            dev = np.abs((comm - expect)[np.ix_(keep, keep)].toarray()).max() \
                if len(keep) else 0.0
            worst = max(worst, float(dev))
    return worst


def vacuum(space: FockSpace) -> np.ndarray:
    v = np.zeros(space.dim)
    v[space.index[(0,) * space.slots]] = 1.0
    return v


# ---------------------------------------------------------------------------
# Weyl and Bogoliubov unitaries
# ---------------------------------------------------------------------------

def weyl_operator(ops: FockOperators, phi: np.ndarray) -> np.ndarray:
    """exp(a_l^*(phi) + a_r^*(conj phi) - h.c.) as a dense matrix."""
    m = ops.space.m_modes
    gen = sparse.csr_matrix((ops.space.dim,) * 2, dtype=complex)
    for i in range(m):
        gen = gen + phi[i] * ops.adag[i] + np.conj(phi[i]) * ops.adag[m + i]
    gen = gen - gen.conj().T
    return expm(gen.toarray())


def squeeze_operator(ops: FockOperators, gamma: np.ndarray):
    """Bogoliubov unitary exp(sum k_ij a_{l,i}^* a_{r,j}^* - h.c.), k = arcsinh(sqrt gamma).

    Returns (T, k_matrix).  T is exact on the retained basis up to the
    occupation cutoff; its unitarity defect measures the truncation.
    """
    gamma = np.asarray(gamma, dtype=complex)
    evals, vecs = np.linalg.eigh((gamma + gamma.conj().T) / 2)
    if np.min(evals) < -1e-12:
        raise ValueError("gamma must be positive semidefinite")
    k = (vecs * np.arcsinh(np.sqrt(np.clip(evals, 0, None)))) @ vecs.conj().T
    m = ops.space.m_modes
    gen = sparse.csr_matrix((ops.space.dim,) * 2, dtype=complex)
    for i in range(m):
        for j in range(m):
            if k[i, j] == 0:
                continue
            gen = gen + k[i, j] * (ops.adag[i] @ ops.adag[m + j])
    gen = gen - gen.conj().T
    return expm(gen.toarray()), k


@dataclass
class ToyQuasiFree:
    """Quasi-free toy state data: squeeze kernel, Bogoliubov and Weyl unitaries."""

    gamma_matrix: np.ndarray
    k_matrix: np.ndarray
    bogoliubov_T: np.ndarray
    weyl_phi: np.ndarray
    weyl_W: np.ndarray
    unitarity_defect: float

    def state_vector(self, space: FockSpace) -> np.ndarray:
        return self.weyl_W @ (self.bogoliubov_T @ vacuum(space))


def build_quasifree(ops: FockOperators, gamma: np.ndarray,
                    phi: np.ndarray | None = None) -> ToyQuasiFree:
    m = ops.space.m_modes
    phi = np.zeros(m, dtype=complex) if phi is None else np.asarray(phi, dtype=complex)
    T, k = squeeze_operator(ops, gamma)
    W = weyl_operator(ops, phi)
    defect = max(
        float(np.abs(T @ T.conj().T - np.eye(ops.space.dim)).max()),
        float(np.abs(W @ W.conj().T - np.eye(ops.space.dim)).max()),
    )
    return ToyQuasiFree(np.asarray(gamma, dtype=complex), k, T, phi, W, defect)


# ---------------------------------------------------------------------------
# Verification reports
# ---------------------------------------------------------------------------

def _report(name, deviation, tol, **extra):
    rep = {"identity": name, "max_deviation": float(deviation),
           "tolerance": float(tol), "passed": bool(deviation <= tol)}
    rep.update(extra)
    return rep


def coherent_truncation_estimate(space: FockSpace, phi: np.ndarray,
                                 occ_window: int) -> float:
    """Poisson tail mass of the doubled coherent state beyond the cutoff."""
    nu = 2.0 * float(np.sum(np.abs(phi) ** 2)) + 1.0
    return float(poisson.sf(space.n_max - occ_window - 1, nu))


def verify_weyl_shift(ops: FockOperators, phi: np.ndarray, tol: float,
                      occ_window: int | None = None) -> dict:
    """Shift relation W(phi)^* a_{l,i} W(phi) = a_{l,i} + phi_i on low occupations."""
    space = ops.space
    occ_window = occ_window if occ_window is not None else space.n_max // 4
    est = coherent_truncation_estimate(space, phi, occ_window)
    if est > tol:
        raise TruncationBudgetError(
            f"coherent truncation estimate {est:.3e} exceeds tol {tol:.1e}; "
            "raise n_max or shrink ||phi||"
        )
    W = weyl_operator(ops, phi)
    tot = space.total_occupation()
    keep = np.nonzero(tot <= occ_window)[0]
    worst = 0.0
    eye = np.eye(space.dim)
    for i in range(space.m_modes):
        shifted = W.conj().T @ (ops.a[i].toarray() @ W)
        dev = shifted - ops.a[i].toarray() - phi[i] * eye
        worst = max(worst, float(np.abs(dev[np.ix_(keep, keep)]).max()))
    om = vacuum(space)
    cvec = W @ om
    occ0 = float(np.real(cvec.conj() @ (ops.adag[0] @ (ops.a[0] @ cvec))))
    return _report("weyl_shift", worst, tol, truncation_estimate=est,
                   vacuum_occupancy=occ0)


def squeezed_truncation_estimate(space: FockSpace, gamma: np.ndarray) -> float:
    """Squeeze-tail estimate sum_a r_a^{P+1} / (1 - r_a), r = g/(1+g).

    Each squeeze direction populates quanta in pairs, so a total-occupation
    cutoff n_max retains P = n_max // 2 pairs; the dropped probability mass
    bounds the observable truncation error and tracks the measured 1-pdm
    deviation closely.
    """
    evals = np.linalg.eigvalsh((gamma + np.conj(gamma).T) / 2)
    r = np.clip(evals, 0, None)
    r = r / (1.0 + r)
    pairs = space.n_max // 2
    return float(np.sum(r ** (pairs + 1) / np.maximum(1.0 - r, 1e-12)))


def verify_bogoliubov_pdm(ops: FockOperators, gamma: np.ndarray, tol: float,
                          phi: np.ndarray | None = None) -> dict:
    """1-pdm identity <a^*_{l,y} a_{l,x}> = phi phi^* + gamma on the toy state.

    Also checks the pairing two-point function <a_{l,i} a_{r,j}> against
    sqrt(1+gamma) conj(sqrt(gamma)) from the Bogoliubov action.
    """
    space = ops.space
    est = squeezed_truncation_estimate(space, gamma)
    if est > tol:
        raise TruncationBudgetError(
            f"squeezed-state truncation estimate {est:.3e} exceeds tol {tol:.1e}"
        )
    qf = build_quasifree(ops, gamma, phi)
    psi = qf.state_vector(space)
    m = space.m_modes
    phi_vec = qf.weyl_phi
    onepdm = np.empty((m, m), dtype=complex)
    pair = np.empty((m, m), dtype=complex)
    for i in range(m):
        for j in range(m):
            onepdm[i, j] = psi.conj() @ (ops.adag[j] @ (ops.a[i] @ psi))
            pair[i, j] = psi.conj() @ (ops.a[i] @ (ops.a[m + j] @ psi))
    expected = np.outer(phi_vec, phi_vec.conj()) + np.asarray(gamma, dtype=complex)
    dev1 = float(np.abs(onepdm - expected).max())
    gam = np.asarray(gamma, dtype=complex)
    evals, vecs = np.linalg.eigh((gam + gam.conj().T) / 2)
    u = (vecs * np.sqrt(1.0 + np.clip(evals, 0, None))) @ vecs.conj().T
    v = (vecs * np.sqrt(np.clip(evals, 0, None))) @ vecs.conj().T
    # cross-sector pairing of the purification: <a_l a_r> = u conj(v), plus
    # the Weyl shifts phi_i conj(phi_j) (the r-sector shifts by conj(phi))
    pair_expected = u @ v.conj() + np.outer(phi_vec, phi_vec.conj())
    dev2 = float(np.abs(pair - pair_expected).max())
    return _report("bogoliubov_1pdm", max(dev1, dev2), tol,
                   truncation_estimate=est, onepdm_deviation=dev1,
                   pairing_deviation=dev2)


def verify_wick(ops: FockOperators, psi: np.ndarray, tol: float,
                n_samples: int = 8, seed: int = 0) -> dict:
    """Four-point Wick factorisation on a (possibly displaced) quasi-free vector.

    Every creation/annihilation pattern is tested on randomly drawn slots:
    the ordered four-point function must equal the sum over pairings of
    centred two-point functions plus coherent shifts.
    """
    space = ops.space
    rng = np.random.default_rng(seed)
    worst = 0.0

    def op(slot, dag):
        return ops.adag[slot] if dag else ops.a[slot]

    def expect(mat_chain):
        vec = psi
        for M in reversed(mat_chain):
            vec = M @ vec
        return complex(psi.conj() @ vec)

    for _ in range(n_samples):
        slots = rng.integers(0, space.slots, size=4)
        for pattern in itertools.product((0, 1), repeat=4):
            Os = [op(s, d) for s, d in zip(slots, pattern)]
            m4 = expect(Os)
            s = [expect([O]) for O in Os]
            c = {}
            for i in range(4):
                for j in range(i + 1, 4):
                    c[(i, j)] = expect([Os[i], Os[j]]) - s[i] * s[j]
            wick = s[0] * s[1] * s[2] * s[3]
            pairs_one = [((0, 1), (2, 3)), ((0, 2), (1, 3)), ((0, 3), (1, 2))]
            for (i, j) in itertools.combinations(range(4), 2):
                k, l = [x for x in range(4) if x not in (i, j)]
                wick += c[(i, j)] * s[k] * s[l]
            for (p1, p2) in pairs_one:
                wick += c[p1] * c[p2]
            worst = max(worst, abs(m4 - wick))
    return _report("wick_4point", worst, tol, samples=n_samples)


# ---------------------------------------------------------------------------
# Fluctuation-generator assembly
# ---------------------------------------------------------------------------

# term registries: (coefficient, op pattern); symbols reference the smeared
# operator families built from the Bogoliubov blocks.
I1_TERMS = [
    (1.0, ("cU", "x"), ("cU", "y"), ("aU", "y"), ("aU", "x")),
    (1.0, ("cU", "x"), ("cV", "y"), ("aV", "y"), ("aU", "x")),
    (1.0, ("cU", "y"), ("cV", "x"), ("aV", "x"), ("aU", "y")),
    (1.0, ("cV", "x"), ("cV", "y"), ("aV", "y"), ("aV", "x")),
    (2.0, ("cU", "x"), ("cV", "y"), ("aV", "y"), ("aU", "x")),
]
I2_TERMS = [
    (1.0, ("cU", "x"), ("cU", "y"), ("cV", "y"), ("cV", "x")),
    (1.0, ("cU", "x"), ("cU", "y"), ("cV", "y"), ("aU", "x")),
    (1.0, ("cU", "x"), ("cV", "y"), ("cV", "x"), ("aV", "y")),
    (1.0, ("cU", "x"), ("cU", "y"), ("cV", "x"), ("aU", "y")),
    (1.0, ("cU", "y"), ("cV", "y"), ("cV", "x"), ("aV", "x")),
]
I3_TERMS = [
    (1.0, ("cU", "x"), ("cU", "y"), ("cV", "y")),
    (1.0, ("cU", "x"), ("cU", "y"), ("aU", "y")),
    (1.0, ("cU", "x"), ("cV", "y"), ("aV", "y")),
    (1.0, ("cU", "y"), ("cV", "y"), ("aV", "x")),
    (1.0, ("cV", "y"), ("aV", "x"), ("aV", "y")),
    (1.0, ("cU", "x"), ("aV", "y"), ("aU", "y")),
    (1.0, ("cU", "y"), ("aV", "x"), ("aU", "y")),
    (1.0, ("aV", "x"), ("aV", "y"), ("aU", "y")),
]
# number-commutator remainders: same patterns, different weights and sign rule
I2_TILDE_COEFF = [2.0, 1.0, 1.0, 1.0, 1.0]
I3_TILDE_COEFF = [3.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -3.0]


def generator_term_counts() -> dict:
    return {"I1": len(I1_TERMS), "I2": len(I2_TERMS), "I3": len(I3_TERMS)}


def doubled_phi(phi: np.ndarray) -> np.ndarray:
    """bold-phi on doubled indices: phi on the l sector, conj(phi) on r."""
    phi = np.asarray(phi, dtype=complex)
    return np.concatenate([phi, np.conj(phi)])


def doubled_v(v_matrix: np.ndarray) -> np.ndarray:
    """Interaction on doubled indices: +v on ll, -v on rr, zero across."""
    v = np.asarray(v_matrix, dtype=float)
    if not np.allclose(v, v.T):
        raise ValueError("v_matrix must be symmetric")
    m = v.shape[0]
    out = np.zeros((2 * m, 2 * m))
    out[:m, :m] = v
    out[m:, m:] = -v
    return out


def random_symplectic_blocks(m2: int, rng, scale: float = 0.3):
    """Random Bogoliubov blocks (U, V) with nu = [[U, conj V], [V, conj U]] symplectic."""
    A = rng.standard_normal((m2, m2)) + 1j * rng.standard_normal((m2, m2))
    A = (A + A.conj().T) / 2
    Bm = rng.standard_normal((m2, m2)) + 1j * rng.standard_normal((m2, m2))
    Bm = (Bm + Bm.T) / 2
    P = -1j * scale * A
    Q = -1j * scale * Bm
    Z = np.block([[P, Q], [np.conj(Q), np.conj(P)]])
    M = expm(Z)  # stays in the [[U, conj V], [V, conj U]] block form
    return M[:m2, :m2], M[m2:, :m2]


def symplectic_defect(U: np.ndarray, V: np.ndarray) -> float:
    """Deviation from nu^* S nu = S for nu = [[U, conj V], [V, conj U]]."""
    m2 = U.shape[0]
    nu = np.block([[U, np.conj(V)], [V, np.conj(U)]])
    S = np.block([[np.eye(m2), np.zeros((m2, m2))],
                  [np.zeros((m2, m2)), -np.eye(m2)]])
    return float(np.abs(nu.conj().T @ S @ nu - S).max())


class _SmearedFamilies:
    def __init__(self, ops: FockOperators, U: np.ndarray, V: np.ndarray):
        slots = ops.space.slots
        if U.shape != (slots, slots) or V.shape != (slots, slots):
            raise ValueError("U, V must be (2m x 2m) blocks on doubled indices")
        self.aU = [ops.smeared_a(U[:, x]).tocsr() for x in range(slots)]
        self.cU = [M.conj().T.tocsr() for M in self.aU]
        self.aV = [ops.smeared_a(np.conj(V)[:, x]).tocsr() for x in range(slots)]
        self.cV = [M.conj().T.tocsr() for M in self.aV]

    def get(self, fam, idx):
        return getattr(self, fam)[idx]


def _assemble_terms(fams, terms, vd, weights=None, phi_d=None, cutoff_proj=None,
                    dim=None, hc="plus"):
    """sum_{x,y} v(x,y) [phi(x)] sum_terms coeff * O1 O2 (O3 O4) P  (+/- h.c.)."""
    acc = sparse.csr_matrix((dim, dim), dtype=complex)
    slots = vd.shape[0]
    for x in range(slots):
        for y in range(slots):
            vxy = vd[x, y]
            if vxy == 0:
                continue
            w = vxy if phi_d is None else vxy * phi_d[x]
            if w == 0:
                continue
            local = sparse.csr_matrix((dim, dim), dtype=complex)
            for ti, (coeff, *pattern) in enumerate(terms):
                if weights is not None:
                    coeff = weights[ti]
                M = None
                for fam, pos in pattern:
                    idx = x if pos == "x" else y
                    op = fams.get(fam, idx)
                    M = op if M is None else M @ op
                local = local + coeff * M
            acc = acc + w * local
    if cutoff_proj is not None:
        acc = acc @ cutoff_proj
    if hc == "plus":
        return acc + acc.conj().T
    if hc == "minus":
        return acc - acc.conj().T
    return acc


def assemble_generator(ops: FockOperators, U: np.ndarray, V: np.ndarray,
                       phi: np.ndarray, v_matrix: np.ndarray, N_scale: float,
                       cutoff_level: int | None = None,
                       L_matrix: np.ndarray | None = None) -> dict:
    """Fluctuation-generator blocks I1..I4 and their sum G.

    ``U``, ``V`` are Bogoliubov blocks on the 2m doubled indices, ``phi`` an
    m-vector, ``v_matrix`` the symmetric mode-overlap interaction; the sign
    structure (+v on ll, -v on rr, 0 across) and the occupation cutoff
    projector 1(N <= cutoff_level) follow the doubled-space convention,
    where the number operator carries the constant +5.  I4 is the scalar
    trace term (zero unless ``L_matrix`` is supplied) plus the condensate
    quartic; it is returned as a float.
    """
    space = ops.space
    dim = space.dim
    vd = doubled_v(v_matrix)
    phi_d = doubled_phi(phi)
    fams = _SmearedFamilies(ops, np.asarray(U, complex), np.asarray(V, complex))
    proj = None
    if cutoff_level is not None:
        nd = space.total_occupation() + 5.0
        proj = sparse.diags((nd <= cutoff_level).astype(float)).tocsr()
    pref1 = 1.0 / (2.0 * N_scale)
    I1 = pref1 * _assemble_terms(fams, I1_TERMS, vd, cutoff_proj=proj, dim=dim, hc="none")
    I2 = pref1 * _assemble_terms(fams, I2_TERMS, vd, cutoff_proj=proj, dim=dim, hc="plus")
    I3 = (1.0 / N_scale) * _assemble_terms(fams, I3_TERMS, vd, phi_d=phi_d,
                                           cutoff_proj=proj, dim=dim, hc="plus")
    i4 = 0.0
    if L_matrix is not None:
        i4 += float(np.real(np.trace(V @ L_matrix @ V.conj().T)))
    i4 += float(np.real(np.sum(vd * np.outer(np.abs(phi_d) ** 2, np.abs(phi_d) ** 2)))
                / (2.0 * N_scale))
    G = (I1 + I2 + I3 + i4 * sparse.identity(dim, dtype=complex, format="csr")).tocsr()
    return {"I1": I1.tocsr(), "I2": I2.tocsr(), "I3": I3.tocsr(), "I4": i4, "G": G,
            "cutoff_level": cutoff_level, "projector": proj,
            "U": np.asarray(U, complex), "V": np.asarray(V, complex),
            "phi": np.asarray(phi, complex), "v_matrix": np.asarray(v_matrix),
            "N_scale": N_scale, "fams": fams, "vd": vd, "phi_d": phi_d}


def hermiticity_defect(M) -> float:
    d = M - M.conj().T
    return float(np.abs(d.toarray() if sparse.issparse(d) else d).max())


def number_commutator(space: FockSpace, G, constant: float = 5.0):
    """[G, N] with N = N_l + N_r + constant, computed entrywise.

    N is diagonal, so the commutator is G_ij (n_j - n_i) exactly; the
    additive constant cancels inside the integer difference, which makes
    the insensitivity assertion exact in floating point.
    """
    nd = space.total_occupation() + constant
    Gc = G.tocoo() if sparse.issparse(G) else sparse.coo_matrix(G)
    data = Gc.data * (nd[Gc.col] - nd[Gc.row])
    return sparse.csr_matrix((data, (Gc.row, Gc.col)), shape=Gc.shape)


def assemble_commutator_remainder(gen: dict) -> sparse.spmatrix:
    """The tilde blocks: -(1/N) sum v(x,y) {(2,1,1,1,1) I2-terms + phi (3,...,-3) I3-terms}."""
    dim = gen["G"].shape[0]
    fams, vd, phi_d = gen["fams"], gen["vd"], gen["phi_d"]
    proj = gen["projector"]
    t2 = _assemble_terms(fams, I2_TERMS, vd, weights=I2_TILDE_COEFF,
                         cutoff_proj=proj, dim=dim, hc="minus")
    t3 = _assemble_terms(fams, I3_TERMS, vd, weights=I3_TILDE_COEFF, phi_d=phi_d,
                         cutoff_proj=proj, dim=dim, hc="minus")
    return (-(1.0 / gen["N_scale"]) * (t2 + t3)).tocsr()


def verify_commutator_identity(space: FockSpace, gen: dict, tol: float = 1e-10) -> dict:
    """[G, N] against the directly assembled remainder blocks.

    Also asserts, exactly, that the +5 in the number operator never affects
    the commutator.
    """
    comm5 = number_commutator(space, gen["G"], constant=5.0)
    comm0 = number_commutator(space, gen["G"], constant=0.0)
    const_dev = float(np.abs((comm5 - comm0).toarray()).max()) if comm5.nnz + comm0.nnz \
        else 0.0
    rhs = assemble_commutator_remainder(gen)
    diff = (comm5 - rhs).toarray()
    dev = float(np.abs(diff).max())
    worst = np.unravel_index(np.argmax(np.abs(diff)), diff.shape)
    scale = max(1.0, float(np.abs(gen["G"].toarray()).max()))
    rep = _report("generator_number_commutator", dev / scale, tol,
                  worst_entry=[int(worst[0]), int(worst[1])],
                  constant_shift_deviation=const_dev,
                  absolute_deviation=dev)
    rep["constant_insensitive"] = const_dev == 0.0
    return rep
