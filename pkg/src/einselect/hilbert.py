"""
Finite-dimensional state algebra.

States live on labeled tensor-product spaces. Subsystems are indexed from 0,
leftmost factor first. Entropies are in bits.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import StateError, UndefinedConditionalError

NORM_TOL = 1e-12
HERM_TOL = 1e-12
PSD_TOL = 1e-10
EIG_CLAMP = 1e-12
MAX_DIM = 2 ** 14
MAX_VECTOR_DIM = 2 ** 21


def _as_dims(dims) -> tuple[int, ...]:
    dims = tuple(int(d) for d in dims)
    if not dims or any(d < 1 for d in dims):
        raise StateError(f"invalid subsystem dimensions {dims}")
    return dims


@dataclass(frozen=True)
class PureState:
    """
    Normalized state vector on a tensor-product space.

    Parameters
    ----------
    amplitudes : array_like
        Complex amplitudes in row-major (leftmost-slowest) order.
    dims : sequence of int
        Subsystem dimensions.
    labels : sequence of str, optional
        Subsystem names.
    """

    amplitudes: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).ravel()
        dims = _as_dims(self.dims)
        if int(np.prod(dims)) != amps.size:
            raise StateError(f"dims {dims} do not match {amps.size} amplitudes")
        if int(np.prod(dims)) > MAX_VECTOR_DIM:
            raise StateError("total dimension exceeds 2**21")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > NORM_TOL:
            raise StateError(f"state not normalized (norm^2 = {norm!r})")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "dims", dims)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(dims):
                raise StateError("one label per subsystem required")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def from_amplitudes(cls, amplitudes, dims, labels=None, normalize=True) -> "PureState":
        """Build a state, renormalizing the amplitudes if requested."""
        amps = np.asarray(amplitudes, dtype=complex).ravel()
        if normalize:
            n = np.linalg.norm(amps)
            if n == 0:
                raise StateError("zero vector cannot be normalized")
            amps = amps / n
        return cls(amps, tuple(dims), labels)

    @classmethod
    def basis(cls, index: Sequence[int] | int, dims) -> "PureState":
        """Computational basis product state."""
        dims = _as_dims(dims)
        if isinstance(index, (int, np.integer)):
            flat = int(index)
        else:
            flat = int(np.ravel_multi_index(tuple(index), dims))
        amps = np.zeros(int(np.prod(dims)), dtype=complex)
        amps[flat] = 1.0
        return cls(amps, dims)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def density(self) -> "DensityMatrix":
        """Projector onto this state."""
        a = self.amplitudes
        return DensityMatrix(np.outer(a, a.conj()), self.dims, self.labels, check=False)

    def to_json(self) -> dict:
        return {
            "kind": "pure",
            "dims": list(self.dims),
            "labels": list(self.labels) if self.labels else None,
            "amplitudes": _complex_to_pairs(self.amplitudes),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PureState":
        if obj.get("kind") != "pure":
            raise StateError("not a serialized pure state")
        amps = _pairs_to_complex(obj["amplitudes"])
        return cls(amps, tuple(obj["dims"]), obj.get("labels"))


@dataclass(frozen=True)
class DensityMatrix:
    """
    Density operator on a tensor-product space.

    Parameters
    ----------
    matrix : array_like
        Square complex matrix.
    dims : sequence of int
        Subsystem dimensions.
    labels : sequence of str, optional
        Subsystem names.
    check : bool
        Validate Hermiticity, trace and positivity.
    """

    matrix: np.ndarray
    dims: tuple[int, ...]
    labels: tuple[str, ...] | None = None
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        dims = _as_dims(self.dims)
        d = int(np.prod(dims))
        if m.shape != (d, d):
            raise StateError(f"matrix shape {m.shape} does not match dims {dims}")
        if d > MAX_DIM:
            raise StateError("total dimension exceeds 2**14")
        if self.check:
            if np.max(np.abs(m - m.conj().T), initial=0.0) > HERM_TOL:
                raise StateError("density matrix is not Hermitian")
            tr = np.trace(m).real
            if abs(tr - 1.0) > NORM_TOL:
                raise StateError(f"trace {tr!r} differs from 1")
            if np.linalg.eigvalsh(0.5 * (m + m.conj().T))[0] < -PSD_TOL:
                raise StateError("density matrix has negative eigenvalues")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "dims", dims)
        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(dims):
                raise StateError("one label per subsystem required")
            object.__setattr__(self, "labels", labels)

    @classmethod
    def diag(cls, probs, dims=None) -> "DensityMatrix":
        p = np.asarray(probs, dtype=float)
        return cls(np.diag(p).astype(complex), dims or (p.size,))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def eigenvalues(self) -> np.ndarray:
        """Ascending eigenvalues of the Hermitian part."""
        m = self.matrix
        return np.linalg.eigvalsh(0.5 * (m + m.conj().T))

    def to_json(self) -> dict:
        return {
            "kind": "density",
            "dims": list(self.dims),
            "labels": list(self.labels) if self.labels else None,
            "matrix": [_complex_to_pairs(row) for row in self.matrix],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DensityMatrix":
        if obj.get("kind") != "density":
            raise StateError("not a serialized density matrix")
        m = np.array([_pairs_to_complex(row) for row in obj["matrix"]])
        return cls(m, tuple(obj["dims"]), obj.get("labels"))


@dataclass(frozen=True)
class SchmidtForm:
    """
    Schmidt decomposition of a bipartite pure state.

    Attributes
    ----------
    coefficients : ndarray
        Non-zero Schmidt coefficients, descending.
    left_basis, right_basis : ndarray
        Columns are the paired Schmidt vectors.
    degenerate : bool
        True when two coefficients coincide, so the basis is not unique.
    """

    coefficients: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray
    degenerate: bool

    def reconstruct(self) -> np.ndarray:
        """Amplitudes of sum_i c_i |l_i>|r_i> in left-then-right order."""
        c, L, R = self.coefficients, self.left_basis, self.right_basis
        return np.einsum("i,ai,bi->ab", c, L, R).ravel()


def _complex_to_pairs(v) -> list:
    v = np.asarray(v, dtype=complex).ravel()
    return [[float(z.real), float(z.imag)] for z in v]


def _pairs_to_complex(pairs) -> np.ndarray:
    a = np.asarray(pairs, dtype=float).reshape(-1, 2)
    return a[:, 0] + 1j * a[:, 1]


def tensor_product(a, b):
    """
    Kronecker product of two states of the same kind.

    Parameters
    ----------
    a, b : PureState or DensityMatrix

    Returns
    -------
    PureState or DensityMatrix
        State on the concatenated space.
    """
    labels = None
    if a.labels is not None and b.labels is not None:
        labels = a.labels + b.labels
    if isinstance(a, PureState) and isinstance(b, PureState):
        amps = np.kron(a.amplitudes, b.amplitudes)
        return PureState.from_amplitudes(amps, a.dims + b.dims, labels)
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.matrix, b.matrix), a.dims + b.dims, labels, check=False)
    raise TypeError("tensor_product needs two pure states or two density matrices")


def _as_density(state) -> DensityMatrix:
    if isinstance(state, PureState):
        return state.density()
    if isinstance(state, DensityMatrix):
        return state
    raise TypeError(f"expected a state, got {type(state).__name__}")


def _reduce(matrix: np.ndarray, dims: tuple[int, ...], keep: list[int]) -> np.ndarray:
    n = len(dims)
    traced = [i for i in range(n) if i not in keep]
    t = matrix.reshape(dims + dims)
    perm = keep + traced + [k + n for k in keep] + [k + n for k in traced]
    dk = int(np.prod([dims[i] for i in keep]))
    dt = int(np.prod([dims[i] for i in traced])) if traced else 1
    t = t.transpose(perm).reshape(dk, dt, dk, dt)
    return np.einsum("ajbj->ab", t)


def _reduce_vector(amps: np.ndarray, dims: tuple[int, ...], keep: list[int]) -> np.ndarray:
    traced = [i for i in range(len(dims)) if i not in keep]
    dk = int(np.prod([dims[i] for i in keep]))
    v = amps.reshape(dims).transpose(keep + traced).reshape(dk, -1)
    return v @ v.conj().T


def partial_trace(rho, keep: Iterable[int]) -> DensityMatrix:
    """
    Reduced density matrix on the kept subsystems.

    Parameters
    ----------
    rho : DensityMatrix or PureState
    keep : iterable of int
        Subsystem indices to keep; output keeps them in ascending order.

    Returns
    -------
    DensityMatrix
    """
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise StateError("keep set must be non-empty")
    if keep[0] < 0 or keep[-1] >= len(rho.dims):
        raise StateError(f"subsystem index out of range for dims {rho.dims}")
    if isinstance(rho, PureState):
        # work on the vector so large registers never form a full projector
        m = _reduce_vector(rho.amplitudes, rho.dims, keep)
    else:
        rho = _as_density(rho)
        m = _reduce(rho.matrix, rho.dims, keep)
    dims = tuple(rho.dims[i] for i in keep)
    labels = tuple(rho.labels[i] for i in keep) if rho.labels else None
    return DensityMatrix(m, dims, labels, check=False)


def _entropy_from_eigs(lam: np.ndarray) -> float:
    lam = np.where(lam < EIG_CLAMP, 0.0, lam)
    nz = lam[lam > 0]
    return float(-np.sum(nz * np.log2(nz)))


def von_neumann_entropy(rho) -> float:
    """
    Entropy -Tr rho lg rho in bits.

    Eigenvalues below 1e-12 are treated as exact zeros.
    """
    return _entropy_from_eigs(_as_density(rho).eigenvalues())


def purity(rho) -> float:
    """Tr rho^2."""
    m = _as_density(rho).matrix
    return float(np.real(np.vdot(m.conj().T, m)))


def _bipartition(dims, cut) -> tuple[list[int], list[int]]:
    left = sorted(set(int(c) for c in cut))
    right = [i for i in range(len(dims)) if i not in left]
    if not left or not right:
        raise StateError("bipartition needs two non-empty parts")
    if left[0] < 0 or left[-1] >= len(dims):
        raise StateError("cut index out of range")
    return left, right


def schmidt_decompose(psi: PureState, cut: Iterable[int] = (0,)) -> SchmidtForm:
    """
    Schmidt decomposition across a bipartition.

    Parameters
    ----------
    psi : PureState
    cut : iterable of int
        Subsystems forming the left part; the rest form the right part.

    Returns
    -------
    SchmidtForm
        Coefficients below 1e-12 are dropped.
    """
    left, right = _bipartition(psi.dims, cut)
    t = psi.amplitudes.reshape(psi.dims).transpose(left + right)
    dl = int(np.prod([psi.dims[i] for i in left]))
    M = t.reshape(dl, -1)
    U, s, Vh = np.linalg.svd(M, full_matrices=False)
    k = s > EIG_CLAMP
    c = s[k]
    degenerate = bool(np.any(np.abs(np.diff(c)) < 1e-10))
    return SchmidtForm(c, U[:, k], Vh[k].T, degenerate)


def conditional_state(rho, projector, measured: int = 1) -> tuple[DensityMatrix, float]:
    """
    State of the remaining subsystems given a projective outcome.

    Parameters
    ----------
    rho : DensityMatrix or PureState
    projector : array_like
        Projector on the measured subsystem.
    measured : int
        Index of the measured subsystem.

    Returns
    -------
    (DensityMatrix, float)
        Conditional state Tr_A(P rho P)/p and the probability p.
    """
    rho = _as_density(rho)
    P = np.asarray(projector, dtype=complex)
    d = rho.dims[measured]
    if P.shape != (d, d):
        raise StateError("projector dimension does not match the measured subsystem")
    if np.max(np.abs(P @ P - P)) > 1e-10 or np.max(np.abs(P - P.conj().T)) > 1e-10:
        raise StateError("operator is not a Hermitian projector")
    ops = [np.eye(k) for k in rho.dims]
    ops[measured] = P
    full = ops[0]
    for o in ops[1:]:
        full = np.kron(full, o)
    m = full @ rho.matrix @ full
    p = float(np.trace(m).real)
    if p < 1e-14:
        raise UndefinedConditionalError(f"outcome probability {p:.3e} is below 1e-14")
    rest = [i for i in range(len(rho.dims)) if i != measured]
    red = _reduce(m, rho.dims, rest) / p
    labels = tuple(rho.labels[i] for i in rest) if rho.labels else None
    return DensityMatrix(red, tuple(rho.dims[i] for i in rest), labels, check=False), p


def mutual_information(rho, cut: Iterable[int] = (0,)) -> float:
    """
    I(A:B) = H(A) + H(B) - H(AB) in bits.

    Parameters
    ----------
    rho : DensityMatrix or PureState
    cut : iterable of int
        Subsystems forming part A.
    """
    if isinstance(rho, PureState):
        left, right = _bipartition(rho.dims, cut)
        dl = np.prod([rho.dims[i] for i in left])
        dr = np.prod([rho.dims[i] for i in right])
        return 2.0 * von_neumann_entropy(partial_trace(rho, left if dl <= dr else right))
    rho = _as_density(rho)
    left, right = _bipartition(rho.dims, cut)
    hA = von_neumann_entropy(partial_trace(rho, left))
    hB = von_neumann_entropy(partial_trace(rho, right))
    return hA + hB - von_neumann_entropy(rho)


def _blocks(rho: DensityMatrix, measured: int) -> np.ndarray:
    """Tensor R[a, s, a', s'] with the measured factor first."""
    n = len(rho.dims)
    rest = [i for i in range(n) if i != measured]
    perm = [measured] + rest
    t = rho.matrix.reshape(rho.dims + rho.dims)
    t = t.transpose(perm + [p + n for p in perm])
    da = rho.dims[measured]
    ds = rho.dim // da
    return t.reshape(da, ds, da, ds)


def _cond_entropy(R: np.ndarray, V: np.ndarray) -> np.ndarray:
    """
    Measured conditional entropy sum_k p_k H(rho_{S|k}).

    ``V`` has shape (..., da, K) with basis vectors in the last axis.
    """
    sig = np.einsum("...ak,asbt,...bk->...kst", V.conj(), R, V)
    p = np.einsum("...kss->...k", sig).real
    lam = np.linalg.eigvalsh(sig)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = lam / p[..., None]
    q = np.where((p[..., None] > 1e-14) & (q > EIG_CLAMP), q, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.sum(np.where(q > 0, q * np.log2(q), 0.0), axis=-1)
    return np.sum(p * h, axis=-1)


def _qubit_basis(theta, phi) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    c, s, e = np.cos(theta / 2), np.sin(theta / 2), np.exp(1j * phi)
    v0 = np.stack([c + 0j, e * s], axis=-1)
    v1 = np.stack([-e.conj() * s, c + 0j], axis=-1)
    return np.stack([v0, v1], axis=-1)


def _unitary_from_params(x: np.ndarray, d: int) -> np.ndarray:
    from scipy.linalg import expm

    H = np.zeros((d, d), dtype=complex)
    iu = np.triu_indices(d, 1)
    m = len(iu[0])
    H[iu] = x[:m] + 1j * x[m:2 * m]
    H = H + H.conj().T
    H[np.diag_indices(d)] = x[2 * m:2 * m + d]
    return expm(1j * H)


def optimize_conditional_entropy(R: np.ndarray) -> tuple[float, np.ndarray]:
    """
    Minimize the measured conditional entropy over projective bases.

    Qubits use a 2 degree polar/azimuthal grid followed by Nelder-Mead.
    Larger measured factors (up to 4) use Nelder-Mead from several starts.

    Returns
    -------
    (float, ndarray)
        Minimum and the optimal basis (columns).
    """
    da = R.shape[0]
    if da == 1:
        return float(_cond_entropy(R, np.eye(1, dtype=complex))), np.eye(1, dtype=complex)
    if da == 2:
        th = np.deg2rad(np.arange(0.0, 180.0 + 1e-9, 2.0))
        ph = np.deg2rad(np.arange(0.0, 360.0, 2.0))
        TH, PH = np.meshgrid(th, ph, indexing="ij")
        vals = _cond_entropy(R, _qubit_basis(TH, PH))
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        f = lambda x: float(_cond_entropy(R, _qubit_basis(x[0], x[1])))
        res = minimize(f, [TH[i, j], PH[i, j]], method="Nelder-Mead",
                       options={"xatol": 1e-9, "fatol": 1e-12, "maxiter": 2000})
        best = min(res.fun, vals[i, j])
        x = res.x if res.fun <= vals[i, j] else [TH[i, j], PH[i, j]]
        return float(best), _qubit_basis(x[0], x[1])
    if da > 4:
        raise StateError("basis optimization supports measured dimension at most 4")
    npar = da * da
    f = lambda x: float(_cond_entropy(R, _unitary_from_params(x, da)))
    rng = np.random.default_rng(12345)
    starts = [np.zeros(npar)] + [rng.normal(scale=1.0, size=npar) for _ in range(12)]
    best, bx = np.inf, None
    for x0 in starts:
        res = minimize(f, x0, method="Nelder-Mead",
                       options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 20000})
        if res.fun < best:
            best, bx = res.fun, res.x
    return float(best), _unitary_from_params(bx, da)


def classical_correlation(rho, measured: int = 1, basis="optimize") -> float:
    """
    J(S:A) = H(S) - sum_k p_k H(rho_{S|k}) for projective measurement of A.

    Parameters
    ----------
    rho : DensityMatrix or PureState
    measured : int
        Index of the measured subsystem A; S is everything else.
    basis : array_like or "optimize"
        Unitary whose columns are the measurement basis.
    """
    rho = _as_density(rho)
    R = _blocks(rho, measured)
    rest = [i for i in range(len(rho.dims)) if i != measured]
    hS = von_neumann_entropy(partial_trace(rho, rest))
    if isinstance(basis, str):
        if basis != "optimize":
            raise ValueError("basis must be a matrix or 'optimize'")
        hc, _ = optimize_conditional_entropy(R)
    else:
        V = np.asarray(basis, dtype=complex)
        if np.max(np.abs(V.conj().T @ V - np.eye(V.shape[1]))) > 1e-10:
            raise StateError("measurement basis is not orthonormal")
        hc = float(_cond_entropy(R, V))
    return hS - hc


def discord(rho, measured: int = 1, basis="optimize") -> float:
    """
    Quantum discord I(S:A) - J_A(S:A) in bits.

    Parameters
    ----------
    rho : DensityMatrix or PureState
        Bipartite (or multipartite, S being all but ``measured``) state.
    measured : int
        Subsystem measured to extract classical information.
    basis : array_like or "optimize"
        Measurement basis as columns of a unitary, or optimize over bases.

    Returns
    -------
    float
    """
    rho = _as_density(rho)
    I = mutual_information(rho, [measured])
    return I - classical_correlation(rho, measured, basis)
