"""Dense complex linear algebra and entropic primitives on labeled registers.

A multipartite register is described by a *layout*: an ordered tuple of
``(label, dim)`` pairs.  The global indexing convention is fixed once and
for all: the first party is the most significant digit, i.e. basis index

    i = sum_k i_k * prod_{l > k} d_l,

which coincides with a C-order ``reshape`` of the amplitude vector into one
axis per party.  All entropies are in bits (log base 2), so one EPR pair
carries exactly 1 unit.

Everything here is pure and deterministic; the dataclasses are frozen and
their arrays are marked read-only, so values can be shared freely between
threads.  Storage is dense throughout; the intended scale is registers of
at most a few thousand dimensions per cut side.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PureState",
    "DensityOperator",
    "ResourceCapError",
    "memory_cap_bytes",
    "ensure_budget",
    "tensor",
    "relabel",
    "permute_parties",
    "partial_trace",
    "pure_marginal",
    "eig_hermitian",
    "von_neumann_entropy",
    "shannon_entropy",
    "binary_entropy",
    "schmidt",
    "entanglement_entropy",
    "trace_distance",
    "fidelity",
]

NORM_ATOL = 1e-12
HERMITIAN_ATOL = 1e-12
TRACE_ATOL = 1e-12
# Negative eigenvalues above this floor are treated as numerical noise and
# clipped before taking logarithms.  Entropy is stable under such clipping
# (Fannes: |S(rho) - S(sigma)| <= eta(eps) + K*eps*log d for a universal
# constant K, with eta(x) = -x log x), which is why a fixed 1e-10 floor is
# safe at these dimensions.
EIG_FLOOR = -1e-10

_DEFAULT_MEM_CAP_MB = 2048
_PSD_CHECK_MAX_DIM = 256


class ResourceCapError(RuntimeError):
    """Raised when a requested operation would exceed the memory budget."""


def memory_cap_bytes() -> int:
    """Current memory budget for a single dense object, in bytes.

    Defaults to 2 GiB; override with the ``EOALAB_MEM_CAP_MB`` environment
    variable.
    """
    raw = os.environ.get("EOALAB_MEM_CAP_MB")
    if raw is None:
        return _DEFAULT_MEM_CAP_MB * 1024 * 1024
    try:
        cap = int(raw)
    except ValueError as exc:
        raise ValueError(f"EOALAB_MEM_CAP_MB must be an integer, got {raw!r}") from exc
    if cap <= 0:
        raise ValueError("EOALAB_MEM_CAP_MB must be positive")
    return cap * 1024 * 1024


def ensure_budget(n_entries: int, what: str = "operator") -> None:
    """Refuse to build a complex array of ``n_entries`` beyond the cap."""
    needed = 16 * int(n_entries)
    cap = memory_cap_bytes()
    if needed > cap:
        raise ResourceCapError(
            f"{what} needs {needed} bytes of complex storage, "
            f"exceeding the cap of {cap} bytes (EOALAB_MEM_CAP_MB overrides)"
        )


def _normalize_layout(layout) -> tuple[tuple[str, int], ...]:
    out = []
    for entry in layout:
        label, dim = entry
        label = str(label)
        dim = int(dim)
        if dim < 1:
            raise ValueError(f"party {label!r} has invalid dimension {dim}")
        out.append((label, dim))
    if not out:
        raise ValueError("layout must contain at least one party")
    return tuple(out)


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=np.complex128, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class PureState:
    """Unit-norm complex amplitude vector over a labeled register.

    ``amplitudes[i]`` is the coefficient of the computational basis ket whose
    party digits are the mixed-radix expansion of ``i`` (first party most
    significant).
    """

    amplitudes: np.ndarray
    layout: tuple[tuple[str, int], ...]

    def __post_init__(self):
        layout = _normalize_layout(self.layout)
        amps = _readonly(np.asarray(self.amplitudes).ravel())
        dim = math.prod(d for _, d in layout)
        if amps.size != dim:
            raise ValueError(
                f"amplitude vector has length {amps.size}, layout implies {dim}"
            )
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(f"state is not normalized: |psi|^2 = {norm}")
        if abs(norm - 1.0) > NORM_ATOL:
            amps = _readonly(amps / math.sqrt(norm))
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "layout", layout)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.layout)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.layout)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def tensor_view(self) -> np.ndarray:
        """Amplitudes reshaped to one axis per party (read-only view)."""
        return self.amplitudes.reshape(self.dims)

    def density(self) -> DensityOperator:
        mat = np.outer(self.amplitudes, self.amplitudes.conj())
        return DensityOperator(mat, self.layout, validate=False)


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace operator with a layout.

    Validation checks hermiticity and trace always; the eigenvalue floor is
    only checked up to dimension 256 (an O(d^3) eigendecomposition at
    construction time would dominate everything else at larger sizes).
    Callers building large operators from already-valid pieces may pass
    ``validate=False``.
    """

    matrix: np.ndarray
    layout: tuple[tuple[str, int], ...]
    validate: bool = True

    def __post_init__(self):
        layout = _normalize_layout(self.layout)
        mat = _readonly(np.asarray(self.matrix))
        dim = math.prod(d for _, d in layout)
        if mat.shape != (dim, dim):
            raise ValueError(f"matrix shape {mat.shape} does not match layout dim {dim}")
        if self.validate:
            herm = np.max(np.abs(mat - mat.conj().T)) if dim > 1 else abs(mat[0, 0].imag)
            if herm > 1e-9:
                raise ValueError(f"matrix is not Hermitian: max |M - M^dag| = {herm}")
            tr = complex(np.trace(mat))
            if abs(tr - 1.0) > 1e-9:
                raise ValueError(f"matrix does not have unit trace: tr = {tr}")
            if dim <= _PSD_CHECK_MAX_DIM:
                lo = float(np.linalg.eigvalsh(mat)[0])
                if lo < EIG_FLOOR:
                    raise ValueError(f"matrix has negative eigenvalue {lo}")
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "validate", bool(self.validate))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.layout)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.layout)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _axes_for(layout, labels) -> list[int]:
    """Resolve a label or iterable of labels to axis positions.

    Duplicate labels in ``layout`` are tolerated as long as none of the
    *requested* labels is ambiguous.
    """
    if isinstance(labels, str):
        labels = (labels,)
    wanted = list(labels)
    if not wanted:
        raise ValueError("at least one party label is required")
    all_labels = [label for label, _ in layout]
    axes = []
    for lab in wanted:
        hits = [k for k, cand in enumerate(all_labels) if cand == lab]
        if not hits:
            raise ValueError(f"unknown party label {lab!r}; layout has {all_labels}")
        if len(hits) > 1:
            raise ValueError(f"party label {lab!r} is ambiguous in layout {all_labels}")
        axes.append(hits[0])
    if len(set(axes)) != len(axes):
        raise ValueError(f"duplicate labels in request: {wanted}")
    return axes


def tensor(a, b):
    """Kronecker product of two states of the same kind.

    The layout of the result is the concatenation of the input layouts, in
    keeping with the global indexing convention.  Duplicate labels are
    allowed at this point; relabel before using label-keyed operations.
    """
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes), a.layout + b.layout)
    if isinstance(a, DensityOperator) and isinstance(b, DensityOperator):
        return DensityOperator(
            np.kron(a.matrix, b.matrix), a.layout + b.layout, validate=False
        )
    raise TypeError("tensor requires two PureState or two DensityOperator inputs")


def relabel(state, mapping: dict):
    """Return a copy with party labels renamed via ``mapping``."""
    new_layout = tuple((mapping.get(label, label), d) for label, d in state.layout)
    if isinstance(state, PureState):
        return PureState(state.amplitudes, new_layout)
    return DensityOperator(state.matrix, new_layout, validate=False)


def permute_parties(psi: PureState, order) -> PureState:
    """Reorder the parties of a pure state to the given label sequence."""
    axes = _axes_for(psi.layout, order)
    if len(axes) != len(psi.layout):
        raise ValueError("order must list every party exactly once")
    amps = np.transpose(psi.tensor_view(), axes).ravel()
    layout = tuple(psi.layout[k] for k in axes)
    return PureState(amps, layout)


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    """Trace out every party not in ``keep``.

    The kept parties appear in the result in their original layout order,
    regardless of the order given in ``keep``; tracing in stages agrees with
    tracing directly.
    """
    keep_axes = sorted(_axes_for(rho.layout, keep))
    m = len(rho.layout)
    dims = rho.dims
    if len(keep_axes) == m:
        return rho
    t = rho.matrix.reshape(dims + dims)
    letters = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
    if 2 * m > len(letters):
        raise ValueError("too many parties for partial trace")
    row = list(letters[:m])
    col = []
    next_free = m
    for k in range(m):
        if k in keep_axes:
            col.append(letters[next_free])
            next_free += 1
        else:
            col.append(row[k])
    out = "".join(row[k] for k in keep_axes) + "".join(
        col[k] for k in keep_axes
    )
    sub = "".join(row) + "".join(col) + "->" + out
    reduced = np.einsum(sub, t)
    d_keep = math.prod(dims[k] for k in keep_axes)
    layout = tuple(rho.layout[k] for k in keep_axes)
    return DensityOperator(reduced.reshape(d_keep, d_keep), layout, validate=False)


def pure_marginal(psi: PureState, keep) -> DensityOperator:
    """Reduced state of a pure state on ``keep``, without forming the full
    density matrix first."""
    keep_axes = sorted(_axes_for(psi.layout, keep))
    m = len(psi.layout)
    rest = [k for k in range(m) if k not in keep_axes]
    arr = np.transpose(psi.tensor_view(), keep_axes + rest)
    d_keep = math.prod(psi.dims[k] for k in keep_axes)
    mat = arr.reshape(d_keep, -1)
    layout = tuple(psi.layout[k] for k in keep_axes)
    return DensityOperator(mat @ mat.conj().T, layout, validate=False)


def eig_hermitian(h: np.ndarray, atol: float = 1e-9):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns ``(values, vectors)`` with ``vectors[:, k]`` the eigenvector of
    ``values[k]``; reconstruction ``V diag(w) V^dag`` matches the input to
    machine precision.
    """
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {h.shape}")
    scale = max(1.0, float(np.max(np.abs(h)))) if h.size else 1.0
    if float(np.max(np.abs(h - h.conj().T))) > atol * scale:
        raise ValueError("matrix is not Hermitian within tolerance")
    w, v = np.linalg.eigh(h)
    return w[::-1].copy(), v[:, ::-1].copy()


def _entropy_of_probs(p: np.ndarray) -> float:
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    nz = p[p > 0.0]
    if nz.size == 0:
        return 0.0
    return float(-np.sum(nz * np.log2(nz)))


def shannon_entropy(p) -> float:
    """Entropy in bits of a probability vector (0 log 0 = 0)."""
    return _entropy_of_probs(np.asarray(p, dtype=float))


def von_neumann_entropy(rho) -> float:
    """Von Neumann entropy in bits.

    Eigenvalues are clipped to [0, 1] before the logarithm to absorb
    numerical negatives of order ``EIG_FLOOR``.
    """
    mat = rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho)
    return _entropy_of_probs(np.linalg.eigvalsh(mat))


def binary_entropy(p: float) -> float:
    """H2(p) in bits; symmetric about 1/2; errors outside [0, 1]."""
    p = float(p)
    if p < -1e-12 or p > 1 + 1e-12:
        raise ValueError(f"binary_entropy requires p in [0, 1], got {p}")
    p = min(max(p, 0.0), 1.0)
    return _entropy_of_probs(np.array([p, 1.0 - p]))


def _split_matrix(psi: PureState, cut) -> np.ndarray:
    """Amplitudes as a (left, right) matrix for a bipartition."""
    left_axes = _axes_for(psi.layout, cut)
    m = len(psi.layout)
    if len(left_axes) == m:
        raise ValueError("cut must be a proper subset of the parties")
    right_axes = [k for k in range(m) if k not in left_axes]
    arr = np.transpose(psi.tensor_view(), left_axes + right_axes)
    d_left = math.prod(psi.dims[k] for k in left_axes)
    return arr.reshape(d_left, -1)


def schmidt(psi: PureState, cut) -> np.ndarray:
    """Squared Schmidt coefficients across ``cut``, descending.

    ``cut`` lists the labels on one side of the bipartition; the other side
    is the complement.  The result has length min(dim_left, dim_right),
    sums to 1, and equals the eigenvalue spectrum of either reduced state.
    """
    mat = _split_matrix(psi, cut)
    if mat.shape[0] <= mat.shape[1]:
        gram = mat @ mat.conj().T
    else:
        gram = mat.conj().T @ mat
    vals = np.linalg.eigvalsh(gram)[::-1]
    return np.clip(vals, 0.0, 1.0)


def entanglement_entropy(psi: PureState, cut) -> float:
    """Entropy of entanglement in bits across ``cut`` (symmetric in sides)."""
    return _entropy_of_probs(schmidt(psi, cut))


def _as_matrix(op) -> np.ndarray:
    if isinstance(op, DensityOperator):
        return op.matrix
    if isinstance(op, PureState):
        return np.outer(op.amplitudes, op.amplitudes.conj())
    return np.asarray(op, dtype=np.complex128)


def trace_distance(rho, sigma) -> float:
    """Trace norm ||rho - sigma||_1 (sum of absolute eigenvalues).

    Note this is the unnormalized 1-norm: orthogonal pure states are at
    distance 2.
    """
    a = _as_matrix(rho)
    b = _as_matrix(sigma)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.sum(np.abs(np.linalg.eigvalsh(a - b))))


def fidelity(psi: PureState, rho) -> float:
    """Overlap <psi|rho|psi> of a pure state with a density operator."""
    mat = _as_matrix(rho)
    v = psi.amplitudes
    if mat.shape[0] != v.size:
        raise ValueError(f"dimension mismatch: state {v.size}, operator {mat.shape}")
    val = float(np.real(np.vdot(v, mat @ v)))
    return min(max(val, 0.0), 1.0)
