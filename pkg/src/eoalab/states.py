"""Canonical states, purification, and ensemble extraction.

The generators return analytically exact amplitudes.  ``purify`` and
``ensemble_from_helper_basis`` are the two directions of the standard
correspondence between mixed states and the measurements a purifying party
can perform: a purification appends a helper register, and measuring the
helper in any orthonormal basis realizes a pure-state ensemble for the
remaining parties.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .qcore import DensityOperator, PureState, _axes_for

__all__ = [
    "Ensemble",
    "make_epr",
    "make_ghz",
    "make_w",
    "make_aharonov",
    "make_upsilon",
    "make_example1_phi",
    "purify",
    "ensemble_from_helper_basis",
    "ensemble_average",
    "haar_unitary",
    "state_to_json",
    "state_from_json",
    "write_state_file",
    "read_state_file",
]

_PARTY_NAMES = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"


@dataclass(frozen=True)
class Ensemble:
    """Probability-weighted list of pure states on a common layout."""

    entries: tuple[tuple[float, PureState], ...]

    def __post_init__(self):
        entries = tuple((float(q), psi) for q, psi in self.entries)
        if not entries:
            raise ValueError("ensemble must contain at least one entry")
        layout = entries[0][1].layout
        total = 0.0
        for q, psi in entries:
            if q <= 0:
                raise ValueError(f"ensemble probabilities must be positive, got {q}")
            if psi.layout != layout:
                raise ValueError("all ensemble members must share one layout")
            total += q
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"ensemble probabilities sum to {total}, not 1")
        object.__setattr__(self, "entries", entries)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([q for q, _ in self.entries])

    @property
    def states(self) -> tuple[PureState, ...]:
        return tuple(psi for _, psi in self.entries)

    @property
    def layout(self):
        return self.entries[0][1].layout

    def __len__(self) -> int:
        return len(self.entries)


def ensemble_average(e: Ensemble) -> DensityOperator:
    """The mixed state realized by the ensemble."""
    dim = e.entries[0][1].dim
    mat = np.zeros((dim, dim), dtype=complex)
    for q, psi in e.entries:
        mat += q * np.outer(psi.amplitudes, psi.amplitudes.conj())
    return DensityOperator(mat, e.layout, validate=False)


def _default_labels(m: int) -> tuple[str, ...]:
    if m <= len(_PARTY_NAMES):
        return tuple(_PARTY_NAMES[:m])
    return tuple(f"P{k}" for k in range(m))


def make_epr(d: int = 2) -> PureState:
    """Maximally entangled pair (1/sqrt(d)) sum_i |ii> on parties A, B."""
    if d < 2:
        raise ValueError("local dimension must be at least 2")
    amps = np.zeros(d * d, dtype=complex)
    for i in range(d):
        amps[i * d + i] = 1 / math.sqrt(d)
    return PureState(amps, (("A", d), ("B", d)))


def make_ghz(m: int = 3, d: int = 2) -> PureState:
    """m-party cat state (1/sqrt(d)) sum_i |i...i>."""
    if m < 2:
        raise ValueError("need at least two parties")
    if d < 2:
        raise ValueError("local dimension must be at least 2")
    amps = np.zeros(d**m, dtype=complex)
    stride = (d**m - 1) // (d - 1)  # 1 + d + ... + d^(m-1)
    for i in range(d):
        amps[i * stride] = 1 / math.sqrt(d)
    return PureState(amps, tuple((lab, d) for lab in _default_labels(m)))


def make_w() -> PureState:
    """Three-qubit W state (|001> + |010> + |100>)/sqrt(3)."""
    amps = np.zeros(8, dtype=complex)
    for idx in (1, 2, 4):
        amps[idx] = 1 / math.sqrt(3)
    return PureState(amps, (("A", 2), ("B", 2), ("C", 2)))


def make_aharonov() -> PureState:
    """Three-qutrit determinant (Aharonov) state.

    Amplitude +-1/sqrt(6) on each permutation of |012>, signed by the parity
    of the permutation.  Every single-party marginal is maximally mixed.
    """
    amps = np.zeros(27, dtype=complex)
    for (i, j, k), sign in (
        ((0, 1, 2), +1),
        ((1, 2, 0), +1),
        ((2, 0, 1), +1),
        ((2, 1, 0), -1),
        ((1, 0, 2), -1),
        ((0, 2, 1), -1),
    ):
        amps[9 * i + 3 * j + k] = sign / math.sqrt(6)
    return PureState(amps, (("A", 3), ("B", 3), ("C", 3)))


def make_upsilon(alpha2: float) -> PureState:
    """Interpolating 3-qubit family alpha|0>|Phi+> + beta|1>|Phi->.

    ``alpha2`` is alpha squared, restricted to [0, 1/2] so that
    alpha <= beta = sqrt(1 - alpha^2).  At alpha2 = 0 the state is
    |0>^A Phi+^{BC}; at alpha2 = 1/2 it is locally equivalent to a GHZ
    state.
    """
    alpha2 = float(alpha2)
    if not 0.0 <= alpha2 <= 0.5 + 1e-12:
        raise ValueError(f"alpha^2 must lie in [0, 1/2], got {alpha2}")
    alpha2 = min(alpha2, 0.5)
    a = math.sqrt(alpha2)
    b = math.sqrt(1.0 - alpha2)
    amps = np.zeros(8, dtype=complex)
    amps[0] = a / math.sqrt(2)   # |0>|00>
    amps[3] = a / math.sqrt(2)   # |0>|11>
    amps[4] = b / math.sqrt(2)   # |1>|00>
    amps[7] = -b / math.sqrt(2)  # |1>|11>
    return PureState(amps, (("A", 2), ("B", 2), ("C", 2)))


def make_example1_phi() -> PureState:
    """Four-qutrit witness state with Schmidt spectrum [1/4 x2, 1/8 x4].

    phi = (1/sqrt(8)) [ (|01>-|10>)^{A1B1} (|01>-|10>)^{A2B2}
                      + (|12>-|21>)^{A1B1} (|12>-|21>)^{A2B2} ],
    laid out as (A1, A2, B1, B2), each a qutrit.  Its entanglement across
    A1A2 | B1B2 is exactly 2.5 bits.
    """
    amps = np.zeros(81, dtype=complex)

    def put(a1, a2, b1, b2, value):
        amps[27 * a1 + 9 * a2 + 3 * b1 + b2] = value

    w = 1 / math.sqrt(8)
    for lo, hi in ((0, 1), (1, 2)):
        put(lo, lo, hi, hi, w)
        put(lo, hi, hi, lo, -w)
        put(hi, lo, lo, hi, -w)
        put(hi, hi, lo, lo, w)
    return PureState(amps, (("A1", 3), ("A2", 3), ("B1", 3), ("B2", 3)))


def purify(rho: DensityOperator, helper_label: str = "C") -> PureState:
    """Deterministic eigenbasis purification.

    Appends a helper party whose dimension is the rank of ``rho`` and
    returns sum_i sqrt(lambda_i) |e_i>|i>, with eigenvalues descending and
    ties broken by the eigensolver's basis order.  Tracing out the helper
    recovers ``rho``.
    """
    if helper_label in rho.labels:
        raise ValueError(f"helper label {helper_label!r} already in layout")
    w, v = np.linalg.eigh(rho.matrix)
    w = w[::-1]
    v = v[:, ::-1]
    rank = max(1, int(np.sum(w > 1e-12)))
    w = np.clip(w[:rank], 0.0, 1.0)
    amps = (v[:, :rank] * np.sqrt(w)).ravel()
    layout = rho.layout + ((helper_label, rank),)
    norm = np.linalg.norm(amps)
    return PureState(amps / norm, layout)


def ensemble_from_helper_basis(
    psi: PureState, helper_label: str, basis: np.ndarray
) -> Ensemble:
    """Ensemble realized by measuring the helper in the given basis.

    ``basis`` is a unitary whose columns are the measurement vectors.  Entry
    j of the result is (q_j, psi_j) with q_j the outcome probability and
    psi_j the normalized conditional state on the remaining parties (in
    their original order).  Zero-probability branches are dropped.
    """
    axis = _axes_for(psi.layout, helper_label)[0]
    d = psi.dims[axis]
    basis = np.asarray(basis, dtype=complex)
    if basis.shape != (d, d):
        raise ValueError(f"basis must be {d}x{d}, got {basis.shape}")
    if np.max(np.abs(basis.conj().T @ basis - np.eye(d))) > 1e-10:
        raise ValueError("basis matrix is not unitary")
    arr = np.moveaxis(psi.tensor_view(), axis, -1)
    rest_shape = arr.shape[:-1]
    mat = arr.reshape(-1, d)
    # conditional vectors v_j = <b_j| psi  (contract the helper axis)
    cond = mat @ basis.conj()
    rest_layout = tuple(p for k, p in enumerate(psi.layout) if k != axis)
    entries = []
    for j in range(d):
        q = float(np.vdot(cond[:, j], cond[:, j]).real)
        if q <= 1e-12:
            continue
        member = PureState(cond[:, j] / math.sqrt(q), rest_layout)
        entries.append((q, member))
    del rest_shape
    return Ensemble(tuple(entries))


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a Gaussian matrix.

    The R-diagonal phases are fixed so the distribution is exactly
    Haar-uniform.
    """
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    phases = np.diag(r).copy()
    phases /= np.abs(phases)
    return q * phases


def state_to_json(psi: PureState) -> str:
    """Serialize a pure state to the JSON state-file format.

    Schema: ``{"parties": [{"label": str, "dim": int}, ...],
    "amplitudes": [[re, im], ...]}`` with amplitudes in the global indexing
    convention.  Python's float repr preserves all 17 significant digits,
    so a round trip is bit-faithful at double precision.
    """
    doc = {
        "parties": [{"label": lab, "dim": d} for lab, d in psi.layout],
        "amplitudes": [[float(a.real), float(a.imag)] for a in psi.amplitudes],
    }
    return json.dumps(doc)


def state_from_json(text: str) -> PureState:
    doc = json.loads(text)
    try:
        layout = tuple((p["label"], int(p["dim"])) for p in doc["parties"])
        amps = np.array([complex(re, im) for re, im in doc["amplitudes"]])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed state file: {exc}") from exc
    return PureState(amps, layout)


def write_state_file(psi: PureState, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(state_to_json(psi))


def read_state_file(path) -> PureState:
    with open(path, encoding="utf-8") as fh:
        return state_from_json(fh.read())
