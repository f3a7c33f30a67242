"""Finite-copy execution of helper-assisted distillation protocols.

The helper's measurement is built from the method of types: project onto a
subspace of constant letter frequencies, then measure rank-1 phase
superpositions ("Fourier states") over a randomly drawn code of same-type
sequences.  At large blocklength this concentrates the register onto
ensembles whose members are locally distinguishable, which is what lets the
two end parties keep the full min-marginal-entropy rate of EPR pairs, or,
run coherently, a cat-state register of the Holevo size plus EPR pairs.

The combinatorially complete measurement over all codes is replaced by the
operationally equivalent randomized protocol: draw one code uniformly, then
measure its Fourier states completed by the computational kets of the
unused sequences.  Completion outcomes are flagged as aborts; every outcome
therefore projects the remaining parties onto a pure state.

Everything is deterministic given the seed: trial t of a run with master
seed s uses the stream ``SeedSequence((s, t))``, so trials are independent
and may be evaluated in any order or in parallel.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .qcore import (
    PureState,
    _axes_for,
    _entropy_of_probs,
    ensure_budget,
    pure_marginal,
    von_neumann_entropy,
)
from .measures import avg_entanglement, eoa_upper_bound, mincut_entanglement
from .states import ensemble_from_helper_basis

__all__ = [
    "TypeClass",
    "Code",
    "OutcomeRecord",
    "NFoldProduct",
    "ProtocolReport",
    "n_fold",
    "enumerate_types",
    "type_projector",
    "fourier_state",
    "povm_constant",
    "helper_measure",
    "enumerate_helper_outcomes",
    "pgm",
    "PrettyGoodMeasurement",
    "decoder_isometry",
    "run_eoa_protocol",
    "run_ghz_protocol",
    "disengage_fourth",
]

_MAX_SEQUENCES = 1 << 20


# ---------------------------------------------------------------------------
# Types, codes, and their measurement vectors
# ---------------------------------------------------------------------------


def _sequence_table(n: int, d: int) -> np.ndarray:
    """All d^n length-n sequences as digit rows; row index = basis index."""
    idx = np.arange(d**n)
    out = np.empty((d**n, n), dtype=np.int64)
    for k in range(n - 1, -1, -1):
        out[:, k] = idx % d
        idx = idx // d
    return out


def _sequence_index(seq, d: int) -> int:
    out = 0
    for digit in seq:
        out = out * d + int(digit)
    return out


def _multinomial(counts) -> int:
    total = math.factorial(sum(counts))
    for c in counts:
        total //= math.factorial(c)
    return total


@dataclass(frozen=True)
class TypeClass:
    """All length-n sequences with prescribed letter counts."""

    counts: tuple[int, ...]
    n: int
    members: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if sum(counts) != self.n:
            raise ValueError(f"counts {counts} do not sum to n = {self.n}")
        if len(self.members) != _multinomial(counts):
            raise ValueError("member list does not match the multinomial size")
        for seq in self.members:
            got = [0] * len(counts)
            for letter in seq:
                got[letter] += 1
            if tuple(got) != counts:
                raise ValueError(f"member {seq} is not of type {counts}")
        object.__setattr__(self, "counts", counts)

    @property
    def alphabet_size(self) -> int:
        return len(self.counts)

    @property
    def size(self) -> int:
        return len(self.members)

    @property
    def distribution(self) -> np.ndarray:
        return np.array(self.counts, dtype=float) / self.n


@dataclass(frozen=True)
class Code:
    """A set of N distinct sequences; type-restricted when parent is set."""

    members: tuple[tuple[int, ...], ...]
    parent: TypeClass | None = None

    def __post_init__(self):
        if len(set(self.members)) != len(self.members):
            raise ValueError("code members must be distinct")
        if not self.members:
            raise ValueError("code must contain at least one sequence")
        if self.parent is not None:
            allowed = set(self.parent.members)
            for seq in self.members:
                if seq not in allowed:
                    raise ValueError(f"sequence {seq} is not of the parent type")

    @property
    def size(self) -> int:
        return len(self.members)


def enumerate_types(n: int, alphabet_size: int) -> list[TypeClass]:
    """All type classes of length-n sequences over the alphabet.

    The classes are disjoint and their sizes sum to alphabet_size^n.
    Refuses blocklengths with more than 2^20 sequences.
    """
    if n < 1:
        raise ValueError("blocklength must be at least 1")
    if alphabet_size < 1:
        raise ValueError("alphabet must have at least one letter")
    if alphabet_size**n > _MAX_SEQUENCES:
        raise ValueError(
            f"alphabet_size^n = {alphabet_size**n} exceeds the enumeration cap"
        )
    table = _sequence_table(n, alphabet_size)
    groups: dict[tuple[int, ...], list[tuple[int, ...]]] = {}
    for row in table:
        counts = [0] * alphabet_size
        for letter in row:
            counts[letter] += 1
        groups.setdefault(tuple(counts), []).append(tuple(int(x) for x in row))
    return [
        TypeClass(counts=key, n=n, members=tuple(members))
        for key, members in sorted(groups.items(), reverse=True)
    ]


def type_projector(t: TypeClass) -> np.ndarray:
    """Projector onto the span of the type's sequences, on the n-fold helper."""
    d = t.alphabet_size
    dim = d**t.n
    proj = np.zeros((dim, dim), dtype=complex)
    for seq in t.members:
        k = _sequence_index(seq, d)
        proj[k, k] = 1.0
    return proj


def fourier_state(c: Code, alpha: int, helper_dim: int | None = None) -> PureState:
    """Phase superposition (1/sqrt(N)) sum_beta e^{2 pi i alpha beta / N} |J_beta>.

    The states for alpha = 0..N-1 are orthonormal and their projectors sum
    to the projector onto the code's span.
    """
    n_code = c.size
    if not 0 <= alpha < n_code:
        raise ValueError(f"alpha must lie in [0, {n_code}), got {alpha}")
    if helper_dim is None:
        if c.parent is not None:
            helper_dim = c.parent.alphabet_size
        else:
            helper_dim = max(max(seq) for seq in c.members) + 1
    n = len(c.members[0])
    amps = np.zeros(helper_dim**n, dtype=complex)
    for beta, seq in enumerate(c.members):
        amps[_sequence_index(seq, helper_dim)] = np.exp(
            2j * np.pi * alpha * beta / n_code
        ) / math.sqrt(n_code)
    layout = tuple((f"C{k + 1}", helper_dim) for k in range(n))
    return PureState(amps, layout)


def povm_constant(t: TypeClass, n_code: int) -> float:
    """Normalization c making (c/N) |t_J(alpha)><t_J(alpha)| a POVM on the type.

    Summing the Fourier projectors of one code over alpha gives the span
    projector of that code; summing over all N-subsets counts every
    sequence C(M-1, N-1) times, so c = N / C(M-1, N-1) restores the type
    projector exactly.
    """
    m = t.size
    if not 1 <= n_code <= m:
        raise ValueError(f"code size must lie in [1, {m}], got {n_code}")
    return n_code / math.comb(m - 1, n_code - 1)


# ---------------------------------------------------------------------------
# n-fold products
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class NFoldProduct:
    """Bookkeeping for |psi>^{x n} with copies grouped party-by-party.

    ``state`` carries one label per copy (``A1..An, B1..Bn, ...``), ordered
    party-major so each party's copies are contiguous; ``blocks`` maps each
    base label to its copy labels.
    """

    base: PureState
    n: int
    state: PureState
    blocks: dict[str, tuple[str, ...]]


def n_fold(psi: PureState, n: int) -> NFoldProduct:
    """Build the n-fold tensor power with party-major copy grouping."""
    if n < 1:
        raise ValueError("need at least one copy")
    m = len(psi.layout)
    ensure_budget(psi.dim**n, f"{n}-fold product state")
    amps = psi.amplitudes
    for _ in range(n - 1):
        amps = np.kron(amps, psi.amplitudes)
    arr = amps.reshape(psi.dims * n)
    order = [c * m + k for k in range(m) for c in range(n)]
    arr = np.transpose(arr, order)
    layout = tuple(
        (f"{label}{c + 1}", dim) for label, dim in psi.layout for c in range(n)
    )
    blocks = {
        label: tuple(f"{label}{c + 1}" for c in range(n)) for label, _ in psi.layout
    }
    return NFoldProduct(base=psi, n=n, state=PureState(arr.ravel(), layout), blocks=blocks)


# ---------------------------------------------------------------------------
# The helper's two-step measurement
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class OutcomeRecord:
    """One sampled (or enumerated) outcome of the helper's measurement.

    ``state`` is the normalized post-measurement pure state on the
    non-helper registers, blocked party-by-party.  ``abort`` is None for
    Fourier-code outcomes, "atypical" when the observed type fell outside
    the typicality window (the helper then measured computational kets),
    and "complement" for sequences of a good type left out of the code.
    """

    type_counts: tuple[int, ...]
    code: Code | None
    alpha: int | None
    probability: float
    state: PureState
    entropies: dict[str, float]
    abort: str | None


@dataclass(eq=False)
class _HelperView:
    """Pre-arranged n-copy state with the helper block as trailing axis."""

    product: NFoldProduct
    helper: str
    rest_parties: tuple[str, ...]
    rest_layout: tuple[tuple[str, int], ...]
    matrix: np.ndarray  # (D_rest, d^n)
    d: int
    n: int
    q: np.ndarray
    chi: float
    ebar: float
    upper: float
    col_probs: np.ndarray
    types: list[dict]  # {"counts", "indices", "prob", "typical"}


def _blocked_rest(product: NFoldProduct, helper: str):
    base = product.base
    rest = [lab for lab in base.labels if lab != helper]
    layout = tuple(
        (lab, dim**product.n) for lab, dim in base.layout if lab != helper
    )
    return rest, layout


def _build_view(product: NFoldProduct, helper: str, eta: float) -> _HelperView:
    base = product.base
    if helper not in base.labels:
        raise ValueError(f"unknown helper label {helper!r}")
    n, m = product.n, len(base.layout)
    h_pos = base.labels.index(helper)
    d = base.dims[h_pos]
    arr = product.state.tensor_view()  # m*n axes, party-major
    h_axes = list(range(h_pos * n, (h_pos + 1) * n))
    other = [k for k in range(m * n) if k not in h_axes]
    mat = np.transpose(arr, other + h_axes).reshape(-1, d**n)

    rest, rest_layout = _blocked_rest(product, helper)

    # single-copy quantities in the helper's computational basis
    base_mat = np.moveaxis(base.tensor_view(), h_pos, -1).reshape(-1, d)
    q = np.einsum("xc,xc->c", base_mat.conj(), base_mat).real
    if len(rest) == 2:
        ens = ensemble_from_helper_basis(base, helper, np.eye(d))
        upper = eoa_upper_bound(base, rest[0], rest[1])
        ebar = avg_entanglement(ens, rest[0])
        chi = upper - ebar
    else:
        upper = float("nan")
        ebar = float("nan")
        chi = float("nan")

    col_probs = np.einsum("xj,xj->j", mat.conj(), mat).real
    table = _sequence_table(n, d)
    groups: dict[tuple[int, ...], list[int]] = {}
    for j, row in enumerate(table):
        counts = [0] * d
        for letter in row:
            counts[letter] += 1
        groups.setdefault(tuple(counts), []).append(j)
    types = []
    for counts, indices in sorted(groups.items(), reverse=True):
        dist = np.array(counts, dtype=float) / n
        typical = float(np.sum(np.abs(dist - q))) <= eta
        idx = np.array(indices)
        types.append(
            {
                "counts": counts,
                "indices": idx,
                "prob": float(np.sum(col_probs[idx])),
                "typical": typical,
            }
        )
    return _HelperView(
        product=product,
        helper=helper,
        rest_parties=tuple(rest),
        rest_layout=rest_layout,
        matrix=mat,
        d=d,
        n=n,
        q=q,
        chi=chi,
        ebar=ebar,
        upper=upper,
        col_probs=col_probs,
        types=types,
    )


def _code_size(chi: float, n: int, delta: float) -> int:
    if not np.isfinite(chi) or chi <= 0:
        return 1
    return max(1, int(math.floor(2 ** (n * (chi - 2 * delta)) + 1e-9)))


def _sequences_of(view: _HelperView, indices) -> tuple[tuple[int, ...], ...]:
    table = _sequence_table(view.n, view.d)
    return tuple(tuple(int(x) for x in table[j]) for j in np.atleast_1d(indices))


def _draw_type_codes(view: _HelperView, rng: np.random.Generator, n_code: int):
    """Uniformly sample one code per typical type (positions into members)."""
    codes = {}
    for t_idx, info in enumerate(view.types):
        if not info["typical"]:
            continue
        m = len(info["indices"])
        size = min(n_code, m)
        pos = np.sort(rng.choice(m, size=size, replace=False))
        codes[t_idx] = pos
    return codes


def _cut_entropies(theta: np.ndarray, view_layout) -> dict[str, float]:
    """Entanglement of each leading party against the rest (first two)."""
    dims = [dim for _, dim in view_layout]
    labels = [lab for lab, _ in view_layout]
    out = {}
    arr = theta.reshape(dims)
    n_cuts = 1 if len(dims) == 2 else min(2, len(dims))
    for k in range(n_cuts):
        mat = np.moveaxis(arr, k, 0).reshape(dims[k], -1)
        if mat.shape[0] <= mat.shape[1]:
            gram = mat @ mat.conj().T
        else:
            gram = mat.conj().T @ mat
        spec = np.clip(np.linalg.eigvalsh(gram), 0.0, 1.0)
        others = "".join(lab for i, lab in enumerate(labels) if i != k)
        out[f"{labels[k]}|{others}"] = _entropy_of_probs(spec)
    return out


def _materialize(
    view: _HelperView,
    counts,
    code_pos,
    kind: str,
    payload,
    prob: float,
) -> OutcomeRecord:
    info_idx = payload
    if kind == "alpha":
        fourier_cols, alpha, code = info_idx
        theta = fourier_cols[:, alpha] / math.sqrt(prob)
        abort = None
    else:
        col, code, abort = info_idx
        theta = view.matrix[:, col] / math.sqrt(prob)
        alpha = None
    state = PureState(theta, view.rest_layout)
    return OutcomeRecord(
        type_counts=tuple(counts),
        code=code,
        alpha=alpha,
        probability=prob,
        state=state,
        entropies=_cut_entropies(theta, view.rest_layout),
        abort=abort,
    )


def _type_outcomes(view: _HelperView, t_idx: int, code_pos):
    """Outcome specs (counts, code_pos, kind, payload, prob) for one type."""
    info = view.types[t_idx]
    counts = info["counts"]
    idx = info["indices"]
    specs = []
    if code_pos is None:
        for j in idx:
            prob = float(view.col_probs[j])
            specs.append((counts, None, "member", (int(j), None, "atypical"), prob))
        return specs
    code_idx = idx[code_pos]
    seqs = _sequences_of(view, code_idx)
    parent = TypeClass(counts=counts, n=view.n, members=_sequences_of(view, idx))
    code = Code(members=seqs, parent=parent)
    n_code = len(code_idx)
    cols = view.matrix[:, code_idx]
    fourier = np.fft.fft(cols, axis=1) / math.sqrt(n_code)
    probs = np.einsum("xj,xj->j", fourier.conj(), fourier).real
    for alpha in range(n_code):
        specs.append(
            (counts, code_pos, "alpha", (fourier, alpha, code), float(probs[alpha]))
        )
    outside = np.setdiff1d(idx, code_idx)
    for j in outside:
        prob = float(view.col_probs[j])
        specs.append((counts, code_pos, "member", (int(j), code, "complement"), prob))
    return specs


def helper_measure(
    product: NFoldProduct,
    helper: str,
    rng: np.random.Generator,
    delta: float = 0.1,
    eta: float = 0.2,
) -> OutcomeRecord:
    """Sample one run of the helper's two-step measurement.

    Step 1 projects onto a type class (Born rule); types outside the
    typicality window ||P - q||_1 <= eta abort, and the helper falls back
    to computational kets.  Step 2 draws a uniformly random code of
    ceil-bounded size N = max(1, floor(2^{n(chi - 2 delta)})) within the
    type and measures its Fourier states, completed by the kets of the
    unused sequences (flagged "complement").
    """
    view = _build_view(product, helper, eta)
    return _sample_outcome(view, rng, delta)


def _sample_outcome(
    view: _HelperView, rng: np.random.Generator, delta: float
) -> OutcomeRecord:
    n_code = _code_size(view.chi, view.n, delta)
    type_probs = np.array([info["prob"] for info in view.types])
    t_idx = int(rng.choice(len(view.types), p=type_probs / type_probs.sum()))
    info = view.types[t_idx]
    if info["typical"]:
        m = len(info["indices"])
        size = min(n_code, m)
        code_pos = np.sort(rng.choice(m, size=size, replace=False))
    else:
        code_pos = None
    specs = _type_outcomes(view, t_idx, code_pos)
    probs = np.array([s[4] for s in specs])
    k = int(rng.choice(len(specs), p=probs / probs.sum()))
    counts, _, kind, payload, prob = specs[k]
    return _materialize(view, counts, code_pos, kind, payload, prob)


def enumerate_helper_outcomes(
    product: NFoldProduct,
    helper: str,
    seed: int,
    delta: float = 0.1,
    eta: float = 0.2,
) -> list[OutcomeRecord]:
    """Every outcome of one realization of the randomized measurement.

    Codes are drawn from a stream derived from ``seed`` -- one per typical
    type -- and the full rank-1 outcome set is materialized.  The
    probabilities sum to 1 exactly (the vectors form an orthonormal basis
    of the helper register); outcomes of probability below 1e-14 are
    dropped.
    """
    view = _build_view(product, helper, eta)
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC0DE)))
    n_code = _code_size(view.chi, view.n, delta)
    codes = _draw_type_codes(view, rng, n_code)
    records = []
    for t_idx in range(len(view.types)):
        code_pos = codes.get(t_idx)
        for counts, _, kind, payload, prob in _type_outcomes(view, t_idx, code_pos):
            if prob <= 1e-14:
                continue
            records.append(_materialize(view, counts, code_pos, kind, payload, prob))
    return records


# ---------------------------------------------------------------------------
# Pretty-good measurement and decoder isometries
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PrettyGoodMeasurement:
    """Square-root decoder for a collection of states.

    ``elements`` are PSD and sum to the identity; when the states do not
    span the space, the projector onto the orthogonal complement of the
    support is appended as a final "fail" element.
    """

    elements: tuple[np.ndarray, ...]
    success_probability: float
    has_complement: bool


def _pgm_elements(mats: list[np.ndarray]) -> tuple[list[np.ndarray], float, bool]:
    dim = mats[0].shape[0]
    total = np.zeros((dim, dim), dtype=complex)
    for m in mats:
        total += m
    w, v = np.linalg.eigh(total)
    inv_sqrt = np.where(w > 1e-12 * max(1.0, w[-1]), 1.0 / np.sqrt(np.maximum(w, 1e-300)), 0.0)
    s_inv = (v * inv_sqrt) @ v.conj().T
    support = (v * (w > 1e-12 * max(1.0, w[-1]))) @ v.conj().T
    elements = []
    success = 0.0
    for m in mats:
        d_el = s_inv @ m @ s_inv
        d_el = (d_el + d_el.conj().T) / 2
        elements.append(d_el)
        success += float(np.real(np.trace(m @ d_el)))
    success /= len(mats)
    complement = np.eye(dim) - support
    complement = (complement + complement.conj().T) / 2
    has_complement = float(np.max(np.abs(complement))) > 1e-10
    if has_complement:
        elements.append(complement)
    return elements, success, has_complement


def pgm(states: list) -> PrettyGoodMeasurement:
    """Pretty-good measurement D_b = S^{-1/2} rho_b S^{-1/2}, S = sum rho_g.

    ``states`` may be DensityOperator instances or raw matrices.  The
    reported success probability is (1/N) sum_b tr(rho_b D_b), i.e. for a
    uniform prior.
    """
    if not states:
        raise ValueError("need at least one state")
    mats = [np.asarray(getattr(s, "matrix", s), dtype=complex) for s in states]
    dim = mats[0].shape[0]
    for m in mats:
        if m.shape != (dim, dim):
            raise ValueError("all states must share one dimension")
    elements, success, has_complement = _pgm_elements(mats)
    return PrettyGoodMeasurement(
        elements=tuple(elements),
        success_probability=success,
        has_complement=has_complement,
    )


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(mat)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def decoder_isometry(povm) -> np.ndarray:
    """Isometry V = sum_b sqrt(D_b) (x) |b> implementing a POVM coherently.

    The flag register is appended as the least significant axis; V^dag V
    equals the identity exactly when the POVM is complete, and marginals of
    systems the isometry does not touch are unchanged.
    """
    elements = povm.elements if isinstance(povm, PrettyGoodMeasurement) else tuple(povm)
    if not elements:
        raise ValueError("empty POVM")
    mats = [np.asarray(e, dtype=complex) for e in elements]
    dim = mats[0].shape[0]
    total = sum(mats)
    if np.max(np.abs(total - np.eye(dim))) > 1e-10:
        raise ValueError("POVM elements do not sum to the identity")
    k = len(mats)
    v_mat = np.zeros((dim * k, dim), dtype=complex)
    for b, m in enumerate(mats):
        root = _sqrt_psd(m)
        v_mat[b::k, :] = root  # row (i, b) -> i * k + b
    return v_mat


# ---------------------------------------------------------------------------
# Protocol reports
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProtocolReport:
    """Summary of a protocol run plus per-trial data.

    ``mean_rate`` and ``std`` refer to the protocol's per-copy figure of
    merit over all trials; aborts count toward the mean with their actual
    outcome states.  ``records`` holds the in-memory OutcomeRecord objects
    where applicable (not serialized).
    """

    protocol: str
    n: int
    delta: float
    trials: int
    seed: int
    mean_rate: float
    std: float
    upper_bound: float
    abort_rate: float
    per_trial: tuple[dict, ...]
    extras: dict = field(default_factory=dict)
    records: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "n": self.n,
            "delta": self.delta,
            "trials": self.trials,
            "seed": self.seed,
            "mean_rate": self.mean_rate,
            "std": self.std,
            "upper_bound": self.upper_bound,
            "abort_rate": self.abort_rate,
            "per_trial": list(self.per_trial),
            "extras": dict(self.extras),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(trial))))


def _run_trials(worker, trials: int, n_jobs: int = 1):
    if n_jobs and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(worker, range(trials)))
    else:
        results = [worker(t) for t in range(trials)]
    return results


# ---------------------------------------------------------------------------
# EPR distillation (incoherent protocol)
# ---------------------------------------------------------------------------


def _rotate_helper(psi: PureState, helper: str, basis: np.ndarray | None) -> PureState:
    if basis is None:
        return psi
    axis = _axes_for(psi.layout, helper)[0]
    d = psi.dims[axis]
    basis = np.asarray(basis, dtype=complex)
    if basis.shape != (d, d):
        raise ValueError(f"helper basis must be {d}x{d}")
    if np.max(np.abs(basis.conj().T @ basis - np.eye(d))) > 1e-10:
        raise ValueError("helper basis is not unitary")
    arr = np.tensordot(psi.tensor_view(), basis.conj(), axes=([axis], [0]))
    arr = np.moveaxis(arr, -1, axis)
    return PureState(arr.ravel(), psi.layout)


def run_eoa_protocol(
    psi: PureState,
    a: str,
    b: str,
    helper: str,
    n: int,
    delta: float = 0.1,
    trials: int = 100,
    seed: int = 0,
    eta: float = 0.2,
    helper_basis: np.ndarray | None = None,
    n_jobs: int = 1,
) -> ProtocolReport:
    """Sample the EPR distillation protocol on n copies of a tripartite state.

    Each trial performs the helper's two-step measurement and records the
    entanglement of the projected state across the a|b block cut, in bits
    per copy.  ``helper_basis`` (columns = measurement basis) selects which
    pure-state ensemble the helper realizes; the default is computational.
    """
    if sorted(psi.labels) != sorted((a, b, helper)) or len(psi.labels) != 3:
        raise ValueError("state must be tripartite on exactly {a, b, helper}")
    rotated = _rotate_helper(psi, helper, helper_basis)
    product = n_fold(rotated, n)
    view = _build_view(product, helper, eta)
    n_code = _code_size(view.chi, view.n, delta)
    cut_key_ab = f"{a}|{b}" if view.rest_parties == (a, b) else f"{b}|{a}"

    def worker(t: int):
        rec = _sample_outcome(view, _trial_rng(seed, t), delta)
        ent = rec.entropies[cut_key_ab]
        return rec, {
            "trial": t,
            "type": list(rec.type_counts),
            "alpha": rec.alpha,
            "code_size": rec.code.size if rec.code is not None else None,
            "abort": rec.abort,
            "probability": rec.probability,
            "entropy_bits": ent,
            "rate": ent / n,
        }

    results = _run_trials(worker, trials, n_jobs)
    records = tuple(r for r, _ in results)
    per_trial = tuple(d for _, d in results)
    rates = np.array([d["rate"] for d in per_trial])
    aborts = np.array([d["abort"] is not None for d in per_trial])
    code_rates = np.array(
        [
            math.log2(d["code_size"]) / n if d["code_size"] else 0.0
            for d in per_trial
        ]
    )
    extras = {
        "chi": view.chi,
        "ebar": view.ebar,
        "eta": eta,
        "nominal_code_size": n_code,
        "mean_log2N_over_n": float(np.mean(code_rates)),
        "ebar_plus_code_rate": view.ebar + float(np.mean(code_rates)),
        "mean_rate_success": float(np.mean(rates[~aborts])) if np.any(~aborts) else None,
    }
    return ProtocolReport(
        protocol="eoa-distill",
        n=n,
        delta=delta,
        trials=trials,
        seed=seed,
        mean_rate=float(np.mean(rates)),
        std=float(np.std(rates, ddof=1)) if trials > 1 else 0.0,
        upper_bound=view.upper,
        abort_rate=float(np.mean(aborts)),
        per_trial=per_trial,
        extras=extras,
        records=records,
    )


# ---------------------------------------------------------------------------
# Coherent cat-state protocol
# ---------------------------------------------------------------------------


def _letter_marginals(cond: np.ndarray, da: int, db: int):
    """Per-letter normalized conditional marginals on each side.

    ``cond`` has one row per helper letter, flattened (a, b).
    """
    mats_a, mats_b, norms = [], [], []
    for row in cond:
        m = row.reshape(da, db)
        q = float(np.vdot(row, row).real)
        norms.append(q)
        if q <= 1e-14:
            mats_a.append(np.zeros((da, da), dtype=complex))
            mats_b.append(np.zeros((db, db), dtype=complex))
            continue
        mats_a.append(m @ m.conj().T / q)
        mats_b.append(m.T @ m.conj() / q)
    return mats_a, mats_b, np.array(norms)


def _kron_chain(mats) -> np.ndarray:
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def _match_permutation(src_seq, dst_seq) -> list[int]:
    """Positions src such that src_seq[perm[i]] == dst_seq[i], stably."""
    queues: dict[int, list[int]] = {}
    for pos, letter in enumerate(src_seq):
        queues.setdefault(int(letter), []).append(pos)
    perm = []
    for letter in dst_seq:
        perm.append(queues[int(letter)].pop(0))
    return perm


def _conditional_product_state(cond: np.ndarray, seq, da: int, db: int) -> np.ndarray:
    """Normalized tensor product of conditionals for a sequence, blocked (a, b)."""
    n = len(seq)
    vec = np.array([1.0], dtype=complex)
    for letter in seq:
        row = cond[letter]
        q = math.sqrt(float(np.vdot(row, row).real))
        vec = np.kron(vec, row / q)
    arr = vec.reshape([da, db] * n)
    order = [2 * c for c in range(n)] + [2 * c + 1 for c in range(n)]
    return np.transpose(arr, order).ravel()


def run_ghz_protocol(
    psi: PureState,
    a: str,
    b: str,
    helper: str,
    n: int,
    delta: float = 0.1,
    trials: int = 20,
    seed: int = 0,
    eta: float = 0.2,
    helper_basis: np.ndarray | None = None,
) -> ProtocolReport:
    """Coherent protocol: cat-state register plus a standard residual state.

    After the type projection, the helper measures the coarse projector
    onto the span of a sampled code (keeping their register), then the
    three parties apply local decoders: pretty-good-measurement isometries
    for the two end parties, the relabeling |J_beta> -> |beta> for the
    helper, and permutations, controlled on the extracted index, that move
    every conditional product to the lexicographically first sequence of
    the type.  Each successful trial reports the fidelity with the ideal
    target (residual product state times a shared cat register of log2 N
    bits).
    """
    if sorted(psi.labels) != sorted((a, b, helper)) or len(psi.labels) != 3:
        raise ValueError("state must be tripartite on exactly {a, b, helper}")
    rotated = _rotate_helper(psi, helper, helper_basis)
    product = n_fold(rotated, n)
    view = _build_view(product, helper, eta)
    n_code_nominal = _code_size(view.chi, view.n, delta)

    # single-copy conditionals, flattened with (a, b) ordering
    base = rotated
    h_pos = base.labels.index(helper)
    a_pos = base.labels.index(a)
    b_pos = base.labels.index(b)
    da, db = base.dims[a_pos], base.dims[b_pos]
    cond = np.transpose(base.tensor_view(), (h_pos, a_pos, b_pos)).reshape(-1, da * db)
    mats_a, mats_b, _ = _letter_marginals(cond, da, db)

    # view.matrix columns are ordered with rest axes (a-block, b-block) when
    # a precedes b in the base layout; otherwise swap to (a, b)
    mat = view.matrix
    if view.rest_parties != (a, b):
        mat = (
            mat.reshape(db**n, da**n, view.d**n)
            .transpose(1, 0, 2)
            .reshape(da**n * db**n, view.d**n)
        )

    def run_trial(t: int) -> dict:
        rng = _trial_rng(seed, t)
        type_probs = np.array([info["prob"] for info in view.types])
        t_idx = int(rng.choice(len(view.types), p=type_probs / type_probs.sum()))
        info = view.types[t_idx]
        out = {
            "trial": t,
            "type": list(info["counts"]),
            "probability": float(info["prob"]),
            "abort": None,
            "code_size": None,
            "code": None,
            "fidelity": None,
            "ghz_bits": None,
            "rate": 0.0,
        }
        if not info["typical"]:
            out["abort"] = "atypical"
            return out
        idx = info["indices"]
        m_size = len(idx)
        n_code = min(n_code_nominal, m_size)
        code_pos = np.sort(rng.choice(m_size, size=n_code, replace=False))
        code_idx = idx[code_pos]
        span_prob = float(np.sum(view.col_probs[code_idx]))
        out["code_size"] = n_code
        out["probability"] = span_prob
        if rng.random() * float(info["prob"]) >= span_prob:
            out["abort"] = "complement"
            return out

        code_seqs = _sequences_of(view, code_idx)
        out["code"] = [list(seq) for seq in code_seqs]
        # projected state with the helper register kept, in the code basis
        zeta = mat[:, code_idx] / math.sqrt(span_prob)  # (Da*Db, N)
        dan, dbn = da**n, db**n
        zeta = zeta.reshape(dan, dbn, n_code)

        dec_a = pgm([_kron_chain([mats_a[j] for j in seq]) for seq in code_seqs])
        dec_b = pgm([_kron_chain([mats_b[j] for j in seq]) for seq in code_seqs])
        sq_a = np.stack([_sqrt_psd(e) for e in dec_a.elements])
        sq_b = np.stack([_sqrt_psd(e) for e in dec_b.elements])
        ka, kb = sq_a.shape[0], sq_b.shape[0]
        ensure_budget(dan * dbn * n_code * ka * kb, "decoded protocol state")

        stage = np.einsum("fxa,abz->xfbz", sq_a, zeta)
        stage = np.einsum("gyb,xfbz->xfygz", sq_b, stage)
        # controlled permutations to the lexicographically first sequence
        target_seq = _sequences_of(view, idx[:1])[0]
        full = stage.reshape((da,) * n + (ka,) + (db,) * n + (kb,) + (n_code,))
        full = np.moveaxis(full, (n, 2 * n + 1), (0, 1))  # (ka, kb, a..., b..., z)
        out_arr = np.empty_like(full)
        for fa in range(ka):
            for fb in range(kb):
                block = full[fa, fb]
                perm_a = (
                    _match_permutation(code_seqs[fa], target_seq)
                    if fa < n_code
                    else list(range(n))
                )
                perm_b = (
                    _match_permutation(code_seqs[fb], target_seq)
                    if fb < n_code
                    else list(range(n))
                )
                axes = perm_a + [n + p for p in perm_b] + [2 * n]
                out_arr[fa, fb] = np.transpose(block, axes)
        final = np.moveaxis(out_arr, (0, 1), (n, 2 * n + 1)).ravel()

        residual = _conditional_product_state(cond, target_seq, da, db).reshape(
            dan, dbn
        )
        target = np.zeros((dan, ka, dbn, kb, n_code), dtype=complex)
        for beta in range(n_code):
            target[:, beta, :, beta, beta] = residual / math.sqrt(n_code)
        fid = abs(np.vdot(target.ravel(), final)) ** 2
        out["fidelity"] = float(fid)
        out["ghz_bits"] = math.log2(n_code)
        out["rate"] = math.log2(n_code) / n
        return out

    per_trial = tuple(run_trial(t) for t in range(trials))
    rates = np.array([d["rate"] for d in per_trial])
    aborts = np.array([d["abort"] is not None for d in per_trial])
    fids = [d["fidelity"] for d in per_trial if d["fidelity"] is not None]
    extras = {
        "chi": view.chi,
        "ebar": view.ebar,
        "eta": eta,
        "nominal_code_size": n_code_nominal,
        "mean_fidelity": float(np.mean(fids)) if fids else None,
        "min_fidelity": float(np.min(fids)) if fids else None,
    }
    return ProtocolReport(
        protocol="ghz-coherent",
        n=n,
        delta=delta,
        trials=trials,
        seed=seed,
        mean_rate=float(np.mean(rates)),
        std=float(np.std(rates, ddof=1)) if trials > 1 else 0.0,
        upper_bound=view.upper,
        abort_rate=float(np.mean(aborts)),
        per_trial=per_trial,
        extras=extras,
    )


# ---------------------------------------------------------------------------
# Four-party disengaging step
# ---------------------------------------------------------------------------


def disengage_fourth(
    psi: PureState,
    a: str,
    b: str,
    c_keep: str,
    d_helper: str,
    n: int,
    delta: float = 0.1,
    trials: int = 100,
    seed: int = 0,
    chain_eoa: bool = False,
    n_jobs: int = 1,
) -> ProtocolReport:
    """Measure the fourth party out of n copies while preserving the min cut.

    The leaving helper applies a rank-1 Fourier-code measurement whose
    codewords are drawn i.i.d. from the n-fold letter distribution (not
    type-restricted) at rate min{chi_B, chi_AC} - delta; the completion
    kets are flagged "complement".  Each trial records the two cut
    entropies of the residual tripartite state and the trace distance of
    the first party's marginal from its ideal product form.  With
    ``chain_eoa`` the residual state is fed through one more helper
    measurement on the kept third party.
    """
    labels = (a, b, c_keep, d_helper)
    if sorted(psi.labels) != sorted(labels) or len(psi.labels) != 4:
        raise ValueError("state must be four-party on exactly the given labels")
    product = n_fold(psi, n)
    view = _build_view(product, d_helper, eta=2.0)

    base = psi
    h_pos = base.labels.index(d_helper)
    d = base.dims[h_pos]
    # single-copy conditionals for the Holevo quantities
    cond_full = np.moveaxis(base.tensor_view(), h_pos, -1).reshape(-1, d)
    q = np.einsum("xc,xc->c", cond_full.conj(), cond_full).real
    rest_labels = [lab for lab in base.labels if lab != d_helper]

    def chi_for(group):
        s_group = von_neumann_entropy(_marginal_of_base(base, group))
        acc = 0.0
        for letter in range(d):
            ql = q[letter]
            if ql <= 1e-14:
                continue
            vec = cond_full[:, letter] / math.sqrt(ql)
            member = PureState(vec, tuple(p for p in base.layout if p[0] != d_helper))
            acc += ql * von_neumann_entropy(_marginal_of_base(member, group))
        return s_group - acc

    chi_a = chi_for([a])
    chi_b = chi_for([b])
    if chi_a > chi_b:
        chi_a, chi_b = chi_b, chi_a
        swapped = True
        chi_ac = chi_for([b, c_keep])
    else:
        swapped = False
        chi_ac = chi_for([a, c_keep])
    chi0 = min(chi_b, chi_ac)
    n_positive = int(np.sum(q > 1e-14)) ** n
    n_code = max(1, int(math.floor(2 ** (n * (chi0 - delta)) + 1e-9)))
    n_code = min(n_code, max(1, n_positive))

    upper, _ = mincut_entanglement(psi, a, b)
    rest_layout = view.rest_layout
    dims_rest = [dim for _, dim in rest_layout]
    a_block = view.rest_parties.index(a)
    b_block = view.rest_parties.index(b)

    # ideal product marginal of party a
    rho_a = _marginal_of_base(base, [a]).matrix
    rho_a_n = _kron_chain([rho_a] * n)

    def draw_code(rng):
        chosen: list[int] = []
        seen = set()
        attempts = 0
        while len(chosen) < n_code:
            seq = rng.choice(d, size=n, p=q / q.sum())
            j = _sequence_index(seq, d)
            attempts += 1
            if attempts > 10000 * n_code:
                raise RuntimeError("could not draw distinct codewords")
            if j in seen:
                continue
            seen.add(j)
            chosen.append(j)
        return np.sort(np.array(chosen))

    def worker(t: int):
        rng = _trial_rng(seed, t)
        code_idx = draw_code(rng)
        cols = view.matrix[:, code_idx]
        fourier = np.fft.fft(cols, axis=1) / math.sqrt(n_code)
        p_alpha = np.einsum("xj,xj->j", fourier.conj(), fourier).real
        outside = np.setdiff1d(np.arange(view.d**n), code_idx)
        p_outside = view.col_probs[outside]
        probs = np.concatenate([p_alpha, p_outside])
        pick = int(rng.choice(len(probs), p=probs / probs.sum()))
        code = Code(members=_sequences_of(view, code_idx), parent=None)
        if pick < n_code:
            theta = fourier[:, pick] / math.sqrt(p_alpha[pick])
            abort = None
            alpha = pick
            prob = float(p_alpha[pick])
        else:
            j = int(outside[pick - n_code])
            theta = view.matrix[:, j] / math.sqrt(view.col_probs[j])
            abort = "complement"
            alpha = None
            prob = float(view.col_probs[j])

        arr = theta.reshape(dims_rest)
        ent = {}
        for blk, lab in ((a_block, a), (b_block, b)):
            mat2 = np.moveaxis(arr, blk, 0).reshape(dims_rest[blk], -1)
            gram = (
                mat2 @ mat2.conj().T
                if mat2.shape[0] <= mat2.shape[1]
                else mat2.conj().T @ mat2
            )
            others = "".join(x for x in view.rest_parties if x != lab)
            ent[f"{lab}|{others}"] = _entropy_of_probs(
                np.clip(np.linalg.eigvalsh(gram), 0.0, 1.0)
            )
        mat_a = np.moveaxis(arr, a_block, 0).reshape(dims_rest[a_block], -1)
        td = float(
            np.sum(np.abs(np.linalg.eigvalsh(mat_a @ mat_a.conj().T - rho_a_n)))
        )
        # no type step in this variant: codewords are drawn i.i.d.
        rec = OutcomeRecord(
            type_counts=(),
            code=code,
            alpha=alpha,
            probability=prob,
            state=PureState(theta, rest_layout),
            entropies=ent,
            abort=abort,
        )
        row = {
            "trial": t,
            "abort": abort,
            "alpha": alpha,
            "probability": prob,
            "entropy_a": ent[f"{a}|{''.join(x for x in view.rest_parties if x != a)}"],
            "entropy_b": ent[f"{b}|{''.join(x for x in view.rest_parties if x != b)}"],
            "trace_distance_a": td,
        }
        row["rate"] = min(row["entropy_a"], row["entropy_b"]) / n
        if chain_eoa and abort is None:
            chained = helper_measure(
                n_fold(rec.state, 1), c_keep, rng, delta=delta, eta=2.0
            )
            key = [k for k in chained.entropies][0]
            row["chained_entropy"] = chained.entropies[key]
        return rec, row

    results = _run_trials(worker, trials, n_jobs)
    records = tuple(r for r, _ in results)
    per_trial = tuple(d_ for _, d_ in results)
    rates = np.array([d_["rate"] for d_ in per_trial])
    aborts = np.array([d_["abort"] is not None for d_ in per_trial])
    tds = np.array([d_["trace_distance_a"] for d_ in per_trial])
    extras = {
        "chi_a": chi_a,
        "chi_b": chi_b,
        "chi_ac": chi_ac,
        "chi0": chi0,
        "swapped_ab": swapped,
        "code_size": n_code,
        "mean_entropy_a_rate": float(np.mean([d_["entropy_a"] for d_ in per_trial]) / n),
        "mean_entropy_b_rate": float(np.mean([d_["entropy_b"] for d_ in per_trial]) / n),
        "mean_trace_distance_a": float(np.mean(tds)),
    }
    if chain_eoa:
        chained = [d_.get("chained_entropy") for d_ in per_trial if "chained_entropy" in d_]
        extras["mean_chained_entropy_rate"] = (
            float(np.mean(chained)) / n if chained else None
        )
    return ProtocolReport(
        protocol="four-party-disengage",
        n=n,
        delta=delta,
        trials=trials,
        seed=seed,
        mean_rate=float(np.mean(rates)),
        std=float(np.std(rates, ddof=1)) if trials > 1 else 0.0,
        upper_bound=upper,
        abort_rate=float(np.mean(aborts)),
        per_trial=per_trial,
        extras=extras,
        records=records,
    )


def _marginal_of_base(psi: PureState, group):
    return pure_marginal(psi, group)
