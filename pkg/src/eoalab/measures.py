"""Entanglement quantities and bounds for multipartite pure states.

The central operational quantity is the entanglement of assistance: the
largest average bipartite entanglement between two designated parties that
a measurement on the remaining (helper) system can create.  Its many-copy
value collapses to the closed form min{S(A), S(B)}, which
``eoa_upper_bound`` evaluates; ``eoa_optimize`` searches single-copy
ensembles for the matching lower bound.

Party arguments throughout accept either a single label or an iterable of
labels, so multi-copy registers can be grouped into effective parties.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .qcore import (
    DensityOperator,
    PureState,
    _axes_for,
    _entropy_of_probs,
    binary_entropy,
    entanglement_entropy,
    pure_marginal,
    trace_distance,
    von_neumann_entropy,
)
from .states import Ensemble, ensemble_average, haar_unitary, make_example1_phi

__all__ = [
    "EoAReport",
    "OptimizerTrace",
    "holevo_chi",
    "avg_entanglement",
    "ghz_epr_rates",
    "eoa_upper_bound",
    "eoa_optimize",
    "eof_upper",
    "concurrence",
    "eof_2qubit",
    "mincut_entanglement",
    "oneway_bc_ghz_bound",
    "example1_witness",
    "weyl_unitaries",
]


def _as_labels(party) -> tuple[str, ...]:
    if isinstance(party, str):
        return (party,)
    return tuple(party)


@dataclass(frozen=True)
class OptimizerTrace:
    """Diagnostics from the ensemble search."""

    restarts: int
    iterations: int
    final_gradient_norm: float
    best_restart: int
    per_restart: tuple[float, ...]


@dataclass(frozen=True)
class EoAReport:
    """Result of an entanglement-of-assistance optimization.

    ``lower_bound`` is the best ensemble average found, ``upper_bound`` the
    closed-form min marginal entropy, and ``witness`` the ensemble achieving
    the lower bound.
    """

    lower_bound: float
    upper_bound: float
    witness: Ensemble
    trace: OptimizerTrace

    def __post_init__(self):
        if not -1e-9 <= self.lower_bound <= self.upper_bound + 1e-9:
            raise ValueError(
                f"inconsistent report: lower {self.lower_bound}, upper {self.upper_bound}"
            )


def holevo_chi(e: Ensemble, marginal) -> float:
    """Holevo information chi = S(avg marginal) - avg S(marginals), in bits."""
    labels = _as_labels(marginal)
    probs = e.probabilities
    dims = None
    avg = None
    member_entropy = 0.0
    for q, psi in e.entries:
        rho = pure_marginal(psi, labels)
        if avg is None:
            dims = rho.dim
            avg = np.zeros((dims, dims), dtype=complex)
        avg += q * rho.matrix
        member_entropy += q * von_neumann_entropy(rho)
    chi = von_neumann_entropy(avg) - member_entropy
    # chi is nonnegative and bounded by the ensemble's Shannon entropy
    return max(chi, 0.0) if chi > -1e-10 else chi


def avg_entanglement(e: Ensemble, cut) -> float:
    """Average entanglement of the ensemble members across ``cut``."""
    labels = _as_labels(cut)
    return float(
        sum(q * entanglement_entropy(psi, labels) for q, psi in e.entries)
    )


def eoa_upper_bound(psi: PureState, a, b) -> float:
    """min{S(A), S(B)}: the exact many-copy assisted EPR rate."""
    sa = von_neumann_entropy(pure_marginal(psi, _as_labels(a)))
    sb = von_neumann_entropy(pure_marginal(psi, _as_labels(b)))
    return min(sa, sb)


def ghz_epr_rates(psi: PureState, helper, e: Ensemble) -> tuple[float, float]:
    """Simultaneous cat/EPR rates (chi, Ebar) for a helper decomposition.

    chi = min{S(A), S(B)} - Ebar, where A, B are the two non-helper parties
    and Ebar is the ensemble's average entanglement across A|B.  By
    construction chi + Ebar reproduces min{S(A), S(B)} exactly.  The
    ensemble must realize the reduced state tr_helper(psi).
    """
    helper_labels = _as_labels(helper)
    rest = [lab for lab in psi.labels if lab not in helper_labels]
    if len(rest) != 2:
        raise ValueError("state must have exactly two non-helper parties")
    rho = pure_marginal(psi, rest)
    mix = ensemble_average(e)
    if mix.dim != rho.dim:
        raise ValueError("ensemble layout does not match the non-helper parties")
    if trace_distance(mix, rho) > 1e-8:
        raise ValueError("ensemble does not realize tr_helper(psi)")
    a, b = rest
    bound = eoa_upper_bound(psi, [a], [b])
    ebar = avg_entanglement(e, [a])
    return bound - ebar, ebar


# ---------------------------------------------------------------------------
# Ensemble search over helper isometries
# ---------------------------------------------------------------------------


def _conditional_rows(psi: PureState, a, b, helper) -> tuple[np.ndarray, int, int, tuple]:
    """Unnormalized helper-computational conditionals as rows.

    Returns (rows, d_a, d_b, rest_layout) where ``rows[c]`` is the
    conditional on helper value c, flattened with the ``a`` axes leading.
    """
    a_labels, b_labels, h_labels = _as_labels(a), _as_labels(b), _as_labels(helper)
    a_axes = _axes_for(psi.layout, a_labels)
    b_axes = _axes_for(psi.layout, b_labels)
    h_axes = _axes_for(psi.layout, h_labels)
    if sorted(a_axes + b_axes + h_axes) != list(range(len(psi.layout))):
        raise ValueError("a, b, helper must partition the parties")
    arr = np.transpose(psi.tensor_view(), a_axes + b_axes + h_axes)
    da = math.prod(psi.dims[k] for k in a_axes)
    db = math.prod(psi.dims[k] for k in b_axes)
    dh = math.prod(psi.dims[k] for k in h_axes)
    rows = arr.reshape(da * db, dh).T.copy()
    rest_layout = tuple(psi.layout[k] for k in a_axes + b_axes)
    return rows, da, db, rest_layout


def _scores_batch(rows: np.ndarray, da: int, db: int) -> np.ndarray:
    """q_i * E_i for a batch of unnormalized rows, vectorized.

    Using q * H(p/q) = -sum_j p_j log2 p_j + q log2 q with p the squared
    singular values of the reshaped row (sum_j p_j = q).
    """
    q = np.einsum("ij,ij->i", rows.conj(), rows).real
    sv = np.linalg.svd(rows.reshape(-1, da, db), compute_uv=False)
    p = sv * sv
    plogp = np.where(p > 0.0, p * np.log2(np.where(p > 0.0, p, 1.0)), 0.0)
    qlogq = np.where(q > 0.0, q * np.log2(np.where(q > 0.0, q, 1.0)), 0.0)
    return -np.sum(plogp, axis=1) + qlogq


_THETAS = np.linspace(0.0, np.pi / 2, 9)[1:-1]
_PHIS = np.linspace(0.0, 2 * np.pi, 8, endpoint=False)


def _rotated_pair_scores(vp, vq, thetas, phis, da, db):
    """Objective contribution of a pair under a grid of Givens rotations."""
    th, ph = np.meshgrid(thetas, phis, indexing="ij")
    c = np.cos(th).ravel()[:, None]
    se = (np.sin(th) * np.exp(1j * ph)).ravel()[:, None]
    se_conj = (np.sin(th) * np.exp(-1j * ph)).ravel()[:, None]
    wp = c * vp[None, :] - se * vq[None, :]
    wq = se_conj * vp[None, :] + c * vq[None, :]
    return _scores_batch(wp, da, db) + _scores_batch(wq, da, db)


def _pair_search(vp, vq, da, db, sign):
    """Best Givens rotation for a row pair; returns (score, theta, phi)."""
    base = float(sign * _scores_batch(np.vstack([vp, vq]), da, db).sum())
    best = (base, 0.0, 0.0)
    thetas, phis = _THETAS, _PHIS
    for _ in range(3):
        vals = sign * _rotated_pair_scores(vp, vq, thetas, phis, da, db)
        k = int(np.argmax(vals))
        if vals[k] > best[0] + 1e-15:
            best = (float(vals[k]), float(thetas[k // len(phis)]), float(phis[k % len(phis)]))
        th0, ph0 = best[1], best[2]
        span_t = (thetas[1] - thetas[0]) if len(thetas) > 1 else 0.1
        span_p = (phis[1] - phis[0]) if len(phis) > 1 else 0.4
        thetas = np.linspace(th0 - span_t, th0 + span_t, 5)
        phis = np.linspace(ph0 - span_p, ph0 + span_p, 5)
    return best


def _sweep(rows, da, db, sign):
    """One full cycle of pairwise rotations; returns the total gain."""
    gain = 0.0
    k = rows.shape[0]
    scores = sign * _scores_batch(rows, da, db)
    for p in range(k):
        for q in range(p + 1, k):
            base = scores[p] + scores[q]
            val, th, ph = _pair_search(rows[p], rows[q], da, db, sign)
            if val > base + 1e-13:
                c, s = math.cos(th), math.sin(th)
                e = np.exp(1j * ph)
                wp = c * rows[p] - s * e * rows[q]
                wq = s * np.conj(e) * rows[p] + c * rows[q]
                rows[p], rows[q] = wp, wq
                pair = sign * _scores_batch(rows[[p, q]], da, db)
                scores[p], scores[q] = pair[0], pair[1]
                gain += val - base
    return gain


def _objective(rows, da, db) -> float:
    return float(np.sum(_scores_batch(rows, da, db)))


def _numeric_gradient_norm(rows, da, db, sign, h=1e-5) -> float:
    """Norm of the derivative of the objective along every Givens generator."""
    k = rows.shape[0]
    total = 0.0
    steps = np.array([h, -h])
    for p in range(k):
        for q in range(p + 1, k):
            for ph in (0.0, np.pi / 2):
                vals = sign * _rotated_pair_scores(
                    rows[p], rows[q], steps, np.array([ph]), da, db
                )
                total += ((vals[0] - vals[1]) / (2 * h)) ** 2
    return math.sqrt(total)


def _ensemble_search(
    psi: PureState,
    a,
    b,
    helper,
    *,
    maximize: bool,
    restarts: int = 20,
    max_iter: int = 200,
    tol: float = 1e-7,
    k: int = 2,
    seed: int = 0,
    initial: list | None = None,
):
    """Optimize the average entanglement over helper-induced ensembles.

    The search space is an isometry from the helper space (dim d) to an
    enlarged space of dim k*d followed by a computational-basis measurement;
    this realizes every ensemble of at most k*d members.  Optimization is by
    gradient-free pairwise (Givens) rotations of the enlarged rows, with
    random restarts; restart 0 embeds the helper computational basis.
    """
    cond, da, db, rest_layout = _conditional_rows(psi, a, b, helper)
    d = cond.shape[0]
    kd = max(1, int(k)) * d
    sign = 1.0 if maximize else -1.0
    rng = np.random.default_rng(seed)

    starts = []
    if initial:
        for mat in initial:
            mat = np.asarray(mat, dtype=complex)
            if mat.ndim != 2 or mat.shape[1] != d:
                raise ValueError(f"initial isometries must have {d} columns")
            if np.max(np.abs(mat.conj().T @ mat - np.eye(d))) > 1e-8:
                raise ValueError("initial matrix is not an isometry")
            starts.append(mat @ cond)
    pad = np.zeros((kd - d, cond.shape[1]), dtype=complex)
    starts.append(np.vstack([cond, pad]))
    for _ in range(max(0, restarts - 1)):
        w = haar_unitary(kd, rng)[:, :d]
        starts.append(w @ cond)

    best_rows = None
    best_val = -np.inf
    best_restart = -1
    total_sweeps = 0
    per_restart = []
    for idx, rows in enumerate(starts):
        rows = rows.copy()
        for _ in range(max_iter):
            total_sweeps += 1
            gain = _sweep(rows, da, db, sign)
            if gain < tol:
                break
        val = sign * _objective(rows, da, db)
        per_restart.append(sign * val)
        if val > best_val:
            best_val = val
            best_rows = rows
            best_restart = idx
    value = best_val if maximize else -best_val

    entries = []
    for row in best_rows:
        q = float(np.vdot(row, row).real)
        if q <= 1e-12:
            continue
        entries.append((q, PureState(row / math.sqrt(q), rest_layout)))
    witness = Ensemble(tuple(entries))
    grad = _numeric_gradient_norm(best_rows, da, db, sign)
    trace = OptimizerTrace(
        restarts=len(starts),
        iterations=total_sweeps,
        final_gradient_norm=grad,
        best_restart=best_restart,
        per_restart=tuple(float(v) for v in per_restart),
    )
    return value, witness, trace


def eoa_optimize(
    psi: PureState,
    a,
    b,
    helper,
    restarts: int = 20,
    max_iter: int = 200,
    tol: float = 1e-7,
    *,
    k: int = 2,
    seed: int = 0,
    initial: list | None = None,
) -> EoAReport:
    """Lower-bound the entanglement of assistance by ensemble search.

    Deterministic given ``seed``.  ``initial`` may supply warm-start
    isometries (shape (rows, d_helper)) that are polished alongside the
    random restarts.  Non-convergence shows up in the trace, not as an
    error.
    """
    value, witness, trace = _ensemble_search(
        psi,
        a,
        b,
        helper,
        maximize=True,
        restarts=restarts,
        max_iter=max_iter,
        tol=tol,
        k=k,
        seed=seed,
        initial=initial,
    )
    upper = eoa_upper_bound(psi, a, b)
    return EoAReport(
        lower_bound=min(value, upper + 1e-12),
        upper_bound=upper,
        witness=witness,
        trace=trace,
    )


def eof_upper(
    psi: PureState,
    a,
    b,
    helper,
    restarts: int = 20,
    max_iter: int = 200,
    tol: float = 1e-7,
    *,
    k: int = 2,
    seed: int = 0,
):
    """Upper value of the entanglement of formation of tr_helper(psi).

    Same search as ``eoa_optimize`` but minimizing; the result is an upper
    bound on E_F (the true minimum may need a richer ensemble).  Returns
    ``(value, witness, trace)``.
    """
    return _ensemble_search(
        psi,
        a,
        b,
        helper,
        maximize=False,
        restarts=restarts,
        max_iter=max_iter,
        tol=tol,
        k=k,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# Two-qubit closed forms
# ---------------------------------------------------------------------------

_SY_SY = np.kron(
    np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]])
)


def concurrence(rho: DensityOperator) -> float:
    """Wootters concurrence of a two-qubit state."""
    if rho.dims != (2, 2):
        raise ValueError(f"concurrence needs two qubits, got dims {rho.dims}")
    m = rho.matrix
    r = m @ _SY_SY @ m.conj() @ _SY_SY
    vals = np.linalg.eigvals(r).real
    lam = np.sqrt(np.clip(np.sort(vals)[::-1], 0.0, None))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def eof_2qubit(rho: DensityOperator) -> float:
    """Entanglement of formation of a two-qubit state, in bits."""
    c = concurrence(rho)
    return binary_entropy((1 + math.sqrt(max(0.0, 1 - c * c))) / 2)


# ---------------------------------------------------------------------------
# Many-helper bound and one-way broadcast bound
# ---------------------------------------------------------------------------


def mincut_entanglement(psi: PureState, a, b) -> tuple[float, tuple[str, ...]]:
    """Minimum cut entropy min_S S(A u S) over helper subsets S.

    All parties other than ``a`` and ``b`` are helpers; the minimum runs
    over all 2^(m-2) subsets.  Ties are broken toward the smallest subset,
    then lexicographically.  This is the exact many-copy rate of EPR pairs
    localizable between a and b with the helpers' assistance.
    """
    a_labels = _as_labels(a)
    b_labels = _as_labels(b)
    helpers = [
        lab for lab in psi.labels if lab not in a_labels and lab not in b_labels
    ]
    if len(psi.labels) < 2 or not a_labels or not b_labels:
        raise ValueError("need at least the two end parties")
    best = None
    for r in range(len(helpers) + 1):
        for subset in itertools.combinations(sorted(helpers), r):
            s = von_neumann_entropy(pure_marginal(psi, list(a_labels) + list(subset)))
            key = (round(s, 12), len(subset), subset)
            if best is None or key < best[0]:
                best = (key, s, subset)
    return best[1], best[2]


def oneway_bc_ghz_bound(
    psi: PureState, a, b, helper, formation_proxy: str = "auto", **search_kwargs
) -> float:
    """Upper bound min{S(A), S(B)} - E_C on the one-way broadcast cat rate.

    The entanglement cost E_C is not computable in general; it is replaced
    by the entanglement of formation of tr_helper(psi), which upper-bounds
    it, so the returned number is an upper value whenever E_C < E_F is
    possible.  ``formation_proxy`` selects the proxy: "wootters" (two-qubit
    closed form), "optimize" (ensemble minimization), or "auto".
    """
    a_labels, b_labels = _as_labels(a), _as_labels(b)
    rest = list(a_labels) + list(b_labels)
    rho = pure_marginal(psi, rest)
    if formation_proxy == "auto":
        formation_proxy = "wootters" if rho.dims == (2, 2) else "optimize"
    if formation_proxy == "wootters":
        if rho.dims != (2, 2):
            raise ValueError(
                "wootters proxy needs a two-qubit reduced state; "
                "use formation_proxy='optimize'"
            )
        ef = eof_2qubit(rho)
    elif formation_proxy == "optimize":
        ef, _, _ = eof_upper(psi, a, b, helper, **search_kwargs)
    else:
        raise ValueError(f"unknown formation proxy {formation_proxy!r}")
    return eoa_upper_bound(psi, a, b) - ef


# ---------------------------------------------------------------------------
# Superadditivity witness
# ---------------------------------------------------------------------------


def weyl_unitaries(d: int) -> list[np.ndarray]:
    """The d^2 shift-and-phase unitaries X^a Z^b (a one-design)."""
    omega = np.exp(2j * np.pi / d)
    x = np.roll(np.eye(d), 1, axis=0)
    z = np.diag(omega ** np.arange(d))
    out = []
    for apow in range(d):
        for bpow in range(d):
            out.append(np.linalg.matrix_power(x, apow) @ np.linalg.matrix_power(z, bpow))
    return out


def example1_witness() -> Ensemble:
    """Exact 81-member decomposition of the doubled antisymmetric state.

    Each member is (U1 x U2 x U1 x U2) phi with U1, U2 drawn from the qutrit
    shift-and-phase group and phi the four-qutrit witness state; every
    member has 2.5 bits of entanglement across A1A2 | B1B2 and the uniform
    mixture reproduces the two-copy restriction exactly, certifying that
    the assisted entanglement of two copies is at least 2.5 bits.
    """
    phi = make_example1_phi()
    arr = phi.tensor_view()  # (A1, A2, B1, B2)
    ws = weyl_unitaries(3)
    layout = phi.layout
    entries = []
    p = 1.0 / 81.0
    for u1 in ws:
        for u2 in ws:
            rotated = np.einsum("ai,bj,ck,dl,ijkl->abcd", u1, u2, u1, u2, arr)
            entries.append((p, PureState(rotated.ravel(), layout)))
    return Ensemble(tuple(entries))
