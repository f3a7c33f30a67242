"""Quantum channels: duality with bipartite states, environment-assisted
capacity, and mixture-of-unitaries fitting.

A channel T: A -> B is stored as Kraus operators.  Sending half of an
entangled reference pair through T gives the dual state rho_T =
(id x T) |phi><phi|; T is an isometry or unitary exactly when rho_T is
pure.  The environment-assisted capacity -- the quantum rate from A to B
when whoever holds the environment measures it and broadcasts the result --
has the closed form C_A(T) = max_rho min{S(rho), S(T(rho))}, a concave
maximization this module performs with a conditional-gradient ascent whose
duality gap certifies the optimum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .qcore import (
    DensityOperator,
    PureState,
    ensure_budget,
    trace_distance,
    von_neumann_entropy,
)
from .states import haar_unitary, make_aharonov
from .distill import enumerate_helper_outcomes, n_fold

__all__ = [
    "QuantumChannel",
    "ChoiState",
    "apply",
    "choi",
    "channel_from_choi",
    "stinespring",
    "is_unital",
    "CapacityResult",
    "env_assisted_capacity",
    "MixtureFit",
    "fit_unitary_mixture",
    "CodingDemoReport",
    "env_assisted_coding_demo",
    "identity_channel",
    "depolarizing_channel",
    "dephasing_channel",
    "amplitude_damping_channel",
    "aharonov_choi_channel",
    "random_channel",
    "channel_to_json",
    "channel_from_json",
    "write_channel_file",
    "read_channel_file",
]


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    """Completely positive trace-preserving map given by Kraus operators."""

    kraus: tuple[np.ndarray, ...]
    input_label: str = "A"
    output_label: str = "B"

    def __post_init__(self):
        mats = tuple(np.array(k, dtype=complex) for k in self.kraus)
        if not mats:
            raise ValueError("channel needs at least one Kraus operator")
        d_out, d_in = mats[0].shape
        for k in mats:
            if k.shape != (d_out, d_in):
                raise ValueError("all Kraus operators must share one shape")
        total = sum(k.conj().T @ k for k in mats)
        residual = float(np.max(np.abs(total - np.eye(d_in))))
        if residual > 1e-10:
            raise ValueError(
                f"Kraus set is not trace preserving: ||sum K^dag K - I|| = {residual:.3e}"
            )
        for k in mats:
            k.setflags(write=False)
        object.__setattr__(self, "kraus", mats)

    @property
    def d_in(self) -> int:
        return self.kraus[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.kraus[0].shape[0]


@dataclass(frozen=True, eq=False)
class ChoiState:
    """Dual state (id x T)|phi><phi| together with the reference state."""

    state: DensityOperator
    reference: PureState

    def __post_init__(self):
        ref_marginal = _reference_marginal(self.reference)
        got = _partial_trace_last(self.state)
        if float(np.max(np.abs(got - ref_marginal))) > 1e-10:
            raise ValueError("tracing the output does not recover the reference marginal")


def _reference_marginal(phi: PureState) -> np.ndarray:
    d_ref, d_in = phi.dims
    mat = phi.amplitudes.reshape(d_ref, d_in)
    return mat @ mat.conj().T


def _partial_trace_last(rho: DensityOperator) -> np.ndarray:
    d1, d2 = rho.dims
    t = rho.matrix.reshape(d1, d2, d1, d2)
    return np.einsum("abcb->ac", t)


def _as_density_matrix(rho) -> np.ndarray:
    if isinstance(rho, DensityOperator):
        return rho.matrix
    return np.asarray(rho, dtype=complex)


def apply(channel: QuantumChannel, rho) -> DensityOperator:
    """Apply the channel: rho -> sum_k K rho K^dag."""
    mat = _as_density_matrix(rho)
    if mat.shape != (channel.d_in, channel.d_in):
        raise ValueError(
            f"input has dimension {mat.shape}, channel expects {channel.d_in}"
        )
    out = np.zeros((channel.d_out, channel.d_out), dtype=complex)
    for k in channel.kraus:
        out += k @ mat @ k.conj().T
    return DensityOperator(out, ((channel.output_label, channel.d_out),), validate=False)


def _apply_matrix(channel: QuantumChannel, mat: np.ndarray) -> np.ndarray:
    out = np.zeros((channel.d_out, channel.d_out), dtype=complex)
    for k in channel.kraus:
        out += k @ mat @ k.conj().T
    return out


def _adjoint_apply(channel: QuantumChannel, mat: np.ndarray) -> np.ndarray:
    out = np.zeros((channel.d_in, channel.d_in), dtype=complex)
    for k in channel.kraus:
        out += k.conj().T @ mat @ k
    return out


def maximally_entangled_reference(d: int) -> PureState:
    amps = np.zeros(d * d, dtype=complex)
    for i in range(d):
        amps[i * d + i] = 1 / math.sqrt(d)
    return PureState(amps, (("A'", d), ("A", d)))


def choi(channel: QuantumChannel, phi: PureState | None = None) -> ChoiState:
    """Dual state of the channel for reference ``phi`` (maximally entangled
    by default).  ``phi`` must have full Schmidt rank for invertibility."""
    if phi is None:
        phi = maximally_entangled_reference(channel.d_in)
    if len(phi.dims) != 2 or phi.dims[1] != channel.d_in:
        raise ValueError("reference must be bipartite with the channel input second")
    d_ref = phi.dims[0]
    mat = phi.amplitudes.reshape(d_ref, channel.d_in)
    blocks = np.zeros(
        (d_ref * channel.d_out, d_ref * channel.d_out), dtype=complex
    )
    for k in channel.kraus:
        v = (k @ mat.T).T.reshape(-1)  # (id x K) phi, row-major (ref, out)
        blocks += np.outer(v, v.conj())
    layout = (phi.layout[0], (channel.output_label, channel.d_out))
    return ChoiState(
        state=DensityOperator(blocks, layout, validate=False), reference=phi
    )


def channel_from_choi(dual: ChoiState) -> QuantumChannel:
    """Invert the duality: recover the channel from its dual state.

    Requires the reference to have full Schmidt rank on the input system;
    raises otherwise.  The dual state is pure exactly when the recovered
    channel has a single Kraus operator, which the trace-preservation
    invariant then certifies to be an isometry.
    """
    phi = dual.reference
    d_ref, d_in = phi.dims
    d_out = dual.state.dims[1]
    mat = phi.amplitudes.reshape(d_ref, d_in)
    u_ref, sv, vh = np.linalg.svd(mat, full_matrices=False)
    if d_ref < d_in or sv[d_in - 1] < 1e-9:
        raise ValueError("reference state is Schmidt-rank deficient; cannot invert")
    rho = dual.state.matrix.reshape(d_ref, d_out, d_ref, d_out)
    # action on the reference's input-side Schmidt pairs:
    # T(|f_i><f_j|) = <e_i| rho |e_j> / (s_i s_j)
    blocks = np.einsum(
        "ai,abcd,cj->ibjd", u_ref.conj(), rho, u_ref
    ) / np.einsum("i,j->ij", sv, sv)[:, None, :, None]
    # standard-form dual on the computational basis: |a> = sum_i <f_i|a> |f_i>
    f_rows = vh  # f_i[x] = vh[i, x]
    c = np.einsum("ia,ioje,jb->aobe", f_rows.conj(), blocks, f_rows)
    c = c.reshape(d_in * d_out, d_in * d_out)
    c = (c + c.conj().T) / 2
    w, vecs = np.linalg.eigh(c)
    if w[0] < -1e-8:
        raise ValueError(f"dual state is not completely positive: eigenvalue {w[0]}")
    kraus = []
    for idx in range(len(w) - 1, -1, -1):
        if w[idx] <= 1e-10:
            continue
        kraus.append(math.sqrt(w[idx]) * vecs[:, idx].reshape(d_in, d_out).T)
    return QuantumChannel(tuple(kraus))


def stinespring(channel: QuantumChannel) -> np.ndarray:
    """Isometry U: A -> B x E with tr_E(U rho U^dag) = T(rho).

    The environment dimension equals the number of independent Kraus
    operators (the Kraus set is canonicalized through the dual state's
    eigendecomposition first).
    """
    kraus = _canonical_kraus(channel)
    d_e = len(kraus)
    u = np.zeros((channel.d_out * d_e, channel.d_in), dtype=complex)
    for idx, k in enumerate(kraus):
        u[idx::d_e, :] = k
    return u


def _canonical_kraus(channel: QuantumChannel) -> list[np.ndarray]:
    d_in, d_out = channel.d_in, channel.d_out
    # unnormalized standard dual matrix sum_ij |i><j| (x) T(|i><j|)
    c = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in channel.kraus:
        v = np.transpose(k).reshape(-1)  # v[(i, o)] = K[o, i]
        c += np.outer(v, v.conj())
    w, vecs = np.linalg.eigh(c)
    kraus = []
    for idx in range(len(w) - 1, -1, -1):
        if w[idx] <= 1e-12:
            continue
        k = math.sqrt(w[idx]) * vecs[:, idx].reshape(d_in, d_out).T
        kraus.append(k)
    return kraus


def is_unital(channel: QuantumChannel) -> bool:
    """Whether the channel fixes the maximally mixed state."""
    if channel.d_in != channel.d_out:
        raise ValueError("unitality is defined for equal input and output dimensions")
    d = channel.d_in
    out = _apply_matrix(channel, np.eye(d) / d)
    return float(np.sum(np.abs(np.linalg.eigvalsh(out - np.eye(d) / d)))) <= 1e-10


# ---------------------------------------------------------------------------
# Environment-assisted capacity
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CapacityResult:
    """Concave-ascent result with the certified duality gap."""

    value: float
    input_state: np.ndarray
    converged: bool
    iterations: int
    gap: float


def _entropy_and_log(mat: np.ndarray):
    w, v = np.linalg.eigh(mat)
    w = np.clip(w, 1e-18, None)
    log_mat = (v * np.log2(w)) @ v.conj().T
    w_norm = np.clip(w, 0.0, 1.0)
    ent = float(-np.sum(w_norm * np.log2(np.clip(w_norm, 1e-300, None))))
    return ent, log_mat


def env_assisted_capacity(
    channel: QuantumChannel,
    tol: float = 1e-6,
    max_iter: int = 5000,
    kink_tol: float = 1e-9,
) -> CapacityResult:
    """Maximize f(rho) = min{S(rho), S(T(rho))} over density matrices.

    f is a minimum of two concave functionals, so conditional-gradient
    ascent from the maximally mixed state converges to the global optimum;
    at the kink the supergradient is chosen by minimizing the duality gap
    over the two branches' convex combinations.  Stops when the certified
    gap drops below ``tol``; non-convergence within ``max_iter`` returns
    the best state found with ``converged=False``.
    """
    d = channel.d_in
    rho = np.eye(d) / d

    def f_of(mat):
        s_in, _ = _entropy_and_log(mat)
        s_out, _ = _entropy_and_log(_apply_matrix(channel, mat))
        return min(s_in, s_out), s_in, s_out

    def gradients(mat):
        _, log_in = _entropy_and_log(mat)
        _, log_out = _entropy_and_log(_apply_matrix(channel, mat))
        return -log_in, -_adjoint_apply(channel, log_out)

    best_rho = rho
    best_val, s_in, s_out = f_of(rho)
    converged = False
    gap = math.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g_in, g_out = gradients(rho)

        def gap_of(theta):
            g = theta * g_in + (1 - theta) * g_out
            w, v = np.linalg.eigh(g)
            return float(w[-1] - np.real(np.trace(g @ rho))), v[:, -1]

        if s_in < s_out - kink_tol:
            gap, top = gap_of(1.0)
            theta_best = 1.0
        elif s_out < s_in - kink_tol:
            gap, top = gap_of(0.0)
            theta_best = 0.0
        else:
            res = minimize_scalar(
                lambda th: gap_of(th)[0], bounds=(0.0, 1.0), method="bounded",
                options={"xatol": 1e-10},
            )
            theta_best = float(res.x)
            gap, top = gap_of(theta_best)
        if gap <= tol:
            converged = True
            break
        sigma = np.outer(top, top.conj())

        def value_at(t):
            mix = (1 - t) * rho + t * sigma
            return -f_of(mix)[0]

        res = minimize_scalar(
            value_at, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12}
        )
        step = float(res.x)
        if value_at(step) > value_at(0.0):
            step = 0.0
        rho = (1 - step) * rho + step * sigma
        rho = (rho + rho.conj().T) / 2
        val, s_in, s_out = f_of(rho)
        if val > best_val:
            best_val, best_rho = val, rho
    return CapacityResult(
        value=best_val,
        input_state=best_rho,
        converged=converged,
        iterations=iterations,
        gap=float(gap),
    )


# ---------------------------------------------------------------------------
# Mixture-of-unitaries fitting
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MixtureFit:
    """Best convex mixture of unitaries (or isometries) found by the fitter.

    ``distance`` is the fixed-source trace-norm criterion
    || rho_T^(x n) - (id x T') phi^(x n) ||_1 -- an upper bound on the true
    best over the restart budget, not a worst-case channel norm.
    """

    weights: np.ndarray
    operators: tuple[np.ndarray, ...]
    distance: float
    n_copies: int
    metric: str
    per_restart: tuple[float, ...]


def _mixture_dual(weights, ops, phi_mat) -> np.ndarray:
    d_ref = phi_mat.shape[0]
    d_out = ops[0].shape[0]
    out = np.zeros((d_ref * d_out, d_ref * d_out), dtype=complex)
    for w_l, v_l in zip(weights, ops):
        vec = (v_l @ phi_mat.T).T.reshape(-1)
        out += w_l * np.outer(vec, vec.conj())
    return out


def _fit_distance(target, weights, ops, phi_mat) -> float:
    diff = target - _mixture_dual(weights, ops, phi_mat)
    return float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def fit_unitary_mixture(
    channel: QuantumChannel,
    n_copies: int = 1,
    k_terms: int = 2,
    restarts: int = 10,
    seed: int = 0,
    max_rounds: int = 40,
    tol: float = 1e-9,
    warm_start: MixtureFit | None = None,
) -> MixtureFit:
    """Fit sum_l w_l V_l . V_l^dag to the channel on a fixed source.

    Minimizes || rho_T^(x n) - sum_l w_l (id x V_l) phi^(x n) ||_1 with phi
    maximally entangled, alternating between coordinate descent on
    anti-Hermitian generators of the V_l (unitaries when the channel is
    unital and square, isometries when d_out >= d_in) and pairwise convex
    line searches on the weights.  ``warm_start`` seeds one extra restart,
    which makes the distance non-increasing in k_terms when chained.
    """
    d_in, d_out = channel.d_in, channel.d_out
    if d_out < d_in:
        raise ValueError(
            "mixture fitting needs d_out >= d_in (partial-isometry targets "
            "with a smaller output are not supported)"
        )
    n = int(n_copies)
    if n < 1:
        raise ValueError("n_copies must be at least 1")
    dual = choi(channel).state.matrix
    target = dual
    for _ in range(n - 1):
        target = np.kron(target, dual)
    # reorder (ref, out) x n copies into (ref^n, out^n)
    dims = (d_in, d_out) * n
    perm = [2 * c for c in range(n)] + [2 * c + 1 for c in range(n)]
    t = target.reshape(dims + dims)
    t = np.transpose(t, perm + [p + 2 * n for p in perm])
    big = d_in**n * d_out**n
    target = t.reshape(big, big)
    ensure_budget(big * big, "fitted dual state")

    din_n, dout_n = d_in**n, d_out**n
    phi_mat = np.eye(din_n) / math.sqrt(din_n)

    rng = np.random.default_rng(seed)

    def random_isometry():
        return haar_unitary(dout_n, rng)[:, :din_n]

    def polish(weights, ops):
        weights = np.array(weights, dtype=float)
        ops = [np.array(o) for o in ops]
        dist = _fit_distance(target, weights, ops, phi_mat)
        for _ in range(max_rounds):
            improved = 0.0
            # generator coordinate descent on each operator
            for l in range(len(ops)):
                for p in range(dout_n):
                    for q_idx in range(p, dout_n):
                        for phase in (0, 1):
                            if p == q_idx and phase == 1:
                                continue
                            gen = np.zeros((dout_n, dout_n), dtype=complex)
                            if p == q_idx:
                                gen[p, p] = 1j
                            elif phase == 0:
                                gen[p, q_idx] = 1.0
                                gen[q_idx, p] = -1.0
                            else:
                                gen[p, q_idx] = 1j
                                gen[q_idx, p] = 1j
                            base = ops[l]

                            def val(t_ang):
                                rot = _expm_anti(gen, t_ang)
                                trial = ops.copy()
                                trial[l] = rot @ base
                                return _fit_distance(target, weights, trial, phi_mat)

                            res = minimize_scalar(
                                val, bounds=(-np.pi / 2, np.pi / 2), method="bounded",
                                options={"xatol": 1e-7},
                            )
                            if val(float(res.x)) < dist - 1e-14:
                                ops[l] = _expm_anti(gen, float(res.x)) @ base
                                new = _fit_distance(target, weights, ops, phi_mat)
                                improved += dist - new
                                dist = new
            # pairwise weight moves
            if len(ops) > 1:
                for a_idx in range(len(ops)):
                    for b_idx in range(a_idx + 1, len(ops)):
                        span = weights[a_idx] + weights[b_idx]
                        if span <= 0:
                            continue

                        def wval(x):
                            trial = weights.copy()
                            trial[a_idx] = x * span
                            trial[b_idx] = (1 - x) * span
                            return _fit_distance(target, trial, ops, phi_mat)

                        res = minimize_scalar(
                            wval, bounds=(0.0, 1.0), method="bounded",
                            options={"xatol": 1e-9},
                        )
                        if wval(float(res.x)) < dist - 1e-14:
                            weights[a_idx] = float(res.x) * span
                            weights[b_idx] = (1 - float(res.x)) * span
                            dist = _fit_distance(target, weights, ops, phi_mat)
                            improved += 1e-13
            if improved < tol:
                break
        return dist, weights, ops

    starts = []
    if warm_start is not None:
        ops0 = [np.array(o) for o in warm_start.operators]
        w0 = list(warm_start.weights)
        while len(ops0) < k_terms:
            ops0.append(random_isometry())
            w0.append(1e-3)
        w0 = np.array(w0[:k_terms])
        starts.append((w0 / w0.sum(), ops0[:k_terms]))
    for _ in range(restarts):
        w0 = rng.dirichlet(np.ones(k_terms))
        starts.append((w0, [random_isometry() for _ in range(k_terms)]))

    best = None
    per_restart = []
    for w0, ops0 in starts:
        dist, w_fin, ops_fin = polish(w0, ops0)
        per_restart.append(dist)
        if best is None or dist < best[0]:
            best = (dist, w_fin, ops_fin)
    metric = "fixed-source trace distance"
    return MixtureFit(
        weights=best[1],
        operators=tuple(best[2]),
        distance=best[0],
        n_copies=n,
        metric=metric,
        per_restart=tuple(per_restart),
    )


def _expm_anti(gen: np.ndarray, t_ang: float) -> np.ndarray:
    """exp(t G) for anti-Hermitian G via the Hermitian eigenproblem."""
    herm = 1j * gen
    w, v = np.linalg.eigh(herm)
    return (v * np.exp(-1j * t_ang * w)) @ v.conj().T


# ---------------------------------------------------------------------------
# Coding demo
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CodingDemoReport:
    capacity: float
    delta: float
    seed: int
    per_n: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "capacity": self.capacity,
            "delta": self.delta,
            "seed": self.seed,
            "per_n": list(self.per_n),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def env_assisted_coding_demo(
    channel: QuantumChannel,
    n: int,
    seed: int = 0,
    delta: float = 0.1,
    eta: float = 2.0,
) -> CodingDemoReport:
    """Coherent information through the measured-environment channel.

    Builds the test state (a purification of the capacity-achieving input),
    sends it through the channel's dilation, applies the helper measurement
    machinery to the environment, and evaluates the coherent information of
    the induced broadcast channel on blocklengths 1..n.  Because every
    measurement outcome is rank-1, the coherent information equals the
    average output-side entanglement of the projected states.
    """
    cap = env_assisted_capacity(channel)
    rho = cap.input_state
    w, v = np.linalg.eigh(rho)
    w = w[::-1]
    v = v[:, ::-1]
    rank = max(1, int(np.sum(w > 1e-10)))
    phi_mat = v[:, :rank] * np.sqrt(np.clip(w[:rank], 0, 1))  # (d_in, rank)
    u = stinespring(channel)
    d_e = u.shape[0] // channel.d_out
    # |psi>^{A' B E} = (1 x U) |phi>, with A' the rank-sized reference
    psi_mat = phi_mat.T @ u.T  # (rank, d_out * d_e)
    layout = (("R", rank), ("B", channel.d_out), ("E", d_e))
    psi = PureState(psi_mat.reshape(-1), layout)

    per_n = []
    for block in range(1, n + 1):
        prod = n_fold(psi, block)
        recs = enumerate_helper_outcomes(
            prod, "E", seed=seed + block, delta=delta, eta=eta
        )
        coherent = 0.0
        for rec in recs:
            # the residual is bipartite (reference | output block), so its
            # single cut entropy is the output entropy of the rank-1 branch
            coherent += rec.probability * next(iter(rec.entropies.values()))
        per_n.append(
            {
                "n": block,
                "coherent_information": coherent,
                "target": block * (cap.value - delta),
                "outcomes": len(recs),
            }
        )
    return CodingDemoReport(
        capacity=cap.value, delta=delta, seed=seed, per_n=tuple(per_n)
    )


# ---------------------------------------------------------------------------
# Builtin channels
# ---------------------------------------------------------------------------


def identity_channel(d: int = 2) -> QuantumChannel:
    return QuantumChannel((np.eye(d),))


def depolarizing_channel(p: float, d: int = 2) -> QuantumChannel:
    """rho -> (1-p) rho + p I/d, via the shift-and-phase Kraus set."""
    if not 0 <= p <= 1:
        raise ValueError("depolarizing strength must lie in [0, 1]")
    from .measures import weyl_unitaries

    ws = weyl_unitaries(d)
    kraus = [math.sqrt(1 - p * (d * d - 1) / (d * d)) * np.eye(d)]
    for w_op in ws[1:]:
        kraus.append(math.sqrt(p) / d * w_op)
    return QuantumChannel(tuple(kraus))


def dephasing_channel(p: float) -> QuantumChannel:
    """rho -> (1-p) rho + p Z rho Z on a qubit; p = 1/2 kills coherences."""
    if not 0 <= p <= 1:
        raise ValueError("dephasing strength must lie in [0, 1]")
    z = np.diag([1.0, -1.0])
    return QuantumChannel((math.sqrt(1 - p) * np.eye(2), math.sqrt(p) * z))


def amplitude_damping_channel(gamma: float) -> QuantumChannel:
    if not 0 <= gamma <= 1:
        raise ValueError("damping strength must lie in [0, 1]")
    k0 = np.array([[1.0, 0.0], [0.0, math.sqrt(1 - gamma)]])
    k1 = np.array([[0.0, math.sqrt(gamma)], [0.0, 0.0]])
    return QuantumChannel((k0, k1))


def aharonov_choi_channel() -> QuantumChannel:
    """The unital qutrit channel whose dual state is the two-party
    restriction of the determinant state (1/3 of the antisymmetric
    projector); acts as rho -> (I - rho^T)/2."""
    alpha = make_aharonov()
    from .qcore import pure_marginal

    rho = pure_marginal(alpha, ["A", "B"]).matrix
    # Kraus operators from the eigendecomposition of the standard dual form
    w, v = np.linalg.eigh(rho)
    kraus = []
    for idx in range(len(w) - 1, -1, -1):
        if w[idx] <= 1e-12:
            continue
        k = math.sqrt(3 * w[idx]) * v[:, idx].reshape(3, 3).T
        kraus.append(k)
    return QuantumChannel(tuple(kraus))


def random_channel(
    d_in: int, d_out: int, n_kraus: int, rng: np.random.Generator
) -> QuantumChannel:
    """Haar-random channel from a random Stinespring isometry."""
    big = haar_unitary(d_out * n_kraus, rng)[:, :d_in]
    kraus = tuple(big[k::n_kraus, :] for k in range(n_kraus))
    return QuantumChannel(kraus)


# ---------------------------------------------------------------------------
# Channel files
# ---------------------------------------------------------------------------


def channel_to_json(channel: QuantumChannel) -> str:
    doc = {
        "d_in": channel.d_in,
        "d_out": channel.d_out,
        "kraus": [
            [[[float(x.real), float(x.imag)] for x in row] for row in k]
            for k in channel.kraus
        ],
    }
    return json.dumps(doc)


def channel_from_json(text: str) -> QuantumChannel:
    doc = json.loads(text)
    try:
        kraus = tuple(
            np.array([[complex(re, im) for re, im in row] for row in k])
            for k in doc["kraus"]
        )
        d_in, d_out = int(doc["d_in"]), int(doc["d_out"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed channel file: {exc}") from exc
    for k in kraus:
        if k.shape != (d_out, d_in):
            raise ValueError(
                f"Kraus operator shape {k.shape} does not match (d_out, d_in)"
            )
    return QuantumChannel(kraus)


def write_channel_file(channel: QuantumChannel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(channel_to_json(channel))


def read_channel_file(path) -> QuantumChannel:
    with open(path, encoding="utf-8") as fh:
        return channel_from_json(fh.read())
