"""Independent reference computations used by the test suite.

These deliberately avoid the library's optimized code paths: states are
projected with explicitly built measurement vectors, isometry chains are
composed as one dense matrix, and mixtures are sampled classically.
"""

import math

import numpy as np

from eoalab.distill import enumerate_types, pgm
from eoalab.qcore import PureState, pure_marginal


def lemma4_oracle(psi, party, helper, n, n_code, samples, seed):
    """Mean trace distance of random-code mixtures from the ideal power.

    Draws codes i.i.d. from the n-fold letter distribution and averages
    || (1/N) sum_J rho_J - rho^(x n) ||_1 by direct classical sampling.
    """
    rng = np.random.default_rng(seed)
    h_pos = psi.labels.index(helper)
    d = psi.dims[h_pos]
    cond = np.moveaxis(psi.tensor_view(), h_pos, -1).reshape(-1, d)
    q = np.einsum("xc,xc->c", cond.conj(), cond).real
    rest_layout = tuple(p for p in psi.layout if p[0] != helper)
    rho_letters = []
    for letter in range(d):
        vec = cond[:, letter] / math.sqrt(q[letter])
        member = PureState(vec, rest_layout)
        rho_letters.append(pure_marginal(member, [party]).matrix)
    ideal = pure_marginal(psi, [party]).matrix
    ideal_n = np.array([[1.0]])
    for _ in range(n):
        ideal_n = np.kron(ideal_n, ideal)
    dists = []
    for _ in range(samples):
        seen = set()
        mix = 0.0
        while len(seen) < n_code:
            seq = tuple(int(x) for x in rng.choice(d, size=n, p=q / q.sum()))
            if seq in seen:
                continue
            seen.add(seq)
            block = np.array([[1.0]])
            for letter in seq:
                block = np.kron(block, rho_letters[letter])
            mix = mix + block
        mix = mix / n_code
        dists.append(float(np.sum(np.abs(np.linalg.eigvalsh(mix - ideal_n)))))
    return float(np.mean(dists))


def ghz_chain_fidelity(state, a, b, helper, n, row):
    """Recompute one coherent-protocol trial's fidelity from scratch.

    Builds the post-measurement state by dense projection, composes the
    full decoder (PGM isometries, relabeling, controlled permutations) as
    one explicit matrix, applies it once, and overlaps with the ideal
    target.  ``row`` is the protocol report's per-trial entry.
    """
    from eoalab.distill import n_fold

    code = [tuple(s) for s in row["code"]]
    n_code = len(code)
    h_pos = state.labels.index(helper)
    a_pos = state.labels.index(a)
    b_pos = state.labels.index(b)
    da, db, dh = state.dims[a_pos], state.dims[b_pos], state.dims[h_pos]
    cond = np.transpose(state.tensor_view(), (h_pos, a_pos, b_pos)).reshape(
        dh, da * db
    )
    prod = n_fold(state, n)
    arr = prod.state.tensor_view()
    perm = (
        [a_pos * n + c for c in range(n)]
        + [b_pos * n + c for c in range(n)]
        + [h_pos * n + c for c in range(n)]
    )
    big = np.transpose(arr, perm).reshape(da**n * db**n, dh**n)
    idx = [int("".join(map(str, s)), dh) for s in code]
    span = float(sum(np.vdot(big[:, k], big[:, k]).real for k in idx))
    zeta = big[:, idx] / math.sqrt(span)

    def marg(seq, side):
        out = np.array([[1.0]])
        for letter in seq:
            mat2 = cond[letter].reshape(da, db)
            q = np.vdot(cond[letter], cond[letter]).real
            rho = mat2 @ mat2.conj().T / q if side == 0 else mat2.T @ mat2.conj() / q
            out = np.kron(out, rho)
        return out

    dec_a = pgm([marg(s, 0) for s in code])
    dec_b = pgm([marg(s, 1) for s in code])

    def sqrtm(x):
        w, v = np.linalg.eigh(x)
        return (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T

    ka = len(dec_a.elements)
    kb = len(dec_b.elements)
    va = np.zeros((da**n * ka, da**n), dtype=complex)
    for f, el in enumerate(dec_a.elements):
        va[f::ka, :] = sqrtm(el)
    vb = np.zeros((db**n * kb, db**n), dtype=complex)
    for f, el in enumerate(dec_b.elements):
        vb[f::kb, :] = sqrtm(el)
    chain = np.kron(va, np.kron(vb, np.eye(n_code)))

    dims_out = (da**n, ka, db**n, kb, n_code)
    dim_tot = int(np.prod(dims_out))
    perm_mat = np.zeros((dim_tot, dim_tot))
    target_seq = min(
        t.members[0] for t in enumerate_types(n, dh) if t.counts == tuple(row["type"])
    )

    def axis_perm(seq):
        queues = {}
        for pos, letter in enumerate(seq):
            queues.setdefault(letter, []).append(pos)
        return [queues[letter].pop(0) for letter in target_seq]

    def permute_index(x, d, perm_axes):
        digits = []
        for _ in range(n):
            digits.append(x % d)
            x //= d
        digits = digits[::-1]
        return int("".join(str(digits[p]) for p in perm_axes), d)

    for xa in range(da**n):
        for fa in range(ka):
            pa = axis_perm(code[fa]) if fa < n_code else list(range(n))
            ya = permute_index(xa, da, pa)
            for xb in range(db**n):
                for fb in range(kb):
                    pb = axis_perm(code[fb]) if fb < n_code else list(range(n))
                    yb = permute_index(xb, db, pb)
                    for z in range(n_code):
                        src = np.ravel_multi_index((xa, fa, xb, fb, z), dims_out)
                        dst = np.ravel_multi_index((ya, fa, yb, fb, z), dims_out)
                        perm_mat[dst, src] = 1.0
    final = (perm_mat @ chain) @ zeta.ravel()

    res = np.array([1.0], dtype=complex)
    for letter in target_seq:
        q = math.sqrt(np.vdot(cond[letter], cond[letter]).real)
        res = np.kron(res, cond[letter] / q)
    res_arr = res.reshape([da, db] * n)
    order = [2 * c for c in range(n)] + [2 * c + 1 for c in range(n)]
    res_blocked = np.transpose(res_arr, order).reshape(da**n, db**n)
    target = np.zeros(dims_out, dtype=complex)
    for beta in range(n_code):
        target[:, beta, :, beta, beta] = res_blocked / math.sqrt(n_code)
    return abs(np.vdot(target.ravel(), final)) ** 2
