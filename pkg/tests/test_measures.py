"""Entanglement measures, bounds, and the ensemble search."""

import math

import numpy as np
import pytest

from eoalab.qcore import (
    DensityOperator,
    PureState,
    binary_entropy,
    pure_marginal,
    relabel,
    tensor,
    trace_distance,
    von_neumann_entropy,
)
from eoalab.measures import (
    _conditional_rows,
    avg_entanglement,
    concurrence,
    eoa_optimize,
    eoa_upper_bound,
    eof_2qubit,
    eof_upper,
    example1_witness,
    ghz_epr_rates,
    holevo_chi,
    mincut_entanglement,
    oneway_bc_ghz_bound,
    weyl_unitaries,
)
from eoalab.states import (
    Ensemble,
    ensemble_average,
    ensemble_from_helper_basis,
    haar_unitary,
    make_aharonov,
    make_epr,
    make_ghz,
    make_upsilon,
    make_w,
    purify,
)

PM = np.array([[1, 1], [1, -1]]) / math.sqrt(2)

W_EOF = 0.5500477595827575  # H2((1 - sqrt(5/9)) / 2)


def random_tripartite(rng, dims=(2, 2, 2), labels=("A", "B", "C")):
    v = rng.normal(size=int(np.prod(dims))) + 1j * rng.normal(size=int(np.prod(dims)))
    v /= np.linalg.norm(v)
    return PureState(v, tuple(zip(labels, dims)))


def doubled_aharonov():
    alpha = make_aharonov()
    return tensor(
        relabel(alpha, {"A": "A1", "B": "B1", "C": "C1"}),
        relabel(alpha, {"A": "A2", "B": "B2", "C": "C2"}),
    )


class TestHolevoChi:
    def test_ghz_computational(self):
        e = ensemble_from_helper_basis(make_ghz(3, 2), "C", np.eye(2))
        assert holevo_chi(e, "A") == pytest.approx(1.0, abs=1e-12)

    def test_identical_states(self):
        epr = make_epr(2)
        e = Ensemble(((0.5, epr), (0.5, epr)))
        assert holevo_chi(e, "A") == pytest.approx(0.0, abs=1e-12)

    def test_upsilon_helper_a_marginal_b(self):
        # Both Bell conditionals have maximally mixed B marginals.
        e = ensemble_from_helper_basis(make_upsilon(0.3), "A", np.eye(2))
        assert holevo_chi(e, "B") == pytest.approx(0.0, abs=1e-10)

    def test_bounded_by_shannon_entropy(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            psi = random_tripartite(rng, (2, 2, 3))
            e = ensemble_from_helper_basis(psi, "C", haar_unitary(3, rng))
            hq = -sum(q * math.log2(q) for q, _ in e.entries)
            chi = holevo_chi(e, "A")
            assert -1e-10 <= chi <= hq + 1e-9

    def test_monotone_under_partial_trace(self):
        # chi for marginal A never exceeds chi for marginal (A, C).
        rng = np.random.default_rng(4)
        for _ in range(10):
            v = rng.normal(size=24) + 1j * rng.normal(size=24)
            v /= np.linalg.norm(v)
            psi = PureState(v, (("A", 2), ("B", 2), ("C", 2), ("D", 3)))
            e = ensemble_from_helper_basis(psi, "D", haar_unitary(3, rng))
            assert holevo_chi(e, "A") <= holevo_chi(e, ["A", "C"]) + 1e-9


class TestAvgEntanglement:
    def test_ghz_ensembles(self):
        ghz = make_ghz(3, 2)
        comp = ensemble_from_helper_basis(ghz, "C", np.eye(2))
        pm = ensemble_from_helper_basis(ghz, "C", PM)
        assert avg_entanglement(comp, "A") == pytest.approx(0.0, abs=1e-12)
        assert avg_entanglement(pm, "A") == pytest.approx(1.0, abs=1e-12)

    def test_upsilon_bc_pair(self):
        e = ensemble_from_helper_basis(make_upsilon(0.3), "A", np.eye(2))
        assert avg_entanglement(e, "B") == pytest.approx(1.0, abs=1e-12)


class TestGhzEprRates:
    def test_upsilon_helper_b_computational(self):
        for alpha2 in (0.1, 0.3, 0.5):
            ups = make_upsilon(alpha2)
            e = ensemble_from_helper_basis(ups, "B", np.eye(2))
            chi, ebar = ghz_epr_rates(ups, "B", e)
            assert chi == pytest.approx(binary_entropy(alpha2), abs=1e-9)
            assert ebar == pytest.approx(0.0, abs=1e-9)

    def test_upsilon_helper_a_optimal(self):
        alpha2 = 0.3
        ups = make_upsilon(alpha2)
        a, b = math.sqrt(alpha2), math.sqrt(1 - alpha2)
        _, witness, _ = eof_upper(ups, "B", "C", "A", restarts=6, seed=3)
        chi, ebar = ghz_epr_rates(ups, "A", witness)
        assert ebar == pytest.approx(binary_entropy(0.5 - a * b), abs=1e-3)
        assert chi == pytest.approx(1 - binary_entropy(0.5 - a * b), abs=1e-3)

    def test_w_helper_c_formation_optimal(self):
        w = make_w()
        _, witness, _ = eof_upper(w, "A", "B", "C", restarts=6, seed=3)
        chi, ebar = ghz_epr_rates(w, "C", witness)
        assert ebar == pytest.approx(0.550, abs=1e-3)
        assert chi == pytest.approx(0.368, abs=1e-3)

    def test_sum_rule_exact(self):
        rng = np.random.default_rng(8)
        psi = random_tripartite(rng)
        e = ensemble_from_helper_basis(psi, "C", haar_unitary(2, rng))
        chi, ebar = ghz_epr_rates(psi, "C", e)
        assert chi + ebar == pytest.approx(eoa_upper_bound(psi, "A", "B"), abs=1e-10)

    def test_inconsistent_ensemble_rejected(self):
        ghz = make_ghz(3, 2)
        wrong = ensemble_from_helper_basis(make_w(), "C", np.eye(2))
        with pytest.raises(ValueError):
            ghz_epr_rates(ghz, "C", wrong)


class TestUpperBound:
    def test_aharonov(self):
        assert eoa_upper_bound(make_aharonov(), "A", "B") == pytest.approx(
            math.log2(3), abs=1e-12
        )

    def test_w(self):
        assert eoa_upper_bound(make_w(), "A", "B") == pytest.approx(0.91830, abs=1e-5)

    def test_product_with_pure_side_is_zero(self):
        rho_b = np.diag([0.7, 0.3])
        mat = np.kron(np.diag([1.0, 0.0]), rho_b)
        rho = DensityOperator(mat, (("A", 2), ("B", 2)))
        psi = purify(rho, helper_label="C")
        assert eoa_upper_bound(psi, "A", "B") == pytest.approx(0.0, abs=1e-10)


class TestEoAOptimize:
    def test_pure_epr_input(self):
        psi = purify(make_epr(2).density(), helper_label="C")
        rep = eoa_optimize(psi, "A", "B", "C", restarts=2, seed=0)
        assert rep.lower_bound == pytest.approx(1.0, abs=1e-9)

    def test_aharonov_single_copy(self):
        rep = eoa_optimize(make_aharonov(), "A", "B", "C", restarts=5, seed=1)
        assert 0.999 <= rep.lower_bound <= 1 + 1e-9
        assert rep.upper_bound == pytest.approx(math.log2(3), abs=1e-12)

    def test_doubled_aharonov_with_witness_start(self):
        # Warm start from the explicit 81-member witness; rotations only
        # improve, so the certified value stays at or above 2.5.
        a2 = doubled_aharonov()
        witness = example1_witness()
        cond, _, _, _ = _conditional_rows(
            a2, ("A1", "A2"), ("B1", "B2"), ("C1", "C2")
        )
        v = np.array([math.sqrt(q) * psi.amplitudes for q, psi in witness.entries])
        w0 = v @ np.linalg.pinv(cond)
        rep = eoa_optimize(
            a2,
            ("A1", "A2"),
            ("B1", "B2"),
            ("C1", "C2"),
            restarts=1,
            max_iter=1,
            seed=1,
            initial=[w0],
        )
        assert rep.lower_bound >= 2.5 - 1e-3
        assert rep.upper_bound == pytest.approx(2 * math.log2(3), abs=1e-9)

    def test_witness_reconstructs_reduced_state(self):
        rng = np.random.default_rng(12)
        psi = random_tripartite(rng, (2, 2, 3))
        rep = eoa_optimize(psi, "A", "B", "C", restarts=2, seed=5)
        mix = ensemble_average(rep.witness)
        rho = pure_marginal(psi, ["A", "B"])
        assert trace_distance(mix, rho) <= 1e-8

    def test_lower_never_exceeds_upper(self):
        rng = np.random.default_rng(0)
        for i in range(100):
            d = int(rng.integers(2, 5))
            v = rng.normal(size=4 * d) + 1j * rng.normal(size=4 * d)
            v /= np.linalg.norm(v)
            psi = PureState(v, (("A", 2), ("B", 2), ("C", d)))
            rep = eoa_optimize(psi, "A", "B", "C", restarts=2, max_iter=40, seed=i)
            assert rep.lower_bound <= rep.upper_bound + 1e-9

    def test_deterministic_given_seed(self):
        psi = make_w()
        r1 = eoa_optimize(psi, "A", "B", "C", restarts=3, seed=7)
        r2 = eoa_optimize(psi, "A", "B", "C", restarts=3, seed=7)
        assert r1.lower_bound == r2.lower_bound
        assert r1.trace.per_restart == r2.trace.per_restart


class TestWootters:
    def test_bell_state(self):
        rho = make_epr(2).density()
        assert concurrence(rho) == pytest.approx(1.0, abs=1e-10)
        assert eof_2qubit(rho) == pytest.approx(1.0, abs=1e-10)

    def test_maximally_mixed(self):
        rho = DensityOperator(np.eye(4) / 4, (("A", 2), ("B", 2)))
        assert concurrence(rho) == pytest.approx(0.0, abs=1e-10)
        assert eof_2qubit(rho) == pytest.approx(0.0, abs=1e-10)

    def test_w_reduced_state(self):
        rho = pure_marginal(make_w(), ["A", "B"])
        assert eof_2qubit(rho) == pytest.approx(W_EOF, abs=1e-12)
        assert eof_2qubit(rho) == pytest.approx(0.550, abs=1e-3)

    def test_upsilon_family_closed_form(self):
        for alpha2 in np.arange(0.0, 0.501, 0.05):
            a = math.sqrt(alpha2)
            b = math.sqrt(1 - alpha2)
            rho = pure_marginal(make_upsilon(alpha2), ["B", "C"])
            assert eof_2qubit(rho) == pytest.approx(
                binary_entropy(0.5 - a * b), abs=1e-6
            )

    def test_dimension_check(self):
        with pytest.raises(ValueError):
            concurrence(DensityOperator(np.eye(9) / 9, (("A", 3), ("B", 3))))


class TestMincut:
    def test_four_party_ghz(self):
        value, subset = mincut_entanglement(make_ghz(4, 2), "A", "B")
        assert value == pytest.approx(1.0, abs=1e-12)
        assert subset == ()

    def test_epr_chain_cuts_to_zero(self):
        eprs = tensor(
            relabel(make_epr(2), {"B": "C1"}),
            relabel(make_epr(2), {"A": "C2", "B": "B"}),
        )
        value, subset = mincut_entanglement(eprs, "A", "B")
        assert value == pytest.approx(0.0, abs=1e-10)
        assert subset == ("C1",)

    def test_three_party_reduces_to_upper_bound(self):
        value, _ = mincut_entanglement(make_w(), "A", "B")
        assert value == pytest.approx(eoa_upper_bound(make_w(), "A", "B"), abs=1e-12)
        assert value == pytest.approx(0.91830, abs=1e-5)

    def test_symmetry_in_endpoints(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            v = rng.normal(size=16) + 1j * rng.normal(size=16)
            v /= np.linalg.norm(v)
            psi = PureState(v, (("A", 2), ("B", 2), ("C", 2), ("D", 2)))
            va, _ = mincut_entanglement(psi, "A", "B")
            vb, _ = mincut_entanglement(psi, "B", "A")
            assert va == pytest.approx(vb, abs=1e-10)


class TestOnewayBound:
    def test_upsilon_helper_a(self):
        for alpha2 in (0.1, 0.3, 0.5):
            a = math.sqrt(alpha2)
            b = math.sqrt(1 - alpha2)
            bound = oneway_bc_ghz_bound(make_upsilon(alpha2), "B", "C", "A")
            assert bound == pytest.approx(1 - binary_entropy(0.5 - a * b), abs=1e-6)

    def test_ghz_helper_c(self):
        # tr_C of a GHZ state is separable, so nothing is subtracted.
        assert oneway_bc_ghz_bound(make_ghz(3, 2), "A", "B", "C") == pytest.approx(
            1.0, abs=1e-10
        )

    def test_w_helper_c(self):
        bound = oneway_bc_ghz_bound(make_w(), "A", "B", "C")
        assert bound == pytest.approx(0.368, abs=1e-3)

    def test_optimizer_proxy_matches_wootters(self):
        w = make_w()
        direct = oneway_bc_ghz_bound(w, "A", "B", "C", formation_proxy="wootters")
        numeric = oneway_bc_ghz_bound(
            w, "A", "B", "C", formation_proxy="optimize", restarts=6, seed=3
        )
        assert numeric == pytest.approx(direct, abs=1e-3)


class TestExample1Witness:
    def test_weyl_one_design(self):
        for d in (2, 3):
            ws = weyl_unitaries(d)
            rng = np.random.default_rng(d)
            m = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
            twirl = sum(u @ m @ u.conj().T for u in ws) / len(ws)
            np.testing.assert_allclose(
                twirl, np.trace(m) * np.eye(d) / d, atol=1e-12
            )

    def test_witness_members_and_mixture(self):
        witness = example1_witness()
        assert len(witness) == 81
        assert avg_entanglement(witness, ["A1", "A2"]) == pytest.approx(2.5, abs=1e-9)
        mix = ensemble_average(witness)
        a2 = doubled_aharonov()
        marg = pure_marginal(a2, ["A1", "B1", "A2", "B2"])
        # reorder the comparison marginal from (A1,B1,A2,B2) to (A1,A2,B1,B2)
        mm = marg.matrix.reshape((3,) * 8)
        mm = np.transpose(mm, (0, 2, 1, 3, 4, 6, 5, 7)).reshape(81, 81)
        assert np.max(np.abs(mix.matrix - mm)) <= 1e-12
