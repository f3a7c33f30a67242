"""Command-line front end: paper-scale numbers and protocol runs as reports.

Every subcommand emits a flat or nested report; ``--format json`` (or
``--json``) prints full double precision, ``--format csv`` the same values
flattened to key,value rows, and the default text mode rounds to five
decimal places.  Stochastic subcommands refuse to run without ``--seed``,
and identical invocations produce byte-identical output.

Exit codes: 0 on success, 2 on any validation problem (including unknown
flags), 3 when a run would exceed the memory cap (override with the
``EOALAB_MEM_CAP_MB`` environment variable).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import channels as ch
from . import distill as dp
from . import measures as ms
from . import qcore as qc
from . import states as st

__all__ = ["main", "builtin_catalog", "RunConfig"]

_PM = np.array([[1, 1], [1, -1]]) / math.sqrt(2)

_STOCHASTIC = {"eoa-opt", "distill", "ghz", "four-party", "fit-mixture", "coding-demo"}


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run's output."""

    subcommand: str
    source: str | None = None
    parties: tuple = ()
    n: int | None = None
    delta: float | None = None
    trials: int | None = None
    seed: int | None = None
    restarts: int | None = None
    fmt: str = "text"
    output: str | None = None
    options: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Builtin states and channels
# ---------------------------------------------------------------------------


def _state_aharonov2():
    alpha = st.make_aharonov()
    return qc.tensor(
        qc.relabel(alpha, {"A": "A1", "B": "B1", "C": "C1"}),
        qc.relabel(alpha, {"A": "A2", "B": "B2", "C": "C2"}),
    )


_STATE_BUILDERS = {
    "epr": (lambda args: st.make_epr(int(args[0]) if args else 2), "epr[:d]"),
    "ghz": (
        lambda args: st.make_ghz(
            int(args[0]) if args else 3, int(args[1]) if len(args) > 1 else 2
        ),
        "ghz[:m[:d]]",
    ),
    "w": (lambda args: st.make_w(), "w"),
    "aharonov": (lambda args: st.make_aharonov(), "aharonov"),
    "aharonov2": (lambda args: _state_aharonov2(), "aharonov2"),
    "upsilon": (lambda args: st.make_upsilon(float(args[0])), "upsilon:alpha2"),
    "example1-phi": (lambda args: st.make_example1_phi(), "example1-phi"),
}

_CHANNEL_BUILDERS = {
    "identity": (
        lambda args: ch.identity_channel(int(args[0]) if args else 2),
        "identity[:d]",
    ),
    "depolarizing": (
        lambda args: ch.depolarizing_channel(
            float(args[0]), int(args[1]) if len(args) > 1 else 2
        ),
        "depolarizing:p[:d]",
    ),
    "dephasing": (lambda args: ch.dephasing_channel(float(args[0])), "dephasing:p"),
    "amplitude-damping": (
        lambda args: ch.amplitude_damping_channel(float(args[0])),
        "amplitude-damping:gamma",
    ),
    "aharonov-choi": (lambda args: ch.aharonov_choi_channel(), "aharonov-choi"),
}


def builtin_catalog() -> dict:
    """Stable mapping of builtin names to (kind, spec-string)."""
    out = {}
    for name, (_, usage) in sorted(_STATE_BUILDERS.items()):
        out[name] = ("state", usage)
    for name, (_, usage) in sorted(_CHANNEL_BUILDERS.items()):
        out[name] = ("channel", usage)
    return out


def _resolve(spec: str, builders, loader):
    name = spec
    if name.startswith("builtin:"):
        name = name[len("builtin:") :]
    parts = name.split(":")
    if parts[0] in builders:
        build, _ = builders[parts[0]]
        return build(parts[1:])
    try:
        return loader(spec)
    except FileNotFoundError:
        raise ValueError(
            f"{spec!r} is neither a builtin name nor a readable file"
        ) from None


def load_state(spec: str) -> qc.PureState:
    return _resolve(spec, _STATE_BUILDERS, st.read_state_file)


def load_channel(spec: str) -> ch.QuantumChannel:
    return _resolve(spec, _CHANNEL_BUILDERS, ch.read_channel_file)


# ---------------------------------------------------------------------------
# Output formatting
# ---------------------------------------------------------------------------


def _flatten(doc, prefix=""):
    rows = []
    if isinstance(doc, dict):
        for key, value in doc.items():
            rows.extend(_flatten(value, f"{prefix}{key}." if prefix else f"{key}."))
    elif isinstance(doc, (list, tuple)):
        for idx, value in enumerate(doc):
            rows.extend(_flatten(value, f"{prefix}{idx}."))
    else:
        rows.append((prefix[:-1], doc))
    return rows


def _format_value(value, text_mode: bool) -> str:
    if isinstance(value, float):
        return f"{value:.5f}" if text_mode else repr(value)
    return json.dumps(value)


def render(doc: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(doc)
    if fmt == "csv":
        lines = ["key,value"]
        for key, value in _flatten(doc):
            lines.append(f"{key},{_format_value(value, text_mode=False)}")
        return "\n".join(lines)
    lines = []
    for key, value in _flatten(doc):
        lines.append(f"{key} = {_format_value(value, text_mode=True)}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Subcommand implementations
# ---------------------------------------------------------------------------


def _labels(text: str) -> list[str]:
    return [x for x in text.split(",") if x]


def _cmd_entropy(args) -> dict:
    psi = load_state(args.state)
    keep = _labels(args.keep)
    return {"entropy": qc.von_neumann_entropy(qc.pure_marginal(psi, keep))}


def _cmd_schmidt(args) -> dict:
    psi = load_state(args.state)
    spec = qc.schmidt(psi, _labels(args.cut))
    return {
        "spectrum": [float(x) for x in spec],
        "entropy": qc.entanglement_entropy(psi, _labels(args.cut)),
    }


def _cmd_eoa_bound(args) -> dict:
    psi = load_state(args.state)
    return {"upper_bound": ms.eoa_upper_bound(psi, _labels(args.a), _labels(args.b))}


def _cmd_eoa_opt(args) -> dict:
    psi = load_state(args.state)
    rep = ms.eoa_optimize(
        psi,
        _labels(args.a),
        _labels(args.b),
        _labels(args.helper),
        restarts=args.restarts,
        max_iter=args.max_iter,
        tol=args.tol,
        k=args.k,
        seed=args.seed,
    )
    return {
        "lower_bound": rep.lower_bound,
        "upper_bound": rep.upper_bound,
        "witness_members": len(rep.witness),
        "restarts": rep.trace.restarts,
        "iterations": rep.trace.iterations,
        "final_gradient_norm": rep.trace.final_gradient_norm,
    }


def _cmd_eof(args) -> dict:
    psi = load_state(args.state)
    rho = qc.pure_marginal(psi, _labels(args.pair))
    return {"concurrence": ms.concurrence(rho), "eof": ms.eof_2qubit(rho)}


def _cmd_mincut(args) -> dict:
    psi = load_state(args.state)
    value, subset = ms.mincut_entanglement(psi, _labels(args.a), _labels(args.b))
    return {"mincut": value, "argmin_helpers": list(subset)}


def _cmd_rates(args) -> dict:
    psi = load_state(args.state)
    helper = args.helper
    rest = [lab for lab in psi.labels if lab != helper]
    if len(rest) != 2:
        raise ValueError("rates needs a tripartite state")
    d = dict(psi.layout)[helper]
    if args.basis == "computational":
        basis = np.eye(d)
    elif args.basis == "plusminus":
        if d != 2:
            raise ValueError("plusminus basis needs a two-dimensional helper")
        basis = _PM
    else:
        raise ValueError(f"unknown basis {args.basis!r}")
    ensemble = st.ensemble_from_helper_basis(psi, helper, basis)
    chi, ebar = ms.ghz_epr_rates(psi, helper, ensemble)
    doc = {"chi": chi, "ebar": ebar, "upper_bound": chi + ebar}
    pair = qc.pure_marginal(psi, rest)
    if pair.dims == (2, 2):
        doc["oneway_ghz_bound"] = ms.oneway_bc_ghz_bound(
            psi, rest[0], rest[1], helper
        )
    return doc


def _cmd_distill(args) -> dict:
    psi = load_state(args.state)
    basis = None
    if args.basis == "plusminus":
        basis = _PM
    rep = dp.run_eoa_protocol(
        psi,
        args.a,
        args.b,
        args.helper,
        n=args.n,
        delta=args.delta,
        trials=args.trials,
        seed=args.seed,
        eta=args.eta,
        helper_basis=basis,
        n_jobs=args.parallel,
    )
    return rep.to_dict()


def _cmd_ghz(args) -> dict:
    psi = load_state(args.state)
    rep = dp.run_ghz_protocol(
        psi,
        args.a,
        args.b,
        args.helper,
        n=args.n,
        delta=args.delta,
        trials=args.trials,
        seed=args.seed,
        eta=args.eta,
    )
    return rep.to_dict()


def _cmd_four_party(args) -> dict:
    psi = load_state(args.state)
    rep = dp.disengage_fourth(
        psi,
        args.a,
        args.b,
        args.c,
        args.d,
        n=args.n,
        delta=args.delta,
        trials=args.trials,
        seed=args.seed,
        chain_eoa=args.chain,
        n_jobs=args.parallel,
    )
    return rep.to_dict()


def _cmd_capacity(args) -> dict:
    channel = load_channel(args.channel)
    res = ch.env_assisted_capacity(channel, tol=args.tol)
    return {
        "capacity": res.value,
        "converged": res.converged,
        "iterations": res.iterations,
        "gap": res.gap,
    }


def _cmd_fit_mixture(args) -> dict:
    channel = load_channel(args.channel)
    fit = ch.fit_unitary_mixture(
        channel,
        n_copies=args.n_copies,
        k_terms=args.k,
        restarts=args.restarts,
        seed=args.seed,
    )
    return {
        "distance": fit.distance,
        "metric": fit.metric,
        "weights": [float(w) for w in fit.weights],
        "n_copies": fit.n_copies,
        "per_restart": list(fit.per_restart),
    }


def _cmd_coding_demo(args) -> dict:
    channel = load_channel(args.channel)
    rep = ch.env_assisted_coding_demo(
        channel, n=args.n, seed=args.seed, delta=args.delta
    )
    return rep.to_dict()


# ---------------------------------------------------------------------------
# Worked examples
# ---------------------------------------------------------------------------


def _example_wstate() -> dict:
    w = st.make_w()
    upper = ms.eoa_upper_bound(w, "A", "B")
    eof = ms.eof_2qubit(qc.pure_marginal(w, ["A", "B"]))
    return {
        "upper_bound": upper,
        "eof": eof,
        "ghz_rate": upper - eof,
        "combined_ghz": upper - eof / 2,
    }


def _example_aharonov() -> dict:
    alpha = st.make_aharonov()
    ensemble = st.ensemble_from_helper_basis(alpha, "C", np.eye(3))
    return {
        "upper_bound": ms.eoa_upper_bound(alpha, "A", "B"),
        "single_copy_assistance": ms.avg_entanglement(ensemble, "A"),
        "formation": 1.0,
        "cost": 1.0,
    }


def _example_aharonov2() -> dict:
    phi = st.make_example1_phi()
    spec = qc.schmidt(phi, ["A1", "A2"])
    witness = ms.example1_witness()
    return {
        "schmidt": [float(x) for x in spec if x > 1e-12],
        "entropy": qc.entanglement_entropy(phi, ["A1", "A2"]),
        "witness_members": len(witness),
        "witness_avg_entanglement": ms.avg_entanglement(witness, ["A1", "A2"]),
        "two_copy_upper_bound": ms.eoa_upper_bound(
            _state_aharonov2(), ["A1", "A2"], ["B1", "B2"]
        ),
    }


def _example_upsilon() -> dict:
    grid = [round(0.05 * k, 2) for k in range(11)]
    rows = {
        "alpha2": [],
        "eof_bc": [],
        "achieved_ghz_rate": [],
        "achieved_epr_rate": [],
        "helper_b_ghz_rate": [],
        "helper_b_epr_rate": [],
        "hypothetical_ghz_rate": [],
        "hypothetical_epr_rate": [],
    }
    for alpha2 in grid:
        psi = st.make_upsilon(alpha2)
        eof = ms.eof_2qubit(qc.pure_marginal(psi, ["B", "C"]))
        rows["alpha2"].append(alpha2)
        rows["eof_bc"].append(eof)
        rows["achieved_ghz_rate"].append(ms.oneway_bc_ghz_bound(psi, "B", "C", "A"))
        rows["achieved_epr_rate"].append(eof)
        ens = st.ensemble_from_helper_basis(psi, "B", np.eye(2))
        chi, ebar = ms.ghz_epr_rates(psi, "B", ens)
        rows["helper_b_ghz_rate"].append(chi)
        rows["helper_b_epr_rate"].append(ebar)
        rows["hypothetical_ghz_rate"].append(qc.binary_entropy(alpha2))
        rows["hypothetical_epr_rate"].append(1 - qc.binary_entropy(alpha2))
    return rows


def _example_ghz() -> dict:
    ghz = st.make_ghz(3, 2)
    comp = st.ensemble_from_helper_basis(ghz, "C", np.eye(2))
    pm = st.ensemble_from_helper_basis(ghz, "C", _PM)
    chi_comp, _ = ms.ghz_epr_rates(ghz, "C", comp)
    _, ebar_pm = ms.ghz_epr_rates(ghz, "C", pm)
    return {
        "upper_bound": ms.eoa_upper_bound(ghz, "A", "B"),
        "ghz_rate_computational": chi_comp,
        "epr_rate_plusminus": ebar_pm,
    }


def _example_lost_found() -> dict:
    return {
        "identity_qubit": ch.env_assisted_capacity(ch.identity_channel(2)).value,
        "identity_qutrit": ch.env_assisted_capacity(ch.identity_channel(3)).value,
        "fully_depolarizing_qubit": ch.env_assisted_capacity(
            ch.depolarizing_channel(1.0)
        ).value,
        "amplitude_damping_half": ch.env_assisted_capacity(
            ch.amplitude_damping_channel(0.5)
        ).value,
    }


_EXAMPLES = {
    "aharonov": _example_aharonov,
    "aharonov2": _example_aharonov2,
    "upsilon": _example_upsilon,
    "wstate": _example_wstate,
    "ghz": _example_ghz,
    "lost-found": _example_lost_found,
}


def _cmd_example(args) -> dict:
    return _EXAMPLES[args.name]()


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eoalab",
        description="Assisted-entanglement measures, distillation protocols, "
        "and environment-assisted capacities.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument(
            "--format", choices=("text", "json", "csv"), default="text"
        )
        p.add_argument(
            "--json", dest="format", action="store_const", const="json",
            help="shorthand for --format json",
        )
        p.add_argument(
            "--csv", dest="format", action="store_const", const="csv",
            help="shorthand for --format csv",
        )
        p.add_argument("--output", default=None, help="write the report to a file")

    p = sub.add_parser("entropy", help="marginal entropy of a party subset")
    p.add_argument("--state", required=True)
    p.add_argument("--keep", required=True, help="comma-separated labels")
    common(p)

    p = sub.add_parser("schmidt", help="squared Schmidt coefficients across a cut")
    p.add_argument("--state", required=True)
    p.add_argument("--cut", required=True, help="labels on one side of the cut")
    common(p)

    p = sub.add_parser("eoa-bound", help="min marginal entropy (exact asymptotic rate)")
    p.add_argument("--state", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    common(p)

    p = sub.add_parser("eoa-opt", help="single-copy assisted-entanglement search")
    p.add_argument("--state", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--helper", required=True)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-7)
    p.add_argument("--k", type=int, default=2, help="ensemble richness factor")
    p.add_argument("--seed", type=int, default=None)
    common(p)

    p = sub.add_parser("eof", help="two-qubit formation entanglement of a marginal")
    p.add_argument("--state", required=True)
    p.add_argument("--pair", required=True, help="two labels, comma separated")
    common(p)

    p = sub.add_parser("mincut", help="minimum cut entropy over helper subsets")
    p.add_argument("--state", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    common(p)

    p = sub.add_parser("rates", help="simultaneous cat/EPR rates for an ensemble")
    p.add_argument("--state", required=True)
    p.add_argument("--helper", required=True)
    p.add_argument(
        "--basis", choices=("computational", "plusminus"), default="computational"
    )
    common(p)

    p = sub.add_parser("distill", help="sampled EPR distillation protocol")
    p.add_argument("--state", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--helper", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=0.2)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument(
        "--basis", choices=("computational", "plusminus"), default="computational"
    )
    common(p)

    p = sub.add_parser("ghz", help="coherent cat-state protocol")
    p.add_argument("--state", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--helper", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--eta", type=float, default=0.2)
    p.add_argument("--trials", type=int, default=20)
    p.add_argument("--seed", type=int, default=None)
    common(p)

    p = sub.add_parser("four-party", help="disengage the fourth party")
    p.add_argument("--state", required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--c", required=True, help="helper that stays")
    p.add_argument("--d", required=True, help="helper that measures and leaves")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--chain", action="store_true")
    p.add_argument("--parallel", type=int, default=1)
    common(p)

    p = sub.add_parser("capacity", help="environment-assisted quantum capacity")
    p.add_argument("--channel", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    common(p)

    p = sub.add_parser("fit-mixture", help="fit a mixture of unitaries to a channel")
    p.add_argument("--channel", required=True)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--n-copies", type=int, default=1)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=None)
    common(p)

    p = sub.add_parser("coding-demo", help="coherent information with measured environment")
    p.add_argument("--channel", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=None)
    common(p)

    p = sub.add_parser("example", help="regenerate a worked example's numbers")
    p.add_argument("name", choices=sorted(_EXAMPLES))
    common(p)

    return parser


_HANDLERS = {
    "entropy": _cmd_entropy,
    "schmidt": _cmd_schmidt,
    "eoa-bound": _cmd_eoa_bound,
    "eoa-opt": _cmd_eoa_opt,
    "eof": _cmd_eof,
    "mincut": _cmd_mincut,
    "rates": _cmd_rates,
    "distill": _cmd_distill,
    "ghz": _cmd_ghz,
    "four-party": _cmd_four_party,
    "capacity": _cmd_capacity,
    "fit-mixture": _cmd_fit_mixture,
    "coding-demo": _cmd_coding_demo,
    "example": _cmd_example,
}


def _config_of(args) -> RunConfig:
    parties = tuple(
        getattr(args, name) for name in ("a", "b", "c", "d", "helper", "keep", "cut", "pair")
        if getattr(args, name, None) is not None
    )
    known = {
        "subcommand", "state", "channel", "a", "b", "c", "d", "helper",
        "keep", "cut", "pair", "n", "delta", "trials", "seed", "restarts",
        "format", "output",
    }
    options = {
        key: value
        for key, value in sorted(vars(args).items())
        if key not in known and value is not None
    }
    return RunConfig(
        subcommand=args.subcommand,
        source=getattr(args, "state", None) or getattr(args, "channel", None),
        parties=parties,
        n=getattr(args, "n", None),
        delta=getattr(args, "delta", None),
        trials=getattr(args, "trials", None),
        seed=getattr(args, "seed", None),
        restarts=getattr(args, "restarts", None),
        fmt=args.format,
        output=args.output,
        options=options,
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _config_of(args)
        if cfg.subcommand in _STOCHASTIC and cfg.seed is None:
            raise ValueError(
                f"{cfg.subcommand!r} is stochastic: --seed is required "
                "for reproducibility"
            )
        doc = _HANDLERS[cfg.subcommand](args)
        text = render(doc, cfg.fmt)
        if args.output:
            with open(args.output, "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
        else:
            sys.stdout.write(text + "\n")
        return 0
    except qc.ResourceCapError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 3
    except (ValueError, OSError, KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
