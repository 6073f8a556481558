"""Command-line surface: planning, store/repair/read, figures, Monte Carlo.

Exit codes: 0 success, 2 infeasible parameters, 3 decode failure, 4 I/O.
Every command is deterministic given --seed; CSV output is byte-stable.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

import numpy as np

from ratematch import hostile_net as hn
from ratematch import m_layer as ml
from ratematch import product_matrix as pm
from ratematch import sharefile as sf
from ratematch import two_layer as tl
from ratematch.galois import FieldError, make_field
from ratematch.product_matrix import ParameterError
from ratematch.rs import DecodeFailure

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_DECODE = 3
EXIT_IO = 4

DEFAULT_FIELD = 1 << 16


def _sig9(value):
    """Numeric rendering at 9 significant digits (CSV contract)."""
    if isinstance(value, Fraction):
        value = float(value)
    if isinstance(value, float):
        return format(value, ".9g")
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fp:
        fp.write(",".join(header) + "\n")
        for row in rows:
            fp.write(",".join(_sig9(v) for v in row) + "\n")


# ---------------------------------------------------------------------------
# planning commands


def cmd_plan2(args):
    plan = tl.plan_parameters(args.n, args.malicious, args.p, args.p_det, args.b_f)
    delta = tl.storage_efficiency(plan)
    base = tl.baseline_efficiency(plan)
    print(f"n={plan.n} M={plan.M} P={_sig9(plan.P)} P_det={_sig9(plan.P_det)} B_F={plan.B_F}")
    print(f"d={plan.d} x={plan.x} (xd={plan.xd}) alpha={plan.alpha}")
    print(f"B_H={plan.B_H} B_L={plan.B_L}")
    print(f"theta_L={plan.theta_l} theta_H={plan.theta_h}")
    print(f"detection={_sig9(tl.detection_probability(plan.P, plan.theta_l, plan.M))}")
    print(f"delta_S={_sig9(delta)} delta_S_baseline={_sig9(base)} eta={_sig9(delta / base)}")
    return EXIT_OK


def cmd_planm(args):
    plan = ml.optimize_layers(args.n, args.layers, args.d0)
    delta = ml.error_correction_efficiency(args.n, args.layers, plan.d_tilde)
    base = ml.baseline_correction_efficiency(args.n, plan.d_tilde)
    print(f"n={plan.n} m={plan.m} d_0={plan.d_0}")
    print(f"d_i={list(plan.d_list)} (d~={plan.d_tilde}, all_even={plan.all_even})")
    print(f"t_i={list(plan.t_list)} worst_case_bound={_sig9(plan.worst_case_bound)}")
    print(f"delta_C={_sig9(delta)} delta_C_baseline={_sig9(base)} ratio={_sig9(delta / base)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# store / repair / read


def _load_input(path):
    with open(path, "rb") as fp:
        return fp.read()


def _make_store(args, payload):
    fld = make_field(args.field)
    data = sf.bytes_to_symbols(fld, payload)
    if args.scheme == hn.TWO_LAYER:
        plan = tl.plan_parameters(args.n, args.malicious, args.p, args.p_det, len(data))
        enc = tl.build_plan_encoder(plan, fld)
        return hn.store_two_layer(plan, enc, data, seed=args.seed)
    enc = pm.build_encoder(pm.msr_params(args.n, args.d, fld))
    if args.scheme == hn.M_LAYER:
        return hn.store_m_layer(enc, data, m=args.layers, rho=args.rho)
    return hn.store_plain(enc, data)


def cmd_store(args):
    payload = _load_input(args.input)
    store = _make_store(args, payload)
    paths = sf.write_store(args.out, store, byte_len=len(payload))
    print(
        f"stored {len(payload)} bytes as {store.blocks} blocks "
        f"({store.scheme}) across {len(paths)} nodes in {args.out}"
    )
    return EXIT_OK


def _parse_adversary(args, n):
    if args.compromised:
        nodes = frozenset(int(tok) for tok in args.compromised.split(","))
    elif args.tau:
        rng = np.random.default_rng([args.adv_seed, 0xA])
        nodes = frozenset(int(i) for i in rng.choice(n, size=args.tau, replace=False))
    else:
        return hn.honest_adversary(args.adv_seed)
    return hn.AdversaryConfig(
        compromised=nodes,
        tamper_probability=args.tamper_prob,
        seed=args.adv_seed,
        strategy=args.strategy,
        knows_layout=args.strategy != "uniform",
    )


def _finish_net(args, net, report):
    print(report.summary())
    if args.trace:
        net.export_trace(args.trace)
    return EXIT_OK if report.success else EXIT_DECODE


def cmd_repair(args):
    store, byte_len = sf.load_store(args.dir)
    adversary = _parse_adversary(args, store.n)
    net = hn.spawn_network(store, adversary)
    report = hn.fail_and_repair(net, args.node)
    if report.success:
        # success is oracle-checked, so the regenerated rows equal these
        sf.write_node(args.dir, store, byte_len, args.node, store.shares[args.node])
    return _finish_net(args, net, report)


def cmd_read(args):
    store, byte_len = sf.load_store(args.dir)
    adversary = _parse_adversary(args, store.n)
    net = hn.spawn_network(store, adversary)
    report, data = hn.read_file(net)
    if data is not None:
        fld = store.enc.params.fld
        with open(args.out, "wb") as fp:
            fp.write(sf.symbols_to_bytes(fld, data, byte_len))
    return _finish_net(args, net, report)


# ---------------------------------------------------------------------------
# figures


_P_DET_SWEEP = (0.9, 0.99, 0.999, 0.9999, 0.99999, 0.999999)


def cmd_figures(args):
    which = args.which
    if which == "fig1":
        rows = []
        for p_det in _P_DET_SWEEP:
            plan = tl.plan_parameters(args.n, args.malicious, args.p, p_det, args.b_f)
            rows.append((p_det, plan.theta_l, plan.theta_h))
        _write_csv(args.out, ("p_det", "theta_l", "theta_h"), rows)
    elif which == "fig2":
        rows = []
        for p_det in _P_DET_SWEEP:
            plan = tl.plan_parameters(args.n, args.malicious, args.p, p_det, args.b_f)
            rows.append((p_det, tl.efficiency_ratio(plan), args.b_f))
        _write_csv(args.out, ("p_det", "eta", "b_f"), rows)
    elif which == "fig3":
        rows = [
            (dt, ml.error_correction_efficiency(args.n, 3, dt),
             ml.baseline_correction_efficiency(args.n, dt))
            for dt in range(1, args.n - 1)
        ]
        _write_csv(args.out, ("d_tilde", "delta_c", "delta_c_baseline"), rows)
    elif which == "fig6":
        rows = []
        for m in range(2, 17):
            plan = ml.optimize_layers(args.n, m, args.d0)
            rows.append((
                m,
                ml.error_correction_efficiency(args.n, m, plan.d_tilde),
                ml.baseline_correction_efficiency(args.n, plan.d_tilde),
            ))
        _write_csv(args.out, ("m", "delta_c", "delta_c_baseline"), rows)
    elif which == "fig7":
        rows = [
            (m, ml.error_correction_efficiency(args.n, m, 5),
             ml.error_correction_efficiency(args.n, m, 10))
            for m in range(2, 17)
        ]
        _write_csv(args.out, ("m", "delta_c_d5", "delta_c_d10"), rows)
    else:
        raise ParameterError(f"unknown figure id {which!r}")
    print(f"wrote {which} to {args.out}")
    return EXIT_OK


def cmd_montecarlo(args):
    if args.trials < 1:
        raise ParameterError("need at least one trial")
    plan = tl.plan_parameters(args.n, args.malicious, args.p, args.p_det, args.b_f)
    fld = make_field(args.field)
    result = hn.monte_carlo_detection(plan, args.trials, args.seed, fld)
    print(result.summary())
    sigma = (plan.P_det * (1 - plan.P_det) / args.trials) ** 0.5
    print(
        f"bound check: empirical {_sig9(result.detection_rate)} vs "
        f"required-3sigma {_sig9(plan.P_det - 3 * sigma)}"
    )
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument wiring


def _add_adversary_flags(sub):
    sub.add_argument("--compromised", default="", help="comma-separated node ids")
    sub.add_argument("--tau", type=int, default=0, help="draw this many compromised nodes")
    sub.add_argument("--tamper-prob", type=float, default=1.0)
    sub.add_argument("--adv-seed", type=int, default=0)
    sub.add_argument("--strategy", choices=hn.STRATEGIES, default="uniform")
    sub.add_argument("--trace", default="", help="write an event trace to this path")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ratematch",
        description="Rate-matched MSR regenerating codes and a hostile-network simulator",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p2 = subs.add_parser("plan2", help="optimize a 2-layer plan")
    p2.add_argument("--n", type=int, required=True)
    p2.add_argument("--malicious", "-M", type=int, required=True)
    p2.add_argument("--p", type=float, default=0.2)
    p2.add_argument("--p-det", type=float, default=0.999999)
    p2.add_argument("--b-f", type=lambda s: int(float(s)), default=int(14000e6))
    p2.set_defaults(func=cmd_plan2)

    pme = subs.add_parser("planm", help="optimize an m-layer plan")
    pme.add_argument("--n", type=int, required=True)
    pme.add_argument("--layers", "-m", type=int, required=True)
    pme.add_argument("--d0", type=int, required=True)
    pme.set_defaults(func=cmd_planm)

    st = subs.add_parser("store", help="encode a file into a store directory")
    st.add_argument("input")
    st.add_argument("--out", required=True)
    st.add_argument("--scheme", choices=(hn.TWO_LAYER, hn.M_LAYER, hn.PLAIN),
                    default=hn.TWO_LAYER)
    st.add_argument("--field", type=lambda s: int(float(s)), default=DEFAULT_FIELD)
    st.add_argument("--n", type=int, default=10)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--malicious", "-M", type=int, default=3)
    st.add_argument("--p", type=float, default=0.2)
    st.add_argument("--p-det", type=float, default=0.99)
    st.add_argument("--d", type=int, default=6, help="repair degree (m_layer/plain)")
    st.add_argument("--layers", "-m", type=int, default=3, help="m (m_layer)")
    st.add_argument("--rho", type=int, default=None, help="lattice columns (m_layer)")
    st.set_defaults(func=cmd_store)

    rp = subs.add_parser("repair", help="fail and regenerate one node")
    rp.add_argument("dir")
    rp.add_argument("--node", "-z", type=int, required=True)
    _add_adversary_flags(rp)
    rp.set_defaults(func=cmd_repair)

    rd = subs.add_parser("read", help="reconstruct the file from a store")
    rd.add_argument("dir")
    rd.add_argument("--out", required=True)
    _add_adversary_flags(rd)
    rd.set_defaults(func=cmd_read)

    fg = subs.add_parser("figures", help="emit evaluation-series CSVs")
    fg.add_argument("which", choices=("fig1", "fig2", "fig3", "fig6", "fig7"))
    fg.add_argument("--out", required=True)
    fg.add_argument("--n", type=int, default=30)
    fg.add_argument("--malicious", "-M", type=int, default=11)
    fg.add_argument("--p", type=float, default=0.2)
    fg.add_argument("--b-f", type=lambda s: int(float(s)), default=int(14000e6))
    fg.add_argument("--d0", type=int, default=50)
    fg.set_defaults(func=cmd_figures)

    mc = subs.add_parser("montecarlo", help="empirical detection vs the closed form")
    mc.add_argument("--n", type=int, default=10)
    mc.add_argument("--malicious", "-M", type=int, default=3)
    mc.add_argument("--p", type=float, default=0.2)
    mc.add_argument("--p-det", type=float, default=0.99)
    mc.add_argument("--b-f", type=lambda s: int(float(s)), default=200)
    mc.add_argument("--trials", type=int, default=10_000)
    mc.add_argument("--seed", type=int, default=0)
    mc.add_argument("--field", type=lambda s: int(float(s)), default=23)
    mc.set_defaults(func=cmd_montecarlo)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except sf.StoreFormatError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ParameterError, FieldError, ValueError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except DecodeFailure as exc:
        print(f"decode failure: {exc}", file=sys.stderr)
        return EXIT_DECODE
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
