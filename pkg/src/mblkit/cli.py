"""Command-line interface.

Subcommands:
  run       execute a disorder ensemble, write records/curves CSVs (+ figures)
  profiles  pair-entanglement decay profiles with fitted slopes
  collapse  finite-size-scaling grid search on existing curves CSVs
  ge-hist   compare geometric-entanglement distributions (ED vs SIMPS)
  validate  run the built-in analytic fixture suite

Any key of the run configuration can live in a `key = value` config file
(--config) and every key is also exposed as a same-named flag; flags win
over the file.  Exit codes: 0 success, 1 configuration error, 2 runtime
failure (including a failed validate suite).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from .runner import (
    ConfigError,
    RunConfig,
    config_field_types,
    emit_profiles,
    load_config,
    read_records_csv,
    run_ensemble,
    _parse_value,
)
from .scaling import (
    CollapseParams,
    derivative_curves_from_disorder,
    grid_search_collapse,
    read_curves_csv,
)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a key = value config file")
    parser.add_argument("--seed", help="master seed (alias for master_seed)")
    parser.add_argument("--out-dir", help="output directory")
    parser.add_argument("--workers", help="worker process count")
    parser.add_argument("--no-plots", action="store_true",
                        help="skip figure rendering")
    for name in config_field_types():
        flag = "--" + name.replace("_", "-")
        if flag not in ("--out-dir", "--workers"):
            parser.add_argument(flag, dest=f"cfg_{name}", metavar="V",
                                help=argparse.SUPPRESS)


def _build_config(args) -> RunConfig:
    cfg = RunConfig()
    if args.config:
        cfg = load_config(args.config, base=cfg)
    types = config_field_types()
    overrides = {}
    for name, kind in types.items():
        raw = getattr(args, f"cfg_{name}", None)
        if raw is not None:
            overrides[name] = _parse_value(name, raw, kind)
    if args.seed is not None:
        overrides["master_seed"] = _parse_value("master_seed", args.seed, int)
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    if args.workers is not None:
        overrides["workers"] = _parse_value("workers", args.workers, int)
    cfg = replace(cfg, **overrides)
    cfg.validate()
    return cfg


def _parse_grid(spec: str) -> dict:
    grids = {}
    for part in spec.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad grid component {part!r}")
        key, _, rng = part.partition("=")
        key = key.strip().lower()
        if key not in ("a", "b", "wc"):
            raise ConfigError(f"unknown grid parameter {key!r}")
        pieces = rng.split(":")
        try:
            if len(pieces) == 1:
                grids[key] = np.array([float(pieces[0])])
            elif len(pieces) == 3:
                lo, hi, step = (float(p) for p in pieces)
                n = int(np.floor((hi - lo) / step + 0.5)) + 1
                grids[key] = lo + step * np.arange(max(n, 1))
            else:
                raise ValueError("expected value or lo:hi:step")
        except ValueError as exc:
            raise ConfigError(f"bad grid range {rng!r} ({exc})") from exc
    for key in ("a", "b", "wc"):
        if key not in grids:
            raise ConfigError(f"grid is missing parameter {key!r}")
    return grids


def _cmd_run(args) -> int:
    cfg = _build_config(args)
    out = run_ensemble(cfg)
    print(f"wrote {out['records']} ({out['n_records']} records, "
          f"{out['n_accepted']} accepted)")
    print(f"wrote {out['curves']}")
    if not args.no_plots:
        from .plots import plot_curves
        from .scaling import read_curves_csv as _read

        fig = os.path.join(cfg.out_dir, "curves.png")
        plot_curves(_read(out["curves"]), fig)
        print(f"wrote {fig}")
    return 0


def _cmd_profiles(args) -> int:
    cfg = _build_config(args)
    path = emit_profiles(cfg)
    print(f"wrote {path}")
    if not args.no_plots:
        from .plots import plot_profiles

        fig = os.path.join(cfg.out_dir, "profiles.png")
        plot_profiles(path, fig)
        print(f"wrote {fig}")
    return 0


def _cmd_collapse(args) -> int:
    curves = []
    for path in args.curves:
        curves.extend(read_curves_csv(path))
    chosen = [c for c in curves if c.indicator == args.indicator]
    if len({c.length for c in chosen}) < 2:
        raise ConfigError(
            f"need curves for at least two sizes with indicator {args.indicator!r}"
        )
    grids = _parse_grid(args.grid)
    deriv = derivative_curves_from_disorder(
        chosen, order=args.derivative_order, m_max=args.max_degree
    )
    ranked = grid_search_collapse(
        deriv, grids["a"], grids["b"], grids["wc"],
        derivative_order=args.derivative_order,
    )
    print(f"{'rank':>4} {'a':>8} {'b':>8} {'W_c':>8} {'quality':>12}")
    for rank, (params, quality) in enumerate(ranked[: args.top], start=1):
        print(f"{rank:>4} {params.exponent_a:>8.3f} {params.exponent_b:>8.3f} "
              f"{params.w_c:>8.3f} {quality:>12.6g}")
    if not args.no_plots:
        from .plots import plot_collapse

        out_dir = args.out_dir or "."
        os.makedirs(out_dir, exist_ok=True)
        fig = os.path.join(out_dir, f"collapse_{args.indicator}.png")
        plot_collapse(deriv, ranked[0][0], fig)
        print(f"wrote {fig}")
    return 0


def _cmd_ge_hist(args) -> int:
    from scipy.stats import ks_2samp

    records = []
    for path in args.records:
        records.extend(read_records_csv(path))
    groups = {}
    for rec in records:
        if rec.accepted and rec.s_g is not None:
            groups.setdefault(rec.method, []).append(rec.s_g)
    if set(groups) >= {"ed", "simps"}:
        a, b = groups["ed"], groups["simps"]
        labels = [f"ed (n={len(a)})", f"simps (n={len(b)})"]
    elif len(args.records) == 2:
        per_file = []
        for path in args.records:
            vals = [r.s_g for r in read_records_csv(path)
                    if r.accepted and r.s_g is not None]
            per_file.append(vals)
        a, b = per_file
        labels = [os.path.basename(p) for p in args.records]
    else:
        raise ConfigError(
            "need records covering both methods, or exactly two records files"
        )
    if not a or not b:
        raise ConfigError("one of the samples is empty")
    stat = ks_2samp(a, b)
    print(f"n_a={len(a)} n_b={len(b)} ks_statistic={stat.statistic:.6f} "
          f"p_value={stat.pvalue:.4g}")
    if not args.no_plots:
        from .plots import plot_ge_histograms

        out_dir = args.out_dir or "."
        os.makedirs(out_dir, exist_ok=True)
        fig = os.path.join(out_dir, "ge_hist.png")
        plot_ge_histograms([a, b], labels, fig)
        print(f"wrote {fig}")
    return 0


def _cmd_validate(args) -> int:
    failures = 0
    for name, fn in _validation_checks():
        try:
            fn()
            print(f"PASS {name}")
        except Exception as exc:  # noqa: BLE001 - report and continue
            failures += 1
            print(f"FAIL {name}: {exc}")
    if failures:
        print(f"{failures} check(s) failed")
        return 2
    print("all checks passed")
    return 0


def _validation_checks():
    import mblkit as mk
    from .entanglement import TwoSiteDensityMatrix
    from .mps import mps_from_dense

    def two_site_spectra():
        for spin, expected in (
            ("half", [-1.5, 0.5, 0.5, 0.5]),
            ("one", [-1.0] + [-0.5] * 3 + [0.5] * 5),
        ):
            spec = mk.ChainSpec(length=2, local_spin=spin, seed=1)
            ham = mk.build_dense_hamiltonian(mk.sample_disorder(spec))
            got = np.linalg.eigvalsh(ham.entries)
            assert np.allclose(got, expected, atol=1e-12), (spin, got)

    def mpo_matches_dense():
        spec = mk.ChainSpec(length=4, local_spin="half", disorder_strength=5.0,
                            seed=3)
        r = mk.sample_disorder(spec)
        dense = mk.build_dense_hamiltonian(r).entries
        err = np.max(np.abs(dense - mk.build_hamiltonian_mpo(r).to_dense()))
        assert err < 1e-12, err

    def two_qubit_measures():
        bell = np.zeros(4)
        bell[0] = bell[3] = 1 / np.sqrt(2)
        rho = TwoSiteDensityMatrix(np.outer(bell, bell))
        assert abs(mk.concurrence(rho) - 1) < 1e-10
        assert abs(mk.negativity(rho) - 0.5) < 1e-10
        werner = 0.5 * np.outer(bell, bell) + 0.5 * np.eye(4) / 4
        rho = TwoSiteDensityMatrix(werner)
        assert abs(mk.concurrence(rho) - 0.25) < 1e-10
        assert abs(mk.negativity(rho) - 0.125) < 1e-10

    def geometric_entanglement_landmarks():
        ghz = np.zeros(8)
        ghz[0] = ghz[7] = 1 / np.sqrt(2)
        lam, _ = mk.geometric_entanglement_dense(ghz, restarts=40, seed=2)
        assert abs(lam - 0.5) < 1e-8, lam
        wst = np.zeros(8)
        wst[1] = wst[2] = wst[4] = 1 / np.sqrt(3)
        lam, _ = mk.geometric_entanglement_dense(wst, restarts=40, seed=2)
        assert abs(lam - 4 / 9) < 1e-8, lam

    def compress_ghz():
        ghz = np.zeros(2**6)
        ghz[0] = ghz[-1] = 1 / np.sqrt(2)
        psi = mps_from_dense(ghz, 6, 2)
        trunc, _ = mk.compress(psi, 1)
        lam = abs(mk.overlap(trunc, psi)) ** 2
        assert abs(lam - 0.5) < 1e-10, lam

    def collapse_fixture():
        grid = np.linspace(-2, 2, 41)
        curves = {
            length: (grid / length**0.5 + 3.7, length**0.25 * np.exp(-grid**2))
            for length in (8, 10, 12)
        }
        params = mk.CollapseParams(0.25, 0.5, 3.7, derivative_order=1)
        q = mk.collapse_quality(mk.collapse_transform(curves, params))
        assert q < 1e-10, q

    return [
        ("two-site spectra", two_site_spectra),
        ("MPO matches dense Hamiltonian", mpo_matches_dense),
        ("two-qubit concurrence/negativity", two_qubit_measures),
        ("geometric entanglement landmarks", geometric_entanglement_landmarks),
        ("GHZ bond-1 compression", compress_ghz),
        ("exact scaling collapse", collapse_fixture),
    ]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mblkit",
        description="Disordered Heisenberg chains: ensembles, entanglement "
                    "indicators, and scaling collapse.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a disorder ensemble")
    _add_config_flags(p_run)
    p_run.set_defaults(fn=_cmd_run)

    p_prof = sub.add_parser("profiles", help="pair-entanglement decay profiles")
    _add_config_flags(p_prof)
    p_prof.set_defaults(fn=_cmd_profiles)

    p_col = sub.add_parser("collapse", help="scaling-collapse grid search")
    p_col.add_argument("--curves", action="append", required=True,
                       help="curves CSV (repeatable)")
    p_col.add_argument("--indicator", default="N_avg_nn")
    p_col.add_argument("--derivative-order", type=int, default=2)
    p_col.add_argument("--max-degree", type=int, default=9)
    p_col.add_argument("--grid", required=True,
                       help="a=lo:hi:step,b=lo:hi:step,wc=lo:hi:step")
    p_col.add_argument("--top", type=int, default=10)
    p_col.add_argument("--out-dir", default=".")
    p_col.add_argument("--no-plots", action="store_true")
    p_col.set_defaults(fn=_cmd_collapse)

    p_ge = sub.add_parser("ge-hist", help="geometric-entanglement histograms")
    p_ge.add_argument("--records", action="append", required=True)
    p_ge.add_argument("--out-dir", default=".")
    p_ge.add_argument("--no-plots", action="store_true")
    p_ge.set_defaults(fn=_cmd_ge_hist)

    p_val = sub.add_parser("validate", help="run the analytic fixture suite")
    p_val.set_defaults(fn=_cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
