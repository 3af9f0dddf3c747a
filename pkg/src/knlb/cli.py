"""Command-line front end.

One subcommand per experiment kind plus the identity-check suite and data
export.  Data goes to files (or stdout); progress and diagnostics go to
stderr, so pipelines stay clean.  Exit codes: 0 success, 1 check failure,
2 configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import ConfigError, KnlbError
from .experiments import (
    ExperimentConfig,
    records_to_csv,
    run,
    write_summary,
)
from .identities import run_identity_checks

_SUBCOMMAND_KINDS = {
    "scaling": ("gegenbauer-scaling", "hermite-scaling"),
    "approx": ("approx-decay",),
    "bounds": ("bound-terms",),
    "decouple": ("decoupling",),
    "krr-bias": ("krr-bias",),
}


def _experiment_parser(sub, name, help_text):
    p = sub.add_parser(name, help=help_text)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument(
        "--workers",
        type=int,
        default=os.cpu_count() or 1,
        help="worker processes (default: logical cores)",
    )
    p.add_argument(
        "--tol",
        action="append",
        default=[],
        metavar="NAME=VALUE",
        help="tolerance override, e.g. op_norm=1e-3 (repeatable)",
    )
    p.add_argument(
        "--no-figures", action="store_true", help="skip rendering the summary figure"
    )
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knlb",
        description="Random kernel matrix norms, approximants, and KRR bias at desk scale",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    check = sub.add_parser("check-identities", help="run the identity-check suites")
    check.add_argument("--quick", action="store_true", help="smaller Monte Carlo sizes")
    check.add_argument("--seed", type=int, default=None)

    _experiment_parser(sub, "scaling", "norm scaling sweeps with log-log slope fits")
    _experiment_parser(sub, "approx", "kernel approximation decay sweeps")
    _experiment_parser(sub, "bounds", "norm bound term estimation")
    _experiment_parser(sub, "decouple", "coupled vs decoupled norm ratios")
    _experiment_parser(sub, "krr-bias", "closed-form ridge regression bias sweeps")

    export = sub.add_parser("export", help="dump coefficient tables or sample batches")
    what = export.add_subparsers(dest="what", required=True)

    coeffs = what.add_parser("coeffs", help="coefficient table as JSON")
    coeffs.add_argument(
        "--kind",
        required=True,
        choices=["monomial-hermite", "hermite-mult", "gegenbauer-projection"],
    )
    coeffs.add_argument("--degree", type=int, required=True)
    coeffs.add_argument("--gamma", type=float, default=1.0, help="hermite-mult scale")
    coeffs.add_argument("--dim", type=int, default=None, help="gegenbauer dimension")
    coeffs.add_argument("--max-j", type=int, default=None)
    coeffs.add_argument("--out", required=True)

    sample = what.add_parser("sample", help="sample batch as binary dump")
    sample.add_argument("--dist", required=True, choices=["gaussian", "sphere"])
    sample.add_argument("--n", type=int, required=True)
    sample.add_argument("--d", type=int, required=True)
    sample.add_argument("--cov-kind", default="identity", choices=["identity", "power"])
    sample.add_argument("--exponent", type=float, default=0.5)
    sample.add_argument("--seed", type=int, default=None)
    sample.add_argument("--out", required=True)
    sample.add_argument("--csv", action="store_true", help="also write a CSV copy")

    matrix = what.add_parser("matrix", help="kernel matrix as binary dump")
    matrix.add_argument(
        "--kind",
        required=True,
        choices=["kernel-exp", "hermite-delta", "gegenbauer-delta"],
    )
    matrix.add_argument("--n", type=int, required=True)
    matrix.add_argument("--d", type=int, required=True)
    matrix.add_argument("--ell", type=int, default=2, help="polynomial degree")
    matrix.add_argument("--seed", type=int, default=None)
    matrix.add_argument("--out", required=True)
    matrix.add_argument("--csv", action="store_true", help="also write a CSV copy")

    return parser


def _env_seed() -> int | None:
    raw = os.environ.get("KNLB_SEED")
    if raw is None:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError("KNLB_SEED", f"not an integer: {raw!r}")


def _load_config(path: str, flag_seed, expected_kinds) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError("config", f"no such file: {path}")
    except json.JSONDecodeError as err:
        raise ConfigError("config", f"invalid JSON in {path}: {err}")
    if flag_seed is not None:
        raw["seed"] = flag_seed
    elif "seed" not in raw:
        env = _env_seed()
        if env is not None:
            raw["seed"] = env
    config = ExperimentConfig.from_dict(raw)
    if config.kind not in expected_kinds:
        raise ConfigError(
            "kind",
            f"{config.kind!r} is not valid here (expected {' or '.join(expected_kinds)})",
        )
    return config


def _apply_tol_overrides(config: ExperimentConfig, overrides) -> ExperimentConfig:
    for item in overrides:
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError("--tol", f"expected NAME=VALUE, got {item!r}")
        try:
            config.tolerances[name] = float(value)
        except ValueError:
            raise ConfigError("--tol", f"{value!r} is not a number")
    return config


def _run_experiment(args) -> int:
    config = _load_config(args.config, args.seed, _SUBCOMMAND_KINDS[args.command])
    _apply_tol_overrides(config, args.tol)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    total_units = len(config.grid) * config.trials
    print(
        f"[knlb] {config.kind}: {len(config.grid)} grid points x {config.trials} trials"
        f" ({total_units} units, workers={args.workers})",
        file=sys.stderr,
    )

    def progress(done, total):
        if done % max(total // 10, 1) == 0 or done == total:
            print(f"[knlb] {done}/{total} units", file=sys.stderr)

    result = run(config, workers=max(args.workers, 1), progress=progress)
    records_to_csv(result.records, out_dir / "records.csv")
    write_summary(result.summary, out_dir / "summary.json")
    written = [out_dir / "records.csv", out_dir / "summary.json"]
    if not args.no_figures:
        from .figures import render_figures

        written += render_figures(result.summary, out_dir)
    for path in written:
        print(f"[knlb] wrote {path}", file=sys.stderr)
    if result.summary["failures"]:
        print(
            f"[knlb] {len(result.summary['failures'])} unit(s) failed; see summary.json",
            file=sys.stderr,
        )
        return 1
    return 0


def _run_check(args) -> int:
    seed = args.seed if args.seed is not None else (_env_seed() or 20240613)
    results = run_identity_checks(quick=args.quick, seed=seed)
    width = max(len(r.name) for r in results)
    print(f"{'status':6s} {'check':{width}s} {'margin':>10s}  detail")
    for r in results:
        status = "pass" if r.passed else "FAIL"
        print(f"{status:6s} {r.name:{width}s} {r.margin:10.3g}  {r.detail}")
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def _run_export(args) -> int:
    from . import dataio
    from .orthopoly import (
        gegenbauer_projection_table,
        hermite_scaling_table,
        monomial_hermite_table,
    )

    if args.what == "coeffs":
        if args.kind == "monomial-hermite":
            table = monomial_hermite_table(args.degree)
        elif args.kind == "hermite-mult":
            table = hermite_scaling_table(args.degree, args.gamma)
        else:
            if args.dim is None:
                raise ConfigError("--dim", "required for gegenbauer-projection")
            table = gegenbauer_projection_table(args.dim, args.degree, args.max_j)
        dataio.write_coeff_table(table, args.out)
        print(f"[knlb] wrote {args.out}", file=sys.stderr)
        return 0

    from .sampling import CovarianceSpec, sample_gaussian, sample_sphere

    seed = args.seed if args.seed is not None else (_env_seed() or 0)

    if args.what == "matrix":
        from .kernels import exp_kernel
        from .matrices import (
            gegenbauer_offdiag_matrix,
            hermite_offdiag_matrix,
            kernel_matrix,
        )

        if args.kind == "gegenbauer-delta":
            batch = sample_sphere(args.n, args.d, seed)
            mat = gegenbauer_offdiag_matrix(batch, args.ell)
        else:
            cov = CovarianceSpec.identity(args.d)
            batch = sample_gaussian(args.n, cov, seed)
            if args.kind == "hermite-delta":
                mat = hermite_offdiag_matrix(batch, args.ell, cov.tau2)
            else:
                mat = kernel_matrix(batch, exp_kernel(8), cov.tau1)
        dataio.dump_sym_matrix(mat, args.out, seed=seed)
        print(f"[knlb] wrote {args.out}", file=sys.stderr)
        if args.csv:
            csv_path = str(args.out) + ".csv"
            dataio.sym_matrix_to_csv(mat, csv_path)
            print(f"[knlb] wrote {csv_path}", file=sys.stderr)
        return 0

    if args.dist == "sphere":
        batch = sample_sphere(args.n, args.d, seed)
    else:
        if args.cov_kind == "power":
            cov = CovarianceSpec.power_law(args.d, args.exponent)
        else:
            cov = CovarianceSpec.identity(args.d)
        batch = sample_gaussian(args.n, cov, seed)
    dataio.dump_data_matrix(batch, args.out)
    print(f"[knlb] wrote {args.out}", file=sys.stderr)
    if args.csv:
        import numpy as np

        csv_path = str(args.out) + ".csv"
        np.savetxt(csv_path, batch.values, delimiter=",", fmt="%.17g")
        print(f"[knlb] wrote {csv_path}", file=sys.stderr)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check-identities":
            return _run_check(args)
        if args.command == "export":
            return _run_export(args)
        return _run_experiment(args)
    except ConfigError as err:
        print(f"[knlb] config error: {err}", file=sys.stderr)
        return 2
    except KnlbError as err:
        print(f"[knlb] error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
