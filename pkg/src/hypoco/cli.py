"""Scenario-driven command line front end.

``hypoco run scenario.json`` reads a JSON scenario, dispatches to the
analysis modules and writes ``<prefix>.csv`` (data) plus
``<prefix>.report.json`` (certificates, fitted slopes, pass/fail against
the tolerances declared in the scenario).  ``hypoco report a.csv b.csv ...``
merges CSVs from several runs into one table and fits log-log slopes
against the ``n`` column when present.

Exit codes: 0 success, 2 invalid config (the message names the failing
field), 3 numerical failure, 4 a declared tolerance check failed (certify
scenarios only).  Scenario validation happens before any file is written.
All tolerances live in the scenario file, never in this module, so a run is
self-describing; for a fixed seed and config, outputs are byte-identical
across invocations.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import chains, distortion, gaussian, graphs, spectra
from .errors import (
    HypocoError,
    InvalidArgumentError,
    NumericalFailureError,
    UnsupportedSizeError,
)

__all__ = ["main", "run_scenario", "merge_reports"]

KINDS = ("analyze-ou", "graph-bounds", "simulate-chain", "couple", "certify", "decay-study")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_TOLERANCE = 4


def _fmt(value) -> str:
    """Shortest round-trip decimal for CSV cells; empty for missing."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _require(params: dict, field: str):
    if field not in params:
        raise InvalidArgumentError(f"parameters.{field}: missing required field")
    return params[field]


def _matrix(params: dict, field: str) -> list:
    value = _require(params, field)
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidArgumentError(f"parameters.{field}: not a numeric matrix") from exc
    if arr.ndim != 2 or not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"parameters.{field}: expected a finite 2-d matrix")
    return value


def _chain_config(params: dict, seed_override: int | None) -> chains.ChainConfig:
    raw = _require(params, "chain")
    try:
        config = chains.ChainConfig.from_json(raw)
    except InvalidArgumentError as exc:
        raise InvalidArgumentError(f"parameters.chain: {exc}") from exc
    if seed_override is not None:
        config = chains.ChainConfig(
            n=config.n, d=config.d, potential=config.potential,
            sigma0=config.sigma0, sigma_n=config.sigma_n, dt=config.dt,
            seed=seed_override, mode=config.mode,
        )
    return config


def _handle_analyze_ou(params: dict, seed: int | None):
    spec = spectra.DriftSpec(B=_matrix(params, "B"), D=_matrix(params, "D"))
    tol = float(params.get("tol", spectra.DEFAULT_TOL))
    cert = spectra.certify(spec, tol=tol, max_brackets=params.get("max_brackets"))
    times = np.asarray(params.get("times", np.linspace(0.0, 20.0, 41)), dtype=float)
    rows = []
    if cert.hypoelliptic and cert.rho > 0.0:
        for t in times:
            rows.append([_fmt(t), _fmt(gaussian.operator_norm_sq(spec, float(t)))])
    report = cert.to_json()
    return ["t", "gamma_sq"], rows, report, False


def _handle_decay_study(params: dict, seed: int | None):
    spec = spectra.DriftSpec(B=_matrix(params, "B"), D=_matrix(params, "D"))
    times = np.asarray(_require(params, "times"), dtype=float)
    window = lambda key: tuple(params[key]) if key in params else None
    study = gaussian.decay_study(
        spec, times, long_window=window("long_window"), short_window=window("short_window")
    )
    rows = [[_fmt(t), _fmt(v)] for t, v in zip(study.curve.times, study.curve.values)]
    report = {
        "rho": study.rho,
        "long_time_slope": study.long_time_slope,
        "short_time_slope": study.short_time_slope,
    }
    return ["t", "gamma_sq"], rows, report, False


def _handle_graph_bounds(params: dict, seed: int | None):
    if "chain" in params:
        raw = params["chain"]
        if not isinstance(raw, dict) or "n" not in raw or "lambda" not in raw:
            raise InvalidArgumentError("parameters.chain: needs fields 'n' and 'lambda'")
        n, lam = int(raw["n"]), float(raw["lambda"])
        rep = graphs.chain_gap_report(n, lam)
        vertices = n + 1
        values = {
            "vertices": vertices,
            "spectral_gap": rep.rho,
            "dirichlet_eigenvalue": rep.rho_d,
            "cheeger": rep.cheeger,
            "rho_lower_bound": rep.chain_lower_rho,
            "rho_d_lower_bound": rep.chain_lower_rho_d,
        }
    elif "graph" in params:
        g = graphs.InteractionGraph.from_json(params["graph"])
        pinned = int(params.get("pinned", 0))
        try:
            h = graphs.cheeger_constant(g)
        except UnsupportedSizeError:
            h = None
        values = {
            "vertices": g.vertex_count,
            "spectral_gap": graphs.spectral_gap(g),
            "dirichlet_eigenvalue": graphs.dirichlet_eigenvalue(g, pinned),
            "cheeger": h,
            "rho_lower_bound": None,
            "rho_d_lower_bound": None,
        }
    else:
        raise InvalidArgumentError("parameters: need either 'chain' or 'graph'")
    header = list(values)
    return header, [[_fmt(values[k]) for k in header]], values, False


def _handle_simulate_chain(params: dict, seed: int | None):
    config = _chain_config(params, seed)
    t_final = float(_require(params, "T"))
    n_traj = int(_require(params, "n_traj"))
    x0 = np.asarray(params.get("x0", np.zeros(config.dim)), dtype=float)
    observables = tuple(params.get("observables", ["coords"]))
    stats = chains.simulate(config, x0, t_final, n_traj, observables)
    rows = []
    for k, t in enumerate(stats.times):
        if "coords" in observables:
            for i in range(stats.mean.shape[1]):
                rows.append([
                    _fmt(t), f"x{i}", _fmt(stats.mean[k, i]),
                    _fmt(stats.var[k, i]), _fmt(stats.ci_halfwidth[k, i]),
                ])
        if "norm2" in observables:
            rows.append([
                _fmt(t), "norm2", _fmt(stats.norm2_mean[k]),
                _fmt(stats.norm2_var[k]), _fmt(stats.norm2_ci[k]),
            ])
    report = {
        "dt": config.dt,
        "n_steps": int(round(stats.times[-1] / config.dt)),
        "t_final": float(stats.times[-1]),
        "n_traj": n_traj,
        "mode": config.mode,
    }
    if config.potential.kind == "quadratic" and config.mode == "fixed":
        lsi = chains.lsi_constant_quadratic(config)
        report["lsi"] = {"exact": lsi.exact, "paper_bound": lsi.paper_bound}
    return ["time", "observable", "mean", "variance", "ci_halfwidth"], rows, report, False


def _handle_couple(params: dict, seed: int | None):
    config = _chain_config(params, seed)
    est = chains.couple(
        config,
        np.asarray(_require(params, "x0"), dtype=float),
        np.asarray(_require(params, "y0"), dtype=float),
        float(_require(params, "T")),
        int(_require(params, "n_traj")),
    )
    report = {
        "rate": est.rate,
        "ci_halfwidth": est.ci_halfwidth,
        "n_pairs": est.n_pairs,
        "t_final": est.t_final,
    }
    if config.potential.kind == "quadratic" and config.mode == "fixed":
        report["reference_rho_d"] = graphs.dirichlet_eigenvalue(
            graphs.InteractionGraph.chain(config.n, config.potential.lam), 0
        )
    header = ["rate", "ci_halfwidth", "n_pairs", "t_final"]
    row = [_fmt(est.rate), _fmt(est.ci_halfwidth), _fmt(est.n_pairs), _fmt(est.t_final)]
    return header, [row], report, False


def _handle_certify(params: dict, seed: int | None):
    epsilon = float(params.get("epsilon", 0.1))
    tolerances = params.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise InvalidArgumentError("parameters.tolerances: must be an object")
    n_field = None
    lsi = None
    if "chain" in params:
        config = _chain_config(params, seed)
        spec = chains.quadratic_reduction(config)
        n_field = config.n
        if config.mode == "fixed" and config.sigma_n > 0.0:
            lsi = chains.lsi_constant_quadratic(config)
    else:
        spec = spectra.DriftSpec(B=_matrix(params, "B"), D=_matrix(params, "D"))
    cert = spectra.certify(spec)
    state = gaussian.solve_lyapunov(spec)
    residual = np.linalg.norm(spec.B @ state.cov + state.cov @ spec.B.T - 2.0 * spec.D)
    residual /= max(np.linalg.norm(spec.D), 1e-300)
    dist = distortion.build_distortion(spec.B, epsilon)
    lmi = distortion.verify_lmi(dist.P, spec.B)
    agreement = abs(dist.kappa - lmi)

    values = {
        "n": n_field,
        "dim": spec.dim,
        "rho": cert.rho,
        "big_n": cert.big_n,
        "brackets": cert.brackets,
        "reach": cert.reach,
        "lyapunov_residual": float(residual),
        "kappa": dist.kappa,
        "lmi_agreement": float(agreement),
        "lsi_exact": lsi.exact if lsi else None,
        "lsi_paper_bound": lsi.paper_bound if lsi else None,
    }
    checks = {}
    gate_failed = False
    for name, tol in tolerances.items():
        tol = float(tol)
        if name == "lyapunov_residual":
            ok, measured = residual <= tol, residual
        elif name == "lmi_agreement":
            ok, measured = agreement <= tol, agreement
        elif name == "kappa_vs_rho":
            measured = abs(dist.kappa - cert.rho)
            ok = measured <= tol
        elif name == "lsi_gap":
            if lsi is None:
                raise InvalidArgumentError(
                    "parameters.tolerances.lsi_gap: requires a quadratic fixed chain"
                )
            measured = lsi.exact - lsi.paper_bound
            ok = measured <= tol
        else:
            raise InvalidArgumentError(f"parameters.tolerances.{name}: unknown check")
        checks[name] = {"measured": float(measured), "tolerance": tol, "pass": bool(ok)}
        gate_failed |= not ok
    report = dict(values)
    report["epsilon"] = epsilon
    report["cond_p"] = dist.cond_p
    report["checks"] = checks
    report["pass"] = not gate_failed
    header = list(values)
    return header, [[_fmt(values[k]) for k in header]], report, gate_failed


_HANDLERS = {
    "analyze-ou": _handle_analyze_ou,
    "decay-study": _handle_decay_study,
    "graph-bounds": _handle_graph_bounds,
    "simulate-chain": _handle_simulate_chain,
    "couple": _handle_couple,
    "certify": _handle_certify,
}


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _gnuplot_script(prefix: Path, header: list[str]) -> str:
    csv_name = prefix.name + ".csv"
    lines = [
        "set datafile separator ','",
        "set key autotitle columnhead",
        "set grid",
    ]
    if len(header) >= 2 and header[1] != "observable":
        lines.append(f"plot '{csv_name}' using 1:2 with linespoints")
    else:
        lines.append(f"# tabular output; inspect '{csv_name}' directly")
    return "\n".join(lines) + "\n"


def run_scenario(path: str, seed: int | None = None, gnuplot: bool = False) -> int:
    """Execute one scenario file; returns the process exit code."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        print(f"scenario: cannot read {path}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        scenario = json.loads(text)
    except json.JSONDecodeError as exc:
        print(f"scenario: malformed JSON: {exc}", file=sys.stderr)
        return EXIT_INVALID
    if not isinstance(scenario, dict):
        print("scenario: top level must be an object", file=sys.stderr)
        return EXIT_INVALID
    kind = scenario.get("kind")
    if kind not in KINDS:
        print(f"kind: expected one of {KINDS}, got {kind!r}", file=sys.stderr)
        return EXIT_INVALID
    prefix = scenario.get("output")
    if not isinstance(prefix, str) or not prefix:
        print("output: missing output file prefix", file=sys.stderr)
        return EXIT_INVALID
    params = scenario.get("parameters", {})
    if not isinstance(params, dict):
        print("parameters: must be an object", file=sys.stderr)
        return EXIT_INVALID

    try:
        header, rows, report, gate_failed = _HANDLERS[kind](params, seed)
    except InvalidArgumentError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except HypocoError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NUMERICAL

    prefix_path = Path(prefix)
    if prefix_path.parent != Path("."):
        prefix_path.parent.mkdir(parents=True, exist_ok=True)
    _write_csv(Path(str(prefix_path) + ".csv"), header, rows)
    with open(Path(str(prefix_path) + ".report.json"), "w", newline="\n") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if gnuplot:
        Path(str(prefix_path) + ".gnuplot").write_text(_gnuplot_script(prefix_path, header))
    return EXIT_TOLERANCE if gate_failed else EXIT_OK


def merge_reports(paths: list[str]) -> tuple[list[str], list[list[str]], dict]:
    """Merge CSVs sharing one schema; fit log-log slopes against column 'n'.

    Cell values are carried through verbatim (merging never reformats a
    number).  The slope fit uses rows where both 'n' and the target column
    are positive numbers.
    """
    if not paths:
        raise InvalidArgumentError("report: need at least one CSV input")
    header: list[str] | None = None
    rows: list[list[str]] = []
    for p in paths:
        try:
            with open(p, newline="") as fh:
                reader = list(csv.reader(fh))
        except OSError as exc:
            raise InvalidArgumentError(f"report: cannot read {p}: {exc}") from exc
        if not reader:
            raise InvalidArgumentError(f"report: {p} is empty (header row is mandatory)")
        if header is None:
            header = reader[0]
        elif reader[0] != header:
            raise InvalidArgumentError(
                f"report: schema mismatch in {p}: {reader[0]} != {header}"
            )
        rows.extend(reader[1:])

    summary: dict = {"rows": len(rows), "columns": header, "slopes": {}}
    if "n" in header and len(rows) >= 2:
        xi = header.index("n")

        def _num(cell: str) -> float | None:
            try:
                v = float(cell)
            except ValueError:
                return None
            return v if np.isfinite(v) and v > 0.0 else None

        for ci, col in enumerate(header):
            if ci == xi:
                continue
            pts = [(_num(r[xi]), _num(r[ci])) for r in rows if len(r) == len(header)]
            pts = [(x, y) for x, y in pts if x is not None and y is not None]
            xs = sorted({x for x, _ in pts})
            if len(pts) >= 2 and len(xs) >= 2:
                lx = np.log([x for x, _ in pts])
                ly = np.log([y for _, y in pts])
                summary["slopes"][col] = float(np.polyfit(lx, ly, 1)[0])
    return header, rows, summary


def _cmd_report(args) -> int:
    try:
        header, rows, summary = merge_reports(args.csvs)
    except InvalidArgumentError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_INVALID
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    if args.output:
        Path(args.output).write_text(buf.getvalue())
        print(json.dumps(summary, indent=2, sort_keys=True))
    else:
        sys.stdout.write(buf.getvalue())
        print(json.dumps(summary, indent=2, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="hypoco",
        description="Convergence-rate certification for degenerate linear diffusions "
        "and overdamped particle chains.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a JSON scenario")
    p_run.add_argument("scenario", help="path to the scenario JSON file")
    p_run.add_argument("--seed", type=int, default=None, help="override the config seed")
    p_run.add_argument(
        "--threads", type=int, default=1,
        help="worker hint; ensembles are vectorised with a fixed reduction order, "
        "so results do not depend on this value",
    )
    p_run.add_argument(
        "--gnuplot-script", action="store_true", help="also emit a <prefix>.gnuplot script"
    )

    p_rep = sub.add_parser("report", help="merge run CSVs into a consolidated summary")
    p_rep.add_argument("csvs", nargs="*", help="CSV files produced by 'hypoco run'")
    p_rep.add_argument("--output", default=None, help="write the merged CSV here")

    args = parser.parse_args(argv)
    if args.command == "run":
        if args.threads < 1:
            print("--threads: must be >= 1", file=sys.stderr)
            return EXIT_INVALID
        return run_scenario(args.scenario, seed=args.seed, gnuplot=args.gnuplot_script)
    return _cmd_report(args)


if __name__ == "__main__":
    sys.exit(main())
