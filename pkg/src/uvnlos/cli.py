"""uvnlos command line: run one scenario, sweep a variable, compare columns.

Subcommands
-----------
run    evaluate one scenario file; JSON record to stdout, summary table to
       stderr (2-decimal dB; the JSON keeps full precision)
sweep  evaluate a scenario across a list of values of one variable; writes
       a CSV with one row per value and one column group per model
rmse   root-mean-square difference between two numeric columns of a sweep
       CSV, printed to stdout

Model names: exact (scattering, obstacle ignored), obstacle (scattering
with the obstacle blocking; alias exact+obstacle), reflection (reflected
energy alone), total (scattering with obstacle plus reflection; alias
exact+obstacle+reflection), simplified (sub-beam sampling model, obstacle
ignored), mcpt (Monte Carlo photon tracing).

Exit codes: 0 success; 2 validation failure (messages carry the dotted
field path); 3 no model received any energy; 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

from .geometry import DomainError, UnclassifiableError
from .mcpt import estimate_pathloss
from .reflection import integrate_reflection, total_pathloss
from .scattering import _pathloss_db, integrate_scattering
from .scenario import (MODEL_NAMES, ScenarioError, apply_sweep_value,
                       canonical_model_name, load_scenario, parse_scenario,
                       serialize_scenario)
from .simplified import simplified_pathloss

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_EMPTY = 3
EXIT_IO = 4

RUN_SCHEMA = "uvnlos-run-v1"
SWEEP_SCHEMA = "uvnlos-sweep-v1"

_OBSTACLE_MODELS = ("obstacle", "reflection", "total")


def _evaluate_model(name, sc):
    """Evaluate one model on a parsed scenario.

    Returns a flat record dict.  pathloss_db is None (not inf) when the
    model received nothing, so records stay strict-JSON serializable.
    """
    q_t = sc.source_energy
    if name == "exact":
        res = integrate_scattering(sc.geometry, None, sc.atmosphere, q_t,
                                   sc.scatter_config)
        return _record(res.pathloss_db, res.q_r_sca, res.q_r_sca, 0.0,
                       res.empty_overlap)
    if name == "obstacle":
        res = integrate_scattering(sc.geometry, sc.obstacle, sc.atmosphere,
                                   q_t, sc.scatter_config)
        return _record(res.pathloss_db, res.q_r_sca, res.q_r_sca, 0.0,
                       res.empty_overlap)
    if name == "reflection":
        q_ref = integrate_reflection(sc.geometry, sc.obstacle, sc.atmosphere,
                                     sc.reflection, q_t, sc.scatter_config)
        return _record(_pathloss_db(q_t, q_ref), q_ref, 0.0, q_ref,
                       q_ref <= 0.0)
    if name == "total":
        res = total_pathloss(sc.geometry, sc.obstacle, sc.atmosphere,
                             sc.reflection, q_t, sc.scatter_config)
        return _record(res.pathloss_db, res.q_r, res.q_r_sca, res.q_r_ref,
                       res.empty_overlap)
    if name == "simplified":
        res = simplified_pathloss(sc.geometry, sc.atmosphere, q_t,
                                  beta=sc.sampling_beta, u=sc.legendre_u)
        rec = _record(res.pathloss_db, res.q_r_sca, res.q_r_sca, 0.0,
                      res.empty_overlap)
        rec["tiled_energy_j"] = res.tiled_energy
        return rec
    if name == "mcpt":
        res = estimate_pathloss(sc.mcpt_config, sc.geometry, sc.obstacle,
                                sc.atmosphere, sc.reflection, q_t)
        rec = _record(res.pathloss_db, res.q_r_estimate, None, None,
                      res.zero_contribution)
        rec["standard_error_j"] = res.standard_error
        # 1-sigma uncertainty mapped to dB around the estimate
        if res.q_r_estimate > 0.0:
            rec["stderr_db"] = (10.0 / math.log(10.0)
                                * res.standard_error / res.q_r_estimate)
        else:
            rec["stderr_db"] = None
        rec["photons_contributing"] = res.photons_contributing
        return rec
    raise ValueError(f"unknown model {name!r}")


def _record(pathloss_db, q_r, q_sca, q_ref, empty):
    return {
        "pathloss_db": None if not math.isfinite(pathloss_db) else pathloss_db,
        "q_r_j": q_r,
        "q_r_scattered_j": q_sca,
        "q_r_reflected_j": q_ref,
        "empty_overlap": bool(empty),
    }


def _parse_models(text, sc, default_if_none=True):
    """Canonicalize a comma-separated model list, keeping the given order."""
    if text is None:
        if not default_if_none:
            return None
        names = ["exact"]
        if sc.obstacle is not None:
            names += ["obstacle", "reflection", "total"]
    else:
        names = []
        for token in text.split(","):
            token = token.strip()
            if token:
                names.append(canonical_model_name(token))
    ordered = list(dict.fromkeys(names))
    if sc is not None and sc.obstacle is None:
        for m in ordered:
            if m in _OBSTACLE_MODELS:
                raise ScenarioError(
                    "models", f"model {m!r} requires the scenario to "
                    "define an obstacle")
    if not ordered:
        raise ScenarioError("models", "no models requested")
    return ordered


def _print_table(models, records, stream):
    stream.write(f"{'model':<12} {'pathloss_db':>12} {'q_r_j':>13}  flags\n")
    for m in models:
        rec = records[m]
        db = rec["pathloss_db"]
        db_text = f"{db:.2f}" if db is not None else "--"
        flags = "empty_overlap" if rec["empty_overlap"] else ""
        stream.write(f"{m:<12} {db_text:>12} {rec['q_r_j']:>13.4e}  {flags}\n")


def _cmd_run(args):
    sc = load_scenario(args.scenario)
    models = _parse_models(args.models, sc)
    records = {m: _evaluate_model(m, sc) for m in models}
    payload = {
        "schema": RUN_SCHEMA,
        "scenario": serialize_scenario(sc),
        "models": {m: records[m] for m in models},
    }
    if args.out == "table":
        _print_table(models, records, sys.stdout)
    else:
        json.dump(payload, sys.stdout, indent=2, allow_nan=False)
        sys.stdout.write("\n")
        _print_table(models, records, sys.stderr)
    if all(records[m]["empty_overlap"] for m in models):
        sys.stderr.write("error: no requested model received any energy\n")
        return EXIT_EMPTY
    return EXIT_OK


def _parse_values(text):
    """Parse --values: either 'a,b,c' or an inclusive range 'lo:hi:step'."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ScenarioError("values", f"expected lo:hi:step, got {text!r}")
        try:
            lo, hi, step = (float(p) for p in parts)
        except ValueError:
            raise ScenarioError("values", f"expected numbers in {text!r}") from None
        if step <= 0.0 or hi < lo:
            raise ScenarioError("values",
                                f"need step > 0 and hi >= lo in {text!r}")
        out = []
        k = 0
        # half-step tolerance keeps the endpoint despite rounding
        while lo + k * step <= hi + step * 0.5:
            out.append(lo + k * step)
            k += 1
        return out
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ScenarioError("values", f"expected numbers in {text!r}") from None


def _csv_header(variable, models):
    cols = [variable]
    for m in models:
        cols += [f"{m}_db", f"{m}_q_j"]
        if m == "mcpt":
            cols.append("mcpt_stderr_db")
    cols.append("error")
    return cols


def _sweep_rows(sc, variable, values, models):
    """Yield one CSV row per swept value; failures become error sentinels."""
    for value in values:
        row = [repr(float(value))]
        errors = []
        row_sc = None
        try:
            row_sc = parse_scenario(
                apply_sweep_value(sc.raw, variable, value))
        except (ScenarioError, DomainError) as exc:
            errors.append(f"scenario:{exc}")
        for m in models:
            cells = ["", ""] + (["" ] if m == "mcpt" else [])
            if row_sc is not None:
                try:
                    rec = _evaluate_model(m, row_sc)
                    if rec["empty_overlap"] or rec["pathloss_db"] is None:
                        errors.append(f"{m}:empty_overlap")
                        cells[1] = repr(rec["q_r_j"])
                    else:
                        cells[0] = repr(rec["pathloss_db"])
                        cells[1] = repr(rec["q_r_j"])
                        if m == "mcpt" and rec["stderr_db"] is not None:
                            cells[2] = repr(rec["stderr_db"])
                except (DomainError, UnclassifiableError, ScenarioError) as exc:
                    errors.append(f"{m}:{type(exc).__name__}")
            row.extend(cells)
        row.append(";".join(errors))
        yield row


def _cmd_sweep(args):
    sc = load_scenario(args.scenario)
    variable = args.var or (sc.sweep.variable if sc.sweep else None)
    if variable is None:
        raise ScenarioError(
            "sweep", "no variable given: pass --var or add a sweep block")
    if variable in ("alpha", "x_o") and sc.obstacle is None:
        raise ScenarioError(
            "sweep", f"variable {variable!r} requires the scenario to "
            "define an obstacle")
    values = _parse_values(args.values) if args.values else (
        list(sc.sweep.values) if sc.sweep else None)
    if not values:
        raise ScenarioError(
            "sweep", "no values given: pass --values or add a sweep block")
    models = _parse_models(args.models, sc, default_if_none=False)
    if models is None:
        models = list(sc.sweep.models) if sc.sweep else None
        if models is None:
            raise ScenarioError(
                "sweep", "no models given: pass --models or add a sweep block")
        if sc.obstacle is None:
            for m in models:
                if m in _OBSTACLE_MODELS:
                    raise ScenarioError(
                        "sweep.models", f"model {m!r} requires the scenario "
                        "to define an obstacle")

    header = _csv_header(variable, models)
    rows = list(_sweep_rows(sc, variable, values, models))

    if args.out == "-":
        _write_csv(sys.stdout, header, rows)
    else:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            _write_csv(fh, header, rows)
    if args.plot:
        _render_plot(args.plot, variable, models, header, rows)
    return EXIT_OK


def _write_csv(fh, header, rows):
    fh.write(f"# {SWEEP_SCHEMA}\n")
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def _render_plot(path, variable, models, header, rows):
    # matplotlib is optional and only needed here, so import lazily
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise OSError("plotting requires matplotlib (install extra 'plot')")
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for m in models:
        col = header.index(f"{m}_db")
        xs, ys = [], []
        for row in rows:
            if row[col] != "":
                xs.append(float(row[0]))
                ys.append(float(row[col]))
        if xs:
            ax.plot(xs, ys, marker="o", label=m)
    ax.set_xlabel(variable)
    ax.set_ylabel("path loss [dB]")
    ax.invert_yaxis()
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


class MissingColumnError(ScenarioError):
    """A requested CSV column is absent."""


def compare_rmse(path, col_a, col_b):
    """RMSE between two numeric columns of a sweep CSV.

    Raises MissingColumnError when a column is absent and ScenarioError
    when any selected cell is empty or a row carries an error sentinel.
    """
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    fields = reader.fieldnames or []
    for col in (col_a, col_b):
        if col not in fields:
            raise MissingColumnError(
                "rmse", f"missing column {col!r} (available: "
                f"{', '.join(fields)})")
    acc = []
    for i, row in enumerate(reader):
        if row.get("error"):
            raise ScenarioError(
                "rmse", f"row {i} carries an error sentinel: {row['error']}")
        a, b = row[col_a], row[col_b]
        if a == "" or b == "":
            raise ScenarioError(
                "rmse", f"row {i} has an empty cell in {col_a!r}/{col_b!r}")
        acc.append((float(a) - float(b)) ** 2)
    if not acc:
        raise ScenarioError("rmse", "no data rows")
    return math.sqrt(sum(acc) / len(acc))


def _cmd_rmse(args):
    value = compare_rmse(args.csv, args.a, args.b)
    sys.stdout.write(f"{value!r}\n")
    sys.stderr.write(f"rmse({args.a}, {args.b}) = {value:.2f} dB\n")
    return EXIT_OK


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="uvnlos",
        description="Path loss of short-range non-line-of-sight UV links.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="evaluate one scenario file")
    p_run.add_argument("scenario", help="scenario JSON file")
    p_run.add_argument("--models",
                       help="comma-separated model list (default: exact, "
                            "plus obstacle,reflection,total when the "
                            "scenario has an obstacle); names: "
                            + ",".join(MODEL_NAMES))
    p_run.add_argument("--out", choices=("json", "table"), default="json",
                       help="stdout format (json also prints the table to "
                            "stderr)")
    p_run.set_defaults(func=_cmd_run)

    p_sweep = sub.add_parser("sweep",
                             help="evaluate a scenario over a value grid")
    p_sweep.add_argument("scenario", help="scenario JSON file")
    p_sweep.add_argument("--var", help="swept variable "
                         "(range_r, beta_t, beta_r, theta_t, theta_r, "
                         "alpha, x_o); default from the file's sweep block")
    p_sweep.add_argument("--values",
                         help="comma list 'a,b,c' or inclusive range "
                              "'lo:hi:step'; default from the sweep block")
    p_sweep.add_argument("--models",
                         help="comma-separated model list; default from "
                              "the sweep block")
    p_sweep.add_argument("--out", default="-",
                         help="output CSV path, '-' for stdout (default)")
    p_sweep.add_argument("--plot", metavar="PNG",
                         help="also render the sweep to a PNG "
                              "(requires matplotlib)")
    p_sweep.set_defaults(func=_cmd_sweep)

    p_rmse = sub.add_parser("rmse",
                            help="RMSE between two columns of a sweep CSV")
    p_rmse.add_argument("csv", help="sweep CSV file")
    p_rmse.add_argument("--a", required=True, help="first column name")
    p_rmse.add_argument("--b", required=True, help="second column name")
    p_rmse.set_defaults(func=_cmd_rmse)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except (DomainError, UnclassifiableError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
