"""Reproducible experiment harness.

One JSON config describes one experiment; running it writes a ``manifest.json``
(config echo plus every computed number) and a ``series.csv`` into the output
directory, atomically: outputs are staged under temporary names and renamed
only after the run succeeds, so failures leave no partial files.

Subcommands
-----------
``rates``            simulate a kernel over a grid, estimate D, fit the decay
``simulate``         the simulation stage of a rates config (no distances)
``bounds``           evaluate rate functionals on a parameter grid
``lipschitz``        exact distances and normalization pair for models
``verify``           lemma-suite / transforms-check verification runs
``plot-data``        turn a manifest into log-log plot columns

Exit codes: 0 success, 1 invariant violation (an asserted property failed),
2 config error.  ``--seed`` overrides the config seed; ``--threads`` (or the
``MCLT_LAB_THREADS`` environment variable) caps simulation workers without
changing any output byte.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, corpus
from .bounds import (
    LOG_CONVENTION,
    BoundParameterError,
    BOUNDS,
    compare_table,
    evaluate_rate,
    evaluation_notes,
    verify_smoothing_lemma,
)
from .conditions import (
    SimulatedHistories,
    WalkGuardExceeded,
    minimal_delta,
    minimal_epsilon,
    verify_moment_lemmas,
)
from .distance import KolmogorovEstimate, exact_kolmogorov_discrete, fit_rate, kolmogorov_distance
from .kernels import (
    InvalidKernelError,
    KernelError,
    kernel_from_config,
    sample_paths,
    sample_terminal,
)
from .lipschitz import (
    DegenerateMetricError,
    epsilon_delta_n,
    exact_distribution,
    model_from_config,
    variance_sandwich,
)
from .transforms import INF_GE_1, SUP_LE_1, pad_collection, padding_ratio_report, restrict_to_v

KINDS = ("rates", "bounds-table", "lemma-suite", "lipschitz", "transforms-check")

EXIT_OK = 0
EXIT_INVARIANT = 1
EXIT_CONFIG = 2


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    """An asserted property failed during a run; named in the message."""


@dataclass
class ExperimentConfig:
    kind: str
    raw: dict
    seed: int
    grid: list[dict]
    kernel: dict | None = None
    model: dict | None = None
    rho: float = 1.0
    p: float = 1.0
    alpha: float = 0.05
    bounds: tuple[str, ...] = ()
    out: str | None = None


def parse_config(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    kind = doc.get("kind")
    if kind not in KINDS:
        raise ConfigError(f"kind must be one of {KINDS}, got {kind!r}")
    if "seed" not in doc:
        raise ConfigError("seed is mandatory (no wall-clock seeding)")
    try:
        seed = int(doc["seed"])
    except (TypeError, ValueError):
        raise ConfigError("seed must be an integer") from None
    grid = doc.get("grid", [])
    if not isinstance(grid, list):
        raise ConfigError("grid must be a list")
    if kind in ("rates", "bounds-table", "lipschitz") and not grid:
        raise ConfigError(f"{kind} experiments need a non-empty grid")
    bounds = tuple(doc.get("bounds", ()))
    for bound_id in bounds:
        if bound_id not in BOUNDS:
            raise ConfigError(f"unknown bound id {bound_id!r}")
    cfg = ExperimentConfig(
        kind=kind,
        raw=doc,
        seed=seed,
        grid=[dict(g) for g in grid],
        kernel=doc.get("kernel"),
        model=doc.get("model"),
        rho=float(doc.get("rho", 1.0)),
        p=float(doc.get("p", 1.0)),
        alpha=float(doc.get("alpha", 0.05)),
        bounds=bounds,
        out=doc.get("out"),
    )
    if cfg.rho <= 0.0:
        raise ConfigError("rho must be positive")
    if cfg.p < 1.0:
        raise ConfigError("p must be >= 1")
    if not 0.0 < cfg.alpha < 1.0:
        raise ConfigError("alpha must lie in (0, 1)")
    if kind == "rates":
        if cfg.kernel is None:
            raise ConfigError("rates experiments need a kernel reference")
        for entry in cfg.grid:
            if "n" not in entry or "M" not in entry:
                raise ConfigError("rates grid entries need 'n' and 'M'")
            if int(entry["M"]) < 1000:
                raise ConfigError("rate experiments require M >= 1000")
        try:
            _kernel_for_entry(cfg, cfg.grid[0])
        except KernelError as exc:
            raise ConfigError(f"kernel reference invalid: {exc}") from None
    if kind == "lipschitz" and cfg.model is None:
        raise ConfigError("lipschitz experiments need a model reference")
    if kind == "transforms-check" and cfg.kernel is None:
        raise ConfigError("transforms-check experiments need a kernel reference")
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    return parse_config(doc)


def _kernel_for_entry(cfg: ExperimentConfig, entry: dict):
    params = dict(cfg.kernel.get("params", {}))
    params.update(entry.get("kernel_params", {}))
    if "n" in entry:
        params["n"] = int(entry["n"])
    return kernel_from_config({"name": cfg.kernel["name"], "params": params})


# ---------------------------------------------------------------------------
# output staging


class OutputStager:
    """Stage output files; commit renames them in place, abort removes them."""

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        self._created_dir = not self.out_dir.exists()
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._staged: list[tuple[Path, Path]] = []

    def write_text(self, name: str, text: str) -> None:
        tmp = self.out_dir / f".tmp-{name}"
        tmp.write_text(text, encoding="utf-8", newline="")
        self._staged.append((tmp, self.out_dir / name))

    def commit(self) -> None:
        for tmp, final in self._staged:
            os.replace(tmp, final)
        self._staged.clear()

    def abort(self) -> None:
        for tmp, _ in self._staged:
            tmp.unlink(missing_ok=True)
        self._staged.clear()
        if self._created_dir:
            try:
                self.out_dir.rmdir()
            except OSError:
                pass


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _csv(header: list[str], rows: list[list], comment: str | None = None) -> str:
    lines = []
    if comment:
        lines.append(f"# {comment}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(cell) for cell in row))
    return "\n".join(lines) + "\n"


def _manifest(cfg: ExperimentConfig, records: list[dict], fit: dict | None, notes: list[str]) -> dict:
    echo = dict(cfg.raw)
    echo["seed"] = cfg.seed  # effective seed after any --seed override
    return {
        "tool": "mclt-lab",
        "version": __version__,
        "log_convention": LOG_CONVENTION,
        "kind": cfg.kind,
        "config": echo,
        "records": records,
        "fit": fit,
        "notes": notes,
    }


# ---------------------------------------------------------------------------
# condition columns


def _condition_columns(kernel, cfg: ExperimentConfig, stats, notes: list[str]):
    eps = kernel.certified_epsilon(cfg.rho)
    if eps is not None:
        eps_mode = "certified"
    else:
        try:
            report = minimal_epsilon(kernel, cfg.rho)
            eps, eps_mode = report.epsilon, report.mode
        except WalkGuardExceeded:
            report = minimal_epsilon(
                kernel, cfg.rho, SimulatedHistories(cfg.seed + 1, min(1000, stats.count))
            )
            eps, eps_mode = report.epsilon, report.mode
            notes.append(f"epsilon for {kernel.label} is a sampled lower bound")
    delta = kernel.certified_delta()
    if delta is not None:
        delta_mode = "certified"
    else:
        try:
            delta_report = minimal_delta(kernel)
            delta, delta_mode = delta_report.delta, delta_report.mode
        except WalkGuardExceeded:
            delta = math.sqrt(stats.max_var_dev)
            delta_mode = "estimated"
            notes.append(f"delta for {kernel.label} is a sampled lower bound")
    return eps, eps_mode, delta, delta_mode


def _bound_columns(cfg, entry, kernel, stats, eps, delta, notes):
    params = {
        "rho": cfg.rho,
        "p": cfg.p,
        "n": float(kernel.n),
        "epsilon": eps,
        "delta": delta,
        "var_dev_p": stats.mean_var_dev_p,
        "max_inc_2p": stats.mean_max_inc_2p,
        "sum_inc_2p": stats.mean_total_inc_2p,
        "var_dev_linf": stats.max_var_dev,
    }
    if cfg.p == 1.0:
        params["var_dev_l1"] = stats.mean_var_dev_p
    values = {}
    for bound_id in cfg.bounds:
        try:
            values[bound_id] = evaluate_rate(bound_id, params)
            for note in evaluation_notes(bound_id, params):
                if note not in notes:
                    notes.append(note)
        except BoundParameterError as exc:
            values[bound_id] = None
            notes.append(f"{bound_id} at grid point {entry}: {exc}")
    return params, values


# ---------------------------------------------------------------------------
# runners


def _run_rates(cfg: ExperimentConfig, stager: OutputStager, threads: int, with_distance: bool = True) -> dict:
    notes: list[str] = []
    records: list[dict] = []
    rows: list[list] = []
    need_sum_inc = "HB" in cfg.bounds
    for entry in cfg.grid:
        kernel = _kernel_for_entry(cfg, entry)
        m = int(entry["M"])
        stats = sample_terminal(
            kernel, cfg.seed, m, p=cfg.p, with_sum_inc=need_sum_inc, threads=threads
        )
        eps, eps_mode, delta, delta_mode = _condition_columns(kernel, cfg, stats, notes)
        abscissa = float(entry.get("epsilon", entry["n"]))
        record = {
            "grid_point": abscissa,
            "n": kernel.n,
            "M": m,
            "epsilon": eps,
            "epsilon_mode": eps_mode,
            "delta": delta,
            "delta_mode": delta_mode,
            "kernel": kernel.label,
            "terminal_mean": float(np.mean(stats.terminal)),
            "terminal_var": float(np.var(stats.terminal)),
            "var_dev_p": stats.mean_var_dev_p,
            "max_inc_2p": stats.mean_max_inc_2p,
            "sum_inc_2p": stats.mean_total_inc_2p if need_sum_inc else None,
            "var_dev_sup": stats.max_var_dev,
        }
        if with_distance:
            est = kolmogorov_distance(stats.terminal, alpha=cfg.alpha)
            record["d_hat"] = est.d_hat
            record["dkw_band"] = est.dkw_band
            record["dkw_lo"] = est.lower
            record["dkw_hi"] = est.upper
        _, bound_values = _bound_columns(cfg, entry, kernel, stats, eps, delta, notes)
        record["bounds"] = bound_values
        records.append(record)
        if with_distance:
            rows.append(
                [abscissa, m, record["d_hat"], record["dkw_lo"], record["dkw_hi"], eps, delta]
                + [bound_values[b] for b in cfg.bounds]
            )
        else:
            rows.append(
                [abscissa, m, record["terminal_mean"], record["terminal_var"],
                 record["var_dev_p"], record["max_inc_2p"], eps, delta]
                + [bound_values[b] for b in cfg.bounds]
            )
    fit = None
    if with_distance and len(records) >= 3:
        points = [
            (r["grid_point"], KolmogorovEstimate(r["d_hat"], r["M"], cfg.alpha))
            for r in records
        ]
        reference = None
        if cfg.bounds and all(r["bounds"].get(cfg.bounds[0]) is not None for r in records):
            reference = [r["bounds"][cfg.bounds[0]] for r in records]
        try:
            rate = fit_rate(points, reference)
            fit = {
                "slope": rate.slope,
                "intercept": rate.intercept,
                "r_squared": rate.r_squared,
                "ratio_spread": rate.ratio_spread,
                "reference": cfg.bounds[0] if reference is not None else None,
                "excluded": list(rate.excluded),
            }
        except ValueError as exc:
            notes.append(f"rate fit skipped: {exc}")
    if with_distance:
        header = ["grid_point", "M", "d_hat", "dkw_lo", "dkw_hi", "epsilon", "delta"] + list(cfg.bounds)
    else:
        header = [
            "grid_point", "M", "terminal_mean", "terminal_var",
            "var_dev_p", "max_inc_2p", "epsilon", "delta",
        ] + list(cfg.bounds)
    stager.write_text("series.csv", _csv(header, rows, comment=f"log_convention={LOG_CONVENTION}"))
    return _manifest(cfg, records, fit, notes)


def _run_bounds_table(cfg: ExperimentConfig, stager: OutputStager) -> dict:
    ids = cfg.bounds or tuple(BOUNDS)
    table = compare_table(ids, cfg.grid)
    stager.write_text("series.csv", table.to_csv())
    records = [
        {"grid_point": dict(point), "bounds": dict(zip(table.ids, row))}
        for point, row in zip(table.grid, table.values)
    ]
    return _manifest(cfg, records, None, list(table.notes))


def _run_lemma_suite(cfg: ExperimentConfig, stager: OutputStager) -> dict:
    size = int(cfg.raw.get("corpus_size", 100))
    s = float(cfg.raw.get("s", 4.0))
    t_grid = [float(t) for t in cfg.raw.get("t_grid", (2.25, 2.5, 3.0, 3.5))]
    p_values = [float(p) for p in cfg.raw.get("p_values", (1.0, 2.0))]
    rows: list[list] = []
    records: list[dict] = []
    failures = []
    for i in range(size):
        dist = corpus.random_mean_zero_distribution(cfg.seed, i)
        report = verify_moment_lemmas(dist, s, t_grid)
        ok = report.all_hold
        rows.append(["moment_interpolation_and_cap", i, "pass" if ok else "FAIL", report.epsilon])
        if not ok:
            failures.append(f"moment lemma failed on corpus distribution {i}")
    for i in range(size):
        law = corpus.random_joint_law(cfg.seed, i)
        for p in p_values:
            check = verify_smoothing_lemma(law, p)
            ok = check.margin >= -1e-12
            rows.append(["smoothing", f"{i}/p={p}", "pass" if ok else "FAIL", check.margin])
            if not ok:
                failures.append(f"smoothing inequality failed on joint law {i} at p={p}")
    records.append({"corpus_size": size, "s": s, "t_grid": t_grid, "p_values": p_values,
                    "failures": failures})
    stager.write_text(
        "series.csv", _csv(["check", "case", "status", "value"], rows)
    )
    if failures:
        raise InvariantViolation("; ".join(failures))
    return _manifest(cfg, records, None, [])


def _run_transforms_check(cfg: ExperimentConfig, stager: OutputStager, threads: int) -> dict:
    notes: list[str] = []
    if cfg.grid:
        entry = cfg.grid[0]
    elif "n" in cfg.raw:
        entry = {"n": int(cfg.raw["n"])}
    else:
        raise ConfigError("transforms-check needs a grid entry or a top-level 'n'")
    kernel = _kernel_for_entry(cfg, entry)
    count = int(cfg.raw.get("count", 1000))
    paths = sample_paths(kernel, cfg.seed, count, threads=threads)
    eps = cfg.raw.get("epsilon")
    if eps is None:
        eps = kernel.certified_epsilon(cfg.rho)
        if eps is None:
            eps = minimal_epsilon(kernel, cfg.rho).epsilon
    eps = float(eps)
    padded = pad_collection(paths, eps, cfg.seed)
    worst_unit = max(abs(p.terminal_variance - 1.0) for p in padded)
    if worst_unit > 1e-9:
        raise InvariantViolation(
            f"padded terminal variance missed 1 by {worst_unit} (> 1e-9)"
        )
    worst_ratio = 0.0
    for p in padded:
        report = padding_ratio_report(p, cfg.rho)
        worst_ratio = max(worst_ratio, report["worst_ratio"])
        if not report["holds"]:
            raise InvariantViolation(
                "padded step violated the moment-domination ratio at eps="
                f"{eps} (worst ratio {report['worst_ratio']})"
            )
    rows = [["padding_unit_variance", count, "pass", worst_unit],
            ["padding_moment_ratio", count, "pass", worst_ratio]]
    stopped_summary = {}
    for variant in (SUP_LE_1, INF_GE_1):
        stopped = restrict_to_v(paths, variant)
        in_hyp = int(np.sum(~stopped.out_of_hypothesis))
        worst_resid = stopped.max_residual_in_hypothesis
        if in_hyp and worst_resid > eps * eps * (1.0 + 1e-12):
            raise InvariantViolation(
                f"stopped-variance residual {worst_resid} exceeded eps^2={eps*eps} "
                f"({variant})"
            )
        rows.append([f"stopped_residual_{variant}", in_hyp, "pass", worst_resid])
        stopped_summary[variant] = {
            "in_hypothesis": in_hyp,
            "flagged_out_of_hypothesis": int(np.sum(stopped.out_of_hypothesis)),
            "max_residual_in_hypothesis": worst_resid,
        }
    records = [{
        "kernel": kernel.label,
        "count": count,
        "epsilon": eps,
        "max_unit_variance_error": worst_unit,
        "worst_ratio": worst_ratio,
        "stopped": stopped_summary,
    }]
    stager.write_text("series.csv", _csv(["check", "cases", "status", "value"], rows))
    return _manifest(cfg, records, None, notes)


def _run_lipschitz(cfg: ExperimentConfig, stager: OutputStager) -> dict:
    notes: list[str] = []
    records: list[dict] = []
    rows: list[list] = []
    for entry in cfg.grid:
        params = dict(cfg.model.get("params", {})) if "name" in cfg.model else {}
        ref = dict(cfg.model)
        if "name" in ref:
            params.update({k: v for k, v in entry.items() if k != "M"})
            params.setdefault("rho", cfg.rho)
            ref["params"] = params
        model = model_from_config(ref)
        support, probs = exact_distribution(model, normalized=True)
        d_exact = exact_kolmogorov_discrete(support, probs)
        try:
            pair = epsilon_delta_n(model)
            eps_n, delta_n = pair.epsilon_n, pair.delta_n
        except DegenerateMetricError:
            eps_n, delta_n = None, None
            notes.append(f"{model.label}: lower metrics identically zero (degenerate)")
        sandwich = variance_sandwich(model)
        if not sandwich.upper_holds:
            raise InvariantViolation(
                f"variance exceeded the upper metric sum on {model.label}"
            )
        if not sandwich.lower_holds:
            notes.append(
                f"{model.label}: lower sandwich failed (diagnostic, not asserted): "
                f"lower={sandwich.lower} > var={sandwich.variance}"
            )
        bound_values = {}
        for bound_id in cfg.bounds:
            params_b = {"rho": cfg.rho, "epsilon": eps_n, "delta": delta_n}
            try:
                if eps_n is None:
                    raise BoundParameterError("epsilon_n unavailable (degenerate metrics)")
                bound_values[bound_id] = evaluate_rate(bound_id, params_b)
            except BoundParameterError as exc:
                bound_values[bound_id] = None
                notes.append(f"{bound_id} at {entry}: {exc}")
        abscissa = float(entry.get("n", model.n))
        records.append({
            "grid_point": abscissa,
            "model": model.label,
            "support_size": int(len(support)),
            "d_exact": d_exact,
            "epsilon_n": eps_n,
            "delta_n": delta_n,
            "variance": sandwich.variance,
            "sandwich_lower": sandwich.lower,
            "sandwich_upper": sandwich.upper,
            "lower_holds": sandwich.lower_holds,
            "bounds": bound_values,
        })
        rows.append(
            [abscissa, len(support), d_exact, d_exact, d_exact, eps_n, delta_n]
            + [bound_values[b] for b in cfg.bounds]
        )
    header = ["grid_point", "M", "d_hat", "dkw_lo", "dkw_hi", "epsilon", "delta"] + list(cfg.bounds)
    stager.write_text("series.csv", _csv(header, rows, comment=f"log_convention={LOG_CONVENTION}"))
    return _manifest(cfg, records, None, notes)


def run_experiment(
    cfg: ExperimentConfig, out_dir: str | Path, threads: int = 1, with_distance: bool = True
) -> dict:
    """Run one experiment; write manifest.json and series.csv atomically."""
    stager = OutputStager(out_dir)
    try:
        if cfg.kind == "rates":
            manifest = _run_rates(cfg, stager, threads, with_distance=with_distance)
        elif cfg.kind == "bounds-table":
            manifest = _run_bounds_table(cfg, stager)
        elif cfg.kind == "lemma-suite":
            manifest = _run_lemma_suite(cfg, stager)
        elif cfg.kind == "transforms-check":
            manifest = _run_transforms_check(cfg, stager, threads)
        elif cfg.kind == "lipschitz":
            manifest = _run_lipschitz(cfg, stager)
        else:  # pragma: no cover - parse_config guards this
            raise ConfigError(f"unhandled kind {cfg.kind!r}")
        stager.write_text("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        stager.commit()
        return manifest
    except BaseException:
        stager.abort()
        raise


# ---------------------------------------------------------------------------
# plot data


def emit_plot_data(manifest: dict, references: list[str] | None = None) -> str:
    """Log-log plot columns from a manifest (natural logs, sorted abscissae).

    Comparison-table manifests have no distance series; they pass through as
    the functional-value table instead.
    """
    records = manifest.get("records", [])
    if not records or not isinstance(records, list):
        raise ConfigError("manifest has no record series")
    if manifest.get("kind") == "bounds-table":
        ids = manifest.get("config", {}).get("bounds") or sorted(
            {b for r in records for b in (r.get("bounds") or {})}
        )
        grid = [dict(r["grid_point"]) for r in records]
        return compare_table(ids, grid).to_csv()
    usable = [r for r in records if "grid_point" in r and not isinstance(r["grid_point"], dict)]
    if not usable:
        raise ConfigError("manifest records carry no scalar grid points")
    if references is None:
        references = sorted({b for r in usable for b in (r.get("bounds") or {})})
    header = ["log_abscissa", "log_d_hat"] + [f"log_{b}" for b in references] + ["warning"]
    rows = []
    for r in sorted(usable, key=lambda r: float(r["grid_point"])):
        d_hat = r.get("d_hat", r.get("d_exact"))
        cells: list = [math.log(float(r["grid_point"]))]
        if d_hat is None or d_hat <= 0.0:
            cells += [None] + [None] * len(references) + ["excluded: d_hat = 0"]
        else:
            cells.append(math.log(float(d_hat)))
            warn = ""
            for b in references:
                value = (r.get("bounds") or {}).get(b)
                if value is None or value <= 0.0:
                    cells.append(None)
                    warn = f"missing reference {b}"
                else:
                    cells.append(math.log(float(value)))
            cells.append(warn)
        rows.append(cells)
    return _csv(header, rows, comment=f"log_convention={LOG_CONVENTION}")


# ---------------------------------------------------------------------------
# entry point


def _threads_from(args) -> int:
    if args.threads is not None:
        return max(1, int(args.threads))
    env = os.environ.get("MCLT_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError("MCLT_LAB_THREADS must be an integer") from None
    return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mclt-lab",
        description="martingale CLT rate laboratory",
    )
    parser.add_argument("--version", action="version", version=f"mclt-lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("simulate", "run the simulation stage of a rates config (no distances)"),
        ("rates", "simulate, estimate distances, and fit the decay rate"),
        ("bounds", "evaluate bound functionals on a parameter grid"),
        ("lipschitz", "exact distances and normalization pair for models"),
        ("verify", "run a lemma-suite or transforms-check config"),
        ("plot-data", "emit log-log plot columns from a manifest"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", required=True, help="path to the JSON config (or manifest for plot-data)")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--threads", type=int, default=None, help="worker thread cap")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        if name == "plot-data":
            p.add_argument("--reference", action="append", default=None,
                           help="bound id column to include (repeatable)")
    return parser


_COMMAND_KINDS = {
    "simulate": ("rates",),
    "rates": ("rates",),
    "bounds": ("bounds-table",),
    "lipschitz": ("lipschitz",),
    "verify": ("lemma-suite", "transforms-check"),
}


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "plot-data":
            try:
                manifest = json.loads(Path(args.config).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read manifest: {exc}") from None
            text = emit_plot_data(manifest, args.reference)
            if args.out:
                stager = OutputStager(args.out)
                stager.write_text("plot.csv", text)
                stager.commit()
            else:
                sys.stdout.write(text)
            return EXIT_OK
        cfg = load_config(args.config)
        if cfg.kind not in _COMMAND_KINDS[args.command]:
            raise ConfigError(
                f"subcommand {args.command!r} cannot run configs of kind {cfg.kind!r}"
            )
        if args.seed is not None:
            cfg.seed = int(args.seed)
        out_dir = args.out or cfg.out
        if not out_dir:
            raise ConfigError("no output directory: pass --out or set 'out' in the config")
        threads = _threads_from(args)
        run_experiment(
            cfg, out_dir, threads=threads, with_distance=(args.command != "simulate")
        )
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantViolation, InvalidKernelError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (KernelError, ValueError, RuntimeError) as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
