"""CSV/JSON ingestion and persistence.

Datasets travel as CSV with required columns `cluster`, `time`, `status`;
every remaining numeric column is a covariate, in header order.  Floats
are serialized with 17 significant digits so a write-read round trip is
exact.  Every CSV output starts with a `#` comment line carrying the
package version, the seed, and (where intervals are involved) the interval
convention.  JSON reports carry version and seed as ordinary keys, with
sorted keys and no locale-dependent formatting.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._version import __version__
from .data import ObservationRecord
from .hazards import TimeGrid
from .inference import FitResult
from .likelihood import ModelSpec, ParameterVector
from .mcstudy import McStudyResult, StudyFitSettings
from .simulate import Censoring, Scenario
from .waic import WaicResult

REQUIRED_COLUMNS = ("cluster", "time", "status")
INTERVAL_NOTE = "interval=95% equal-tailed"


class ParseError(ValueError):
    """Malformed input file; the message names the offending row/column."""


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _header_comment(seed, note: str = "") -> str:
    parts = [f"# frailtykit {__version__}", f"seed={seed}"]
    if note:
        parts.append(note)
    return " ".join(parts)


def read_covariate_names(path) -> list[str]:
    """Covariate column names of a dataset CSV, in header order."""
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row and row[0].startswith("#"):
                continue
            header = [c.strip() for c in row]
            break
        else:
            raise ParseError(f"{path}: empty file")
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise ParseError(f"{path}: missing required column '{col}'")
    return [c for c in header if c not in REQUIRED_COLUMNS]


def read_dataset(path) -> list[ObservationRecord]:
    """Read and validate a dataset CSV.

    Raises :class:`ParseError` naming the (1-based) data row and the
    column for any malformed value.
    """
    path = str(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise ParseError(f"{path}: missing required column '{col}'")
    index = {c: i for i, c in enumerate(header)}
    cov_cols = [c for c in header if c not in REQUIRED_COLUMNS]

    records = []
    for rownum, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise ParseError(
                f"{path}: row {rownum}: expected {len(header)} fields, got {len(row)}"
            )

        def cell(col: str) -> str:
            return row[index[col]].strip()

        try:
            cluster = int(cell("cluster"))
        except ValueError:
            raise ParseError(
                f"{path}: row {rownum}, column 'cluster': not an integer "
                f"({cell('cluster')!r})"
            ) from None
        try:
            time = float(cell("time"))
        except ValueError:
            raise ParseError(
                f"{path}: row {rownum}, column 'time': not a number ({cell('time')!r})"
            ) from None
        if not time > 0 or not math.isfinite(time):
            raise ParseError(
                f"{path}: row {rownum}, column 'time': must be positive, got {cell('time')}"
            )
        status_text = cell("status")
        if status_text not in ("0", "1"):
            raise ParseError(
                f"{path}: row {rownum}, column 'status': must be 0 or 1, got {status_text!r}"
            )
        covariates = []
        for col in cov_cols:
            try:
                covariates.append(float(cell(col)))
            except ValueError:
                raise ParseError(
                    f"{path}: row {rownum}, column '{col}': not a number ({cell(col)!r})"
                ) from None
        records.append(
            ObservationRecord(
                cluster_id=cluster, time=time, status=int(status_text), covariates=tuple(covariates)
            )
        )
    if not records:
        raise ParseError(f"{path}: no data rows")
    return records


def write_dataset(
    path,
    records: Sequence[ObservationRecord],
    seed,
    covariate_names: Sequence[str] | None = None,
):
    """Write a dataset CSV (17-significant-digit float serialization)."""
    if not records:
        raise ValueError("no records to write")
    p = len(records[0].covariates)
    names = list(covariate_names) if covariate_names else [f"x{j + 1}" for j in range(p)]
    if len(names) != p:
        raise ValueError("covariate_names length does not match the records")
    with open(path, "w", newline="") as fh:
        fh.write(_header_comment(seed) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(REQUIRED_COLUMNS) + names)
        for rec in records:
            writer.writerow(
                [rec.cluster_id, _fmt(rec.time), rec.status] + [_fmt(v) for v in rec.covariates]
            )


# ---------------------------------------------------------------------------
# scenario configuration


_SCENARIO_KEYS = {
    "baseline", "frailty", "cutpoints", "rates", "degree", "horizon",
    "basis_coefs", "beta", "frailty_variance", "n_clusters", "cluster_size",
    "covariates", "censoring", "seed", "fit",
}
_FIT_KEYS = {"iterations", "burnin", "thin", "chains", "rhat_threshold"}
_CENSORING_KEYS = {"type", "time", "target_proportion"}


def _reject_unknown(obj: dict, allowed: set, where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ParseError(f"{where}: unknown key(s) {sorted(unknown)}")


def _parse_censoring(obj) -> Censoring:
    if obj is None:
        return Censoring()
    if not isinstance(obj, dict):
        raise ParseError("censoring: expected an object")
    _reject_unknown(obj, _CENSORING_KEYS, "censoring")
    kind = obj.get("type", "none")
    return Censoring(
        kind=kind,
        time=obj.get("time"),
        target_proportion=obj.get("target_proportion"),
    )


def load_scenario_config(path) -> tuple[Scenario, StudyFitSettings]:
    """Load a scenario JSON file.

    Returns the scenario and the sampler settings for study fits (defaults
    when the optional "fit" section is absent).  Unknown keys anywhere in
    the document are errors.
    """
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{path}: expected a JSON object")
    _reject_unknown(doc, _SCENARIO_KEYS, str(path))

    def need(key):
        if key not in doc:
            raise ParseError(f"{path}: missing required key '{key}'")
        return doc[key]

    baseline = need("baseline")
    frailty = need("frailty")
    try:
        if baseline == "pe":
            spec = ModelSpec(
                baseline="pe",
                frailty=frailty,
                grid=TimeGrid(cutpoints=np.asarray(need("cutpoints"), dtype=float)),
            )
            params = ParameterVector(
                rates=np.asarray(need("rates"), dtype=float),
                beta=np.asarray(doc.get("beta", []), dtype=float),
                frailty_var=float(doc.get("frailty_variance", 0.0)),
            )
        elif baseline == "bp":
            spec = ModelSpec(
                baseline="bp",
                frailty=frailty,
                degree=int(need("degree")),
                horizon=float(need("horizon")),
            )
            params = ParameterVector(
                basis_coefs=np.asarray(need("basis_coefs"), dtype=float),
                beta=np.asarray(doc.get("beta", []), dtype=float),
                frailty_var=float(doc.get("frailty_variance", 0.0)),
            )
        else:
            raise ParseError(f"{path}: baseline must be 'pe' or 'bp', got {baseline!r}")

        scenario = Scenario(
            spec=spec,
            params=params,
            n_clusters=int(need("n_clusters")),
            cluster_size=int(need("cluster_size")),
            covariate_kinds=tuple(doc.get("covariates", [])),
            censoring=_parse_censoring(doc.get("censoring")),
            seed=int(need("seed")),
        )
    except ParseError:
        raise
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{path}: {exc}") from None

    fit_doc = doc.get("fit", {})
    if not isinstance(fit_doc, dict):
        raise ParseError(f"{path}: 'fit' must be an object")
    _reject_unknown(fit_doc, _FIT_KEYS, f"{path}: fit")
    try:
        settings = StudyFitSettings(**fit_doc)
    except (ValueError, TypeError) as exc:
        raise ParseError(f"{path}: fit: {exc}") from None
    return scenario, settings


# ---------------------------------------------------------------------------
# fit outputs


@dataclass
class FitReport:
    """Serializable record of one model fit.

    `wall_clock_seconds` stays on the object (and in the console log) but
    is omitted from the JSON file so repeated runs with the same seed are
    byte-identical.
    """

    result: FitResult
    seed: object
    wall_clock_seconds: float
    settings: dict

    def to_dict(self) -> dict:
        res = self.result
        spec = res.spec
        model: dict = {"baseline": spec.baseline, "frailty": spec.frailty}
        if spec.baseline == "pe":
            model["n_intervals"] = spec.grid.n_intervals
            model["cutpoints"] = [float(c) for c in spec.grid.cutpoints]
        else:
            model["degree"] = spec.degree
            model["horizon"] = spec.horizon
        diag = res.diagnostics
        names = res.param_names
        return {
            "version": __version__,
            "seed": _seed_json(self.seed),
            "model": model,
            "interval": {"level": res.level, "type": "equal-tailed"},
            "n_records": res.n_records,
            "n_clusters": res.n_clusters,
            "sampler": self.settings,
            "parameters": [
                {
                    "name": name,
                    "mean": res.summary[name].mean,
                    "sd": res.summary[name].sd,
                    "lower": res.summary[name].lower,
                    "upper": res.summary[name].upper,
                }
                for name in names
            ],
            "diagnostics": {
                "available": diag.available,
                "rhat": {n: float(diag.rhat[i]) for i, n in enumerate(names)} if diag.available else None,
                "ess": {n: float(diag.ess[i]) for i, n in enumerate(names)} if diag.available else None,
                "acceptance": [[float(a) for a in row] for row in res.draws.acceptance],
            },
            "waic": {
                "lppd": res.waic.lppd,
                "p_waic": res.waic.p_waic,
                "elppd_waic": res.waic.elppd_waic,
                "waic": res.waic.waic,
                "n_points": res.waic.n_points,
                "pointwise": [float(v) for v in res.waic.pointwise],
            },
        }


def _seed_json(seed):
    if isinstance(seed, (tuple, list)):
        return [int(s) for s in seed]
    return int(seed)


def _json_dump(doc: dict, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2, allow_nan=True)
        fh.write("\n")


def write_fit_outputs(report: FitReport, out_dir, save_draws: bool = False) -> dict:
    """Write fit_report.json, posterior_summary.csv, and optionally
    draws.csv under `out_dir`; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    res = report.result
    paths = {"report": out / "fit_report.json", "summary": out / "posterior_summary.csv"}
    _json_dump(report.to_dict(), paths["report"])

    diag = res.diagnostics
    with open(paths["summary"], "w", newline="") as fh:
        fh.write(_header_comment(_seed_json(report.seed), INTERVAL_NOTE) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["parameter", "mean", "sd", "lower", "upper", "rhat", "ess"])
        for i, name in enumerate(res.param_names):
            s = res.summary[name]
            rhat = diag.rhat[i] if diag.available else float("nan")
            ess = diag.ess[i] if diag.available else float("nan")
            writer.writerow(
                [name, _fmt(s.mean), _fmt(s.sd), _fmt(s.lower), _fmt(s.upper), _fmt(rhat), _fmt(ess)]
            )

    if save_draws:
        paths["draws"] = out / "draws.csv"
        with open(paths["draws"], "w", newline="") as fh:
            fh.write(_header_comment(_seed_json(report.seed)) + "\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(res.param_names)
            for row in res.draws.draws:
                writer.writerow([_fmt(v) for v in row])
    return paths


def load_fit_report(path) -> dict:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON ({exc})") from None
    if "waic" not in doc or "pointwise" not in doc.get("waic", {}):
        raise ParseError(f"{path}: not a fit report (missing waic block)")
    return doc


def waic_result_from_report(doc: dict) -> WaicResult:
    w = doc["waic"]
    return WaicResult(
        lppd=float(w["lppd"]),
        p_waic=float(w["p_waic"]),
        elppd_waic=float(w["elppd_waic"]),
        waic=float(w["waic"]),
        pointwise=np.asarray(w["pointwise"], dtype=float),
    )


# ---------------------------------------------------------------------------
# study outputs


def write_mc_outputs(result: McStudyResult, out_dir) -> dict:
    """Write mc_metrics.csv and replicas.csv; WARN annotations appear as
    extra comment lines after the header."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"metrics": out / "mc_metrics.csv", "replicas": out / "replicas.csv"}

    with open(paths["metrics"], "w", newline="") as fh:
        fh.write(_header_comment(result.seed, INTERVAL_NOTE) + "\n")
        for msg in result.warnings:
            fh.write(f"# WARN {msg}\n")
        if result.study_failed:
            fh.write(
                f"# FAILED {result.n_flagged}/{result.n_replicas} replicas flagged (> 20%)\n"
            )
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["parameter", "truth", "est", "rb_percent", "ase", "sde", "cp", "m_c"])
        for row in result.rows:
            writer.writerow(
                [
                    row.parameter,
                    _fmt(row.truth),
                    _fmt(row.est),
                    _fmt(row.rb_percent),
                    _fmt(row.ase),
                    _fmt(row.sde),
                    _fmt(row.cp),
                    row.n_replicas,
                ]
            )

    with open(paths["replicas"], "w", newline="") as fh:
        fh.write(_header_comment(result.seed, INTERVAL_NOTE) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["replica", "parameter", "estimate", "se", "lower", "upper",
             "covered", "max_rhat", "min_ess", "flagged", "flag_reason"]
        )
        for rec in result.replicas:
            for j, name in enumerate(result.param_names):
                writer.writerow(
                    [
                        rec.index,
                        name,
                        _fmt(rec.fit.estimates[j]),
                        _fmt(rec.fit.ses[j]),
                        _fmt(rec.fit.lower[j]),
                        _fmt(rec.fit.upper[j]),
                        int(rec.covered[j]),
                        _fmt(rec.fit.max_rhat),
                        _fmt(rec.fit.min_ess),
                        int(rec.flagged),
                        rec.flag_reason,
                    ]
                )
    return paths


def write_compare_report(rows: list[dict], out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "waic_compare.json"
    doc = {
        "version": __version__,
        "seed": None,
        "criterion": "waic (lower is better)",
        "models": rows,
    }
    _json_dump(doc, path)
    return path
