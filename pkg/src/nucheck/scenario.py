"""Declarative scenarios: parsing, validation, execution and reports.

A scenario is an INI-style file with ``key = value`` entries; ``#`` starts
a comment (``;`` is reserved for polynomial coefficients)::

    [scenario]
    id = identity-m1
    tasks = m1, m_alpha

    [weights]
    nu = standard:1
    mu = standard:1

    [functions]
    g = poly:[0,0;1,0]
    phi = z
    family = poly:[1,0] | z        # only for as_probe

    [parameters]
    alpha = 2
    beta = 1                       # Bloch-order tasks
    gamma = 1
    kind = T                       # operator kind for oracle tasks

    [resolution]                   # all optional
    k_min = 2
    k_max = 12

    [output]                       # optional, relative to the output dir
    csv = identity-m1.csv
    json = identity-m1.json
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import criteria as cr
from . import oplab
from .analytic import certify_self_map
from .errors import ConstructionError, NucheckError, ParseError, RefusalError
from .quad import SupSolverConfig, dyadic_schedule
from .specs import parse_function
from .weights import check_normality, parse_weight

__all__ = [
    "ScenarioConfig",
    "parse_scenario",
    "serialize_scenario",
    "load_scenario",
    "run_scenario",
    "CSV_COLUMNS",
    "TASKS",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_NUMERIC",
    "rows_to_csv",
    "rows_to_markdown",
]

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

CSV_COLUMNS = (
    "scenario_id", "task", "kind", "alpha", "beta", "gamma", "rho", "value",
    "verdict", "extrapolated", "rate", "argmax_re", "argmax_im", "note",
)

_WEIGHTED = {"g", "phi", "nu", "mu"}
TASKS = {
    "normality": {"nu"},
    "m1": _WEIGHTED,
    "s_sup": _WEIGHTED,
    "m_alpha": _WEIGHTED | {"alpha"},
    "n_alpha": _WEIGHTED | {"alpha"},
    "p_alpha": {"g", "phi", "alpha", "beta", "gamma"},
    "q_alpha": {"g", "phi", "alpha", "beta", "gamma"},
    "bloch_m": {"g", "phi"},
    "truncate": {"g", "phi"},
    "norm_lower": _WEIGHTED,
    "nuclear": _WEIGHTED | {"alpha"},
    "as_probe": _WEIGHTED | {"family"},
    "compactness": _WEIGHTED,
}

RESOLUTION_DEFAULTS = {
    "k_min": 2,
    "k_max": 12,
    "n_per_panel": 8,
    "n_theta": 32,
    "sup_n_r": 64,
    "sup_n_theta": 128,
    "truncation_degree": 64,
    "compactness_degree": 16,
}

_SECTIONS = {
    "scenario": ("id", "tasks"),
    "weights": ("nu", "mu"),
    "functions": ("g", "phi", "family"),
    "parameters": ("alpha", "beta", "gamma", "kind"),
    "resolution": tuple(RESOLUTION_DEFAULTS),
    "output": ("csv", "json"),
}
_FIELD_SECTION = {k: s for s, keys in _SECTIONS.items() for k in keys}


@dataclass(frozen=True)
class ScenarioConfig:
    """Validated scenario; text fields hold normalized specifications."""

    id: str
    tasks: tuple
    nu: Optional[str] = None
    mu: Optional[str] = None
    g: Optional[str] = None
    phi: Optional[str] = None
    family: tuple = ()
    alpha: Optional[float] = None
    beta: Optional[float] = None
    gamma: Optional[float] = None
    kind: str = "T"
    resolution: tuple = field(default_factory=lambda: tuple(sorted(RESOLUTION_DEFAULTS.items())))
    csv: Optional[str] = None
    json: Optional[str] = None

    @property
    def res(self):
        return dict(self.resolution)

    def schedule(self):
        r = self.res
        return dyadic_schedule(r["k_min"], r["k_max"])

    def solver(self):
        r = self.res
        return SupSolverConfig(n_r=r["sup_n_r"], n_theta=r["sup_n_theta"], tol=1e-12)

    def weight(self, name):
        text = getattr(self, name)
        return None if text is None else parse_weight(text)

    def function(self, name):
        text = getattr(self, name)
        if text is None:
            return None
        f = parse_function(text)
        return certify_self_map(f) if name == "phi" else f

    def to_dict(self):
        d = asdict(self)
        d["tasks"] = list(self.tasks)
        d["family"] = list(self.family)
        d["resolution"] = dict(self.resolution)
        return d


# ---------------------------------------------------------------------------
# Parsing
# ---------------------------------------------------------------------------


def _line_index(text):
    """Map ``(section, key)`` and ``section`` to 1-based line numbers."""
    where, section = {}, None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip().lower()
            where.setdefault(section, n)
        elif "=" in line and section is not None:
            where.setdefault((section, line.split("=", 1)[0].strip().lower()), n)
    return where


def _float(value, key, line):
    try:
        x = float(value)
    except ValueError as exc:
        raise ParseError(f"expected a number, got {value!r}", key, line) from exc
    if not math.isfinite(x):
        raise ParseError(f"expected a finite number, got {value!r}", key, line)
    return x


def parse_scenario(text):
    """Parse and validate scenario text into a :class:`ScenarioConfig`.

    Every specification is parsed (weights, functions, self-map
    certificate) so that errors surface here, with line and field.

    Raises
    ------
    ParseError
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ParseError(f"malformed scenario file: {exc}") from exc
    lines = _line_index(text)
    values = {}
    for section in cp.sections():
        s = section.lower()
        if s not in _SECTIONS:
            raise ParseError(f"unknown section [{section}]", line=lines.get(s))
        for key, val in cp.items(section):
            if key not in _SECTIONS[s]:
                raise ParseError(f"unknown key in [{s}]", key, lines.get((s, key)))
            values[key] = (val.strip(), lines.get((s, key)))

    def get(key):
        return values[key] if key in values else (None, None)

    sid, ln = get("id")
    if not sid:
        raise ParseError("missing required field", "id", ln or lines.get("scenario"))
    tasks_text, ln = get("tasks")
    tasks = tuple(t.strip() for t in (tasks_text or "").split(",") if t.strip())
    if not tasks:
        raise ParseError("task list must be non-empty", "tasks", ln or lines.get("scenario"))
    for t in tasks:
        if t not in TASKS:
            raise ParseError(f"unknown task {t!r}", "tasks", ln)

    out = {"id": sid, "tasks": tasks}
    for key in ("nu", "mu"):
        text_, ln = get(key)
        if text_ is not None:
            try:
                out[key] = parse_weight(text_).spec()
            except ParseError as exc:
                raise ParseError(str(exc), key, ln) from exc
    for key in ("g", "phi"):
        text_, ln = get(key)
        if text_ is not None:
            try:
                f = parse_function(text_)
                if key == "phi":
                    certify_self_map(f)
            except (ParseError, ConstructionError) as exc:
                raise ParseError(str(exc), key, ln) from exc
            out[key] = f.spec()
    text_, ln = get("family")
    if text_ is not None:
        fam = []
        for part in text_.split("|"):
            try:
                fam.append(parse_function(part.strip()).spec())
            except ParseError as exc:
                raise ParseError(str(exc), "family", ln) from exc
        if not 1 <= len(fam) <= oplab.MAX_FAMILY:
            raise ParseError(f"family size must lie in 1..{oplab.MAX_FAMILY}", "family", ln)
        out["family"] = tuple(fam)
    for key in ("alpha", "beta", "gamma"):
        text_, ln = get(key)
        if text_ is not None:
            out[key] = _float(text_, key, ln)
    if "alpha" in out and not out["alpha"] > -1:
        raise ParseError("alpha must exceed -1", "alpha", get("alpha")[1])
    kind, ln = get("kind")
    if kind is not None:
        if kind not in ("T", "S"):
            raise ParseError(f"kind must be T or S, got {kind!r}", "kind", ln)
        out["kind"] = kind
    res = dict(RESOLUTION_DEFAULTS)
    for key in RESOLUTION_DEFAULTS:
        text_, ln = get(key)
        if text_ is not None:
            try:
                res[key] = int(text_)
            except ValueError as exc:
                raise ParseError(f"expected an integer, got {text_!r}", key, ln) from exc
            if res[key] < 0:
                raise ParseError("resolution values must be non-negative", key, ln)
    if res["k_max"] - res["k_min"] < 3 or res["k_min"] < 1:
        raise ParseError("need k_min >= 1 and at least 4 truncation radii", "k_max", get("k_max")[1])
    out["resolution"] = tuple(sorted(res.items()))
    for key in ("csv", "json"):
        text_, _ = get(key)
        if text_:
            out[key] = text_

    present = {k for k in ("nu", "mu", "g", "phi", "alpha", "beta", "gamma") if k in out}
    if "family" in out:
        present.add("family")
    for t in tasks:
        missing = sorted(TASKS[t] - present)
        if missing:
            key = missing[0]
            raise ParseError(f"task {t!r} requires field {key!r}", key,
                             lines.get(_FIELD_SECTION[key]))
    return ScenarioConfig(**out)


def serialize_scenario(config):
    """Scenario text that parses back to an identical config."""
    def fmt(x):
        return repr(float(x))

    lines = ["[scenario]", f"id = {config.id}", f"tasks = {', '.join(config.tasks)}", ""]
    w = [(k, getattr(config, k)) for k in ("nu", "mu") if getattr(config, k) is not None]
    if w:
        lines += ["[weights]"] + [f"{k} = {v}" for k, v in w] + [""]
    f = [(k, getattr(config, k)) for k in ("g", "phi") if getattr(config, k) is not None]
    if config.family:
        f.append(("family", " | ".join(config.family)))
    if f:
        lines += ["[functions]"] + [f"{k} = {v}" for k, v in f] + [""]
    lines += ["[parameters]"]
    lines += [f"{k} = {fmt(getattr(config, k))}" for k in ("alpha", "beta", "gamma")
              if getattr(config, k) is not None]
    lines += [f"kind = {config.kind}", "", "[resolution]"]
    lines += [f"{k} = {v}" for k, v in config.resolution] + [""]
    o = [(k, getattr(config, k)) for k in ("csv", "json") if getattr(config, k)]
    if o:
        lines += ["[output]"] + [f"{k} = {v}" for k, v in o] + [""]
    return "\n".join(lines)


def load_scenario(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read scenario {path}: {exc}") from exc
    return parse_scenario(text)


# ---------------------------------------------------------------------------
# Execution
# ---------------------------------------------------------------------------


def _num(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    return repr(float(x))


def _row(cfg, task, **kw):
    row = {c: "" for c in CSV_COLUMNS}
    row.update(scenario_id=cfg.id, task=task)
    for k, v in kw.items():
        row[k] = v if isinstance(v, str) else _num(v)
    return row


def _criterion_rows(cfg, task, rep):
    sp = rep.spec
    rows = []
    for k, (rho, val) in enumerate(zip(rep.radii, rep.values)):
        d = rep.diagnostics[k] if k < len(rep.diagnostics) else None
        rows.append(_row(
            cfg, task, kind=sp.kind, alpha=sp.alpha, beta=sp.beta, gamma=sp.gamma, rho=rho,
            value=val, verdict=rep.kind, extrapolated=rep.value, rate=rep.rate,
            argmax_re=None if d is None else d.argmax.real,
            argmax_im=None if d is None else d.argmax.imag, note=rep.note,
        ))
    return rows


def _sup_rows(cfg, task, res):
    flag = "unbounded" if res.unbounded else ("at_boundary" if res.at_boundary else "")
    return [_row(cfg, task, value=res.value, argmax_re=res.argmax.real,
                 argmax_im=res.argmax.imag, note=flag)]


def _run_task(cfg, task, ctx):
    """Execute one task; returns ``(json record, csv rows)``."""
    res = cfg.res
    kw = dict(schedule=cfg.schedule(), n_per_panel=res["n_per_panel"], n_theta=res["n_theta"],
              solver=ctx["solver"])
    g, phi, nu, mu = ctx["g"], ctx["phi"], ctx["nu"], ctx["mu"]
    alpha = cfg.alpha
    if task == "normality":
        recs, rows = [], []
        for name in ("nu", "mu"):
            w = ctx[name]
            if w is None:
                continue
            rep = check_normality(w)
            recs.append({"weight": name, "spec": w.spec(), "verdict": rep.verdict,
                         "conditionI_inf": rep.conditionI_inf, "beta": rep.beta_estimate,
                         "conditionII_k": rep.conditionII_k, "conditionII_limsup": rep.conditionII_limsup,
                         "gamma": rep.gamma_estimate, "certified": rep.certified})
            rows.append(_row(cfg, task, kind=name, beta=rep.beta_estimate, gamma=rep.gamma_estimate,
                             value=rep.conditionI_inf, verdict=rep.verdict,
                             note=f"{w.spec()}; conditionII_k={rep.conditionII_k}"))
        return {"weights": recs}, rows
    if task in ("m1", "s_sup"):
        fn = cr.criterion_M1 if task == "m1" else cr.criterion_S_sup
        r = fn(g, phi, nu, mu, ctx["solver"])
        rec = {"value": r.value, "argmax": [r.argmax.real, r.argmax.imag],
               "at_boundary": r.at_boundary, "unbounded": r.unbounded}
        return rec, _sup_rows(cfg, task, r)
    if task in ("m_alpha", "n_alpha"):
        fn = cr.m_alpha if task == "m_alpha" else cr.n_alpha
        rep = fn(g, phi, nu, mu, alpha, **kw)
        ctx["criterion"][task] = rep
        return rep.to_dict(), _criterion_rows(cfg, task, rep)
    if task in ("p_alpha", "q_alpha"):
        fn = cr.p_alpha if task == "p_alpha" else cr.q_alpha
        rep = fn(g, phi, alpha, cfg.beta, cfg.gamma, **kw)
        return rep.to_dict(), _criterion_rows(cfg, task, rep)
    if task == "bloch_m":
        bkw = dict(kw)
        if (res["k_min"], res["k_max"]) == (RESOLUTION_DEFAULTS["k_min"], RESOLUTION_DEFAULTS["k_max"]):
            bkw.pop("schedule")
        printed, derived = cr.criterion_bloch_M(g, phi, **bkw)
        rows = _criterion_rows(cfg, "bloch_m_printed", printed) + _criterion_rows(cfg, "bloch_m_derived", derived)
        return {"printed": printed.to_dict(), "derived": derived.to_dict()}, rows
    if task == "truncate":
        tr = oplab.truncation_matrix(cfg.kind, g, phi, res["truncation_degree"])
        M = tr.matrix
        norm = float(np.linalg.norm(M, 2))
        rec = {"N": tr.N, "shape": list(M.shape),
               "real": M.real.tolist(), "imag": M.imag.tolist(), "spectral_norm": norm}
        return rec, [_row(cfg, task, kind=cfg.kind, value=norm, note=f"N={tr.N}; rows={M.shape[0]}")]
    if task == "norm_lower":
        bound, witness = oplab.operator_norm_lower(cfg.kind, g, phi, nu, mu, solver=ctx["solver"])
        return {"bound": bound, "witness": witness}, [_row(cfg, task, kind=cfg.kind, value=bound, note=witness)]
    if task == "nuclear":
        crit = ctx["criterion"].get("m_alpha" if cfg.kind == "T" else "n_alpha")
        try:
            dec = oplab.nuclear_decomposition(g, phi, nu, mu, alpha, kind=cfg.kind, criterion=crit, **kw)
        except RefusalError as exc:
            return ({"status": "refused", "reason": str(exc)},
                    [_row(cfg, task, kind=cfg.kind, alpha=alpha, verdict="Refused", note=str(exc))])
        rec = dec.to_dict()
        rec["status"] = "ok"
        return rec, [_row(cfg, task, kind=cfg.kind, alpha=alpha, value=dec.total, verdict="Finite",
                          note=f"terms={len(dec)}" + ("; slack" if dec.slack else ""))]
    if task == "as_probe":
        fam = [parse_function(t) for t in cfg.family]
        ratio = oplab.absolutely_summing_probe(cfg.kind, g, phi, nu, mu, fam, solver=ctx["solver"])
        return {"ratio": ratio}, [_row(cfg, task, kind=cfg.kind, value=ratio, note=f"n={len(fam)}")]
    if task == "compactness":
        label = oplab.compactness_probe(cfg.kind, g, phi, nu, mu, res["compactness_degree"], ctx["solver"])
        return {"verdict": label}, [_row(cfg, task, kind=cfg.kind, verdict=label)]
    raise ParseError(f"unknown task {task!r}", "tasks")


def rows_to_csv(rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def rows_to_markdown(rows):
    head = "| " + " | ".join(CSV_COLUMNS) + " |"
    sep = "|" + "|".join("---" for _ in CSV_COLUMNS) + "|"
    body = ["| " + " | ".join(str(r.get(c, "")).replace("|", "\\|") for c in CSV_COLUMNS) + " |"
            for r in rows]
    return "\n".join([head, sep] + body) + "\n"


def _write(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def run_scenario(config, out_dir="."):
    """Run every task in order and write the CSV and JSON reports.

    Returns
    -------
    (int, dict)
        Exit status (0 ok, 3 numerical error) and the JSON report.  A
        refused nuclear decomposition is recorded, not an error.
    """
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, config.csv or f"{config.id}.csv")
    json_path = os.path.join(out_dir, config.json or f"{config.id}.json")
    status, error = EXIT_OK, None
    results, rows = [], []
    ctx = {
        "g": config.function("g"), "phi": config.function("phi"),
        "nu": config.weight("nu"), "mu": config.weight("mu"),
        "solver": config.solver(), "criterion": {},
    }
    for task in config.tasks:
        try:
            rec, task_rows = _run_task(config, task, ctx)
        except NucheckError as exc:
            status, error = EXIT_NUMERIC, f"{task}: {type(exc).__name__}: {exc}"
            results.append({"task": task, "status": "error", "error": str(exc)})
            break
        rec = dict(rec)
        rec.setdefault("status", "ok")
        rec["task"] = task
        rec["rows"] = task_rows
        results.append(rec)
        rows.extend(task_rows)
    report = {
        "schema_version": SCHEMA_VERSION,
        "scenario": config.to_dict(),
        "status": "ok" if status == EXIT_OK else "error",
        "error": error,
        "columns": list(CSV_COLUMNS),
        "results": results,
    }
    _write(csv_path, rows_to_csv(rows))
    _write(json_path, json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n")
    return status, report


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    raise TypeError(f"not JSON serializable: {type(x).__name__}")
