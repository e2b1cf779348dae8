"""Job files: schema validation and dispatch to the toolkit, producing run reports.

A job is a JSON object (see ``schemas/v1/job.json``).  ``execute`` returns a
report dict and an exit status: 0 success, 2 when the result is a
refutation or a failed check, 1 is reserved for errors raised as
``JobError`` or by the numerical routines.
"""
from __future__ import annotations

import csv
import io
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .density import (EPS_SCHEDULE, RefutationReport, certify_density, certify_subdiff_density,
                      hyperdense_check, minty_dense, minty_exact, pipeline_ok)
from .funcspec import DEFAULT_BOX, DownsideCertificate, parse_func
from .geometry import NormedSpace, dual_norm, norm
from .operators import SampledGraph, build_operator, graph_sample
from .polar import maximality_audit, polar_membership, polar_region
from .subdiff import subdiff_operator
from .suite import run_suite
from .varprinciples import br_project, ekeland_point

EXIT_OK, EXIT_ERROR, EXIT_NEGATIVE = 0, 1, 2


class JobError(ValueError):
    pass


def load_schema() -> dict:
    text = resources.files("rllab").joinpath("schemas/v1/job.json").read_text()
    return json.loads(text)


def validate(job: dict) -> None:
    try:
        jsonschema.validate(job, load_schema())
    except jsonschema.ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise JobError(f"job schema violation at {where}: {e.message}") from None


def load_job(path) -> dict:
    try:
        job = json.loads(Path(path).read_text())
    except OSError as e:
        raise JobError(f"cannot read job file: {e}") from None
    except json.JSONDecodeError as e:
        raise JobError(f"job file is not valid JSON: {e}") from None
    validate(job)
    return job


# -- resolving job fields --------------------------------------------------------

def _space(job) -> NormedSpace:
    return NormedSpace.from_json(job["space"])


def _func(job, space):
    if "f" not in job:
        raise JobError(f"command {job['command']!r} needs a function 'f'")
    return parse_func(job["f"], dim=space.dim, convex=job.get("convex", False))


def _graph(job, space):
    """The operator graph named by the job: sampled file, inline pairs, registry or subdiff."""
    if "graph" in job:
        try:
            data = json.loads(Path(job["graph"]).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise JobError(f"cannot load graph file: {e}") from None
        g = SampledGraph.from_json(data)
        if g.space != space:
            raise JobError(f"graph space {g.space.to_json()} differs from job space {space.to_json()}")
        return g
    if "pairs" in job:
        pairs = job["pairs"]
        return SampledGraph(space, [p[0] for p in pairs], [p[1] for p in pairs])
    if "operator" in job:
        op = job["operator"]
        try:
            return build_operator(op["name"], space, **op.get("params", {}))
        except (KeyError, TypeError) as e:
            raise JobError(f"bad operator spec: {e}") from None
    if "f" in job:
        return subdiff_operator(job.get("engine", "piecewise"), _func(job, space), space)
    raise JobError("job names no graph: give 'graph', 'pairs', 'operator' or 'f'")


def _box(job):
    return tuple(job.get("box", DEFAULT_BOX))


def _targets(job):
    if "targets" not in job:
        raise JobError(f"command {job['command']!r} needs 'targets'")
    return [(np.array(t[0], float), np.array(t[1], float)) for t in job["targets"]]


def _need(job, *keys):
    missing = [k for k in keys if k not in job]
    if missing:
        raise JobError(f"command {job['command']!r} needs {', '.join(missing)}")


def _pmap(fn, items, threads):
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- commands -------------------------------------------------------------------

def _cmd_certify(job, space, threads):
    A = _graph(job, space)
    eps = job.get("eps", list(EPS_SCHEDULE))
    budget = job.get("budget", 2001)
    results = _pmap(lambda t: certify_density(A, t, eps, _box(job), budget), _targets(job), threads)
    rows = []
    for i, r in enumerate(results):
        if isinstance(r, RefutationReport):
            continue
        for w in r.witnesses:
            rows.append([i, repr(w.eps), repr(w.gap),
                         repr(float(norm(space, w.pair.x - r.target.x))),
                         repr(float(dual_norm(space, w.pair.xstar - r.target.xstar)))])
    neg = any(isinstance(r, RefutationReport) for r in results)
    return ([r.to_json() for r in results], neg,
            _csv(rows, ["target", "eps", "gap", "primal_dist", "dual_dist"]))


def _cmd_certify_subdiff(job, space, threads):
    _need(job, "downside")
    f = _func(job, space)
    d = job["downside"]
    cert = DownsideCertificate(d["a0"], d.get("b0", 0.0), d.get("c0", 0.0))
    eps = job.get("eps", list(EPS_SCHEDULE))
    engine = job.get("engine", "piecewise")
    grid = job.get("grid", 2001)
    results = _pmap(lambda t: certify_subdiff_density(f, engine, cert, t, eps, space, _box(job), grid),
                    _targets(job), threads)
    out, rows = [], []
    for i, r in enumerate(results):
        j = r.to_json()
        j["pipeline_ok"] = pipeline_ok(r)
        out.append(j)
        for w in r.witnesses:
            rows.append([i, repr(w.eps), repr(w.gap),
                         repr(float(norm(space, w.pair.x - r.target.x))),
                         repr(float(dual_norm(space, w.pair.xstar - r.target.xstar)))])
    neg = not all(o["pipeline_ok"] for o in out)
    return out, neg, _csv(rows, ["target", "eps", "gap", "primal_dist", "dual_dist"])


def _cmd_minty(job, space, threads):
    if "ladder" in job:
        ns = job["ladder"]
        k = job.get("truncation")
        rows = minty_dense(ns, [k if k is not None and k <= n else None for n in ns])
        out = [r.to_json() for r in rows]
        csv_rows = [[r.n, repr(r.preimage_norm), repr(r.residual), r.truncation,
                     "" if r.truncation_residual_sq is None else repr(r.truncation_residual_sq)]
                    for r in rows]
        neg = any(r.residual > 1e-9 for r in rows)
        return out, neg, _csv(csv_rows, ["n", "preimage_norm", "residual", "truncation",
                                         "truncation_residual_sq"])
    _need(job, "ystar")
    S = _graph(job, space)
    r = minty_exact(S, job["ystar"], _box(job), job.get("grid", 2001))
    return [r.to_json()], not r.success, None


def _cmd_hyperdense(job, space, threads):
    _need(job, "ystar", "M")
    T = _graph(job, space)
    r = hyperdense_check(T, job["ystar"], job["M"], job.get("eps", list(EPS_SCHEDULE)),
                         grid_n=job.get("grid", 2001))
    return [r.to_json()], not r.success, None


def _cmd_polar(job, space, threads):
    A = _graph(job, space)
    seed = job.get("seed", 0)
    budget = job.get("budget", 2001)
    results, neg, text = [], False, None
    if job.get("audit"):
        box = job.get("region_box", [[-2.0, 2.0], [-2.0, 2.0]])
        rep = maximality_audit(A, box, job.get("grid", 81), budget=budget)
        results.append({"audit": rep.to_json()})
        neg = not rep.consistent_with_maximal
    G = A if isinstance(A, SampledGraph) else graph_sample(A, budget, seed, _box(job))
    if "point" in job:
        results.append({"membership": polar_membership(G, job["point"]).to_json()})
    if job.get("region"):
        box = job.get("region_box", [[-10.0, 10.0], [-2.0, 2.0]])
        reg = polar_region(G, box, job.get("grid", 400))
        results.append({"region": reg.to_json()})
        text = reg.to_csv()
    if not results:
        raise JobError("polar needs 'point', 'region' or 'audit'")
    return results, neg, text


def _cmd_ekeland(job, space, threads):
    _need(job, "u", "alpha", "beta")
    g = _func(job, space)
    r = ekeland_point(g, job["u"], job["alpha"], job["beta"], _box(job), job.get("grid", 2001), space)
    ok = r.decrease_ok and r.distance <= job["alpha"] + 1e-9 and r.strictmin_margin >= -1e-8
    return [r.to_json()], not ok, None


def _cmd_br(job, space, threads):
    _need(job, "u", "ustar", "alpha", "beta")
    f = _func(job, space)
    r = br_project(f, job.get("engine", "piecewise"), job["u"], job["ustar"], job["alpha"],
                   job["beta"], _box(job), job.get("grid", 2001), space)
    ok = (r.descent_ok and r.dist_primal <= job["alpha"] + 1e-6
          and r.dist_dual <= job["beta"] + 1e-6)
    return [r.to_json()], not ok, None


def _cmd_examples(job, space, threads):
    entries = run_suite(threads)
    return entries, not all(e["passed"] for e in entries), None


COMMANDS = {
    "certify": _cmd_certify,
    "certify-subdiff": _cmd_certify_subdiff,
    "minty": _cmd_minty,
    "hyperdense": _cmd_hyperdense,
    "polar": _cmd_polar,
    "ekeland": _cmd_ekeland,
    "br": _cmd_br,
    "examples": _cmd_examples,
}


def execute(job: dict, threads: int | None = None, canonical: bool = False):
    """Validate and run a job; returns ``(report, csv_text_or_None, exit_status)``."""
    validate(job)
    threads = threads or job.get("threads") or os.cpu_count() or 1
    space = _space(job)
    start = time.perf_counter()
    results, negative, text = COMMANDS[job["command"]](job, space, threads)
    report = {
        "tool": "rl-lab",
        "version": __version__,
        "command": job["command"],
        # output paths and thread counts do not affect results
        "job": {k: v for k, v in job.items() if k not in ("outputs", "threads")},
        "seed": job.get("seed", 0),
        "status": "negative" if negative else "ok",
        "results": results,
    }
    if not canonical:
        report["wall_time"] = time.perf_counter() - start
    return report, text, EXIT_NEGATIVE if negative else EXIT_OK


def dumps(report: dict, canonical: bool = False) -> str:
    if canonical:
        return json.dumps(report, sort_keys=True, indent=2, allow_nan=True) + "\n"
    return json.dumps(report, indent=2, allow_nan=True) + "\n"
