"""The reference examples, run end to end and compared with the table in ``data/``.

Each table entry says whether its expected values come from a closed form
(``closed_form``) or from an independent direct computation (``computed``).
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from importlib import resources

from .density import certify_density, certify_subdiff_density, minty_dense, pipeline_ok
from .funcspec import DownsideCertificate, parse_func
from .geometry import NormedSpace, rl
from .operators import build_operator, graph_sample
from .polar import maximality_audit, polar_region
from .subdiff import subdiff_operator

LINE = NormedSpace(1)


def _subdiff(text, engine="polynomial"):
    return subdiff_operator(engine, parse_func(text), LINE)


def _rl_line():
    return {"value": rl(LINE, [1.0], [1.0])}


def _quadratic_below_half():
    f = parse_func("-0.25*x1^2")
    cert = DownsideCertificate(0.25)
    targets = [([-1.0], [1.0]), ([0.0], [0.0]), ([1.0], [1.0]), ([2.0], [-1.0]), ([0.5], [0.25])]
    certs = [certify_subdiff_density(f, "polynomial", cert, t) for t in targets]
    return {"certified": sum(pipeline_ok(c) for c in certs),
            "bounds_fixed_per_target": all(c.within_stable_bound() for c in certs)}


def _quadratic_at_half():
    r = certify_density(_subdiff("-0.5*x1^2"), ([0.0], [1.0]))
    return {"kind": r.kind, "delta": r.delta}


def _quadratic_above_half():
    r = certify_density(_subdiff("-1*x1^2"), ([2.0], [3.0]))
    w = r.witnesses[-1]
    return {"kind": r.kind, "s": float(w.pair.x[0]), "sstar": float(w.pair.xstar[0]), "gap": w.gap}


def _cubic():
    r = certify_density(_subdiff("x1^3"), ([0.0], [-1.0]))
    return {"kind": r.kind, "delta": r.delta}


def _sin_polar():
    G = graph_sample(build_operator("cos", LINE), 2001, box=(-10.0, 10.0))
    return {"in_count": polar_region(G, ((-10.0, 10.0), (-2.0, 2.0)), 400).count}


def _ladder():
    rows = minty_dense((10, 100, 1000))
    return {"norms": [r.preimage_norm for r in rows], "residuals": [r.residual for r in rows]}


def _ladder_truncation():
    rows = minty_dense((100,), (10,))
    return {"residual_sq": rows[0].truncation_residual_sq}


def _abs_maximality():
    rep = maximality_audit(build_operator("subdiff_abs", LINE), delta=0.05)
    return {"violations": len(rep.violations)}


EXAMPLES = {
    "rl_real_line": _rl_line,
    "quadratic_below_half": _quadratic_below_half,
    "quadratic_at_half": _quadratic_at_half,
    "quadratic_above_half": _quadratic_above_half,
    "cubic_refutation": _cubic,
    "sin_polar_empty": _sin_polar,
    "ladder_preimages": _ladder,
    "ladder_truncation": _ladder_truncation,
    "abs_maximality": _abs_maximality,
}


def expected_table() -> dict:
    text = resources.files("rllab").joinpath("data/expected_examples.json").read_text()
    return {e["id"]: e for e in json.loads(text)["examples"]}


def compare(got, expected, tol: float, path: str = "") -> list:
    """Differences between a result and its expectation as readable strings."""
    if isinstance(expected, dict):
        diffs = []
        for k, v in expected.items():
            if k not in got:
                diffs.append(f"{path}{k}: missing")
            else:
                diffs += compare(got[k], v, tol, f"{path}{k}.")
        return diffs
    if isinstance(expected, list):
        if len(got) != len(expected):
            return [f"{path[:-1]}: length {len(got)} != {len(expected)}"]
        out = []
        for i, (g, e) in enumerate(zip(got, expected)):
            out += compare(g, e, tol, f"{path}{i}.")
        return out
    if isinstance(expected, bool) or isinstance(expected, str) or expected is None:
        return [] if got == expected else [f"{path[:-1]}: got {got!r}, expected {expected!r}"]
    if not (math.isfinite(got) and abs(got - expected) <= tol):
        return [f"{path[:-1]}: got {got!r}, expected {expected!r} (tol {tol:g})"]
    return []


def run_suite(threads: int = 1) -> list:
    table = expected_table()
    missing = sorted(set(EXAMPLES) ^ set(table))
    if missing:
        raise KeyError(f"examples and expected table disagree on: {missing}")
    names = sorted(EXAMPLES)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        results = list(ex.map(lambda n: EXAMPLES[n](), names))
    out = []
    for name, got in zip(names, results):
        entry = table[name]
        got = json.loads(json.dumps(got, default=float))
        diffs = compare(got, entry["expected"], entry.get("tolerance", 0.0))
        out.append({"id": name, "source": entry["source"], "passed": not diffs,
                    "got": got, "expected": entry["expected"], "diff": diffs})
    return out


def oracle_values() -> dict:
    """Independent values used to write the expected table."""
    return {
        "rl_real_line": 0.5 * (1.0 + 1.0) ** 2,
        "quadratic_at_half": 0.5 * (-1.0) ** 2,
        "quadratic_above_half": (2.0 + 3.0) / (1.0 - 2.0),
        "cubic_refutation": 0.5 * (11.0 / 12.0) ** 2,
        "ladder_norms": [math.sqrt(n) for n in (10, 100, 1000)],
        "ladder_truncation": math.fsum(1.0 / n**2 for n in range(11, 101)),
    }

