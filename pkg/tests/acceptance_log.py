"""Collects one verdict line per acceptance criterion for the terminal summary."""
LINES: dict[int, str] = {}


def record(number: int, ok: bool, title: str, detail: str) -> None:
    LINES[number] = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
