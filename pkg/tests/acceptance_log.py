"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES: list[str] = []


def record(number: int, ok: bool, detail: str) -> bool:
    line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append(line)
    print(line)
    return ok
