"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES = []


def report(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append(line)
    print(line)
    return ok
