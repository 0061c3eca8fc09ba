"""Collects one verdict line per acceptance criterion for the terminal summary."""

LINES = []


def verdict(criterion, ok, detail):
    line = f"{criterion} {'PASS' if ok else 'FAIL'}: {detail}"
    LINES.append(line)
    print(line)
    assert ok, line
