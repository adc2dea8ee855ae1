"""Collects one PASS/FAIL line per acceptance criterion for the terminal summary."""
LINES = {}


def report(number, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
    LINES.setdefault(number, []).append((passed, line))
    print(line)
    return passed


def summary_lines():
    out = []
    for number in sorted(LINES):
        results = LINES[number]
        passed = all(p for p, _ in results)
        details = "; ".join(line.split(": ", 1)[1] for _, line in results)
        out.append(f"{'PASS' if passed else 'FAIL'} criterion {number}: {details}")
    return out
