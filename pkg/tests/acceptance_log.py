"""Per-criterion result lines, printed in the pytest terminal summary."""

RESULTS = {}


def record(number: int, passed: bool, text: str, seconds: float) -> str:
    line = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {text}  ({seconds:.1f} s)"
    RESULTS[number] = line
    print(line)
    return line
