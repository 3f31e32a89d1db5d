LINES: list[str] = []


def report(num: int, name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {num}: {name} ({detail})"
    LINES.append(line)
    print(line)
