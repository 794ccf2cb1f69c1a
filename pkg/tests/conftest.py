import numpy as np
import pytest

from hoki import LabeledLogits, SynthConfig, generate


def brute_force_ece(confidences, correct, n_bins):
    """Loop-over-examples ECE, independent of the binned implementation."""
    sums = {}
    for p, ok in zip(confidences, correct):
        j = min(int(np.floor(p * n_bins)), n_bins - 1)
        cnt, hit, conf = sums.get(j, (0, 0.0, 0.0))
        sums[j] = (cnt + 1, hit + float(ok), conf + p)
    n = len(confidences)
    total = 0.0
    for j in range(n_bins):
        if j not in sums:
            continue
        cnt, hit, conf = sums[j]
        total += (cnt / n) * abs(hit / cnt - conf / cnt)
    return total


def naive_preserved(logits, noise):
    logits = np.asarray(logits)
    noise = np.asarray(noise)
    out = np.zeros((logits.shape[0], noise.shape[0]), dtype=bool)
    for n in range(logits.shape[0]):
        base = int(np.argmax(logits[n]))
        for m in range(noise.shape[0]):
            out[n, m] = int(np.argmax(logits[n] + noise[m])) == base
    return out


@pytest.fixture(scope="session")
def overconfident_small():
    return generate(SynthConfig(2000, 10, 0.5, 3.0, seed=11))


@pytest.fixture
def tiny_dataset():
    logits = np.array([[2.0, 0.5, 0.1], [0.0, 1.0, 0.2], [0.3, 0.2, 0.9], [1.0, 1.2, 0.0]])
    return LabeledLogits(logits, np.array([0, 1, 0, 0]))


# one "ACCEPTANCE n PASS|FAIL: detail" line per criterion, repeated in the summary
ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
