import pytest

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}

TITLES = {
    "A1": "list decoder with full list equals exhaustive ML",
    "A2": "Fast-SSC bit-exact with SC",
    "A3": "BLER curve shape at the calibrated operating point",
    "A4": "MDR exactly non-increasing in B, zero at B=M",
    "A5": "LS metric: B needed for MDR 0.1 at I=2,3,4",
    "A6": "BP metrics reach MDR 1.5e-2 at the stated efforts",
    "A7": "RE metric gain from I=15 to I=50 at B=4",
    "A8": "Fast-SSC metric thresholds",
    "A9": "SPC leaves degrade the Fast-SSC metric",
    "A10": "invariants and reproducibility",
}


@pytest.fixture(scope="session")
def acceptance_record():
    def record(cid, passed, detail):
        ACCEPTANCE[cid] = (bool(passed), detail)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(ACCEPTANCE, key=lambda c: int(c[1:])):
        passed, detail = ACCEPTANCE[cid]
        tr.write_line(f"{cid:>4} {'PASS' if passed else 'FAIL'}  {TITLES[cid]}: {detail}")
