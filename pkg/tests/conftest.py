"""Shared pytest configuration: per-criterion summary lines.

After a run that included the acceptance suite, print one PASS/FAIL line
per release criterion so the gate status is readable at a glance.
Criterion 12 lives with the plotting package (frontend/tests) because it
exercises the figure CLI end to end; it is picked up here too when the
full tree is run.
"""

CRITERIA = {
    "01": "quasi-random generators match independent oracles",
    "02": "leapfrog reversibility, energy scaling, quarter period",
    "03": "analytic gradients match finite differences on all targets",
    "04": "SMC weight identities and kernel-ratio equivalence",
    "05": "ChEES adaptation mechanics (Adam, moving average, freeze)",
    "06": "Gaussian efficiency ratios vs NUTS (3x cost, 3x ESS/grad)",
    "07": "ill-conditioned cap: exactly 501 gradient evals per particle",
    "08": "Gaussian moment convergence (mean/variance MSE)",
    "09": "German-credit held-out accuracy and AUROC windows",
    "10": "jitter benefit over NoJitter on the banana",
    "11": "byte-identical outputs for identical config and seed",
    "12": "figure CLI renders experiment CSVs without touching them",
}


def pytest_terminal_summary(terminalreporter):
    outcomes = {}
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            marker = "::test_criterion_"
            if marker in nodeid:
                number = nodeid.split(marker, 1)[1][:2]
                verdict = "PASS" if status == "passed" else "FAIL"
                outcomes[number] = verdict
    if not outcomes:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for number in sorted(CRITERIA):
        if number in outcomes:
            line = f"criterion {number}: {outcomes[number]} — {CRITERIA[number]}"
            terminalreporter.write_line(line)
