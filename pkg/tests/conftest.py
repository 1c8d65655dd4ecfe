"""Shared pytest wiring.

After any run that touched test_acceptance.py, print a one-line PASS/FAIL
verdict per acceptance criterion so the overall contract is readable at a
glance without scrolling through the node list.
"""

import re

_CRITERION = re.compile(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    verdicts = {}
    for key, failed in (("passed", False), ("failed", True), ("error", True)):
        for rep in terminalreporter.stats.get(key, ()):
            m = _CRITERION.search(getattr(rep, "nodeid", ""))
            if not m:
                continue
            num = int(m.group(1))
            label = m.group(2).replace("_", " ")
            prev_failed = verdicts.get(num, (label, False))[1]
            verdicts[num] = (label, prev_failed or failed)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(verdicts):
        label, failed = verdicts[num]
        terminalreporter.write_line(f"criterion {num} ({label}): {'FAIL' if failed else 'PASS'}")
