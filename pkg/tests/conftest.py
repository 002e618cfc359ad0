import os
import sys

sys.path.insert(0, os.path.dirname(__file__))

# Filled in by test_acceptance.py: criterion number -> (title, passed, note)
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section('acceptance criteria')
    for number in sorted(ACCEPTANCE):
        title, passed, note = ACCEPTANCE[number]
        terminalreporter.write_line('criterion %d: %s  %s%s' % (
            number, 'PASS' if passed else 'FAIL', title,
            '  (%s)' % note if note else ''))
