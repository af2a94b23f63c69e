"""Shared test configuration.

Hypothesis runs derandomized so the suite is reproducible; deadlines are off
because several properties drive numpy-heavy code whose first call pays a
dispatch cost.
"""

from hypothesis import settings

settings.register_profile("ci", derandomize=True, max_examples=100, deadline=None)
settings.load_profile("ci")
