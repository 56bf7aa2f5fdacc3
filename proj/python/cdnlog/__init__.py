"""CDN access-log analytics and cache hierarchy simulation.

Thin wrappers over the compiled ``_core`` module. Configuration is passed as a
dict with the same layout as the CLI's JSON config file.
"""

import json

from . import _core
from ._core import InputError, ConfigError, format_record, hit_rates, parse_line, summarize

__all__ = [
    "InputError",
    "ConfigError",
    "parse_line",
    "format_record",
    "clean",
    "classify",
    "hit_rates",
    "summarize",
    "generate",
    "replay",
    "cmd_clean",
    "cmd_classify",
    "cmd_report",
    "cmd_simulate",
    "cmd_generate",
]


def _cfg(config):
    return json.dumps(config) if config else ""


def clean(lines, threads=1):
    """Return (records, stats) for an iterable of raw log lines."""
    records, stats = _core.clean(list(lines), threads)
    return records, json.loads(stats)


def classify(lines, config=None):
    return _core.classify(list(lines), _cfg(config))


def generate(config=None):
    """Return (events, ledger) for a synthetic workload."""
    events, ledger = _core.generate(_cfg(config))
    return events, json.loads(ledger)


def replay(events, config=None, warmup=0):
    """Return (per-event statuses, summary) from the cache hierarchy."""
    statuses, summary = _core.replay(list(events), _cfg(config), warmup)
    return statuses, json.loads(summary)


def cmd_clean(inputs, out, threads=1):
    return json.loads(_core.cmd_clean([str(p) for p in inputs], str(out), threads))


def cmd_classify(inputs, out, config=None, threads=1):
    return json.loads(_core.cmd_classify([str(p) for p in inputs], str(out), _cfg(config), threads))


def cmd_report(inputs, out, config=None, plot_data=False, threads=1):
    return json.loads(_core.cmd_report([str(p) for p in inputs], str(out), _cfg(config), plot_data, threads))


def cmd_simulate(inputs, out, config=None, sort=False, warmup=0, threads=1):
    return json.loads(
        _core.cmd_simulate([str(p) for p in inputs], str(out), _cfg(config), sort, warmup, threads)
    )


def cmd_generate(out, config=None):
    return json.loads(_core.cmd_generate(str(out), _cfg(config)))
