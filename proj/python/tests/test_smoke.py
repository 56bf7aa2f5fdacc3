import json

import pytest

import cdnlog

LINE = "0.136, 118.68.222.40, MISS, [03/Dec/2018:00:00:00 +0700], /a/b.ts, 437664"
SMALL = {"workload": {"seed": 3, "requests_per_day": 2000, "duration_hours": 2}}


def test_parse_and_format_round_trip():
    rec = cdnlog.parse_line(LINE)
    assert rec["latency_ms"] == 136
    assert rec["status"] == "MISS"
    assert rec["size_bytes"] == 437664
    assert cdnlog.format_record(rec) == LINE
    assert cdnlog.parse_line("0.1, 1.2.3.4, HIT") == "field_count"


def test_clean_counts_rejections():
    records, stats = cdnlog.clean([LINE, "garbage", LINE])
    assert len(records) == 2
    assert stats["accepted"] == 2 and stats["rejected"] == 1


def test_classify_labels_records():
    out = cdnlog.classify([LINE, LINE.replace("MISS", "HIT")])
    assert [r["service"] for r in out] == ["vod", "vod"]
    assert all(r["packaging"] == out[0]["packaging"] for r in out)


def test_hit_rates_and_summary():
    rates = cdnlog.hit_rates(n_miss=25, n_hit=50, n_hit1=25)
    assert rates["edge"] == pytest.approx(0.5)
    assert rates["system"] == pytest.approx(0.75)
    assert cdnlog.hit_rates(0, 0, 0)["edge"] is None
    s = cdnlog.summarize([1, 2, 3, 4, 5])
    assert s["median"] == 3 and s["count"] == 5
    with pytest.raises(ValueError):
        cdnlog.summarize([])


def test_generate_and_replay_are_deterministic():
    events, ledger = cdnlog.generate(SMALL)
    again, _ = cdnlog.generate(SMALL)
    assert events == again
    assert ledger["requests"] == len(events) > 0
    statuses, summary = cdnlog.replay(events, SMALL)
    assert len(statuses) == len(events)
    assert summary["events"] == len(events)


def test_file_commands(tmp_path):
    log = tmp_path / "in.log"
    log.write_text(LINE + "\n" + "bad line\n")
    assert cdnlog.cmd_clean([log], tmp_path / "c")["rejected"] == 1
    assert cdnlog.cmd_classify([tmp_path / "c" / "clean.log"], tmp_path / "l")["records"] == 1
    cdnlog.cmd_report([tmp_path / "l" / "labeled.csv"], tmp_path / "r")
    assert json.loads((tmp_path / "r" / "report.json").read_text())
    cdnlog.cmd_generate(tmp_path / "g", SMALL)
    sim = cdnlog.cmd_simulate([tmp_path / "g" / "events.csv"], tmp_path / "s", SMALL)
    assert sim


def test_errors_map_to_python():
    with pytest.raises(cdnlog.ConfigError):
        cdnlog.generate({"nope": 1})
    with pytest.raises(cdnlog.InputError):
        cdnlog.cmd_clean(["/nonexistent/file.log"], "/tmp/cdnlog_unused")
