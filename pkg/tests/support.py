"""Shared builders for the test suite."""

import datetime as dt

from slowdrip.detector import AttackRecord
from slowdrip.pdns_model import PdnsEvent, day_start

DAY = dt.date(2018, 8, 3)
T0 = day_start(DAY)


def event(qname, t=0.0, qtype=1, rcode=3, source="s1", date=DAY):
    return PdnsEvent(day_start(date) + t, qname, qtype, rcode, source)


def attack(names, sld="target.com", times=None, qtypes=None, rcode=3, date=DAY, source="s1"):
    """AttackRecord whose events query ``names`` (bare prefixes get ``sld`` appended)."""
    times = times if times is not None else range(len(names))
    qtypes = qtypes if qtypes is not None else [1] * len(names)
    events = []
    for n, t, q in zip(names, times, qtypes):
        q_name = n if n == sld or n.endswith("." + sld) else f"{n}.{sld}"
        events.append(event(q_name, t, q, rcode, source, date))
    return AttackRecord(sld=sld, date=date, source=source, stage1_count=len(set(names)),
                        stage2_delta=len(set(names)), events=tuple(events))


ACCEPTANCE: list[str] = []


def verdict(number, title, ok, detail):
    """Record and print one acceptance line, then fail the test if needed."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {title} ({detail})"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line
