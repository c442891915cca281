import datetime as dt

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slowdrip.errors import MalformedNameError, UnregistrableNameError
from slowdrip.pdns_model import (
    PdnsEvent,
    SuffixSet,
    bundled_suffix_path,
    day_start,
    label_depth,
    normalize_name,
    parse_fqdn,
    split_prefix,
    subdomain_labels,
    utc_date,
)


def psl_reference(labels, rules):
    """The publicsuffix.org matching algorithm, written out literally."""
    matches = []
    for rule in rules:
        exception = rule.startswith("!")
        body = rule[1:] if exception else rule
        rl = body.split(".")
        if len(rl) > len(labels):
            continue
        tail = labels[len(labels) - len(rl):]
        if all(r == "*" or r == t for r, t in zip(rl, tail)):
            matches.append((exception, rl))
    if not matches:
        return 1
    exc = [rl for e, rl in matches if e]
    if exc:
        return len(exc[0]) - 1
    return max(len(rl) for _, rl in matches)


class TestNormalize:
    def test_lowercase_and_trailing_dot(self):
        assert normalize_name("WWW.Example.COM.") == "www.example.com"

    def test_keeps_odd_characters(self):
        assert normalize_name("_dmarc.Foo.com") == "_dmarc.foo.com"

    @pytest.mark.parametrize("raw", ["", ".", "a..b.com", ".a.com", "a b.com", "a.com.."])
    def test_rejects(self, raw):
        with pytest.raises(MalformedNameError):
            normalize_name(raw)

    def test_length_limit(self):
        ok = ".".join(["a" * 63] * 3 + ["b" * 61])
        assert len(ok) == 253
        assert normalize_name(ok) == ok
        with pytest.raises(MalformedNameError):
            normalize_name(ok + "b")

    def test_label_limit(self):
        assert normalize_name(".".join(["a"] * 127))
        with pytest.raises(MalformedNameError):
            normalize_name(".".join(["a"] * 128))


class TestSuffixes:
    @pytest.mark.parametrize("qname,etld,sld", [
        ("www.example.com", "com", "example.com"),
        ("a.b.example.co.uk", "co.uk", "example.co.uk"),
        ("shop.example.com.au", "com.au", "example.com.au"),
        ("x.foo.bar.ck", "bar.ck", "foo.bar.ck"),
        ("a.www.ck", "ck", "www.ck"),
        ("q.z.y.kawasaki.jp", "y.kawasaki.jp", "z.y.kawasaki.jp"),
        ("a.city.kawasaki.jp", "kawasaki.jp", "city.kawasaki.jp"),
        ("foo.bar.unknowntld", "unknowntld", "bar.unknowntld"),
    ])
    def test_decomposition(self, suffixes, qname, etld, sld):
        p = parse_fqdn(qname, suffixes)
        assert (p.etld, p.sld) == (etld, sld)

    @pytest.mark.parametrize("qname", ["com", "co.uk", "anything.ck", "x.kawasaki.jp"])
    def test_bare_suffix_is_unregistrable(self, suffixes, qname):
        with pytest.raises(UnregistrableNameError):
            parse_fqdn(qname, suffixes)

    def test_prefix_and_suffix(self, suffixes):
        p = parse_fqdn("a.b.example.co.uk", suffixes)
        assert p.prefix == "a" and p.suffix == "b.example.co.uk"
        assert label_depth(p) == 2
        bare = parse_fqdn("example.co.uk", suffixes)
        assert bare.prefix == "" and label_depth(bare) == 0

    def test_from_lines_ignores_comments(self):
        s = SuffixSet.from_lines(["// comment", "", "zz", "*.wild.zz", "!keep.wild.zz"])
        assert s.rules == {"zz", "*.wild.zz", "!keep.wild.zz"}
        assert s.etld("a.b.wild.zz") == "b.wild.zz"
        assert s.etld("a.keep.wild.zz") == "wild.zz"

    def test_bundled_file_loads(self):
        s = SuffixSet.from_file(bundled_suffix_path())
        assert s == SuffixSet.default()
        assert len(s.rules) > 400

    @settings(max_examples=300, deadline=None)
    @given(st.data())
    def test_matches_reference_algorithm(self, suffixes, data):
        rules = sorted(suffixes.rules)
        rule = data.draw(st.sampled_from(rules)).lstrip("!")
        parts = [data.draw(st.sampled_from(["x", "www", "city", "a1"])) if p == "*" else p
                 for p in rule.split(".")]
        extra = data.draw(st.lists(st.sampled_from(["foo", "bar", "city", "www"]), max_size=3))
        labels = tuple(extra + parts)
        assert suffixes.suffix_length(labels) == psl_reference(labels, rules)


def test_split_helpers():
    assert split_prefix("a.b.t.com", "t.com") == ("a", "b.t.com")
    assert split_prefix("t.com", "t.com") == ("", "t.com")
    assert subdomain_labels("a.b.t.com", "t.com") == ["a", "b"]
    assert subdomain_labels("t.com", "t.com") == []
    assert subdomain_labels("a.other.com", "t.com") == []


class TestEvent:
    def test_utc_date_boundaries(self):
        start = day_start(dt.date(2018, 8, 3))
        assert start == 1533254400
        assert utc_date(start) == dt.date(2018, 8, 3)
        assert utc_date(start - 1) == dt.date(2018, 8, 2)
        assert utc_date(start - 0.5) == dt.date(2018, 8, 2)
        assert PdnsEvent(start + 86399.9, "a.com", 1, 0, "s").date == dt.date(2018, 8, 3)

    @pytest.mark.parametrize("qtype,rcode", [(-1, 0), (65536, 0), (1, 24), (1, -1)])
    def test_code_ranges(self, qtype, rcode):
        with pytest.raises(ValueError):
            PdnsEvent(0, "a.com", qtype, rcode, "s")

    def test_frozen(self):
        e = PdnsEvent(0, "a.com", 1, 0, "s")
        with pytest.raises(AttributeError):
            e.rcode = 3
