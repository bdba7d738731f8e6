import json

import numpy as np
import pytest

from gnssweight.dataio import (
    Dataset,
    FORMAT_NAME,
    FORMAT_VERSION,
    Session,
    iter_epochs,
    read_dataset,
    write_dataset,
)
from gnssweight.errors import ParseError, VersionMismatch
from gnssweight.sim import PROFILES, generate_campaign


def _small_campaign(seed=33):
    return generate_campaign(PROFILES, sessions_per_profile=3, seed=seed, epochs_per_session=4)


def test_round_trip_exact(tmp_path):
    ds = _small_campaign()
    path = tmp_path / "data.jsonl"
    write_dataset(ds, path)
    back = read_dataset(path)
    assert back.seed == ds.seed
    assert len(back.sessions) == len(ds.sessions)
    by_id = {s.session_id: s for s in back.sessions}
    for s in ds.sessions:
        r = by_id[s.session_id]
        assert r.profile == s.profile
        assert r.split == s.split
        assert len(r.epochs) == len(s.epochs)
        for e1, e2 in zip(s.epochs, r.epochs):
            assert e2.time == e1.time
            assert e2.session_id == e1.session_id
            assert np.array_equal(e2.truth.as_array(), e1.truth.as_array())
            assert e2.n == e1.n
            for m1, m2 in zip(e1.measurements, e2.measurements):
                assert m2.key == m1.key
                assert m2.pseudorange == m1.pseudorange  # bit-exact floats
                assert m2.cn0 == m1.cn0
                assert m2.lock_time == m1.lock_time
                assert np.array_equal(m2.sat_pos.as_array(), m1.sat_pos.as_array())


def test_serialization_is_byte_deterministic(tmp_path):
    ds = _small_campaign()
    p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    write_dataset(ds, p1)
    write_dataset(ds, p2)
    assert p1.read_bytes() == p2.read_bytes()
    # write, read, write again: still identical bytes
    p3 = tmp_path / "c.jsonl"
    write_dataset(read_dataset(p1), p3)
    assert p1.read_bytes() == p3.read_bytes()


def test_streaming_matches_bulk_read(tmp_path):
    ds = _small_campaign()
    path = tmp_path / "data.jsonl"
    write_dataset(ds, path)
    stream = iter_epochs(path)
    kind, header = next(stream)
    assert kind == "header"
    assert header["format"] == FORMAT_NAME
    assert header["version"] == FORMAT_VERSION
    n = sum(1 for _ in stream)
    assert n == ds.n_epochs


def _write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _valid_header():
    return json.dumps(
        {"format": FORMAT_NAME, "version": FORMAT_VERSION, "seed": 0, "sessions": {}}
    )


def _meas(**kw):
    m = {
        "const": "GPS",
        "sv": 1,
        "band": "L1",
        "pr_m": 2.2e7,
        "cn0_dbhz": 45.0,
        "lock_s": 3.0,
        "sat_xyz_m": [2.6e7, 0.0, 0.0],
    }
    m.update(kw)
    return m


def _epoch_line(ms):
    return json.dumps({"session_id": "s", "t": 0.0, "measurements": ms})


def test_parse_errors_carry_line_numbers(tmp_path):
    path = tmp_path / "bad.jsonl"

    _write_lines(path, [_valid_header(), _epoch_line([_meas()]), "{not json"])
    with pytest.raises(ParseError) as e:
        list(iter_epochs(path))
    assert e.value.line == 3

    _write_lines(path, [_valid_header(), _epoch_line([_meas(bogus=1)])])
    with pytest.raises(ParseError) as e:
        list(iter_epochs(path))
    assert e.value.line == 2
    assert "bogus" in str(e.value)

    _write_lines(path, [_valid_header(), _epoch_line([_meas(), _meas()])])
    with pytest.raises(ParseError, match="duplicate"):
        list(iter_epochs(path))


def test_invariant_validation_on_read(tmp_path):
    path = tmp_path / "bad.jsonl"
    cases = [
        _meas(pr_m=100.0),  # pseudorange outside the plausible band
        _meas(cn0_dbhz=75.0),
        _meas(sv=0),
        _meas(lock_s=-1.0),
        _meas(const="COMPASS"),
        _meas(sat_xyz_m=[1.0, 2.0]),
    ]
    for bad in cases:
        _write_lines(path, [_valid_header(), _epoch_line([bad])])
        with pytest.raises(ParseError):
            list(iter_epochs(path))


def test_missing_measurement_field(tmp_path):
    path = tmp_path / "bad.jsonl"
    m = _meas()
    del m["pr_m"]
    _write_lines(path, [_valid_header(), _epoch_line([m])])
    with pytest.raises(ParseError, match="pr_m"):
        list(iter_epochs(path))


def test_version_and_format_guards(tmp_path):
    path = tmp_path / "bad.jsonl"
    hdr = json.loads(_valid_header())
    hdr["version"] = 99
    _write_lines(path, [json.dumps(hdr)])
    with pytest.raises(VersionMismatch):
        list(iter_epochs(path))

    hdr = json.loads(_valid_header())
    hdr["format"] = "something-else"
    _write_lines(path, [json.dumps(hdr)])
    with pytest.raises(ParseError):
        list(iter_epochs(path))

    path.write_text("", encoding="utf-8")
    with pytest.raises(ParseError):
        list(iter_epochs(path))


def test_empty_dataset_round_trip(tmp_path):
    path = tmp_path / "empty.jsonl"
    write_dataset(Dataset(seed=5, sessions=[]), path)
    back = read_dataset(path)
    assert back.seed == 5
    assert back.sessions == []
    assert back.n_epochs == 0


def test_epoch_without_truth_round_trips(tmp_path):
    from gnssweight.model import Epoch

    ds = _small_campaign()
    s = ds.sessions[0]
    stripped = [
        Epoch(time=e.time, measurements=e.measurements, session_id=e.session_id)
        for e in s.epochs
    ]
    ds2 = Dataset(
        seed=0,
        sessions=[Session(session_id=s.session_id, profile=s.profile, split=s.split, epochs=stripped)],
    )
    path = tmp_path / "noTruth.jsonl"
    write_dataset(ds2, path)
    back = read_dataset(path)
    assert all(e.truth is None for e in back.sessions[0].epochs)
