import numpy as np
import pytest

from morserec.errors import ContractViolation
from morserec.records import (
    SCHEMA_VERSION,
    BoxRecord,
    RecSummary,
    SetSummary,
    read_box_record,
    write_box_record,
)
from morserec.recurrence import ReducedHistogram


def _full_record():
    cells0 = np.array([3, 4, 5, 9, 10, 30], dtype=np.int64)
    cells1 = np.array([100], dtype=np.int64)
    rec = np.array([2, 2, 3, 4, 4, 7], dtype=np.int64)
    hist = ReducedHistogram(bars=(0.5, 0.0, 0.0, 0.0, 0.25, 0.0, 0.0, 0.0, 0.0, 0.25),
                            lo=2.0, hi=7.0, degenerate=False)
    return BoxRecord(
        coords=(3, 7),
        map_name="chialvo",
        varying={"a": (0.5, 0.55), "k": (0.01, 0.02)},
        fixed={"b": 0.6, "c": 0.28},
        phase_bounds=((-0.1, 9.0), (-5.0, 3.0)),
        resolution=(16, 16),
        sets=[
            SetSummary(index=0, card=6, attracting=True, boundary=False,
                       bbox_lo=(0.1, -0.25), bbox_hi=(1.5, 0.5), cells=cells0),
            SetSummary(index=1, card=1, attracting=False, boundary=True,
                       bbox_lo=(5.0, 1.0), bbox_hi=(5.6, 1.5), cells=cells1),
        ],
        reduced_edges=((1, 0),),
        rec=RecSummary(set_index=0, card=6, mean=rec.mean(), median=3.5,
                       frrv=12.0, nfrrv=0.8, histogram=hist, rec=rec),
        warnings=["3 cells with non-finite image enclosure marked escaped"],
    )


def test_roundtrip_full(tmp_path):
    rec = _full_record()
    path = str(tmp_path / "3_7.csv")
    write_box_record(rec, path)
    back = read_box_record(path)
    assert back.coords == rec.coords
    assert back.map_name == "chialvo"
    assert back.varying == rec.varying
    assert back.fixed == rec.fixed
    assert back.phase_bounds == rec.phase_bounds
    assert back.resolution == rec.resolution
    assert back.n_sets() == 2 and back.ok
    for a, b in zip(back.sets, rec.sets):
        assert (a.index, a.card, a.attracting, a.boundary) == (
            b.index, b.card, b.attracting, b.boundary)
        assert a.bbox_lo == b.bbox_lo and a.bbox_hi == b.bbox_hi
        assert np.array_equal(a.cells, b.cells)
    assert back.reduced_edges == ((1, 0),)
    assert back.rec.set_index == 0
    assert back.rec.mean == rec.rec.mean
    assert back.rec.nfrrv == 0.8
    assert back.rec.histogram == rec.rec.histogram
    assert np.array_equal(back.rec.rec, rec.rec.rec)
    assert back.warnings == rec.warnings
    assert back.rec_skipped is None


def test_float_endpoints_survive_exactly(tmp_path):
    # repr round-trips doubles; awkward values must come back bit-identical
    rec = _full_record()
    rec.varying["a"] = (0.1 + 0.2, 1 / 3)
    rec.fixed["b"] = 2.5454545454545454e-17
    path = str(tmp_path / "r.csv")
    write_box_record(rec, path)
    back = read_box_record(path)
    assert back.varying["a"] == (0.1 + 0.2, 1 / 3)
    assert back.fixed["b"] == 2.5454545454545454e-17


def test_failed_record_roundtrip(tmp_path):
    rec = BoxRecord(coords=(0, 0), map_name="henon", varying={}, fixed={"a": 1.4},
                    phase_bounds=((-2.0, 2.0),), resolution=(8,),
                    failure="enclosure overflow, midway")
    path = str(tmp_path / "f.csv")
    write_box_record(rec, path)
    back = read_box_record(path)
    assert not back.ok
    # commas in the reason are flattened to keep the format line-parseable
    assert back.failure == "enclosure overflow; midway"
    assert back.sets == [] and back.rec is None


def test_rec_skip_and_warning_sanitization(tmp_path):
    rec = _full_record()
    rec.rec = None
    rec.rec_skipped = "largest set card 5000 over threshold 1000"
    rec.warnings = ["weird, warning\nwith newline"]
    path = str(tmp_path / "s.csv")
    write_box_record(rec, path)
    back = read_box_record(path)
    assert back.rec is None
    assert back.rec_skipped == "largest set card 5000 over threshold 1000"
    assert back.warnings == ["weird; warning with newline"]


def test_run_length_encoding_is_compact(tmp_path):
    # a contiguous 10k-cell set stores as a single run
    rec = _full_record()
    rec.rec = None
    big = np.arange(50_000, 60_000, dtype=np.int64)
    rec.sets = [SetSummary(index=0, card=big.size, attracting=False, boundary=False,
                           bbox_lo=(0.0, 0.0), bbox_hi=(1.0, 1.0), cells=big)]
    rec.reduced_edges = ()
    path = str(tmp_path / "big.csv")
    write_box_record(rec, path)
    text = (tmp_path / "big.csv").read_text()
    assert "cells,0,50000:10000" in text
    back = read_box_record(path)
    assert np.array_equal(back.sets[0].cells, big)


def test_order_closure():
    rec = _full_record()
    rec.sets.append(SetSummary(index=2, card=1, attracting=False, boundary=False,
                               bbox_lo=(0.0, 0.0), bbox_hi=(0.1, 0.1),
                               cells=np.array([200], dtype=np.int64)))
    rec.reduced_edges = ((2, 1), (1, 0))
    closure = rec.order_closure()
    assert closure == frozenset({(2, 1), (1, 0), (2, 0)})


def test_malformed_files_rejected(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("hello\n")
    with pytest.raises(ContractViolation, match="not a box record"):
        read_box_record(str(p))
    p.write_text(f"schema,morserec-box,{SCHEMA_VERSION + 1}\nend\n")
    with pytest.raises(ContractViolation, match="schema version"):
        read_box_record(str(p))
    p.write_text(f"schema,morserec-box,{SCHEMA_VERSION}\nbox,0,0\n")
    with pytest.raises(ContractViolation, match="truncated"):
        read_box_record(str(p))
    p.write_text(f"schema,morserec-box,{SCHEMA_VERSION}\nblorp,1\nend\n")
    with pytest.raises(ContractViolation, match="unknown record line"):
        read_box_record(str(p))
    # card/cells mismatch
    p.write_text(
        f"schema,morserec-box,{SCHEMA_VERSION}\nbox,0\nmap,henon\n"
        "phase,0.0,1.0,4\nnsets,1\nset,0,3,1,0,0.0,1.0\ncells,0,5:2\nend\n"
    )
    with pytest.raises(ContractViolation, match="cell count mismatch"):
        read_box_record(str(p))


def test_write_is_byte_deterministic(tmp_path):
    rec = _full_record()
    p1 = str(tmp_path / "a.csv")
    p2 = str(tmp_path / "b.csv")
    write_box_record(rec, p1)
    write_box_record(rec, p2)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert not (tmp_path / "a.csv.tmp").exists()
