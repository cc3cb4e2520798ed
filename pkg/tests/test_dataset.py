import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cyclescreen.dataset import (
    CycleStore,
    SplitManifest,
    attach_labels,
    export_cycles,
    export_labels,
    format_cycles,
    ingest_cycles,
    parse_cycles,
    read_labels,
    read_manifest,
    split_train_test,
)
from cyclescreen.errors import (
    EmptyInputError,
    ManifestError,
    RowParseError,
    SchemaError,
    UnknownCycleError,
)

from conftest import make_cycle

HEADER = "cell_id,cycle_index,time_s,voltage_v,capacity_ah"


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_ingest_basic(tmp_path):
    path = write(
        tmp_path,
        "m.csv",
        HEADER + "\nA,0,0.0,4.0,0.0\nA,0,1.0,3.5,0.5\nA,1,0.0,4.1,0.0\n",
    )
    store = ingest_cycles(path)
    assert store.cells() == ["A"]
    assert len(store) == 2
    rec = store.get("A", 0)
    assert rec.voltage.tolist() == [4.0, 3.5]


def test_ingest_sorts_samples_by_time(tmp_path):
    path = write(
        tmp_path,
        "m.csv",
        HEADER + "\nA,0,2.0,3.0,1.0\nA,0,0.0,4.0,0.0\nA,0,1.0,3.5,0.5\n",
    )
    rec = ingest_cycles(path).get("A", 0)
    assert rec.time.tolist() == [0.0, 1.0, 2.0]
    assert rec.voltage.tolist() == [4.0, 3.5, 3.0]


def test_ingest_stable_sort_on_time_ties(tmp_path):
    # two samples share t=1.0; file order must survive the sort
    path = write(
        tmp_path,
        "m.csv",
        HEADER + "\nA,0,1.0,3.9,0.1\nA,0,1.0,3.8,0.2\nA,0,0.0,4.0,0.0\n",
    )
    rec = ingest_cycles(path).get("A", 0)
    assert rec.voltage.tolist() == [4.0, 3.9, 3.8]


def test_ingest_skips_blank_rows(tmp_path):
    path = write(
        tmp_path,
        "m.csv",
        HEADER + "\n\nA,0,0.0,4.0,0.0\n\nA,0,1.0,3.9,0.1\n",
    )
    assert ingest_cycles(path).get("A", 0).samples.shape == (2, 3)


def test_ingest_bad_row_cites_row_number(tmp_path):
    path = write(
        tmp_path,
        "m.csv",
        HEADER + "\nA,0,0.0,4.0,0.0\nA,0,oops,3.9,0.1\n",
    )
    with pytest.raises(RowParseError) as exc:
        ingest_cycles(path)
    assert exc.value.row == 3
    assert "3" in str(exc.value)


def test_ingest_missing_column(tmp_path):
    path = write(tmp_path, "m.csv", "cell_id,cycle_index,time_s\nA,0,0.0\n")
    with pytest.raises(SchemaError):
        ingest_cycles(path)


def test_ingest_empty_file(tmp_path):
    path = write(tmp_path, "m.csv", "")
    with pytest.raises(EmptyInputError):
        ingest_cycles(path)


def test_ingest_header_only(tmp_path):
    path = write(tmp_path, "m.csv", HEADER + "\n")
    with pytest.raises(EmptyInputError):
        ingest_cycles(path)


def test_ingest_column_remap_and_delimiter(tmp_path):
    path = write(
        tmp_path,
        "m.tsv",
        "cell\tcyc\tt\tU\tQ\nA\t0\t0.0\t4.0\t0.0\nA\t0\t1.0\t3.9\t0.1\n",
    )
    store = ingest_cycles(
        path,
        columns={
            "cell_id": "cell",
            "cycle_index": "cyc",
            "time": "t",
            "voltage": "U",
            "capacity": "Q",
        },
        delimiter="\t",
    )
    assert store.get("A", 0).voltage.tolist() == [4.0, 3.9]


def test_ingest_integral_float_cycle_index(tmp_path):
    path = write(tmp_path, "m.csv", HEADER + "\nA,2.0,0.0,4.0,0.0\n")
    assert ingest_cycles(path).get("A", 2).cycle_index == 2


def test_store_rejects_duplicate_cycle_key():
    a = make_cycle("A", 0, [0], [4.0], [0.0])
    b = make_cycle("A", 0, [0], [4.1], [0.0])
    with pytest.raises(SchemaError):
        CycleStore([a, b])


def test_store_orders_by_cell_then_cycle():
    recs = [
        make_cycle("B", 0, [0], [4.0], [0.0]),
        make_cycle("A", 1, [0], [4.0], [0.0]),
        make_cycle("A", 0, [0], [4.0], [0.0]),
    ]
    store = CycleStore(recs)
    keys = [(r.cell_id, r.cycle_index) for r in store.records]
    assert keys == [("A", 0), ("A", 1), ("B", 0)]


def test_attach_labels_and_unknown_cycle():
    store = CycleStore(
        [
            make_cycle("A", 0, [0], [4.0], [0.0]),
            make_cycle("A", 1, [0], [4.0], [0.0]),
        ]
    )
    labeled = attach_labels(store, {"A": {1}})
    assert labeled.get("A", 0).label == 0
    assert labeled.get("A", 1).label == 1
    # original store untouched
    assert store.get("A", 1).label is None
    with pytest.raises(UnknownCycleError):
        attach_labels(store, {"A": {99}})


def test_attach_labels_unlisted_cell_stays_unlabeled():
    store = CycleStore(
        [
            make_cycle("A", 0, [0], [4.0], [0.0]),
            make_cycle("B", 0, [0], [4.0], [0.0]),
        ]
    )
    labeled = attach_labels(store, {"A": set()})
    assert labeled.get("A", 0).label == 0
    assert labeled.get("B", 0).label is None


def test_manifest_overlap_rejected():
    with pytest.raises(ManifestError):
        SplitManifest(train_cells=("A",), test_cells=("A", "B"))


def test_split_train_test():
    store = CycleStore(
        [
            make_cycle("A", 0, [0], [4.0], [0.0]),
            make_cycle("B", 0, [0], [4.0], [0.0]),
        ]
    )
    manifest = SplitManifest(train_cells=("A",), test_cells=("B",))
    train, test = split_train_test(store, manifest)
    assert train.cells() == ["A"]
    assert test.cells() == ["B"]
    with pytest.raises(ManifestError):
        split_train_test(store, SplitManifest(train_cells=("C",), test_cells=()))


def test_read_manifest(tmp_path):
    path = write(tmp_path, "split.csv", "cell_id,role\nA,train\nB,test\n")
    manifest = read_manifest(path)
    assert manifest.train_cells == {"A"}
    assert manifest.test_cells == {"B"}
    dup = write(tmp_path, "dup.csv", "cell_id,role\nA,train\nA,test\n")
    with pytest.raises(ManifestError):
        read_manifest(dup)


def test_labels_round_trip(tmp_path):
    # the format lists anomalous cycles only, so a cell with none drops out
    labels = {"A": {3, 1}, "B": set()}
    path = str(tmp_path / "labels.csv")
    export_labels(labels, path)
    assert read_labels(path) == {"A": {1, 3}}


def test_export_import_round_trip_exact(tmp_path, simple_cycles):
    store = CycleStore(simple_cycles)
    path = str(tmp_path / "cycles.csv")
    export_cycles(store, path)
    back = ingest_cycles(path)
    assert back.records == store.records


FLOATS = st.floats(
    min_value=-1e6, max_value=1e6, allow_nan=False, allow_infinity=False
)


@settings(max_examples=40, deadline=None)
@given(
    st.lists(
        st.tuples(FLOATS, FLOATS),
        min_size=2,
        max_size=8,
    )
)
def test_format_parse_round_trip_property(samples):
    time = np.arange(len(samples), dtype=float)
    voltage = np.asarray([s[0] for s in samples])
    capacity = np.asarray([s[1] for s in samples])
    store = CycleStore([make_cycle("C", 0, time, voltage, capacity)])
    back = parse_cycles(format_cycles(store))
    assert back.records == store.records
