"""Cross-checks NPY files against numpy, the reference reader.

    python3 npy_reference.py generate
        Reads every file in written/ with numpy and records what it sees in
        expected.json, then writes numpy's own encoding of each fixture to
        numpy/ for the reader tests.

    python3 npy_reference.py check DIR
        Loads DIR/fx_NN.npy for every fixture and compares shape, dtype and
        payload against the fixture formula. Exits nonzero on any mismatch.
"""

import json
import pathlib
import sys

import numpy as np

HERE = pathlib.Path(__file__).resolve().parent


def fixtures():
    return json.loads((HERE / "fixtures.json").read_text())["shapes"]


def payload(k, shape):
    n = int(np.prod(shape, dtype=np.int64))
    i = np.arange(n, dtype=np.int64)
    return ((i * 131 + k * 17 + 7) % 256).astype(np.uint8).reshape(shape)


def fnv1a64(data):
    h = 0xCBF29CE484222325
    for b in data:
        h ^= b
        h = (h * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return h


def name(k):
    return f"fx_{k:02d}.npy"


def load(path):
    arr = np.load(path, allow_pickle=False)
    with open(path, "rb") as f:
        version = np.lib.format.read_magic(f)
        header = np.lib.format._read_array_header(f, version)
        data_offset = f.tell()
    return arr, version, header, data_offset


def check(directory):
    bad = 0
    for k, shape in enumerate(fixtures()):
        arr, _, (_, fortran, _), _ = load(directory / name(k))
        want = payload(k, shape)
        ok = (
            arr.dtype == np.uint8
            and not fortran
            and list(arr.shape) == shape
            and np.array_equal(arr, want)
        )
        if not ok:
            bad += 1
            print(f"MISMATCH {name(k)}: dtype={arr.dtype} shape={arr.shape}")
    print(f"numpy checked {len(fixtures())} files, {bad} mismatches")
    return bad == 0


def generate():
    expected = []
    for k, shape in enumerate(fixtures()):
        arr, version, (fshape, fortran, dtype), data_offset = load(HERE / "written" / name(k))
        expected.append(
            {
                "name": name(k),
                "version": list(version),
                "shape": list(fshape),
                "dtype": dtype.str,
                "fortran_order": fortran,
                "data_offset": data_offset,
                "fnv1a64": f"{fnv1a64(arr.tobytes()):016x}",
            }
        )
    (HERE / "expected.json").write_text(json.dumps(expected, indent=2) + "\n")
    out = HERE / "numpy"
    out.mkdir(exist_ok=True)
    for k, shape in enumerate(fixtures()):
        np.save(out / name(k), payload(k, shape), allow_pickle=False)


if __name__ == "__main__":
    if len(sys.argv) == 3 and sys.argv[1] == "check":
        sys.exit(0 if check(pathlib.Path(sys.argv[2])) else 1)
    elif len(sys.argv) == 2 and sys.argv[1] == "generate":
        generate()
    else:
        sys.exit(__doc__)
