import struct
import tempfile
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_array_equal

from favs import ften
from favs.errors import (
    BadMagicError,
    DuplicateNameError,
    FtenError,
    InvalidNameError,
    TrailingDataError,
    TruncatedError,
    UnknownDtypeError,
    UnsupportedRankError,
    UnsupportedVersionError,
)


def entry(name: bytes, code: int, shape, payload: bytes) -> bytes:
    return struct.pack("<H", len(name)) + name + struct.pack(f"<BB{len(shape)}I", code, len(shape), *shape) + payload


class TestRoundTrip(unittest.TestCase):
    def test_random_tensors_are_bit_identical(self):
        rng = np.random.default_rng(30)
        tensors = {
            "a": rng.standard_normal((3, 4)),
            "b.c": rng.standard_normal((2, 1, 5)) + 1j * rng.standard_normal((2, 1, 5)),
            "scalar": np.array(np.pi),
            "empty": np.zeros((0, 3)),
            "special": np.array([np.nan, np.inf, -np.inf, -0.0, 5e-324]),
        }
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "t.ften"
            ften.write_ften(path, tensors)
            back = ften.read_ften(path)
        self.assertEqual(list(back), list(tensors))
        for name, value in tensors.items():
            self.assertEqual(back[name].shape, value.shape)
            self.assertEqual(back[name].tobytes(), value.tobytes(), name)
        self.assertEqual(back["b.c"].dtype, np.complex128)

    def test_empty_container(self):
        data = ften.encode_ften({})
        self.assertEqual(data, b"FTEN\x01\x00\x00\x00\x00")
        self.assertEqual(ften.decode_ften(data), {})

    def test_layout(self):
        data = ften.encode_ften({"x": np.array([1.0, 2.0])})
        expected = b"FTEN\x01" + struct.pack("<I", 1) + entry(b"x", 0, (2,), struct.pack("<2d", 1.0, 2.0))
        self.assertEqual(data, expected)

    def test_integer_and_bool_arrays_become_float64(self):
        back = ften.decode_ften(ften.encode_ften({"m": np.array([[True, False]]), "i": np.arange(3)}))
        self.assertEqual(back["m"].dtype, np.float64)
        assert_array_equal(back["m"], [[1.0, 0.0]])
        assert_array_equal(back["i"], [0.0, 1.0, 2.0])


class TestErrors(unittest.TestCase):
    def setUp(self):
        self.data = ften.encode_ften({"x": np.arange(4.0).reshape(2, 2), "y": np.ones(3)})

    def test_bad_magic(self):
        with self.assertRaises(BadMagicError):
            ften.decode_ften(b"FTEM" + self.data[4:])
        with self.assertRaises(BadMagicError):
            ften.decode_ften(b"")

    def test_unsupported_version(self):
        with self.assertRaises(UnsupportedVersionError):
            ften.decode_ften(self.data[:4] + b"\x02" + self.data[5:])

    def test_every_truncation_is_reported(self):
        for n in range(4, len(self.data)):
            with self.assertRaises(TruncatedError, msg=str(n)):
                ften.decode_ften(self.data[:n])

    def test_trailing_data(self):
        with self.assertRaises(TrailingDataError):
            ften.decode_ften(self.data + b"\x00")

    def test_duplicate_names(self):
        body = entry(b"x", 0, (1,), struct.pack("<d", 1.0)) * 2
        with self.assertRaises(DuplicateNameError):
            ften.decode_ften(b"FTEN\x01" + struct.pack("<I", 2) + body)

    def test_unknown_dtype(self):
        body = entry(b"x", 7, (1,), struct.pack("<d", 1.0))
        with self.assertRaises(UnknownDtypeError):
            ften.decode_ften(b"FTEN\x01" + struct.pack("<I", 1) + body)

    def test_invalid_names(self):
        for name in (b"", b"a\x00b", "é".encode("utf-8")):
            body = entry(name, 0, (1,), struct.pack("<d", 1.0))
            with self.assertRaises(InvalidNameError, msg=repr(name)):
                ften.decode_ften(b"FTEN\x01" + struct.pack("<I", 1) + body)
        for name in ("", "a\0b", "naïve"):
            with self.assertRaises(InvalidNameError):
                ften.encode_ften({name: np.zeros(1)})

    def test_huge_declared_extent(self):
        body = struct.pack("<H", 1) + b"x" + struct.pack("<BB2I", 0, 2, 0xFFFFFFFF, 0xFFFFFFFF)
        with self.assertRaises(TruncatedError):
            ften.decode_ften(b"FTEN\x01" + struct.pack("<I", 1) + body)

    def test_rank_beyond_numpy_limit(self):
        body = entry(b"x", 0, (1,) * 100, struct.pack("<d", 1.0))
        with self.assertRaises(UnsupportedRankError):
            ften.decode_ften(b"FTEN\x01" + struct.pack("<I", 1) + body)
        deep = entry(b"x", 1, (1,) * 20, struct.pack("<2d", 1.0, 2.0))
        back = ften.decode_ften(b"FTEN\x01" + struct.pack("<I", 1) + deep)
        self.assertEqual(back["x"].shape, (1,) * 20)
        assert_array_equal(back["x"].ravel(), [1.0 + 2.0j])

    def test_arbitrary_bytes_never_crash(self):
        rng = np.random.default_rng(31)
        for _ in range(500):
            blob = bytearray(self.data)
            for _ in range(int(rng.integers(1, 4))):
                blob[int(rng.integers(0, len(blob)))] = int(rng.integers(0, 256))
            cut = int(rng.integers(0, len(blob) + 1))
            try:
                ften.decode_ften(bytes(blob[:cut]))
            except FtenError:
                pass


if __name__ == "__main__":
    unittest.main()
