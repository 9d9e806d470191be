import numpy as np
import pytest

from jrcsim.framing import (
    FrameSpec,
    assemble_frame,
    barker13_phases,
    load_frame,
    random_bits,
    save_frame,
)
from jrcsim.seqdesign import BARKER13

DEMO_BITS = (1, 0, 0, 0, 0, 1, 1, 0, 0, 0, 0, 1, 1)


class TestFrameSpec:
    def test_valid(self):
        spec = FrameSpec(DEMO_BITS, barker13_phases(), 32)
        assert spec.N == 13
        assert spec.bits == DEMO_BITS

    @pytest.mark.parametrize(
        "bits, phases, L",
        [
            ((), (), 4),
            ((1, 0), (0.0,), 4),
            ((1, 2), (0.0, 0.0), 4),
            ((1, 0), (0.0, 0.0), 0),
        ],
    )
    def test_invalid(self, bits, phases, L):
        with pytest.raises(ValueError):
            FrameSpec(bits, phases, L)


def test_barker_phases():
    ph = barker13_phases()
    np.testing.assert_array_equal(np.cos(ph).round(), BARKER13)
    assert set(np.unique(ph)) == {0.0, np.pi}


def test_random_bits(rng):
    b = random_bits(1000, rng)
    assert b.dtype == np.int64 and set(np.unique(b)) == {0, 1}
    assert 400 < b.sum() < 600
    with pytest.raises(ValueError):
        random_bits(0, rng)


class TestAssemble:
    def test_symbol_layout(self, pair32):
        ph = barker13_phases()
        frame = assemble_frame(pair32, FrameSpec(DEMO_BITS, ph, 32))
        assert len(frame) == 13 * 32
        for n, b in enumerate(DEMO_BITS):
            s = pair32.s1 if b else pair32.s2
            np.testing.assert_allclose(frame.samples[n * 32 : (n + 1) * 32], s * np.exp(1j * ph[n]))

    def test_energy_unimodular(self, pair32):
        frame = assemble_frame(pair32, FrameSpec(DEMO_BITS, barker13_phases(), 32))
        assert frame.energy == pytest.approx(13 * 32)

    def test_symbol_len_mismatch(self, pair32):
        with pytest.raises(ValueError, match="symbol_len"):
            assemble_frame(pair32, FrameSpec(DEMO_BITS, barker13_phases(), 31))

    def test_round_trip(self, tmp_path, pair32):
        frame = assemble_frame(pair32, FrameSpec(DEMO_BITS, barker13_phases(), 32))
        sidecar = save_frame(tmp_path / "f.txt", frame)
        assert sidecar.name == "f.txt.json"
        back = load_frame(tmp_path / "f.txt")
        np.testing.assert_array_equal(back.samples, frame.samples)
        assert back.spec == frame.spec
