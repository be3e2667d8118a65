import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rfsep import mixtures
from rfsep.mixtures import (
    InterferenceFrame,
    MixtureRecipe,
    example_seed,
    extract_window,
    frequency_recenter,
    make_mixture,
    normalize_power,
    power,
    split_dataset,
    synth_interference_emi,
    synth_interference_framed,
    synthesize_example,
)
from rfsep.neural.training import augment


def frames(n, length=16):
    rng = np.random.default_rng(0)
    return [InterferenceFrame(rng.standard_normal(length) + 0j, "rec", i) for i in range(n)]


class TestSplit:
    def test_counts(self):
        ds = split_dataset(frames(100), 0.8, 3)
        assert len(ds.subset("train")) == 80
        assert len(ds.subset("test")) == 20

    def test_disjoint_and_deterministic(self):
        a = split_dataset(frames(100), 0.8, 3)
        b = split_dataset(frames(100), 0.8, 3)
        assert a.split == b.split
        train = {f.frame_index for f in a.subset("train")}
        test = {f.frame_index for f in a.subset("test")}
        assert not train & test
        assert train | test == set(range(100))

    def test_two_frames(self):
        ds = split_dataset(frames(2), 0.5, 0)
        assert len(ds.subset("train")) == len(ds.subset("test")) == 1

    @given(st.integers(2, 60), st.floats(0.01, 0.99), st.integers(0, 2**31))
    def test_both_sides_non_empty(self, n, frac, seed):
        ds = split_dataset(frames(n, 4), frac, seed)
        assert ds.subset("train") and ds.subset("test")

    def test_too_few(self):
        with pytest.raises(ValueError, match="at least 2 frames"):
            split_dataset(frames(1), 0.5, 0)

    @pytest.mark.parametrize("frac", [0.0, 1.0, -0.1])
    def test_bad_fraction(self, frac):
        with pytest.raises(ValueError):
            split_dataset(frames(4), frac, 0)


class TestWindow:
    def test_offset_range(self):
        frame = np.arange(43_560).astype(complex)
        offsets = {int(extract_window(frame, 40_960, s)[0].real) for s in range(300)}
        assert min(offsets) >= 0 and max(offsets) <= 2_600

    def test_whole_frame(self):
        frame = np.arange(10).astype(complex)
        np.testing.assert_array_equal(extract_window(frame, 10, 5), frame)

    def test_slice_contract(self):
        frame = InterferenceFrame(np.random.default_rng(2).standard_normal(500) + 0j)
        w = extract_window(frame, 100, 9)
        off = int(np.flatnonzero(frame.samples == w[0])[0])
        np.testing.assert_array_equal(w, frame.samples[off : off + 100])
        np.testing.assert_array_equal(w, extract_window(frame, 100, 9))

    def test_too_short(self):
        with pytest.raises(ValueError, match="length 50.*N=64"):
            extract_window(np.zeros(50, complex), 64, 0)


class TestRecenter:
    def test_tone(self):
        N = 1000
        x = np.exp(2j * np.pi * 0.2 * np.arange(N))
        y, shift = frequency_recenter(x)
        assert shift == pytest.approx(0.2, abs=1 / N)
        peak = np.fft.fftfreq(N)[np.argmax(np.abs(np.fft.fft(y)))]
        assert abs(peak) <= 1 / N

    def test_centred_white(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(4096) + 1j * rng.standard_normal(4096)
        y, shift = frequency_recenter(x)
        # a flat spectrum has its centroid at DC up to sampling noise
        assert abs(shift) <= 1 / 4096 * 20
        assert np.allclose(np.abs(y), np.abs(x))

    def test_twice(self):
        N = 512
        x = np.exp(2j * np.pi * 0.13 * np.arange(N)) + 0.3 * np.exp(-2j * np.pi * 0.05 * np.arange(N))
        y1, _ = frequency_recenter(x)
        y2, shift2 = frequency_recenter(y1)
        assert abs(shift2) <= 1 / N

    def test_zero(self):
        with pytest.raises(ValueError, match="no spectral content"):
            frequency_recenter(np.zeros(8, complex))


class TestMakeMixture:
    def test_unit_scale(self):
        s = np.zeros(64, complex)
        b = normalize_power(np.random.default_rng(0).standard_normal(64) + 0j)
        m = make_mixture(s, b, 0.0, 1)
        assert np.allclose(np.abs(m.b), np.abs(b))

    def test_minus_20_db_scale(self):
        b = normalize_power(np.random.default_rng(0).standard_normal(64) + 1j)
        m = make_mixture(np.zeros(64, complex), b, -20.0, 1)
        ratio = np.abs(m.b) / np.abs(b)
        assert np.allclose(ratio, 10.0, rtol=0, atol=1e-12)

    @settings(max_examples=30)
    @given(st.floats(-40, 20), st.integers(0, 2**31))
    def test_sinr_and_additivity(self, sinr, seed):
        rng = np.random.default_rng(seed)
        s = normalize_power(rng.standard_normal(256) + 1j * rng.standard_normal(256))
        b = normalize_power(rng.standard_normal(256) + 1j * rng.standard_normal(256))
        m = make_mixture(s, b, sinr, seed)
        assert abs(m.sinr_db - sinr) <= 0.1
        assert np.max(np.abs(m.y - m.s - m.b)) < 1e-12
        assert power(m.b) == pytest.approx(power(b) * 10 ** (-sinr / 10), rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="length mismatch"):
            make_mixture(np.zeros(4), np.zeros(5), 0, 0)

    def test_recipe_deterministic(self):
        r = MixtureRecipe(sinr_db=-10, N=2560, seed=17, interference_source="framed")
        a, b = synthesize_example(r), synthesize_example(r)
        for f in ("y", "s", "b", "bits"):
            assert np.array_equal(getattr(a, f), getattr(b, f))


class TestSynthetic:
    def test_framed_periodic(self):
        x = synth_interference_framed(256, 4096, 3)
        r = np.vdot(x, np.roll(x, -256)) / np.vdot(x, x)
        assert abs(r) == pytest.approx(1.0, abs=1e-9)

    def test_framed_power(self):
        assert power(synth_interference_framed(256, 4000, 1)) == pytest.approx(1.0, abs=1e-6)

    def test_framed_deterministic(self):
        assert np.array_equal(synth_interference_framed(64, 640, 8), synth_interference_framed(64, 640, 8))

    def test_framed_shared_frame(self):
        a = synth_interference_framed(64, 640, 1, frame_seed=5)
        b = synth_interference_framed(64, 640, 2, frame_seed=5)
        # same waveform up to circular shift and phase: the magnitude spectra agree
        np.testing.assert_allclose(np.abs(np.fft.fft(a)), np.abs(np.fft.fft(b)), atol=1e-9)

    def test_emi_full_duty(self):
        x = synth_interference_emi(128, 1.0, 2048, 0)
        assert np.all(np.abs(x) > 0)

    @pytest.mark.parametrize("duty", [0.1, 0.3, 0.5, 0.8])
    def test_emi_duty(self, duty):
        x = synth_interference_emi(100, duty, 100_000, 4)
        silent = np.mean(np.abs(x) < 1e-9)
        assert abs(silent - (1 - duty)) <= 0.05
        assert power(x) == pytest.approx(1.0, abs=1e-6)

    def test_emi_bad_duty(self):
        with pytest.raises(ValueError):
            synth_interference_emi(10, 0.0, 100, 0)

    def test_sources(self):
        for name, kw in [("awgn", {}), ("framed", {"frame_len": 32}), ("emi", {"burst_len": 16})]:
            draw = mixtures.interference_source(name, **kw)
            assert draw(512, 3).shape == (512,)
            assert np.array_equal(draw(512, 3), draw(512, 3))
        with pytest.raises(ValueError, match="unknown interference source"):
            mixtures.interference_source("nope")

    def test_recorded_source_respects_split(self):
        fr = [InterferenceFrame(np.full(64, i + 1, complex), "rec", i) for i in range(10)]
        ds = split_dataset(fr, 0.7, 1)
        test_vals = {f.samples[0] for f in ds.subset("test")}
        draw = mixtures.interference_source("recorded", dataset=ds, split="test")
        assert {draw(32, s)[0] for s in range(50)} <= test_vals


class TestSeeds:
    def test_distinct_streams(self):
        seeds = {example_seed(0, i, t) for i in range(20) for t in range(20)}
        assert len(seeds) == 400

    def test_stable(self):
        assert example_seed(5, 1, 2) == example_seed(5, 1, 2)
        assert 0 <= example_seed(2**40, 7) < 2**63


class TestAugment:
    def _example(self, seed=0):
        return synthesize_example(MixtureRecipe(sinr_db=-5, N=1024, seed=seed, interference_source="framed"))

    def test_invariants(self):
        ex = self._example()
        out = augment(ex, 12)
        assert np.array_equal(out.s, ex.s)
        assert np.array_equal(out.bits, ex.bits)
        assert power(out.b) == pytest.approx(power(ex.b), rel=1e-12)
        assert out.sinr_db == pytest.approx(ex.sinr_db, abs=1e-10)
        assert np.max(np.abs(out.y - out.s - out.b)) < 1e-12

    def test_identity_shift_and_phase(self):
        from rfsep.neural.training import augment_interference

        b = self._example().b[None]
        out = augment_interference(b, np.random.default_rng(0), shifts=[0], phases=[0.0])
        np.testing.assert_array_equal(out, b)
