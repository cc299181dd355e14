import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from imugest.errors import ContractViolationError
from imugest.ingest import GestureRecording, ParticipantMeta
from imugest.labels import GestureLabel
from imugest.preprocess import (WindowedDataset, drop_axis, load_dataset,
                                remove_gravity, save_dataset,
                                select_low_variance_participants,
                                slide_windows, split_by_participant,
                                window_recordings, zscore_apply, zscore_fit)


def make_recording(n, participant="p1", label=GestureLabel.CIRCLE,
                   values=None, source_id="r0"):
    if values is None:
        values = np.arange(n * 6, dtype=np.float64).reshape(n, 6)
    return GestureRecording(
        label=label, participant=ParticipantMeta(alias=participant),
        times=np.arange(n, dtype=np.int64) * 10, values=values,
        source_id=source_id)


def brute_force_window_count(n, window_len, step):
    return sum(1 for start in range(0, max(n, 1))
               if start % step == 0 and start + window_len <= n)


class TestSlideWindows:
    def test_paper_anchor_612(self):
        windows = slide_windows(make_recording(612), 250, 50)
        assert len(windows) == 8

    def test_exact_fit(self):
        assert len(slide_windows(make_recording(250), 250, 50)) == 1

    def test_300_gives_two(self):
        windows = slide_windows(make_recording(300), 250, 50)
        assert len(windows) == 2
        np.testing.assert_array_equal(windows[1].values,
                                      make_recording(300).values[50:300])

    def test_short_recording_warns_and_yields_nothing(self):
        with pytest.warns(UserWarning):
            assert slide_windows(make_recording(100), 250, 50) == []

    def test_windows_inherit_label_and_participant(self):
        windows = slide_windows(
            make_recording(300, participant="abc", label=GestureLabel.TILDE),
            250, 50)
        assert all(w.label == GestureLabel.TILDE for w in windows)
        assert all(w.participant == "abc" for w in windows)
        assert all(w.recording_id == "r0" for w in windows)

    @settings(max_examples=300, deadline=None)
    @given(n=st.integers(min_value=0, max_value=1000),
           step=st.sampled_from([10, 50, 100]),
           window_len=st.sampled_from([50, 250]))
    def test_count_matches_brute_force(self, n, step, window_len):
        import warnings
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            windows = slide_windows(make_recording(max(n, 0)), window_len, step)
        assert len(windows) == brute_force_window_count(n, window_len, step)

    def test_invalid_params(self):
        with pytest.raises(ContractViolationError):
            slide_windows(make_recording(300), 0, 50)
        with pytest.raises(ContractViolationError):
            slide_windows(make_recording(300), 250, 0)


class TestZScore:
    def dataset_from_values(self, values):
        rec = make_recording(len(values), values=values)
        return window_recordings([rec], window_len=len(values),
                                 step=len(values))

    def test_hand_computed_stats(self):
        values = np.zeros((3, 6))
        values[:, 0] = [1.0, 2.0, 3.0]
        ds = self.dataset_from_values(values)
        stats = zscore_fit(ds)
        assert stats.mean[0] == pytest.approx(2.0)
        assert stats.std[0] == pytest.approx(np.sqrt(2.0 / 3.0), abs=1e-12)
        out = zscore_apply(ds, stats).windows[0].values[:, 0]
        np.testing.assert_allclose(out, [-1.224744871391589, 0.0,
                                         1.224744871391589], atol=1e-12)

    def test_degenerate_channel_maps_to_zero(self):
        values = np.full((10, 6), 7.0)
        values[:, 1] = np.arange(10)
        ds = self.dataset_from_values(values)
        stats = zscore_fit(ds)
        assert stats.degenerate[0] and not stats.degenerate[1]
        out = zscore_apply(ds, stats).windows[0].values
        np.testing.assert_array_equal(out[:, 0], 0.0)

    def test_self_normalization(self):
        rng = np.random.default_rng(0)
        values = rng.normal(3.0, 2.5, (400, 6))
        ds = self.dataset_from_values(values)
        normalized = zscore_apply(ds, zscore_fit(ds))
        flat = normalized.values_tensor().reshape(-1, 6)
        assert np.all(np.abs(flat.mean(axis=0)) <= 1e-9)
        assert np.all(np.abs(flat.std(axis=0) - 1.0) <= 1e-6)

    def test_empty_fit_rejected(self):
        ds = WindowedDataset(windows=[], window_len=10, step=10)
        with pytest.raises(ContractViolationError):
            zscore_fit(ds)

    def test_fit_on_train_plus_val_changes_stats(self):
        # leakage check: including validation data must move the statistics
        train_vals = np.ones((100, 6)) * 2.0
        val_vals = np.ones((100, 6)) * 10.0
        train_ds = self.dataset_from_values(train_vals)
        both = WindowedDataset(
            windows=train_ds.windows
            + self.dataset_from_values(val_vals).windows,
            window_len=100, step=100)
        assert zscore_fit(train_ds).mean[0] != zscore_fit(both).mean[0]


class TestRemoveGravity:
    def test_constant_acceleration_removed(self):
        values = np.zeros((100, 6))
        values[:, 2] = 9.81
        rec = make_recording(100, values=values)
        out = remove_gravity(rec)
        np.testing.assert_allclose(out.values[:, :3], 0.0, atol=1e-12)

    def test_gyro_untouched(self):
        values = np.random.default_rng(1).normal(0, 1, (100, 6))
        rec = make_recording(100, values=values.copy())
        out = remove_gravity(rec)
        np.testing.assert_array_equal(out.values[:, 3:], values[:, 3:])

    def test_zero_mean_signal_recovered(self):
        n, k = 200, 25
        t = np.arange(n)
        signal = np.sin(2 * np.pi * t / k)  # zero mean over the first k
        values = np.zeros((n, 6))
        values[:, 2] = 9.81 + signal
        rec = make_recording(n, values=values)
        out = remove_gravity(rec, head_samples=k)
        np.testing.assert_allclose(out.values[:, 2], signal, atol=1e-9)

    def test_short_recording_uses_all_samples(self):
        values = np.zeros((10, 6))
        values[:, 0] = 4.0
        out = remove_gravity(make_recording(10, values=values),
                             head_samples=25)
        np.testing.assert_allclose(out.values[:, 0], 0.0, atol=1e-12)

    def test_original_not_mutated(self):
        values = np.zeros((50, 6))
        values[:, 2] = 9.81
        rec = make_recording(50, values=values)
        remove_gravity(rec)
        assert rec.values[0, 2] == 9.81


class TestDropAxis:
    def make_dataset(self):
        return window_recordings([make_recording(300)], 250, 50)

    def test_drop_removes_channel(self):
        ds = drop_axis(self.make_dataset(), "acc_z")
        assert ds.channel_names == ("acc_x", "acc_y", "gyro_x", "gyro_y",
                                    "gyro_z")
        assert all(w.values.shape[1] == 5 for w in ds.windows)

    def test_remaining_values_unchanged(self):
        original = self.make_dataset()
        dropped = drop_axis(original, "gyro_x")
        np.testing.assert_array_equal(dropped.windows[0].values[:, :3],
                                      original.windows[0].values[:, :3])
        np.testing.assert_array_equal(dropped.windows[0].values[:, 3:],
                                      original.windows[0].values[:, 4:])

    def test_unknown_channel(self):
        with pytest.raises(ContractViolationError):
            drop_axis(self.make_dataset(), "magnetometer_x")

    def test_commutes_with_zscore_on_survivors(self):
        ds = self.make_dataset()
        stats = zscore_fit(ds)
        a = drop_axis(zscore_apply(ds, stats), "acc_y")
        dropped = drop_axis(ds, "acc_y")
        b = zscore_apply(dropped, zscore_fit(dropped))
        np.testing.assert_allclose(a.windows[0].values, b.windows[0].values,
                                   atol=1e-12)


class TestSplits:
    def recordings(self):
        recs = []
        for alias in ("p1", "p2", "p3", "p4"):
            for i in range(3):
                recs.append(make_recording(50, participant=alias,
                                           source_id=f"{alias}/r{i}"))
        return recs

    def test_partition(self):
        recs = self.recordings()
        train, val = split_by_participant(recs, {"p2", "p4"})
        assert {r.participant.alias for r in train} == {"p1", "p3"}
        assert {r.participant.alias for r in val} == {"p2", "p4"}
        assert len(train) + len(val) == len(recs)

    def test_empty_validation(self):
        recs = self.recordings()
        train, val = split_by_participant(recs, set())
        assert len(train) == len(recs) and val == []

    def test_unknown_alias(self):
        with pytest.raises(ContractViolationError):
            split_by_participant(self.recordings(), {"p9"})


class TestSelectLowVariance:
    def test_constant_participant_wins(self):
        quiet = make_recording(100, participant="quiet",
                               values=np.ones((100, 6)))
        noisy_values = np.random.default_rng(0).normal(0, 5, (100, 6))
        noisy = make_recording(100, participant="noisy", values=noisy_values)
        assert select_low_variance_participants([quiet, noisy], 1) == {"quiet"}

    def test_k_equals_count(self):
        recs = [make_recording(50, participant=f"p{i}") for i in range(3)]
        assert select_low_variance_participants(recs, 3) == {"p0", "p1", "p2"}

    def test_k_too_large(self):
        with pytest.raises(ContractViolationError):
            select_low_variance_participants(
                [make_recording(10, participant="a")], 2)

    def test_score_matches_pooled_variance_oracle(self):
        rng = np.random.default_rng(5)
        rec_a1 = make_recording(40, participant="a",
                                values=rng.normal(0, 1.0, (40, 6)))
        rec_a2 = make_recording(60, participant="a",
                                values=rng.normal(3, 1.0, (60, 6)))
        rec_b = make_recording(100, participant="b",
                               values=rng.normal(0, 1.4, (100, 6)))
        # oracle: concatenate each participant's samples, then the mean over
        # channels of the per-channel population variance
        pooled_a = np.concatenate([rec_a1.values, rec_a2.values])
        pooled_b = rec_b.values
        score_a = pooled_a.var(axis=0).mean()
        score_b = pooled_b.var(axis=0).mean()
        expected = {"a"} if score_a < score_b else {"b"}
        assert select_low_variance_participants(
            [rec_a1, rec_a2, rec_b], 1) == expected

    def test_tie_breaks_lexicographically(self):
        same = np.ones((50, 6))
        recs = [make_recording(50, participant="zeta", values=same.copy()),
                make_recording(50, participant="alpha", values=same.copy())]
        assert select_low_variance_participants(recs, 1) == {"alpha"}


class TestDatasetCache:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        recs = [make_recording(300, participant="p1",
                               values=rng.normal(0, 1, (300, 6)),
                               source_id="p1/s01/ev00"),
                make_recording(320, participant="p2",
                               label=GestureLabel.SQUARE,
                               values=rng.normal(0, 1, (320, 6)),
                               source_id="p2/s01/ev01")]
        ds = window_recordings(recs, 250, 50)
        path = tmp_path / "cache.bin"
        save_dataset(ds, str(path))
        loaded = load_dataset(str(path))
        assert loaded.window_len == ds.window_len
        assert loaded.step == ds.step
        assert loaded.channel_names == ds.channel_names
        assert len(loaded) == len(ds)
        for a, b in zip(ds.windows, loaded.windows):
            np.testing.assert_array_equal(a.values, b.values)
            assert a.label == b.label
            assert a.participant == b.participant
            assert a.recording_id == b.recording_id

    def test_save_load_save_byte_identical(self, tmp_path):
        ds = window_recordings([make_recording(300)], 250, 50)
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_dataset(ds, str(p1))
        save_dataset(load_dataset(str(p1)), str(p2))
        assert p1.read_bytes() == p2.read_bytes()
