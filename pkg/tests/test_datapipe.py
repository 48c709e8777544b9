from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdrsnn.datapipe import (DataError, SynthSpec, Window, filter_label_bleed, kfold,
                             labels_from_intervals, load_windows, oversample, rms_features,
                             save_windows, segment, split, synth_emg)
from hdrsnn.encoders import AnalogRecording


def labelled(labels, samples=None, fs=200.0):
    labels = np.asarray(labels)
    if samples is None:
        samples = np.ones((8, labels.size))
    return AnalogRecording(fs, [f"c{i}" for i in range(8)], samples, labels)


def windows_of(counts):
    out, start = [], 0
    for label, n in counts.items():
        for _ in range(n):
            out.append(Window(start, start + 40, label))
            start += 40
    return out


# segmentation

def test_segment_two_seconds():
    ws = segment(labelled(np.zeros(400, dtype=int)))
    assert len(ws) == 10
    assert all(w.stop - w.start == 40 for w in ws)
    assert sorted(w.start for w in ws) == list(range(0, 400, 40))


def test_segment_majority_label():
    labels = np.r_[np.zeros(15, int), np.ones(25, int), np.ones(40, int) * 2]
    ws = sorted(segment(labelled(labels)), key=lambda w: w.start)
    assert [w.label for w in ws] == [1, 2]


def test_segment_shuffle_seeded():
    rec = labelled(np.zeros(4000, dtype=int))
    a = [w.start for w in segment(rec, seed=1)]
    assert a == [w.start for w in segment(rec, seed=1)]
    assert a != [w.start for w in segment(rec, seed=2)]


def test_segment_needs_labels():
    with pytest.raises(DataError):
        segment(AnalogRecording(200.0, ["a"], np.zeros((1, 100))))


# label bleed

def test_bleed_identical_class_windows_kept():
    labels = np.r_[np.zeros(200, int), np.ones(200, int)]
    samples = np.r_[np.ones(200), 5 * np.ones(200)][None, :].repeat(8, axis=0)
    ws = segment(labelled(labels, samples))
    assert len(filter_label_bleed(ws, labelled(labels, samples))) == len(ws)


def test_bleed_rest_window_resembling_gesture_dropped():
    # rest, gesture, then a rest window still carrying gesture-level activity
    labels = np.r_[np.zeros(200, int), np.ones(200, int), np.zeros(200, int)]
    amp = np.r_[0.1 * np.ones(200), 5 * np.ones(200), 5 * np.ones(40), 0.1 * np.ones(160)]
    rec = labelled(labels, amp[None, :].repeat(8, axis=0))
    ws = segment(rec)
    kept = filter_label_bleed(ws, rec)
    dropped = {w.start for w in ws} - {w.start for w in kept}
    assert dropped == {400}


def test_bleed_no_transitions_none_dropped():
    rng = np.random.default_rng(0)
    rec = labelled(np.full(800, 2), rng.normal(0, 1, (8, 800)))
    ws = segment(rec)
    assert filter_label_bleed(ws, rec) == ws


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10 ** 6))
def test_bleed_never_drops_clearly_separated_windows(seed):
    rng = np.random.default_rng(seed)
    labels = np.repeat(rng.integers(0, 3, 12), 40)
    amp = rng.uniform(0.1, 5.0, (8, labels.size))
    rec = labelled(labels, amp)
    ws = segment(rec, seed=seed)
    feats = rms_features(rec, ws)
    y = np.array([w.label for w in ws])
    cent = {c: feats[y == c].mean(axis=0) for c in np.unique(y)}
    kept = {w.start for w in filter_label_bleed(ws, rec)}
    for i, w in enumerate(ws):
        own = np.linalg.norm(feats[i] - cent[w.label])
        others = [np.linalg.norm(feats[i] - cent[c]) for c in cent if c != w.label]
        if all(d >= 2 * own for d in others):
            assert w.start in kept


# balancing and splitting

def test_oversample_balanced_unchanged():
    ws = windows_of({0: 5, 1: 5})
    assert oversample(ws) == ws


def test_oversample_minority_duplicated():
    ws = windows_of({0: 10, 1: 5})
    out = oversample(ws, seed=3)
    assert Counter(w.label for w in out) == {0: 10, 1: 10}
    dups = [w for w in out if w.duplicate]
    assert len(dups) == 5 and all(w.label == 1 for w in dups)
    originals = {w.source_key() for w in ws if w.label == 1}
    assert {w.source_key() for w in dups} <= originals
    assert oversample(ws, seed=3) == out


def test_split_eighty_twenty_stratified():
    ws = windows_of({0: 25, 1: 25, 2: 25, 3: 25})
    train, test = split(ws, 0.8, seed=0)
    assert len(train) == 80 and len(test) == 20
    for c in range(4):
        assert abs(sum(w.label == c for w in train) - 0.8 * 25) <= 1


def test_split_rejects_bad_ratio():
    with pytest.raises(DataError):
        split(windows_of({0: 4}), 1.0)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10 ** 6), n0=st.integers(2, 30), n1=st.integers(2, 30),
       n2=st.integers(2, 30))
def test_split_no_leakage_and_stratified(seed, n0, n1, n2):
    ws = oversample(windows_of({0: n0, 1: n1, 2: n2}), seed=seed)
    train, test = split(ws, 0.8, seed=seed)
    assert not {w.source_key() for w in train} & {w.source_key() for w in test}
    assert len(train) + len(test) == len(ws)
    for c, n in enumerate((n0, n1, n2)):
        distinct = {w.source_key() for w in train if w.label == c}
        assert abs(len(distinct) - 0.8 * n) <= 1
    assert split(ws, 0.8, seed=seed) == (train, test)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10 ** 6), k=st.integers(2, 5))
def test_kfold_partitions_sources(seed, k):
    ws = oversample(windows_of({0: 12, 1: 7, 2: 9}), seed=seed)
    folds = kfold(ws, k, seed=seed)
    assert len(folds) == k
    seen = []
    for train, test in folds:
        assert not {w.source_key() for w in train} & {w.source_key() for w in test}
        seen += [w.source_key() for w in test]
    assert sorted(seen) == sorted(w.source_key() for w in ws)


# synthetic corpus

def test_synth_silent_case():
    spec = SynthSpec(profiles=((0.0,) * 8,), band_weights=((0.5, 0.5),), noise_floor=0.0,
                     trials_per_class=2)
    assert np.all(synth_emg(spec).samples == 0.0)


def test_synth_layout_and_determinism():
    spec = SynthSpec()
    rec = synth_emg(spec)
    assert rec.sample_rate == 200.0 and rec.samples.shape[0] == 8
    n = int(spec.rest_duration * 200) + 3 * spec.trials_per_class * 600
    assert rec.n_samples == n
    assert Counter(rec.labels.tolist())[1] == spec.trials_per_class * 400
    again = synth_emg(SynthSpec())
    assert np.array_equal(rec.samples, again.samples) and np.array_equal(rec.labels, again.labels)
    assert not np.array_equal(rec.samples, synth_emg(SynthSpec(seed=1)).samples)


def test_synth_rejects_similar_profiles():
    with pytest.raises(DataError):
        SynthSpec(profiles=((0.5,) * 8, (0.55,) * 8), band_weights=((1, 0), (0, 1)))


def test_synth_nearest_centroid_separable():
    # oracle: held-out nearest-centroid RMS classifier at fixed gain
    rec = synth_emg(SynthSpec(gain_range=(1.0, 1.0), trials_per_class=8))
    train, test = split(segment(rec), 0.8, seed=0)
    f_tr, f_te = rms_features(rec, train), rms_features(rec, test)
    y_tr = np.array([w.label for w in train])
    y_te = np.array([w.label for w in test])
    cent = np.array([f_tr[y_tr == c].mean(axis=0) for c in range(4)])
    pred = np.argmin(((f_te[:, None] - cent[None]) ** 2).sum(axis=2), axis=1)
    assert (pred == y_te).mean() >= 0.9


def test_synth_gains_shared_across_gestures():
    spec = SynthSpec(noise_floor=0.0)
    rec = synth_emg(spec)
    ws = segment(rec)
    rms = rms_features(rec, ws).max(axis=1)
    per_class = {c: np.median([r for r, w in zip(rms, ws) if w.label == c]) for c in (1, 2, 3)}
    lo, hi = min(per_class.values()), max(per_class.values())
    assert hi / lo < 3


def test_prepared_corpus(corpus):
    counts = Counter(w.label for w in corpus)
    assert len(counts) == 4 and len(set(counts.values())) == 1
    assert min(counts.values()) >= 40
    for w in corpus[:20]:
        assert w.spikes.n_channels == 16 and w.spikes.duration == 200000.0


def test_labels_from_intervals(tmp_path):
    path = tmp_path / "labels.csv"
    path.write_text("t_start_s,t_end_s,label\n0.5,1.0,2\n1.5,2.0,1\n")
    labels = labels_from_intervals(path, 400, 200.0)
    assert labels[:100].tolist() == [0] * 100
    assert labels[100:200].tolist() == [2] * 100
    assert labels[300:].tolist() == [1] * 100


def test_window_archive_round_trip(tmp_path, corpus):
    subset = corpus[:5]
    save_windows(tmp_path / "arch", subset)
    assert (tmp_path / "arch" / "manifest.json").exists()
    back = load_windows(tmp_path / "arch")
    assert [(w.label, tuple(w.source), w.duplicate) for w in back] == \
           [(w.label, tuple(w.source), w.duplicate) for w in subset]
    for a, b in zip(back, subset):
        assert np.array_equal(a.spikes.chan, b.spikes.chan)
        assert np.allclose(a.spikes.times, b.spikes.times, rtol=0, atol=5e-5)
